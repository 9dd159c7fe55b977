"""ddclab command-line interface.

Exit codes: 0 verified/success, 1 mismatch or failed check, 2 nondeterministic,
3 source/compile error, 4 usage or configuration error.  No subcommand reads
environment variables or touches the network; every input is an argument or a
file named by one.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .descriptor import DescriptorError, load_package, write_package
from .report import EXIT_CODES, Report, canonical_json, merge_reports

USAGE_EXIT = EXIT_CODES["usage"]


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit 2, which means "nondeterministic" here
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p):
    p.add_argument("--format", choices=("text", "structured"), default="text", help="report format")
    p.add_argument("--out", help="write the report to this file instead of stdout")


def _flag(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key, value


def build_parser() -> Parser:
    ap = Parser(prog="ddclab", description="Diverse double-compiling lab for the MiniLang toolchain.")
    ap.add_argument("--version", action="version", version=f"ddclab {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=Parser, metavar="COMMAND")

    p = sub.add_parser("bootstrap", help="build the self-hosted compiler from source with T and iterate to a fixpoint")
    p.add_argument("--source-dir", help="directory holding compiler/mlc.ml and runtime/rt.ml (default: shipped s_A)")
    p.add_argument("--out-dir", help="write the resulting package here")
    p.add_argument("--name", default="minilang")
    p.add_argument("--max-generations", type=int, default=5)
    _common(p)

    p = sub.add_parser("stabilize", help="self-compile (possibly new) source with a package until byte-stable")
    p.add_argument("--package", required=True, help="package descriptor (*.pkg.json)")
    p.add_argument("--source-dir", help="new source directory (default: the package's own source)")
    p.add_argument("--out-dir")
    p.add_argument("--max-generations", type=int, default=5)
    _common(p)

    p = sub.add_parser("tcompile", help="compile one MiniLang unit with the trusted compiler T")
    p.add_argument("source", help="MiniLang source file")
    p.add_argument("--entry", help="unit path recorded in diagnostics (default: the file name)")
    p.add_argument("--emit", choices=("program", "object"), default="program")
    p.add_argument("--runtime", help="runtime object or archive to link (program mode)")
    p.add_argument("--flag", action="append", type=_flag, default=[], help="compilation flag key=value")
    p.add_argument("-o", "--output", required=True, help="where to write the image/object")
    _common(p)

    p = sub.add_parser("regen-check", help="does the package regenerate itself bit-for-bit?")
    p.add_argument("--package", required=True)
    _common(p)

    p = sub.add_parser("ddc", help="diverse double-compile a package against its source using T")
    p.add_argument("--package", required=True)
    p.add_argument("--mutation", default="none", help="e.g. 'ws', 'rename:1,reorder:7' or 'none'")
    p.add_argument("--stage2-flag", action="append", type=_flag, default=[], help="override a stage-2 flag")
    _common(p)

    p = sub.add_parser("determinism", help="compile the same input repeatedly and compare")
    p.add_argument("--package", required=True)
    p.add_argument("--program", action="append", default=[], help="program file (default: self-compile)")
    p.add_argument("--corpus", action="store_true", help="check every conformance corpus program")
    p.add_argument("--runs", type=int, default=3)
    _common(p)

    p = sub.add_parser("mutate", help="apply semantics-preserving mutations to source")
    p.add_argument("--source", required=True, help="a .ml file or a directory of them")
    p.add_argument("--spec", required=True, help="e.g. 'ws,rename:3'")
    p.add_argument("--output", required=True, help="output file or directory")
    _common(p)

    p = sub.add_parser("attack", help="build attack packages and run scenarios")
    asub = p.add_subparsers(dest="attack_command", parser_class=Parser, metavar="ACTION")
    q = asub.add_parser("splice", help="splice the shim into a package's compiler binary")
    q.add_argument("--package", required=True)
    q.add_argument("--out-dir", required=True)
    q.add_argument("--shim", choices=("single", "multi"), default="single", help="one or two self triggers")
    q.add_argument("--master", default=None, help="backdoor master password")
    _common(q)
    q = asub.add_parser("popup", help="build the v1 -> v2 -> v3 pop-up chain")
    q.add_argument("--out-dir")
    _common(q)
    q = asub.add_parser("scenarios", help="list (or run) the shipped scenarios")
    q.add_argument("names", nargs="*")
    q.add_argument("--run", action="store_true")
    _common(q)

    p = sub.add_parser("report", help="hash listing for a package, or merge structured reports")
    p.add_argument("--package")
    p.add_argument("--merge", nargs="+", metavar="REPORT")
    _common(p)
    return ap


# -- helpers ---------------------------------------------------------------------------


def _package_artifacts(pkg) -> dict[str, bytes]:
    arts = {"compiler_image": pkg.compiler_image, "runtime": pkg.artifact("runtime")}
    for path, data in pkg.source.files.items():
        arts[f"src/{path}"] = data
    return arts


def _read_source_dir(d: str):
    from .selfhost.toolchain import COMPILER_SOURCE, RUNTIME_SOURCE
    from .tcompiler.inputs import SourceTree

    root = Path(d)
    files = {}
    for rel in (COMPILER_SOURCE, RUNTIME_SOURCE):
        f = root / rel
        if not f.is_file():
            raise DescriptorError(f"{f} does not exist")
        files[rel] = f.read_bytes()
    return SourceTree(files, COMPILER_SOURCE)


def _verdict_report(command, verdict, digest, pkg) -> Report:
    text = [f"  {d.component}: {h}" for d in verdict.diagnosis for h in d.hints]
    for d in verdict.diagnosis:
        for r in d.diff_regions[:8]:
            fn = f" in {r.function}" if r.function else ""
            text.append(f"  region {d.component}/{r.section} +{r.offset} len {r.length}{fn}")
    body = verdict.to_dict()
    body["text"] = text
    return Report(command, verdict.kind, verdict.detail, digest, _package_artifacts(pkg), body)


# -- commands ----------------------------------------------------------------------------


def cmd_bootstrap(a) -> Report:
    from .selfhost.toolchain import ConvergenceError, bootstrap, shipped_source

    src = _read_source_dir(a.source_dir) if a.source_dir else shipped_source()
    try:
        pkg, log = bootstrap(src, max_generations=a.max_generations, name=a.name)
    except ConvergenceError as exc:
        return Report("bootstrap", "failed", str(exc), body={"log": exc.log.to_dict(), "diffs": exc.diffs})
    body = {"log": log.to_dict()}
    if a.out_dir:
        body["descriptor"] = write_package(pkg, a.out_dir).name
    return Report(
        "bootstrap", "success", f"fixpoint after {log.iterations} self-compiles", None, _package_artifacts(pkg), body
    )


def cmd_stabilize(a) -> Report:
    from .selfhost.toolchain import ConvergenceError, stabilize

    pkg, _, digest = load_package(a.package)
    src = _read_source_dir(a.source_dir) if a.source_dir else None
    try:
        new, log = stabilize(pkg, src, max_generations=a.max_generations)
    except ConvergenceError as exc:
        return Report("stabilize", "failed", str(exc), digest, body={"log": exc.log.to_dict(), "diffs": exc.diffs})
    body = {"log": log.to_dict()}
    if a.out_dir:
        body["descriptor"] = write_package(new, a.out_dir).name
    return Report("stabilize", "success", f"stable after {log.iterations} self-compiles", digest, _package_artifacts(new), body)


def cmd_tcompile(a) -> Report:
    from .selfhost.toolchain import runtime_from_archive
    from .tcompiler import CompileError, UnknownFlagError, t_compile_object, t_compile_program
    from .tcompiler.inputs import BuildInputs, SourceTree
    from .vm.archive import ARCHIVE_MAGIC

    try:
        data = Path(a.source).read_bytes()
    except OSError as exc:
        raise DescriptorError(f"cannot read {a.source}: {exc.strerror}") from None
    runtime = None
    if a.runtime:
        runtime = Path(a.runtime).read_bytes()
        if runtime[:4] == ARCHIVE_MAGIC:
            runtime = runtime_from_archive(runtime)
    tree = SourceTree.single(data, a.entry or Path(a.source).name)
    inputs = BuildInputs(flags=tuple(a.flag), embedded_runtime=runtime if a.emit == "program" else None)
    try:
        if a.emit == "program":
            out = t_compile_program(tree, inputs).serialize()
        else:
            out = t_compile_object(tree, inputs).serialize()
    except UnknownFlagError as exc:
        raise DescriptorError(str(exc)) from None
    except CompileError as exc:
        return Report("tcompile", "semantic_error", str(exc), body={"diagnostics": [str(d) for d in exc.diagnostics]})
    Path(a.output).write_bytes(out)
    return Report("tcompile", "success", f"wrote {len(out)} bytes to {Path(a.output).name}", None, {Path(a.output).name: out})


def cmd_regen(a) -> Report:
    from .ddc import regen_check

    pkg, _, digest = load_package(a.package)
    r = regen_check(pkg)
    kind = r.kind or "verified"
    summary = "c(s_A, A) == A for every component" if r.passed else r.detail
    return Report("regen-check", kind, summary, digest, _package_artifacts(pkg), r.to_dict())


def cmd_ddc(a) -> Report:
    from .ddc import MutationError, MutationSpec, ddc

    pkg, _, digest = load_package(a.package)
    try:
        spec = MutationSpec.parse(a.mutation)
    except MutationError as exc:
        raise DescriptorError(str(exc)) from None
    stage2 = None
    if a.stage2_flag:
        flags = dict(pkg.inputs.flags)
        flags.update(a.stage2_flag)
        stage2 = type(pkg.inputs)(tuple(flags.items()), pkg.inputs.embedded_runtime, pkg.inputs.deterministic_seed)
    v = ddc(pkg, mutation=spec, stage2_inputs=stage2)
    return _verdict_report("ddc", v, digest, pkg)


def cmd_determinism(a) -> Report:
    from .ddc import determinism_check
    from .tcompiler.inputs import SourceTree

    if a.runs < 2:
        raise DescriptorError("--runs must be at least 2")
    pkg, _, digest = load_package(a.package)
    targets = []
    for f in a.program:
        targets.append((Path(f).name, SourceTree.single(Path(f).read_bytes(), Path(f).name)))
    if a.corpus:
        from .corpus import load_corpus

        targets.extend((p.path, p.tree()) for p in load_corpus())
    if not targets:
        targets = [("<self>", None)]
    results = {}
    for name, tree in targets:
        results[name] = determinism_check(pkg, tree, runs=a.runs).to_dict()
    bad = sorted(n for n, r in results.items() if not r["equal"])
    kind = "nondeterministic" if bad else "verified"
    summary = f"{len(targets) - len(bad)}/{len(targets)} inputs identical over {a.runs} runs"
    body = {"results": results, "text": [f"  differs: {n}" for n in bad]}
    return Report("determinism", kind, summary, digest, _package_artifacts(pkg), body)


def cmd_mutate(a) -> Report:
    from .ddc import MutationError, MutationLog, MutationSpec, mutate_source
    from .tcompiler import CompileError
    from .tcompiler.inputs import SourceTree

    try:
        spec = MutationSpec.parse(a.spec)
    except MutationError as exc:
        raise DescriptorError(str(exc)) from None
    src = Path(a.source)
    if src.is_dir():
        files = {p.relative_to(src).as_posix(): p.read_bytes() for p in sorted(src.rglob("*.ml"))}
        if not files:
            raise DescriptorError(f"no .ml files under {src}")
    elif src.is_file():
        files = {src.name: src.read_bytes()}
    else:
        raise DescriptorError(f"{src} does not exist")
    tree = SourceTree(files, sorted(files)[0])
    log = MutationLog()
    try:
        out = mutate_source(tree, spec, log)
    except CompileError as exc:
        return Report("mutate", "semantic_error", str(exc))
    dest = Path(a.output)
    if src.is_dir():
        for rel, data in out.files.items():
            (dest / rel).parent.mkdir(parents=True, exist_ok=True)
            (dest / rel).write_bytes(data)
    else:
        dest.write_bytes(out.files[src.name])
    skipped = len(log.skipped())
    return Report(
        "mutate", "success", f"applied {spec} ({skipped} transform applications skipped)", None,
        {f"out/{k}": v for k, v in out.files.items()}, {"log": log.to_list()},
    )


def cmd_attack(a) -> Report:
    from . import attack

    if a.attack_command == "splice":
        pkg, _, digest = load_package(a.package)
        spec = attack.multi_trigger_shim if a.shim == "multi" else attack.default_shim
        master = a.master.encode() if a.master is not None else attack.DEFAULT_MASTER
        mal = attack.splice_shim(pkg, spec(master))
        path = write_package(mal, a.out_dir)
        return Report(
            "attack splice", "success", f"wrote {path.name}", digest, _package_artifacts(mal),
            {"descriptor": path.name, "shim": a.shim},
        )
    if a.attack_command == "popup":
        chain = attack.build_popup_chain(a1=attack.clean_package())
        body = {}
        if a.out_dir:
            for label, pkg in (("A1", chain.A1), ("A2", chain.A2), ("A3", chain.A3)):
                body[label] = write_package(pkg, Path(a.out_dir) / label, label).relative_to(a.out_dir).as_posix()
        arts = {f"{k}/compiler_image": p.compiler_image for k, p in (("A1", chain.A1), ("A2", chain.A2), ("A3", chain.A3))}
        arts["s_v2/compiler/mlc.ml"] = chain.s_v2.files["compiler/mlc.ml"]
        arts["s_v3/compiler/mlc.ml"] = chain.s_v3.files["compiler/mlc.ml"]
        return Report("attack popup", "success", "built A1 -> A2 (from s_v2) -> A3 (from clean s_v3)", None, arts, body)
    if a.attack_command == "scenarios":
        names = a.names or list(attack.SCENARIOS)
        unknown = [n for n in names if n not in attack.SCENARIOS]
        if unknown:
            raise DescriptorError(f"unknown scenario(s) {', '.join(unknown)}; known: {', '.join(attack.SCENARIOS)}")
        if not a.run:
            return Report("attack scenarios", "success", f"{len(names)} scenarios", body={"text": [f"  {n}" for n in names]})
        results = [attack.run_scenario(attack.get_scenario(n)) for n in names]
        text = []
        for r in results:
            text.append(f"  {'ok  ' if r.ok else 'FAIL'} {r.name}")
            for s in r.subjects:
                text.append(f"       {s.label}: regen {s.regen}, ddc {s.verdict.kind} (expected {s.expected_verdict})")
            for c, ok in sorted(r.checks.items()):
                text.append(f"       {'+' if ok else '-'} {c}")
        ok = all(r.ok for r in results)
        return Report(
            "attack scenarios", "success" if ok else "failed",
            f"{sum(r.ok for r in results)}/{len(results)} scenarios behave as expected", None, {},
            {"results": [r.to_dict() for r in results], "text": text},
        )
    raise UsageError("attack needs an action: splice, popup or scenarios")


def cmd_report(a) -> Report:
    if a.merge:
        docs = []
        for f in a.merge:
            try:
                docs.append(json.loads(Path(f).read_text()))
            except (OSError, json.JSONDecodeError) as exc:
                raise DescriptorError(f"cannot read report {f}: {exc}") from None
        merged = merge_reports(docs)
        return Report("report", merged["verdict"], f"merged {len(docs)} reports", body=merged)
    if not a.package:
        raise UsageError("report needs --package or --merge")
    pkg, _, digest = load_package(a.package)
    return Report("report", "success", f"package {pkg.name}", digest, _package_artifacts(pkg))


COMMANDS = {
    "bootstrap": cmd_bootstrap,
    "stabilize": cmd_stabilize,
    "tcompile": cmd_tcompile,
    "regen-check": cmd_regen,
    "ddc": cmd_ddc,
    "determinism": cmd_determinism,
    "mutate": cmd_mutate,
    "attack": cmd_attack,
    "report": cmd_report,
}


def run_cli(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(stderr)
            return USAGE_EXIT
        report = COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=stderr)
        return USAGE_EXIT
    except (DescriptorError, ValueError) as exc:
        # ValueError covers bad budgets and malformed runtime objects
        print(f"ddclab: error: {exc}", file=stderr)
        return USAGE_EXIT
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    rendered = report.render(args.format)
    if args.out:
        Path(args.out).write_text(rendered)
        print(f"{report.kind}: {report.summary}", file=stdout)
    else:
        stdout.write(rendered)
    return report.exit_code


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
