"""Compare the numba-compiled interpreter with the plain-Python fallback.

    python3 benchmarks/bench_vm.py [--repeat N] [--self-compile]

Each engine runs in its own process because DDCLAB_JIT is read at import.
The JIT figure excludes compilation (one warm-up run first); both engines
must produce identical ExecutionResults, which is checked.
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import hashlib, json, sys, time
from ddclab.vm import kernel, run_image
from ddclab.selfhost.toolchain import T, shipped_source
from ddclab.tcompiler.inputs import SourceTree

repeat, self_compile = int(sys.argv[1]), sys.argv[2] == "1"
src = b'''
fn fib(n) { if (n < 2) { return n } return fib(n - 1) + fib(n - 2) }
main {
    var s = ""
    var i = 0
    while (i < 2000) { s = cat(s, chr(65 + i % 26)); i = i + 1 }
    print(cat(itos(fib(18)), cat(" ", itos(len(s)))))
}
'''
image = T.compile_program(SourceTree.single(src, "bench.ml"))
jobs = [("fib+strings", image, ["bench"], {})]
if self_compile:
    comp, rt = T.build(shipped_source())
    s = shipped_source()
    files = {("src/" + p).encode(): d for p, d in s.files.items()}
    jobs.append(("mlc object rt.ml", comp, ["mlc", "object", "src/runtime/rt.ml", "out.bin", ""], files))
out = {"jit": kernel.JIT_ENABLED, "jobs": {}}
for name, img, argv, sandbox in jobs:
    r = run_image(img, argv, sandbox)  # warm-up, includes numba compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        r2 = run_image(img, argv, sandbox)
        times.append(time.perf_counter() - t0)
        assert r2 == r
    out["jobs"][name] = {"best_s": min(times), "steps": r.steps, "result": hashlib.sha256(r.canonical_bytes()).hexdigest()}
print(json.dumps(out))
"""


def run(flag: str, repeat: int, self_compile: bool) -> dict:
    env = dict(os.environ, DDCLAB_JIT=flag)
    p = subprocess.run(
        [sys.executable, "-c", WORKER, str(repeat), "1" if self_compile else "0"],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(p.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--self-compile", action="store_true", help="also time the compiler building rt.ml (slow without JIT)")
    a = ap.parse_args()
    jit = run("1", a.repeat, a.self_compile)
    plain = run("0", max(1, a.repeat // 3), a.self_compile)
    print(f"{'job':<20} {'steps':>10} {'jit s':>9} {'python s':>10} {'speedup':>8}")
    for name, j in jit["jobs"].items():
        p = plain["jobs"][name]
        if j["result"] != p["result"]:
            sys.exit(f"{name}: engines disagree")
        print(f"{name:<20} {j['steps']:>10} {j['best_s']:>9.4f} {p['best_s']:>10.3f} {p['best_s'] / j['best_s']:>7.0f}x")


if __name__ == "__main__":
    main()
