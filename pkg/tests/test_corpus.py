import math

import pytest

from ddclab.attack.shim import LOGIN_PATTERN, SELF_PATTERN, SELF_PATTERN_2
from ddclab.corpus import load_corpus
from ddclab.selfhost.toolchain import T

CORPUS = {p.name: p for p in load_corpus()}


@pytest.fixture(scope="module")
def t_results(t_runtime):
    return {n: p.run(T.compile_program(p.tree(), t_runtime)) for n, p in CORPUS.items()}


def _collatz(n):
    s = 0
    while n != 1:
        n = n // 2 if n % 2 == 0 else 3 * n + 1
        s += 1
    return s


def _primes(limit):
    return [p for p in range(2, limit + 1) if all(p % d for d in range(2, math.isqrt(p) + 1))]


def test_corpus_size_and_manifest():
    assert len(CORPUS) >= 25
    assert CORPUS["args_echo"].args
    assert CORPUS["file_io"].files


def test_no_trigger_patterns():
    for p in CORPUS.values():
        for pat in (SELF_PATTERN, SELF_PATTERN_2, LOGIN_PATTERN):
            assert pat not in p.source, p.name


def test_trap_free(t_results):
    for name, r in t_results.items():
        assert r.trap is None, (name, r.trap)


# oracles below are computed in Python, independently of both compilers


def test_hello(t_results):
    assert t_results["hello"].stdout == b"hello, world\n"


def test_fib(t_results):
    fib = [0, 1]
    while len(fib) < 21:
        fib.append(fib[-1] + fib[-2])
    assert t_results["fib_recursive"].stdout == (" ".join(map(str, fib)) + " \n").encode()


def test_factorials(t_results):
    lines = t_results["fact_iter"].stdout.decode().splitlines()
    for line in lines:
        n, _, v = line.partition("! = ")
        # 64-bit wrapping, as the language specifies
        expected = (math.factorial(int(n)) + 2**63) % 2**64 - 2**63
        assert int(v) == expected


def test_fizzbuzz(t_results):
    out = t_results["fizzbuzz"].stdout.decode().split()
    for i, word in enumerate(out, 1):
        expected = "FizzBuzz" if i % 15 == 0 else "Fizz" if i % 3 == 0 else "Buzz" if i % 5 == 0 else str(i)
        assert word == expected


def test_primes(t_results):
    r = t_results["primes_sieve"]
    ps = _primes(200)
    assert r.exit_code == len(ps)
    assert r.stdout.split()[: len(ps)] == [str(p).encode() for p in ps]


def test_collatz(t_results):
    best = max(range(1, 300), key=lambda n: (_collatz(n), -n))
    assert t_results["collatz"].stdout == f"{best} takes {_collatz(best)} steps\n".encode()


def test_gcd_lcm(t_results):
    for line in t_results["gcd_lcm"].stdout.decode().splitlines():
        pair, *rest = line.split()
        a, b = map(int, pair.split(","))
        fields = dict(x.split("=") for x in rest)
        assert int(fields["gcd"]) == math.gcd(a, b)
        if "lcm" in fields:
            assert int(fields["lcm"]) == math.lcm(a, b)


def test_hanoi(t_results):
    assert t_results["towers_hanoi"].stdout.startswith(b"31 moves\n")


def test_files_written(t_results):
    assert set(t_results["file_io"].files_written) == {b"output.txt", b"stats.txt"}


def test_argv_passthrough(t_results):
    r = t_results["args_echo"]
    assert r.stdout.startswith(f"{len(CORPUS['args_echo'].argv())} args\n".encode())
