import pytest

from ddclab.attack import clean_package, malicious_package, multi_trigger_shim
from ddclab.selfhost.toolchain import T, shipped_source
from ddclab.tcompiler.inputs import SourceTree
from ddclab.vm import run_image


@pytest.fixture(scope="session")
def clean():
    return clean_package()


@pytest.fixture(scope="session")
def mal(clean):
    return malicious_package()


@pytest.fixture(scope="session")
def mal_multi(clean):
    return malicious_package(multi_trigger_shim())


@pytest.fixture(scope="session")
def t_runtime():
    return T.build(shipped_source())[1]


@pytest.fixture(scope="session")
def run_t(t_runtime):
    """Compile a MiniLang snippet with T (runtime linked) and run it."""

    def run(src, argv=("prog",), files=None, **kw):
        if isinstance(src, str):
            src = src.encode()
        image = T.compile_program(SourceTree.single(src, "t.ml"), t_runtime)
        return run_image(image, argv, files or {}, **kw)

    return run
