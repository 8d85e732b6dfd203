import pytest

from symplectic_fluid.dynamics import CatalogSpec, make_scene

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        key = marker.args[0]
        ok = rep.passed
        _CRITERIA.setdefault(key, []).append((item.name, ok))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        results = _CRITERIA[key]
        failed = [name for name, ok in results if not ok]
        verdict = "PASS" if not failed else "FAIL"
        line = f"criterion {key}: {verdict} ({len(results) - len(failed)}/{len(results)} tests)"
        if failed:
            line += "  failing: " + ", ".join(failed)
        terminalreporter.write_line(line)


def beltrami(nu=0.01, n=32, phi="linear", **params):
    prm = {"A": 1.0, "B": 1.0, "C": 1.0, "lambda": 1}
    prm.update(params)
    return make_scene(CatalogSpec("decaying_beltrami", prm, nu=nu, n_space=n, phi=phi))


def shear(n=16, profile="sin(y)", phi="sin(z)"):
    return make_scene(CatalogSpec("shear_euler", {"profile": profile, "phi": phi}, n_space=n))


@pytest.fixture(scope="session")
def beltrami32():
    return beltrami()


@pytest.fixture(scope="session")
def beltrami16():
    return beltrami(n=16)


@pytest.fixture(scope="session")
def shear16():
    return shear()


@pytest.fixture(scope="session")
def drift16():
    """Inviscid two-component Beltrami field with an exactly advected scalar."""
    return beltrami(nu=0.0, n=16, phi="drift", C=0.0)
