import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def unit_vectors(n_min=2, n_max=8):
    """Hypothesis strategy for random unit Jones vectors."""

    @st.composite
    def _draw(draw):
        n = draw(st.integers(n_min, n_max))
        seed = draw(st.integers(0, 2**32 - 1))
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        return v / np.linalg.norm(v)

    return _draw()


def unit_pairs(n_min=2, n_max=8):
    @st.composite
    def _draw(draw):
        n = draw(st.integers(n_min, n_max))
        seed = draw(st.integers(0, 2**32 - 1))
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return v[0], v[1]

    return _draw()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def thomson_4_64():
    """Coulomb-shaped (4, 64) constellation shared by the slower tests."""
    from mvm.core import random_constellation
    from mvm.shaping import Potential, optimize

    return optimize(random_constellation(4, 64, seed=0), Potential.coulomb())[0]


@pytest.fixture(scope="session")
def ring8():
    """Eight equally spaced points on the equator of the N = 2 Stokes sphere."""
    from mvm.core import Constellation

    phi = np.pi * np.arange(8) / 8  # Stokes azimuth 2*phi
    return Constellation.from_rows(np.stack([np.ones(8), np.exp(1j * phi)], axis=1) / np.sqrt(2))


@pytest.fixture(scope="session")
def antiprism8():
    from mvm.core import random_constellation
    from mvm.shaping import Potential, optimize

    return optimize(random_constellation(2, 8, seed=0), Potential.coulomb())[0]


# ---- acceptance reporting ----------------------------------------------------

_ACCEPTANCE = {}


@pytest.fixture
def report(request):
    """Attach a one-line measurement summary to the acceptance line of this test."""

    def add(text):
        request.node.user_properties.append(("acceptance_detail", str(text)))

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    num, name = mark.args
    entry = _ACCEPTANCE.setdefault(num, {"name": name, "ok": True, "details": []})
    if rep.failed or rep.skipped:
        entry["ok"] = False
    if rep.when == "call":
        entry["details"] += [v for k, v in item.user_properties if k == "acceptance_detail"]


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[num]
        verdict = "PASS" if e["ok"] else "FAIL"
        detail = "; ".join(e["details"])
        terminalreporter.write_line(f"ACCEPTANCE {num:2d} {e['name']}: {verdict}" + (f" ({detail})" if detail else ""))
