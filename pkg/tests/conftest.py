import numpy as np
import pytest

from relupath import _backend
from relupath.network import general_from_layers, OutputActivation


def random_general_net(rng, L, d, widths=None, *, max_width=8, offsets=True, scale=1.0, output=None):
    """Signed ReLU net with ``L`` weight levels (``L - 1`` hidden layers)."""
    if widths is None:
        widths = list(rng.integers(1, max_width + 1, size=L - 1))
    dims = [d] + list(widths) + [1]
    layers = []
    for k in range(L):
        w = scale * rng.normal(size=(dims[k + 1], dims[k]))
        # sprinkle exact zeros so dead units and sparse rows show up
        w[rng.random(w.shape) < 0.15] = 0.0
        b = scale * rng.normal(size=dims[k + 1]) if offsets else np.zeros(dims[k + 1])
        layers.append((w, b))
    return general_from_layers(d, layers, output or OutputActivation())


def random_inputs(rng, m, d):
    return rng.uniform(-1.0, 1.0, size=(m, d))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def v8_net():
    """f(x) = 2 relu(3 x1) + relu(x1 + x2), total variation 8."""
    return general_from_layers(2, [([[3.0, 0.0], [1.0, 1.0]], [0.0, 0.0]), ([[2.0, 1.0]], [0.0])])


BACKENDS = ["python"] + (["cython"] if _backend.compiled_kernels is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test against each available kernel implementation."""
    chosen = _backend.compiled_kernels if request.param == "cython" else _backend.python_kernels
    for mod in ("relupath.variation", "relupath.complexity", "relupath.entropy"):
        monkeypatch.setattr(f"{mod}.kernels", chosen)
    return request.param


# ------------------------------------------------------------ acceptance

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _CRITERIA[number] = (title, rep.outcome, rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcome, duration = _CRITERIA[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}  ({duration:.1f}s)")
