import numpy as np
import pytest

from ipll_lab import IpllGains, kernels
from ipll_lab.dynamics import ModelKind, pack_params
from ipll_lab.simulator import Event, Scenario, integrate, baseline_scenario

needs_cython = pytest.mark.skipif("cython" not in kernels.available_backends(),
                                  reason="compiled extension not built")


def test_python_backend_always_available():
    assert "python" in kernels.available_backends()
    assert kernels.BACKEND in kernels.available_backends()


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_segment_integrator("fortran")


def test_set_backend_round_trip():
    before = kernels.BACKEND
    try:
        kernels.set_backend("python")
        assert kernels.BACKEND == "python"
        assert kernels.get_segment_integrator() is kernels.get_segment_integrator("python")
    finally:
        kernels.set_backend(before)
    assert kernels.BACKEND == before


@needs_cython
@pytest.mark.parametrize("kind", list(ModelKind))
@pytest.mark.parametrize("l_g", [4.1e-3, 11.25e-3])
def test_backends_agree(kind, l_g):
    sc = baseline_scenario(kind, l_g=l_g, duration=0.5).with_(
        events=(Event(0.2, "u_g", 300.0), Event(0.3, "l_g", l_g * 0.95)), decimation=3)
    a = integrate(sc, backend="python")
    b = integrate(sc, backend="cython")
    assert np.array_equal(a.t, b.t) and np.array_equal(a.l_g, b.l_g)
    for col in ("delta", "omega", "u_q"):
        x, y = getattr(a, col), getattr(b, col)
        assert np.max(np.abs(x - y)) <= 1e-10 * max(1.0, np.max(np.abs(x)))
    assert a.verdict.name == b.verdict.name


@needs_cython
def test_backends_agree_on_nonfinite_abort(grid, setpoint):
    sc = Scenario(ModelKind.IPLL_REDUCED, grid, setpoint, IpllGains(1e300, 1e300),
                  (0.3, grid.omega_g + 1.0), 0.01, 1e-4)
    a = integrate(sc, backend="python")
    b = integrate(sc, backend="cython")
    assert len(a) == len(b) and a.verdict == b.verdict


def test_segment_contract():
    f = kernels.get_segment_integrator("python")
    sc = baseline_scenario(duration=0.01)
    out = np.zeros((5, 3))
    d, y, done, pos, ok = f(1, pack_params(sc.grid, sc.setpoint, sc.gains), *sc.initial,
                            1e-3, 10, 0, 3, out, 0)
    # rows are written before steps 0, 3, 6, 9
    assert (done, pos, ok) == (10, 4, True)
    assert out[0, 0] == sc.initial[0]
    assert np.all(out[4] == 0)
