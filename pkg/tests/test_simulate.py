import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conftest import FIG6, FIG7
from flockwave.coupling import CouplingConfig, FlockSpec
from flockwave.simulate import IntegrationError, IntegratorOptions, integrate, relative_positions
from flockwave.system import build_system, leader_force


def rk4_order(spec, t_max=8.0, dt=0.2):
    ref = integrate(spec, IntegratorOptions(t_max, method="rk4", dt=dt / 16, n_out=1)).z[-1]
    errs = []
    for k in range(3):
        h = dt / 2 ** k
        z = integrate(spec, IntegratorOptions(t_max, method="rk4", dt=h, n_out=1)).z[-1]
        errs.append(np.max(np.abs(z - ref)))
    return [math.log2(errs[i] / errs[i + 1]) for i in range(2)]


@pytest.mark.parametrize("boundary", ["fixed_interaction", "fixed_mass"])
def test_rk4_fourth_order(boundary):
    orders = rk4_order(FlockSpec(FIG6, 20, boundary=boundary))
    assert min(orders) >= 3.8


def test_dopri5_matches_scipy_reference():
    spec = FlockSpec(FIG7, 30)
    m = build_system(spec)
    M = m.M

    def f(t, y):
        return M @ y + leader_force(spec, m, t)

    ref = solve_ivp(f, (0, 40), np.zeros(60), method="DOP853", rtol=1e-12, atol=1e-12, t_eval=[40.0])
    tr = integrate(spec, IntegratorOptions(40.0, atol=1e-10, rtol=1e-10, n_out=8))
    assert np.max(np.abs(tr.z[-1] - ref.y[:30, -1])) < 1e-7
    assert np.max(np.abs(tr.zdot[-1] - ref.y[30:, -1])) < 1e-7


def test_dense_output_matches_fine_rk4():
    spec = FlockSpec(FIG6, 25)
    a = integrate(spec, IntegratorOptions(30.0, n_out=300))
    b = integrate(spec, IntegratorOptions(30.0, method="rk4", dt=0.005, n_out=300))
    assert np.allclose(a.times, b.times)
    assert np.max(np.abs(a.z - b.z)) < 1e-6


def test_rk4_bit_deterministic():
    spec = FlockSpec(FIG6, 15)
    o = IntegratorOptions(10.0, method="rk4", dt=0.01, n_out=50)
    a, b = integrate(spec, o), integrate(spec, o)
    assert np.array_equal(a.z, b.z) and np.array_equal(a.zdot, b.zdot)


def test_agent_subset_and_offsets():
    spec = FlockSpec(FIG6, 12, v0=2.0)
    full = integrate(spec, IntegratorOptions(5.0, method="rk4", dt=0.01, n_out=10))
    sub = integrate(spec, IntegratorOptions(5.0, method="rk4", dt=0.01, n_out=10), agents=[12, 1])
    assert list(sub.agents) == [1, 12]
    assert np.array_equal(sub.z[:, 1], full.z[:, 11])
    assert np.allclose(sub.last_agent_offset(), full.z[:, 11] - 2.0 * full.times)
    rel = relative_positions(full, include_leader=True)
    assert rel.shape == (11, 13) and not rel[:, 0].any()
    assert rel[0, 12] == -12.0


def test_rest_with_still_leader_stays_put():
    tr = integrate(FlockSpec(FIG6, 10, v0=0.0), IntegratorOptions(20.0, n_out=20))
    assert not tr.z.any()


def test_diverging_run_is_truncated():
    unstable = CouplingConfig(-2, 2, FIG6.rho_x, FIG6.rho_v)
    tr = integrate(FlockSpec(unstable, 20), IntegratorOptions(500.0, n_out=500))
    assert tr.truncated and tr.status == "overflow"
    assert np.all(np.isfinite(tr.z))
    assert tr.times[-1] < 500.0


def test_step_budget_error():
    with pytest.raises(IntegrationError, match="budget"):
        integrate(FlockSpec(FIG6, 10), IntegratorOptions(100.0, max_steps=5))


def test_option_validation():
    with pytest.raises(ValueError):
        IntegratorOptions(10.0, method="euler")
    with pytest.raises(ValueError):
        IntegratorOptions(0.0)
    with pytest.raises(ValueError):
        integrate(FlockSpec(FIG6, 10), IntegratorOptions(1.0), agents=[11])
