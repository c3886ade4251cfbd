import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIG6, FIG7
from flockwave.characterize import (
    CharacterizationError,
    find_extrema,
    horizon,
    measure_type1,
    measure_type1_signal,
    measure_type2,
    measure_type2_signal,
    predict_type1,
    predict_type2,
    relative_error,
)
from flockwave.coupling import FlockSpec
from flockwave.simulate import IntegratorOptions, integrate
from flockwave.spectrum import SignalVelocities, signal_velocities

V6 = SignalVelocities(2.5, -1.0, 0.0)


def test_type1_prediction_fig6():
    pr = predict_type1(V6, 200, 1.0)
    assert abs(pr.amplitudes[0]) == pytest.approx(80, abs=1e-9)
    assert pr.amplitudes[0] < 0
    assert pr.amplitudes[1] == pytest.approx(32, abs=1e-9)
    assert pr.alpha == pytest.approx(0.4, abs=1e-12)
    assert pr.T == pytest.approx(560, abs=1e-9)
    for a, b in zip(pr.amplitudes, pr.amplitudes[1:]):
        assert abs(b / a) == pytest.approx(pr.alpha)


def test_type2_prediction_fig7():
    pr = predict_type2(signal_velocities(FIG7.reduced), 200, 1.0)
    assert abs(pr.A) == pytest.approx(43.845, abs=1e-3)
    assert pr.T1 == pytest.approx(43.845, abs=1e-3)
    assert pr.T2 == pytest.approx(456.16, abs=1e-2)
    assert pr.slope == pytest.approx(0.10633, abs=1e-5)
    assert pr.template(pr.T2) == 0.0
    # continuity at both corners
    eps = 1e-9
    for tc in (pr.T1, pr.T2):
        assert pr.template(tc - eps) == pytest.approx(pr.template(tc + eps), abs=1e-6)


def test_wrong_type_rejected():
    with pytest.raises(CharacterizationError):
        predict_type2(V6, 100)
    with pytest.raises(CharacterizationError):
        predict_type1(signal_velocities(FIG7.reduced), 100)


def test_relative_error_examples():
    assert relative_error(77.2, 80) == pytest.approx(0.035)
    assert relative_error(3.0, 3.0) == 0
    assert relative_error(453.95, 456.16) == pytest.approx(0.00485, abs=1e-5)
    with pytest.raises(CharacterizationError):
        relative_error(1.0, 0.0)
    with pytest.raises(CharacterizationError):
        relative_error({"A": 1.0}, {"T": 1.0})


@settings(max_examples=30, deadline=None)
@given(st.floats(1.5, 5), st.floats(-1.4, -0.5), st.integers(40, 400))
def test_type1_template_recovered(cp, cm, N):
    """Zigzag through the predicted extrema is measured back to sampling resolution."""
    pr = predict_type1(SignalVelocities(cp, cm, 0.0), N, 1.0, k_max=4)
    t = np.linspace(0, horizon(pr), 4097)
    d = pr.template(t)
    m = measure_type1_signal(t, d)
    h = t[1] - t[0]
    slope = max(1.0, N / (pr.T / 2) * 2)
    assert len(m.amplitudes) >= 3
    for a, b in zip(m.amplitudes, pr.amplitudes):
        assert a == pytest.approx(b, abs=slope * h)
    assert m.T == pytest.approx(pr.T, abs=1e-6 * pr.T)
    assert m.alpha == pytest.approx(pr.alpha, rel=2e-2)


def test_synthetic_damped_reflections():
    """Half-sine lobes with a known geometric, alternating amplitude sequence."""
    t = np.linspace(0, 50, 20001)
    q = 0.6
    lobe = np.minimum((t // 10).astype(int), 4)
    amp = -((-q) ** lobe)
    d = amp * np.sin(np.pi * (t - 10 * lobe) / 10)
    m = measure_type1_signal(t, d)
    expected = -((-q) ** np.arange(5))
    assert np.array(m.amplitudes) == pytest.approx(expected, abs=1e-9)
    assert m.alpha == pytest.approx(q, abs=1e-9)
    assert m.extremum_times == pytest.approx([5, 15, 25, 35, 45], abs=1e-9)
    assert m.T_extrema == pytest.approx(20.0, abs=1e-9)


def test_no_extrema_for_still_leader():
    tr = integrate(FlockSpec(FIG6, 20, v0=0.0), IntegratorOptions(50.0))
    with pytest.raises(CharacterizationError, match="extrema"):
        measure_type1(tr)


def test_non_alternating_reported():
    # two maxima separated by a dip too shallow to count as an extremum
    t = np.linspace(0, 10, 2001)
    d = np.interp(t, [0, 3, 3.5, 4, 7, 10], [0, 1, 0.999, 1, -1, 0])
    _, _, kinds = find_extrema(t, d)
    assert list(kinds) == [1, 1, -1]
    with pytest.raises(CharacterizationError, match="alternate"):
        measure_type1_signal(t, d)


def test_type2_template_recovered():
    pr = predict_type2(signal_velocities(FIG7.reduced), 200, 1.0)
    t = np.linspace(0, horizon(pr), 4097)
    m = measure_type2_signal(t, pr.template(t), 1.0, init=(pr.T1, pr.T2))
    h = t[1] - t[0]
    assert m.T1 == pytest.approx(pr.T1, abs=h)
    assert m.T2 == pytest.approx(pr.T2, abs=2 * h)
    assert m.fit_T1 == pytest.approx(pr.T1, abs=h)
    assert m.fit_T2 == pytest.approx(pr.T2, abs=h)
    assert m.blind_T1 == pytest.approx(pr.T1, abs=h)
    assert m.blind_T2 == pytest.approx(pr.T2, abs=h)


def test_type2_breakpoints_robust_to_noise():
    pr = predict_type2(signal_velocities(FIG7.reduced), 200, 1.0)
    t = np.linspace(0, horizon(pr), 4097)
    rng = np.random.default_rng(3)
    d = pr.template(t) + 1e-3 * rng.standard_normal(t.size)
    m = measure_type2_signal(t, d, 1.0, init=(pr.T1, pr.T2))
    assert abs(m.fit_T1 - pr.T1) < 0.5 and abs(m.fit_T2 - pr.T2) < 0.5
    assert abs(m.blind_T1 - pr.T1) < 0.5 and abs(m.blind_T2 - pr.T2) < 0.5


def test_type2_shape_mismatch():
    t = np.linspace(0, 100, 2001)
    d = -10 * np.abs(np.sin(t / 5))
    with pytest.raises(CharacterizationError, match="shape"):
        measure_type2_signal(t, d, 1.0)


def run(config, N, v0=1.0, boundary="fixed_interaction"):
    v = signal_velocities(config.reduced)
    pr = predict_type1(v, N, v0) if v.c_minus < 0 else predict_type2(v, N, v0)
    tr = integrate(FlockSpec(config, N, v0=v0, boundary=boundary), IntegratorOptions(horizon(pr)), agents=[N])
    return pr, tr


def test_attenuation_scale_invariant():
    _, a = run(FIG6, 100, 1.0)
    _, b = run(FIG6, 100, 2.0)
    ma, mb = measure_type1(a), measure_type1(b)
    assert mb.alpha == pytest.approx(ma.alpha, rel=1e-6)
    assert mb.T == pytest.approx(ma.T, rel=1e-6)
    assert np.allclose(mb.amplitudes, 2 * np.array(ma.amplitudes), rtol=1e-6)


@pytest.mark.parametrize("config", [FIG6, FIG7], ids=["reflecting", "reflectionless"])
@pytest.mark.parametrize("boundary", ["fixed_interaction", "fixed_mass"])
def test_errors_shrink_along_ladder(config, boundary):
    """Relative errors fall as N doubles, allowing one inversion per descriptor."""
    table = {}
    for N in (50, 100, 200, 400, 800):
        pr, tr = run(config, N, boundary=boundary)
        m = measure_type1(tr) if config is FIG6 else measure_type2(tr, pr)
        for k, e in relative_error(m, pr).items():
            table.setdefault(k, []).append(e)
    for k, errs in table.items():
        inversions = sum(b > a for a, b in zip(errs, errs[1:]))
        assert inversions <= 1, (k, errs)
        assert errs[-1] < errs[0], (k, errs)
