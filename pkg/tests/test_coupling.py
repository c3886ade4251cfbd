from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIG6, FIG7, SPECS
from flockwave.coupling import (
    BoundaryKind,
    CouplingConfig,
    FlockSpec,
    ReducedParams,
    SpecError,
    config_from_reduced,
    load_spec,
    parse_number,
    parse_spec,
    reduce,
    serialize_spec,
    validate_config,
)

free = st.floats(-3, 3, allow_nan=False)


def test_fig6_reduced_parameters():
    p = reduce(FIG6)
    assert p.alpha_x[1] == -0.5 and p.beta_x[1] == -1.0
    assert p.alpha_v[1] == -0.25 and p.beta_v[1] == -1.75 and p.beta_v[2] == 1.25
    # condition (i) holds exactly for the published system
    assert p.beta_x[1] + 2 * p.beta_x[2] == 0


def test_exact_validation_of_rationals():
    rep = validate_config(FIG6)
    assert rep.ok and rep.exact


def test_nonzero_row_sum_reports_residual():
    bad = CouplingConfig(-2, -2, (-2, F(-15, 4), 1, F(-21, 4), F(5, 2)), (-1, 4, 1, -5, 1))
    rep = validate_config(bad)
    assert not rep.ok
    assert rep.violations[0].field == "rho_x"
    assert rep.violations[0].residual == pytest.approx(7.5)
    with pytest.raises(SpecError):
        reduce(bad)


def test_center_weight_must_be_one():
    bad = CouplingConfig(-2, -2, (0, -1, 2, -1, 0), (0, -1, 1, 0, 0))
    assert any(v.field == "rho_x[0]" for v in validate_config(bad).violations)


def test_float_tolerance():
    ok = CouplingConfig(-2.0, -2.0, (0.1, 0.2, 1.0, -1.3, 0.0), (0.0, -1.0, 1.0, 0.0, 0.0))
    assert validate_config(ok).ok
    off = CouplingConfig(-2.0, -2.0, (0.1, 0.2, 1.0, -1.3 + 1e-9, 0.0), (0.0, -1.0, 1.0, 0.0, 0.0))
    assert not validate_config(off).ok


def test_wrong_length_rejected():
    with pytest.raises(SpecError):
        CouplingConfig(-2, -2, (1, -1), (0, -1, 1, 0, 0))


@settings(max_examples=200, deadline=None)
@given(free, free, free, free, free)
def test_config_from_reduced_inverts_reduce(ax1, bx1, av1, bv1, bv2):
    p = ReducedParams.from_free(-2.0, -2.0, ax1, bx1, av1, bv1, bv2)
    c = config_from_reduced(p)
    assert validate_config(c).ok
    q = reduce(c)
    for a, b in ((q.alpha_x, p.alpha_x), (q.beta_x, p.beta_x), (q.alpha_v, p.alpha_v), (q.beta_v, p.beta_v)):
        assert a == pytest.approx(b, abs=1e-12)
    assert abs(q.beta_x[1] + 2 * q.beta_x[2]) <= 1e-12


def test_fig6_from_free_parameters_is_exact():
    c = config_from_reduced(ReducedParams.from_free(-2, -2, -0.5, -1, -0.25, -1.75, 1.25))
    assert c.rho_x == tuple(float(x) for x in FIG6.rho_x)
    assert c.rho_v == tuple(float(x) for x in FIG6.rho_v)


def test_parse_number_forms():
    assert parse_number("3/4") == F(3, 4)
    assert parse_number("-2") == F(-2)
    assert isinstance(parse_number("0.25"), float)
    with pytest.raises(SpecError):
        parse_number("abc")
    with pytest.raises(SpecError):
        parse_number("1/0")


def test_spec_roundtrip_keeps_rationals_exact():
    spec = load_spec(SPECS / "fig4.yaml")
    again = parse_spec(serialize_spec(spec))
    assert again == spec
    assert again.config.rho_x[1] == F(-289, 432)


def test_parse_errors_name_the_field():
    text = (SPECS / "fig6.yaml").read_text().replace("N: 200", "N: 2.5")
    with pytest.raises(SpecError) as err:
        parse_spec(text)
    assert err.value.path == "N"
    with pytest.raises(SpecError) as err:
        parse_spec("g_x: -2\n")
    assert err.value.path == "g_v"
    with pytest.raises(SpecError) as err:
        parse_spec((SPECS / "fig6.yaml").read_text().replace("fixed_interaction", "sticky"))
    assert err.value.path == "boundary"


def test_flockspec_guards():
    with pytest.raises(SpecError):
        FlockSpec(FIG7, 4)
    with pytest.raises(SpecError):
        FlockSpec(FIG7, 10, delta=-1)
    assert FlockSpec(FIG7, 10, boundary="fixed-mass").boundary is BoundaryKind.FIXED_MASS


def test_time_rescaling_scales_gains():
    c = FIG6.scaled_time(2.0)
    assert c.g_x == -8 and c.g_v == -4
