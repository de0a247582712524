from dataclasses import replace

import numpy as np
import pytest

from conftest import dw_solution
from mepstab.diagnostics import check_assumptions, classify_critical, endpoint_limits
from mepstab.errors import NotCriticalError
from mepstab.geometry import DiscretePath, reparameterize, tangent_field
from mepstab.landscape import DoubleWell, MuellerBrown, Quadratic, ScaledModel


@pytest.mark.parametrize("y,kind", [([1.0, 0.0], "minimizer"), ([0.0, 0.0], "index1_saddle")])
def test_classify_double_well(y, kind):
    r = classify_critical(DoubleWell(10.0), y, tangent=[1.0, 0.0])
    assert r.kind == kind
    assert r.tangent_eigenvalue == pytest.approx(8.0 if kind == "minimizer" else -4.0)


def test_classify_maximum_and_degenerate():
    assert classify_critical(ScaledModel(DoubleWell(10.0), -1.0), [1.0, 0.0]).kind == "higher_index"
    assert classify_critical(Quadratic(np.eye(2)), [0.0, 0.0]).kind == "minimizer"
    # eigenvalues 8 and 10 both fall inside a zero band of half-width 9
    assert classify_critical(DoubleWell(10.0), [1.0, 0.0], eig_tol=9.0).kind == "degenerate"


def test_classify_rejects_non_critical_point():
    with pytest.raises(NotCriticalError):
        classify_critical(DoubleWell(10.0), [0.5, 0.0])


def test_report_double_well_kappa_10(dw10, dw10_sol):
    r = check_assumptions(dw10, dw10_sol)
    assert r.a_holds and r.b_holds
    assert r.kinds == ("minimizer", "index1_saddle", "minimizer")
    assert r.omega_s == pytest.approx(10.0)
    assert r.omega_b == pytest.approx(10.0)
    assert r.dlambda1 == pytest.approx(8.0, abs=1e-12)
    assert r.sigma_ratio == pytest.approx(1.25, abs=1e-8)
    assert r.sigma_ratio_a == pytest.approx(1.25, abs=1e-8)
    assert r.gap_a == pytest.approx(2.0, abs=1e-8)


def test_report_double_well_kappa_8_is_not_simple():
    r = check_assumptions(DoubleWell(8.0), dw_solution(8.0, n=101))
    assert r.a_holds
    assert not r.simple_a and not r.simple_b
    assert not r.b_holds


def test_report_double_well_kappa_4_is_not_lowest():
    r = check_assumptions(DoubleWell(4.0), dw_solution(4.0, n=101))
    assert r.simple_a
    assert not r.lowest_a and not r.lowest_b
    assert r.sigma_ratio == pytest.approx(0.5, abs=1e-8)
    assert not r.b_holds


def test_report_mueller_brown(mb, mb_sol):
    with pytest.warns(Warning):
        r = check_assumptions(mb, replace(mb_sol))
    # lambda changes sign between the saddle and the upper minimizer on this path
    assert not r.a_holds
    assert r.lambda_crossings
    assert r.b_holds
    assert r.kinds == ("minimizer", "index1_saddle", "minimizer")


def test_report_flags_a_non_critical_saddle_guess(dw10, dw10_sol):
    bad = replace(dw10_sol, saddle=np.array([0.2, 0.0]))
    r = check_assumptions(dw10, bad)
    assert r.kinds[1] == "not_critical"
    assert not r.a_holds


def test_endpoint_limits_vanish_at_the_mep(dw10, dw10_sol):
    lim = endpoint_limits(dw10, dw10_sol)
    for v in (lim.limit0, lim.limit_sbar, lim.limit1):
        assert np.linalg.norm(v) < 1e-8
    l0, ls = lim
    assert l0 is lim.limit0 and ls is lim.limit_sbar


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_endpoint_limits_agree_with_spline_quotients(dw10, dw10_sol, seed):
    rng = np.random.default_rng(seed)
    a = dw10_sol.alphas
    c = rng.normal(size=(3, 2)) * 0.1
    bump = sum(np.outer(np.sin((k + 1) * np.pi * a), c[k]) for k in range(3))
    path = reparameterize(DiscretePath(a, dw10_sol.path.nodes + bump))
    lim = endpoint_limits(dw10, dw10_sol, path)
    assert lim.disagreement < 5e-3
    assert np.linalg.norm(lim.limit0) > 1e-3


def test_endpoint_limits_on_mueller_brown_mep(mb, mb_sol):
    lim = endpoint_limits(mb, mb_sol)
    # both evaluations vanish at the MEP up to discretization error; measure against |H| L
    scale = np.linalg.norm(mb.hessian(mb_sol.path.ya), 2) * tangent_field(mb_sol.path).length
    d = lim.to_dict()
    assert max(np.max(np.abs(v)) for v in d.values()) < 1e-4 * scale
    assert set(lim.to_dict()) == {"limit0", "limit_sbar", "limit1", "quotient0", "quotient_sbar", "quotient1"}


def test_report_serializes(dw10, dw10_sol):
    d = check_assumptions(dw10, dw10_sol).to_dict()
    assert d["a_holds"] is True and isinstance(d["kinds"], tuple)


def test_mueller_brown_tangent_eigenvalues(mb, mb_sol):
    assert mb_sol.sigma_a > 0 and mb_sol.sigma_b > 0
    spec = np.linalg.eigvalsh(MuellerBrown().hessian(mb_sol.path.ya))
    assert spec[0] <= mb_sol.sigma_a <= spec[-1]
