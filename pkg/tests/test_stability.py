import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dw_solution
from mepstab.errors import AssumptionASuspect, InputError
from mepstab.geometry import DiscretePath, NodeField, random_field, tangent_field, x_norm
from mepstab.landscape import DoubleWell
from mepstab.mep import residual_F
from mepstab.stability import (
    apply_dF,
    assemble_perp_system,
    estimate_gamma,
    lambda_bar,
    solve_dF,
    solve_perp,
    solve_tangential,
    transport_frames,
)
from oracles import dw_lambda, shoot_dw_perp


def test_lambda_matches_closed_form(dw10, dw10_sol):
    lam = lambda_bar(dw10, dw10_sol)
    np.testing.assert_allclose(lam.values, dw_lambda(dw10_sol.alphas), atol=1e-9)
    assert lam.dprime0 == pytest.approx(8.0, abs=1e-5)
    assert lam.dprime1 == pytest.approx(8.0, abs=1e-5)
    assert lam.dprime_sbar == pytest.approx(-4.0, abs=1e-5)
    assert lam.sign_changes == ()
    # lam / (a (a - sbar) (a - 1)) = 16 on the straight path
    assert lam.c_lower == pytest.approx(16.0, rel=1e-6)
    assert lam.c_upper == pytest.approx(16.0, rel=1e-6)


def test_lambda_warns_on_wrong_sign(mb, mb_sol):
    # a fresh copy bypasses the per-solution cache, so the warning is raised again
    with pytest.warns(AssumptionASuspect):
        lam = lambda_bar(mb, replace(mb_sol))
    assert lam.sign_changes


def test_frames_are_orthonormal_and_perpendicular(mb_sol):
    fr = transport_frames(mb_sol)
    t = tangent_field(mb_sol.path).unit
    Q = fr.frames
    np.testing.assert_allclose(np.einsum("ijk,ijl->ikl", Q, Q), np.broadcast_to(np.eye(1), (len(Q), 1, 1)),
                               atol=1e-12)
    assert np.max(np.abs(np.einsum("ij,ijk->ik", t, Q))) < 1e-12


def test_frames_vary_continuously_in_higher_dimension():
    a = np.linspace(0, 1, 101)
    nodes = np.column_stack([np.cos(a), np.sin(a), a**2])
    fr = transport_frames(DiscretePath(a, nodes))
    assert fr.frames.shape == (101, 3, 2)
    jumps = np.linalg.norm(np.diff(fr.frames, axis=0), axis=(1, 2))
    assert jumps.max() < 0.05


@pytest.mark.parametrize("name", ["quadratic", "sine"])
def test_perpendicular_solve_matches_shooting(dw10, dw10_sol, name):
    fy, dfy = {
        "quadratic": (lambda x: x * (x - 1), lambda x: 2 * x - 1),
        "sine": (lambda x: np.sin(3 * x) * x * (x - 1),
                 lambda x: 3 * np.cos(3 * x) * x * (x - 1) + np.sin(3 * x) * (2 * x - 1)),
    }[name]
    a = dw10_sol.alphas
    f = np.column_stack([0 * a, fy(a)])
    sys = assemble_perp_system(dw10, dw10_sol, None, f)
    res = solve_perp(sys)
    y_component = np.einsum("ij,ij->i", sys.frames.frames[:, :, 0], np.broadcast_to([0.0, 1.0], (len(a), 2)))
    numeric = res.values[:, 0] * y_component
    oracle = shoot_dw_perp(a, 10.0, fy, dfy)
    assert np.max(np.abs(numeric - oracle)) <= 1e-4
    As, _, gs, _ = sys.at_sbar()
    np.testing.assert_allclose(res.pin, -np.linalg.solve(As, gs), atol=1e-8)


def test_perpendicular_pin_closed_form(dw10, dw10_sol):
    a = dw10_sol.alphas
    # source with perpendicular frame component g(a) = -a(a - 1)
    sys0 = assemble_perp_system(dw10, dw10_sol, None, np.zeros((len(a), 2)))
    q = sys0.frames.frames[:, :, 0]
    f = -(-a * (a - 1))[:, None] * q
    res = solve_perp(assemble_perp_system(dw10, dw10_sol, sys0.frames, f))
    assert res.pin[0] == pytest.approx(-1.0 / 40.0, abs=1e-12)
    mid = int(np.argmin(np.abs(a - 0.5)))
    assert res.values[mid, 0] == pytest.approx(-1.0 / 40.0, abs=1e-8)


def test_source_must_vanish_at_endpoints(dw10, dw10_sol):
    f = np.ones((dw10_sol.path.n, 2))
    with pytest.raises(InputError):
        assemble_perp_system(dw10, dw10_sol, None, f)
    with pytest.raises(InputError):
        apply_dF(dw10, dw10_sol, f)


def test_simplified_and_exact_linearizations_agree(dw10, dw10_sol):
    psi = random_field(dw10_sol.alphas, 2, np.random.default_rng(2))
    a = apply_dF(dw10, dw10_sol, psi).values
    b = apply_dF(dw10, dw10_sol, psi, at_mep=False).values
    assert np.max(np.abs(a - b)) <= 1e-6 * np.max(np.abs(b))


def test_linearization_matches_central_difference(dw10, dw10_sol):
    sol = dw10_sol
    rng = np.random.default_rng(11)
    eps = 1e-5
    for _ in range(5):
        psi = random_field(sol.alphas, 2, rng)
        plus = residual_F(dw10, sol, sol.path.with_nodes(sol.path.nodes + eps * psi)).values
        minus = residual_F(dw10, sol, sol.path.with_nodes(sol.path.nodes - eps * psi)).values
        fd = (plus - minus) / (2 * eps)
        lin = apply_dF(dw10, sol, psi).values
        assert np.max(np.abs(lin - fd)) <= 1e-3 * np.max(np.abs(fd))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), knots=st.integers(2, 10))
def test_round_trip_through_the_inverse(dw10, dw10_sol, seed, knots):
    psi = random_field(dw10_sol.alphas, 2, np.random.default_rng(seed), knots=knots)
    back = solve_dF(dw10, dw10_sol, apply_dF(dw10, dw10_sol, psi))
    assert x_norm(back.values - psi) <= 1e-3 * x_norm(psi)


def test_inverse_then_forward_reproduces_data(dw10, dw10_sol):
    a = dw10_sol.alphas
    f = NodeField(a, random_field(a, 2, np.random.default_rng(5)))
    out = solve_dF(dw10, dw10_sol, f, details=True)
    again = apply_dF(dw10, dw10_sol, out.psi)
    assert x_norm(again - f) <= 1e-3 * x_norm(f)
    assert out.residual <= 1e-4
    assert out.beta_perp.saddle_slope_defect < 1e-2


def test_tangential_solve_of_zero_data_is_zero(dw10, dw10_sol):
    n = dw10_sol.path.n
    res = solve_tangential(dw10, dw10_sol, None, np.zeros((n, 2)), np.zeros((n, 2)))
    assert np.max(np.abs(res.values)) < 1e-12


def test_gamma_estimate_is_finite_and_deterministic(dw10, dw10_sol_coarse):
    g1 = estimate_gamma(dw10, dw10_sol_coarse, trials=5, seed=3)
    g2 = estimate_gamma(dw10, dw10_sol_coarse, trials=5, seed=3)
    assert np.isfinite(g1.gamma_hat) and g1.gamma_hat > 0
    assert g1.gamma_hat == g2.gamma_hat
    assert len(g1.trials()) == 5
    with pytest.raises(InputError):
        estimate_gamma(dw10, dw10_sol_coarse, trials=0)


def test_gamma_grows_as_the_spectral_gap_closes():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        values = [estimate_gamma(DoubleWell(k), dw_solution(k, n=101), trials=10).gamma_hat
                  for k in (16.0, 10.0, 8.5)]
    assert values[0] < values[1] < values[2]
