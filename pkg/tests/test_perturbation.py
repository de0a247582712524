import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mepstab.errors import InputError
from mepstab.geometry import DiscretePath
from mepstab.landscape import SinusoidalBump
from mepstab.perturbation import interpolate_path, run_study, tube_samples

DELTAS = (0.0, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2)


@pytest.fixture(scope="module")
def study(dw10, dw10_sol_coarse):
    return run_study(dw10, SinusoidalBump(3.0, 2.0), DELTAS, None, None, tol=1e-10, base=dw10_sol_coarse)


def test_slope_is_linear(study):
    assert study.slope == pytest.approx(1.0, abs=0.2)
    lo, hi = study.slope_ci
    assert lo <= study.slope <= hi


def test_zero_amplitude_row_reproduces_base(study):
    row = study.rows[0]
    assert row.delta == 0.0 and row.converged
    assert row.model_error_c1 == 0.0
    assert row.mep_error_c1 <= 2e-10
    assert row.subspace_error == 0.0


def test_errors_grow_with_amplitude(study):
    errs = [r.mep_error_c1 for r in study.rows[1:]]
    assert all(b > a for a, b in zip(errs, errs[1:]))
    assert all(r.converged for r in study.rows)


def test_minimizer_shift_constants_are_bounded(study):
    s = np.array(study.shift_constants)
    assert s.max() < 1.0
    assert s.max() / s.min() < 1.5


def test_study_serializes(study):
    table = study.table()
    assert len(table) == len(DELTAS)
    assert set(table[0]) >= {"delta", "model_error_c1", "mep_error_c1", "subspace_error", "converged"}
    assert study.summary()["failed"] == 0


def test_masked_study_reports_subspace_error(dw10, dw10_sol_coarse):
    st_ = run_study(dw10, SinusoidalBump(), (0.0,), None, None, tol=1e-10, base=dw10_sol_coarse,
                    mask=[True, False], probes=5)
    row = st_.rows[0]
    # the y coordinate of tube points is dropped, so the error is bounded by the tube radius
    assert 0.0 < row.subspace_error <= st_.epsilon + 1e-12
    # the double-well MEP lies in the retained subspace, so restriction leaves it unchanged
    assert row.mep_error_c1 <= 1e-8


def test_input_validation(dw10, dw10_sol_coarse):
    with pytest.raises(InputError):
        run_study(dw10, SinusoidalBump(), (), None, None, base=dw10_sol_coarse)
    with pytest.raises(InputError):
        run_study(dw10, SinusoidalBump(), (-1e-3,), None, None, base=dw10_sol_coarse)
    with pytest.raises(InputError):
        run_study(dw10, SinusoidalBump(), (1e-3,), None, None, base=dw10_sol_coarse, epsilon=-1.0)


def test_interpolated_path_hits_new_endpoints(dw10_sol_coarse):
    p = interpolate_path(dw10_sol_coarse, [-1.1, 0.05], [0.9, -0.02])
    np.testing.assert_array_equal(p.ya, [-1.1, 0.05])
    np.testing.assert_array_equal(p.yb, [0.9, -0.02])
    same = interpolate_path(dw10_sol_coarse.path, dw10_sol_coarse.path.ya, dw10_sol_coarse.path.yb)
    np.testing.assert_allclose(same.nodes, dw10_sol_coarse.path.nodes, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(eps=st.floats(1e-3, 1.0), probes=st.integers(1, 10), seed=st.integers(0, 1000))
def test_tube_samples_stay_in_the_tube(eps, probes, seed):
    path = DiscretePath.straight([0.0, 0.0, 0.0], [1.0, 1.0, 0.0], 11)
    pts = tube_samples(path, eps, probes, np.random.default_rng(seed))
    assert pts.shape == (11 * (probes + 1), 3)
    d = np.linalg.norm(pts[11:].reshape(11, probes, 3) - path.nodes[:, None, :], axis=2)
    assert d.max() <= eps * (1 + 1e-12)
