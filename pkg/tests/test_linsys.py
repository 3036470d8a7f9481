"""Tests for the stacked forward-Euler solve and its resource estimates."""

import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm, lu_factor, lu_solve

from rdcarleman.carleman import (
    CarlemanSystem,
    build_blocks,
    build_rd_operators,
    evolve_truncated,
    lift_initial,
)
from rdcarleman.grid import DIRICHLET, GridSpec, SparseOperator
from rdcarleman.linsys import (
    INSTABILITY_ERROR,
    L_DENSE_CAP,
    EulerSystem,
    HistoryState,
    build_L_dense,
    compute_G,
    condition_bound_and_measure,
    euler_evolve,
    global_error_bound,
    max_stable_timestep,
    measurement_probability_bound,
    plan_euler,
    query_complexity_estimate,
    stability_check,
)
from rdcarleman.rdode import RDParams

# ---------------------------------------------------------------------------
# frozen oracles: written before the implementation, independent of it
# ---------------------------------------------------------------------------


def bidiagonal_matrix_oracle(step: np.ndarray, m: int) -> np.ndarray:
    """Entrywise construction of the stacked matrix from its definition."""
    dim = step.shape[0]
    L = np.zeros(((m + 1) * dim, (m + 1) * dim))
    for k in range(m + 1):
        L[k * dim:(k + 1) * dim, k * dim:(k + 1) * dim] = np.eye(dim)
        if k:
            L[k * dim:(k + 1) * dim, (k - 1) * dim:k * dim] = -step
    return L


def lu_history_oracle(L: np.ndarray, y_in: np.ndarray, dim: int) -> np.ndarray:
    """Generic dense LU solve of the stacked system, one row per step."""
    rhs = np.zeros(L.shape[0])
    rhs[:dim] = y_in
    sol = lu_solve(lu_factor(L), rhs)
    return sol.reshape(-1, dim)


def geometric_sum_oracle(q: float, count: int) -> float:
    """sum_{k=0}^{count-1} q^k via the closed form."""
    if q == 1.0:
        return float(count)
    return (1.0 - q**count) / (1.0 - q)


# ---------------------------------------------------------------------------
# shared builders
# ---------------------------------------------------------------------------

FIG2 = RDParams(D=0.2, a=0.2, b=-1.0, M=2)
FIG3 = RDParams(D=0.1, a=0.16, b=-1.0, M=3)


def _rd_system(p, grid, N):
    F1, FM = build_rd_operators(p, grid)
    return build_blocks(F1, FM, N=N, M=p.M)


def _scalar_system(rate: float) -> CarlemanSystem:
    # one-component synthetic system: block structure degenerates to a scalar
    f1 = SparseOperator(
        shape=(1, 1), matrix=sp.csr_matrix(np.array([[rate]])), symmetric=True, s=1
    )
    fm = SparseOperator(shape=(1, 1), matrix=sp.csr_matrix((1, 1)), symmetric=False, s=1)
    return CarlemanSystem(N=1, M=2, n_d=1, dim=1, b=0.0, F1=f1, FM=fm, offsets=(0, 1))


def _zero_system(n_d: int = 2) -> CarlemanSystem:
    f1 = SparseOperator(
        shape=(n_d, n_d), matrix=sp.csr_matrix((n_d, n_d)), symmetric=True, s=1
    )
    fm = SparseOperator(
        shape=(n_d, n_d**2), matrix=sp.csr_matrix((n_d, n_d**2)), symmetric=False, s=1
    )
    return CarlemanSystem(
        N=1, M=2, n_d=n_d, dim=n_d, b=0.0, F1=f1, FM=fm, offsets=(0, n_d)
    )


def _fig2_initial(grid):
    x = grid.axis_coordinates(0)
    return 0.1 * (1.0 - np.cos(2.0 * math.pi * x))


def _fig3_initial(grid):
    x = grid.axis_coordinates(0)
    return 0.2 * np.sin(2.0 * math.pi * x)


# ---------------------------------------------------------------------------
# step-size law
# ---------------------------------------------------------------------------


def test_step_law_example_arithmetic():
    got = max_stable_timestep(1, 0.2, 1, 16, 0.2)
    assert got == pytest.approx(1.0 / (4.0 * 0.2 * 289 + 0.2), rel=1e-15)


def test_step_law_quarters_when_order_doubles():
    for N in (1, 2, 3):
        base = max_stable_timestep(N, 0.1, 2, 12, 0.3)
        assert max_stable_timestep(2 * N, 0.1, 2, 12, 0.3) == pytest.approx(
            base / 4.0, rel=1e-12
        )


def test_step_law_growth_config_value():
    # the weakly damped config: D=0.012, n=16, a=0.0196, order 2
    denom = 4.0 * (4.0 * 0.012 * 17**2 + 0.0196)
    assert max_stable_timestep(2, 0.012, 1, 16, 0.0196) == pytest.approx(
        1.0 / denom, rel=1e-14
    )


def test_step_law_rejects_nonpositive_denominator():
    bad_a = -4.0 * 0.2 * 1 * 81  # cancels the diffusion reach exactly
    with pytest.raises(ValueError, match="F1 norm bound invalid"):
        max_stable_timestep(2, 0.2, 1, 8, bad_a)
    with pytest.raises(ValueError, match="F1 norm bound invalid"):
        max_stable_timestep(2, 0.2, 1, 8, bad_a - 5.0)


# ---------------------------------------------------------------------------
# the Euler sweep
# ---------------------------------------------------------------------------


def test_euler_constant_when_generator_vanishes():
    system = _zero_system()
    y0 = np.array([0.3, -0.7])
    hist = euler_evolve(system, y0, T=1.0, h=0.25)
    assert hist.m == 4
    assert np.array_equal(hist.block1, np.tile(y0, (5, 1)))
    assert np.array_equal(hist.final_state, y0)


def test_euler_scalar_geometric_decay():
    hist = euler_evolve(_scalar_system(-1.0), np.array([1.0]), T=1.0, h=0.1)
    assert hist.m == 10
    assert hist.block1[-1, 0] == pytest.approx(0.9**10, rel=1e-14)
    # every intermediate step is the exact geometric sequence
    assert np.allclose(hist.block1[:, 0], 0.9 ** np.arange(11), rtol=1e-14)


def test_euler_rounds_step_down_to_tile_horizon():
    hist = euler_evolve(_scalar_system(-1.0), np.array([1.0]), T=1.0, h=0.3)
    assert hist.m == 4
    assert hist.h == pytest.approx(0.25)


def test_euler_instability_raises():
    # |1 + h*rate| = 99 per step; overflow long before the sweep ends
    with pytest.raises(RuntimeError, match=INSTABILITY_ERROR):
        euler_evolve(_scalar_system(-100.0), np.array([1.0]), T=200.0, h=1.0)


def test_euler_validates_inputs():
    system = _scalar_system(-1.0)
    with pytest.raises(ValueError):
        euler_evolve(system, np.array([1.0]), T=0.0, h=0.1)
    with pytest.raises(ValueError):
        euler_evolve(system, np.array([1.0, 2.0]), T=1.0, h=0.1)


def test_euler_first_order_against_rk4_reference():
    # halving h should halve the terminal block-1 error, within 20%
    grid = GridSpec(8, (DIRICHLET,))
    system = _rd_system(FIG2, grid, N=2)
    y0 = lift_initial(_fig2_initial(grid), 2)
    ref = evolve_truncated(system, y0, T=1.0, tol=1e-10)
    ref_term = ref.block1()[-1]

    h0 = max_stable_timestep(2, FIG2.D, 1, 8, FIG2.a)
    errs = []
    for h in (h0, h0 / 2.0, h0 / 4.0):
        hist = euler_evolve(system, y0, T=1.0, h=h)
        errs.append(float(np.linalg.norm(hist.block1[-1] - ref_term)))
    assert 0.4 <= errs[1] / errs[0] <= 0.6
    assert 0.4 <= errs[2] / errs[1] <= 0.6


# ---------------------------------------------------------------------------
# the stacked matrix
# ---------------------------------------------------------------------------


def test_L_trivial_two_block_example():
    L = build_L_dense(_scalar_system(0.0), m=1, h=0.5).dense()
    assert np.array_equal(L, np.array([[1.0, 0.0], [-1.0, 1.0]]))


def test_L_matches_entrywise_oracle():
    system = _scalar_system(-1.0)
    h = 0.1
    step = np.array([[1.0 - h]])
    got = build_L_dense(system, m=3, h=h).dense()
    assert np.array_equal(got, bidiagonal_matrix_oracle(step, 3))

    grid = GridSpec(4, (DIRICHLET,))
    sys2 = _rd_system(FIG2, grid, N=2)
    h2 = max_stable_timestep(2, FIG2.D, 1, 4, FIG2.a)
    step2 = np.eye(sys2.dim) + h2 * np.asarray(sys2.materialize().todense())
    got2 = build_L_dense(sys2, m=5, h=h2).dense()
    assert np.allclose(got2, bidiagonal_matrix_oracle(step2, 5), atol=1e-15)


def test_L_cap_enforced():
    grid = GridSpec(8, (DIRICHLET,))
    system = _rd_system(FIG2, grid, N=2)  # dim 72
    with pytest.raises(ValueError, match="dense cap"):
        build_L_dense(system, m=100, h=1e-3)
    assert 101 * system.dim > L_DENSE_CAP  # the case above is genuinely over


def test_L_times_stacked_sweep_is_initial_data():
    grid = GridSpec(4, (DIRICHLET,))
    system = _rd_system(FIG2, grid, N=2)
    h = max_stable_timestep(2, FIG2.D, 1, 4, FIG2.a)
    m = 20
    step = np.eye(system.dim) + h * np.asarray(system.materialize().todense())
    y0 = lift_initial(_fig2_initial(grid), 2)
    stacked = np.empty((m + 1) * system.dim)
    y = y0.copy()
    stacked[: system.dim] = y
    for k in range(1, m + 1):
        y = step @ y
        stacked[k * system.dim:(k + 1) * system.dim] = y
    rhs = build_L_dense(system, m, h).matrix @ stacked
    want = np.zeros_like(rhs)
    want[: system.dim] = y0
    assert np.max(np.abs(rhs - want)) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(
    rate=st.floats(min_value=-2.0, max_value=0.0),
    h=st.floats(min_value=1e-3, max_value=0.5),
    m=st.integers(min_value=1, max_value=20),
)
def test_scalar_L_solve_reproduces_recurrence(rate, h, m):
    system = _scalar_system(rate)
    L = build_L_dense(system, m, h).dense()
    sol = lu_history_oracle(L, np.array([1.0]), 1)
    assert np.allclose(sol[:, 0], (1.0 + h * rate) ** np.arange(m + 1), atol=1e-12)


def test_lu_solve_equals_euler_sweep():
    # forward substitution and a generic LU factorization must agree
    cases = [
        (FIG2, GridSpec(4, (DIRICHLET,)), 2, 1.0, _fig2_initial),
        (FIG3, GridSpec(4, (DIRICHLET,)), 3, 0.3, _fig3_initial),
    ]
    for p, grid, N, T, init in cases:
        system = _rd_system(p, grid, N)
        h = max_stable_timestep(N, p.D, 1, grid.n, p.a)
        hist = euler_evolve(system, lift_initial(init(grid), N), T, h)
        L = build_L_dense(system, hist.m, hist.h).dense()
        sol = lu_history_oracle(L, lift_initial(init(grid), N), system.dim)
        s1 = system.block_slice(1)
        assert np.max(np.abs(sol[:, s1] - hist.block1)) <= 1e-11
        assert np.max(np.abs(sol[-1] - hist.final_state)) <= 1e-11


def test_L_norm_at_most_two():
    for p, N, init in [(FIG2, 2, _fig2_initial), (FIG3, 2, _fig3_initial)]:
        grid = GridSpec(4, (DIRICHLET,))
        system = _rd_system(p, grid, N)
        h = max_stable_timestep(N, p.D, 1, 4, p.a)
        L = build_L_dense(system, m=30, h=h).dense()
        assert np.linalg.norm(L, 2) <= 2.0 + 1e-12


# ---------------------------------------------------------------------------
# condition number
# ---------------------------------------------------------------------------


def test_condition_zero_generator_small():
    report = condition_bound_and_measure(_scalar_system(0.0), m=3, h=0.1)
    measured = next(r["kappa_measured"] for r in report.rows if "kappa_measured" in r)
    assert report.ok and measured <= 8.0
    # oracle: SVD of the explicit 4x4 bidiagonal
    L = bidiagonal_matrix_oracle(np.array([[1.0]]), 3)
    sv = np.linalg.svd(L, compute_uv=False)
    assert measured == pytest.approx(sv[0] / sv[-1], rel=1e-12)


def test_condition_single_slot_is_identity():
    report = condition_bound_and_measure(_scalar_system(-1.0), m=0, h=0.1)
    measured = next(r["kappa_measured"] for r in report.rows if "kappa_measured" in r)
    assert measured == pytest.approx(1.0, abs=1e-12)
    assert report.ok


def test_condition_decay_preset_under_bound():
    grid = GridSpec(8, (DIRICHLET,))
    system = _rd_system(FIG2, grid, N=2)
    h = max_stable_timestep(2, FIG2.D, 1, 8, FIG2.a)
    report = condition_bound_and_measure(system, m=20, h=h)
    measured = next(r["kappa_measured"] for r in report.rows if "kappa_measured" in r)
    assert report.ok
    assert measured <= 42.0


@pytest.mark.parametrize("m", [3, 10, 50])
def test_condition_bound_holds_across_step_counts(m):
    grid = GridSpec(4, (DIRICHLET,))
    system = _rd_system(FIG2, grid, N=2)
    h = 0.7 * max_stable_timestep(2, FIG2.D, 1, 4, FIG2.a)
    report = condition_bound_and_measure(system, m=m, h=h)
    measured = next(r["kappa_measured"] for r in report.rows if "kappa_measured" in r)
    assert report.ok and measured <= 2.0 * (m + 1)


def test_condition_above_cap_reports_bound_only():
    grid = GridSpec(8, (DIRICHLET,))
    system = _rd_system(FIG2, grid, N=2)
    report = condition_bound_and_measure(system, m=100, h=1e-3)
    assert report.ok
    assert not any("kappa_measured" in r for r in report.rows)
    assert "dense cap" in report.notes


# ---------------------------------------------------------------------------
# step contraction
# ---------------------------------------------------------------------------


def test_stability_at_exact_step_bound():
    grid = GridSpec(8, (DIRICHLET,))
    system = _rd_system(FIG3, grid, N=2)
    h = max_stable_timestep(2, FIG3.D, 1, 8, FIG3.a)
    report = stability_check(system, h)
    step_norm = report.rows[0]["step_norm"]
    assert report.ok
    assert step_norm <= 1.0 + 1e-12
    parts = [r for r in report.rows if "part" in r]
    assert len(parts) == 2
    assert all(r["norm"] <= 0.5 + 1e-12 for r in parts)


def test_stability_zero_step_is_identity():
    grid = GridSpec(4, (DIRICHLET,))
    system = _rd_system(FIG2, grid, N=2)
    report = stability_check(system, 0.0)
    assert report.rows[0]["step_norm"] == pytest.approx(1.0, abs=1e-13)
    assert report.ok


def test_stability_flags_overlarge_step_without_raising():
    grid = GridSpec(8, (DIRICHLET,))
    system = _rd_system(FIG3, grid, N=2)
    h = 10.0 * max_stable_timestep(2, FIG3.D, 1, 8, FIG3.a)
    report = stability_check(system, h)
    assert not report.ok
    assert report.rows[0]["step_norm"] > 1.0
    assert "step-size law" in report.notes


def test_stability_coupled_blocks_within_part_bound():
    # quadratic case: the coupling band is present and |b| <= |lambda1|
    grid = GridSpec(8, (DIRICHLET,))
    system = _rd_system(FIG2, grid, N=2)
    h = max_stable_timestep(2, FIG2.D, 1, 8, FIG2.a)
    report = stability_check(system, h)
    assert report.ok and report.precondition_ok
    parts = [r for r in report.rows if "part" in r]
    assert all(r["norm"] <= 0.5 + 1e-12 for r in parts)


def test_stability_part_bound_not_asserted_outside_regime():
    # weak damping: |b| > |lambda1| with coupling present, so the 1/N
    # part bound has no backing; norms are reported, not asserted
    p = RDParams(D=0.012, a=0.0196, b=-1.0, M=3)
    grid = GridSpec(4, (DIRICHLET,))
    system = _rd_system(p, grid, N=3)
    h = max_stable_timestep(3, p.D, 1, 4, p.a)
    report = stability_check(system, h)
    assert not report.precondition_ok
    assert any("part" in r for r in report.rows)


# ---------------------------------------------------------------------------
# global error bound
# ---------------------------------------------------------------------------


def test_global_error_bound_vanishes_with_step():
    grid = GridSpec(8, (DIRICHLET,))
    assert global_error_bound(FIG2, grid, 2, 1.0, 0.0, 1.0) == 0.0
    small = global_error_bound(FIG2, grid, 2, 1.0, 1e-8, 1.0)
    assert 0.0 < small < 1e-4


def test_global_error_bound_nonlinear_weight_algebra():
    grid = GridSpec(8, (DIRICHLET,))
    p1 = RDParams(D=0.2, a=0.2, b=-1.0, M=2)
    p2 = RDParams(D=0.2, a=0.2, b=-2.0, M=2)
    reach = 4.0 * 0.2 * 81
    want = ((reach + 0.2 + 2.0) / (reach + 0.2 + 1.0)) ** 2
    got = global_error_bound(p2, grid, 2, 1.0, 1e-3, 1.0) / global_error_bound(
        p1, grid, 2, 1.0, 1e-3, 1.0
    )
    assert got == pytest.approx(want, rel=1e-12)


def test_global_error_bound_dominates_measured_error():
    grid = GridSpec(8, (DIRICHLET,))
    system = _rd_system(FIG2, grid, N=2)
    y0 = lift_initial(_fig2_initial(grid), 2)
    ref = evolve_truncated(system, y0, T=1.0, tol=1e-10)
    max_yhat = float(np.max(np.linalg.norm(ref.states, axis=1)))
    h = max_stable_timestep(2, FIG2.D, 1, 8, FIG2.a)
    hist = euler_evolve(system, y0, T=1.0, h=h)
    measured = float(np.linalg.norm(hist.block1[-1] - ref.block1()[-1]))
    bound = global_error_bound(FIG2, grid, 2, 1.0, hist.h, max_yhat)
    assert measured <= bound


# ---------------------------------------------------------------------------
# history weight G
# ---------------------------------------------------------------------------


def test_G_constant_history():
    block1 = np.tile(np.array([0.6, 0.8]), (7, 1))  # unit norm per row
    hist = HistoryState(
        h=0.1, block1=block1, full_sq_norms=np.full(7, 1.0),
        block1_sq_sum=7.0, final_state=block1[-1],
    )
    assert compute_G(hist) == pytest.approx(1.0, rel=1e-14)


def test_G_exponential_decay_matches_quadrature():
    T, m = 10.0, 20000
    hist = euler_evolve(_scalar_system(-1.0), np.array([1.0]), T=T, h=T / m)
    G = compute_G(hist)
    # exact value of the discrete sum the implementation claims to form
    q = (1.0 - T / m) ** 2
    discrete = math.sqrt(geometric_sum_oracle(q, m + 1) / (m + 1))
    assert G == pytest.approx(discrete, rel=1e-12)
    # and the integral it approximates: (1/T) int_0^T e^(-2t) dt
    integral = (1.0 - math.exp(-2.0 * T)) / (2.0 * T)
    assert G**2 == pytest.approx(integral, rel=1e-3)


def test_G_immediate_extinction():
    # 1 + h*rate = 0 kills the state on the first step
    hist = euler_evolve(_scalar_system(-1.0), np.array([2.0]), T=5.0, h=1.0)
    assert np.all(hist.block1[1:] == 0.0)
    assert compute_G(hist) == pytest.approx(2.0 / math.sqrt(6.0), rel=1e-14)


def test_G_cache_coherent_with_recomputation():
    grid = GridSpec(4, (DIRICHLET,))
    system = _rd_system(FIG2, grid, N=2)
    h = max_stable_timestep(2, FIG2.D, 1, 4, FIG2.a)
    hist = euler_evolve(system, lift_initial(_fig2_initial(grid), 2), T=1.0, h=h)
    from_cache = math.sqrt(hist.block1_sq_sum / (hist.m + 1))
    assert compute_G(hist) == pytest.approx(from_cache, rel=1e-12)


# ---------------------------------------------------------------------------
# measurement probability
# ---------------------------------------------------------------------------


def _row_value(report, key):
    return next(r[key] for r in report.rows if key in r)


def test_measurement_single_block_ratio_is_one():
    hist = euler_evolve(_scalar_system(-1.0), np.array([1.0]), T=1.0, h=0.05)
    report = measurement_probability_bound(hist, max_yhat=1.0)
    assert _row_value(report, "exact_ratio") == pytest.approx(1.0, rel=1e-14)
    assert report.ok and report.margin > 0.0


def test_measurement_cubic_preset_with_verified_precondition():
    grid = GridSpec(4, (DIRICHLET,))
    system = _rd_system(FIG3, grid, N=3)
    y0 = lift_initial(_fig3_initial(grid), 3)
    h = max_stable_timestep(3, FIG3.D, 1, 4, FIG3.a)
    hist = euler_evolve(system, y0, T=1.0, h=h)

    # exact iterates from the matrix exponential: one propagator, powered up
    E = expm(hist.h * np.asarray(system.materialize().todense()))
    exact = np.empty((hist.m + 1, system.dim))
    exact[0] = y0
    for k in range(hist.m):
        exact[k + 1] = E @ exact[k]
    max_yhat = float(np.max(np.linalg.norm(exact, axis=1)))
    s1 = system.block_slice(1)
    sweep_err = 0.0
    y = y0.copy()
    step = np.eye(system.dim) + hist.h * np.asarray(system.materialize().todense())
    for k in range(hist.m):
        y = step @ y
        sweep_err = max(sweep_err, float(np.linalg.norm(exact[k + 1] - y)))

    report = measurement_probability_bound(hist, max_yhat, global_error=sweep_err)
    assert report.precondition_ok  # measured error well under G/2 here
    assert report.ok
    assert report.margin > 0.0
    assert _row_value(report, "exact_ratio") >= _row_value(report, "p_measure_bound")


def test_measurement_ratio_one_when_upper_blocks_empty():
    block1 = np.array([[1.0, 0.0], [0.5, 0.5], [0.25, 0.0]])
    full_sq = np.sum(block1**2, axis=1)  # nothing outside block 1
    hist = HistoryState(
        h=0.1, block1=block1, full_sq_norms=full_sq,
        block1_sq_sum=float(np.sum(full_sq)), final_state=block1[-1],
    )
    report = measurement_probability_bound(hist, max_yhat=2.0)
    assert _row_value(report, "exact_ratio") == pytest.approx(1.0, rel=1e-14)


def test_measurement_bound_suppressed_when_error_too_large():
    hist = euler_evolve(_scalar_system(-1.0), np.array([1.0]), T=1.0, h=0.05)
    G = compute_G(hist)
    report = measurement_probability_bound(hist, max_yhat=1.0, global_error=0.9 * G)
    assert not report.precondition_ok
    assert report.ok  # vacuous
    assert math.isnan(_row_value(report, "p_measure_bound"))


# ---------------------------------------------------------------------------
# query-count model
# ---------------------------------------------------------------------------


def test_query_estimate_quadratic_in_horizon():
    grid = GridSpec(8, (DIRICHLET,))
    one = query_complexity_estimate(FIG2, grid, 2, 1.0, 0.01, 0.1, 3, 0.5)
    two = query_complexity_estimate(FIG2, grid, 2, 2.0, 0.01, 0.1, 3, 0.5)
    assert two.total == pytest.approx(4.0 * one.total, rel=1e-12)


def test_query_estimate_inverse_in_accuracy():
    grid = GridSpec(8, (DIRICHLET,))
    full = query_complexity_estimate(FIG2, grid, 2, 1.0, 0.01, 0.1, 3, 0.5)
    half = query_complexity_estimate(FIG2, grid, 2, 1.0, 0.005, 0.1, 3, 0.5)
    assert half.total == pytest.approx(2.0 * full.total, rel=1e-12)


def test_query_estimate_unit_norm_prefactor():
    grid = GridSpec(8, (DIRICHLET,))
    for N in (1, 2, 5):
        est = query_complexity_estimate(FIG2, grid, N, 1.0, 0.01, 0.1, 3, 1.0)
        assert est.prefactor_UinN == 1.0


def test_query_estimate_prefactor_is_initial_norm_power():
    grid = GridSpec(16, (DIRICHLET,))
    p = RDParams(D=0.012, a=0.0196, b=-1.0, M=3)
    u_norm = math.sqrt(0.147)
    est = query_complexity_estimate(p, grid, 2, 3.0, 0.01, 0.1, 3, u_norm)
    assert est.prefactor_UinN == pytest.approx(0.147**2, rel=1e-12)
    assert math.isfinite(est.total) and est.total > 0.0
    assert math.isfinite(est.kappa_estimate) and est.kappa_estimate > 0.0
    # the structural factor times the isolated prefactor is the total
    base = 3 * 3.0**2 * 0.012**2 * 1 * 16**4 * 2**3 / (0.1**2 * 0.01)
    assert est.base == pytest.approx(base, rel=1e-12)
    assert est.total == pytest.approx(base * 0.147**2, rel=1e-12)
    assert "polylog" not in est.polylog or est.polylog_value == 1.0


def test_query_estimate_scalar_case_prefactor():
    grid = GridSpec(8, (DIRICHLET,))
    est = query_complexity_estimate(FIG2, grid, 1, 1.0, 0.01, 0.1, 3, 0.383)
    assert est.prefactor_UinN == pytest.approx(0.383**2, rel=1e-12)


def test_query_estimate_warns_outside_guarantee():
    grid = GridSpec(8, (DIRICHLET,))
    with pytest.warns(UserWarning, match="guarantee regime"):
        query_complexity_estimate(FIG2, grid, 2, 1.0, 0.01, 0.1, 3, 0.5, r_d=1.2)


def test_query_estimate_validates_inputs():
    grid = GridSpec(8, (DIRICHLET,))
    with pytest.raises(ValueError):
        query_complexity_estimate(FIG2, grid, 2, 1.0, 0.0, 0.1, 3, 0.5)
    with pytest.raises(ValueError):
        query_complexity_estimate(FIG2, grid, 2, 1.0, 0.01, 0.0, 3, 0.5)


# ---------------------------------------------------------------------------
# sweep planning
# ---------------------------------------------------------------------------


def test_plan_respects_user_step_count():
    system = _scalar_system(-1.0)
    plan = plan_euler(system, T=1.0, h_bound=0.3, m_user=10)
    assert plan.m == 10
    assert plan.h == pytest.approx(0.1)
    assert plan.dim == 11


def test_plan_defaults_to_stability_step():
    system = _scalar_system(-1.0)
    plan = plan_euler(system, T=1.0, h_bound=0.3)
    assert plan.m == 4
    assert plan.h == pytest.approx(0.25)
    assert plan.h <= 0.3


def test_plan_validation():
    system = _scalar_system(-1.0)
    with pytest.raises(ValueError):
        plan_euler(system, T=0.0, h_bound=0.1)
    with pytest.raises(ValueError):
        EulerSystem(system=system, m=2, h=0.0)
    with pytest.raises(ValueError):
        EulerSystem(system=system, m=-1, h=0.1)
