import numpy as np
import pytest
from numpy.testing import assert_allclose

from inexactfp.fixedpoint import (
    NotAContractionError,
    PerturbationSchedule,
    StagnatedTraceError,
    Termination,
    bound_direct,
    bound_nested,
    derived_schedule_from_LS,
    estimate_lipschitz,
    iterate_nested,
    iterate_perturbed,
    iterate_plain,
)
from inexactfp.krylov import SolveReport, absolute
from inexactfp.linalg import norm2
from inexactfp.problems import linear_nested


def halving(x):
    return x / 2


def scalar_exp(gamma):
    return lambda x: np.exp(gamma * x) / 4


# ---------------------------------------------------------------------------
# plain iteration
# ---------------------------------------------------------------------------

def test_plain_halving_map():
    trace = iterate_plain(halving, 1.0, tol=1e-14)
    assert trace.terminated_by is Termination.INCREMENT_BELOW_TOL
    assert abs(trace.final[0]) <= 1e-13
    ratios = [trace.increments[i + 1] / trace.increments[i]
              for i in range(len(trace.increments) - 2)]
    assert_allclose(ratios, 0.5, rtol=1e-10)


def test_plain_scalar_exp_fixed_point():
    f = scalar_exp(0.3)
    # oracle: 200 raw applications of the map
    x = 0.5
    for _ in range(200):
        x = f(x)
    trace = iterate_plain(f, 0.5, tol=1e-14)
    assert trace.final[0] == pytest.approx(x, abs=1e-13)
    # root of x - e^(0.3 x)/4, cross-checked with scipy brentq
    assert trace.final[0] == pytest.approx(0.2711894791, abs=1e-7)


def test_plain_affine_map_matches_direct_solve():
    problem = linear_nested(0.1, 0.1)
    AB = problem.A @ problem.B

    def f(x):
        return AB @ x + problem.b

    trace = iterate_plain(f, np.zeros(2), tol=1e-15)
    assert_allclose(trace.final, problem.x_star, atol=1e-12)


def test_plain_divergence_flagged():
    trace = iterate_plain(lambda x: 3.0 * x, 1.0, tol=1e-14, max_iter=200)
    assert trace.terminated_by is Termination.DIVERGED


# the per-step contraction inequality carries a 1e-8 relative slack, so it
# is only checkable while increments sit well above the ~1e-15 noise floor;
# tol=1e-7 keeps every tested increment meaningful.

def test_plain_increment_contraction_property():
    for gamma in (0.3, 1.145, 1.2):
        f = scalar_exp(gamma)
        L = gamma * np.exp(gamma) / 4
        trace = iterate_plain(f, 0.5, tol=1e-7)
        incs = trace.increments
        assert all(
            incs[k + 1] <= L * incs[k] * (1 + 1e-8) for k in range(len(incs) - 1)
        )


def test_plain_increment_contraction_affine():
    problem = linear_nested(0.9, 0.9)
    AB = problem.A @ problem.B
    L = float(np.linalg.norm(AB, 2))

    def f(x):
        return AB @ x + problem.b

    incs = iterate_plain(f, np.zeros(2), tol=1e-7).increments
    assert all(incs[k + 1] <= L * incs[k] * (1 + 1e-8) for k in range(len(incs) - 1))


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------

def test_schedule_none_is_zero():
    s = PerturbationSchedule.none()
    assert norm2(s.vector(3, 4)) == 0.0


def test_schedule_constant_norm_and_direction():
    s = PerturbationSchedule.constant(0.2)
    v = s.vector(0, 9)
    assert norm2(v) == pytest.approx(0.2, rel=1e-12)
    assert np.all(v > 0)  # all-ones direction by default


def test_schedule_direction_normalized():
    s = PerturbationSchedule.constant(1.0, direction=[3.0, 4.0])
    assert norm2(s.direction) == pytest.approx(1.0, abs=1e-12)


def test_schedule_adaptive_decay():
    s = PerturbationSchedule.adaptive(1e-2, 0.5)
    assert s.magnitude(0) == pytest.approx(1e-2)
    assert s.magnitude(3) == pytest.approx(1e-2 * 0.125)
    with pytest.raises(ValueError):
        PerturbationSchedule.adaptive(1e-2, 1.0)


@pytest.mark.parametrize(
    "schedule,L_S,k,expected",
    [
        (PerturbationSchedule.constant(1e-3), 0.5, 7, 2e-3),
        (PerturbationSchedule.adaptive(1e-2, 0.3), 1.0, 2, 1e-2 * 0.09),
        (PerturbationSchedule.none(), 0.25, 0, 0.0),
    ],
)
def test_derived_schedule(schedule, L_S, k, expected):
    derived = derived_schedule_from_LS(schedule, L_S)
    assert derived.magnitude(k) == pytest.approx(expected, abs=1e-18)


# ---------------------------------------------------------------------------
# perturbed iteration
# ---------------------------------------------------------------------------

def test_perturbed_none_equals_plain():
    f = halving
    plain = iterate_plain(f, 1.0, tol=1e-14)
    pert = iterate_perturbed(f, PerturbationSchedule.none(), 1.0, tol=1e-14)
    assert len(plain.iterates) == len(pert.iterates)
    for a, b in zip(plain.iterates, pert.iterates):
        assert_allclose(a, b, rtol=0, atol=0)


def test_perturbed_constant_matches_reference_value():
    f = scalar_exp(0.3)
    x_star = iterate_plain(f, 0.5, tol=1e-14).final
    sched = PerturbationSchedule.constant(1e-2, direction=[1.0])
    trace = iterate_perturbed(f, sched, 0.5, tol=1e-14)
    err = abs(trace.final - x_star)[0]
    assert err == pytest.approx(1.089e-2, rel=0.01)


def test_perturbed_adaptive_reaches_exact_solution():
    f = scalar_exp(0.3)
    L = 0.3 * np.exp(0.3) / 4
    x_star = iterate_plain(f, 0.5, tol=1e-15).final
    sched = PerturbationSchedule.adaptive(1e-2, L, direction=[1.0])
    trace = iterate_perturbed(f, sched, 0.5, tol=1e-15)
    assert abs(trace.final - x_star)[0] <= 1e-12


# ---------------------------------------------------------------------------
# nested iteration
# ---------------------------------------------------------------------------

def test_nested_identity_maps_stay_put():
    ident = lambda x: x
    trace = iterate_nested(
        ident, ident, PerturbationSchedule.none(), PerturbationSchedule.none(),
        np.array([2.0, -1.0]), tol=1e-14,
    )
    assert trace.steps == 1
    assert trace.increments[0] == 0.0


def test_nested_linear_2x2_reference_band():
    problem = linear_nested(0.1, 0.1)
    sched = PerturbationSchedule.constant(1e-1)  # all-ones direction
    trace = iterate_nested(problem.S, problem.F, sched, sched, np.zeros(2), tol=1e-14)
    err = norm2(trace.final - problem.x_star)
    assert 0.9 * 1.058e-1 <= err <= 1.25 * 1.058e-1


def test_nested_scalar_reference_cell():
    # S(x) = 0.25*g1*e^x with L_S = 0.9, F(x) = g2 x^2 with L_F = 0.99
    g1 = 3.6 / np.e
    g2 = 0.495
    S = lambda y: 0.25 * g1 * np.exp(y)
    F = lambda x: g2 * x**2
    x_star = iterate_plain(lambda x: S(F(x)), 0.5, tol=1e-14).final
    sched = PerturbationSchedule.constant(1e-1, direction=[1.0])
    trace = iterate_nested(S, F, sched, sched, 0.5, tol=1e-14)
    err = abs(trace.final - x_star)[0]
    assert err == pytest.approx(1.658e-1, rel=0.01)


def _dummy_report(iterations):
    return SolveReport(
        solution=np.zeros(1),
        iterations=iterations,
        initial_residual_norm=1.0,
        final_residual_norm=0.0,
        rhs_norm=1.0,
        criterion=absolute(1e-10),
        converged=True,
    )


def test_nested_implicit_mode_collects_reports():
    # maps standing in for inner solves return (value, report)
    def F(x):
        return x / 2, _dummy_report(3)

    def S(y):
        return y / 2, _dummy_report(2)

    trace = iterate_nested(
        S, F, PerturbationSchedule.none(), PerturbationSchedule.none(),
        1.0, tol=1e-13,
    )
    assert all(len(step) == 2 for step in trace.inner_reports)
    assert trace.total_inner_iterations == 5 * trace.steps


def test_inner_stagnation_exit():
    def frozen(x):
        return x, _dummy_report(0)

    trace = iterate_plain(frozen, np.array([1.0, 2.0]), tol=1e-30)
    assert trace.terminated_by is Termination.INNER_STAGNATION
    assert trace.steps == 1


# ---------------------------------------------------------------------------
# error bounds
# ---------------------------------------------------------------------------

def test_bound_direct_values():
    assert bound_direct(0.0, 0.3) == 0.0
    assert bound_direct(1e-2, 0.9) == pytest.approx(0.1, rel=1e-12)
    assert bound_direct(1e-1, 0.101239) == pytest.approx(0.111264, rel=1e-5)
    with pytest.raises(NotAContractionError):
        bound_direct(1e-2, 1.0)


def test_bound_nested_values():
    assert bound_nested(0.1, 0.1, 0.1, 0.1) == pytest.approx(1.111111e-1, rel=1e-6)
    assert bound_nested(0.1, 0.1, 0.99, 0.99) == pytest.approx(10.0, rel=1e-6)
    assert bound_nested(0.1, 0.1, 0.9, 0.9) == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(NotAContractionError):
        bound_nested(0.1, 0.1, 1.0, 1.0)


def test_direct_bound_dominates_measured_error():
    for gamma in (0.3, 1.145, 1.2):
        f = scalar_exp(gamma)
        L = gamma * np.exp(gamma) / 4
        x_star = iterate_plain(f, 0.5, tol=1e-14).final
        for eps in (1e-1, 1e-2, 1e-3):
            sched = PerturbationSchedule.constant(eps, direction=[1.0])
            trace = iterate_perturbed(f, sched, 0.5, tol=1e-14)
            err = abs(trace.final - x_star)[0]
            assert err <= bound_direct(eps, L) + 1e-10


ADAPTIVE_LIMIT_CASES = [
    pytest.param(0.3, id="gamma=0.3"),
    pytest.param(1.145, id="gamma=1.145"),
    pytest.param(
        1.2,
        id="gamma=1.2",
        marks=pytest.mark.xfail(
            strict=True,
            reason="intrinsic limit: the schedule decays at the global L=0.996 "
            "while the outer tolerance cuts off at 1e-12, leaving an error of "
            "about TOL * L/(1-L) = 250*TOL > 100*TOL",
        ),
    ),
]


@pytest.mark.parametrize("gamma", ADAPTIVE_LIMIT_CASES)
def test_adaptive_schedule_recovers_exact_scalar(gamma):
    f = scalar_exp(gamma)
    L = gamma * np.exp(gamma) / 4
    x_star = iterate_plain(f, 0.5, tol=1e-14).final
    sched = PerturbationSchedule.adaptive(1e-2, L, direction=[1.0])
    trace = iterate_perturbed(f, sched, 0.5, tol=1e-12)
    assert abs(trace.final - x_star)[0] <= 100 * 1e-12


@pytest.mark.parametrize("alpha,beta", [(0.1, 0.1), (0.9, 0.9), (0.99, 0.99)])
def test_adaptive_schedule_recovers_exact_2x2(alpha, beta):
    problem = linear_nested(alpha, beta)
    AB = problem.A @ problem.B

    def f(x):
        return AB @ x + problem.b

    L = float(np.linalg.norm(AB, 2))
    sched = PerturbationSchedule.adaptive(1e-2, L)
    trace = iterate_perturbed(f, sched, np.zeros(2), tol=1e-12)
    assert norm2(trace.final - problem.x_star) <= 100 * 1e-12


@pytest.mark.parametrize("alpha,beta", [(0.1, 0.1), (0.9, 0.9), (0.9, 0.99)])
def test_nested_per_step_geometric_series_bound(alpha, beta):
    # brute-force accumulation of the per-step bound
    # (Ls Lf)^{k+1} ||x0 - x*|| + sum_j (Ls Lf)^j (Ls eps + delta)
    problem = linear_nested(alpha, beta)
    L_S, L_F = problem.L_S, problem.L_F
    eps = 1e-1
    sched = PerturbationSchedule.constant(eps)
    trace = iterate_nested(problem.S, problem.F, sched, sched, np.zeros(2), tol=1e-14)
    e0 = norm2(trace.iterates[0] - problem.x_star)
    rho = L_S * L_F
    for k in range(len(trace.iterates) - 1):
        partial = sum(rho**j * (L_S * eps + eps) for j in range(k + 1))
        bound_k = rho ** (k + 1) * e0 + partial
        err_k = norm2(trace.iterates[k + 1] - problem.x_star)
        assert err_k <= bound_k + 1e-10


def test_nested_bound_dominates_measured_error():
    for L_S in (0.1, 0.9, 0.99):
        for L_F in (0.1, 0.9, 0.99):
            g1, g2 = 4 * L_S / np.e, L_F / 2
            S = lambda y: 0.25 * g1 * np.exp(y)
            F = lambda x: g2 * x**2
            x_star = iterate_plain(lambda x: S(F(x)), 0.5, tol=1e-14).final
            sched = PerturbationSchedule.constant(1e-1, direction=[1.0])
            trace = iterate_nested(S, F, sched, sched, 0.5, tol=1e-14)
            err = abs(trace.final - x_star)[0]
            assert err <= bound_nested(1e-1, 1e-1, L_S, L_F) + 1e-10


# ---------------------------------------------------------------------------
# lipschitz measurement
# ---------------------------------------------------------------------------

def test_estimate_lipschitz_linear_map():
    trace = iterate_plain(halving, 1.0, tol=1e-10)
    data = estimate_lipschitz(trace)
    assert data.source == "measured"
    assert data.L == pytest.approx(0.5, abs=1e-10)
    assert data.is_contraction


def test_estimate_lipschitz_affine_2x2():
    problem = linear_nested(0.9, 0.9)
    AB = problem.A @ problem.B

    def f(x):
        return AB @ x + problem.b

    trace = iterate_plain(f, np.zeros(2), tol=1e-10)
    # power iteration oracle for the dominant eigenvalue magnitude
    v = np.ones(2)
    for _ in range(200):
        v = AB @ v
        v /= norm2(v)
    lam = abs(float(v @ (AB @ v)))
    data = estimate_lipschitz(trace)
    assert data.L == pytest.approx(lam, rel=0.05)


def test_estimate_lipschitz_scalar_exp():
    f = scalar_exp(0.3)
    trace = iterate_plain(f, 0.5, tol=1e-10)
    x_star = trace.final[0]
    analytic = 0.3 * np.exp(0.3 * x_star) / 4
    data = estimate_lipschitz(trace)
    assert data.L == pytest.approx(analytic, rel=0.10)


def test_estimate_lipschitz_needs_increments():
    trace = iterate_plain(halving, 1.0, tol=0.4)  # stops after 2 steps
    with pytest.raises(ValueError):
        estimate_lipschitz(trace)


def test_estimate_lipschitz_stagnated():
    # map reaches its fixed point exactly, so the last increment is zero
    trace = iterate_plain(lambda x: np.maximum(x - 1.0, 0.0), 3.4, tol=1e-30, max_iter=8)
    assert trace.increments[-1] == 0.0
    with pytest.raises(StagnatedTraceError):
        estimate_lipschitz(trace)
