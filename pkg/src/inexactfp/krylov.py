"""Conjugate Gradient and GMRES with pluggable inner termination criteria.

The stopping rule is the whole point here: the solvers test one of three
criteria on the residual norm after every iteration (and once before the
first, so a good enough initial guess exits with zero iterations) and report
everything an outer fixed point analysis needs - initial/final residual
norms, the rhs norm, the iteration count and the criterion itself.

Criteria, for the linear system A x = b with initial guess x0:

* relative to initial residual:  ||b - A x|| <= tau * ||b - A x0||
* relative to rhs:               ||b - A x|| <= tau * ||b||
* absolute:                      ||b - A x|| <= tau

All inequalities are inclusive. On success the true residual is recomputed
once at exit to guard against recurrence drift; if it misses the threshold
by more than a factor 10 the solver keeps iterating.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import norm2

DRIFT_GUARD_FACTOR = 10.0
DEGENERATE_RHS_NORM = 1e-300
_DEGENERATE_FALLBACK_TOL = 1e-14


class CriterionKind(enum.Enum):
    RELATIVE_TO_INITIAL_RESIDUAL = "relative_to_initial_residual"
    RELATIVE_TO_RHS = "relative_to_rhs"
    ABSOLUTE = "absolute"


@dataclass(frozen=True)
class TerminationCriterion:
    """One of the three inner stopping rules with its tolerance."""

    kind: CriterionKind
    tolerance: float

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")

    def threshold(self, initial_residual_norm: float, rhs_norm: float) -> float:
        """The residual norm the criterion compares against."""
        if self.kind is CriterionKind.RELATIVE_TO_INITIAL_RESIDUAL:
            return self.tolerance * initial_residual_norm
        if self.kind is CriterionKind.RELATIVE_TO_RHS:
            return self.tolerance * rhs_norm
        return self.tolerance


def relative_to_initial(tau: float) -> TerminationCriterion:
    return TerminationCriterion(CriterionKind.RELATIVE_TO_INITIAL_RESIDUAL, tau)


def relative_to_rhs(tau: float) -> TerminationCriterion:
    return TerminationCriterion(CriterionKind.RELATIVE_TO_RHS, tau)


def absolute(tau: float) -> TerminationCriterion:
    return TerminationCriterion(CriterionKind.ABSOLUTE, tau)


def evaluate_criterion(
    criterion: TerminationCriterion,
    current_residual_norm: float,
    initial_residual_norm: float,
    rhs_norm: float,
) -> bool:
    """Pure predicate: does the current residual satisfy the criterion?"""
    return current_residual_norm <= criterion.threshold(initial_residual_norm, rhs_norm)


@dataclass
class SolveReport:
    """Outcome of one inner linear solve.

    ``iterations == 0`` is legitimate: the initial guess already satisfied
    the criterion. ``residual_history`` holds the per-iteration (recurrence)
    residual norms starting from the initial one. ``rhs_degenerate`` flags
    the rhs-relative criterion hitting a numerically zero rhs, in which case
    the solve fell back to an absolute tolerance of 1e-14.
    """

    solution: np.ndarray
    iterations: int
    initial_residual_norm: float
    final_residual_norm: float
    rhs_norm: float
    criterion: TerminationCriterion
    converged: bool
    breakdown: str | None = None
    residual_history: list[float] = field(default_factory=list)
    rhs_degenerate: bool = False


def _as_apply(op):
    if callable(op) and not sp.issparse(op) and not isinstance(op, np.ndarray):
        return op
    return lambda v: np.asarray(op @ v, dtype=float)


def _effective_criterion(criterion: TerminationCriterion, rhs_norm: float):
    """Swap in the absolute fallback when the rhs-relative rule degenerates."""
    if (
        criterion.kind is CriterionKind.RELATIVE_TO_RHS
        and rhs_norm < DEGENERATE_RHS_NORM
    ):
        return absolute(_DEGENERATE_FALLBACK_TOL), True
    return criterion, False


def cg_solve(
    op,
    b: np.ndarray,
    x0: np.ndarray,
    criterion: TerminationCriterion,
    max_iter: int = 10000,
) -> SolveReport:
    """Conjugate gradients for symmetric positive definite ``op``.

    The criterion is checked on the recurrence residual after every step and
    on the true residual before the first. SPD-ness is the caller's
    responsibility; an indefinite operator surfaces as a breakdown report.
    """
    apply_op = _as_apply(op)
    b = np.asarray(b, dtype=float)
    x = np.array(x0, dtype=float)
    rhs_norm = norm2(b)
    crit, degenerate = _effective_criterion(criterion, rhs_norm)

    r = b - apply_op(x)
    r0_norm = norm2(r)
    history = [r0_norm]
    threshold = crit.threshold(r0_norm, rhs_norm)

    def report(converged, iterations, final, breakdown=None):
        return SolveReport(
            solution=x,
            iterations=iterations,
            initial_residual_norm=r0_norm,
            final_residual_norm=final,
            rhs_norm=rhs_norm,
            criterion=criterion,
            converged=converged,
            breakdown=breakdown,
            residual_history=history,
            rhs_degenerate=degenerate,
        )

    if r0_norm <= threshold:
        return report(True, 0, r0_norm)

    p = r.copy()
    rs = float(r @ r)
    it = 0
    while it < max_iter:
        Ap = apply_op(p)
        pAp = float(p @ Ap)
        if not np.isfinite(pAp) or pAp <= 0.0:
            return report(False, it, norm2(b - apply_op(x)), "indefinite or non-finite")
        alpha = rs / pAp
        x += alpha * p
        r -= alpha * Ap
        rs_new = float(r @ r)
        it += 1
        res = np.sqrt(rs_new)
        history.append(res)
        if not np.isfinite(res):
            return report(False, it, res, "indefinite or non-finite")
        if res <= threshold:
            true_res = norm2(b - apply_op(x))
            if true_res <= DRIFT_GUARD_FACTOR * threshold:
                return report(True, it, true_res)
            # recurrence drifted: restart the recursion from the true residual
            r = b - apply_op(x)
            rs_new = float(r @ r)
            p = r.copy()
            rs = rs_new
            continue
        p = r + (rs_new / rs) * p
        rs = rs_new
    return report(False, it, norm2(b - apply_op(x)))


def gmres_solve(
    op,
    b: np.ndarray,
    x0: np.ndarray,
    criterion: TerminationCriterion,
    max_iter: int = 10000,
    restart: int | None = None,
) -> SolveReport:
    """GMRES (reorthogonalized Gram-Schmidt Arnoldi, Givens least squares).

    ``restart=None`` runs full GMRES; the per-iteration residual norm comes
    for free from the rotated right-hand side. Happy breakdown (Arnoldi norm
    below 1e-14 of the initial residual) means the Krylov space contains the
    exact solution.
    """
    apply_op = _as_apply(op)
    b = np.asarray(b, dtype=float)
    x = np.array(x0, dtype=float)
    n = b.shape[0]
    rhs_norm = norm2(b)
    crit, degenerate = _effective_criterion(criterion, rhs_norm)

    r = b - apply_op(x)
    r0_norm = norm2(r)
    history = [r0_norm]
    threshold = crit.threshold(r0_norm, rhs_norm)

    def report(converged, iterations, final, breakdown=None):
        return SolveReport(
            solution=x,
            iterations=iterations,
            initial_residual_norm=r0_norm,
            final_residual_norm=final,
            rhs_norm=rhs_norm,
            criterion=criterion,
            converged=converged,
            breakdown=breakdown,
            residual_history=history,
            rhs_degenerate=degenerate,
        )

    if r0_norm <= threshold:
        return report(True, 0, r0_norm)

    total_it = 0
    while total_it < max_iter:
        cycle = min(restart or n, n, max_iter - total_it)
        beta = norm2(r)
        V = np.zeros((n, cycle + 1))
        H = np.zeros((cycle + 1, cycle))
        cs = np.zeros(cycle)
        sn = np.zeros(cycle)
        g = np.zeros(cycle + 1)
        g[0] = beta
        V[:, 0] = r / beta
        j_used = 0
        happy = False
        satisfied = False
        for j in range(cycle):
            w = apply_op(V[:, j])
            # classical Gram-Schmidt with one reorthogonalization pass: as
            # orthogonal as the modified variant in float64, and vectorized
            basis = V[:, : j + 1]
            coeffs = basis.T @ w
            w = w - basis @ coeffs
            correction = basis.T @ w
            w = w - basis @ correction
            H[: j + 1, j] = coeffs + correction
            H[j + 1, j] = norm2(w)
            happy = H[j + 1, j] < 1e-14 * r0_norm
            if not happy:
                V[:, j + 1] = w / H[j + 1, j]
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            d = float(np.hypot(H[j, j], H[j + 1, j]))
            cs[j] = H[j, j] / d
            sn[j] = H[j + 1, j] / d
            H[j, j] = d
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            j_used = j + 1
            total_it += 1
            res = abs(g[j_used])
            history.append(res)
            if not np.isfinite(res):
                return report(False, total_it, res, "indefinite or non-finite")
            satisfied = res <= threshold
            if satisfied or happy:
                break
        y = np.linalg.solve(H[:j_used, :j_used], g[:j_used])
        x = x + V[:, :j_used] @ y
        r = b - apply_op(x)
        true_res = norm2(r)
        if happy:
            return report(True, total_it, true_res)
        if satisfied:
            if true_res <= DRIFT_GUARD_FACTOR * threshold:
                return report(True, total_it, true_res)
            continue  # drift: restart from the true residual
        if restart is None and j_used == n:
            # full Krylov space exhausted; nothing more to gain
            return report(true_res <= threshold, total_it, true_res)
    return report(False, total_it, norm2(b - apply_op(x)))
