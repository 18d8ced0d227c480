"""The 2x2 linear nested problem (I - AB) x = b, i.e. x = A(Bx) + b.

A and B share the shape [[p, 0], [0.001, 0.001]] with p = alpha resp. beta;
the outer map is S(x) = Ax + b, the inner F(x) = Bx, so the Lipschitz
constants are the spectral norms (slightly above alpha resp. beta).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..linalg import solve_direct

OFF_DIAGONAL = 0.001


@dataclass(frozen=True)
class LinearNestedProblem:
    S: Callable
    F: Callable
    A: np.ndarray
    B: np.ndarray
    b: np.ndarray
    x_star: np.ndarray

    @property
    def L_S(self) -> float:
        return float(np.linalg.norm(self.A, 2))

    @property
    def L_F(self) -> float:
        return float(np.linalg.norm(self.B, 2))


def _coupling_matrix(p: float) -> np.ndarray:
    return np.array([[p, 0.0], [OFF_DIAGONAL, OFF_DIAGONAL]])


def linear_nested(alpha: float, beta: float) -> LinearNestedProblem:
    """Build the problem and its reference fixed point.

    The fixed point is the direct solution of (I - AB) x = b; construction
    fails if I - AB is singular to working precision (spectral radius of AB
    at 1), which none of the studied alpha, beta reach.
    """
    A = _coupling_matrix(alpha)
    B = _coupling_matrix(beta)
    b = np.array([1.0, 1.0])
    x_star = solve_direct(np.eye(2) - A @ B, b)

    def S(x):
        return A @ x + b

    def F(x):
        return B @ x

    return LinearNestedProblem(S=S, F=F, A=A, B=B, b=b, x_star=x_star)
