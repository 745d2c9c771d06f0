"""Policy iteration for the cross-term Riccati equation of the augmented
per-agent plant.

Policy evaluation is a Lyapunov solve for the cost of the current gain;
policy improvement is K = (D^T D)^{-1} (D^T C + B^T P). The improvement uses
the positive sign, which is the stationary point of the Hamiltonian with
u = -K X and the only reading under which the iteration's fixed point
satisfies the Riccati equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .numkernel import is_hurwitz, solve_lyapunov
from .protocol import AugmentedPlant

DEFAULT_EPSILON = 1e-6
DEFAULT_MAX_ITER = 100
MONOTONE_EIG_TOL = -1e-9
ARE_RESIDUAL_RTOL = 1e-8


@dataclass(frozen=True)
class PiIterate:
    k: int
    P: np.ndarray
    K: np.ndarray  # improved gain produced from P
    gain_delta: float  # ||K^[k+1] - K^[k]||_F
    lyap_residual: float
    hurwitz: bool


@dataclass(frozen=True)
class PiTrace:
    iterates: list[PiIterate] = field(default_factory=list)
    converged: bool = False
    are_residual_final: float = float("nan")

    @property
    def P(self) -> np.ndarray:
        return self.iterates[-1].P

    @property
    def K(self) -> np.ndarray:
        return self.iterates[-1].K


def _gram(plant: AugmentedPlant) -> np.ndarray:
    g = plant.D.T @ plant.D
    sv = np.linalg.svd(g, compute_uv=False)
    if sv.size == 0 or sv[-1] <= 1e-12 * max(1.0, sv[0]):
        raise NumericalError("D^T D numerically singular")
    return g


def policy_evaluation(plant: AugmentedPlant, K) -> np.ndarray:
    """Cost matrix of the fixed gain K: solve the closed-loop Lyapunov
    equation with the tracking-error weight (C - D K)^T (C - D K)."""
    K = np.asarray(K, dtype=float)
    Abar = plant.A - plant.B @ K
    if not is_hurwitz(Abar):
        raise NumericalError("gain is not stabilizing; policy evaluation rejected")
    Cbar = plant.C - plant.D @ K
    return solve_lyapunov(Abar, Cbar.T @ Cbar)


def policy_improvement(plant: AugmentedPlant, P) -> np.ndarray:
    """Greedy gain for the cost matrix P: K = (D^T D)^{-1} (D^T C + B^T P)."""
    P = np.asarray(P, dtype=float)
    return np.linalg.solve(_gram(plant), plant.D.T @ plant.C + plant.B.T @ P)


def are_residual(plant: AugmentedPlant, P) -> float:
    """Frobenius norm of the cross-term Riccati residual at P."""
    P = np.asarray(P, dtype=float)
    cross = plant.D.T @ plant.C + plant.B.T @ P
    res = (
        plant.A.T @ P
        + P @ plant.A
        + plant.C.T @ plant.C
        - cross.T @ np.linalg.solve(_gram(plant), cross)
    )
    return float(np.linalg.norm(res, "fro"))


def run_pi(
    plant: AugmentedPlant,
    K0,
    epsilon: float = DEFAULT_EPSILON,
    max_iter: int = DEFAULT_MAX_ITER,
) -> PiTrace:
    """Alternate evaluation and improvement from a stabilizing K0 until the
    gain update falls below epsilon.

    Records every iterate and enforces the convergence guarantees at runtime:
    each closed loop stays Hurwitz, the cost matrices decrease monotonically
    (min-eigenvalue tolerance -1e-9), and the converged pair satisfies the
    Riccati equation within 1e-8 relative to the error weight.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be positive")

    K = np.asarray(K0, dtype=float)
    iterates: list[PiIterate] = []
    p_prev = None
    for k in range(max_iter):
        Abar = plant.A - plant.B @ K
        if not is_hurwitz(Abar):
            raise NumericalError(f"gain at iteration {k} is not stabilizing")
        Cbar = plant.C - plant.D @ K
        Q = Cbar.T @ Cbar
        P = solve_lyapunov(Abar, Q)
        lyap_res = float(np.linalg.norm(Abar.T @ P + P @ Abar + Q, "fro"))
        if p_prev is not None:
            drop = np.linalg.eigvalsh(p_prev - P).min()
            if drop < MONOTONE_EIG_TOL:
                raise NumericalError(
                    f"cost monotonicity violated at iteration {k} (min-eig {drop:.3e})"
                )
        p_prev = P
        K_next = policy_improvement(plant, P)
        delta = float(np.linalg.norm(K_next - K, "fro"))
        iterates.append(
            PiIterate(k=k, P=P, K=K_next, gain_delta=delta, lyap_residual=lyap_res, hurwitz=True)
        )
        if delta < epsilon:
            final_res = are_residual(plant, P)
            scale = 1.0 + np.linalg.norm(plant.C.T @ plant.C, "fro")
            if final_res >= ARE_RESIDUAL_RTOL * scale:
                raise NumericalError(
                    f"converged gain fails the Riccati fixed-point check ({final_res:.3e})"
                )
            return PiTrace(iterates=iterates, converged=True, are_residual_final=final_res)
        K = K_next

    raise NumericalError(f"policy iteration did not converge within {max_iter} iterations")
