"""Dense linear-algebra kernels: spectra, Hurwitz tests, Lyapunov solves,
stabilizing-gain synthesis.

All routines are pure functions on numpy arrays and are safe to call
concurrently. Sizes here are desk-scale (orders up to ~10), so Lyapunov
equations are solved exactly by Kronecker vectorization rather than a
Schur-based method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

LYAP_RESIDUAL_RTOL = 1e-9
PSD_EIG_TOL = -1e-9


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (with multiplicity) of a square real matrix."""

    values: np.ndarray  # complex, length = matrix order
    max_real: float

    def __len__(self) -> int:
        return len(self.values)


def _as_square(A, name: str = "A") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def spectrum(A) -> Spectrum:
    """All eigenvalues of a square real matrix and their maximum real part."""
    A = _as_square(A)
    try:
        vals = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration failed: {exc}") from exc
    return Spectrum(values=vals, max_real=float(vals.real.max()))


def is_hurwitz(A, margin: float = 0.0) -> bool:
    """True iff every eigenvalue of A has real part < -margin."""
    if margin < 0:
        raise ValueError("margin must be >= 0")
    return spectrum(A).max_real < -margin


def solve_lyapunov(Abar, Q) -> np.ndarray:
    """Solve Abar^T P + P Abar + Q = 0 for symmetric PSD P.

    Abar must be Hurwitz and Q symmetric PSD; both are checked. The solve is
    a dense Kronecker vectorization, and the result is re-symmetrized and
    verified by substitution.
    """
    Abar = _as_square(Abar, "Abar")
    Q = _as_square(Q, "Q")
    if Abar.shape != Q.shape:
        raise ValueError(f"shape mismatch: Abar {Abar.shape} vs Q {Q.shape}")
    if np.abs(Q - Q.T).max() > 1e-12:
        raise ValueError("Q is not symmetric within 1e-12")
    if not is_hurwitz(Abar):
        raise NumericalError("Abar is not Hurwitz; Lyapunov equation rejected")

    n = Abar.shape[0]
    M = np.kron(np.eye(n), Abar.T) + np.kron(Abar.T, np.eye(n))
    try:
        vec_p = np.linalg.solve(M, -Q.flatten(order="F"))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"vectorized Lyapunov system singular: {exc}") from exc
    P = vec_p.reshape((n, n), order="F")
    P = (P + P.T) / 2.0

    qnorm = np.linalg.norm(Q, "fro")
    residual = np.linalg.norm(Abar.T @ P + P @ Abar + Q, "fro")
    if residual >= LYAP_RESIDUAL_RTOL * (1.0 + qnorm):
        raise NumericalError(
            f"Lyapunov residual {residual:.3e} exceeds tolerance for ||Q||={qnorm:.3e}"
        )
    if np.linalg.eigvalsh(P).min() < PSD_EIG_TOL:
        raise NumericalError("Lyapunov solution is not PSD within tolerance")
    return P


def stabilize(A, B) -> np.ndarray:
    """Return K such that A - B K is Hurwitz.

    If A is already Hurwitz, K = 0. Otherwise a Lyapunov-shift (Bass-style)
    construction is used: with beta = ||A||_F + 1, solve
    (A + beta I) W + W (A + beta I)^T = 2 B B^T and take K = B^T W^{-1}.
    The closed loop is re-verified; failure raises with a request to supply
    K explicitly.
    """
    A = _as_square(A)
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != A.shape[0]:
        raise ValueError(f"B shape {B.shape} incompatible with A {A.shape}")
    if not np.all(np.isfinite(B)):
        raise ValueError("B has non-finite entries")

    n, m = B.shape
    if is_hurwitz(A):
        return np.zeros((m, n))

    beta = np.linalg.norm(A, "fro") + 1.0
    shifted = -(A + beta * np.eye(n)).T  # Hurwitz by construction of beta
    try:
        W = solve_lyapunov(shifted, 2.0 * B @ B.T)
        K = B.T @ np.linalg.inv(W)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        raise NumericalError(
            "gain synthesis failed (pair may not be controllable); "
            f"supply a stabilizing K explicitly: {exc}"
        ) from exc
    if not is_hurwitz(A - B @ K):
        raise NumericalError(
            "synthesized gain does not stabilize the pair; "
            "supply a stabilizing K explicitly"
        )
    return K
