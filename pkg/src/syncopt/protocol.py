"""Distributed protocol construction: compensator gains alpha_i, the
zeta/varsigma transformation U with its coupling scalars, the augmented
per-agent plant, and stabilizing initial gain sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .numkernel import is_hurwitz, spectrum, stabilize
from .plant import AgentDynamics, LeaderModel
from .regulator import RegulatorSolution
from .topology import Topology, validate_topology

TRANSFORM_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class CompensatorDesign:
    r: float  # decay-rate design constant, > 0
    lambda_M: float  # max real part of the leader spectrum
    alphas: np.ndarray  # per-follower coupling gain, alpha_i * d_i = -(lambda_M + r)
    s_shifted: np.ndarray  # S - (lambda_M + r) I_q, the local generator matrix


@dataclass(frozen=True)
class TransformU:
    U: np.ndarray  # N x N, invertible
    c: np.ndarray  # c_i = T_i U^{-1} 1_N
    h: np.ndarray  # h_i = T_i H U^{-1} 1_N
    residual: float  # Frobenius residual of the defining identity


@dataclass(frozen=True)
class AugmentedPlant:
    A: np.ndarray  # (q+n) x (q+n)
    B: np.ndarray  # (q+n) x m
    C: np.ndarray  # p x (q+n)
    D: np.ndarray  # p x m
    Phi: np.ndarray  # n x q disturbance-coupling block
    Psi: np.ndarray  # p x q reference-coupling block

    @property
    def order(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class GainSet:
    K1: np.ndarray  # m x n, state feedback
    K2: np.ndarray  # m x q, compensator feedback; K1 Pi + K2 + Gamma = 0
    K3: np.ndarray  # m x q, local-generator feedback
    Kic: np.ndarray  # m x (q+n) = [K3, K1]


def design_compensator(leader: LeaderModel, topo: Topology, r: float) -> CompensatorDesign:
    """Pick alpha_i = -(lambda_M + r) / d_i for every follower.

    lambda_M is the maximum real part of the leader spectrum (the leader
    matrix need not be symmetric), so alpha_i d_i + lambda_M = -r < 0 and the
    compensator error decays at rate r.
    """
    if r <= 0:
        raise ValidationError("design constant r must be positive")
    report = validate_topology(topo)
    if not report.passed:
        raise ValidationError(f"topology invalid: {report.diagnostics}")
    d = topo.in_degrees[1:]
    if np.any(d <= 0):
        raise ValidationError("every follower needs at least one incoming edge")
    lam_m = spectrum(leader.S).max_real
    return CompensatorDesign(
        r=float(r),
        lambda_M=lam_m,
        alphas=-(lam_m + r) / d,
        s_shifted=leader.S - (lam_m + r) * np.eye(leader.q),
    )


def build_transform(design: CompensatorDesign, topo: Topology, leader: LeaderModel) -> TransformU:
    """Construct U mapping the stacked compensator error to the local
    zeta generators, plus the per-follower coupling scalars c_i and h_i.

    Defining identity (M := S - (lambda_M + r) I_q):
        (I_N (x) M)(U (x) I_q) = I_N (x) S + Lambda H (x) I_q.
    When S is a scalar matrix this has the closed form U = I - Nstrict / r
    with Nstrict = Lambda H + (lambda_M + r) I strictly triangular under a
    topological order. Otherwise the least-squares solution is accepted only
    if it satisfies the identity within tolerance.
    """
    q = leader.q
    N = topo.n_followers
    r, lam_m = design.r, design.lambda_M
    H = topo.h_matrix
    lam_h = np.diag(design.alphas) @ H
    M = design.s_shifted

    scalar_s = np.abs(leader.S - lam_m * np.eye(q)).max() <= 1e-12 * (1.0 + np.abs(lam_m))
    if scalar_s:
        n_strict = lam_h + (lam_m + r) * np.eye(N)
        U = np.eye(N) - n_strict / r
    else:
        # Blocks decouple, so per-block Frobenius projection onto M is the
        # exact least-squares solution for each U entry.
        m_norm2 = np.linalg.norm(M, "fro") ** 2
        U = np.empty((N, N))
        for i in range(N):
            for j in range(N):
                target = lam_h[i, j] * np.eye(q)
                if i == j:
                    target = target + leader.S
                U[i, j] = np.tensordot(M, target) / m_norm2

    residual = np.linalg.norm(
        np.kron(U, M) - np.kron(np.eye(N), leader.S) - np.kron(lam_h, np.eye(q)), "fro"
    )
    if residual >= TRANSFORM_RESIDUAL_TOL:
        raise NumericalError(
            "transform not representable: the defining identity has no exact "
            f"solution for S = {leader.S.tolist()} (residual {residual:.3e})"
        )
    try:
        v = np.linalg.solve(U, np.ones(N))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"transform U is singular: {exc}") from exc
    return TransformU(U=U, c=v, h=H @ v, residual=float(residual))


def build_augmented_plant(
    agent: AgentDynamics,
    reg: RegulatorSolution,
    design: CompensatorDesign,
    transform: TransformU,
    follower_index: int,
) -> AugmentedPlant:
    """Assemble the stacked (zeta_i, xtilde_i) plant for one follower.

    follower_index is 1-based, matching the graph node numbering.
    """
    i = follower_index - 1
    if not (0 <= i < len(transform.c)):
        raise ValueError(f"follower index {follower_index} out of range")
    q = agent.q
    if design.s_shifted.shape != (q, q):
        raise ValueError(
            f"leader order {design.s_shifted.shape[0]} does not match agent coupling width {q}"
        )
    Phi = transform.c[i] * agent.E + design.alphas[i] * transform.h[i] * reg.Pi
    Psi = -transform.c[i] * agent.F
    A = np.block([
        [design.s_shifted, np.zeros((q, agent.n))],
        [-Phi, agent.A],
    ])
    B = np.vstack([np.zeros((q, agent.m)), agent.B])
    C = np.hstack([-Psi, agent.C])
    return AugmentedPlant(A=A, B=B, C=C, D=agent.D.copy(), Phi=Phi, Psi=Psi)


def initial_gains(
    agent: AgentDynamics,
    reg: RegulatorSolution,
    K1=None,
    plant: AugmentedPlant | None = None,
) -> GainSet:
    """Build a stabilizing initial gain set for one follower.

    K1 is synthesized when absent; either way A - B K1 must be Hurwitz.
    K2 follows from the regulator identity K1 Pi + K2 + Gamma = 0 and K3
    defaults to 0 (the closed augmented loop is block triangular, so any K3
    preserves stability). If the follower's augmented plant is supplied, the
    closed augmented loop is re-verified.
    """
    if K1 is None:
        K1 = stabilize(agent.A, agent.B)
    else:
        K1 = np.asarray(K1, dtype=float)
        if K1.shape != (agent.m, agent.n):
            raise ValueError(f"K1 has shape {K1.shape}, expected ({agent.m}, {agent.n})")
        if not is_hurwitz(agent.A - agent.B @ K1):
            raise ValidationError("provided K1 does not make A - B K1 Hurwitz")

    K2 = -K1 @ reg.Pi - reg.Gamma
    K3 = np.zeros((agent.m, agent.q))
    Kic = np.hstack([K3, K1])
    if plant is not None and not is_hurwitz(plant.A - plant.B @ Kic):
        raise NumericalError("initial gain does not stabilize the augmented plant")
    return GainSet(K1=K1, K2=K2, K3=K3, Kic=Kic)
