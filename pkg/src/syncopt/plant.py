"""Leader and follower data model plus machine checks of the standing
assumptions: observability, invertible feedthrough Gram, stabilizability,
non-negative leader modes, and the transmission-zero rank condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numkernel import spectrum
from .topology import Topology, validate_topology

RANK_RTOL = 1e-9  # singular values below RANK_RTOL * sigma_max count as zero
GRAM_TOL = 1e-10
LEADER_EIG_TOL = -1e-10


@dataclass(frozen=True)
class AgentDynamics:
    """One follower: dx = A x + B u + E w, y = C x + D u, y_ref = F w."""

    A: np.ndarray  # n x n
    B: np.ndarray  # n x m
    C: np.ndarray  # p x n
    D: np.ndarray  # p x m
    E: np.ndarray  # n x q
    F: np.ndarray  # p x q

    def __post_init__(self):
        for name in "ABCDEF":
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        n, m, p, q = self.n, self.m, self.p, self.q
        expect = {"A": (n, n), "B": (n, m), "C": (p, n), "D": (p, m), "E": (n, q), "F": (p, q)}
        for name, shape in expect.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"matrix {name} has shape {got}, expected {shape}")
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"matrix {name} has non-finite entries")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def q(self) -> int:
        return self.E.shape[1]


@dataclass(frozen=True)
class LeaderModel:
    """Reference generator dw = S w, w(0) = w0."""

    S: np.ndarray  # q x q
    w0: np.ndarray  # q

    def __post_init__(self):
        object.__setattr__(self, "S", np.atleast_2d(np.asarray(self.S, dtype=float)))
        object.__setattr__(self, "w0", np.atleast_1d(np.asarray(self.w0, dtype=float)))
        q = self.S.shape[0]
        if self.S.shape != (q, q) or q < 1:
            raise ValueError(f"S must be square, got {self.S.shape}")
        if self.w0.shape != (q,):
            raise ValueError(f"w0 has shape {self.w0.shape}, expected ({q},)")
        if not (np.all(np.isfinite(self.S)) and np.all(np.isfinite(self.w0))):
            raise ValueError("leader model has non-finite entries")

    @property
    def q(self) -> int:
        return self.S.shape[0]


@dataclass(frozen=True)
class AgentChecks:
    observable: bool
    feedthrough_invertible: bool
    stabilizable: bool
    rank_condition: bool

    @property
    def passed(self) -> bool:
        return all(
            (self.observable, self.feedthrough_invertible, self.stabilizable, self.rank_condition)
        )


@dataclass(frozen=True)
class AssumptionReport:
    per_agent: dict  # name -> AgentChecks
    leader_unstable_modes: bool
    topology_ok: bool
    diagnostics: tuple = field(default=())

    @property
    def passed(self) -> bool:
        return (
            all(c.passed for c in self.per_agent.values())
            and self.leader_unstable_modes
            and self.topology_ok
        )


def _rank(M: np.ndarray) -> int:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > RANK_RTOL * sv[0]))


def check_assumptions(agents, leader: LeaderModel, topology: Topology) -> AssumptionReport:
    """Run all assumption checks on the full scenario.

    `agents` is a list of (name, AgentDynamics) pairs or a dict. Rank tests
    share a single singular-value threshold; the rank condition at leader
    eigenvalues is evaluated over complex arithmetic.
    """
    if isinstance(agents, dict):
        agents = list(agents.items())
    diagnostics = []
    per_agent = {}
    s_eigs = spectrum(leader.S).values

    for name, ag in agents:
        if ag.q != leader.q:
            raise ValueError(f"agent {name}: E/F column count {ag.q} != leader order {leader.q}")
        n, m = ag.n, ag.m

        obs = np.vstack([ag.C @ np.linalg.matrix_power(ag.A, k) for k in range(n)])
        observable = _rank(obs) == n
        if not observable:
            diagnostics.append(f"{name}: (A, C) not observable")

        gram_sv = np.linalg.svd(ag.D.T @ ag.D, compute_uv=False)
        feedthrough_invertible = bool(gram_sv.size and gram_sv[-1] > GRAM_TOL)
        if not feedthrough_invertible:
            diagnostics.append(f"{name}: D^T D numerically singular")

        stabilizable = True
        a_eigs = spectrum(ag.A).values
        for lam in a_eigs:
            if lam.real >= 0:
                pbh = np.hstack([ag.A - lam * np.eye(n), ag.B]).astype(complex)
                if _rank(pbh) < n:
                    stabilizable = False
                    diagnostics.append(f"{name}: PBH fails at eigenvalue {lam:.4g}")
                    break

        rank_condition = True
        for lam in s_eigs:
            block = np.block([
                [ag.A - lam * np.eye(n), ag.B.astype(complex)],
                [ag.C.astype(complex), ag.D.astype(complex)],
            ])
            if _rank(block) < n + m:
                rank_condition = False
                diagnostics.append(f"{name}: rank condition fails at leader eigenvalue {lam:.4g}")
                break

        per_agent[name] = AgentChecks(
            observable=observable,
            feedthrough_invertible=feedthrough_invertible,
            stabilizable=stabilizable,
            rank_condition=rank_condition,
        )

    leader_ok = spectrum(leader.S).values.real.min() >= LEADER_EIG_TOL
    if not leader_ok:
        diagnostics.append("leader S has a strictly stable eigenvalue")

    topo_report = validate_topology(topology)
    if not topo_report.passed:
        diagnostics.extend(topo_report.diagnostics)

    return AssumptionReport(
        per_agent=per_agent,
        leader_unstable_modes=bool(leader_ok),
        topology_ok=topo_report.passed,
        diagnostics=tuple(diagnostics),
    )
