"""Fixed-step closed-loop simulation of the full leader-follower network and
of the per-agent augmented error systems, plus tracking and cost metrics.

The network (leader, compensators, local generators, followers under the
distributed protocol) is one large LTI system; it is assembled once as a
block matrix and integrated with classical 4th-order Runge-Kutta. Inputs and
tracking errors are memoryless functions of the state and are recomputed per
sample after integration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .protocol import AugmentedPlant, GainSet, design_compensator

BLOWUP_LIMIT = 1e12
SETTLE_THRESHOLD = 1e-2


@dataclass(frozen=True)
class FollowerStream:
    x: np.ndarray  # T x n
    xi: np.ndarray  # T x q
    zeta: np.ndarray  # T x q
    u: np.ndarray  # T x m
    e: np.ndarray  # T x p


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray  # uniform grid 0..t_end
    leader_states: np.ndarray  # T x q
    followers: dict  # name -> FollowerStream


@dataclass(frozen=True)
class AugmentedTrajectory:
    times: np.ndarray
    X: np.ndarray  # T x (q+n)
    e: np.ndarray  # T x p
    closed_a: np.ndarray  # A - B K of the run, for horizon checks


@dataclass(frozen=True)
class CostReport:
    j_quadrature: float  # trapezoid of |e|^2 over the horizon
    j_closed_form: float  # X0^T P X0
    tail_error: float  # max |e| over the last 10% of the horizon
    horizon_warning: str | None = None


@dataclass(frozen=True)
class TrackingMetrics:
    tail_error: float
    settle_time: float | None  # None when the error never settles below 1e-2


def _rk4(M: np.ndarray, y0: np.ndarray, t_end: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Classical fixed-step RK4 for dy = M y; returns (times, samples)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    steps = int(np.floor(t_end / dt + 1e-9))
    times = np.arange(steps + 1) * dt
    out = np.empty((steps + 1, len(y0)))
    y = np.asarray(y0, dtype=float).copy()
    out[0] = y
    for k in range(steps):
        k1 = M @ y
        k2 = M @ (y + 0.5 * dt * k1)
        k3 = M @ (y + 0.5 * dt * k2)
        k4 = M @ (y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.abs(y).max() > BLOWUP_LIMIT:
            raise NumericalError(f"state blow-up at t = {times[k + 1]:.6g}")
        out[k + 1] = y
    return times, out


def simulate_network(scenario, gains: dict, t_end: float, dt: float) -> Trajectory:
    """Integrate the whole closed-loop network under the given gain sets.

    `scenario` provides leader, agents, topology, the design constant r, and
    initial conditions; `gains` maps agent name -> GainSet. The compensator
    state of the leader node is the leader state itself.
    """
    leader = scenario.leader
    agents = list(scenario.agents)
    topo = scenario.topology
    design = design_compensator(leader, topo, scenario.r)
    q = leader.q
    N = topo.n_followers
    if len(agents) != N:
        raise ValueError(f"{len(agents)} agents for {N} followers")

    names = [name for name, _ in agents]
    for name in names:
        if name not in gains:
            raise ValueError(f"no gain set for agent {name}")

    n_list = [ag.n for _, ag in agents]
    x_off = [2 * q * N + q + int(np.sum(n_list[:i], dtype=int)) for i in range(N)]
    xi_off = [q + i * q for i in range(N)]
    z_off = [q + N * q + i * q for i in range(N)]
    dim = q + 2 * N * q + sum(n_list)

    M = np.zeros((dim, dim))
    M[:q, :q] = leader.S
    adj = topo.adjacency
    for i, (name, ag) in enumerate(agents):
        node = i + 1
        a = design.alphas[i]
        sl = slice(xi_off[i], xi_off[i] + q)
        M[sl, sl] += leader.S + a * topo.in_degrees[node] * np.eye(q)
        for j in range(N + 1):
            if adj[node, j]:
                src = slice(0, q) if j == 0 else slice(xi_off[j - 1], xi_off[j - 1] + q)
                M[sl, src] += -a * np.eye(q)
        zl = slice(z_off[i], z_off[i] + q)
        M[zl, zl] = design.s_shifted
        g = gains[name]
        xl = slice(x_off[i], x_off[i] + ag.n)
        M[xl, xl] = ag.A - ag.B @ g.K1
        M[xl, sl] = -ag.B @ g.K2
        M[xl, zl] = -ag.B @ g.K3
        M[xl, :q] = ag.E

    y0 = np.zeros(dim)
    y0[:q] = leader.w0
    for i, (name, ag) in enumerate(agents):
        y0[xi_off[i] : xi_off[i] + q] = scenario.xi0[name]
        y0[z_off[i] : z_off[i] + q] = scenario.zeta0
        y0[x_off[i] : x_off[i] + ag.n] = scenario.x0[name]

    times, samples = _rk4(M, y0, t_end, dt)
    w = samples[:, :q]
    followers = {}
    for i, (name, ag) in enumerate(agents):
        x = samples[:, x_off[i] : x_off[i] + ag.n]
        xi = samples[:, xi_off[i] : xi_off[i] + q]
        zeta = samples[:, z_off[i] : z_off[i] + q]
        g = gains[name]
        u = -(x @ g.K1.T + xi @ g.K2.T + zeta @ g.K3.T)
        e = x @ ag.C.T + u @ ag.D.T - w @ ag.F.T
        followers[name] = FollowerStream(x=x, xi=xi, zeta=zeta, u=u, e=e)
    return Trajectory(times=times, leader_states=w, followers=followers)


def simulate_augmented(plant: AugmentedPlant, K, X0, t_end: float, dt: float) -> AugmentedTrajectory:
    """Integrate the closed augmented error system dX = (A - B K) X."""
    K = np.asarray(K, dtype=float)
    X0 = np.asarray(X0, dtype=float)
    Acl = plant.A - plant.B @ K
    from .numkernel import is_hurwitz  # local import avoids cycle at module load

    if not is_hurwitz(Acl):
        raise NumericalError("gain is not stabilizing; refusing the augmented run")
    times, X = _rk4(Acl, X0, t_end, dt)
    e = X @ (plant.C - plant.D @ K).T
    return AugmentedTrajectory(times=times, X=X, e=e, closed_a=Acl)


def evaluate_cost(run: AugmentedTrajectory, P) -> CostReport:
    """Cost of an augmented run both by quadrature and by the closed form
    X0^T P X0 (the P must evaluate the same gain that produced the run)."""
    P = np.asarray(P, dtype=float)
    e2 = np.sum(run.e**2, axis=1)
    j_quad = float(np.trapezoid(e2, run.times))
    x0 = run.X[0]
    j_closed = float(x0 @ P @ x0)
    tail = _tail_error(run.times, run.e)

    warning = None
    slowest = np.linalg.eigvals(run.closed_a).real.max()
    t_end = run.times[-1]
    if slowest < 0 and t_end < 5.0 / abs(slowest):
        warning = (
            f"horizon {t_end:.3g}s is shorter than 5 time constants of the "
            f"slowest mode ({1.0 / abs(slowest):.3g}s); quadrature may be truncated"
        )
    return CostReport(
        j_quadrature=j_quad, j_closed_form=j_closed, tail_error=tail, horizon_warning=warning
    )


def tracking_metrics(traj: Trajectory) -> dict:
    """Per-follower tail error and settle time of the tracking error."""
    out = {}
    for name, stream in traj.followers.items():
        mag = np.linalg.norm(stream.e, axis=1)
        tail = _tail_error(traj.times, stream.e)
        above = np.nonzero(mag >= SETTLE_THRESHOLD)[0]
        if above.size == 0:
            settle = 0.0
        elif above[-1] == len(mag) - 1:
            settle = None  # not settled within the horizon
        else:
            settle = float(traj.times[above[-1] + 1])
        out[name] = TrackingMetrics(tail_error=tail, settle_time=settle)
    return out


def _tail_error(times: np.ndarray, e: np.ndarray) -> float:
    start = int(np.ceil(0.9 * (len(times) - 1)))
    return float(np.linalg.norm(e[start:], axis=1).max())
