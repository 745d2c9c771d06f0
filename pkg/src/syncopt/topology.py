"""Directed communication graph over a leader (node 0) and N followers.

Builds the Laplacian decomposition L = [[0, 0], [-A0*1, H]] with
H = A0 + Ls, and checks the structural requirements: no directed loop,
a spanning tree rooted at the leader, and an isolated leader row.
Edge weights are unit only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class Topology:
    n_followers: int
    edges: tuple  # ordered pairs (j, i): follower/leader j feeds agent i
    adjacency: np.ndarray  # (N+1)x(N+1) 0/1, row i lists senders to i
    in_degrees: np.ndarray  # d_i per node, leader included (d_0 = 0 enforced later)
    laplacian: np.ndarray  # (N+1)x(N+1), D - A
    leader_adjacency: np.ndarray  # A0 = diag(rho_10..rho_N0)
    follower_laplacian: np.ndarray  # Ls, N x N
    h_matrix: np.ndarray  # H = A0 + Ls


@dataclass(frozen=True)
class ValidationReport:
    acyclic: bool
    rooted: bool
    leader_isolated: bool
    diagnostics: tuple = field(default=())

    @property
    def passed(self) -> bool:
        return self.acyclic and self.rooted and self.leader_isolated


def build_topology(n_followers: int, edges) -> Topology:
    """Construct the graph and all derived matrices from an edge list.

    Edges are ordered pairs (j, i) meaning agent i receives from agent j;
    node 0 is the leader. Duplicate edges and self-edges are rejected.
    """
    n = int(n_followers)
    if n < 1:
        raise ValidationError("need at least one follower")
    seen = set()
    for e in edges:
        j, i = int(e[0]), int(e[1])
        if not (0 <= j <= n and 0 <= i <= n):
            raise ValidationError(f"edge ({j},{i}) references a node outside 0..{n}")
        if j == i:
            raise ValidationError(f"self-edge on node {i}")
        if (j, i) in seen:
            raise ValidationError(f"duplicate edge ({j},{i})")
        seen.add((j, i))

    adj = np.zeros((n + 1, n + 1))
    for j, i in seen:
        adj[i, j] = 1.0
    deg = adj.sum(axis=1)
    lap = np.diag(deg) - adj
    a0 = np.diag(adj[1:, 0])
    adj_s = adj[1:, 1:]
    ls = np.diag(adj_s.sum(axis=1)) - adj_s
    h = a0 + ls
    return Topology(
        n_followers=n,
        edges=tuple(sorted(seen)),
        adjacency=adj,
        in_degrees=deg,
        laplacian=lap,
        leader_adjacency=a0,
        follower_laplacian=ls,
        h_matrix=h,
    )


def validate_topology(t: Topology) -> ValidationReport:
    """Check acyclicity, leader-rooted reachability, and leader isolation."""
    n = t.n_followers
    diagnostics = []

    order = _try_topological_order(t)
    acyclic = order is not None
    if not acyclic:
        diagnostics.append("directed cycle among followers")

    # BFS from the leader over the full graph
    reached = {0}
    frontier = [0]
    succ = [[] for _ in range(n + 1)]
    for j, i in t.edges:
        succ[j].append(i)
    while frontier:
        node = frontier.pop()
        for nxt in succ[node]:
            if nxt not in reached:
                reached.add(nxt)
                frontier.append(nxt)
    unreached = sorted(set(range(1, n + 1)) - reached)
    rooted = not unreached
    if unreached:
        diagnostics.append(f"followers unreachable from the leader: {unreached}")

    leader_isolated = bool(t.in_degrees[0] == 0)
    if not leader_isolated:
        diagnostics.append("leader has incoming edges")

    return ValidationReport(
        acyclic=acyclic,
        rooted=rooted,
        leader_isolated=leader_isolated,
        diagnostics=tuple(diagnostics),
    )


def topological_order(t: Topology) -> list[int]:
    """Follower permutation in which every edge points forward.

    Under this order the permuted H matrix is triangular with the in-degrees
    on its diagonal. Ties break on the lowest original index for
    reproducibility.
    """
    order = _try_topological_order(t)
    if order is None:
        raise ValidationError("graph has a directed cycle; no topological order")
    return order


def _try_topological_order(t: Topology):
    """Kahn's algorithm over followers (leader edges only reduce in-degree)."""
    n = t.n_followers
    indeg = {i: 0 for i in range(1, n + 1)}
    succ = {i: [] for i in range(1, n + 1)}
    for j, i in t.edges:
        if j >= 1 and i >= 1:
            indeg[i] += 1
            succ[j].append(i)
    ready = sorted(i for i, d in indeg.items() if d == 0)
    order = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        changed = False
        for nxt in succ[node]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
                changed = True
        if changed:
            ready.sort()
    return order if len(order) == n else None
