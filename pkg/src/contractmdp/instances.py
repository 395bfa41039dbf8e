"""Constructed and randomized benchmark instances.

``gen_gap`` builds the six-state instance on which history-dependent
commitment strictly beats every Markovian policy (best Markovian value 2,
history-dependent value 9/4).  ``gen_vertex_cover`` builds the H=3 reduction
MDP from a bounded-degree graph.  ``gen_random`` emits seeded random
instances; ``gen_random(7, 2, 2, 2)`` is the "toy-2" fixture used across the
test-suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import Instance


@dataclass(frozen=True)
class GraphSpec:
    """Simple undirected graph with maximum degree 3."""

    num_vertices: int
    edges: tuple[tuple[int, int], ...]
    cover_size: int | None = None  # annotation only, never used by the generator

    def __post_init__(self):
        seen = set()
        deg = [0] * self.num_vertices
        for u, v in self.edges:
            if u == v:
                raise ValidationError(f"self-loop ({u},{v}) not allowed")
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise ValidationError(f"edge ({u},{v}) out of range")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValidationError(f"duplicate edge {key}")
            seen.add(key)
            deg[u] += 1
            deg[v] += 1
        bad = [v for v, d in enumerate(deg) if d > 3]
        if bad:
            raise ValidationError(f"vertices {bad} exceed degree 3")


def _pad_self_loops(P, c, h, states, num_actions):
    """Give `states` a zero-cost self-loop for every action slot at step h."""
    for s in states:
        for a in range(num_actions):
            P[h, s, a, s] = 1.0
            c[h, s, a] = 0.0


def gen_gap() -> Instance:
    """Instance separating Markovian from history-dependent commitment.

    States: 0..5.  Step 1: from s0, action 0 (cost 1/4) reaches s1 and pays
    the principal reward 1, action 1 (cost 0) reaches s2; the third action
    slot duplicates action 1.  Step 2: s1 and s2 move to s3 for free.
    Step 3: from s3, action 0 (cost 1/2) reaches s4 (reward 2), action 1
    (cost 1/8) reaches s4 or s5 with probability 1/2 each, action 2 is free
    and reaches s5.  All states missing at a step self-loop at zero cost.
    """
    H, S, A = 3, 6, 3
    P = np.zeros((H, S, A, S))
    r = np.zeros((H, S, S))
    c = np.zeros((H, S, A))

    # step 1: only s0 is live
    P[0, 0, 0, 1] = 1.0
    c[0, 0, 0] = 0.25
    P[0, 0, 1, 2] = 1.0
    P[0, 0, 2, 2] = 1.0  # duplicate of the free action
    r[0, 0, 1] = 1.0
    _pad_self_loops(P, c, 0, [1, 2, 3, 4, 5], A)

    # step 2: s1, s2 -> s3 at no cost
    for s in (1, 2):
        for a in range(A):
            P[1, s, a, 3] = 1.0
    _pad_self_loops(P, c, 1, [0, 3, 4, 5], A)

    # step 3: the s3 gadget
    P[2, 3, 0, 4] = 1.0
    c[2, 3, 0] = 0.5
    P[2, 3, 1, 4] = 0.5
    P[2, 3, 1, 5] = 0.5
    c[2, 3, 1] = 0.125
    P[2, 3, 2, 5] = 1.0
    r[2, 3, 4] = 2.0
    _pad_self_loops(P, c, 2, [0, 1, 2, 4, 5], A)

    mu = np.zeros(S)
    mu[0] = 1.0
    return Instance(H, S, A, mu, P, r, c, payment_bound=2.0)


def gen_vertex_cover(graph: GraphSpec) -> Instance:
    """Reduction MDP from a degree-<=3 graph, horizon 3.

    State layout: edge states ``0..|E|-1``, vertex states ``|E|..|E|+|V|-1``,
    then ``good`` (reward-1 sink), ``bad``, ``void``, ``void2``, ``hub``.
    Start: hub with probability 1/10, each edge state with 9/(10|E|).
    From an edge state the agent either opts out (free, to void) or commits
    to an endpoint at cost 1/4, collecting reward 1/4 for the principal.
    From a vertex state the step-2 gadget costs 1/2 (to good), 1/8 (fair coin
    good/bad) or 0 (to bad); reaching good pays reward 1.  The hub branch
    reaches a uniform vertex with no reward on that transition.
    """
    nE = len(graph.edges)
    nV = graph.num_vertices
    if nE == 0 and nV == 0:
        raise ValidationError("graph must have at least one vertex")
    H, A = 3, 3
    good = nE + nV
    bad = good + 1
    void = bad + 1
    void2 = void + 1
    hub = void2 + 1
    S = hub + 1

    P = np.zeros((H, S, A, S))
    r = np.zeros((H, S, S))
    c = np.zeros((H, S, A))

    # step 1: edge states and the hub
    for ei, (u, v) in enumerate(graph.edges):
        P[0, ei, 0, void] = 1.0                  # opt out, free
        P[0, ei, 1, nE + u] = 1.0
        c[0, ei, 1] = 0.25
        P[0, ei, 2, nE + v] = 1.0
        c[0, ei, 2] = 0.25
        r[0, ei, nE + u] = 0.25
        r[0, ei, nE + v] = 0.25
    if nV:
        for a in range(A):
            P[0, hub, a, nE:nE + nV] = 1.0 / nV  # uniform vertex, no reward
    else:
        _pad_self_loops(P, c, 0, [hub], A)
    _pad_self_loops(P, c, 0, list(range(nE, nE + nV)) + [good, bad, void, void2], A)

    # step 2: vertex gadgets and the opt-out chain
    for vi in range(nV):
        s = nE + vi
        P[1, s, 0, good] = 1.0
        c[1, s, 0] = 0.5
        P[1, s, 1, good] = 0.5
        P[1, s, 1, bad] = 0.5
        c[1, s, 1] = 0.125
        P[1, s, 2, bad] = 1.0
        r[1, s, good] = 1.0
    for a in range(A):
        P[1, void, a, void2] = 1.0
    _pad_self_loops(P, c, 1, list(range(nE)) + [good, bad, void2, hub], A)

    # step 3: everything self-loops (interaction effectively over)
    _pad_self_loops(P, c, 2, list(range(S)), A)

    mu = np.zeros(S)
    mu[hub] = 0.1
    if nE:
        mu[:nE] = 0.9 / nE
    else:
        mu[hub] = 1.0
    return Instance(H, S, A, mu, P, r, c, payment_bound=1.0)


def path_graph(n: int) -> GraphSpec:
    return GraphSpec(n, tuple((i, i + 1) for i in range(n - 1)))


def gen_random(seed: int, num_states: int, num_actions: int, horizon: int,
               sparsity: float = 0.0) -> Instance:
    """Seeded random instance; identical seeds give identical instances.

    Transition rows are Dirichlet(1) draws; with probability ``sparsity`` a
    row is replaced by a one-hot row, so ``sparsity=1.0`` yields a
    deterministic MDP.  One action per (step, state) is forced to cost zero.
    """
    if min(num_states, num_actions, horizon) < 1:
        raise ValidationError("sizes must be >= 1")
    rng = np.random.default_rng(seed)
    H, S, A = horizon, num_states, num_actions
    P = np.zeros((H, S, A, S))
    for h in range(H):
        for s in range(S):
            for a in range(A):
                if rng.random() < sparsity:
                    P[h, s, a, rng.integers(S)] = 1.0
                else:
                    row = rng.exponential(1.0, size=S)
                    P[h, s, a] = row / row.sum()
    c = rng.uniform(0.0, 1.0, size=(H, S, A))
    for h in range(H):
        for s in range(S):
            c[h, s, rng.integers(A)] = 0.0
    r = rng.uniform(0.0, 1.0, size=(H, S, S))
    row = rng.exponential(1.0, size=S)
    mu = row / row.sum()
    return Instance(H, S, A, mu, P, r, c, payment_bound=1.0)


def toy2(seed: int = 7) -> Instance:
    """The canonical 2-state / 2-action / horizon-2 property-test fixture."""
    return gen_random(seed, 2, 2, 2)
