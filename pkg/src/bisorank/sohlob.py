"""Hierarchical sorting of experts from subsampled partial observations.

The ranking routine refines an ordered partition of the rows round after
round. In each round and for every block that is still active it

1. selects an envelope ``Q`` of columns on which the block straddles the
   threshold, using the neighbouring active blocks (:func:`envelope`);
2. compares rows of the block on many column subsets ``Q' ⊆ Q`` and records
   significant comparisons in a directed graph (:func:`scan_and_update`);
3. trisects the block by majority vote in the graph (:func:`graph_trisect`).

Three fresh subsample matrices are consumed per round, so data used to pick
column subsets is independent of data used to compare rows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .sampling import ObservationSet, SubsampleStack, child_rngs, default_k_star, make_rng, subsample

log = logging.getLogger(__name__)


class SubsampleExhausted(RuntimeError):
    """Raised when the stack runs out of matrices before termination."""


@dataclass(frozen=True)
class AlgoConstants:
    rho: float
    gamma: float
    k_star: int
    lambda1: float
    scale: float = 1.0
    delta: float = 0.1
    sigma: float = 1.0

    def size_bound(self, h: float) -> float:
        """``4 rho^2 / h^2``: blocks and envelopes must exceed this after scaling by ``lambda1``."""
        return 4.0 * self.rho**2 / h**2

    def big_enough(self, size: int, h: float) -> bool:
        return self.lambda1 * size > self.size_bound(h)


def log_term(n: int, d: int, delta: float) -> float:
    L = max(1, math.ceil(math.log2(max(n, d))))
    return math.log(24.0 * n * d * math.sqrt(max(n, d)) * L / delta)


def algo_constants(n, d, lambda0, sigma=1.0, delta=0.1, scale=1.0, k_star=None) -> AlgoConstants:
    """Comparison radius ``rho`` and minimum question-set size ``gamma``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if scale <= 0:
        raise ValueError("scale must be positive")
    k_star = default_k_star(n, d) if k_star is None else k_star
    lambda1 = -math.expm1(-lambda0 / k_star)
    lt = log_term(n, d, delta)
    rho = scale * max(1.0, sigma) * math.e * math.sqrt(8.0 * lt)
    gamma = scale * 2.0 * lt / (lambda1 * math.e**2)
    return AlgoConstants(rho, gamma, k_star, lambda1, scale, delta, sigma)


@dataclass(frozen=True)
class ThresholdSpec:
    pairs: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pairs = tuple((float(p), float(h)) for p, h in self.pairs)
        if not pairs:
            raise ValueError("need at least one (p, h) pair")
        for p, h in pairs:
            if not 0 <= p <= 1:
                raise ValueError(f"threshold {p} outside [0, 1]")
            if not 0 < h <= 1:
                raise ValueError(f"tolerance {h} outside (0, 1]")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def single(cls, p, h) -> "ThresholdSpec":
        return cls(((p, h),))

    @property
    def m(self) -> int:
        return len(self.pairs)

    @property
    def h_max(self) -> float:
        return max(h for _, h in self.pairs)


@dataclass
class SortingState:
    partition: list  # list of int arrays
    active: list  # list of bool
    graph: np.ndarray  # (n, n) bool
    round: int = 0

    def check_partition(self, n: int) -> bool:
        allrows = np.concatenate(self.partition) if self.partition else np.empty(0, dtype=np.int64)
        return allrows.size == n and np.array_equal(np.sort(allrows), np.arange(n))


@dataclass
class BlockTrace:
    """What happened to one active block during one round."""

    rows: np.ndarray
    envelopes: list  # one column array per threshold
    used: list  # per threshold: was ScanAndUpdate run
    edges_added: int = 0
    trisection: tuple | None = None  # (O, P, I) or None if retired


@dataclass
class RoundTrace:
    round: int
    partition: list
    active: list
    blocks: list = field(default_factory=list)

    def envelope_total(self, l: int = 0) -> int:
        return sum(b.envelopes[l].size for b in self.blocks)


@dataclass
class RankEstimate:
    pi_hat: np.ndarray
    final_partition: list
    rounds: int
    graph: np.ndarray
    capped: bool = False
    trace: list = field(default_factory=list)

    def dump_diagnostics(self) -> str:
        out = [f"rounds {self.rounds} capped {int(self.capped)} blocks {len(self.final_partition)}"]
        for rt in self.trace:
            for b in rt.blocks:
                qs = ",".join(str(q.size) for q in b.envelopes)
                tri = "-" if b.trisection is None else "/".join(str(s.size) for s in b.trisection)
                out.append(f"round {rt.round} E {b.rows.size} Q {qs} trisect {tri} edges {b.edges_added}")
        return "\n".join(out) + "\n"


# ---------------------------------------------------------------- subroutines


def envelope(s, partition, active, Y, p, h, consts, colmeans=None) -> np.ndarray:
    """Columns on which block ``s`` may straddle the threshold.

    The left envelope keeps columns whose mean on the nearest active block
    above ``s`` reaches ``p+h``; the right envelope keeps columns whose mean
    on the nearest active block below ``s`` stays under ``p-h``. Both means
    are on the zero-filled scale, hence the ``lambda1`` factor.
    """
    if not active[s]:
        raise ValueError("envelope requested for an inactive block")
    d = Y.shape[1]
    lam = consts.lambda1
    below = [t for t in range(s) if active[t]]
    above = [t for t in range(s + 1, len(partition)) if active[t]]

    def mean_on(t):
        if colmeans is not None:
            return colmeans[t]
        return Y[partition[t]].mean(axis=0)

    keep = np.ones(d, dtype=bool)
    if below:
        t = below[-1]
        size = partition[t].size
        keep &= mean_on(t) >= lam * (p + h) - consts.rho * math.sqrt(lam / size)
    if above:
        t = above[0]
        size = partition[t].size
        keep &= mean_on(t) <= lam * (p - h) + consts.rho * math.sqrt(lam / size)
    return np.flatnonzero(keep)


def _graph_threshold(consts, size) -> float:
    return 2.0 * consts.rho * math.sqrt(consts.lambda1 / size)


def _add_edges(local, new) -> int:
    """OR ``new`` into ``local`` except where the reverse edge already exists."""
    new = new & ~local.T & ~local
    local |= new
    return int(new.sum())


def update_graph(G, E, Qp, Yb, consts, *, local=None) -> int:
    """Set ``G[i, i'] = 1`` when row ``i`` beats row ``i'`` on ``Qp`` by a clear margin.

    Literal form of the comparison. Edges are never removed, and an edge
    whose reverse is already present is not added, so ``G`` never holds
    both directions of a pair. Returns the number of edges added.
    """
    E = np.asarray(E)
    Qp = np.asarray(Qp)
    if Qp.size <= consts.gamma:
        return 0
    sub = G[np.ix_(E, E)] if local is None else local
    means = Yb[np.ix_(E, Qp)].sum(axis=1) / Qp.size
    new = (means[:, None] - means[None, :]) > _graph_threshold(consts, Qp.size)
    added = _add_edges(sub, new)
    if local is None:
        G[np.ix_(E, E)] = sub
    return added


def _bandwidth(consts, c, size) -> float:
    return 2.0 * c * consts.rho * math.sqrt(consts.lambda1 / size)


def n_margins(consts, size) -> int:
    """Largest margin multiplier ``c`` tried by :func:`scan_and_update`."""
    return math.ceil(math.sqrt(consts.lambda1 * size) / (2.0 * consts.rho) + 1)


def question_ranges(Ya, E, Q, consts):
    """All candidate question sets as ``[lo, hi)`` ranges of ``Q`` sorted by column mean.

    Returns ``(sorted_q, ranges)`` where ``sorted_q`` orders ``Q`` by
    increasing column mean on ``E`` and ``ranges`` lists, in scan order, one
    ``(lo, hi)`` pair per graph update.
    """
    E = np.asarray(E)
    Q = np.asarray(Q)
    m = Ya[np.ix_(E, Q)].sum(axis=0) / E.size
    order = np.argsort(m, kind="stable")
    ms = m[order]
    w = _bandwidth(consts, 1, E.size)
    bands = [_bandwidth(consts, c, E.size) for c in range(2, n_margins(consts, E.size) + 1)]
    ranges = []
    for j in range(Q.size):
        # ms - m[j] is sorted, so every band is a contiguous run
        diff = ms - m[j]
        ranges.append((int(np.searchsorted(diff, -w, "left")), int(np.searchsorted(diff, w, "right"))))
        for cw in bands:
            # easier questions (larger mean), then harder ones
            ranges.append((int(np.searchsorted(diff, w, "left")), int(np.searchsorted(diff, cw, "right"))))
            ranges.append((int(np.searchsorted(diff, -cw, "left")), int(np.searchsorted(diff, -w, "right"))))
    return Q[order], ranges


# doubles per chunk of (undecided pair x range) differences
_CHUNK = 1 << 23


def _sweep_ranges(local, prefix, todo, consts) -> int:
    """Apply the graph update for every range in ``todo``, in order.

    Only undecided pairs can change, and the first range separating a pair
    fixes its direction, so pairs are dropped as soon as they are decided.
    """
    iu, ju = np.nonzero(np.triu(~(local | local.T), 1))
    los = np.array([r[0] for r in todo])
    his = np.array([r[1] for r in todo])
    sizes = his - los
    taus = 2.0 * consts.rho * np.sqrt(consts.lambda1 / sizes)
    added = 0
    start = 0
    while start < len(todo) and iu.size:
        stop = min(len(todo), start + max(1, _CHUNK // iu.size))
        sl = slice(start, stop)
        means = (prefix[:, his[sl]] - prefix[:, los[sl]]) / sizes[sl]
        diff = means[iu] - means[ju]
        fwd = diff > taus[sl]
        hit = fwd | (diff < -taus[sl])
        decided = hit.any(axis=1)
        idx = np.flatnonzero(decided)
        if idx.size:
            forward = fwd[idx, hit[idx].argmax(axis=1)]
            local[iu[idx[forward]], ju[idx[forward]]] = True
            local[ju[idx[~forward]], iu[idx[~forward]]] = True
            added += idx.size
            iu, ju = iu[~decided], ju[~decided]
        start = stop
    return added


def scan_and_update(Ya, Yb, E, Q, G, consts, *, literal=False) -> int:
    """Compare rows of ``E`` on every candidate subset of ``Q``; returns edges added."""
    E = np.asarray(E)
    Q = np.asarray(Q)
    if Q.size == 0 or E.size == 0:
        return 0
    sorted_q, ranges = question_ranges(Ya, E, Q, consts)
    local = G[np.ix_(E, E)]
    if literal:
        added = sum(update_graph(G, E, sorted_q[lo:hi], Yb, consts, local=local) for lo, hi in ranges)
    else:
        # a repeated range cannot add edges again, keep first occurrences
        todo = list(dict.fromkeys(r for r in ranges if r[1] - r[0] > consts.gamma))
        added = 0
        if todo:
            prefix = np.zeros((E.size, Q.size + 1))
            np.cumsum(Yb[np.ix_(E, sorted_q)], axis=1, out=prefix[:, 1:])
            added = _sweep_ranges(local, prefix, todo, consts)
    G[np.ix_(E, E)] = local
    return added


def graph_trisect(E, G) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rows beating (O) or beaten by (I) a strict majority of ``E``; the rest is P."""
    E = np.asarray(E)
    if E.size == 0:
        raise ValueError("cannot trisect an empty set")
    sub = G[np.ix_(E, E)]
    half = E.size / 2
    in_o = sub.sum(axis=1) > half
    in_i = sub.sum(axis=0) > half
    if np.any(in_o & in_i):
        # needs a two-way edge, which update_graph never adds
        raise RuntimeError("row classified both above and below the median")
    return E[in_o], E[~in_o & ~in_i], E[in_i]


def partition_to_permutation(partition, n) -> np.ndarray:
    """Blocks in order, rows inside a block by ascending index."""
    pi = np.empty(n, dtype=np.int64)
    pos = 0
    for block in partition:
        block = np.sort(block)
        pi[block] = np.arange(pos, pos + block.size)
        pos += block.size
    return pi


# ----------------------------------------------------------------- main loop


def sohlob_rank(stack: SubsampleStack, spec: ThresholdSpec, consts: AlgoConstants, *,
                record=False, literal=False) -> RankEstimate:
    """Rank the rows of the matrix behind ``stack``."""
    n, d = stack.shape
    Ys = stack.means
    h_max = spec.h_max
    G = np.zeros((n, n), dtype=bool)
    partition = [np.arange(n, dtype=np.int64)]
    active = [consts.big_enough(n, h_max)]
    theory_rounds = math.ceil(math.log2(n)) if n > 1 else 0
    cap = theory_rounds + 1
    k = 0
    capped = False
    trace = []
    while any(active):
        if k >= cap:
            capped = True
            log.warning("sorting stopped at the round cap with active blocks left")
            break
        if 3 * (k + 1) > stack.k_star:
            if k + 1 <= theory_rounds:
                raise SubsampleExhausted(
                    f"round {k + 1} needs {3 * k + 3} subsamples, stack has {stack.k_star}; "
                    f"{sum(active)} active blocks of sizes {[b.size for b, a in zip(partition, active) if a]}")
            capped = True
            break
        k += 1
        Y1, Y2, Y3 = Ys[3 * k - 3], Ys[3 * k - 2], Ys[3 * k - 1]
        colmeans = {t: Y1[partition[t]].mean(axis=0) for t in range(len(partition)) if active[t]}
        rt = RoundTrace(k, [b.copy() for b in partition], list(active)) if record else None
        new_partition, new_active = [], []
        for t, E in enumerate(partition):
            if not active[t]:
                new_partition.append(E)
                new_active.append(False)
                continue
            used = False
            envs, flags = [], []
            added = 0
            for p, h in spec.pairs:
                Q = envelope(t, partition, active, Y1, p, h, consts, colmeans)
                envs.append(Q)
                ok = consts.big_enough(Q.size, h)
                flags.append(ok)
                if ok:
                    used = True
                    added += scan_and_update(Y2, Y3, E, Q, G, consts, literal=literal)
            bt = BlockTrace(E, envs, flags, added) if record else None
            if not used:
                new_partition.append(E)
                new_active.append(False)
            else:
                O, P, I = graph_trisect(E, G)
                for part, act in ((O, consts.big_enough(O.size, h_max)), (P, False), (I, consts.big_enough(I.size, h_max))):
                    if part.size:
                        new_partition.append(part)
                        new_active.append(act)
                if record:
                    bt.trisection = (O, P, I)
            if record:
                rt.blocks.append(bt)
        partition, active = new_partition, new_active
        if record:
            trace.append(rt)
    pi_hat = partition_to_permutation(partition, n)
    return RankEstimate(pi_hat, partition, k, G, capped, trace)


# ------------------------------------------------------------ rows + columns


@dataclass(frozen=True)
class RankConfig:
    lambda0: float
    sigma: float = 1.0
    delta: float = 0.1
    scale: float = 1.0
    policy: str = "direct"  # or "shifted"
    k_star: int | None = None

    def __post_init__(self):
        if self.policy not in ("direct", "shifted"):
            raise ValueError(f"unknown policy {self.policy!r}")


def _pass_specs(spec: ThresholdSpec, policy: str) -> tuple[ThresholdSpec, ThresholdSpec]:
    if policy == "direct":
        return spec, spec
    rows = ThresholdSpec(tuple((max(0.0, p - h / 2), h / 2) for p, h in spec.pairs))
    cols = ThresholdSpec(tuple((min(1.0, p + h / 2), h / 2) for p, h in spec.pairs))
    return rows, cols


def rank_pair(obs: ObservationSet, spec: ThresholdSpec, config: RankConfig, rng=None, *, record=False):
    """Estimate row and column permutations; returns ``(row_estimate, col_estimate)``."""
    rng = make_rng(None) if rng is None else rng
    row_rng, col_rng = child_rngs(rng, 2)
    row_spec, col_spec = _pass_specs(spec, config.policy)
    delta = config.delta / spec.m
    if config.policy == "shifted":
        delta /= 2
    out = []
    for o, sp, r in ((obs, row_spec, row_rng), (obs.transpose(), col_spec, col_rng)):
        stack = subsample(o, config.lambda0, config.k_star, r)
        consts = algo_constants(o.n, o.d, config.lambda0, config.sigma, delta, config.scale, stack.k_star)
        out.append(sohlob_rank(stack, sp, consts, record=record))
    return out[0], out[1]


def default_threshold_grid(n: int, d: int) -> tuple[ThresholdSpec, float]:
    """Thresholds ``k/(nd)`` with dyadic tolerances; also returns the delta divisor."""
    nd = n * d
    L = max(1, math.ceil(math.log2(nd))) if nd > 1 else 1
    pairs = tuple((k / nd, 2.0**-s) for k in range(1, nd + 1) for s in range(1, L + 1))
    return ThresholdSpec(pairs), nd * max(1.0, math.log2(nd))
