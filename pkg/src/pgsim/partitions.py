"""Random set partitions of {1..n}, merge operators on mass partitions and the
merge-size law.

Customers are labelled 0..n-1 internally; ``SetPartition.blocks`` uses 1..n.
Batched samplers return restricted-growth label arrays of shape (size, n):
label 0 for the block of customer 1, and each new block gets the next label.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, gammaln

from .bridges import SimpleBridge
from .errors import ConsistencyError, ParameterError, UnsupportedInputError
from .mass_partition import MassPartition, rank
from .rand_core import RngStream, ZetaSpec, check_alpha, sample_gamma
from .sticks import EPG, PD, PG, StickBatch, StickKind


@dataclass(frozen=True)
class SetPartition:
    n: int
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(int(x) for x in b)) for b in self.blocks),
                              key=lambda b: b[0] if b else 0))
        if any(len(b) == 0 for b in blocks):
            raise ConsistencyError("empty block")
        flat = [x for b in blocks for x in b]
        if sorted(flat) != list(range(1, self.n + 1)):
            raise ConsistencyError("blocks must be disjoint and cover 1..n")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_labels(cls, labels):
        groups = {}
        for i, lab in enumerate(labels, start=1):
            groups.setdefault(int(lab), []).append(i)
        return cls(len(labels), tuple(groups.values()))

    def labels(self):
        out = np.empty(self.n, dtype=np.int64)
        for j, b in enumerate(self.blocks):
            out[np.array(b) - 1] = j
        return out

    @property
    def block_count(self):
        return len(self.blocks)

    def sizes(self):
        return sorted((len(b) for b in self.blocks), reverse=True)

    def to_json(self):
        return json.dumps([list(b) for b in self.blocks])

    def csv_row(self):
        return ",".join(str(x) for x in [self.n, self.block_count, *self.sizes()])


@dataclass(frozen=True)
class MergeOutcome:
    input_blocks: int
    merged_count: int
    output: SetPartition

    def __post_init__(self):
        want = self.input_blocks - self.merged_count + 1 if self.merged_count else self.input_blocks
        if self.output.block_count != want:
            raise ConsistencyError("merged block count mismatch")


def canonical_labels(labels):
    """Relabel each row to restricted-growth form (first appearance order)."""
    labels = np.asarray(labels)
    size, n = labels.shape
    out = np.empty_like(labels, dtype=np.int64)
    nxt = np.zeros(size, dtype=np.int64)
    # map is bounded by n distinct values per row after compressing labels
    _, inv = np.unique(labels, return_inverse=True)
    inv = inv.reshape(size, n)
    table = np.full((size, inv.max() + 1), -1, dtype=np.int64)
    rows = np.arange(size)
    for i in range(n):
        lab = inv[:, i]
        cur = table[rows, lab]
        new = cur < 0
        table[rows[new], lab[new]] = nxt[new]
        nxt[new] += 1
        out[:, i] = table[rows, lab]
    return out


def partition_keys(labels):
    """One hashable key per row of a restricted-growth label array."""
    labels = np.ascontiguousarray(np.asarray(labels, dtype=np.int8))
    return [r.tobytes() for r in labels]


def _crp_batch(alpha, theta, n, size, rng: RngStream):
    labels = np.zeros((size, n), dtype=np.int64)
    counts = np.zeros((size, n))
    counts[:, 0] = 1
    K = np.ones(size, dtype=np.int64)
    rows = np.arange(size)
    for i in range(1, n):
        u = rng.uniform(size) * (theta + i)
        occupied = np.arange(n)[None, :] < K[:, None]
        w = np.where(occupied, counts - alpha, 0.0)
        cum = np.cumsum(w, axis=1)
        j = (cum <= u[:, None]).sum(axis=1)
        new = j >= K
        j = np.where(new, K, j)
        labels[:, i] = j
        counts[rows, j] += 1
        K += new
    return labels


def _lazy_stick_batch(kind: StickKind, n, size, rng: RngStream, zeta_values=None):
    """Customers join a found block with probability equal to its mass, else
    open the next stick from the residual. Found blocks appear in a size-biased
    order, which is the law of the stick sequence, so no truncation is needed.
    """
    batch = StickBatch(kind, size, rng, zeta_values=zeta_values)
    epg = isinstance(kind, EPG)
    mass = np.zeros((size, n))
    merged = np.zeros((size, n), dtype=bool)
    residual = np.ones(size)
    K = np.zeros(size, dtype=np.int64)
    labels = np.zeros((size, n), dtype=np.int64)
    rows = np.arange(size)
    for i in range(n):
        u = rng.uniform(size)
        cum = np.cumsum(mass, axis=1)
        j = (cum <= u[:, None]).sum(axis=1)
        new = j >= K
        if new.any():
            idx = rows[new]
            w, _, flags = batch.extend(idx, 1)
            w = w[:, 0]
            mass[idx, K[idx]] = residual[idx] * (1 - w)
            residual[idx] *= w
            if epg:
                merged[idx, K[idx]] = flags[:, 0]
            j = np.where(new, K, j)
            K += new
        labels[:, i] = j
    if epg:
        # every stick of the merged atom becomes one block
        labels = np.where(merged[rows[:, None], labels], -1, labels)
        labels = canonical_labels(labels)
    return labels


def sample_partitions(kind: StickKind, n: int, size: int, rng: RngStream, method=None,
                      zeta_values=None):
    """Restricted-growth labels for `size` independent partitions of [n].

    PD uses the Chinese restaurant seating rule unless method="sticks".
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if isinstance(kind, PD) and method != "sticks":
        return _crp_batch(kind.alpha, kind.theta, n, size, rng)
    if isinstance(kind, EPG) and kind.zeta.is_zero and zeta_values is None:
        return np.zeros((size, n), dtype=np.int64)
    return _lazy_stick_batch(kind, n, size, rng, zeta_values)


def sample_partition(kind: StickKind, n: int, rng: RngStream, method=None) -> SetPartition:
    return SetPartition.from_labels(sample_partitions(kind, n, 1, rng, method)[0])


@dataclass
class CoagBatch:
    input_labels: np.ndarray
    output_labels: np.ndarray
    input_blocks: np.ndarray
    merged_count: np.ndarray


def epg_coag_batch(alpha, zeta: ZetaSpec, n: int, size: int, rng: RngStream) -> CoagBatch:
    """Partition of a PG(alpha, eps + zeta) sample whose blocks are merged
    when their uniform lands in the atom of the simple bridge with
    q = zeta / (zeta + eps)."""
    a = check_alpha(alpha)
    if n < 1:
        raise ParameterError("n must be >= 1")
    z = np.asarray(zeta.sample(rng, size), dtype=float)
    eps = sample_gamma((1 - a) / a, rng, size)
    q = z / (z + eps)
    atom = rng.uniform(size)
    base = _lazy_stick_batch(PG(a, ZetaSpec.const(1.0)), n, size, rng, zeta_values=z + eps)
    b = base.max(axis=1) + 1
    u = rng.uniform((size, n))
    lo = (q * atom)[:, None]
    hit = (u >= lo) & (u <= lo + (1 - q)[:, None]) & (np.arange(n)[None, :] < b[:, None])
    rows = np.arange(size)[:, None]
    out = np.where(hit[rows, base], -1, base)
    return CoagBatch(base, canonical_labels(out), b, hit.sum(axis=1))


def epg_coag_partition(alpha, zeta: ZetaSpec, n: int, rng: RngStream):
    c = epg_coag_batch(alpha, zeta, n, 1, rng)
    out = SetPartition.from_labels(c.output_labels[0])
    return out, MergeOutcome(int(c.input_blocks[0]), int(c.merged_count[0]), out)


def sample_block_counts(alpha, theta, n: int, size: int, rng: RngStream):
    """K_n for `size` PD(alpha, theta) restaurants; only counts are tracked."""
    if not 0 <= alpha < 1 or not theta > -alpha:
        raise ParameterError("need 0 <= alpha < 1 and theta > -alpha")
    K = np.ones(size)
    for i in range(1, n):
        p = (theta + K * alpha) / (theta + i)
        K += rng.uniform(size) < p
    return K.astype(np.int64)


def merge_size_pmf(alpha, theta, b: int) -> np.ndarray:
    """Law of the number of merged blocks given b input blocks.

    Mixed Binomial(b, p) with p ~ Beta((1-alpha)/alpha, (theta+alpha)/alpha);
    alpha = 0 is the Binomial(b, 1/(1+theta)) limit.
    """
    if b < 0 or not theta > -alpha or not 0 <= alpha < 1:
        raise ParameterError("need b >= 0, 0 <= alpha < 1, theta > -alpha")
    j = np.arange(b + 1)
    lchoose = gammaln(b + 1) - gammaln(j + 1) - gammaln(b - j + 1)
    if alpha == 0:
        p = 1 / (1 + theta)
        with np.errstate(divide="ignore"):
            lp = lchoose + j * math.log(p) + (b - j) * math.log1p(-p) if theta > 0 else \
                np.where(j == b, 0.0, -np.inf)
        return np.exp(lp)
    a1 = (1 - alpha) / alpha
    a2 = (theta + alpha) / alpha
    lp = lchoose + betaln(j + a1, b - j + a2) - betaln(a1, a2)
    return np.exp(lp)


def aldous_kernel(beta, b: int) -> np.ndarray:
    """Beta-splitting weights on 1..b-1, normalised; beta = inf gives C(b,j)."""
    if b < 2:
        raise ParameterError("b must be >= 2")
    j = np.arange(1, b)
    lchoose = gammaln(b + 1) - gammaln(j + 1) - gammaln(b - j + 1)
    if math.isinf(beta):
        lw = lchoose
    else:
        lw = lchoose + gammaln(j + 1 + beta) + gammaln(b - j + 1 + beta)
    w = np.exp(lw - lw.max())
    return w / w.sum()


def beta_splitting_check(alpha, b: int) -> float:
    """Max relative deviation between the merge-size pmf at theta = 1 - 2 alpha,
    restricted to 1..b-1 and renormalised, and the beta-splitting kernel with
    beta = (1 - alpha)/alpha - 1."""
    a = check_alpha(alpha)
    if b < 2:
        raise ParameterError("b must be >= 2")
    theta = 1 - 2 * a
    if not theta > -a:
        raise ParameterError("theta = 1 - 2 alpha must exceed -alpha")
    p = merge_size_pmf(a, theta, b)[1:b]
    p = p / p.sum()
    k = aldous_kernel((1 - a) / a - 1, b)
    return float(np.max(np.abs(p / k - 1)))


def coag_mass(mp: MassPartition, simple: SimpleBridge, rng: RngStream) -> MassPartition:
    """Merge each weight into one block independently with probability 1 - q."""
    if mp.dust > mp.eps_trunc:
        raise UnsupportedInputError("coag_mass needs negligible dust")
    w = mp.weights
    hit = rng.uniform(w.size) > simple.q
    out = w[~hit]
    if hit.any():
        out = np.append(out, w[hit].sum())
    return rank(out, dust=mp.dust, eps_trunc=mp.eps_trunc)


def frag_mass(mp: MassPartition, pick_index, fragmenting: MassPartition,
              rng: RngStream | None = None) -> MassPartition:
    """Replace one weight by its split according to ``fragmenting``.

    ``pick_index=None`` draws the weight by a size-biased pick.
    """
    if fragmenting.dust > fragmenting.eps_trunc:
        raise UnsupportedInputError("fragmenting partition must be dust-free")
    w = mp.weights
    if pick_index is None:
        if rng is None:
            raise ParameterError("a size-biased pick needs an rng")
        cum = np.cumsum(w)
        pick_index = min(int(np.searchsorted(cum, rng.uniform() * cum[-1], side="right")),
                         w.size - 1)
    if not 0 <= pick_index < w.size:
        raise ParameterError("pick index not in the partition")
    pick = w[pick_index]
    out = np.concatenate([np.delete(w, pick_index), pick * fragmenting.weights])
    return rank(out, dust=mp.dust + pick * fragmenting.dust,
                eps_trunc=mp.eps_trunc + pick * fragmenting.eps_trunc)


def discrete_base_project(p: SetPartition, labels) -> SetPartition:
    """Merge blocks that received the same base atom (labels follow p.blocks)."""
    labels = list(labels)
    if len(labels) != p.block_count:
        raise ParameterError("need one label per block")
    groups = {}
    for b, lab in zip(p.blocks, labels):
        groups.setdefault(lab, []).extend(b)
    return SetPartition(p.n, tuple(groups.values()))


def set_partitions(n: int):
    """All set partitions of [n] as restricted-growth label tuples."""
    def rec(prefix, k):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for j in range(k + 1):
            yield from rec(prefix + [j], max(k, j + 1))
    if n < 1:
        return
    yield from rec([0], 1)
