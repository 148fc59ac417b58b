"""Ranked mass partitions with dust, size-biased permutation and diversity."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, ParameterError, UnsupportedInputError
from .rand_core import RngStream, check_alpha

DEFAULT_EPS_TRUNC = 1e-10


def _fmt(x):
    return format(float(x), ".17g")


@dataclass(frozen=True)
class MassPartition:
    """Non-increasing weights plus dust.

    ``eps_trunc`` is the mass that may be missing because the generating
    stream was cut off; ``dust + sum(weights)`` lies in ``[1 - eps_trunc, 1]``.
    """

    weights: np.ndarray
    dust: float = 0.0
    eps_trunc: float = DEFAULT_EPS_TRUNC
    slack: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1 or np.any(w < 0) or self.dust < 0:
            raise ConsistencyError("weights and dust must be nonnegative")
        if np.any(np.diff(w) > 0):
            raise ConsistencyError("weights must be non-increasing; use rank()")
        total = w.sum() + self.dust
        if total > 1 + self.slack or total < 1 - self.eps_trunc - self.slack:
            raise ConsistencyError(f"total mass {total!r} outside [1-eps, 1]")

    def __len__(self):
        return self.weights.size

    @property
    def total(self):
        return float(self.weights.sum() + self.dust)

    def to_csv_row(self):
        return ",".join([_fmt(w) for w in self.weights] + [_fmt(self.dust)])

    def to_json(self):
        return json.dumps([float(w) for w in self.weights] + [float(self.dust)])


def rank(weights, dust=0.0, fold_dust=False, eps_trunc=DEFAULT_EPS_TRUNC, slack=1e-9):
    """Sort weights into non-increasing order, dropping zeros.

    With ``fold_dust`` the dust is treated as one more atom.
    """
    w = np.asarray(weights, dtype=float).ravel()
    if np.any(w < 0) or dust < 0:
        raise ConsistencyError("negative mass")
    if w.sum() + dust > 1 + slack:
        raise ConsistencyError(f"total mass {w.sum() + dust!r} exceeds 1")
    if fold_dust and dust > 0:
        w = np.append(w, dust)
        dust = 0.0
    w = -np.sort(-w[w > 0])
    return MassPartition(w, float(dust), eps_trunc, slack)


@dataclass(frozen=True)
class SizeBiasedSequence:
    picks: np.ndarray
    residual: float


def size_biased_permutation(mp: MassPartition, rng: RngStream) -> SizeBiasedSequence:
    """Size-biased order of the atoms by repeated cumulative-sum inversion."""
    if mp.dust > mp.eps_trunc:
        raise UnsupportedInputError("size-biased permutation needs a dust-free partition")
    left = list(mp.weights)
    picks = []
    while left:
        cum = np.cumsum(left)
        j = int(np.searchsorted(cum, rng.uniform() * cum[-1], side="right"))
        j = min(j, len(left) - 1)
        picks.append(left.pop(j))
    picks = np.array(picks)
    return SizeBiasedSequence(picks, max(0.0, 1.0 - float(picks.sum())))


def first_size_biased_pick(mp: MassPartition, rng: RngStream) -> float:
    """One size-biased pick, i.e. the first term of the size-biased permutation."""
    if mp.dust > mp.eps_trunc:
        raise UnsupportedInputError("size-biased pick needs a dust-free partition")
    w = mp.weights
    if w.size == 0:
        raise UnsupportedInputError("no atoms")
    cum = np.cumsum(w)
    j = int(np.searchsorted(cum, rng.uniform() * cum[-1], side="right"))
    return float(w[min(j, w.size - 1)])


def alpha_diversity_estimate(block_count: int, n: int, alpha) -> float:
    """Plug-in diversity K_n / n^alpha."""
    a = check_alpha(alpha)
    if not 1 <= block_count <= n:
        raise ParameterError("need 1 <= block_count <= n")
    return block_count / n ** a
