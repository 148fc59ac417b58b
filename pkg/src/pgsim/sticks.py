"""Stick-breaking streams for PD(alpha, theta), PG(alpha, zeta) and EPG(alpha, zeta).

PD sticks are independent Betas. PG sticks are built from the running sums
zeta_k = zeta + e_1 + ... + e_k of unit exponentials:

    R_k = (zeta_{k-1} / zeta_k)^(1/alpha),   1 - W_k = B_k (1 - R_k),

with B_k ~ Beta(1 - alpha, alpha) iid. EPG sticks run the PG recipe started
from eps + zeta, eps ~ Gamma((1 - alpha)/alpha), and each stick carries an
atom location; sticks whose location falls in the atom interval
[q U, q U + 1 - q] of the simple bridge with q = zeta/(eps + zeta) are merged
into a single atom.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .errors import ParameterError, UnsupportedInputError
from .mass_partition import MassPartition, rank
from .rand_core import RngStream, ZetaSpec, check_alpha, sample_beta, sample_gamma

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PD:
    alpha: float
    theta: float

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise ParameterError("PD needs 0 <= alpha < 1")
        if not self.theta > -self.alpha:
            raise ParameterError("PD needs theta > -alpha")


@dataclass(frozen=True)
class PG:
    alpha: float
    zeta: ZetaSpec

    def __post_init__(self):
        check_alpha(self.alpha)


@dataclass(frozen=True)
class EPG:
    alpha: float
    zeta: ZetaSpec

    def __post_init__(self):
        check_alpha(self.alpha)


StickKind = Union[PD, PG, EPG]


def parse_kind(name: str, alpha, theta=None, zeta: ZetaSpec | None = None) -> StickKind:
    name = name.lower()
    if name == "pd":
        if theta is None:
            raise ParameterError("pd needs theta")
        return PD(float(alpha), float(theta))
    if zeta is None:
        raise ParameterError(f"{name} needs a zeta spec")
    if name == "pg":
        return PG(float(alpha), zeta)
    if name == "epg":
        return EPG(float(alpha), zeta)
    raise ParameterError(f"unknown stick kind {name!r}")


# -- vectorised core ----------------------------------------------------------

def pg_chunk(alpha, zeta_k, m, rng: RngStream):
    """m more PG sticks for each row, continuing from running sums zeta_k.

    Returns (W, R, new_zeta_k) with W and R of shape (rows, m).
    """
    zeta_k = np.asarray(zeta_k, dtype=float)
    rows = zeta_k.size
    e = rng.exponential((rows, m))
    path = zeta_k[:, None] + np.cumsum(e, axis=1)
    prev = np.concatenate([zeta_k[:, None], path[:, :-1]], axis=1)
    r = (prev / path) ** (1.0 / alpha)
    return pg_weights(alpha, r, rng), r, path[:, -1].copy()


def pg_weights(alpha, r, rng: RngStream):
    """W = 1 - B (1 - R) with B ~ Beta(1 - alpha, alpha).

    B = G1/(G1 + G2) from two gammas, so W = (G2 + G1 R)/(G1 + G2) stays in
    (0, 1] even when B is within rounding of 1.
    """
    r = np.asarray(r, dtype=float)
    g1 = sample_gamma(1 - alpha, rng, r.size).reshape(r.shape)
    g2 = sample_gamma(alpha, rng, r.size).reshape(r.shape)
    return (g2 + g1 * r) / (g1 + g2)


def pd_chunk(alpha, theta, k0, rows, m, rng: RngStream):
    """Sticks k0+1 .. k0+m of GEM(alpha, theta) for each row."""
    k = k0 + np.arange(1, m + 1)
    a = np.broadcast_to(theta + k * alpha, (rows, m))
    return sample_beta(a, 1 - alpha, rng, (rows, m))


class StickBatch:
    """A batch of independent stick streams extended together.

    Each row draws its own zeta (and eps, merge atom for EPG) once, at
    creation; every later stick of that row is conditional on those draws.
    """

    def __init__(self, kind: StickKind, size: int, rng: RngStream, zeta_values=None):
        self.kind = kind
        self.size = size
        self.rng = rng
        self.k = np.zeros(size, dtype=np.int64)
        if isinstance(kind, PD):
            return
        a = kind.alpha
        z = kind.zeta.sample(rng, size) if zeta_values is None else \
            np.broadcast_to(np.asarray(zeta_values, dtype=float), (size,)).copy()
        self.zeta = np.asarray(z, dtype=float)
        if isinstance(kind, PG):
            self.zeta_k = self.zeta.copy()
        else:
            self.eps = sample_gamma((1 - a) / a, rng, size)
            self.zeta_k = self.zeta + self.eps
            self.q = self.zeta / self.zeta_k
            self.merge_atom = rng.uniform(size)

    def extend(self, rows, m):
        """m more sticks for the given rows.

        Returns (W, R, flags); R is None for PD and flags is None unless EPG.
        Flags mark sticks merged into the EPG atom, whose locations are also
        returned via ``self.last_locations``.
        """
        rows = np.asarray(rows, dtype=np.int64)
        kind = self.kind
        if isinstance(kind, PD):
            # PD sticks depend on the index k, which can differ per row
            out = np.empty((rows.size, m))
            for k0 in np.unique(self.k[rows]):
                sel = self.k[rows] == k0
                out[sel] = pd_chunk(kind.alpha, kind.theta, int(k0), int(sel.sum()), m, self.rng)
            self.k[rows] += m
            return out, None, None
        w, r, zk = pg_chunk(kind.alpha, self.zeta_k[rows], m, self.rng)
        self.zeta_k[rows] = zk
        self.k[rows] += m
        if isinstance(kind, PG):
            return w, r, None
        loc = self.rng.uniform((rows.size, m))
        lo = (self.q * self.merge_atom)[rows][:, None]
        hi = lo + (1 - self.q[rows])[:, None]
        self.last_locations = loc
        return w, r, (loc >= lo) & (loc <= hi)


# -- single streams ------------------------------------------------------------

@dataclass(frozen=True)
class StickState:
    """Value-type state of one stick stream."""

    k: int = 0
    zeta: float = 0.0
    zeta_k: float = 0.0
    eps_alpha: float | None = None
    merge_atom: float | None = None
    W_list: tuple = ()
    flags: tuple = ()
    product: float = 1.0

    @property
    def q(self):
        if self.eps_alpha is None:
            return None
        return self.zeta / (self.zeta + self.eps_alpha)


def new_stream(kind: StickKind, rng: RngStream) -> StickState:
    if isinstance(kind, PD):
        return StickState()
    a = kind.alpha
    z = float(kind.zeta.sample(rng))
    if isinstance(kind, PG):
        return StickState(zeta=z, zeta_k=z)
    eps = sample_gamma((1 - a) / a, rng)
    return StickState(zeta=z, zeta_k=z + eps, eps_alpha=eps, merge_atom=rng.uniform())


def next_stick(state: StickState, kind: StickKind, rng: RngStream):
    """Advance one stick; returns (W_k, new_state).

    For EPG the stick belongs to the underlying stream started at eps + zeta;
    whether it was merged is recorded in ``state.flags``.
    """
    if isinstance(kind, PD):
        w = sample_beta(kind.theta + (state.k + 1) * kind.alpha, 1 - kind.alpha, rng)
        zk, flag = state.zeta_k, None
    else:
        wv, _, zkv = pg_chunk(kind.alpha, np.array([state.zeta_k]), 1, rng)
        w, zk = float(wv[0, 0]), float(zkv[0])
        flag = None
        if isinstance(kind, EPG):
            q, u1 = state.q, state.merge_atom
            loc = rng.uniform()
            flag = q * u1 <= loc <= q * u1 + 1 - q
    flags = state.flags + ((flag,) if flag is not None else ())
    return w, replace(state, k=state.k + 1, zeta_k=zk, W_list=state.W_list + (w,),
                      flags=flags, product=state.product * w)


def r_sequence(kind: PG, k: int, rng: RngStream, return_zeta=False):
    """R_1..R_k of a PG stream; optionally also zeta_0..zeta_k."""
    if not isinstance(kind, PG):
        raise ParameterError("r_sequence needs a PG kind")
    z = float(kind.zeta.sample(rng))
    e = rng.exponential(k)
    path = z + np.concatenate([[0.0], np.cumsum(e)])
    r = (path[:-1] / path[1:]) ** (1.0 / kind.alpha)
    return (r, path) if return_zeta else r


def sample_sticks(kind: StickKind, n_sticks: int, size: int, rng: RngStream):
    """First n_sticks W's of `size` independent streams, shape (size, n_sticks).

    For EPG these are the sticks of the underlying unmerged stream.
    """
    batch = StickBatch(kind, size, rng)
    w, _, _ = batch.extend(np.arange(size), n_sticks)
    return w


@dataclass
class StreamDraw:
    """Masses of one stream in stick order, cut once the residual is below eps.

    For EPG, ``flags`` marks the sticks merged into the atom and
    ``locations`` holds their uniform atom locations; ``zeta``, ``eps_alpha``,
    ``q`` and ``merge_atom`` are the per-stream draws.
    """

    masses: np.ndarray
    residual: float
    flags: np.ndarray | None = None
    locations: np.ndarray | None = None
    zeta: float | None = None
    eps_alpha: float | None = None
    q: float | None = None
    merge_atom: float | None = None


def draw_stream(kind: StickKind, eps: float, rng: RngStream, max_sticks: int = 10**7,
                zeta_value=None) -> StreamDraw:
    if not eps > 0:
        raise ParameterError("eps must be > 0")
    batch = StickBatch(kind, 1, rng, zeta_values=zeta_value)
    epg = isinstance(kind, EPG)
    masses, flags, locs = [], [], []
    prod, used, m = 1.0, 0, 64
    while prod >= eps and used < max_sticks:
        w, _, f = batch.extend([0], m)
        w = w[0]
        cum = prod * np.concatenate([[1.0], np.cumprod(w)])
        hit = np.flatnonzero(cum[1:] < eps)
        cut = hit[0] + 1 if hit.size else m
        masses.append((cum[:-1] * (1 - w))[:cut])
        if epg:
            flags.append(f[0][:cut])
            locs.append(batch.last_locations[0][:cut])
        prod = float(cum[cut])
        used += cut
        m = min(2 * m, 1 << 16)
    if prod >= eps:
        log.warning("stick stream stopped at %d sticks with residual %.3g", used, prod)
    out = StreamDraw(np.concatenate(masses), prod)
    if not isinstance(kind, PD):
        out.zeta = float(batch.zeta[0])
    if epg:
        out.flags = np.concatenate(flags)
        out.locations = np.concatenate(locs)
        out.eps_alpha = float(batch.eps[0])
        out.q = float(batch.q[0])
        out.merge_atom = float(batch.merge_atom[0])
    return out


def stick_stream_to_partition(kind: StickKind, eps: float, rng: RngStream,
                              max_sticks: int = 10**7) -> MassPartition:
    """Ranked masses of one stream, stopped once the residual is below eps.

    The residual is reported as dust. A stream that hits ``max_sticks``
    first records its residual as the truncation tolerance. For EPG the
    flagged sticks are summed into one atom; with zeta = 0 every stick is
    flagged and the result is the point mass.
    """
    if isinstance(kind, EPG) and kind.zeta.is_zero:
        return MassPartition(np.array([1.0]), 0.0, eps)
    d = draw_stream(kind, eps, rng, max_sticks)
    w = d.masses
    if d.flags is not None:
        w = np.append(w[~d.flags], w[d.flags].sum())
    return rank(w, dust=d.residual, eps_trunc=max(eps, d.residual))


def largest_weight(kind: StickKind, rng: RngStream, max_sticks: int = 10**7) -> float:
    """Exact largest mass of a PD or PG stream.

    Sticks are drawn until the unallocated residual is smaller than the
    largest mass found, after which no later stick can beat it.
    """
    if isinstance(kind, EPG):
        raise UnsupportedInputError("largest_weight handles PD and PG kinds")
    batch = StickBatch(kind, 1, rng)
    best, prod, used, m = 0.0, 1.0, 0, 32
    while prod > best and used < max_sticks:
        w = batch.extend([0], m)[0][0]
        cum = prod * np.concatenate([[1.0], np.cumprod(w)])
        best = max(best, float((cum[:-1] * (1 - w)).max()))
        prod = cum[-1]
        used += m
        m = min(2 * m, 1 << 14)
    return best


def largest_weights(kind: StickKind, size: int, rng: RngStream) -> np.ndarray:
    return np.array([largest_weight(kind, rng) for _ in range(size)])
