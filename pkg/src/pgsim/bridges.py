"""Exchangeable bridges as explicit atom lists plus uniform dust.

A bridge is the random cdf F(y) = dust * y + sum_k p_k 1{u_k <= y} on [0, 1].
A simple bridge is F(y) = q y + (1 - q) 1{u <= y}.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ParameterError
from .mass_partition import MassPartition, rank
from .rand_core import RngStream, ZetaSpec, check_alpha, sample_gamma
from .sticks import EPG, PD, PG, StickKind, draw_stream, largest_weight


@dataclass(frozen=True)
class Bridge:
    locations: np.ndarray
    weights: np.ndarray
    dust: float
    eps_trunc: float = 1e-10

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if loc.shape != w.shape:
            raise ParameterError("locations and weights differ in length")
        if np.any(w < 0) or self.dust < 0:
            raise ParameterError("negative mass in bridge")
        if np.any((loc < 0) | (loc > 1)):
            raise ParameterError("atom locations must lie in [0, 1]")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)

    @property
    def atoms(self):
        return list(zip(self.locations.tolist(), self.weights.tolist()))

    @property
    def total(self):
        return float(self.weights.sum() + self.dust)

    def __call__(self, y):
        return bridge_eval(self, y)

    def masses(self) -> MassPartition:
        """Ranked atom masses; any mass short of 1 counts toward eps_trunc."""
        deficit = max(0.0, 1.0 - self.total)
        return rank(self.weights, self.dust, eps_trunc=max(self.eps_trunc, deficit + self.dust))

    def largest_atom(self):
        return float(self.weights.max()) if self.weights.size else 0.0

    def to_json(self):
        return json.dumps({"atoms": [[float(u), float(p)] for u, p in self.atoms],
                           "dust": float(self.dust)})


@dataclass(frozen=True)
class SimpleBridge:
    q: float
    atom_location: float

    def __post_init__(self):
        if not 0 <= self.q <= 1 or not 0 <= self.atom_location <= 1:
            raise ParameterError("simple bridge needs q and atom location in [0, 1]")

    def as_bridge(self) -> Bridge:
        if self.q == 1:
            return Bridge(np.empty(0), np.empty(0), 1.0)
        return Bridge(np.array([self.atom_location]), np.array([1.0 - self.q]), self.q)

    def __call__(self, y):
        return bridge_eval(self.as_bridge(), y)


AnyBridge = Union[Bridge, SimpleBridge]


def _as_bridge(b: AnyBridge) -> Bridge:
    return b.as_bridge() if isinstance(b, SimpleBridge) else b


def _sorted(b: Bridge):
    order = np.argsort(b.locations, kind="stable")
    v, r = b.locations[order], b.weights[order]
    # level just before each atom, built without cancellation
    cminus = b.dust * v + np.concatenate([[0.0], np.cumsum(r)[:-1]])
    return v, r, cminus + r, cminus


def bridge_eval(b: AnyBridge, y):
    """F(y) = dust * y + total weight of atoms at or left of y."""
    b = _as_bridge(b)
    y_arr = np.asarray(y, dtype=float)
    if np.any((y_arr < 0) | (y_arr > 1)):
        raise ParameterError("y must lie in [0, 1]")
    v, r, _, _ = _sorted(b)
    cum = np.concatenate([[0.0], np.cumsum(r)])
    out = b.dust * y_arr + cum[np.searchsorted(v, y_arr, side="right")]
    return float(out) if out.ndim == 0 else out


def _inverse(b: Bridge, u, strict: bool):
    """inf{y : F(y) > u} if strict else inf{y : F(y) >= u}; NaN when empty."""
    v, r, cplus, cminus = _sorted(b)
    d = b.dust
    u = np.asarray(u, dtype=float)
    j = np.searchsorted(cplus, u, side="right" if strict else "left")
    out = np.full(u.shape, np.nan)
    inside = j < v.size
    jj = np.where(inside, j, 0)
    on_atom = inside & (cminus[jj] <= u) if v.size else np.zeros(u.shape, bool)
    if v.size:
        out[on_atom] = v[jj[on_atom]]
    # linear stretch just before atom j (or after the last atom)
    lin = ~on_atom
    if d > 0 and np.any(lin):
        prev_v = np.concatenate([[0.0], v])[j[lin]]
        prev_c = np.concatenate([[0.0], cplus])[j[lin]]
        y = prev_v + (u[lin] - prev_c) / d
        y = np.where(y <= 1.0 + 1e-12, np.minimum(y, 1.0), np.nan)
        out[lin] = y
    elif np.any(lin & inside):
        out[lin & inside] = v[j[lin & inside]]
    if not strict:
        # F(0) >= 0 always, so level 0 is reached at y = 0
        out[u <= 0] = 0.0
    return out


def bridge_quantile(b: AnyBridge, r):
    """Right-continuous inverse inf{v in [0,1] : F(v) > r}, taken as 1 when empty."""
    b = _as_bridge(b)
    r_arr = np.asarray(r, dtype=float)
    if np.any((r_arr < 0) | (r_arr > 1)):
        raise ParameterError("r must lie in [0, 1]")
    out = _inverse(b, r_arr, strict=True)
    out = np.where(np.isnan(out), 1.0, out)
    return float(out) if out.ndim == 0 else out


def _merge_duplicates(loc, w):
    keep = w > 0
    loc, w = loc[keep], w[keep]
    uniq, inv = np.unique(loc, return_inverse=True)
    if uniq.size == loc.size:
        return loc, w
    return uniq, np.bincount(inv, weights=w)


def compose(outer: AnyBridge, inner: AnyBridge) -> Bridge:
    """The bridge y -> outer(inner(y)).

    An outer atom at u moves to inf{y : inner(y) >= u}; outer atoms that fall
    inside an inner atom's jump therefore pile onto that atom. Inner atoms
    keep outer-dust times their weight, and the dusts multiply. Outer atoms
    beyond inner(1) (only possible for a truncated inner bridge) are lost and
    counted in eps_trunc.
    """
    outer, inner = _as_bridge(outer), _as_bridge(inner)
    g = _inverse(inner, outer.locations, strict=False) if outer.locations.size else np.empty(0)
    ok = ~np.isnan(g)
    loc = np.concatenate([g[ok], inner.locations])
    w = np.concatenate([outer.weights[ok], outer.dust * inner.weights])
    loc, w = _merge_duplicates(loc, w)
    lost = float(outer.weights[~ok].sum())
    return Bridge(loc, w, outer.dust * inner.dust,
                  eps_trunc=outer.eps_trunc + inner.eps_trunc + lost)


# -- constructions ---------------------------------------------------------------

def build_bridge(kind: StickKind, trunc: float, rng: RngStream, zeta_value=None) -> Bridge:
    """Stick-breaking bridge with iid uniform atom locations.

    The unallocated residual after truncation becomes dust. For EPG the
    bridge of the stream started at eps + zeta is composed with the simple
    bridge (q, U) where q = zeta/(eps + zeta).
    """
    d = draw_stream(kind, trunc, rng, zeta_value=zeta_value)
    if isinstance(kind, EPG):
        outer = Bridge(d.locations, d.masses, d.residual, trunc)
        return compose(outer, SimpleBridge(d.q, d.merge_atom))
    loc = rng.uniform(d.masses.size)
    return Bridge(loc, d.masses, d.residual, trunc)


@dataclass(frozen=True)
class EPGParts:
    """Pieces of an EPG bridge: the stream bridge, the simple bridge, and the two-term split."""

    stream_bridge: Bridge
    simple: SimpleBridge
    atom_mass: float
    rest: Bridge

    def eval_composed(self, y):
        return bridge_eval(compose(self.stream_bridge, self.simple), y)

    def eval_two_term(self, y):
        """(1 - P) * rest(y) + P * 1{U <= y} with P the merged atom mass."""
        y = np.asarray(y, dtype=float)
        p = self.atom_mass
        return (1 - p) * bridge_eval(self.rest, y) + p * (self.simple.atom_location <= y)


def epg_parts(alpha, zeta: ZetaSpec, trunc, rng: RngStream) -> EPGParts:
    """Draw one EPG bridge and also express it as atom plus normalised remainder."""
    d = draw_stream(EPG(alpha, zeta), trunc, rng)
    simple = SimpleBridge(d.q, d.merge_atom)
    stream = Bridge(d.locations, d.masses, d.residual, trunc)
    q, u1 = d.q, d.merge_atom
    f = d.flags
    # the dust of the stream splits into q (stays uniform) and 1-q (onto the atom)
    p_atom = float(d.masses[f].sum() + d.residual * (1 - q))
    keep = ~f
    moved = (d.locations[keep] - (1 - q) * (d.locations[keep] > q * u1 + 1 - q)) / q \
        if q > 0 else np.empty(0)
    moved = np.clip(moved, 0.0, 1.0)
    scale = 1.0 / (1.0 - p_atom) if p_atom < 1 else 0.0
    rest = Bridge(moved, d.masses[keep] * scale, d.residual * q * scale, trunc)
    return EPGParts(stream, simple, p_atom, rest)


def q_flow_bridges(q, atoms) -> list[SimpleBridge]:
    return [SimpleBridge(float(qk), float(u)) for qk, u in zip(q, atoms)]


def compose_flow(simples) -> Bridge:
    """lambda_n o ... o lambda_1 for simples = [lambda_1, ..., lambda_n]."""
    out = simples[0].as_bridge()
    for s in simples[1:]:
        out = compose(s, out)
    return out


def flow_bridge(alpha, zeta: ZetaSpec, n: int, rng: RngStream) -> Bridge:
    """Composition of the first n simple bridges of the q-chain started at zeta."""
    from .chains import simulate_q_chain

    if n < 1:
        raise ParameterError("n must be >= 1")
    ch = simulate_q_chain(alpha, zeta, n, 1, rng)
    atoms = rng.uniform(n)
    return compose_flow(q_flow_bridges(ch.factors[0], atoms))


def posterior_bridge(alpha, theta, block_sizes, rng: RngStream) -> Bridge:
    """Bridge with Dirichlet(theta/a + k, (n_1 - a)/a, ..., (n_k - a)/a) masses.

    The first Dirichlet coordinate is the dust; the rest sit at iid uniform
    locations.
    """
    a = check_alpha(alpha)
    sizes = np.asarray(block_sizes, dtype=float)
    if sizes.size == 0 or np.any(sizes <= 0):
        raise ParameterError("block sizes must be positive")
    if not theta > -a:
        raise ParameterError("need theta > -alpha")
    shapes = np.concatenate([[theta / a + sizes.size], (sizes - a) / a])
    g = sample_gamma(shapes, rng)
    g = g / g.sum()
    return Bridge(rng.uniform(sizes.size), g[1:], float(g[0]))


def pitman_frag_bridge(alpha, theta, delta, trunc, rng: RngStream) -> Bridge:
    """GEM(alpha*delta, theta) mixture of independent PD(alpha, -alpha*delta) bridges.

    With delta = 1 each component is a single atom.
    """
    a = check_alpha(alpha)
    if not 0 <= delta <= 1:
        raise ParameterError("delta must lie in [0, 1]")
    if not theta > -a * delta:
        raise ParameterError("need theta > -alpha*delta")
    outer = draw_stream(PD(a * delta, theta), trunc, rng)
    locs, ws, dust = [], [], outer.residual
    for w in outer.masses:
        if delta == 1:
            locs.append(rng.uniform(1))
            ws.append(np.array([w]))
            continue
        inner = draw_stream(PD(a, -a * delta), trunc, rng)
        locs.append(rng.uniform(inner.masses.size))
        ws.append(w * inner.masses)
        dust += w * inner.residual
    return Bridge(np.concatenate(locs), np.concatenate(ws), dust, 2 * trunc)


def pitman_frag_largest(alpha, theta, delta, rng: RngStream) -> float:
    """Exact largest atom of the fragmentation bridge.

    It equals max_k w_k * (largest atom of component k); components are
    visited until the outer residual falls below the best value.
    """
    a = check_alpha(alpha)
    from .sticks import StickBatch

    batch = StickBatch(PD(a * delta, theta), 1, rng)
    best, prod = 0.0, 1.0
    while prod > best:
        w = batch.extend([0], 1)[0][0, 0]
        mass = prod * (1 - w)
        prod *= w
        if mass > best:
            inner = 1.0 if delta == 1 else largest_weight(PD(a, -a * delta), rng)
            best = max(best, mass * inner)
    return best


@dataclass(frozen=True)
class NTRPath:
    """Jump times on (0, horizon] and the levels prod_{l<=k} R_l attached to them."""

    times: np.ndarray
    levels: np.ndarray
    zeta: float

    def value(self, t):
        """Sum of the levels of jumps at or before t."""
        cum = np.concatenate([[0.0], np.cumsum(self.levels)])
        return cum[np.searchsorted(self.times, np.asarray(t, dtype=float), side="right")]


def ntr_fragmenter(alpha, zeta: ZetaSpec, horizon, rng: RngStream) -> NTRPath:
    a = check_alpha(alpha)
    if not horizon > 0:
        raise ParameterError("horizon must be > 0")
    z = float(zeta.sample(rng))
    n = int(rng.gen.poisson(horizon))
    times = np.sort(rng.uniform(n) * horizon)
    e = rng.exponential(n)
    path = z + np.concatenate([[0.0], np.cumsum(e)])
    r = (path[:-1] / path[1:]) ** (1.0 / a)
    return NTRPath(times, np.cumprod(r), z)
