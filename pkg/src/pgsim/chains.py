"""Markov chains of total-mass variables built from shared primitive draws.

Every chain is generated from its primitives (zeta, unit exponentials e_k,
Gamma((1-alpha)/alpha) variables eps_k, and independent increments of the
generalized gamma subordinator tau), so the multiplicative relations between
consecutive states hold path by path, not only in law.

V-chain:  Z_k = zeta + sum_{i<=k} (e_i + eps_i),  V_k = (e_k + Z_{k-1}) / Z_k,
          T_n = tau(Z_n) / Z_n^(1/a),  T_{k-1} = T_k V_k^(-1/a).
W-chain:  PG sticks W_k from zeta_k = zeta + e_1 + ... + e_k,
          T_{n a} = tau(zeta_n) / zeta_n^(1/a),  T_{(k-1) a} = T_{k a} / W_k.
q-chain:  Z~_0 = zeta,  Z~_k = Z~_{k-1} + e_k + eps_{k-1},
          q_k = Z~_{k-1} / (Z~_{k-1} + eps_{k-1}),  S_{k-1} = S_k q_k^(-1/a).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .bridges import Bridge, SimpleBridge, build_bridge, compose
from .densities import DEFAULT_QUAD, QuadratureConfig, stable_density
from .errors import DomainError, ParameterError
from .rand_core import RngStream, ZetaSpec, check_alpha, sample_gamma, sample_tau
from .sticks import PG, pg_weights


@dataclass(frozen=True)
class ChainState:
    k: int
    T_hat: float
    diversity: float
    aux: float
    factors: tuple
    waiting_time: float | None = None

    @property
    def factor(self):
        return self.factors[-1] if self.factors else None


@dataclass
class ChainPaths:
    """Arrays for `size` independent runs.

    T_hat has shape (size, steps+1) with column k the state after k steps;
    factors (V_k, W_k or q_k) and aux arrays are indexed the same way with
    column 0 of factors unused by convention (shape (size, steps)).
    """

    kind: str
    alpha: float
    T_hat: np.ndarray
    factors: np.ndarray
    aux: np.ndarray
    extra: dict

    @property
    def diversity(self):
        return self.T_hat ** (-self.alpha)

    def states(self, row=0):
        out = []
        wt = self.extra.get("waiting_times")
        for k in range(self.T_hat.shape[1]):
            out.append(ChainState(
                k=k, T_hat=float(self.T_hat[row, k]), diversity=float(self.diversity[row, k]),
                aux=float(self.aux[row, k]), factors=tuple(self.factors[row, :k].tolist()),
                waiting_time=None if wt is None or k == 0 else float(wt[row, k - 1])))
        return out


def _check_steps(steps):
    if steps < 1:
        raise ParameterError("steps must be >= 1")


def _tau(a, lengths, rng):
    return sample_tau(a, lengths.ravel(), rng).reshape(lengths.shape)


def simulate_v_chain(alpha, zeta: ZetaSpec, steps: int, size: int, rng: RngStream) -> ChainPaths:
    a = check_alpha(alpha)
    _check_steps(steps)
    z0 = np.asarray(zeta.sample(rng, size), dtype=float)
    e = rng.exponential((size, steps))
    eps = sample_gamma((1 - a) / a, rng, size * steps).reshape(size, steps)
    Z = np.concatenate([z0[:, None], z0[:, None] + np.cumsum(e + eps, axis=1)], axis=1)
    V = (e + Z[:, :-1]) / Z[:, 1:]
    tau_z = _tau(a, z0, rng)
    tau_e = _tau(a, e, rng)
    tau_eps = _tau(a, eps, rng)
    T = np.empty((size, steps + 1))
    T[:, steps] = (tau_z + tau_e.sum(axis=1) + tau_eps.sum(axis=1)) / Z[:, steps] ** (1 / a)
    for k in range(steps, 0, -1):
        T[:, k - 1] = T[:, k] * V[:, k - 1] ** (-1 / a)
    return ChainPaths("V", a, T, V, Z, {
        "theta": Z[:, :-1] / Z[:, 1:], "e": e, "eps": eps,
        "tau_zeta": tau_z, "tau_e": tau_e, "tau_eps": tau_eps})


def simulate_w_chain(alpha, zeta: ZetaSpec, steps: int, size: int, rng: RngStream) -> ChainPaths:
    a = check_alpha(alpha)
    _check_steps(steps)
    z0 = np.asarray(zeta.sample(rng, size), dtype=float)
    e = rng.exponential((size, steps))
    Z = np.concatenate([z0[:, None], z0[:, None] + np.cumsum(e, axis=1)], axis=1)
    R = (Z[:, :-1] / Z[:, 1:]) ** (1 / a)
    W = pg_weights(a, R, rng)
    tau_n = _tau(a, z0, rng) + _tau(a, e, rng).sum(axis=1)
    T = np.empty((size, steps + 1))
    T[:, steps] = tau_n / Z[:, steps] ** (1 / a)
    for k in range(steps, 0, -1):
        T[:, k - 1] = T[:, k] / W[:, k - 1]
    return ChainPaths("W", a, T, W, Z, {"R": R})


def simulate_q_chain(alpha, zeta: ZetaSpec, steps: int, size: int, rng: RngStream) -> ChainPaths:
    a = check_alpha(alpha)
    _check_steps(steps)
    z0 = np.asarray(zeta.sample(rng, size), dtype=float)
    e = rng.exponential((size, steps))
    eps = sample_gamma((1 - a) / a, rng, size * steps).reshape(size, steps)
    Zt = np.concatenate([z0[:, None], z0[:, None] + np.cumsum(e + eps, axis=1)], axis=1)
    q = Zt[:, :-1] / (Zt[:, :-1] + eps)
    # one tau path: per step first the eps_{k-1} stretch, then the e_k stretch
    tau_z = _tau(a, z0, rng)
    tau_eps = _tau(a, eps, rng)
    tau_e = _tau(a, e, rng)
    waits = tau_eps + tau_e
    tau_prev = tau_z + waits[:, :-1].sum(axis=1)
    last = Zt[:, steps - 1] + eps[:, steps - 1]
    S = np.empty((size, steps + 1))
    S[:, steps] = (tau_prev + tau_eps[:, steps - 1]) / last ** (1 / a)
    for k in range(steps, 0, -1):
        S[:, k - 1] = S[:, k] * q[:, k - 1] ** (-1 / a)
    return ChainPaths("q", a, S, q, Zt, {"waiting_times": waits, "eps": eps, "e": e,
                                         "last_time": last})


def run_v_chain(alpha, zeta: ZetaSpec, steps: int, rng: RngStream):
    return simulate_v_chain(alpha, zeta, steps, 1, rng).states()


def run_w_chain(alpha, zeta: ZetaSpec, steps: int, rng: RngStream):
    return simulate_w_chain(alpha, zeta, steps, 1, rng).states()


def run_q_chain(alpha, zeta: ZetaSpec, steps: int, rng: RngStream):
    return simulate_q_chain(alpha, zeta, steps, 1, rng).states()


def telescoping_error(paths: ChainPaths) -> np.ndarray:
    """Relative error between T_0 and T_n times the product of the factors."""
    a = paths.alpha
    T0, Tn, f = paths.T_hat[:, 0], paths.T_hat[:, -1], paths.factors
    if paths.kind == "W":
        rebuilt = Tn / np.prod(f, axis=1)
    else:
        rebuilt = Tn * np.prod(f, axis=1) ** (-1 / a)
    return np.abs(rebuilt / T0 - 1)


@dataclass(frozen=True)
class LinkedStep:
    T0: float
    T1: float
    V1: float
    T_alpha: float
    W1: float


def linked_first_step(alpha, zeta: ZetaSpec, rng: RngStream, size=None):
    """First V-step and first W-step driven by the same draws.

    With tau(zeta), tau(e_1) and tau(eps_1) laid end to end,
    W_1 = tau(zeta + e_1)/tau(zeta + e_1 + eps_1) and
    T_alpha = tau(zeta + e_1)/(zeta + e_1)^(1/a), so both
    T_1 V_1^(-1/a) and T_alpha / W_1 reproduce T_0.
    """
    a = check_alpha(alpha)
    n = 1 if size is None else size
    p = simulate_v_chain(a, zeta, 1, n, rng)
    head = p.extra["tau_zeta"] + p.extra["tau_e"][:, 0]
    W1 = head / (head + p.extra["tau_eps"][:, 0])
    T_alpha = head / (p.aux[:, 0] + p.extra["e"][:, 0]) ** (1 / a)
    out = LinkedStep(p.T_hat[:, 0], p.T_hat[:, 1], p.factors[:, 0], T_alpha, W1)
    if size is None:
        return LinkedStep(*(float(x[0]) for x in (out.T0, out.T1, out.V1, out.T_alpha, out.W1)))
    return out


@dataclass(frozen=True)
class BDGMChain:
    """Bridges F_0..F_n with F_{k-1} = F_k o lambda_k, and waiting times E_1..E_n."""

    bridges: list
    simples: list
    waiting_times: np.ndarray
    q: np.ndarray

    def steps(self):
        return [(self.bridges[k], float(self.waiting_times[k - 1]))
                for k in range(1, len(self.bridges))]


def bdgm_chain(alpha, zeta: ZetaSpec, steps: int, rng: RngStream, trunc=1e-6) -> BDGMChain:
    """EPG bridges linked by simple bridges.

    The last bridge is a PG bridge at time Z~_{n-1} + eps_{n-1}; earlier ones
    are obtained by composing with the simple bridges of the q-chain.
    """
    a = check_alpha(alpha)
    ch = simulate_q_chain(a, zeta, steps, 1, rng)
    q = ch.factors[0]
    atoms = rng.uniform(steps)
    simples = [SimpleBridge(float(qk), float(u)) for qk, u in zip(q, atoms)]
    last = float(ch.extra["last_time"][0])
    F = [None] * (steps + 1)
    F[steps] = build_bridge(PG(a, ZetaSpec.const(last)), trunc, rng)
    for k in range(steps, 0, -1):
        F[k - 1] = compose(F[k], simples[k - 1])
    return BDGMChain(F, simples, ch.extra["waiting_times"][0], q)


def transition_density(kind, alpha, t, s, cfg: QuadratureConfig = DEFAULT_QUAD):
    """Density in s of the next state given the current state t, for 0 < s < t.

    kind "V": one step of the V-chain under zeta = 0.
    kind "W": T_alpha given T_0 under zeta = 0.
    """
    a = check_alpha(alpha)
    if not 0 < s < t:
        raise DomainError("need 0 < s < t")
    ft = stable_density(a, t, cfg)
    fs = stable_density(a, s, cfg)
    if kind == "V":
        r = s / t
        lc = 2 * math.log(a) - gammaln((1 - a) / a)
        return math.exp(lc) * r ** (a - 1) * (1 - r ** a) ** ((1 - a) / a - 1) * fs / (t * t * ft)
    if kind == "W":
        return a / math.exp(gammaln(1 - a)) * (t - s) ** (-a) * fs / (t * ft)
    raise ParameterError(f"unknown transition kind {kind!r}")


def chain_csv_rows(states):
    """(k, T_hat, diversity, factor, waiting_time) per state."""
    rows = []
    for st in states:
        rows.append((st.k, st.T_hat, st.diversity,
                     st.factor if st.factor is not None else "",
                     st.waiting_time if st.waiting_time is not None else ""))
    return rows
