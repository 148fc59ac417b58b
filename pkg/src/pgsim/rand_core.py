"""Random streams and base samplers.

Everything here draws from an explicit :class:`RngStream`. Samplers accept an
optional ``size`` and return a float when it is ``None``, otherwise an array.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ParameterError

_MASK64 = (1 << 64) - 1


class RngStream:
    """Counter-based random stream keyed by ``(seed, stream_id)``.

    Wraps a Philox generator whose 128-bit key is the pair of 64-bit
    integers, so equal keys give bit-identical sequences and different
    stream ids give independent streams.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self.gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def spawn(self, task_index: int) -> "RngStream":
        """Child stream whose id hashes (seed, stream_id, task_index)."""
        return RngStream(self.seed, split_stream_id(self.seed, self.stream_id, task_index))

    def uniform(self, size=None):
        return self.gen.random(size)

    def exponential(self, size=None):
        return self.gen.standard_exponential(size)


def split_stream_id(seed: int, stream_id: int, task_index: int) -> int:
    h = hashlib.blake2b(digest_size=8)
    for v in (seed, stream_id, task_index):
        h.update((int(v) & _MASK64).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class StableIndex:
    alpha: float

    def __post_init__(self):
        check_alpha(self.alpha)

    def __float__(self):
        return float(self.alpha)


def check_alpha(alpha) -> float:
    a = float(alpha)
    if not 0.0 < a < 1.0:
        raise ParameterError(f"stable index must lie in (0,1), got {a}")
    return a


def _out(x, size):
    return float(x[0]) if size is None else x


def _n(size):
    return 1 if size is None else size


@dataclass(frozen=True)
class ZetaSpec:
    """Law of the mixing variable: zero, a constant, Gamma(a), or a custom sampler.

    A custom sampler is called as ``sampler(rng, size)``.
    """

    variant: str
    value: float = 0.0
    sampler: Callable | None = None

    def __post_init__(self):
        if self.variant not in ("zero", "const", "gamma", "custom"):
            raise ParameterError(f"unknown zeta variant {self.variant!r}")
        if self.variant == "const" and not self.value >= 0:
            raise ParameterError("constant zeta must be >= 0")
        if self.variant == "gamma" and not self.value > 0:
            raise ParameterError("gamma shape for zeta must be > 0")
        if self.variant == "custom" and self.sampler is None:
            raise ParameterError("custom zeta needs a sampler")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def const(cls, v):
        return cls("const", float(v))

    @classmethod
    def gamma(cls, a):
        # shape 0 is the point mass at 0 (theta = 0 in the PD embedding)
        if a == 0:
            return cls.zero()
        return cls("gamma", float(a))

    @classmethod
    def custom(cls, sampler):
        return cls("custom", sampler=sampler)

    @classmethod
    def parse(cls, text: str) -> "ZetaSpec":
        """Parse ``zero``, ``const:<v>`` or ``gamma:<a>``."""
        text = text.strip()
        if text == "zero":
            return cls.zero()
        head, sep, tail = text.partition(":")
        if not sep:
            raise ParameterError(f"bad zeta spec {text!r}")
        try:
            v = float(tail)
        except ValueError:
            raise ParameterError(f"bad zeta value in {text!r}") from None
        if head == "const":
            return cls.const(v)
        if head == "gamma":
            return cls.gamma(v)
        raise ParameterError(f"bad zeta spec {text!r}")

    def __str__(self):
        if self.variant == "zero":
            return "zero"
        if self.variant == "custom":
            return "custom"
        return f"{self.variant}:{self.value!r}"

    @property
    def is_zero(self):
        return self.variant == "zero" or (self.variant == "const" and self.value == 0)

    def sample(self, rng: RngStream, size=None):
        if self.variant == "zero":
            x = np.zeros(_n(size))
        elif self.variant == "const":
            x = np.full(_n(size), self.value)
        elif self.variant == "gamma":
            x = sample_gamma(self.value, rng, _n(size))
        else:
            x = np.asarray(self.sampler(rng, _n(size)), dtype=float).reshape(-1)
        return _out(x, size)


def sample_gamma(shape, rng: RngStream, size=None):
    """Gamma(shape, 1) variates; shape may be an array broadcast against size."""
    a = np.asarray(shape, dtype=float)
    if np.any(~(a > 0)):
        raise ParameterError("gamma shape must be > 0")
    scalar = size is None and a.ndim == 0
    a = np.full(_n(size), float(a)) if a.ndim == 0 else a.ravel()
    small = a < 1.0
    g = rng.gen.standard_gamma(np.where(small, a + 1.0, a))
    if np.any(small):
        # boost: Gamma(a) = Gamma(a+1) * U^(1/a)
        u = rng.uniform(int(small.sum()))
        g[small] = g[small] * np.exp(np.log(u) / a[small])
    return float(g[0]) if scalar else g


def sample_beta(a, b, rng: RngStream, size=None):
    a_ = np.asarray(a, dtype=float)
    b_ = np.asarray(b, dtype=float)
    if np.any(~(a_ > 0)) or np.any(~(b_ > 0)):
        raise ParameterError("beta parameters must be > 0")
    x = rng.gen.beta(a_, b_, size=None if size is None else size)
    if size is None:
        return float(x)
    return np.asarray(x, dtype=float)


def sample_stable(alpha, rng: RngStream, size=None):
    """Positive stable variates with E[exp(-w S)] = exp(-w**alpha).

    Kanter's representation: S = (A(U)/E)^((1-a)/a), U ~ Unif(0, pi),
    E ~ Exp(1).
    """
    a = check_alpha(alpha)
    n = _n(size)
    u = math.pi * rng.uniform(n)
    e = rng.exponential(n)
    log_a = (a / (1 - a)) * np.log(np.sin(a * u)) + np.log(np.sin((1 - a) * u)) \
        - np.log(np.sin(u)) / (1 - a)
    s = np.exp((1 - a) / a * (log_a - np.log(e)))
    return _out(s, size)


def _tau_blocks(a, c, rng):
    """tau(c) for each entry of c <= 1 by rejection from the scaled stable law."""
    out = np.empty(c.shape[0])
    todo = np.arange(c.shape[0])
    scale = c ** (1.0 / a)
    while todo.size:
        x = scale[todo] * sample_stable(a, rng, todo.size)
        ok = rng.uniform(todo.size) <= np.exp(-x)
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    return out


def sample_tau(alpha, zeta, rng: RngStream, size=None):
    """Generalized gamma subordinator value tau(zeta).

    Its Laplace transform is exp(-zeta*((1+w)^alpha - 1)). The interval
    (0, zeta) is cut into m = max(1, ceil(zeta)) pieces; each piece is a
    stable draw accepted with probability exp(-draw), so the acceptance rate
    per piece is at least exp(-1).
    """
    a = check_alpha(alpha)
    z = np.asarray(zeta, dtype=float)
    if np.any(z < 0) or np.any(~np.isfinite(z)):
        raise ParameterError("zeta must be finite and >= 0")
    n = _n(size) if z.ndim == 0 else z.size
    z = np.broadcast_to(z, (n,)).ravel() if z.ndim == 0 else z.ravel()
    tau = np.zeros(n)
    pos = np.flatnonzero(z > 0)
    if pos.size:
        zp = z[pos]
        m = np.maximum(1, np.ceil(zp)).astype(np.int64)
        owner = np.repeat(np.arange(pos.size), m)
        pieces = _tau_blocks(a, (zp / m)[owner], rng)
        tau[pos] = np.bincount(owner, weights=pieces, minlength=pos.size)
    return float(tau[0]) if size is None and np.ndim(zeta) == 0 else tau


def sample_tilted_stable(alpha, zeta, rng: RngStream, size=None):
    """T = tau(zeta)/zeta^(1/alpha), density f_alpha(s) exp(-(s zeta^(1/alpha) - zeta)).

    At zeta = 0 this is the positive stable law.
    """
    a = check_alpha(alpha)
    z = np.asarray(zeta, dtype=float)
    if np.any(z < 0):
        raise ParameterError("zeta must be >= 0")
    n = _n(size) if z.ndim == 0 else z.size
    z = np.broadcast_to(z, (n,)).ravel() if z.ndim == 0 else z.ravel()
    t = np.empty(n)
    zero = z == 0
    if zero.any():
        t[zero] = sample_stable(a, rng, int(zero.sum()))
    if (~zero).any():
        zp = z[~zero]
        t[~zero] = sample_tau(a, zp, rng) / zp ** (1.0 / a)
    return float(t[0]) if size is None and np.ndim(zeta) == 0 else t


def sample_s_alpha_theta(alpha, theta, rng: RngStream, size=None, route="pg"):
    """Polynomially tilted stable S with density proportional to t^(-theta) f_alpha(t).

    route "pg" mixes the tilted stable over zeta ~ Gamma(theta/alpha)
    (theta >= 0). route "epg" uses tau(eps + zeta)/zeta^(1/alpha) with
    eps ~ Gamma((1-alpha)/alpha), zeta ~ Gamma((theta+alpha)/alpha), valid
    for theta > -alpha.
    """
    a = check_alpha(alpha)
    n = _n(size)
    if route == "pg":
        if theta < 0:
            raise ParameterError("pg route needs theta >= 0")
        if theta == 0:
            return sample_stable(a, rng, size)
        z = sample_gamma(theta / a, rng, n)
        return _out(sample_tilted_stable(a, z, rng), size)
    if route == "epg":
        if not theta > -a:
            raise ParameterError("need theta > -alpha")
        z = sample_gamma((theta + a) / a, rng, n)
        eps = sample_gamma((1 - a) / a, rng, n)
        s = sample_tau(a, eps + z, rng) / z ** (1.0 / a)
        return _out(s, size)
    raise ParameterError(f"unknown route {route!r}")
