"""Densities, survival functions, Laplace exponents and moments.

Quadrature is scipy's QUADPACK wrapper; Gamma ratios go through ``gammaln``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

from .errors import DomainError, ParameterError, QuadratureError
from .rand_core import RngStream, ZetaSpec, check_alpha, sample_stable

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-11
    max_subdivisions: int = 500

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ParameterError("quadrature tolerances must be > 0")


DEFAULT_QUAD = QuadratureConfig()


def quad(f, a, b, cfg: QuadratureConfig = DEFAULT_QUAD, what="integral", **kw):
    """scipy quad that raises QuadratureError when the error estimate is poor."""
    val, err, info = integrate.quad(
        f, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=cfg.max_subdivisions,
        full_output=1, **kw)[:3]
    # QUADPACK is pessimistic about roundoff; only give up on a real miss
    if err > 1e-7 * max(1.0, abs(val)) + 1e4 * cfg.abs_tol:
        raise QuadratureError(
            f"{what}: quad over [{a}, {b}] gave {val!r} with error estimate {err:.3g} "
            f"after {info.get('neval', '?')} evaluations")
    return val


def _vectorize(fn, x, *args):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return fn(float(arr), *args)
    return np.array([fn(float(v), *args) for v in arr.ravel()]).reshape(arr.shape)


def psi(alpha, omega, zeta=None):
    """Laplace exponent (1+w)^a - 1, or (zeta^(1/a) + w)^a - zeta when zeta is given."""
    a = check_alpha(alpha)
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ParameterError("omega must be >= 0")
    if zeta is None:
        out = np.expm1(a * np.log1p(w))
    else:
        if zeta < 0:
            raise ParameterError("zeta must be >= 0")
        out = (zeta ** (1 / a) + w) ** a - zeta
    return float(out) if out.ndim == 0 else out


# -- positive stable density -------------------------------------------------

def _log_kanter(a, u):
    return (a / (1 - a)) * np.log(np.sin(a * u)) + np.log(np.sin((1 - a) * u)) \
        - np.log(np.sin(u)) / (1 - a)


def _stable_series(a, x, terms=400):
    """Large-x expansion; returns None when it does not settle cleanly."""
    k = np.arange(1, terms + 1)
    logmag = gammaln(k * a + 1) - gammaln(k + 1) - (k * a + 1) * math.log(x)
    sgn = np.where(k % 2 == 1, 1.0, -1.0) * np.sin(k * math.pi * a)
    tv = sgn * np.exp(logmag)
    total = tv.sum()
    absum = np.abs(tv).sum()
    if not total > 0 or absum > 10 * total or np.exp(logmag[-1]) > 1e-17 * total:
        return None
    return total / math.pi


def _stable_pdf1(x, a, cfg):
    if x <= 0:
        return 0.0
    if x ** a > 8.0:
        v = _stable_series(a, x)
        if v is not None:
            return v
    c = x ** (-a / (1 - a))
    # integrand A e^{-A c} peaks where A(u) = 1/c
    lo, hi = 1e-12, math.pi - 1e-12
    target = -math.log(c)
    pts = None
    if _log_kanter(a, lo) < target < _log_kanter(a, hi):
        u_star = optimize.brentq(lambda u: _log_kanter(a, u) - target, lo, hi, xtol=1e-14)
        pts = [u_star]

    def g(u):
        la = _log_kanter(a, u)
        return math.exp(la - math.exp(la) * c)

    val = quad(g, 0.0, math.pi, cfg, "stable density", points=pts)
    return a / (1 - a) * x ** (-1 / (1 - a)) * val / math.pi


def stable_density(alpha, x, cfg: QuadratureConfig = DEFAULT_QUAD):
    """Density of the positive stable law with Laplace transform exp(-w^alpha).

    Zolotarev's single integral over (0, pi) for moderate x; the convergent
    power series in x^(-alpha) once x^alpha is large.
    """
    a = check_alpha(alpha)
    return _vectorize(_stable_pdf1, x, a, cfg)


def stable_cdf(alpha, x, cfg: QuadratureConfig = DEFAULT_QUAD):
    a = check_alpha(alpha)

    def one(v):
        if v <= 0:
            return 0.0
        c = v ** (-a / (1 - a))
        return quad(lambda u: math.exp(-math.exp(_log_kanter(a, u)) * c), 0.0, math.pi,
                    cfg, "stable cdf") / math.pi

    return _vectorize(one, x)


def tilted_stable_density(alpha, zeta, s, cfg: QuadratureConfig = DEFAULT_QUAD):
    """f_alpha(s) exp(-(s zeta^(1/alpha) - zeta)), the law of tau(zeta)/zeta^(1/alpha)."""
    a = check_alpha(alpha)
    s = np.asarray(s, dtype=float)
    return stable_density(a, s, cfg) * np.exp(zeta - s * zeta ** (1 / a))


# -- moments and tilted laws --------------------------------------------------

def log_c(alpha, theta):
    """log of Gamma(theta+1)/Gamma(theta/alpha+1), the normaliser of t^(-theta) f_alpha(t)."""
    return gammaln(theta + 1) - gammaln(theta / alpha + 1)


def neg_moment(alpha, theta, delta):
    """E[S^(-delta)] for S with density proportional to t^(-theta) f_alpha(t)."""
    a = check_alpha(alpha)
    if not theta > -a or not theta + delta > -a:
        raise ParameterError("need theta > -alpha and theta + delta > -alpha")
    return math.exp(gammaln((theta + delta) / a + 1) - gammaln(theta + delta + 1)
                    + log_c(a, theta))


def poly_tilted_density(alpha, theta, t, cfg: QuadratureConfig = DEFAULT_QUAD):
    a = check_alpha(alpha)
    t = np.asarray(t, dtype=float)
    return math.exp(log_c(a, theta)) * t ** (-theta) * stable_density(a, t, cfg)


def density_exp_over_tau(alpha, zeta, y):
    """Density of Exp(1)/tau(zeta) for fixed zeta > 0."""
    a = check_alpha(alpha)
    if not zeta > 0:
        raise ParameterError("zeta must be > 0")
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("y must be >= 0")
    out = a * zeta * (y + 1) ** (a - 1) * np.exp(-zeta * psi(a, y))
    return float(out) if out.ndim == 0 else out


def survival_exp_over_tau(alpha, zeta, y):
    a = check_alpha(alpha)
    out = np.exp(-zeta * psi(a, np.asarray(y, dtype=float)))
    return float(out) if np.ndim(out) == 0 else out


def _survival_i(y, a, theta, cfg):
    # alpha/Gamma(theta/alpha) * int_0^inf e^{-(r+y)^a} r^{theta-1} dr
    f = lambda r: math.exp(-(r + y) ** a)
    head = quad(f, 0.0, 1.0, cfg, "survival (i)", weight="alg", wvar=(theta - 1, 0.0))
    tail = quad(lambda r: f(r) * r ** (theta - 1), 1.0, np.inf, cfg, "survival (i)")
    return a * math.exp(-gammaln(theta / a)) * (head + tail)


def _survival_ii(y, a, theta, cfg):
    # 1/Gamma((theta+a)/a) * int_{y^a}^inf e^{-r} (r^{1/a} - y)^theta dr
    if y == 0:
        return 1.0
    lo = y ** a
    if theta >= 0:
        g = lambda r: math.exp(-r) * (r ** (1 / a) - y) ** theta
        val = quad(g, lo, np.inf, cfg, "survival (ii)", points=None)
    else:
        # pull out the endpoint singularity (r - lo)^theta as an algebraic weight
        def ratio(r):
            d = r - lo
            if d <= 0:
                return math.exp(-lo) * ((1 / a) * y ** (1 - a)) ** theta
            return math.exp(-r) * ((r ** (1 / a) - y) / d) ** theta
        head = quad(ratio, lo, lo + 1.0, cfg, "survival (ii)", weight="alg", wvar=(theta, 0.0))
        tail = quad(lambda r: math.exp(-r) * (r ** (1 / a) - y) ** theta, lo + 1.0, np.inf,
                    cfg, "survival (ii)")
        val = head + tail
    return math.exp(-gammaln((theta + a) / a)) * val


def survival_S(alpha, theta, y, cfg: QuadratureConfig = DEFAULT_QUAD, form="ii"):
    """P(Exp(1)/S > y) where S has density proportional to t^(-theta) f_alpha(t).

    form "i" needs theta > 0; form "ii" covers theta > -alpha.
    """
    a = check_alpha(alpha)
    if not theta > -a:
        raise ParameterError("need theta > -alpha")
    if np.any(np.asarray(y) < 0):
        raise DomainError("y must be >= 0")

    def one(v):
        if v == 0:
            return 1.0
        if theta == 0:
            return math.exp(-v ** a)
        if form == "i":
            if theta <= 0:
                raise ParameterError("form (i) needs theta > 0")
            return _survival_i(v, a, theta, cfg)
        if form == "ii":
            return _survival_ii(v, a, theta, cfg)
        raise ParameterError(f"unknown form {form!r}")

    return _vectorize(one, y)


def _density_E_raw(y, a, theta, form, cfg):
    if y <= 0:
        return 0.0
    if theta == 0:
        return a * y ** (a - 1) * math.exp(-y ** a)
    if form == "iii":
        th = theta - 1.0
        # derivative of the survival function; constant from the Laplace form
        const = math.exp(math.log(th + 1) + gammaln(th / a + 1) - gammaln((1 + th) / a + 1))
        return const * _survival_ii(y, a, th, cfg) if th != 0 else const * math.exp(-y ** a)
    if theta < 0:
        raise ParameterError("forms (i) and (ii) need theta >= 0")
    pre = y ** (theta + a - 1) * math.exp(-gammaln(theta / a))
    ya = y ** a
    if form == "i":
        # r -> t = (1 + r) y - y keeps the tail decay e^{-t^a} uniform in y
        f = lambda t: math.exp(-(t + y) ** a) * (t + y) ** (a - 1)
        head = quad(f, 0.0, 1.0, cfg, "E density (i)", weight="alg", wvar=(theta - 1, 0.0))
        tail = quad(lambda t: f(t) * t ** (theta - 1), 1.0, np.inf, cfg, "E density (i)")
        return a * a * math.exp(-gammaln(theta / a)) * (head + tail)
    if form == "ii":
        # substitute v = 1 + t so the (v^{1/a}-1)^{theta-1} singularity sits at 0
        def ratio(t):
            if t == 0:
                return math.exp(-ya) * (1 / a) ** (theta - 1)
            return math.exp(-(1 + t) * ya) * (((1 + t) ** (1 / a) - 1) / t) ** (theta - 1)
        head = quad(ratio, 0.0, 1.0, cfg, "E density (ii)", weight="alg", wvar=(theta - 1, 0.0))
        tail = quad(lambda v: math.exp(-v * ya) * (v ** (1 / a) - 1) ** (theta - 1),
                    2.0, np.inf, cfg, "E density (ii)")
        return a * pre * (head + tail)
    raise ParameterError(f"unknown form {form!r}")


@lru_cache(maxsize=256)
def _E_normaliser(a, theta, form):
    cfg = QuadratureConfig(1e-12, 1e-9)
    total = quad(lambda v: _density_E_raw(v, a, theta, form, cfg), 0.0, np.inf, cfg,
                 "E density normaliser")
    log.info("E density form %s at alpha=%g theta=%g: raw integral %.12g", form, a, theta, total)
    return total


def density_E(alpha, theta, y, cfg: QuadratureConfig = DEFAULT_QUAD, form="i", normalize=False):
    """Density of Exp(1)/S, S with density proportional to t^(-theta) f_alpha(t).

    Forms "i" and "ii" are two single-integral expressions (theta >= 0);
    form "iii" writes the density at theta as a multiple of the survival
    function at theta - 1 (theta > 1 - alpha). With ``normalize`` the value is
    divided by the numerically computed total mass of the chosen form.
    """
    a = check_alpha(alpha)
    if form == "iii" and not theta > 1 - a:
        raise ParameterError("form (iii) needs theta > 1 - alpha")
    if np.any(np.asarray(y) < 0):
        raise DomainError("y must be >= 0")
    scale = 1.0 / _E_normaliser(a, float(theta), form) if normalize else 1.0
    return _vectorize(lambda v: scale * _density_E_raw(v, a, theta, form, cfg), y)


# -- special densities ---------------------------------------------------------

def delta_density(alpha, x):
    """Density of S_alpha / S', S' polynomially tilted with theta = 1."""
    a = check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    xa = x ** a
    ang = np.arctan2(math.sin(math.pi * a), math.cos(math.pi * a) + xa)
    den = (x ** (2 * a) + 2 * xa * math.cos(math.pi * a) + 1) ** (1 / (2 * a))
    out = np.sin(ang / a) / den / math.pi
    return float(out) if out.ndim == 0 else out


def omega_density(alpha, y, q):
    """Density on (0,1) of the theta = 1 bridge evaluated at q."""
    a = check_alpha(alpha)
    if not 0 < q < 1:
        raise ParameterError("q must lie in (0,1)")
    y = np.asarray(y, dtype=float)
    c = ((1 - q) / q) ** (1 / a)
    out = delta_density(a, c * y / (1 - y)) / ((1 - y) * q ** (1 / a))
    return float(out) if np.ndim(out) == 0 else out


def rho_density(alpha, theta, p):
    """The merge-rate function Gamma((1+t)/a)/(Gamma((t+a)/a)Gamma((1-a)/a)) p^(1/a) (1-p)^(t/a).

    rho(p)/p^2 is the Beta((1-a)/a, (t+a)/a) density.
    """
    a = check_alpha(alpha)
    if not theta > -a:
        raise ParameterError("need theta > -alpha")
    p = np.asarray(p, dtype=float)
    lc = gammaln((1 + theta) / a) - gammaln((theta + a) / a) - gammaln((1 - a) / a)
    out = np.exp(lc) * p ** (1 / a) * (1 - p) ** (theta / a)
    return float(out) if out.ndim == 0 else out


def special_densities(which, params: dict, x):
    if which == "delta":
        return delta_density(params["alpha"], x)
    if which == "omega":
        return omega_density(params["alpha"], x, params["q"])
    if which == "rho":
        return rho_density(params["alpha"], params["theta"], x)
    raise ParameterError(f"unknown density {which!r}")


def h_mixing(alpha, zeta: ZetaSpec, s, kind="PG", n_mc=100_000, rng: RngStream | None = None):
    """Mixing function h with T having density h(s) f_alpha(s).

    Returns (value, standard_error); the error is 0 for closed forms and
    nonzero only for custom zeta laws, which are averaged by Monte Carlo.
    """
    a = check_alpha(alpha)
    s = float(s)
    if not s > 0:
        raise ParameterError("s must be > 0")
    if kind not in ("PG", "EPG"):
        raise ParameterError(f"unknown kind {kind!r}")

    def integrand(z):
        z = np.asarray(z, dtype=float)
        base = np.exp(-(s * z ** (1 / a) - z))
        if kind == "PG":
            return base
        return s * z ** (1 / a - 1) / a * base

    if zeta.variant in ("zero", "const"):
        return float(integrand(zeta.value)), 0.0
    if zeta.variant == "gamma":
        g = zeta.value
        if kind == "PG":
            lv = math.log(a) + gammaln(a * g) - gammaln(g) - a * g * math.log(s)
        else:
            lv = gammaln(a * g + 1 - a) - gammaln(g) + (a - a * g) * math.log(s)
        return math.exp(lv), 0.0
    rng = rng or RngStream(0)
    vals = integrand(zeta.sample(rng, n_mc))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_mc))


def mean_h_of_stable(alpha, zeta: ZetaSpec, kind, n, rng: RngStream):
    """Monte Carlo E[h(S_alpha)] with its standard error."""
    a = check_alpha(alpha)
    s = sample_stable(a, rng, n)
    vals = np.array([h_mixing(a, zeta, v, kind)[0] for v in s]) if zeta.variant == "custom" \
        else _h_vector(a, zeta, s, kind)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


def _h_vector(a, zeta, s, kind):
    if zeta.variant in ("zero", "const"):
        z = zeta.value
        base = np.exp(-(s * z ** (1 / a) - z))
        return base if kind == "PG" else s * z ** (1 / a - 1) / a * base
    g = zeta.value
    if kind == "PG":
        return np.exp(math.log(a) + gammaln(a * g) - gammaln(g) - a * g * np.log(s))
    return np.exp(gammaln(a * g + 1 - a) - gammaln(g) + (a - a * g) * np.log(s))
