"""Goodness-of-fit helpers, the exact PD EPPF and a registry of distributional
identities, each sampled from both sides and compared by KS or chi-square."""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .errors import ParameterError, UnsupportedInputError
from .partitions import partition_keys, sample_partitions, set_partitions
from .rand_core import (RngStream, ZetaSpec, check_alpha, sample_beta, sample_gamma,
                        sample_s_alpha_theta, sample_stable, sample_tau)
from .sticks import EPG, PG, sample_sticks

DEFAULT_SIGNIFICANCE = 1e-3


@dataclass
class TestReport:
    __test__ = False  # not a pytest class

    identity_id: str
    statistic: float
    p_value: float
    n_samples: int
    seed: int | None = None
    verdict: str = "pass"
    notes: str = ""
    significance: float = field(default=DEFAULT_SIGNIFICANCE, repr=False)

    def __post_init__(self):
        self.p_value = float(min(1.0, max(0.0, self.p_value)))
        self.statistic = float(self.statistic)
        self.verdict = "pass" if self.p_value > self.significance else "fail"

    @property
    def passed(self):
        return self.verdict == "pass"

    def to_dict(self):
        d = asdict(self)
        d.pop("significance")
        return d


def _nonempty(*xs):
    for x in xs:
        if np.size(x) == 0:
            raise ParameterError("empty sample")


def ks_two_sample(xs, ys, identity_id="ks2", significance=DEFAULT_SIGNIFICANCE) -> TestReport:
    xs, ys = np.asarray(xs, float).ravel(), np.asarray(ys, float).ravel()
    _nonempty(xs, ys)
    r = stats.ks_2samp(xs, ys, method="asymp")
    return TestReport(identity_id, r.statistic, r.pvalue, min(xs.size, ys.size),
                      significance=significance)


def ks_one_sample(xs, cdf, identity_id="ks1", significance=DEFAULT_SIGNIFICANCE) -> TestReport:
    xs = np.asarray(xs, float).ravel()
    _nonempty(xs)
    r = stats.kstest(xs, cdf, method="asymp")
    return TestReport(identity_id, r.statistic, r.pvalue, xs.size, significance=significance)


def _pool(observed, expected, min_expected=5.0):
    """Merge neighbouring cells, smallest first, until every expected count
    reaches ``min_expected``."""
    obs, exp = list(map(float, observed)), list(map(float, expected))
    while len(exp) > 1 and min(exp) < min_expected:
        i = int(np.argmin(exp))
        j = i + 1 if i == 0 else (i - 1 if i == len(exp) - 1 or exp[i - 1] <= exp[i + 1] else i + 1)
        lo, hi = min(i, j), max(i, j)
        obs[lo] += obs[hi]
        exp[lo] += exp[hi]
        del obs[hi], exp[hi]
    return np.array(obs), np.array(exp)


def chi_square_pmf(observed, pmf, identity_id="chi2", significance=DEFAULT_SIGNIFICANCE,
                   min_expected=5.0) -> TestReport:
    observed = np.asarray(observed, float)
    pmf = np.asarray(pmf, float)
    if observed.shape != pmf.shape:
        raise ParameterError("observed and pmf differ in length")
    if abs(pmf.sum() - 1) > 1e-9:
        raise ParameterError(f"pmf sums to {pmf.sum()!r}")
    n = observed.sum()
    obs, exp = _pool(observed, n * pmf, min_expected)
    if obs.size < 2:
        return TestReport(identity_id, 0.0, 1.0, int(n), notes="one cell after pooling",
                          significance=significance)
    r = stats.chisquare(obs, exp)
    return TestReport(identity_id, r.statistic, r.pvalue, int(n),
                      notes=f"{obs.size} cells", significance=significance)


def chi_square_two_sample(xs, ys, identity_id="chi2-2s", significance=DEFAULT_SIGNIFICANCE):
    """Homogeneity test for two samples of hashable categories."""
    cats = sorted(set(xs) | set(ys))
    idx = {c: i for i, c in enumerate(cats)}
    table = np.zeros((2, len(cats)))
    for row, sample in enumerate((xs, ys)):
        np.add.at(table[row], [idx[c] for c in sample], 1)
    # pool rare categories into one column
    tot = table.sum(axis=0)
    keep = tot >= 10
    if (~keep).any():
        table = np.column_stack([table[:, keep], table[:, ~keep].sum(axis=1)])
    if table.shape[1] < 2:
        return TestReport(identity_id, 0.0, 1.0, len(xs), significance=significance)
    chi2, p, _, _ = stats.chi2_contingency(table, correction=False)
    return TestReport(identity_id, chi2, p, min(len(xs), len(ys)),
                      notes=f"{table.shape[1]} cells", significance=significance)


def bonferroni(reports, identity_id, significance=DEFAULT_SIGNIFICANCE) -> TestReport:
    worst = min(reports, key=lambda r: r.p_value)
    return TestReport(identity_id, worst.statistic, len(reports) * worst.p_value,
                      min(r.n_samples for r in reports),
                      notes="; ".join(f"{r.identity_id}: p={r.p_value:.3g}" for r in reports),
                      significance=significance)


def tv_distance(freq: dict, pmf: dict) -> float:
    keys = set(freq) | set(pmf)
    return 0.5 * sum(abs(freq.get(k, 0.0) - pmf.get(k, 0.0)) for k in keys)


def eppf_value(alpha, theta, sizes) -> float:
    """PD(alpha, theta) probability of one particular partition with these block sizes."""
    sizes = [int(s) for s in sizes]
    n, k = sum(sizes), len(sizes)
    lp = sum(math.log(theta + i * alpha) for i in range(1, k)) if k > 1 else 0.0
    lp -= sum(math.log(theta + i) for i in range(1, n))
    for s in sizes:
        lp += sum(math.log(j - alpha) for j in range(1, s))
    return math.exp(lp)


def eppf_oracle(alpha, theta, n: int) -> dict:
    """Exact PD(alpha, theta) law on partitions of [n], keyed by label tuples."""
    if not 0 <= alpha < 1 or not theta > -alpha:
        raise ParameterError("need 0 <= alpha < 1 and theta > -alpha")
    if not 1 <= n <= 7:
        raise UnsupportedInputError("eppf_oracle enumerates n <= 7 only")
    out = {}
    for lab in set_partitions(n):
        out[lab] = eppf_value(alpha, theta, np.bincount(lab))
    return out


def empirical_partition_law(labels) -> dict:
    keys = partition_keys(labels)
    n = len(keys)
    out = {}
    for k in keys:
        out[k] = out.get(k, 0) + 1
    return {tuple(np.frombuffer(k, dtype=np.int8).tolist()): c / n for k, c in out.items()}


# -- identities ---------------------------------------------------------------

def _shift_zeta(z: ZetaSpec) -> ZetaSpec:
    if z.variant == "gamma":
        return ZetaSpec.gamma(z.value + 1)
    if z.variant == "custom":
        raise ParameterError("cannot perturb a custom zeta")
    return ZetaSpec.const(z.value + 1)


def _zeta(params):
    z = params.get("zeta", ZetaSpec.gamma(2.0))
    return ZetaSpec.parse(z) if isinstance(z, str) else z


def _theta(params):
    return float(params.get("theta", 1.0))


def _id_prop21(a, p, n, rng, control):
    theta = _theta(p)
    if theta <= 0:
        raise ParameterError("needs theta > 0")
    left = sample_tau(a, sample_gamma(theta / a, rng, n), rng)
    shape = theta + 0.5 if control else theta
    return ks_one_sample(left, stats.gamma(shape).cdf)


def _id_keydd(a, p, n, rng, control):
    z = _zeta(p)
    zl = np.asarray(z.sample(rng, n), float)
    left = rng.exponential(n) * _scaled_inverse_tau(a, zl, rng)
    zr = np.asarray((_shift_zeta(z) if control else z).sample(rng, n), float)
    right = (rng.exponential(n) + zr) ** (1 / a) - zr ** (1 / a)
    return ks_two_sample(left, right)


def _scaled_inverse_tau(a, z, rng):
    """zeta^(1/a)/tau(zeta), which is 1/S at zeta = 0."""
    out = np.empty(z.size)
    zero = z == 0
    out[~zero] = z[~zero] ** (1 / a) / sample_tau(a, z[~zero], rng)
    out[zero] = 1 / sample_stable(a, rng, int(zero.sum()))
    return out


def _id_keydd2(a, p, n, rng, control):
    z = _zeta(p)
    zl = np.asarray(z.sample(rng, n), float)
    if np.any(zl <= 0):
        raise ParameterError("keydd2 needs zeta > 0")
    left = rng.exponential(n) / sample_tau(a, zl, rng)
    zr = np.asarray((_shift_zeta(z) if control else z).sample(rng, n), float)
    right = ((rng.exponential(n) + zr) / zr) ** (1 / a) - 1
    return ks_two_sample(left, right)


def _S(a, theta, rng, n):
    return sample_s_alpha_theta(a, theta, rng, n, route="pg" if theta >= 0 else "epg")


def _id_ppy(a, p, n, rng, control):
    theta = _theta(p)
    left = sample_s_alpha_theta(a, theta, rng, n, route="epg")
    t = theta + 0.5 if control else theta
    right = _S(a, t + a, rng, n) / sample_beta(t + a, 1 - a, rng, n)
    return ks_two_sample(left, right)


def _id_james(a, p, n, rng, control):
    theta = _theta(p)
    left = sample_s_alpha_theta(a, theta, rng, n, route="epg")
    t = theta + 0.5 if control else theta
    b = sample_beta((t + a) / a, (1 - a) / a, rng, n)
    right = _S(a, t + 1, rng, n) * b ** (-1 / a)
    return ks_two_sample(left, right)


def _id_gammaid(a, p, n, rng, control):
    theta = _theta(p)
    ref = sample_gamma((theta + a) / a, rng, n) ** (1 / a)
    t = theta + 0.5 if control else theta
    s1 = sample_gamma(t + a, rng, n) / _S(a, t + a, rng, n)
    s2 = sample_gamma(1 + t, rng, n) / sample_s_alpha_theta(a, t, rng, n, route="epg")
    return bonferroni([ks_two_sample(ref, s1, "theta+alpha form"),
                       ks_two_sample(ref, s2, "1+theta form")], "gammaid")


def _E(a, theta, rng, n):
    return rng.exponential(n) / sample_s_alpha_theta(a, theta, rng, n, route="epg")


def _id_biascase1(a, p, n, rng, control):
    theta = _theta(p)
    ref = _E(a, theta, rng, n)
    t = theta + 0.5 if control else theta
    r1 = sample_beta(t + a, 1 - a, rng, n) * _E(a, t + a, rng, n)
    r2 = sample_beta((t + a) / a, (1 - a) / a, rng, n) ** (1 / a) * _E(a, 1 + t, rng, n)
    return bonferroni([ks_two_sample(ref, r1, "beta form"),
                       ks_two_sample(ref, r2, "beta^(1/alpha) form")], "biascase1")


def _id_recursive(a, p, n, rng, control):
    z = _zeta(p)
    lifted = ZetaSpec.custom(lambda r, size: r.exponential(size) + np.asarray(z.sample(r, size)))
    zr = _shift_zeta(z) if control else z
    m = max(1, n // 4)
    lp = sample_partitions(EPG(a, lifted), 4, m, rng)
    rp = sample_partitions(PG(a, zr), 4, m, rng)
    part = chi_square_two_sample(partition_keys(lp), partition_keys(rp), "partitions of [4]")
    # EPG atom mass tau(eps)/(tau(eps) + tau(e + zeta)) against the first PG pick
    base = np.asarray(lifted.sample(rng, n), float)
    te = sample_tau(a, sample_gamma((1 - a) / a, rng, n), rng)
    atom = te / (te + sample_tau(a, base, rng))
    pick = 1 - sample_sticks(PG(a, zr), 1, n, rng)[:, 0]
    return bonferroni([part, ks_two_sample(atom, pick, "atom vs first stick")],
                      "recursive-EPG-PG")


def _id_rk_jump(a, p, n, rng, control, mean_count=50.0):
    # ranked jumps of a stable subordinator above delta, Levy tail s^(-alpha)
    delta = mean_count ** (-1 / a)
    counts = rng.gen.poisson(mean_count, n)
    counts = np.maximum(counts, 3)
    top = np.empty((n, 3))
    for c in np.unique(counts):
        sel = counts == c
        j = delta * rng.uniform((int(sel.sum()), int(c))) ** (-1 / a)
        top[sel] = -np.sort(-j, axis=1)[:, :3]
    x1 = top[:, 0] ** (-a)
    ratios = top[:, 1:] / top[:, :2]
    # the first jump's -alpha power is a unit exponential, i.e. zeta ~ Gamma(1)
    z = ZetaSpec.gamma(2.0 if control else 1.0)
    z0 = np.asarray(z.sample(rng, n), float)
    e = rng.exponential((n, 2))
    path = np.column_stack([z0, z0[:, None] + np.cumsum(e, axis=1)])
    R = (path[:, :-1] / path[:, 1:]) ** (1 / a)
    return bonferroni([ks_two_sample(x1, z0, "first level"),
                       ks_two_sample(ratios[:, 0], R[:, 0], "R_1"),
                       ks_two_sample(ratios[:, 1], R[:, 1], "R_2")],
                      "Rk-jump-correspondence")


def pd_bridge_at(alpha, theta, q, size, rng: RngStream):
    """F(q) for PD(alpha, theta) bridges via tau(q G)/tau(G), G ~ Gamma(theta/alpha)."""
    g = sample_gamma(theta / alpha, rng, size)
    head = sample_tau(alpha, q * g, rng)
    return head / (head + sample_tau(alpha, (1 - q) * g, rng))


def _id_p_alpha2(a, p, n, rng, control):
    q = float(p.get("q", 0.3))
    left = pd_bridge_at(a, 2.0, q, n, rng)
    qr = q + 0.1 if control else q
    u = rng.uniform(n)
    right = u * pd_bridge_at(a, 1.0, qr, n, rng) + (1 - u) * pd_bridge_at(a, 1.0, qr, n, rng)
    return ks_two_sample(left, right)


@dataclass(frozen=True)
class Identity:
    name: str
    run: Callable
    needs: tuple


REGISTRY: dict[str, Identity] = {}
ALIASES = {"PY-prop21": "PY-prop21-gamma-total-mass", "PPYfundid": "PPY-fundid",
           "Jamesfundid": "James-fundid", "recursiverelations": "recursive-EPG-PG",
           "P-alpha2": "P-alpha2-uniform-mixture"}

for _name, _fn, _needs in [
    ("PY-prop21-gamma-total-mass", _id_prop21, ("theta",)),
    ("keydd", _id_keydd, ("zeta",)),
    ("keydd2", _id_keydd2, ("zeta",)),
    ("PPY-fundid", _id_ppy, ("theta",)),
    ("James-fundid", _id_james, ("theta",)),
    ("gammaid", _id_gammaid, ("theta",)),
    ("biascase1", _id_biascase1, ("theta",)),
    ("recursive-EPG-PG", _id_recursive, ("zeta",)),
    ("Rk-jump-correspondence", _id_rk_jump, ()),
    ("P-alpha2-uniform-mixture", _id_p_alpha2, ("q",)),
]:
    REGISTRY[_name] = Identity(_name, _fn, _needs)


def resolve(identity_id: str) -> Identity:
    name = ALIASES.get(identity_id, identity_id)
    if name not in REGISTRY:
        raise ParameterError(f"unknown identity {identity_id!r}")
    return REGISTRY[name]


def run_identity(identity_id: str, alpha, params: dict | None, n_samples: int, rng: RngStream,
                 significance=DEFAULT_SIGNIFICANCE, negative_control=False) -> TestReport:
    ident = resolve(identity_id)
    a = check_alpha(alpha)
    if n_samples < 10:
        raise ParameterError("n_samples must be >= 10")
    rep = ident.run(a, dict(params or {}), int(n_samples), rng, negative_control)
    notes = rep.notes
    if negative_control:
        notes = ("negative control; " + notes).rstrip("; ")
    return TestReport(ident.name, rep.statistic, rep.p_value, rep.n_samples, rng.seed,
                      notes=notes, significance=significance)


def failure_budget(n_runs: int) -> int:
    """Allowed failures: one per started block of 100 runs."""
    return max(1, math.ceil(n_runs / 100))


def _suite_task(args):
    name, alpha, params, n, seed, idx, significance = args
    return run_identity(name, alpha, params, n, RngStream(seed, 0).spawn(idx), significance)


def run_suite(alpha, params: dict, n_samples: int, seed: int, significance=DEFAULT_SIGNIFICANCE,
              ids=None, threads=None) -> list[TestReport]:
    """Run the registry (or ``ids``) with one child stream per identity.

    Reports come back in registry order whatever the worker count;
    PGSIM_THREADS caps the number of worker processes.
    """
    names = list(REGISTRY) if ids is None else [resolve(i).name for i in ids]
    order = list(REGISTRY)
    tasks = [(nm, alpha, params, n_samples, seed, order.index(nm), significance) for nm in names]
    if threads is None:
        threads = int(os.environ.get("PGSIM_THREADS", "1") or 1)
    threads = max(1, min(threads, len(tasks)))
    if threads == 1:
        return [_suite_task(t) for t in tasks]
    with ProcessPoolExecutor(threads) as ex:
        return list(ex.map(_suite_task, tasks))


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)
