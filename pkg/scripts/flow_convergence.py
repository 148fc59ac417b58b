"""Largest atom of the n-step flow of simple bridges against a direct PD draw.

Prints the two-sample KS statistic and p-value for each n; the statistic
should fall to the sampling-noise floor as n grows.

    python3 scripts/flow_convergence.py size=5000 steps=1,5,20,50
"""
import sys
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy import stats

from pgsim.bridges import flow_bridge
from pgsim.rand_core import RngStream, ZetaSpec
from pgsim.sticks import PD, largest_weight


@dataclass(frozen=True)
class Config:
    alpha: float = 0.5
    theta: float = 0.5
    steps: tuple = (1, 2, 5, 10, 20, 50)
    size: int = 4000
    seed: int = 2


def parse(argv, cfg):
    kinds = {f.name: type(getattr(cfg, f.name)) for f in fields(cfg)}
    for arg in argv:
        key, val = arg.split("=", 1)
        val = tuple(int(v) for v in val.split(",")) if kinds[key] is tuple else kinds[key](val)
        cfg = replace(cfg, **{key: val})
    return cfg


def main(cfg: Config):
    rng = RngStream(cfg.seed)
    a, theta = cfg.alpha, cfg.theta
    zeta = ZetaSpec.gamma((theta + a) / a)
    direct = np.array([largest_weight(PD(a, theta), rng) for _ in range(cfg.size)])
    print("steps,mean_largest,mean_dust,ks_stat,ks_p")
    for n in cfg.steps:
        bridges = [flow_bridge(a, zeta, n, rng) for _ in range(cfg.size)]
        big = np.array([b.largest_atom() for b in bridges])
        dust = np.mean([b.dust for b in bridges])
        r = stats.ks_2samp(big, direct)
        print(f"{n},{big.mean():.5f},{dust:.5f},{r.statistic:.5f},{r.pvalue:.4g}")
    print(f"direct,{direct.mean():.5f},0,,")


if __name__ == "__main__":
    main(parse(sys.argv[1:], Config()))
