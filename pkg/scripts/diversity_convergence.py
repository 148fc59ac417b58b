"""K_n / n^alpha against its limit mean as n grows, for a few (alpha, theta).

    python3 scripts/diversity_convergence.py reps=2000 alphas=0.3,0.7
"""
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from pgsim.densities import neg_moment
from pgsim.partitions import sample_block_counts
from pgsim.rand_core import RngStream


@dataclass(frozen=True)
class Config:
    alphas: tuple = (0.3, 0.5, 0.7)
    thetas: tuple = (0.0, 1.0)
    sizes: tuple = (100, 1000, 10_000, 100_000)
    reps: int = 1000
    seed: int = 1


def parse(argv, cfg):
    kinds = {f.name: type(getattr(cfg, f.name)) for f in fields(cfg)}
    for arg in argv:
        key, val = arg.split("=", 1)
        if kinds[key] is tuple:
            val = tuple(float(v) if "." in v else int(v) for v in val.split(","))
        else:
            val = kinds[key](val)
        cfg = replace(cfg, **{key: val})
    return cfg


def main(cfg: Config):
    rng = RngStream(cfg.seed)
    print("alpha,theta,n,mean,limit,rel_error,se")
    for a in cfg.alphas:
        for theta in cfg.thetas:
            limit = neg_moment(a, theta, a)
            for n in cfg.sizes:
                d = sample_block_counts(a, theta, n, cfg.reps, rng) / n ** a
                m, se = d.mean(), d.std(ddof=1) / np.sqrt(cfg.reps)
                print(f"{a},{theta},{n},{m:.6f},{limit:.6f},{m / limit - 1:+.5f},{se:.6f}")


if __name__ == "__main__":
    main(parse(sys.argv[1:], Config()))
