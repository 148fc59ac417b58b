"""Command-line front end: ``pgsim <command> [flags]``.

Every command derives its random stream from ``--seed`` alone, so repeated
runs with the same flags write identical bytes. Exit status is 0 on success,
2 on bad parameters and 1 when ``verify`` records more failures than its
budget allows.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys

import numpy as np

from . import chains, densities, partitions, verify
from .bridges import build_bridge
from .errors import DomainError, ParameterError, QuadratureError, UnsupportedInputError
from .rand_core import RngStream, ZetaSpec
from .sticks import parse_kind, sample_sticks

# fixed task indices for seed splitting, one per command
TASKS = {"sample-sticks": 1, "sample-bridge": 2, "sample-partition": 3, "run-chain": 4,
         "density-table": 5, "verify": 6}


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    return "nan" if math.isnan(x) else format(x, ".17g")


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _rows_as_json(header, rows):
    return _json_text([dict(zip(header, (_json_val(v) for v in r))) for r in rows])


def _json_val(v):
    if isinstance(v, (int, np.integer)):
        return int(v)
    if v == "" or v is None:
        return None
    v = float(v)
    return None if math.isnan(v) else float(_fmt(v))


def _emit(args, text):
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)


def _table(args, header, rows):
    _emit(args, _csv_text(header, rows) if args.format == "csv" else _rows_as_json(header, rows))


def _rng(args):
    return RngStream(args.seed, 0).spawn(TASKS[args.command])


def _zeta(args):
    if args.zeta is None:
        return None
    z = ZetaSpec.parse(args.zeta)
    if z.variant == "custom":
        raise ParameterError("custom zeta laws are not available from the command line")
    return z


def _kind(args):
    return parse_kind(args.kind, args.alpha, args.theta, _zeta(args))


def _grid(text):
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise ParameterError("grid must look like start:stop:step") from exc
    if not step > 0 or hi < lo:
        raise ParameterError("grid needs step > 0 and stop >= start")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def cmd_sample_sticks(args):
    w = sample_sticks(_kind(args), args.n, args.size, _rng(args))
    rows = [(r, k + 1, w[r, k]) for r in range(w.shape[0]) for k in range(w.shape[1])]
    _table(args, ["rep", "k", "W"], rows)
    return f"{args.size} stream(s) of {args.n} sticks"


def cmd_sample_bridge(args):
    b = build_bridge(_kind(args), args.trunc, _rng(args))
    if args.format == "json":
        _emit(args, _json_text({"atoms": [[float(_fmt(u)), float(_fmt(p))] for u, p in b.atoms],
                                "dust": float(_fmt(b.dust))}))
    else:
        rows = [(u, p) for u, p in b.atoms] + [("dust", b.dust)]
        _emit(args, _csv_text(["location", "weight"], rows))
    return f"bridge with {len(b.locations)} atoms, dust {b.dust:.3g}"


def cmd_sample_partition(args):
    labels = partitions.sample_partitions(_kind(args), args.n, args.size, _rng(args),
                                          method=args.method)
    parts = [partitions.SetPartition.from_labels(r) for r in labels]
    if args.format == "json":
        _emit(args, _json_text([[list(b) for b in p.blocks] for p in parts]))
    else:
        width = max(p.block_count for p in parts)
        header = ["n", "K_n"] + [f"size_{i + 1}" for i in range(width)]
        rows = [[p.n, p.block_count] + p.sizes() + [""] * (width - p.block_count) for p in parts]
        _emit(args, _csv_text(header, rows))
    return f"{len(parts)} partition(s) of [{args.n}]"


def cmd_run_chain(args):
    z = _zeta(args) or ZetaSpec.zero()
    run = {"v": chains.run_v_chain, "w": chains.run_w_chain, "q": chains.run_q_chain}[args.chain]
    states = run(args.alpha, z, args.steps, _rng(args))
    _table(args, ["k", "T_hat", "diversity", "factor", "waiting_time"],
           chains.chain_csv_rows(states))
    return f"{args.chain}-chain, {args.steps} steps"


def _density_fn(args):
    a, th, which = args.alpha, args.theta, args.which
    if which == "stable":
        return lambda x: densities.stable_density(a, x) if x > 0 else 0.0
    if which == "tilted":
        z = _zeta(args)
        if z is None or z.variant not in ("zero", "const"):
            raise ParameterError("tilted needs --zeta zero or const:<v>")
        return lambda x: densities.tilted_stable_density(a, z.value, x) if x > 0 else 0.0
    if which == "poly":
        return lambda x: densities.poly_tilted_density(a, _need(th), x) if x > 0 else 0.0
    if which == "delta":
        return lambda x: densities.delta_density(a, x) if x >= 0 else 0.0
    if which == "omega":
        q = _need(args.q, "q")
        return lambda x: densities.omega_density(a, x, q) if 0 < x < 1 else 0.0
    if which == "rho":
        return lambda x: densities.rho_density(a, _need(th), x) if 0 <= x <= 1 else 0.0
    if which == "E":
        return lambda x: densities.density_E(a, _need(th), x, form=args.form) if x > 0 else 0.0
    if which == "survival":
        return lambda x: densities.survival_S(a, _need(th), x) if x > 0 else 1.0
    raise ParameterError(f"unknown density {which!r}")


def _need(v, name="theta"):
    if v is None:
        raise ParameterError(f"--{name} is required")
    return v


def cmd_density_table(args):
    fn = _density_fn(args)
    xs = _grid(args.grid)
    rows = []
    for x in xs:
        try:
            v = float(fn(float(x)))
        except (DomainError, QuadratureError, ZeroDivisionError, OverflowError):
            v = float("nan")
        rows.append((float(x), v))
    _table(args, ["x", "density" if args.which != "survival" else "survival"], rows)
    return f"{args.which} on {xs.size} grid points"


def cmd_verify(args):
    params = {"theta": 1.0 if args.theta is None else args.theta,
              "zeta": _zeta(args) or ZetaSpec.gamma(2.0)}
    if args.q is not None:
        params["q"] = args.q
    ids = args.ids.split(",") if args.ids else None
    reports = verify.run_suite(args.alpha, params, args.n, args.seed, args.significance, ids)
    _emit(args, verify.reports_to_json(reports) + "\n")
    failed = sum(not r.passed for r in reports)
    budget = verify.failure_budget(len(reports))
    args._status = 1 if failed > budget else 0
    return f"{len(reports) - failed}/{len(reports)} identities passed (budget {budget})"


def build_parser():
    p = argparse.ArgumentParser(prog="pgsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, kind=True):
        sp.add_argument("--alpha", type=float, required=True)
        sp.add_argument("--theta", type=float)
        sp.add_argument("--zeta", help='"zero", "const:<v>" or "gamma:<a>"')
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--output", "-o")
        sp.add_argument("--format", choices=["csv", "json"], default="csv")
        if kind:
            sp.add_argument("--kind", choices=["pd", "pg", "epg"], required=True)

    sp = sub.add_parser("sample-sticks", help="first n sticks of independent streams")
    common(sp)
    sp.add_argument("--n", type=int, default=10)
    sp.add_argument("--size", type=int, default=1)
    sp.set_defaults(func=cmd_sample_sticks)

    sp = sub.add_parser("sample-bridge", help="one random bridge")
    common(sp)
    sp.add_argument("--trunc", type=float, default=1e-6)
    sp.set_defaults(func=cmd_sample_bridge)

    sp = sub.add_parser("sample-partition", help="random partitions of [n]")
    common(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--size", type=int, default=1)
    sp.add_argument("--method", choices=["crp", "sticks"], default=None)
    sp.set_defaults(func=cmd_sample_partition)

    sp = sub.add_parser("run-chain", help="one run of the V-, W- or q-chain")
    common(sp, kind=False)
    sp.add_argument("--chain", choices=["v", "w", "q"], default="v")
    sp.add_argument("--steps", type=int, default=10)
    sp.set_defaults(func=cmd_run_chain)

    sp = sub.add_parser("density-table", help="density values on a grid")
    common(sp, kind=False)
    sp.add_argument("--which", required=True,
                    choices=["stable", "tilted", "poly", "delta", "omega", "rho", "E", "survival"])
    sp.add_argument("--grid", required=True, help="start:stop:step")
    sp.add_argument("--q", type=float)
    sp.add_argument("--form", choices=["i", "ii", "iii"], default="i")
    sp.set_defaults(func=cmd_density_table)

    sp = sub.add_parser("verify", help="run the identity suite, JSON report")
    common(sp, kind=False)
    sp.add_argument("--n", type=int, default=100_000)
    sp.add_argument("--q", type=float)
    sp.add_argument("--ids", help="comma-separated identity names")
    sp.add_argument("--significance", type=float, default=verify.DEFAULT_SIGNIFICANCE)
    sp.set_defaults(func=cmd_verify, format="json")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args._status = 0
    try:
        summary = args.func(args)
    except (ParameterError, DomainError, UnsupportedInputError) as exc:
        print(f"pgsim: error: {exc}", file=sys.stderr)
        return 2
    print(f"pgsim {args.command}: {summary}", file=sys.stderr)
    return args._status


if __name__ == "__main__":
    sys.exit(main())
