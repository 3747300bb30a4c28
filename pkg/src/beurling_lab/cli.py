"""Command line entry point: ``lab run``, ``lab eval`` and ``lab beta``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from .besov import BesovError
from .betafit import BetaError, beta_profile
from .beurling import OPS, BeurlingError, evaluate
from .geometry import GeometryError, GraphDomain, HalfPlane, dyadic_tree
from .lab import ConfigError, ExperimentConfig, load_domain, run

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 2, 3


def _point(s: str) -> complex:
    try:
        a, b = (float(t) for t in s.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected a,b") from exc
    return complex(a, b)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lab", description="Beurling transform experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run the experiments of a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help="output directory (overrides the config)")
    r.add_argument("--threads", type=int, default=None)

    e = sub.add_parser("eval", help="evaluate B chi or a derivative at one point")
    e.add_argument("--domain", required=True)
    e.add_argument("--op", choices=OPS, required=True)
    e.add_argument("--z", type=_point, required=True, help="point as a,b")
    e.add_argument("--eps", type=float, default=None)
    e.add_argument("--method", choices=("area", "boundary"), default="area")

    b = sub.add_parser("beta", help="write the beta_1 profile of a boundary")
    b.add_argument("--domain", required=True)
    b.add_argument("--depth", type=int, required=True)
    b.add_argument("--out", required=True)
    return ap


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = dataclasses.replace(cfg, threads=args.threads)
    _, errors = run(cfg, args.out)
    for err in errors:
        print(f"failed: {err['domain_id']}: {err['error']}", file=sys.stderr)
    return EXIT_PARTIAL if errors else EXIT_OK


def _cmd_eval(args) -> int:
    dom = load_domain(args.domain)
    val, err = evaluate(dom, args.op, args.z, eps=args.eps, method=args.method)
    val = complex(val)
    print(f"{args.op}({args.z.real:g},{args.z.imag:g}) = {val.real:.15g} {val.imag:+.15g}i  "
          f"err ~ {err:.3g}")
    return EXIT_OK


def _cmd_beta(args) -> int:
    dom = load_domain(args.domain)
    if isinstance(dom, HalfPlane):
        raise ConfigError("a half plane has no finite dyadic carrier; all betas vanish")
    if args.depth < 0:
        raise ConfigError("--depth must be non-negative")
    tree = dyadic_tree(dom, args.depth)
    src = dom.graph if isinstance(dom, GraphDomain) else dom
    beta_profile(src, tree, args.depth).to_csv(args.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(all="ignore")
    try:
        return {"run": _cmd_run, "eval": _cmd_eval, "beta": _cmd_beta}[args.cmd](args)
    except (ConfigError, GeometryError, BesovError, BetaError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BeurlingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
