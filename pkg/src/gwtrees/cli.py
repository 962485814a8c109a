"""Command-line entry point wiring laws, samplers, exact tables and experiments.

Subcommands: sample, exact, stable, verify, codings.  Reports are JSON with a
"schema" key; curves are CSV with a "# schema:" comment line.  Every emitted
report carries the seed; when no seed is given one is generated and printed.
Exit status: 0 success, 1 failed verification gate, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import secrets
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import codings, exactlaw, limits, sampler, stable
from .offspring import (
    OffspringLaw,
    law_from_spec,
    make_geometric,
    make_stable_family,
    step_law,
)
from .report import ExperimentReport

CSV_SCHEMA = "gwtrees.csv/1"


def _out_path(raw: str) -> Path:
    """Relative outputs may be redirected via GWTREES_OUT_DIR (the only env knob)."""
    base = os.environ.get("GWTREES_OUT_DIR")
    p = Path(raw)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _load_law(spec: str) -> OffspringLaw:
    """'geometric', 'geometric:p', 'stable:theta', or a JSON law file path."""
    if spec.endswith(".json") or os.path.sep in spec or os.path.exists(spec):
        with open(spec) as fh:
            return law_from_spec(json.load(fh))
    name, _, param = spec.partition(":")
    if name == "geometric":
        return make_geometric(float(param) if param else 0.5)
    if name == "stable":
        return make_stable_family(float(param) if param else 1.5)
    raise ValueError(f"unknown law {spec!r} (use geometric[:p], stable[:theta], or a file)")


def _write_csv(path: Path, header: List[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {CSV_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _resolve_seed(args) -> int:
    if args.seed is None:
        seed = secrets.randbits(48)
        print(f"seed: {seed} (generated)", file=sys.stderr)
        return seed
    return args.seed


# -- sample -----------------------------------------------------------------------


def _cmd_sample(args) -> int:
    law = _load_law(args.law)
    seed = _resolve_seed(args)
    rows = []
    for rep in range(args.count):
        rng = sampler.derive_rng(seed, rep)
        tree = sampler.sample_conditioned(law, args.n, method=args.method, rng=rng)
        if args.emit == "tree":
            rows += [(rep, i, int(c)) for i, c in enumerate(tree.child_counts)]
        elif args.emit == "walk":
            w = codings.walk_from_tree(tree).values
            rows += [(rep, i, int(v)) for i, v in enumerate(w)]
        elif args.emit == "height":
            h = codings.height_from_tree(tree).values
            rows += [(rep, i, int(v)) for i, v in enumerate(h)]
        elif args.emit == "contour":
            c = codings.contour_from_tree(tree).values
            rows += [(rep, t, int(v)) for t, v in enumerate(c)]
    col = {"tree": "child_count", "walk": "W", "height": "H", "contour": "C"}[args.emit]
    tcol = "time" if args.emit == "contour" else "index"
    _write_csv(_out_path(args.out), ["sample", tcol, col], rows)
    return 0


# -- exact ------------------------------------------------------------------------


def _cmd_exact(args) -> int:
    law = _load_law(args.law)
    step = step_law(law)
    out = {"schema": "gwtrees.exact/1", "law": args.law, "what": args.what, "n": args.n}
    if args.what == "walk":
        table = exactlaw.walk_pmf(step, args.n)
        out["offset"] = table.offset
        out["truncated_mass"] = table.truncated_mass
        out["pmf"] = table.masses.tolist()
    elif args.what == "progeny":
        table = exactlaw.progeny_pmf(law, args.n)
        out["truncated_mass"] = table.truncated_mass
        out["pmf"] = {str(p): table.prob(p) for p in range(1, args.n + 1)}
        out["value_at_n"] = table.prob(args.n)
    elif args.what == "phi":
        out["phi"] = exactlaw.phi(step, args.n, args.j)
        out["phi_star"] = exactlaw.phi_star(step, args.n, args.j)
        out["j"] = args.j
    elif args.what == "ratio":
        out["a"] = args.a
        out["k"] = args.k
        out["ratio"] = exactlaw.discrete_ratio(step, args.n, args.a, args.k)
    elif args.what == "ac-check":
        rep = exactlaw.check_absolute_continuity(law, args.n, args.a)
        out.update(rep.to_dict())
    text = json.dumps(out, indent=2)
    if args.out:
        _out_path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.what == "ac-check" and not out.get("passed", True):
        return 1
    return 0


# -- stable -----------------------------------------------------------------------


def _parse_grid(spec: str) -> np.ndarray:
    lo, hi, count = spec.split(":")
    return np.linspace(float(lo), float(hi), int(count))


def _cmd_stable(args) -> int:
    law = stable.StableLaw(theta=args.theta)
    xs = _parse_grid(args.grid)
    what = args.what
    if what == "p1":
        ys = np.asarray(stable.density_p1(law, xs))
    elif what == "pt":
        ys = np.asarray(stable.density_pt(law, args.t, xs))
    elif what == "qs":
        ys = np.asarray(stable.first_passage_density(law, args.s, xs))
    elif what == "integral":
        ys = np.array([stable.passage_integral(law, args.lower, float(x)) for x in xs])
    elif what == "gamma":
        ys = np.asarray(stable.gamma_a(law, args.a, xs))
    elif what == "zeta-tail":
        ys = np.array([stable.zeta_tail(law, float(x)) for x in xs])
    elif what == "exc-marginal":
        ys = np.asarray(stable.excursion_marginal_theta2(args.t, xs))
    else:  # pragma: no cover - argparse restricts choices
        raise SystemExit(2)
    _write_csv(_out_path(args.out), ["x", "value"], zip(xs.tolist(), ys.tolist()))
    return 0


# -- verify -----------------------------------------------------------------------


def _cmd_verify(args) -> int:
    geometric = make_geometric(0.5)
    heavy = make_stable_family(args.theta)
    if args.law:
        picked = _load_law(args.law)
        if picked.theta == 2.0:
            geometric = picked
        else:
            heavy = picked
    seed = _resolve_seed(args)
    reports = limits.run_suite(
        args.suite, geometric, heavy, seed=seed, fast=args.fast, threads=args.threads
    )
    payload = {
        "schema": "gwtrees.verify/1",
        "suite": args.suite,
        "seed": seed,
        "passed": all(r.passed for r in reports),
        "reports": [r.to_dict() for r in reports],
    }
    for r in reports:
        line = r.summary_line()
        if r.notes:
            line += f"  ({r.notes})"
        print(line)
    if args.out:
        _out_path(args.out).write_text(json.dumps(payload, indent=2, default=_np_json) + "\n")
    if args.plots_dir:
        _emit_plot_csvs(reports, Path(args.plots_dir))
    return 0 if payload["passed"] else 1


def _np_json(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(str(type(obj)))


def _emit_plot_csvs(reports: List[ExperimentReport], plots_dir: Path) -> None:
    plots_dir.mkdir(parents=True, exist_ok=True)
    for i, r in enumerate(reports):
        st = r.statistics
        name = f"{i:02d}_{r.name}_{r.parameters.get('family', '')}"
        if "n_list" in st:
            cols = [k for k, v in st.items()
                    if isinstance(v, list) and len(v) == len(st["n_list"])]
            rows = zip(st["n_list"], *[st[c] for c in cols])
            _write_csv(plots_dir / f"{name}.csv", ["n"] + cols, rows)
        elif r.name == "contour_limit":
            rows = zip(st["t_list"], st["ks_marginal"], st["ks_reversal"])
            _write_csv(plots_dir / f"{name}.csv", ["t", "ks_marginal", "ks_reversal"], rows)


# -- codings ----------------------------------------------------------------------


def _cmd_codings(args) -> int:
    law = _load_law(args.law)
    seed = _resolve_seed(args)
    tree = sampler.sample_conditioned(law, args.n, rng=sampler.derive_rng(seed, 0))
    walk = codings.walk_from_tree(tree)
    height = codings.height_from_tree(tree)
    contour = codings.contour_from_tree(tree)
    prefix = args.out_prefix
    h_pad = np.append(height.values, -1)  # walk has zeta+1 entries; pad H column
    _write_csv(
        _out_path(prefix + "_vertex.csv"),
        ["index", "W", "H"],
        ((i, int(w), int(h_pad[i])) for i, w in enumerate(walk.values)),
    )
    _write_csv(
        _out_path(prefix + "_contour.csv"),
        ["time", "C"],
        ((t, int(c)) for t, c in enumerate(contour.values)),
    )
    if args.rescale_points:
        b_n = args.b_n or float(np.sqrt(args.n))
        rp = codings.rescale(contour, n=args.n, b_n=b_n, grid_points=args.rescale_points)
        _write_csv(
            _out_path(prefix + "_rescaled.csv"),
            ["t", "value"],
            zip(rp.times.tolist(), rp.values.tolist()),
        )
    return 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gwtrees",
        description="Conditioned Galton-Watson trees: exact sampling, exact laws, "
        "stable-density numerics and scaling-limit verification.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("sample", help="sample conditioned trees and emit a coding")
    ps.add_argument("--law", required=True)
    ps.add_argument("--n", type=int, required=True)
    ps.add_argument("--count", type=int, default=1)
    ps.add_argument("--seed", type=int, default=None)
    ps.add_argument("--method", choices=("rejection", "dp_exact"), default="rejection")
    ps.add_argument("--emit", choices=("tree", "walk", "height", "contour"), default="walk")
    ps.add_argument("--out", required=True)
    ps.set_defaults(fn=_cmd_sample)

    pe = sub.add_parser("exact", help="exact finite-n laws and identities")
    pe.add_argument("--law", required=True)
    pe.add_argument("--what", choices=("walk", "progeny", "phi", "ratio", "ac-check"),
                    required=True)
    pe.add_argument("--n", type=int, required=True)
    pe.add_argument("--j", type=int, default=1)
    pe.add_argument("--a", type=float, default=0.5)
    pe.add_argument("--k", type=int, default=0)
    pe.add_argument("--out", default=None)
    pe.set_defaults(fn=_cmd_exact)

    pt = sub.add_parser("stable", help="stable-density curves to CSV")
    pt.add_argument("--theta", type=float, required=True)
    pt.add_argument("--what", choices=("p1", "pt", "qs", "integral", "gamma",
                                       "zeta-tail", "exc-marginal"), required=True)
    pt.add_argument("--grid", default="-6:6:241",
                    help="lo:hi:count (use --grid=-6:6:241 for negative bounds)")
    pt.add_argument("--t", type=float, default=0.5)
    pt.add_argument("--s", type=float, default=1.0)
    pt.add_argument("--a", type=float, default=0.5)
    pt.add_argument("--lower", type=float, default=0.0)
    pt.add_argument("--out", required=True)
    pt.set_defaults(fn=_cmd_stable)

    pv = sub.add_parser("verify", help="run verification suites")
    pv.add_argument("--suite", choices=limits.SUITES + ("all",), default="all")
    pv.add_argument("--law", default=None, help="override one of the two default laws")
    pv.add_argument("--theta", type=float, default=1.5)
    pv.add_argument("--seed", type=int, default=None)
    pv.add_argument("--fast", action="store_true", help="reduced sizes (smoke test)")
    pv.add_argument("--threads", type=int, default=1)
    pv.add_argument("--out", default=None)
    pv.add_argument("--plots-dir", default=None)
    pv.set_defaults(fn=_cmd_verify)

    pc = sub.add_parser("codings", help="emit the codings of one sampled tree")
    pc.add_argument("--law", required=True)
    pc.add_argument("--n", type=int, required=True)
    pc.add_argument("--seed", type=int, default=None)
    pc.add_argument("--out-prefix", required=True)
    pc.add_argument("--rescale-points", type=int, default=0)
    pc.add_argument("--b-n", type=float, default=None)
    pc.set_defaults(fn=_cmd_codings)
    return p


def run(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (exactlaw.ExactLawError, sampler.SamplerError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:  # pragma: no cover - thin wrapper
    sys.exit(run())


if __name__ == "__main__":  # pragma: no cover
    main()
