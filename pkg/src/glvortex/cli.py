"""Command-line front end.

Commands: profile, spectrum, verdict, sweep, check.  Outputs are written
atomically (temp file then rename); identical configuration and seed give
byte-identical files.  Exit codes: 0 success, 1 numerical failure, 2 usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

# limit BLAS threading before numpy initializes: deterministic and avoids
# thread-pool stalls inside banded LAPACK drivers on constrained hosts
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np  # noqa: E402

from . import __version__  # noqa: E402
from .checks import run_all  # noqa: E402
from .grid import default_grid  # noqa: E402
from .operators import assemble_Lm, translation_mode  # noqa: E402
from .profiles import ProfileSolveConfig, profile_to_csv, solve_profile  # noqa: E402
from .spectra import smallest_eigenpairs  # noqa: E402
from .verdict import classify, report_to_json, sweep, sweep_to_csv  # noqa: E402


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".glvortex-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _grid_args(sub):
    sub.add_argument("--r-max", type=float, default=20.0)
    sub.add_argument("--n-points", type=int, default=2000)
    sub.add_argument("--refine", type=int, default=9,
                     help="odd oversampling factor of the profile solve mesh")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="glvortex",
        description="Ginzburg-Landau n-vortex profiles and linear stability")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="solve the radial vortex profile")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--out", required=True)
    _grid_args(p)

    s = sub.add_parser("spectrum", help="lowest eigenvalues of one block")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--k", type=int, default=6)
    s.add_argument("--deflate-translation", action="store_true",
                   help="project out the translational mode (m = 1 block)")
    s.add_argument("--out", required=True)
    s.add_argument("--eigenvectors", default=None,
                   help="optional CSV path for the eigenvectors")
    _grid_args(s)

    v = sub.add_parser("verdict", help="stability classification at (n, lambda)")
    v.add_argument("--n", type=int, required=True)
    v.add_argument("--lambda", dest="lam", type=float, required=True)
    v.add_argument("--out", default=None)
    _grid_args(v)

    w = sub.add_parser("sweep", help="classification over a (n, lambda) grid")
    w.add_argument("--n-list", default=None, help="comma-separated degrees")
    w.add_argument("--lambda-list", default=None, help="comma-separated couplings")
    w.add_argument("--config", default=None, help="JSON file with sweep settings")
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--out", required=True, help="summary CSV path")
    w.add_argument("--json-dir", default=None, help="directory for per-cell JSON")
    _grid_args(w)

    c = sub.add_parser("check", help="run the invariant suite")
    c.add_argument("--fast", action="store_true",
                   help="coarser grid, faster but looser")
    c.add_argument("--seed", type=int, default=0)
    return ap


def cmd_profile(args) -> int:
    grid = default_grid(args.r_max, args.n_points)
    cfg = ProfileSolveConfig(refine=args.refine)
    p = solve_profile(args.n, args.lam, grid, cfg)
    _atomic_write(args.out, profile_to_csv(p))
    print(f"wrote {args.out} (newton residual {p.newton_residual:.3e})")
    return 0


def cmd_spectrum(args) -> int:
    grid = default_grid(args.r_max, args.n_points)
    cfg = ProfileSolveConfig(refine=args.refine)
    p = solve_profile(args.n, args.lam, grid, cfg)
    Lm = assemble_Lm(p, args.m)
    deflate = []
    labels = []
    if args.deflate_translation:
        if args.m != 1:
            print("error: the translational mode lives in the m = 1 block",
                  file=sys.stderr)
            return 2
        deflate = [translation_mode(p).values]
        labels = ["T"]
    res = smallest_eigenpairs(Lm, k=args.k, deflate=deflate)
    payload = res.to_json_dict()
    payload["deflation_labels"] = labels
    payload["n"] = args.n
    payload["lambda"] = args.lam
    payload["m"] = args.m
    payload["grid"] = {"r_min": grid.r_min, "r_max": grid.r_max,
                       "n_points": grid.n_points, "refine": args.refine}
    _atomic_write(args.out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.eigenvectors:
        lines = ["r," + ",".join(
            f"v{j}_c{c}" for j in range(args.k) for c in range(res.n_comp))]
        rf = grid.active_nodes
        mact = grid.n_active
        for i in range(mact):
            row = [repr(float(rf[i]))]
            for j in range(args.k):
                for c in range(res.n_comp):
                    row.append(repr(float(res.eigenvectors[j][c * mact + i])))
            lines.append(",".join(row))
        _atomic_write(args.eigenvectors, "\n".join(lines) + "\n")
    print(f"wrote {args.out}")
    return 0


def cmd_verdict(args) -> int:
    grid = default_grid(args.r_max, args.n_points)
    cfg = ProfileSolveConfig(refine=args.refine)
    rep = classify(args.n, args.lam, grid, cfg)
    text = report_to_json(rep) + "\n"
    if args.out:
        _atomic_write(args.out, text)
        print(f"{rep.classification} (gap {rep.gap:.4g}); wrote {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_sweep(args) -> int:
    settings = {}
    if args.config:
        with open(args.config) as fh:
            settings = json.load(fh)
    n_list = ([int(x) for x in args.n_list.split(",")] if args.n_list
              else settings.get("n_list"))
    lam_list = ([float(x) for x in args.lambda_list.split(",")] if args.lambda_list
                else settings.get("lambda_list"))
    if not n_list or not lam_list:
        print("error: sweep needs --n-list/--lambda-list or a --config file",
              file=sys.stderr)
        return 2
    results = sweep(n_list, lam_list,
                    r_max=settings.get("r_max", args.r_max),
                    n_points=settings.get("n_points", args.n_points),
                    refine=settings.get("refine", args.refine),
                    jobs=args.jobs)
    _atomic_write(args.out, sweep_to_csv(results))
    if args.json_dir:
        os.makedirs(args.json_dir, exist_ok=True)
        for n, lam, rep, err in results:
            name = os.path.join(args.json_dir, f"verdict_n{n}_lam{lam!r}.json")
            if rep is not None:
                _atomic_write(name, report_to_json(rep) + "\n")
            else:
                _atomic_write(name, json.dumps({"error": err}) + "\n")
    failures = [r for r in results if r[2] is None]
    print(f"wrote {args.out} ({len(results)} cells, {len(failures)} failures)")
    return 1 if failures else 0


def cmd_check(args) -> int:
    if args.fast:
        results = run_all(r_max=20.0, n_points=800, refine=9, seed=args.seed)
    else:
        results = run_all(seed=args.seed)
    width = max(len(name) for name, *_ in results)
    ok = True
    for name, value, threshold, passed in results:
        ok &= passed
        status = "PASS" if passed else "FAIL"
        print(f"{status}  {name:<{width}}  value={value:.3e}  "
              f"threshold={threshold:.3e}")
    print("all checks passed" if ok else "CHECK FAILURES PRESENT")
    return 0 if ok else 1


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    np.seterr(over="raise", invalid="raise")
    handlers = {
        "profile": cmd_profile,
        "spectrum": cmd_spectrum,
        "verdict": cmd_verdict,
        "sweep": cmd_sweep,
        "check": cmd_check,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:                      # numerical failure
        print(f"numerical failure [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
