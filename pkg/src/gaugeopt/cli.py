"""Command-line frontend.

Exit codes: 0 when the certificate passes, 2 when the run completed but the
certificate does not (a weak or unverified outcome), 1 on any error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import instances, report, rpca, sdp
from .config import SolverConfig, parse_step
from .errors import GaugeOptError
from .reference import gen_rpca, gen_sdp
from .rpca import RpcaInstance
from .sdp import SdpInstance

EXIT_PASS, EXIT_ERROR, EXIT_WEAK = 0, 1, 2

# flag -> SolverConfig field
_CONFIG_FLAGS = {
    "max_iter": int, "rel_tol": float, "window": int, "patience": int, "tau_mult": float,
    "tau_null": float, "admm_beta": float, "admm_tol": float, "sdls_tol": float,
    "cond6_tol": float, "cert_tol": float, "duality_tol": float, "refine_rounds": int,
    "seed": int,
}


def _add_config_flags(p):
    for name, typ in _CONFIG_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--step", default=None, help="sqrt, dilation or polyak:TARGET")


def config_from_args(args):
    changes = {k: getattr(args, k) for k in _CONFIG_FLAGS if getattr(args, k) is not None}
    if args.step is not None:
        changes.update(parse_step(args.step))
    return SolverConfig(**changes)


class _Parser(argparse.ArgumentParser):
    # usage errors are errors: exit 1, keeping 2 for weak certificates
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def build_parser():
    parser = _Parser(prog="gaugeopt", description="Robust PCA and SDP through their gauge duals.")
    sub = parser.add_subparsers(dest="command", required=True)

    for kind in ("rpca", "sdp"):
        p = sub.add_parser(f"solve-{kind}", help=f"solve a {kind} instance")
        p.add_argument("--input", required=True, nargs="+", help="instance file(s)")
        p.add_argument("--report", help="report file, or a directory for several inputs")
        p.add_argument("--primal", help="write the primal solution here")
        p.add_argument("--dual", help="write the dual solution here")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for several inputs")
        _add_config_flags(p)
        p.set_defaults(kind=kind)

    g = sub.add_parser("gen", help="generate a planted instance")
    gsub = g.add_subparsers(dest="kind", required=True)
    gr = gsub.add_parser("rpca")
    gr.add_argument("--m", type=int, required=True)
    gr.add_argument("--n", type=int, required=True)
    gr.add_argument("--rank", type=int, default=1)
    gr.add_argument("--density", type=float, default=0.05)
    gr.add_argument("--magnitude", type=float, default=1.0)
    gr.add_argument("--gamma", type=float, default=None)
    gr.add_argument("--seed", type=int, default=0)
    gr.add_argument("--out", required=True)
    gs = gsub.add_parser("sdp")
    gs.add_argument("--n", type=int, required=True)
    gs.add_argument("--m", type=int, required=True)
    gs.add_argument("--seed", type=int, default=0)
    gs.add_argument("--out", required=True)

    c = sub.add_parser("check", help="certify a primal/dual pair for an instance")
    c.add_argument("--instance", required=True)
    c.add_argument("--primal", required=True)
    c.add_argument("--dual", required=True)
    c.add_argument("--tol", type=float, default=1e-4)
    c.add_argument("--duality-tol", type=float, default=1e-3)
    return parser


def sidecar_path(out):
    out = Path(out)
    return out.with_name(out.stem + ".planted.json")


def cmd_generate(args):
    out = Path(args.out)
    if args.kind == "rpca":
        P = gen_rpca(args.m, args.n, args.rank, args.density, args.magnitude, args.seed,
                     args.gamma)
        side = {"kind": "rpca-planted", "seed": args.seed,
                "params": {"m": args.m, "n": args.n, "rank": args.rank,
                           "density": args.density, "magnitude": args.magnitude},
                "matrices": {"L_true": instances.matrix_to_mm(P.L_true),
                             "S_true": instances.matrix_to_mm(P.S_true)}}
    else:
        P = gen_sdp(args.n, args.m, args.seed)
        side = {"kind": "sdp-planted", "seed": args.seed,
                "params": {"n": args.n, "m": args.m},
                "matrices": {"X_strict": instances.matrix_to_mm(P.X_strict, symmetric=True)}}
    instances.save_instance(P.instance, out)
    sidecar_path(out).write_text(instances.dumps(side))
    print(f"wrote {out} and {sidecar_path(out)}")
    return EXIT_PASS


def solve_one(kind, path, cfg):
    """Load and solve one instance; returns (report, solution)."""
    inst = instances.load_instance(path)
    if kind == "rpca":
        if not isinstance(inst, RpcaInstance):
            raise GaugeOptError(f"{path} is not an rpca instance")
        sol = rpca.solve(inst, cfg)
        return report.rpca_report(sol, cfg), sol
    if not isinstance(inst, SdpInstance):
        raise GaugeOptError(f"{path} is not an sdp instance")
    sol = sdp.solve(inst, cfg)
    return report.sdp_report(sol, cfg), sol


def _write_solution(kind, sol, primal_path, dual_path):
    if kind == "rpca":
        if primal_path:
            instances.save_solution(primal_path, "rpca-primal", X=sol.X, Y=sol.Y)
        if dual_path:
            instances.save_solution(dual_path, "rpca-dual", Z=sol.dual.Z)
    else:
        if primal_path:
            instances.save_solution(primal_path, "sdp-primal", X=sol.primal.X)
        if dual_path:
            instances.save_solution(dual_path, "sdp-dual", y=sol.dual.y)


def _summary(kind, rep):
    cert = rep.certificate
    prod = cert["duality"]["product"]
    prod_txt = "undefined" if prod is None else f"{prod:.12g}"
    verdict = "PASS" if rep.passed else "WEAK"
    return f"{kind}: {verdict} duality product {prod_txt} ({cert['duality']['verdict']})"


def cmd_solve(args):
    cfg = config_from_args(args)
    paths = list(args.input)
    several = len(paths) > 1
    if several and (args.primal or args.dual):
        raise GaugeOptError("--primal/--dual need a single --input")
    if several and args.report:
        Path(args.report).mkdir(parents=True, exist_ok=True)

    stems = [Path(p).stem for p in paths]
    if len(set(stems)) < len(stems):
        # same file name in different directories: keep the reports apart
        stems = [f"{stem}-{i}" for i, stem in enumerate(stems)]
    report_names = dict(zip(paths, stems))

    def run(path):
        try:
            rep, sol = solve_one(args.kind, path, cfg)
        except GaugeOptError as exc:
            print(f"error: {path}: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_ERROR
        if args.report:
            target = Path(args.report) / (report_names[path] + ".report.json") if several \
                else Path(args.report)
            target.write_text(rep.dumps())
        _write_solution(args.kind, sol, args.primal, args.dual)
        print(f"{path}: {_summary(args.kind, rep)}")
        return EXIT_PASS if rep.passed else EXIT_WEAK

    if args.jobs > 1 and several:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(run, paths))
    else:
        codes = [run(p) for p in paths]
    if EXIT_ERROR in codes:
        return EXIT_ERROR
    return max(codes)


def _print_residuals(res, tol, flagged):
    for name, value in res.items():
        mark = "  <-- above tol" if name in flagged else ""
        print(f"  {name:16s} {value:.3e}{mark}")
    print(f"  tol              {tol:.1e}")


def cmd_check(args):
    inst = instances.load_instance(args.instance)
    if isinstance(inst, RpcaInstance):
        p = instances.load_solution(args.primal, "rpca-primal")
        d = instances.load_solution(args.dual, "rpca-dual")
        cert = rpca.check_optimality(inst, p["X"], p["Y"], d["Z"], args.tol, args.duality_tol)
        res = cert.to_json()["residuals"]
        flagged = {k for k, v in res.items()
                   if v > args.tol and not (k == "c6" and cert.c6_exempt)}
        _print_residuals(res, args.tol, flagged)
        if cert.c6_exempt:
            print("  c6 exempt (a part is zero or a trivial split is optimal)")
    else:
        p = instances.load_solution(args.primal, "sdp-primal")
        d = instances.load_solution(args.dual, "sdp-dual")
        if p["X"].shape != (inst.n, inst.n) or d["y"].size != inst.m:
            raise GaugeOptError("solution shapes do not match the instance")
        cert = sdp.check_optimality(inst, p["X"], d["y"], args.tol, args.duality_tol)
        res = cert.residuals
        flagged = {k for k, v in res.items() if not v <= args.tol}
        _print_residuals(res, args.tol, flagged)
    dc = cert.duality
    prod = "undefined" if dc.product is None else f"{dc.product:.12g}"
    print(f"  duality product  {prod} ({dc.verdict.value})")
    print("PASS" if cert.passed else "FAIL")
    return EXIT_PASS if cert.passed else EXIT_WEAK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            return cmd_generate(args)
        if args.command == "check":
            return cmd_check(args)
        return cmd_solve(args)
    except GaugeOptError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
