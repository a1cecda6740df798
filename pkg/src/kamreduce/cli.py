"""Command line: ``kamreduce {reduce,measure,verify,all} --config FILE``.

Exit codes: 0 success, 2 configuration or artifact error, 3 resonance at a
pinned parameter, 4 certified bound or numerical contract violated,
5 retained parameter set empty, 6 verification failed.  Every nonzero exit
writes exactly one ``error=... key=value`` line to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .engine import TransformChain, run
from .exceptions import (ArtifactError, BoundViolation, ConfigError, EmptyRetainedSet,
                         HermiticityError, IntegratorError, InversionError, KAMError,
                         NoConvergence, ResonanceViolation, ScheduleError,
                         UnderResolvedPotential, VerificationFailed)
from .transform import Transform
from .verifier import (conjugacy_residual, default_initial_state, integrate_original,
                       lyapunov_estimate, sobolev_growth_report)

log = logging.getLogger("kamreduce")

EXIT_CODES = [
    (ConfigError, 2), (ArtifactError, 2), (UnderResolvedPotential, 2), (ScheduleError, 2),
    (ResonanceViolation, 3),
    (BoundViolation, 4), (NoConvergence, 4), (HermiticityError, 4), (InversionError, 4),
    (EmptyRetainedSet, 5),
    (VerificationFailed, 6), (IntegratorError, 6),
]


def exit_code(err):
    for cls, code in EXIT_CODES:
        if isinstance(err, cls):
            return code
    return 4


def _overrides(args):
    return {"tau": args.tau, "max_steps": args.steps, "seed": args.seed}


def _out(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _reduce_one(cfg, tau, out):
    result = run(cfg.spec, cfg.settings, tau)
    report = result.to_dict()
    report["config"] = {"n": cfg.spec.n, "N": cfg.spec.N, "M": cfg.spec.M,
                        "omega0": cfg.spec.omega0, "gamma": cfg.spec.gamma,
                        "epsilon": cfg.spec.epsilon, "J": cfg.settings.J,
                        "seed": cfg.seed, "tau_pinned": tau is not None}
    io.write_json(out / "reduction_result.json", report)
    io.write_jsonl(out / "step_log.jsonl", result.step_log)
    io.write_transforms(out / "transforms.bin", result.chain.maps, cfg.spec.n, cfg.settings.J)
    (out / "retained_set.csv").write_text(io.retained_csv(result.retained_history))
    records = [{"step": m, **w} for m, ws in enumerate(result.witnesses) for w in ws]
    io.write_jsonl(out / "witnesses.jsonl", records)
    return result


def _scan_taus(cfg):
    first = run(cfg.spec, cfg.settings, None)
    rng = np.random.default_rng(cfg.seed)
    return first, sorted(float(t) for t in first.retained.sample(cfg.scan_count, rng))


def cmd_reduce(cfg, out):
    if cfg.tau == "scan":
        _, taus = _scan_taus(cfg)
        summary = []
        for idx, tau in enumerate(taus):
            sub = out / f"scan_{idx:03d}"
            sub.mkdir(exist_ok=True)
            try:
                res = _reduce_one(cfg, tau, sub)
                summary.append({"tau": tau, "status": "ok", "remainder": res.remainder,
                                "xi_constant": res.xi_constant, "dir": sub.name})
            except ResonanceViolation as err:
                summary.append({"tau": tau, "status": "resonant", "reason": err.reason(),
                                "dir": sub.name})
        io.write_json(out / "scan_summary.json", {"seed": cfg.seed, "runs": summary})
        return 0
    res = _reduce_one(cfg, cfg.tau, out)
    log.info("reduced in %d steps, remainder %.3e, max|xi|/eps = %.3f",
             res.steps, res.remainder, res.xi_constant)
    return 0


def cmd_measure(cfg, out):
    tau = None if cfg.tau == "scan" else cfg.tau
    res = run(cfg.spec, cfg.settings, tau)
    steps = []
    for e in res.step_log:
        steps.append({"m": e["m"], "gamma_m": e["gamma_m"], "K_m": e["K_m"],
                      "excluded_measure": e["excluded_measure"],
                      "retained_measure": e["retained_measure"],
                      "loss_over_gamma_m": e["excluded_measure"] / e["gamma_m"]})
    C = res.measure_constant()
    final = res.retained.measure
    report = {
        "gamma": cfg.spec.gamma,
        "steps": steps,
        "fitted_C": C,
        "budget_per_step": [C * s["gamma_m"] for s in steps],
        "budget_total": C * sum(s["gamma_m"] for s in steps),
        "retained_measure": final,
        "total_constant": (1.0 - final) / cfg.spec.gamma,
        "retained_intervals": len(res.retained),
        "tau": res.tau,
    }
    io.write_json(out / "measure_report.json", report)
    (out / "retained_set.csv").write_text(io.retained_csv(res.retained_history))
    records = [{"step": m, **w} for m, ws in enumerate(res.witnesses) for w in ws]
    io.write_jsonl(out / "witnesses.jsonl", records)
    log.info("retained measure %.6f, fitted C = %.4f", final, C)
    return 0


class _StoredResult:
    """Just enough of a reduction result to drive the verifier."""

    def __init__(self, xi, maps):
        self.xi = np.asarray(xi, dtype=float)
        self.chain = TransformChain([Transform(G, None, 0.0, 0, 0.0, 0.0) for G in maps])


def _verify_dir(cfg, out):
    report = io.read_json(out / "reduction_result.json")
    maps, n, J = io.read_transforms(out / "transforms.bin")
    if n != cfg.spec.n or J != cfg.settings.J:
        raise ArtifactError(f"transforms.bin has n={n}, J={J}; config expects "
                            f"n={cfg.spec.n}, J={cfg.settings.J}")
    try:
        xi, tau, remainder = report["xi"], float(report["tau"]), float(report["remainder"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError("reduction_result.json lacks xi/tau/remainder") from exc
    if len(xi) != J:
        raise ArtifactError("xi length does not match J")
    stored = _StoredResult(xi, maps)
    v = cfg.verify
    u0 = default_initial_state(J, cfg.seed)
    residual, det = conjugacy_residual(stored, cfg.spec, tau, u0, v.T, v.tol, v.samples,
                                       details=True)
    integ = det["integrator_error"]
    bound = v.residual_factor * remainder * v.T + integ + v.tol * v.T
    traj = integrate_original(cfg.spec, tau, u0, v.lyapunov_T, v.lyapunov_tol, v.lyapunov_samples)
    lyap = lyapunov_estimate(traj)
    max_ratio = v.max_ratio if v.max_ratio is not None else 1.0 + 10.0 * cfg.spec.epsilon ** 0.5
    growth = sobolev_growth_report(traj, max_ratio)
    drift = float(np.max(np.abs(traj.l2_norms() - np.linalg.norm(u0))))
    checks = {
        "conjugacy": {"value": residual, "bound": bound, "pass": residual <= bound,
                      "note": "bound is an engineering tolerance: factor x remainder x T + integrator error"},
        "lyapunov": {"value": lyap, "bound": v.lyapunov_bound, "pass": abs(lyap) <= v.lyapunov_bound},
        "norm_growth": {"value": growth["ratio"], "bound": max_ratio, "pass": growth["bounded"]},
        "unitarity_drift": {"value": drift, "bound": v.lyapunov_tol * v.lyapunov_T,
                            "pass": drift <= v.lyapunov_tol * v.lyapunov_T},
    }
    summary = {"tau": tau, "T": v.T, "lyapunov_T": v.lyapunov_T, "seed": cfg.seed,
               "integrator_error": integ, "growth": growth, "checks": checks,
               "pass": all(c["pass"] for c in checks.values())}
    io.write_json(out / "verify.json", summary)
    return summary


def cmd_verify(cfg, out):
    dirs = sorted(p for p in out.glob("scan_*") if p.is_dir()) if cfg.tau == "scan" else [out]
    if cfg.tau == "scan" and not dirs:
        raise ArtifactError(f"no scan directories under {out}")
    failed = []
    for d in dirs:
        if cfg.tau == "scan" and not (d / "transforms.bin").exists():
            continue
        summary = _verify_dir(cfg, d)
        log.info("%s: conjugacy %.3e, lyapunov %.3e", d.name, summary["checks"]["conjugacy"]["value"],
                 summary["checks"]["lyapunov"]["value"])
        if not summary["pass"]:
            failed.extend(f"{d.name}:{k}" for k, c in summary["checks"].items() if not c["pass"])
    if failed:
        raise VerificationFailed("failed checks: " + ",".join(failed))
    return 0


def cmd_all(cfg, out):
    cmd_reduce(cfg, out)
    cmd_measure(cfg, out)
    return cmd_verify(cfg, out)


COMMANDS = {"reduce": cmd_reduce, "measure": cmd_measure, "verify": cmd_verify, "all": cmd_all}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"command line: {message}")


def build_parser():
    parser = _Parser(prog="kamreduce", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML configuration file")
        p.add_argument("--tau", type=float, default=None, help="pin the frequency scale")
        p.add_argument("--steps", type=int, default=None, help="maximal number of steps")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed for sampled quantities")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as err:
        print(err.reason(), file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    if args.quiet:
        logging.getLogger("kamreduce").setLevel(logging.ERROR)
    try:
        cfg = io.load_config(args.config, _overrides(args))
        out = _out(args)
        return COMMANDS[args.command](cfg, out)
    except KAMError as err:
        print(err.reason(), file=sys.stderr)
        return exit_code(err)


if __name__ == "__main__":
    sys.exit(main())
