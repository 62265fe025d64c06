"""Command-line interface: ``python -m torusnf {run,oracle,schedule,verify,factory}``.

Exit codes: 0 success, 1 malformed input / failed verification /
degree budget, 2 obstruction to formal normalization, 3 normal form not a
function of ``N_0``, 4 failed estimate (compliant run or schedule ledger).
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import schedule as sched
from .engine import (DegreeBudgetExceeded, RunOptions, ScheduleHypothesisFailed, classical_oracle,
                     normalized_degree, run)
from .factory import factory_suite, obstruction_instance
from .homology import ObstructionDetected, QuadraticForm
from .instances import SCHEMA_VERSION, InstanceError, InstanceSpec, dump_json, file_digest, load_instance
from .normal_form import A3Violation, scale_hamiltonian, verify_A3
from .series import TFSeries, check_real_symmetric

EXIT_OK, EXIT_INPUT, EXIT_OBSTRUCTION, EXIT_A3, EXIT_ESTIMATE = 0, 1, 2, 3, 4

STATUS = {
    EXIT_OK: "ok",
    EXIT_INPUT: "invalid",
    EXIT_OBSTRUCTION: "obstruction",
    EXIT_A3: "a3_violation",
    EXIT_ESTIMATE: "estimate_failed",
}


def _b_dict(b: dict) -> dict:
    return {f"b{j}": v for j, v in sorted(b.items()) if j >= 2}


def _step_record(rep) -> dict:
    R = rep.new_state.R_tilde
    return {
        "n": rep.n,
        "m": rep.m,
        "m_next": rep.m_next,
        "F": rep.F.to_records(),
        "norms": rep.norms,
        "flags": rep.flags,
        "b_fit": _b_dict(rep.b_fit.b),
        "a3_relative_residuals": {str(e): r for e, r in sorted(rep.b_fit.relative.items())},
        "max_residue": max(rep.residues.values(), default=0.0),
        "structural_defect": rep.structural_defect,
        "remainder_min_degree": R.min_degree if len(R) else None,
        "remainder_terms": len(R),
    }


def _header(command: str, spec: InstanceSpec | None, path: str | None) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "command": command}
    if spec is not None:
        doc["instance"] = {"name": spec.name, "sha256": file_digest(path) if path else None,
                           "dim": spec.dim, "omega": spec.omega.omega.tolist(), "b": list(spec.b),
                           "degree_cap": spec.degree_cap, "mode": spec.mode}
    return doc


def run_instance(spec: InstanceSpec, steps: int, path: str | None = None,
                 scale: float | None = None) -> tuple[dict, int]:
    """Run the Newton engine on one instance; returns the report and exit code.

    ``scale`` fixes the compliant-mode rescaling instead of choosing it.
    """
    doc = _header("run", spec, path)
    doc.update({"steps_requested": steps, "m_sequence": [normalized_degree(n) for n in range(steps + 1)],
                "error": None, "steps": []})
    code = EXIT_OK
    reports = []
    try:
        H = spec.build_hamiltonian()
        profile = spec.profile if spec.mode == "compliant" and spec.b else None
        opts = RunOptions(mode=spec.mode, profile=profile,
                          tol=spec.divisibility_tol, a3_tol=spec.a3_tol, rho0=spec.rho0, compose=True,
                          scale=scale)
        result = run(H, spec.omega, steps, spec.degree_cap, opts)
        reports = result.steps
        doc.update({
            "scale": result.scale,
            "working_degree_cap": result.degree_cap,
            "normal_form": result.normal_form.to_records(),
            "b_fit": _b_dict(result.b_fit),
            "b_original": _b_dict(result.b_original),
            "transform_deviation": result.transform.deviation_norm(
                _box(result.schedule, steps)) if result.transform else None,
        })
    except (ObstructionDetected, A3Violation, ScheduleHypothesisFailed, DegreeBudgetExceeded, ValueError) as exc:
        code = exit_code_for(exc)
        doc["error"] = f"{type(exc).__name__}: {exc}"
        if isinstance(exc, ScheduleHypothesisFailed):
            reports = [exc.report]
        if isinstance(exc, ObstructionDetected):
            doc["obstruction"] = {"mode": list(exc.mode), "residue": exc.residue}
    doc["steps"] = [_step_record(r) for r in reports]
    doc["status"] = STATUS[code]
    return doc, code


def _box(schedule, steps):
    from .series import DomainBox
    r = schedule.shrunk_radius(max(steps - 1, 0))
    return DomainBox(r, r)


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ObstructionDetected):
        return EXIT_OBSTRUCTION
    if isinstance(exc, A3Violation):
        return EXIT_A3
    if isinstance(exc, ScheduleHypothesisFailed):
        return EXIT_ESTIMATE
    return EXIT_INPUT


def _load_with_overrides(path: str, args) -> InstanceSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InstanceError("<file>", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InstanceError("<file>", f"not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise InstanceError("<root>", "expected a JSON object")
    if getattr(args, "mode", None):
        doc["mode"] = args.mode
    if getattr(args, "seed", None) is not None:
        doc["seed"] = args.seed
    if getattr(args, "tol", None) is not None:
        doc.setdefault("tolerances", {})
        doc["tolerances"] = dict(doc["tolerances"], divisibility=args.tol) if isinstance(
            doc["tolerances"], dict) else doc["tolerances"]
    return InstanceSpec.from_dict(doc, name=Path(path).stem)


def _print_run_summary(doc: dict, out=sys.stdout):
    name = doc.get("instance", {}).get("name", "")
    print(f"{name}: {doc['status']}" + (f" ({doc['error']})" if doc["error"] else ""), file=out)
    if doc["steps"]:
        print(f"{'n':>3} {'m_n':>4} {'m_n+1':>6} {'|R_n|':>11} {'|R_n+1|':>11} {'|C_n|':>11}  failed estimates",
              file=out)
    for s in doc["steps"]:
        failed = [k for k, v in s["flags"].items() if v is False]
        print(f"{s['n']:>3} {s['m']:>4} {s['m_next']:>6} {s['norms']['R_in']:>11.3e} "
              f"{s['norms']['R_out']:>11.3e} {s['norms']['C']:>11.3e}  {', '.join(failed) or '-'}", file=out)
    if doc.get("b_original"):
        print("b: " + ", ".join(f"{k}={v:.12g}" for k, v in doc["b_original"].items()), file=out)


def cmd_run(args) -> int:
    paths = args.instances
    if len(paths) > 1 and not args.suite:
        print("error: several instance files need --suite", file=sys.stderr)
        return EXIT_INPUT

    def one(path):
        try:
            spec = _load_with_overrides(path, args)
        except InstanceError as exc:
            doc = {"schema_version": SCHEMA_VERSION, "command": "run", "instance": {"name": Path(path).stem},
                   "status": STATUS[EXIT_INPUT], "error": str(exc), "steps": []}
            return doc, EXIT_INPUT
        return run_instance(spec, args.steps, path, args.scale)

    if args.suite:
        with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
            results = list(pool.map(one, paths))
        for doc, _ in results:
            if not args.quiet:
                _print_run_summary(doc)
        code = max(c for _, c in results)
        report = {"schema_version": SCHEMA_VERSION, "command": "run-suite", "runs": [d for d, _ in results]}
    else:
        report, code = one(paths[0])
        if not args.quiet:
            _print_run_summary(report)
        if code == EXIT_INPUT:
            print(f"error: {report['error']}", file=sys.stderr)
    if args.report:
        dump_json(report, args.report)
    return code


def _diff_normal_forms(run_doc: dict, oracle_nf: TFSeries, dim: int, tol: float) -> dict:
    """Compare a run's normal form with the oracle's over the run's degree range."""
    if run_doc.get("command") != "run" or "normal_form" not in run_doc:
        raise InstanceError("--diff", "not a successful run report")
    top = min(int(run_doc["m_sequence"][-1]), oracle_nf.degree_cap)
    run_nf = TFSeries.from_records(dim, max(top, 2), run_doc["normal_form"]).project_degrees(0, top)
    if run_doc.get("scale", 1.0) != 1.0:
        run_nf = scale_hamiltonian(run_nf, 1.0 / float(run_doc["scale"]))
    ref = oracle_nf.project_degrees(0, top)
    diff = run_nf - ref
    diff_abs = float(np.abs(diff.coeffs).max()) if len(diff) else 0.0
    scale = float(np.abs(ref.coeffs).max()) if len(ref) else 1.0
    return {"compared_degrees": [2, top], "max_abs_diff": diff_abs, "max_rel_diff": diff_abs / scale,
            "tolerance": tol, "passed": diff_abs / scale <= tol}


def cmd_oracle(args) -> int:
    try:
        spec = _load_with_overrides(args.instance, args)
        H = spec.build_hamiltonian()
        D = args.degree if args.degree is not None else spec.degree_cap
        if D < 2 or D > H.degree_cap:
            raise InstanceError("--degree", f"must lie in [2, {spec.degree_cap}], got {D}")
    except (InstanceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    doc = _header("oracle", spec, args.instance)
    doc.update({"degree": D, "error": None})
    code = EXIT_OK
    try:
        res = classical_oracle(H, spec.omega, D, tol=spec.divisibility_tol)
        fit = res.fit(spec.omega, spec.a3_tol)
        doc.update({
            "normal_form": res.normal_form.to_records(),
            "b_fit": _b_dict(fit.b),
            "a3_relative_residuals": {str(e): r for e, r in sorted(fit.relative.items())},
            "a3_passed": fit.passed,
            "generator": {str(e): g.to_records() for e, g in sorted(res.generators.items())},
        })
        if not fit.passed:
            code = EXIT_A3
            doc["error"] = f"A3Violation: {A3Violation(fit)}"
        if args.diff:
            run_doc = json.loads(Path(args.diff).read_text())
            doc["diff"] = _diff_normal_forms(run_doc, res.normal_form, spec.dim, args.diff_tol)
    except ObstructionDetected as exc:
        code = EXIT_OBSTRUCTION
        doc["error"] = f"{type(exc).__name__}: {exc}"
        doc["obstruction"] = {"mode": list(exc.mode), "residue": exc.residue}
    except (InstanceError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    doc["status"] = STATUS[code]
    if not args.quiet:
        print(f"{spec.name}: {doc['status']}" + (f" ({doc['error']})" if doc["error"] else ""))
        if "b_fit" in doc:
            print("b: " + ", ".join(f"{k}={v:.12g}" for k, v in doc["b_fit"].items()))
        if "diff" in doc:
            d = doc["diff"]
            print(f"diff vs run: max relative {d['max_rel_diff']:.3e} ({'pass' if d['passed'] else 'FAIL'})")
    if args.report:
        dump_json(doc, args.report)
    if "diff" in doc and not doc["diff"]["passed"]:
        return EXIT_INPUT
    return code


def cmd_schedule(args) -> int:
    try:
        s = sched.build(args.dim, args.rho0, args.horizon)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    rows = sched.check_convergence_chain(s)
    lo, hi = sched.rho_limit_bracket(s)
    doc = {"schema_version": SCHEMA_VERSION, "command": "schedule", "dim": s.dim, "rho0": s.rho0,
           "horizon": s.horizon, "kappa": s.kappa, "b": s.b, "delta0": s.delta[0],
           "rho_limit_bracket": [lo, hi], "rows": [r.as_dict() for r in rows],
           "passed": all(r.passed for r in rows)}
    if not args.quiet:
        for fam in sched.FAMILIES:
            sel = [r for r in rows if r.family == fam]
            print(f"family {fam}: {sum(r.passed for r in sel)}/{len(sel)} pass")
    if args.report:
        dump_json(doc, args.report)
    return EXIT_OK if doc["passed"] else EXIT_ESTIMATE


def verify_run_report(doc: dict) -> list[str]:
    """Re-check the identities a run report must satisfy; returns problems found."""
    problems = []
    if doc.get("schema_version") != SCHEMA_VERSION:
        problems.append(f"schema_version {doc.get('schema_version')!r} != {SCHEMA_VERSION}")
    if doc.get("command") != "run":
        return problems + [f"not a run report (command {doc.get('command')!r})"]
    inst = doc.get("instance", {})
    dim = inst.get("dim")
    m_seq = doc.get("m_sequence", [])
    if m_seq != [2**n + 1 for n in range(len(m_seq))]:
        problems.append("m_sequence is not 2^n + 1")
    for s in doc.get("steps", []):
        n = s["n"]
        if (s["m"], s["m_next"]) != (2**n + 1, 2**(n + 1) + 1):
            problems.append(f"step {n}: degrees {s['m']}, {s['m_next']} are not 2^n+1, 2^(n+1)+1")
        F = TFSeries.from_records(dim, max(s["m_next"], 2), s["F"])
        if len(F):
            if F.min_degree < s["m"] or F.max_degree > s["m_next"] - 1:
                problems.append(f"step {n}: generator degrees outside [{s['m']}, {s['m_next'] - 1}]")
            if len(F.zero_mode()):
                problems.append(f"step {n}: generator has k = 0 terms")
            ok, worst = check_real_symmetric(F, 1e-12 * max(1.0, float(np.abs(F.coeffs).max())))
            if not ok:
                problems.append(f"step {n}: generator not real-symmetric (defect {worst:.2e})")
        rmin = s.get("remainder_min_degree")
        if rmin is not None and rmin <= s["m_next"]:
            problems.append(f"step {n}: remainder starts at degree {rmin} <= {s['m_next']}")
        norms, flags = s["norms"], s["flags"]
        if flags.get("est_Rn") is not None and flags["est_Rn"] != (norms["R_out"] <= norms["R_bound_out"]):
            problems.append(f"step {n}: est_Rn flag disagrees with its norms")
        if flags.get("est_R") is not None and flags["est_R"] != (norms["R_in"] <= norms["R_bound_in"]):
            problems.append(f"step {n}: est_R flag disagrees with its norms")
    if doc.get("status") == "ok" and "normal_form" in doc:
        N = TFSeries.from_records(dim, max(m_seq[-1], 2), doc["normal_form"])
        if len(N):
            if len(N.oscillating()):
                problems.append("normal form depends on theta")
            if N.min_degree < 2 or N.max_degree > m_seq[-1]:
                problems.append("normal form degrees outside [2, m_final]")
            fit = verify_A3(N, QuadraticForm(np.array(inst["omega"])))
            for key, v in doc.get("b_fit", {}).items():
                j = int(key[1:])
                if abs(fit.b.get(j, 0.0) - v) > 1e-12 * max(1.0, abs(v)):
                    problems.append(f"{key} does not reproduce from the stored normal form")
    return problems


def cmd_verify(args) -> int:
    try:
        doc = json.loads(Path(args.report_file).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read report: {exc}", file=sys.stderr)
        return EXIT_INPUT
    docs = doc.get("runs", [doc]) if doc.get("command") == "run-suite" else [doc]
    problems = []
    for d in docs:
        try:
            problems += verify_run_report(d)
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"malformed report: {exc!r}")
    for p in problems:
        print(p)
    if not problems and not args.quiet:
        print(f"{len(docs)} report(s) consistent")
    return EXIT_INPUT if problems else EXIT_OK


def cmd_factory(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "normal":
        for entry in factory_suite(args.count, degree_cap=args.degree_cap, seed=args.seed):
            prof = entry["profile"]
            spec = InstanceSpec(prof.dim, prof.omega, prof.b, args.degree_cap, generator=entry["generator"],
                                seed=args.seed, name=entry["name"])
            dump_json(spec.to_dict(), out / f"{entry['name']}.json")
    else:
        omega = QuadraticForm(np.array([[1.0, 0.0], [0.0, 2.0]]))
        for idx in range(args.count):
            H = obstruction_instance(omega, args.degree_cap, args.seed * 1000 + idx)
            spec = InstanceSpec(2, omega, (), args.degree_cap, hamiltonian=H, seed=args.seed)
            dump_json(spec.to_dict(), out / f"obstruction-{idx:02d}.json")
    if not args.quiet:
        print(f"wrote {args.count} instance(s) to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="torusnf", description="Normal forms near a zero-frequency torus.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--quiet", action="store_true", help="suppress the stdout summary")

    r = sub.add_parser("run", help="Newton normalization of instance file(s)")
    r.add_argument("instances", nargs="+")
    r.add_argument("--steps", type=int, default=3, help="Newton steps (step n normalizes through 2^(n+1)+1)")
    r.add_argument("--report", help="write the JSON report here")
    r.add_argument("--tol", type=float, help="divisibility tolerance (overrides the instance)")
    r.add_argument("--mode", choices=["free", "compliant"])
    r.add_argument("--seed", type=int, help="seed for random generators (overrides the instance)")
    r.add_argument("--scale", type=float, help="fixed rescaling factor for compliant mode (default: automatic)")
    r.add_argument("--suite", action="store_true", help="run several instances on worker threads")
    r.add_argument("--jobs", type=int, default=4, help="worker threads for --suite")
    common(r)
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle", help="degree-by-degree normalization")
    o.add_argument("instance")
    o.add_argument("--degree", type=int, help="normalize through this degree (default: the instance cap)")
    o.add_argument("--report", help="write the JSON report here")
    o.add_argument("--diff", help="run report to compare normal forms against")
    o.add_argument("--diff-tol", type=float, default=1e-8, help="relative tolerance for --diff")
    o.add_argument("--tol", type=float)
    o.add_argument("--seed", type=int)
    common(o)
    o.set_defaults(func=cmd_oracle)

    s = sub.add_parser("schedule", help="constants schedule inequality ledger")
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--rho0", type=float, default=1.0)
    s.add_argument("--horizon", type=int, default=sched.DEFAULT_HORIZON)
    s.add_argument("--report", help="write the JSON ledger here")
    common(s)
    s.set_defaults(func=cmd_schedule)

    v = sub.add_parser("verify", help="re-check the internal identities of a run report")
    v.add_argument("report_file")
    common(v)
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("factory", help="write seeded instance files")
    f.add_argument("--out", required=True, help="output directory")
    f.add_argument("--count", type=int, default=20)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--degree-cap", type=int, default=17)
    f.add_argument("--kind", choices=["normal", "obstruction"], default="normal")
    common(f)
    f.set_defaults(func=cmd_factory)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "steps", 0) < 0:
        print("error: --steps must be non-negative", file=sys.stderr)
        return EXIT_INPUT
    if getattr(args, "scale", None) is not None and not args.scale > 0:
        print("error: --scale must be positive", file=sys.stderr)
        return EXIT_INPUT
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
