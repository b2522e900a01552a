"""Command-line front end.

Subcommands: gain-locus (performance locus CSV), mansd (resilience
estimate + certificate JSON for fixed gains), tune (full two-stage gain
search), simulate (trace/event CSVs + metrics JSON), verify
(re-check a certificate file by dense eigenvalue computation).

Exit codes: 0 success, 1 infeasible or failed result, 2 input error,
3 numerical failure. All file outputs are written to a temp file and
renamed into place so a failing run never leaves a partial file.
JSON floats carry 17 significant digits (certificates re-verify
bit-faithfully); CSV floats carry 9 (plot-grade).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .errors import (ConditionError, InconclusiveError, ParameterError,
                     PlatoonError, ScenarioError, UndefinedRatioError)
from .lmi import StabilityCertificate, verify_certificate
from .locus import enumerate_locus
from .model import build_closed_loop, build_error_matrix, eigenvalues_3x3
from .scenario import Scenario, gains_from_args, load_scenario
from .sim import (AttackSchedule, final_abs_errors, l2_ratio, max_overshoots,
                  simulate)
from .tuner import estimate_mansd, tune

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

LOCUS_HEADER = "branch,kp,kd,dominant_real_part,min_damping"


def _fmt_json(value, indent=0) -> str:
    pad = " " * indent
    inner = " " * (indent + 2)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = ",\n".join(
            f"{inner}{json.dumps(k)}: {_fmt_json(v, indent + 2)}" for k, v in value.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = ",\n".join(f"{inner}{_fmt_json(v, indent + 2)}" for v in value)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(value, np.ndarray):
        return _fmt_json(value.tolist(), indent)
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return json.dumps(value)


def _csv_num(x) -> str:
    return format(float(x), ".9g")


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _emit(text: str, out_path: str | None):
    if out_path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        _atomic_write(out_path, text)


def _locus_csv(scenario: Scenario) -> str:
    candidates = enumerate_locus(scenario.spec, scenario.params.tau_d,
                                 scenario.tuning.n_k1, scenario.tuning.n_k2)
    if not candidates:
        raise ConditionError(
            "gain locus is empty: no (kp, kd) meets the pole-placement "
            f"target lambda_M={scenario.spec.lambda_M}, zeta_m={scenario.spec.zeta_m} "
            f"with tau_d={scenario.params.tau_d}"
        )
    lines = [LOCUS_HEADER]
    for branch, gains in candidates:
        eigs = eigenvalues_3x3(build_error_matrix(gains, scenario.params.tau_d))
        dominant = float(np.max(eigs.real))
        im_thresh = 1e-8 * (1.0 + float(np.max(np.abs(eigs))))
        dampings = [-lam.real / abs(lam) for lam in eigs if abs(lam.imag) > im_thresh]
        min_damping = min(dampings) if dampings else 1.0
        lines.append(",".join([branch, _csv_num(gains.kp), _csv_num(gains.kd),
                               _csv_num(dominant), _csv_num(min_damping)]))
    return "\n".join(lines) + "\n"


def _certificate_dict(cert: StabilityCertificate) -> dict:
    return {
        "P1": [float(v) for v in cert.P1.flatten()],
        "p2": cert.p2,
        "delta": cert.delta,
        "theta": cert.theta,
        "Delta": cert.Delta,
    }


def cmd_gain_locus(args) -> int:
    scenario = _load(args)
    _emit(_locus_csv(scenario), args.out)
    return EXIT_OK


def cmd_mansd(args) -> int:
    scenario = _load(args)
    gains = gains_from_args(args.kp, args.kd)
    try:
        Delta, cert = estimate_mansd(gains, scenario.params, scenario.tuning)
    except InconclusiveError as ex:
        _emit(_fmt_json({"status": "inconclusive", "message": str(ex)}), args.out)
        return EXIT_NUMERICAL
    report = {
        "kp": gains.kp,
        "kd": gains.kd,
        "Delta": Delta,
        "delta_star": cert.delta if cert is not None else None,
        "theta": scenario.tuning.theta,
        "certificate": None,
        "verification": None,
    }
    if cert is not None:
        clm = build_closed_loop(gains, scenario.params)
        ver = verify_certificate(cert, clm, scenario.params.Ts, scenario.params.h)
        report["certificate"] = _certificate_dict(cert)
        report["verification"] = {
            "lambda_max_M0": ver.lambda_max_M0,
            "lambda_max_Mend": ver.lambda_max_Mend,
        }
    _emit(_fmt_json(report), args.out)
    return EXIT_OK if Delta >= 0 else EXIT_INFEASIBLE


def cmd_tune(args) -> int:
    scenario = _load(args)
    try:
        report = tune(scenario.params, scenario.spec, scenario.tuning,
                      jobs=args.jobs)
    except InconclusiveError as ex:
        _emit(_fmt_json({"status": "inconclusive", "message": str(ex)}), args.out)
        return EXIT_NUMERICAL
    out = {
        "best": None,
        "Delta": report.best_Delta,
        "branch": report.branch,
        "certificate": None,
        "timings": {
            "stage1_seconds": report.stage1_seconds,
            "stage2_seconds": report.stage2_seconds,
            "total_seconds": report.total_seconds,
        },
        "table": [
            {"branch": row.branch, "kp": row.kp, "kd": row.kd,
             "Delta": row.Delta, "delta_star": row.delta_star,
             "status": row.status}
            for row in report.locus_table
        ],
    }
    if report.best_gains is not None:
        out["best"] = {"kp": report.best_gains.kp, "kd": report.best_gains.kd}
    if report.certificate is not None:
        out["certificate"] = _certificate_dict(report.certificate)
    if args.locus_out is not None:
        _atomic_write(args.locus_out, _locus_csv(scenario))
    _emit(_fmt_json(out), args.out)
    return EXIT_OK if report.best_gains is not None else EXIT_INFEASIBLE


def _trace_csv(trace) -> str:
    m = trace.params.m
    cols = ["t"]
    for i in range(m + 1):
        cols += [f"q_{i}", f"v_{i}", f"a_{i}", f"u_{i}", f"e_{i}", f"omega_{i}"]
    lines = [",".join(cols)]
    for n in range(trace.t.size):
        row = [_csv_num(trace.t[n])]
        for i in range(m + 1):
            row += [_csv_num(trace.q[n, i]), _csv_num(trace.v[n, i]),
                    _csv_num(trace.a[n, i]), _csv_num(trace.u[n, i]),
                    _csv_num(trace.e[n, i]), _csv_num(trace.omega[n, i])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _events_csv(trace) -> str:
    lines = ["t,link,delivered"]
    for t, link, d in zip(trace.event_t, trace.event_link, trace.event_delivered):
        lines.append(f"{_csv_num(t)},{int(link)},{int(d)}")
    return "\n".join(lines) + "\n"


def _metrics(trace) -> dict:
    m = trace.params.m
    ratios = []
    for i in range(1, m + 1):
        try:
            ratios.append(l2_ratio(trace, i))
        except UndefinedRatioError:
            ratios.append(None)
    return {
        "l2_ratio": ratios,
        "max_overshoot": [float(v) for v in max_overshoots(trace)],
        "final_abs_error": [float(v) for v in final_abs_errors(trace)],
    }


def cmd_simulate(args) -> int:
    scenario = _load(args)
    gains = gains_from_args(args.kp, args.kd)
    if args.out is None:
        raise ScenarioError("simulate requires --out for the trace CSV")
    attack = scenario.attack
    if args.seed is not None:
        attack = AttackSchedule(kind=attack.kind, Delta=attack.Delta,
                                seed=args.seed,
                                explicit_drops=attack.explicit_drops)
    trace = simulate(scenario.params, gains, attack, scenario.leader,
                     t_end=scenario.sim.t_end, substeps=scenario.sim.substeps,
                     r=scenario.sim.r, L=scenario.sim.L, v0=scenario.sim.v0)
    stem, _ = os.path.splitext(args.out)
    _atomic_write(args.out, _trace_csv(trace))
    _atomic_write(stem + ".events.csv", _events_csv(trace))
    _atomic_write(stem + ".metrics.json", _fmt_json(_metrics(trace)))
    return EXIT_OK


def _load_certificate(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as ex:
        raise ScenarioError(f"cannot read certificate file: {ex}") from None
    except json.JSONDecodeError as ex:
        raise ScenarioError(
            f"certificate file is not valid JSON at line {ex.lineno}, "
            f"column {ex.colno}: {ex.msg}"
        ) from None
    if isinstance(raw, dict) and isinstance(raw.get("certificate"), dict):
        raw = raw["certificate"]  # accept a full mansd report
    if not isinstance(raw, dict):
        raise ScenarioError("certificate file must contain a JSON object")
    missing = [k for k in ("P1", "p2", "delta", "theta", "Delta") if k not in raw]
    if missing:
        raise ScenarioError(f"certificate file is missing fields: {', '.join(missing)}")
    return raw


def cmd_verify(args) -> int:
    scenario = _load(args)
    gains = gains_from_args(args.kp, args.kd)
    raw = _load_certificate(args.certificate)

    P1 = np.asarray(raw["P1"], dtype=float)
    if P1.size == 16:
        P1 = P1.reshape(4, 4)
    Delta_check = raw["Delta"]
    if getattr(scenario, "attack_delta_set", False):
        Delta_check = scenario.attack.Delta
    try:
        cert = StabilityCertificate(P1=P1, p2=float(raw["p2"]),
                                    delta=float(raw["delta"]),
                                    theta=float(raw["theta"]),
                                    Delta=int(Delta_check))
    except (ParameterError, ValueError) as ex:
        report = {"passed": False, "failures": [f"certificate invalid: {ex}"]}
        _emit(_fmt_json(report), args.out)
        return EXIT_INFEASIBLE

    clm = build_closed_loop(gains, scenario.params)
    ver = verify_certificate(cert, clm, scenario.params.Ts, scenario.params.h)
    report = {
        "passed": ver.passed,
        "Delta_checked": cert.Delta,
        "lambda_max_M0": ver.lambda_max_M0,
        "lambda_max_Mend": ver.lambda_max_Mend,
        "lambda_min_P1": ver.lambda_min_P1,
        "max_interior_lambda": ver.max_interior_lambda,
        "failures": list(ver.failures),
    }
    _emit(_fmt_json(report), args.out)
    return EXIT_OK if ver.passed else EXIT_INFEASIBLE


def _load(args) -> Scenario:
    if getattr(args, "scenario", None) is None:
        return Scenario()
    return load_scenario(args.scenario)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dosplatoon",
        description="Resilient CACC tuning against denial-of-service packet drops",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, gains=False, jobs=False, seed=False, locus=False, cert=False):
        p.add_argument("--scenario", help="INI scenario file (default: reference setup)")
        p.add_argument("--out", help="output path (default: standard output)")
        if gains:
            p.add_argument("--kp", type=float, help="proportional gain")
            p.add_argument("--kd", type=float, help="derivative gain")
        if jobs:
            p.add_argument("--jobs", type=int, default=1, help="parallel workers")
        if seed:
            p.add_argument("--seed", type=int, help="override the attack seed")
        if locus:
            p.add_argument("--locus-out", dest="locus_out",
                           help="also write the gain locus CSV here")
        if cert:
            p.add_argument("certificate", help="certificate JSON (or mansd report)")

    p = sub.add_parser("gain-locus", help="export the performance gain locus as CSV")
    common(p)
    p.set_defaults(fn=cmd_gain_locus)

    p = sub.add_parser("mansd", help="estimate resilience for fixed gains")
    common(p, gains=True)
    p.set_defaults(fn=cmd_mansd)

    p = sub.add_parser("tune", help="two-stage gain search maximizing resilience")
    common(p, jobs=True, locus=True)
    p.set_defaults(fn=cmd_tune)

    p = sub.add_parser("simulate", help="run the hybrid platoon simulation")
    common(p, gains=True, seed=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("verify", help="independently re-check a certificate file")
    common(p, gains=True, cert=True)
    p.set_defaults(fn=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_INPUT
    except InconclusiveError as ex:
        print(f"numerical failure: {ex}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConditionError as ex:
        print(f"infeasible: {ex}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except PlatoonError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
