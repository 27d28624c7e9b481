"""Command-line pipeline: simulate the benchmark microgrid, certify
subsystems and networks from trajectory records, and reproduce the
four-area case study end to end.

Subcommands
-----------
simulate             scenario config JSON -> per-area trajectory CSVs,
                     ground-truth model JSONs, interconnection graph, report
certify-subsystem    one trajectory CSV -> dissipativity certificate JSON
certify-network      directory of CSVs + graph JSON -> network certificate,
                     pairing-margin table (CSV + gnuplot script), report
reproduce-case-study run the three outage scenarios, certify both windows
                     of each, emit index and margin tables plus a summary

Exit codes: 0 success, 2 malformed input, 3 simulation divergence,
4 insufficiently informative data, 5 infeasible certification problem,
6 undecided verdict. Every command writes a JSON run report carrying the
command echo, sha256 hashes of the inputs it read, per-stage wall clocks
and a verdict; reports from identical inputs are byte-identical except for
the timing fields ("created_utc" and keys ending in "seconds"). Output
files are staged under a temporary name and renamed into place, so a
killed run never leaves half-written artifacts. The certification
commands consume only trajectory records and graph files — ground-truth
models exported by ``simulate`` live in a separate directory and are
never read back.

The environment variable DISSIPACERT_THREADS caps identification workers.
"""

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .certify import (
    PassivityIndices,
    SupplyRate,
    certify_qsr,
    optimize_channel_indices,
    save_certificate,
    supply_from_indices,
)
from .errors import (
    DissipacertError,
    DivergenceError,
    EquilibriumError,
    InfeasibleError,
    InformativityError,
    NumericalError,
    ReductionError,
    ValidationError,
    WindowError,
)
from .lti import save_model
from .microgrid import (
    CASE_STUDY_REL_TOL,
    Dither,
    load_scenario_config,
    outage_scenario,
    run_scenario,
)
from .network import (
    SubsystemData,
    Verdict,
    certify_network,
    load_graph,
    save_graph,
    save_network_certificate,
)
from .realization import identify
from .signals import load_trajectories, save_trajectories

__all__ = ["main"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DIVERGENCE = 3
EXIT_INFORMATIVITY = 4
EXIT_INFEASIBLE = 5
EXIT_UNDECIDED = 6

# Regression reference for --strict-values: channel-wise indices previously
# obtained for the baseline outage-of-area-4 benchmark, one (rho, nu) pair
# per channel. Reported deltas are informational only and never gate the
# exit code — index values depend on data scaling and solver path, while
# the certified *properties* (signs, pairing sums) are what must agree.
REFERENCE_INDICES = {
    "pre": {
        1: {"rho": (0.6004, 0.6098), "nu": (-1.2000, -0.4421)},
        2: {"rho": (0.4431, 0.5666), "nu": (-0.6088, -0.4079)},
        3: {"rho": (0.4089, 0.8618), "nu": (-0.5056, -0.5177)},
        4: {"rho": (0.5187, 1.2012), "nu": (-0.8608, -0.5994)},
    },
    "post": {
        1: {"rho": (0.5654, 0.6366), "nu": (-1.0460, -0.4388)},
        2: {"rho": (0.4398, 0.5155), "nu": (-0.6356, -0.4095)},
        3: {"rho": (0.4105, 0.8550), "nu": (-0.5145, -0.4940)},
        4: {"rho": (0.4950, 1.0470), "nu": (-0.8540, -0.5644)},
    },
}


def _version():
    try:
        from importlib.metadata import version

        return version("dissipacert")
    except Exception:
        return "unknown"


def _utc_now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _json_text(payload):
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_atomic(path, text):
    path = Path(path)
    tmp = path.with_name("." + path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _save_atomic(save, path, *args):
    """Run a single-file writer against a temp name, then rename over."""
    path = Path(path)
    tmp = path.with_name("." + path.name + ".tmp")
    save(tmp, *args)
    os.replace(tmp, path)


def _save_trajectories_atomic(path, u, y, metadata):
    path = Path(path)
    tmp_csv = path.with_name("." + path.stem + ".tmp.csv")
    sidecar_tmp = save_trajectories(tmp_csv, u, y, metadata)
    os.replace(tmp_csv, path)
    os.replace(sidecar_tmp, path.with_suffix(".json"))


class _Stages:
    """Wall-clock bookkeeping: one entry per pipeline stage."""

    def __init__(self):
        self.entries = []

    def run(self, name, fn, **extra):
        t0 = time.perf_counter()
        result = fn()
        entry = {"name": name, "seconds": time.perf_counter() - t0}
        entry.update(extra)
        self.entries.append(entry)
        return result

    def note(self, name, **extra):
        entry = {"name": name, "seconds": 0.0}
        entry.update(extra)
        self.entries.append(entry)


def _report(args, command, inputs, stages, verdict, exit_code, **extra):
    echo = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in vars(args).items()
        if k != "func"
    }
    payload = {
        "command": command,
        "arguments": echo,
        "inputs": {str(k): v for k, v in sorted(inputs.items())},
        "stages": stages.entries,
        "verdict": verdict,
        "exit_code": exit_code,
        "version": _version(),
        "created_utc": _utc_now(),
    }
    payload.update(extra)
    return payload


def _finish(out_path, report):
    _write_atomic(out_path, _json_text(report))
    return report["exit_code"]


def _error_detail(exc):
    detail = {"error": type(exc).__name__, "message": str(exc)}
    for field in ("achieved", "required", "worst_constraint", "slack", "index"):
        value = getattr(exc, field, None)
        if value is not None:
            detail[field] = value
    return detail


# ---------------------------------------------------------------------------
# simulate


def _scenario_with_seed(scenario, seed):
    if seed is None or scenario.dither is None:
        return scenario
    return dataclasses.replace(
        scenario, dither=Dither(amplitude=scenario.dither.amplitude, seed=seed)
    )


def cmd_simulate(args):
    stages = _Stages()
    inputs = {}
    out_dir = Path(args.out)
    config_path = Path(args.config)
    try:
        inputs[config_path] = _sha256(config_path)
        scenario, areas, lines = stages.run(
            "load-config", lambda: load_scenario_config(config_path)
        )
    except OSError as exc:
        print(f"error: cannot read {config_path}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    scenario = _scenario_with_seed(scenario, args.seed)

    try:
        run = stages.run(
            "simulate", lambda: run_scenario(scenario, areas, lines)
        )
    except (DivergenceError, EquilibriumError) as exc:
        out_dir.mkdir(parents=True, exist_ok=True)
        report = _report(
            args, "simulate", inputs, stages, "diverged", EXIT_DIVERGENCE,
            failure=_error_detail(exc),
        )
        print(f"error: {exc}", file=sys.stderr)
        return _finish(out_dir / "report.json", report)

    def export():
        windows = [("pre", run.pre, run.pre_models)]
        if scenario.fault_area is not None:
            windows.append(("post", run.post, run.post_models))
        files = []
        models_dir = out_dir / "models"
        models_dir.mkdir(parents=True, exist_ok=True)
        for window_name, area_windows, models in windows:
            window_dir = out_dir / window_name
            window_dir.mkdir(parents=True, exist_ok=True)
            for w, model in zip(area_windows, models):
                csv_path = window_dir / f"area{w.area}.csv"
                _save_trajectories_atomic(
                    csv_path, w.u, w.y,
                    {
                        "area": w.area,
                        "window": window_name,
                        "lag": w.lag,
                        "order": w.order,
                    },
                )
                files.append(str(csv_path.relative_to(out_dir)))
                model_path = models_dir / f"area{w.area}_{window_name}.json"
                _save_atomic(save_model, model_path, model)
        _save_atomic(save_graph, out_dir / "graph.json", run.graph)
        return files

    out_dir.mkdir(parents=True, exist_ok=True)
    trajectory_files = stages.run("export", export)
    report = _report(
        args, "simulate", inputs, stages, "completed", EXIT_OK,
        trajectory_files=trajectory_files,
        fault_area=scenario.fault_area,
        samples_per_window={
            "pre": run.pre[0].u.n_samples,
            "post": run.post[0].u.n_samples if scenario.fault_area else None,
        },
    )
    print(f"wrote {len(trajectory_files)} trajectory files under {out_dir}")
    return _finish(out_dir / "report.json", report)


# ---------------------------------------------------------------------------
# certify-subsystem


def _load_supply(path):
    raw = json.loads(Path(path).read_text())
    if {"rho", "nu"} <= set(raw):
        indices = PassivityIndices(
            rho=np.asarray(raw["rho"], dtype=float),
            nu=np.asarray(raw["nu"], dtype=float),
        )
        return supply_from_indices(indices), indices
    if {"Q", "S", "R"} <= set(raw):
        supply = SupplyRate(
            q=np.asarray(raw["Q"], dtype=float),
            s=np.asarray(raw["S"], dtype=float),
            r=np.asarray(raw["R"], dtype=float),
        )
        return supply, None
    raise ValidationError(
        f"{path}: supply file needs either rho/nu lists or Q/S/R matrices"
    )


def _window_shape(args, metadata, path):
    lag = args.lag if args.lag is not None else metadata.get("lag")
    order = args.order if args.order is not None else metadata.get("order")
    if lag is None or order is None:
        raise ValidationError(
            f"{path}: lag/order not in the sidecar metadata; pass --lag and "
            f"--order explicitly"
        )
    return int(lag), int(order)


def cmd_certify_subsystem(args):
    stages = _Stages()
    inputs = {}
    data_path = Path(args.data)
    out_path = Path(args.out)
    report_path = out_path.with_name(out_path.stem + "_report.json")
    try:
        inputs[data_path] = _sha256(data_path)
        sidecar = data_path.with_suffix(".json")
        if sidecar.exists():
            inputs[sidecar] = _sha256(sidecar)
        u, y, metadata = stages.run(
            "load-data", lambda: load_trajectories(data_path)
        )
        lag, order = _window_shape(args, metadata, data_path)
        supply = None
        fixed_indices = None
        if args.supply != "optimize":
            supply_path = Path(args.supply)
            inputs[supply_path] = _sha256(supply_path)
            supply, fixed_indices = _load_supply(supply_path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValidationError, WindowError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    out_path.parent.mkdir(parents=True, exist_ok=True)

    def fail(verdict, code, exc):
        report = _report(
            args, "certify-subsystem", inputs, stages, verdict, code,
            failure=_error_detail(exc),
        )
        print(f"error: {exc}", file=sys.stderr)
        return _finish(report_path, report)

    try:
        result = stages.run(
            "identify", lambda: identify(u, y, lag, order, rel_tol=args.rel_tol)
        )
    except (InformativityError, ReductionError) as exc:
        return fail("not-informative", EXIT_INFORMATIVITY, exc)
    except (ValidationError, WindowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    try:
        if supply is None:
            indices, certificate = stages.run(
                "optimize-indices",
                lambda: optimize_channel_indices(
                    result.model, solver=args.solver,
                    context=f"cli:{data_path.name}",
                ),
            )
        else:
            indices = fixed_indices
            certificate = stages.run(
                "certify",
                lambda: certify_qsr(
                    result.model, supply, solver=args.solver,
                    context=f"cli:{data_path.name}",
                ),
            )
    except InfeasibleError as exc:
        return fail("infeasible", EXIT_INFEASIBLE, exc)
    except NumericalError as exc:
        return fail("no-verifiable-solution", EXIT_INFEASIBLE, exc)

    _save_atomic(save_certificate, out_path, certificate)
    extra = {
        "certificate_file": str(out_path),
        "identified_order": result.model.order,
        "identification": result.diagnostics.to_dict(),
        "lmi_residual": certificate.lmi_residual,
    }
    if indices is not None:
        extra["indices"] = {
            "rho": np.asarray(indices.rho).tolist(),
            "nu": np.asarray(indices.nu).tolist(),
        }
    report = _report(
        args, "certify-subsystem", inputs, stages, "certified", EXIT_OK, **extra
    )
    print(f"certificate written to {out_path}")
    return _finish(report_path, report)


# ---------------------------------------------------------------------------
# certify-network


def _margin_rows(certificate):
    rows = []
    for pairing in certificate.graph.pairings:
        m1, m2 = certificate.margins[pairing]
        (i, j), (a, b) = pairing.first, pairing.second
        rows.append(
            (
                pairing.label(),
                i + 1, j + 1, a + 1, b + 1,
                m1, m2, min(m1, m2),
            )
        )
    return rows


def _write_margin_table(out_dir, certificate, tolerance):
    lines = [
        "pairing,first_subsystem,first_channel,second_subsystem,"
        "second_channel,sum_rho_first_nu_second,sum_rho_second_nu_first,"
        "min_sum"
    ]
    for row in _margin_rows(certificate):
        label, i, j, a, b, m1, m2, worst = row
        lines.append(
            f"{label},{i},{j},{a},{b},{m1:.12g},{m2:.12g},{worst:.12g}"
        )
    _write_atomic(out_dir / "margins.csv", "\n".join(lines) + "\n")
    script = (
        "# Pairing excess sums against the acceptance threshold.\n"
        "# Render with: gnuplot margins.gp\n"
        'set datafile separator ","\n'
        "set key off\n"
        'set ylabel "paired index sum"\n'
        "set xtics rotate by -35\n"
        "set grid ytics\n"
        f"threshold = {-float(tolerance):.6g}\n"
        'plot "margins.csv" using 0:8:xtic(1) every ::1 with points pt 7 ps 1.5, \\\n'
        "     threshold with lines dashtype 2\n"
    )
    _write_atomic(out_dir / "margins.gp", script)


_VERDICT_EXIT = {
    Verdict.STABLE: EXIT_OK,
    Verdict.ASYMPTOTICALLY_STABLE: EXIT_OK,
    Verdict.UNDECIDED: EXIT_UNDECIDED,
}


def cmd_certify_network(args):
    stages = _Stages()
    inputs = {}
    data_dir = Path(args.data)
    out_dir = Path(args.out)
    graph_path = Path(args.graph)
    try:
        csv_paths = sorted(data_dir.glob("*.csv"))
        if not csv_paths:
            raise ValidationError(f"no trajectory CSV files under {data_dir}")
        inputs[graph_path] = _sha256(graph_path)
        graph = stages.run("load-graph", lambda: load_graph(graph_path))

        def load_all():
            records = []
            for path in csv_paths:
                inputs[path] = _sha256(path)
                sidecar = path.with_suffix(".json")
                if sidecar.exists():
                    inputs[sidecar] = _sha256(sidecar)
                u, y, metadata = load_trajectories(path)
                lag, order = _window_shape(args, metadata, path)
                records.append(SubsystemData(u=u, y=y, lag=lag, order=order))
            return records

        data = stages.run("load-data", load_all)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValidationError, WindowError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        certificate = stages.run(
            "certify-network",
            lambda: certify_network(
                data, graph,
                tolerance=args.tolerance, cost=args.cost,
                rel_tol=args.rel_tol, solver=args.solver,
            ),
        )
    except (ValidationError, WindowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    _save_atomic(save_network_certificate, out_dir / "certificate.json", certificate)
    exit_code = _VERDICT_EXIT[certificate.verdict]
    extra = {"certificate_file": str(out_dir / "certificate.json")}
    if certificate.margins:
        _write_margin_table(out_dir, certificate, args.tolerance)
        extra["margin_table"] = str(out_dir / "margins.csv")
        extra["worst_margin"] = min(
            min(m) for m in certificate.margins.values()
        )
    else:
        extra["stage_diagnostics"] = certificate.diagnostics.get("stages", {})
    report = _report(
        args, "certify-network", inputs, stages,
        certificate.verdict.value, exit_code, **extra,
    )
    print(f"verdict: {certificate.verdict.value}")
    return _finish(out_dir / "report.json", report)


# ---------------------------------------------------------------------------
# reproduce-case-study


def _sign_check(certificate):
    ok = all(
        bool(np.all(np.asarray(idx.rho) > 0.0))
        and bool(np.all(np.asarray(idx.nu) < 0.0))
        for idx in certificate.indices
    )
    return ok


def _reference_deltas(indices, window):
    table = REFERENCE_INDICES[window]
    deltas = {}
    for area, idx in enumerate(indices, start=1):
        ref = table[area]
        deltas[f"area{area}"] = {
            "rho": np.asarray(idx.rho).tolist(),
            "reference_rho": list(ref["rho"]),
            "delta_rho": (np.asarray(idx.rho) - np.asarray(ref["rho"])).tolist(),
            "nu": np.asarray(idx.nu).tolist(),
            "reference_nu": list(ref["nu"]),
            "delta_nu": (np.asarray(idx.nu) - np.asarray(ref["nu"])).tolist(),
        }
    return deltas


def cmd_reproduce_case_study(args):
    stages = _Stages()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tolerance = args.tolerance
    rel_tol = args.rel_tol if args.rel_tol is not None else CASE_STUDY_REL_TOL

    checks = {}
    index_rows = ["scenario,window,area,channel,rho,nu"]
    reference = {}
    graph_written = False

    for fault in (2, 3, 4):
        scenario_name = f"outage{fault}"
        run = stages.run(
            f"{scenario_name}/simulate",
            lambda fault=fault: run_scenario(outage_scenario(fault)),
        )
        if not graph_written:
            _save_atomic(save_graph, out_dir / "graph.json", run.graph)
            graph_written = True
        for window_name, windows in (("pre", run.pre), ("post", run.post)):
            label = f"{scenario_name}/{window_name}"
            data = [
                SubsystemData(u=w.u, y=w.y, lag=w.lag, order=w.order)
                for w in windows
            ]
            certificate = stages.run(
                f"{label}/certify",
                lambda data=data: certify_network(
                    data, run.graph,
                    tolerance=tolerance, cost=args.cost, rel_tol=rel_tol,
                ),
            )
            window_dir = out_dir / scenario_name / window_name
            window_dir.mkdir(parents=True, exist_ok=True)
            _save_atomic(
                save_network_certificate,
                window_dir / "certificate.json", certificate,
            )
            entry = {"verdict": certificate.verdict.value}
            if certificate.margins:
                _write_margin_table(window_dir, certificate, tolerance)
                worst = min(min(m) for m in certificate.margins.values())
                entry.update(
                    signs_ok=_sign_check(certificate),
                    worst_margin=worst,
                    margin_ok=bool(worst >= -tolerance),
                )
                for area, idx in enumerate(certificate.indices, start=1):
                    for channel in range(len(idx.rho)):
                        index_rows.append(
                            f"{scenario_name},{window_name},{area},"
                            f"{channel + 1},{idx.rho[channel]:.12g},"
                            f"{idx.nu[channel]:.12g}"
                        )
                if args.strict_values and fault == 4:
                    reference[label] = _reference_deltas(
                        certificate.indices, window_name
                    )
            else:
                entry.update(signs_ok=False, margin_ok=False)
                entry["stage_diagnostics"] = certificate.diagnostics.get(
                    "stages", {}
                )
            checks[label] = entry

    _write_atomic(out_dir / "indices.csv", "\n".join(index_rows) + "\n")
    failed = sorted(
        label
        for label, entry in checks.items()
        if entry["verdict"] == Verdict.UNDECIDED.value
        or not entry.get("signs_ok", False)
        or not entry.get("margin_ok", False)
    )
    verdict = "ok" if not failed else "failed"
    exit_code = EXIT_OK if not failed else EXIT_UNDECIDED
    extra = {
        "checks": checks,
        "failed_checks": failed,
        "index_table": str(out_dir / "indices.csv"),
        "tolerance": tolerance,
        "rel_tol": rel_tol,
    }
    if args.strict_values:
        extra["reference_deltas"] = reference
    report = _report(
        args, "reproduce-case-study", {}, stages, verdict, exit_code, **extra
    )
    for label in sorted(checks):
        entry = checks[label]
        worst = entry.get("worst_margin")
        worst_text = "n/a" if worst is None else f"{worst:+.2e}"
        print(f"{label}: {entry['verdict']} (worst pairing margin {worst_text})")
    print(f"case study: {verdict}")
    return _finish(out_dir / "report.json", report)


# ---------------------------------------------------------------------------
# parser


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dissipacert",
        description=(
            "Data-driven dissipativity certification: simulate the benchmark "
            "microgrid, certify subsystems or networks from trajectory "
            "records, and reproduce the four-area case study."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {_version()}"
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sim = sub.add_parser(
        "simulate", help="run one scenario and export trajectory records"
    )
    sim.add_argument("--config", required=True, help="scenario JSON file")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument(
        "--seed", type=int, default=None,
        help="reseed the setpoint dither (only when the scenario enables it)",
    )
    sim.set_defaults(func=cmd_simulate)

    sub_cert = sub.add_parser(
        "certify-subsystem",
        help="identify one record and certify it against a supply rate",
    )
    sub_cert.add_argument("--data", required=True, help="trajectory CSV")
    sub_cert.add_argument(
        "--lag", type=int, default=None,
        help="past-window length (default: sidecar metadata)",
    )
    sub_cert.add_argument(
        "--order", type=int, default=None,
        help="model order (default: sidecar metadata)",
    )
    sub_cert.add_argument(
        "--supply", default="optimize",
        help='supply JSON file with rho/nu or Q/S/R, or "optimize" (default)',
    )
    sub_cert.add_argument("--out", required=True, help="certificate JSON path")
    sub_cert.add_argument("--rel-tol", type=float, default=1e-8)
    sub_cert.add_argument("--solver", default=None)
    sub_cert.set_defaults(func=cmd_certify_subsystem)

    net = sub.add_parser(
        "certify-network",
        help="certify an interconnection from per-subsystem records",
    )
    net.add_argument(
        "--data", required=True,
        help="directory of trajectory CSVs, sorted name order = subsystem order",
    )
    net.add_argument("--graph", required=True, help="pairing-list JSON file")
    net.add_argument("--out", required=True, help="output directory")
    net.add_argument("--tolerance", type=float, default=1e-3)
    net.add_argument("--rel-tol", type=float, default=1e-8)
    net.add_argument(
        "--cost", default="sum-all",
        choices=("sum-all", "maxmin-rho", "sum-rho"),
    )
    net.add_argument(
        "--lag", type=int, default=None,
        help="past-window length for every record (default: sidecar metadata)",
    )
    net.add_argument(
        "--order", type=int, default=None,
        help="model order for every record (default: sidecar metadata)",
    )
    net.add_argument("--solver", default=None)
    net.set_defaults(func=cmd_certify_network)

    case = sub.add_parser(
        "reproduce-case-study",
        help="run the three outage scenarios and certify both windows of each",
    )
    case.add_argument("--out", required=True, help="output directory")
    case.add_argument("--tolerance", type=float, default=1e-3)
    case.add_argument(
        "--rel-tol", type=float, default=None,
        help=f"rank tolerance (default: case-study preset {CASE_STUDY_REL_TOL:g})",
    )
    case.add_argument(
        "--cost", default="sum-all",
        choices=("sum-all", "maxmin-rho", "sum-rho"),
    )
    case.add_argument(
        "--seed", type=int, default=None,
        help="accepted for interface symmetry; the baseline runs ditherless",
    )
    case.add_argument(
        "--strict-values", action="store_true",
        help="also report per-entry deltas against the reference index table "
             "(informational, never gates the exit code)",
    )
    case.set_defaults(func=cmd_reproduce_case_study)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DissipacertError as exc:
        # Anything not mapped to a specific exit code by the command itself
        # is an input problem by construction.
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
