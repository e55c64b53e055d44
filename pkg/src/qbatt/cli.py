"""Experiment runner: sweeps, protocol comparisons, and spectrum info.

Subcommands: ``sweep`` (grid of protocol runs -> CSV/JSON rows),
``compare`` (trade-off metrics between two protocols), ``local``
(local-charging baselines including random allocations), ``oracle``
(brute-force reference optimizers), ``info`` (spectrum summary).

Exit codes: 0 success, 2 validation error, 3 runtime/convergence failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

from .errors import (
    InternalError,
    ProtocolStuckError,
    QBattError,
    RangeError,
    SizeError,
    ValidationError,
)
from .fluctuation import charge_min_fluct
from .local import optimal_local_search, random_local_sample, slcp_charge
from .oracle import OracleConfig, oracle_min_fluct, oracle_min_variance
from .precision import charge_min_variance
from .report import CSV_HEADER, ChargeReport, csv_row, to_json_dict
from .spectrum import build_spectrum
from .states import (
    beta_to_temperature,
    charge_range,
    mean_energy,
    temperature_to_beta,
    thermal_distribution,
)

log = logging.getLogger("qbatt")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

GRID_EDGE_TOL = 1e-9

SWEEP_PROTOCOLS = (
    "precision",
    "fluctuation",
    "slcp",
    "local-opt-v",
    "local-opt-w",
    "oracle-v",
    "oracle-w",
)


def parse_grid(text: str) -> list[float]:
    """Grid syntax: 'min:max:step' (inclusive within 1e-9), a comma list,
    or a single value."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"grid {text!r} must be min:max:step")
        lo, hi, step = (float(p) for p in parts)
        if step <= 0 or hi < lo:
            raise ValidationError(f"grid {text!r} must have step > 0 and max >= min")
        out = []
        k = 0
        while True:
            v = lo + k * step
            if v > hi + GRID_EDGE_TOL:
                break
            out.append(min(v, hi))
            k += 1
        return out
    return [float(p) for p in text.split(",") if p.strip()]


@dataclass(frozen=True)
class Task:
    protocol: str
    d: int
    n_qubits: int
    omega: float
    temperature: float
    delta_eps: float
    seed: int
    restarts: int
    max_iters: int


def _run_task(task: Task) -> ChargeReport:
    spec = build_spectrum(task.d, task.n_qubits, task.omega)
    beta = temperature_to_beta(task.temperature, task.omega)
    if task.protocol == "precision":
        return charge_min_variance(spec, beta, task.delta_eps)
    if task.protocol == "fluctuation":
        return charge_min_fluct(spec, beta, task.delta_eps)
    if task.protocol == "slcp":
        _require_qubits(task)
        return slcp_charge(task.n_qubits, beta, task.delta_eps)
    if task.protocol in ("local-opt-v", "local-opt-w"):
        _require_qubits(task)
        rep_v, rep_w = optimal_local_search(
            task.n_qubits, beta, task.delta_eps, seed=task.seed, restarts=task.restarts
        )
        return rep_v if task.protocol == "local-opt-v" else rep_w
    if task.protocol in ("oracle-v", "oracle-w"):
        cfg = OracleConfig(restarts=task.restarts, max_iters=task.max_iters, seed=task.seed)
        fn = oracle_min_variance if task.protocol == "oracle-v" else oracle_min_fluct
        return fn(spec, beta, task.delta_eps, cfg)
    raise ValidationError(f"unknown protocol {task.protocol!r}")


def _require_qubits(task: Task) -> None:
    if task.d != 2:
        raise ValidationError(f"protocol {task.protocol!r} needs d=2 qubits, got d={task.d}")


def _scale_row(report: ChargeReport, omega: float) -> ChargeReport:
    """Dimensional columns (variance family) scale with omega^2; energies
    stay in units of omega."""
    if omega != 1.0:
        w2 = omega * omega
        report.variance *= w2
        report.fluct_sq *= w2
        if report.fluct_sq_eq32 is not None:
            report.fluct_sq_eq32 *= w2
    return report


def _build_tasks(args, protocols: list[str]) -> list[Task]:
    temps = sorted(parse_grid(args.temps)) if args.temps else [args.temp]
    if temps == [None]:
        raise ValidationError("provide --temp or --temps")
    grid = parse_grid(args.delta_eps)
    tasks = []
    for protocol in sorted(protocols):
        if protocol not in SWEEP_PROTOCOLS:
            raise ValidationError(
                f"unknown protocol {protocol!r}; pick from {', '.join(SWEEP_PROTOCOLS)}"
            )
        for temp in temps:
            spec = build_spectrum(args.d, args.n_qubits, args.omega)
            beta = temperature_to_beta(temp, args.omega)
            _, dmax = charge_range(spec, beta)
            for de in grid:
                if de < -GRID_EDGE_TOL or de > dmax + GRID_EDGE_TOL:
                    log.warning(
                        "skipping out-of-range point protocol=%s T=%g delta_eps=%g (max %g)",
                        protocol, temp, de, dmax,
                    )
                    continue
                tasks.append(
                    Task(
                        protocol=protocol,
                        d=args.d,
                        n_qubits=args.n_qubits,
                        omega=args.omega,
                        temperature=temp,
                        delta_eps=de,
                        seed=args.seed,
                        restarts=args.restarts,
                        max_iters=args.oracle_iters,
                    )
                )
    return tasks


def _run_tasks(tasks: list[Task], jobs: int) -> list[ChargeReport]:
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_task, tasks))
    return [_run_task(t) for t in tasks]


def _emit_rows(rows: list[ChargeReport], args) -> None:
    include_timing = not args.no_timing
    if args.format == "csv":
        lines = [CSV_HEADER]
        lines.extend(csv_row(r, include_timing) for r in rows)
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps([to_json_dict(r, include_timing) for r in rows], indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _export_trace(task: Task, trace_dir: str) -> None:
    """Audit/replay JSON for the unitary protocols (phase structure rebuilt
    from the public operations)."""
    import os

    from .fluctuation import best_completion, select_m_tilde
    from .precision import TargetSpec, nearest_level_k, step1_reorder, step2_schedule
    from .trace import apply_permutation, export_steps, new_trace

    spec = build_spectrum(task.d, task.n_qubits, task.omega)
    beta = temperature_to_beta(task.temperature, task.omega)
    initial = thermal_distribution(spec, beta)
    if task.protocol == "precision":
        trace = new_trace(initial)
        if task.delta_eps > 0:
            eps = mean_energy(initial) + task.delta_eps
            apply_permutation(trace, step1_reorder(initial, eps)[0])
            step2_schedule(trace, TargetSpec(eps_target=eps, k=nearest_level_k(eps)))
    elif task.protocol == "fluctuation":
        trace, _ = best_completion(initial, select_m_tilde(initial, task.delta_eps))
    else:
        return
    name = f"{task.protocol}_d{task.d}_n{task.n_qubits}_T{task.temperature:g}_de{task.delta_eps:.6f}.jsonl"
    with open(os.path.join(trace_dir, name), "w") as fh:
        fh.write(export_steps(trace) + "\n")


def cmd_sweep(args) -> int:
    protocols = [p.strip() for p in args.protocol.split(",") if p.strip()]
    tasks = _build_tasks(args, protocols)
    rows = [_scale_row(r, args.omega) for r in _run_tasks(tasks, args.jobs)]
    if args.trace_dir:
        for task in tasks:
            _export_trace(task, args.trace_dir)
    _emit_rows(rows, args)
    return EXIT_OK


def cmd_local(args) -> int:
    protocols = [p.strip() for p in args.protocol.split(",") if p.strip()]
    sampled = [p for p in protocols if p == "local-rand"]
    direct = [p for p in protocols if p != "local-rand"]
    rows = [_scale_row(r, args.omega) for r in _run_tasks(_build_tasks(args, direct), args.jobs)]
    if sampled:
        temps = sorted(parse_grid(args.temps)) if args.temps else [args.temp]
        grid = parse_grid(args.delta_eps)
        spec = build_spectrum(2, args.n_qubits, args.omega)
        for temp in temps:
            beta = temperature_to_beta(temp, args.omega)
            _, dmax = charge_range(spec, beta)
            eps0 = mean_energy(thermal_distribution(spec, beta))
            for de in grid:
                if de < -GRID_EDGE_TOL or de > dmax + GRID_EDGE_TOL:
                    log.warning("skipping out-of-range local-rand point T=%g de=%g", temp, de)
                    continue
                pairs = random_local_sample(args.n_qubits, beta, de, args.count, args.seed)
                for k, (var, fluct) in enumerate(pairs):
                    rows.append(
                        _scale_row(
                            ChargeReport(
                                protocol="local-rand",
                                d=2,
                                n_qubits=args.n_qubits,
                                temperature=temp,
                                delta_eps=de,
                                eps0=eps0,
                                variance=var,
                                fluct_sq=fluct,
                                mean_work=de,
                                n_steps=args.n_qubits,
                                seed=args.seed + k,
                            ),
                            args.omega,
                        )
                    )
    _emit_rows(rows, args)
    return EXIT_OK


def cmd_oracle(args) -> int:
    protocols = [p.strip() for p in args.protocol.split(",") if p.strip()]
    for p in protocols:
        if p not in ("oracle-v", "oracle-w"):
            raise ValidationError(f"oracle subcommand runs oracle-v/oracle-w, got {p!r}")
    tasks = _build_tasks(args, protocols)
    rows = [_scale_row(r, args.omega) for r in _run_tasks(tasks, args.jobs)]
    _emit_rows(rows, args)
    return EXIT_OK


@dataclass(frozen=True)
class CompareSummary:
    """Trade-off metrics between a variance-optimal and a
    fluctuation-optimal protocol on one temperature's grid."""

    temperature: float
    d_max_v: float
    d_max_w: float
    area_v: float
    area_w: float
    ratio_d_max: float
    ratio_area: float


def _trapezoid(xs: list[float], ys: list[float]) -> float:
    return sum(
        0.5 * (ys[i] + ys[i + 1]) * (xs[i + 1] - xs[i]) for i in range(len(xs) - 1)
    )


def _fluct_curve(row: ChargeReport) -> float:
    """A protocol's work-fluctuation curve: the closed-form column when the
    protocol publishes one (the fluctuation protocol's figure curve),
    otherwise the exact TPM value."""
    return row.fluct_sq if row.fluct_sq_eq32 is None else row.fluct_sq_eq32


def compare_rows(rows_v, rows_w, temperature: float) -> CompareSummary:
    """Metrics from matched sweep rows of the variance-optimizing protocol
    (rows_v) and the fluctuation-optimizing protocol (rows_w)."""
    grid_v = [r.delta_eps for r in rows_v]
    grid_w = [r.delta_eps for r in rows_w]
    if grid_v != grid_w:
        raise ValidationError(
            f"grids differ at T={temperature}: {len(grid_v)} vs {len(grid_w)} points"
        )
    dv = [rw.variance - rv.variance for rv, rw in zip(rows_v, rows_w)]
    dw = [_fluct_curve(rv) - _fluct_curve(rw) for rv, rw in zip(rows_v, rows_w)]
    d_max_v = max(dv) if dv else 0.0
    d_max_w = max(dw) if dw else 0.0
    area_v = _trapezoid(grid_v, dv)
    area_w = _trapezoid(grid_v, dw)
    return CompareSummary(
        temperature=temperature,
        d_max_v=d_max_v,
        d_max_w=d_max_w,
        area_v=area_v,
        area_w=area_w,
        ratio_d_max=d_max_v / d_max_w if d_max_w else 0.0,
        ratio_area=area_v / area_w if area_w else 0.0,
    )


def compare_protocols(
    d: int,
    n_qubits: int,
    beta: float,
    grid: list[float],
    omega: float = 1.0,
    protocols: tuple[str, str] = ("precision", "fluctuation"),
) -> CompareSummary:
    """Run both protocols on one grid and summarize the trade-off."""
    spec = build_spectrum(d, n_qubits, omega)
    _, dmax = charge_range(spec, beta)
    pts = [de for de in grid if -GRID_EDGE_TOL <= de <= dmax + GRID_EDGE_TOL]
    runner = {
        "precision": lambda de: charge_min_variance(spec, beta, de),
        "fluctuation": lambda de: charge_min_fluct(spec, beta, de),
    }
    for p in protocols:
        if p not in runner:
            raise ValidationError(f"compare supports precision/fluctuation, got {p!r}")
    rows_v = [runner[protocols[0]](de) for de in pts]
    rows_w = [runner[protocols[1]](de) for de in pts]
    return compare_rows(rows_v, rows_w, beta_to_temperature(beta, omega))


def _rows_from_csv(path: str) -> dict[tuple[str, float], list[ChargeReport]]:
    import csv as csvmod

    groups: dict[tuple[str, float], list[ChargeReport]] = {}
    with open(path, newline="") as fh:
        reader = csvmod.DictReader(fh)
        if reader.fieldnames != CSV_HEADER.split(","):
            raise ValidationError(f"CSV header mismatch in {path}")
        for rec in reader:
            rep = ChargeReport(
                protocol=rec["protocol"],
                d=int(rec["d"]),
                n_qubits=int(rec["n_qubits"]),
                temperature=float(rec["temperature"]),
                delta_eps=float(rec["delta_eps"]),
                eps0=float(rec["eps0"]),
                variance=float(rec["variance"]),
                fluct_sq=float(rec["fluct_sq"]),
                mean_work=float(rec["mean_work"]),
                n_steps=int(rec["n_steps"]),
                fluct_sq_eq32=float(rec["fluct_sq_eq32"]) if rec["fluct_sq_eq32"] else None,
            )
            groups.setdefault((rep.protocol, rep.temperature), []).append(rep)
    for rows in groups.values():
        rows.sort(key=lambda r: r.delta_eps)
    return groups


def cmd_compare(args) -> int:
    protocols = tuple(p.strip() for p in args.protocol.split(",") if p.strip())
    if len(protocols) != 2:
        raise ValidationError("compare needs exactly two protocols")
    summaries = []
    if args.from_csv:
        groups = _rows_from_csv(args.from_csv)
        temps = sorted({t for (_, t) in groups})
        for temp in temps:
            key_v, key_w = (protocols[0], temp), (protocols[1], temp)
            if key_v not in groups or key_w not in groups:
                raise ValidationError(f"missing protocol rows at T={temp}")
            summaries.append(compare_rows(groups[key_v], groups[key_w], temp))
    else:
        temps = sorted(parse_grid(args.temps)) if args.temps else [args.temp]
        grid = parse_grid(args.delta_eps)
        for temp in temps:
            beta = temperature_to_beta(temp, args.omega)
            summaries.append(
                compare_protocols(
                    args.d, args.n_qubits, beta, grid, args.omega, protocols
                )
            )
    payload = [asdict(s) for s in summaries]
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_info(args) -> int:
    spec = build_spectrum(args.d, args.n_qubits, args.omega)
    temps = sorted(parse_grid(args.temps)) if args.temps else ([args.temp] if args.temp is not None else [])
    per_temp = []
    for temp in temps:
        beta = temperature_to_beta(temp, args.omega)
        eps0 = mean_energy(thermal_distribution(spec, beta))
        _, dmax = charge_range(spec, beta)
        per_temp.append({"temperature": temp, "eps0": eps0, "delta_eps_max": dmax})
    payload = {
        "d": spec.d,
        "n_qubits": spec.n_subsystems,
        "omega": spec.omega,
        "dim": spec.dim,
        "degeneracies": list(spec.degeneracies),
        "temperatures": per_temp,
    }
    if args.format == "json":
        text = json.dumps(payload, indent=2) + "\n"
    else:
        lines = [
            f"spectrum: d={spec.d} N={spec.n_subsystems} omega={spec.omega} dim={spec.dim}",
            "level degeneracies: " + " ".join(f"{m}:{g}" for m, g in spec.levels),
        ]
        for row in per_temp:
            lines.append(
                f"T={row['temperature']:g}: eps0={row['eps0']:.9f} "
                f"delta_eps_max={row['delta_eps_max']:.9f}"
            )
        text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser, need_grid: bool = True) -> None:
    parser.add_argument("--d", type=int, default=2, help="local dimension")
    parser.add_argument("--n-qubits", type=int, default=1, dest="n_qubits",
                        help="number of identical subsystems")
    parser.add_argument("--omega", type=float, default=1.0, help="level spacing")
    parser.add_argument("--temp", type=float, default=None, help="single temperature")
    parser.add_argument("--temps", type=str, default=None,
                        help="temperature grid min:max:step or comma list")
    if need_grid:
        parser.add_argument("--delta-eps", type=str, required=True, dest="delta_eps",
                            help="charge grid min:max:step or comma list")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--restarts", type=int, default=64)
    parser.add_argument("--oracle-iters", type=int, default=2000, dest="oracle_iters",
                        help="Nelder-Mead iteration cap per oracle restart")
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--no-timing", action="store_true", dest="no_timing",
                        help="blank the elapsed_ms column for byte-stable output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qbatt",
        description="Charging protocols for finite-dimensional quantum batteries",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run protocols over a (T, delta_eps) grid")
    _add_common(p)
    p.add_argument("--protocol", type=str, default="precision",
                   help="comma list of " + ", ".join(SWEEP_PROTOCOLS))
    p.add_argument("--trace-dir", type=str, default=None, dest="trace_dir",
                   help="also write per-run step logs (JSON lines) here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="trade-off metrics between two protocols")
    _add_common(p)
    p.add_argument("--protocol", type=str, default="precision,fluctuation")
    p.add_argument("--from-csv", type=str, default=None, dest="from_csv",
                   help="read sweep rows instead of recomputing")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("local", help="local charging baselines for N qubits")
    _add_common(p)
    p.add_argument("--protocol", type=str, default="slcp,local-opt-v,local-opt-w")
    p.add_argument("--count", type=int, default=1, help="random allocations per point")
    p.set_defaults(func=cmd_local)

    p = sub.add_parser("oracle", help="brute-force reference optimizers")
    _add_common(p)
    p.add_argument("--protocol", type=str, default="oracle-v,oracle-w")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("info", help="spectrum summary")
    _add_common(p, need_grid=False)
    p.set_defaults(func=cmd_info)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, RangeError, SizeError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except (ProtocolStuckError, InternalError, QBattError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
