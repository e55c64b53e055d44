"""Uniform result record for protocol runs and its CSV/JSON serialization.

The CSV header is a stable contract consumed by the plotting component;
do not reorder or rename columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

CSV_COLUMNS = [
    "protocol",
    "d",
    "n_qubits",
    "temperature",
    "delta_eps",
    "eps0",
    "variance",
    "fluct_sq",
    "fluct_sq_eq32",
    "mean_work",
    "n_steps",
    "seed",
    "elapsed_ms",
]

CSV_HEADER = ",".join(CSV_COLUMNS)


@dataclass
class ChargeReport:
    """Outcome of one protocol run.

    Energies (delta_eps, eps0, mean_work) are in units of omega; variance,
    fluct_sq and fluct_sq_eq32 in units of omega^2.  ``extras`` carries
    optional convergence metadata (JSON output only, never CSV).
    """

    protocol: str
    d: int
    n_qubits: int
    temperature: float
    delta_eps: float
    eps0: float
    variance: float
    fluct_sq: float
    mean_work: float
    n_steps: int
    fluct_sq_eq32: float | None = None
    seed: int | None = None
    elapsed_ms: float | None = None
    extras: dict = field(default_factory=dict)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_row(report: ChargeReport, include_timing: bool = True) -> str:
    """One CSV line in the fixed column order; optionals render empty."""
    values = [
        report.protocol,
        report.d,
        report.n_qubits,
        report.temperature,
        report.delta_eps,
        report.eps0,
        report.variance,
        report.fluct_sq,
        report.fluct_sq_eq32,
        report.mean_work,
        report.n_steps,
        report.seed,
        report.elapsed_ms if include_timing else None,
    ]
    return ",".join(_fmt(v) for v in values)


def to_json_dict(report: ChargeReport, include_timing: bool = True) -> dict:
    """Row as a JSON-ready dict with the same keys as the CSV columns."""
    out = {
        "protocol": report.protocol,
        "d": report.d,
        "n_qubits": report.n_qubits,
        "temperature": report.temperature,
        "delta_eps": report.delta_eps,
        "eps0": report.eps0,
        "variance": report.variance,
        "fluct_sq": report.fluct_sq,
        "fluct_sq_eq32": report.fluct_sq_eq32,
        "mean_work": report.mean_work,
        "n_steps": report.n_steps,
        "seed": report.seed,
        "elapsed_ms": report.elapsed_ms if include_timing else None,
    }
    if report.extras:
        out["extras"] = report.extras
    return out
