#!/usr/bin/env python3
"""Render publication-style panels from qbatt sweep CSVs.

Panels mirror the reference figure layouts: per-temperature variance or
work-fluctuation curves against the charge (blue at the lowest
temperature ramping to red at the highest), protocol-comparison overlays
with the enclosed area shaded, and local-vs-global overlays.

This tool is a strict CSV consumer: it never recomputes any physics, it
draws exactly the rows it is given (joined in ascending charge order, no
resampling), and it fails loudly if the schema or the filter selection is
empty or drifted.
"""

from __future__ import annotations

import argparse
import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

EXPECTED_HEADER = [
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

PANELS = ("variance", "fluct", "compare", "local")


class PlotError(SystemExit):
    def __init__(self, message: str):
        super().__init__(f"plots: {message}")


def load_rows(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != EXPECTED_HEADER:
            raise PlotError(
                f"schema drift in {path}: expected columns {EXPECTED_HEADER}, "
                f"got {reader.fieldnames}"
            )
        rows = []
        for rec in reader:
            rows.append(
                {
                    "protocol": rec["protocol"],
                    "d": int(rec["d"]),
                    "n_qubits": int(rec["n_qubits"]),
                    "temperature": float(rec["temperature"]),
                    "delta_eps": float(rec["delta_eps"]),
                    "variance": float(rec["variance"]),
                    "fluct_sq": float(rec["fluct_sq"]),
                    "fluct_sq_eq32": float(rec["fluct_sq_eq32"]) if rec["fluct_sq_eq32"] else None,
                }
            )
    if not rows:
        raise PlotError(f"{path} holds no data rows")
    return rows


def apply_filters(rows: list[dict], args) -> list[dict]:
    out = rows
    if args.d is not None:
        out = [r for r in out if r["d"] == args.d]
    if args.n_qubits is not None:
        out = [r for r in out if r["n_qubits"] == args.n_qubits]
    if args.protocol:
        wanted = [p.strip() for p in args.protocol.split(",") if p.strip()]
        out = [r for r in out if r["protocol"] in wanted]
    if args.temps:
        wanted_t = {float(t) for t in args.temps.split(",")}
        out = [r for r in out if r["temperature"] in wanted_t]
    if not out:
        raise PlotError(
            "empty selection after filters "
            f"(d={args.d}, n_qubits={args.n_qubits}, protocol={args.protocol!r}, "
            f"temps={args.temps!r})"
        )
    return out


def by_temperature(rows: list[dict]) -> dict[float, list[dict]]:
    groups: dict[float, list[dict]] = defaultdict(list)
    for r in rows:
        groups[r["temperature"]].append(r)
    for g in groups.values():
        g.sort(key=lambda r: r["delta_eps"])
    return dict(sorted(groups.items()))


def temperature_color(index: int, count: int):
    """Blue for the coldest curve ramping to red for the hottest."""
    frac = 0.0 if count <= 1 else index / (count - 1)
    return plt.get_cmap("coolwarm")(frac)


def fluct_value(row: dict) -> float:
    return row["fluct_sq"] if row["fluct_sq_eq32"] is None else row["fluct_sq_eq32"]


def panel_variance(rows: list[dict], args, ax) -> None:
    groups = by_temperature(rows)
    for i, (temp, g) in enumerate(groups.items()):
        ax.plot(
            [r["delta_eps"] for r in g],
            [r["variance"] for r in g],
            color=temperature_color(i, len(groups)),
            label=f"T={temp:g}",
        )
    ax.set_ylabel(r"$V$ $[\omega^2]$")


def panel_fluct(rows: list[dict], args, ax) -> None:
    groups = by_temperature(rows)
    for i, (temp, g) in enumerate(groups.items()):
        ax.plot(
            [r["delta_eps"] for r in g],
            [fluct_value(r) for r in g],
            color=temperature_color(i, len(groups)),
            label=f"T={temp:g}",
        )
    ax.set_ylabel(r"$(\Delta W)^2$ $[\omega^2]$")


def _split_protocols(rows: list[dict], args) -> tuple[str, str, list[dict], list[dict]]:
    names = [p.strip() for p in (args.protocol or "precision,fluctuation").split(",")]
    if len(names) != 2:
        raise PlotError("compare panel needs exactly two protocols")
    first = [r for r in rows if r["protocol"] == names[0]]
    second = [r for r in rows if r["protocol"] == names[1]]
    if not first or not second:
        raise PlotError(f"compare panel: missing rows for {names}")
    return names[0], names[1], first, second


def panel_compare(rows: list[dict], args, axes) -> None:
    name_v, name_w, first, second = _split_protocols(rows, args)
    ax_v, ax_w = axes
    groups_v = by_temperature(first)
    groups_w = by_temperature(second)
    temps = sorted(set(groups_v) & set(groups_w))
    if not temps:
        raise PlotError("compare panel: no common temperatures")
    for i, temp in enumerate(temps):
        color = temperature_color(i, len(temps))
        a, b = groups_v[temp], groups_w[temp]
        xs_a = [r["delta_eps"] for r in a]
        xs_b = [r["delta_eps"] for r in b]
        ax_v.plot(xs_a, [r["variance"] for r in a], "--", color=color)
        ax_v.plot(xs_b, [r["variance"] for r in b], "-", color=color, label=f"T={temp:g}")
        ax_w.plot(xs_a, [fluct_value(r) for r in a], "--", color=color)
        ax_w.plot(xs_b, [fluct_value(r) for r in b], "-", color=color)
        if xs_a == xs_b:
            ax_v.fill_between(
                xs_a,
                [r["variance"] for r in a],
                [r["variance"] for r in b],
                color=color,
                alpha=0.2,
            )
            ax_w.fill_between(
                xs_a,
                [fluct_value(r) for r in a],
                [fluct_value(r) for r in b],
                color=color,
                alpha=0.2,
            )
    ax_v.set_ylabel(r"$V$ $[\omega^2]$")
    ax_w.set_ylabel(r"$(\Delta W)^2$ $[\omega^2]$")
    ax_v.set_title(f"dashed: {name_v}   solid: {name_w}")


LOCAL_STYLES = {"slcp": "-.", "local-opt-v": "--", "local-opt-w": "--"}


def panel_local(rows: list[dict], args, ax) -> None:
    metric = args.metric
    value = (lambda r: r["variance"]) if metric == "variance" else fluct_value
    protocols = sorted({r["protocol"] for r in rows})
    temps = sorted({r["temperature"] for r in rows})
    for name in protocols:
        sel = by_temperature([r for r in rows if r["protocol"] == name])
        style = LOCAL_STYLES.get(name, "-")
        for temp, g in sel.items():
            i = temps.index(temp)
            ax.plot(
                [r["delta_eps"] for r in g],
                [value(r) for r in g],
                style,
                color=temperature_color(i, len(temps)),
                label=f"{name} T={temp:g}",
            )
    ax.set_ylabel(
        r"$V$ $[\omega^2]$" if metric == "variance" else r"$(\Delta W)^2$ $[\omega^2]$"
    )


def render(args) -> None:
    rows = apply_filters(load_rows(args.csv), args)
    if args.panel == "compare":
        fig, axes = plt.subplots(2, 1, figsize=(6, 7), sharex=True)
        panel_compare(rows, args, axes)
        axes[1].set_xlabel(r"$\Delta\epsilon$ $[\omega]$")
        axes[0].legend(fontsize=8)
    else:
        fig, ax = plt.subplots(figsize=(6, 4))
        if args.panel == "variance":
            panel_variance(rows, args, ax)
        elif args.panel == "fluct":
            panel_fluct(rows, args, ax)
        else:
            panel_local(rows, args, ax)
        ax.set_xlabel(r"$\Delta\epsilon$ $[\omega]$")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, dpi=args.dpi)
    plt.close(fig)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots.py", description="Render figure panels from qbatt sweep CSVs"
    )
    parser.add_argument("--csv", required=True, help="sweep CSV path")
    parser.add_argument("--panel", required=True, choices=PANELS)
    parser.add_argument("--d", type=int, default=None)
    parser.add_argument("--n-qubits", type=int, default=None, dest="n_qubits")
    parser.add_argument("--protocol", type=str, default=None,
                        help="comma list of protocol tags to keep")
    parser.add_argument("--temps", type=str, default=None,
                        help="comma list of temperatures to keep")
    parser.add_argument("--metric", choices=("variance", "fluct"), default="variance",
                        help="quantity shown by the local panel")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--dpi", type=int, default=150)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    render(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
