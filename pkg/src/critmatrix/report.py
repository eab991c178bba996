"""Report rendering: delimited matrix output plus matplotlib figures.

The report path writes the criticality matrix as CSV next to a set of PNG
figures: rank distribution before/after guards, per-fault criticality
waterfall, the fault traceability graph, and (for simulator runs) the
minimum-gap timeline.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .criticality import Fcm, RankBand, fcm_to_csv
from .relations import FaultTraceabilityGraph
from .sim import ScenarioOutcome

RANK_COLORS = {
    RankBand.NO_EFFECT: "#9e9e9e",
    RankBand.NEGLIGIBLE: "#7cb342",
    RankBand.LOW: "#c0ca33",
    RankBand.MEDIUM: "#fdd835",
    RankBand.HIGH: "#fb8c00",
    RankBand.VERY_HIGH: "#e53935",
    RankBand.CATASTROPHIC: "#8e24aa",
}

EDGE_COLORS = {"influence": "#1565c0", "inheritance": "#2e7d32", "overlap": "#6d4c41"}


def fig_rank_distribution(matrix: Fcm):
    """Row counts per rank band, before and after guards, side by side."""
    bands = list(RankBand)
    before = [sum(1 for r in matrix.rows if r.rank_before is b) for b in bands]
    after = [sum(1 for r in matrix.rows if r.rank_after is b) for b in bands]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    x = range(len(bands))
    ax.bar([i - 0.2 for i in x], before, width=0.4, label="before guards",
           color=[RANK_COLORS[b] for b in bands], edgecolor="black", linewidth=0.5)
    ax.bar([i + 0.2 for i in x], after, width=0.4, label="after guards",
           color=[RANK_COLORS[b] for b in bands], alpha=0.55, edgecolor="black",
           linewidth=0.5, hatch="//")
    ax.set_xticks(list(x))
    ax.set_xticklabels([b.display for b in bands], rotation=20, ha="right")
    ax.set_ylabel("faults")
    ax.set_title(f"Criticality rank distribution: {matrix.project_name}")
    ax.legend()
    fig.tight_layout()
    return fig


def fig_criticality_waterfall(matrix: Fcm):
    """Per-fault criticality before vs after guards, most critical first."""
    rows = sorted(matrix.rows, key=lambda r: r.criticality_before, reverse=True)
    names = [r.fault.fault_name + ("" if r.fault.disambiguator is None
                                   else f"#{r.fault.disambiguator}") for r in rows]
    before = [float(r.criticality_before) for r in rows]
    after = [float(r.criticality_after) for r in rows]
    height = max(3.0, 0.3 * len(rows) + 1.5)
    fig, ax = plt.subplots(figsize=(9, height))
    y = range(len(rows))
    ax.barh([i + 0.18 for i in y], before, height=0.36, label="before",
            color=[RANK_COLORS[r.rank_before] for r in rows])
    ax.barh([i - 0.18 for i in y], after, height=0.36, label="after",
            color=[RANK_COLORS[r.rank_after] for r in rows])
    ax.axvline(0.0, color="black", linewidth=0.8)
    ax.set_yticks(list(y))
    ax.set_yticklabels(names, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("criticality")
    ax.set_title("Fault criticality before/after safety guards")
    ax.legend(loc="lower right")
    fig.tight_layout()
    return fig


def fig_traceability_graph(graph: FaultTraceabilityGraph, matrix: Fcm | None = None):
    """Directed relation graph on a circle, colored by relation kind."""
    keys = sorted(graph.nodes, key=lambda k: graph.nodes[k].qualified_id.sort_key())
    n = max(1, len(keys))
    angle = {k: 2 * math.pi * i / n for i, k in enumerate(keys)}
    radius = 1.0
    xy = {k: (radius * math.cos(a), radius * math.sin(a)) for k, a in angle.items()}

    fig, ax = plt.subplots(figsize=(9, 9))
    for edge in graph.edges:
        x0, y0 = xy[edge.source]
        x1, y1 = xy[edge.target]
        ax.annotate("", xy=(x1, y1), xytext=(x0, y0),
                    arrowprops=dict(arrowstyle="-|>", lw=1.0, shrinkA=12, shrinkB=12,
                                    color=EDGE_COLORS[edge.kind.value],
                                    connectionstyle="arc3,rad=0.12"))
    for key in keys:
        x, y = xy[key]
        color = "#90caf9"
        if matrix is not None:
            color = RANK_COLORS[matrix.row(key).rank_after]
        ax.plot([x], [y], "o", markersize=11, color=color, markeredgecolor="black",
                markeredgewidth=0.6, zorder=3)
        label = graph.nodes[key].display_name
        ax.annotate(label, (x * 1.12, y * 1.12), ha="center", va="center", fontsize=6.5)
    handles = [plt.Line2D([0], [0], color=c, lw=2, label=k) for k, c in EDGE_COLORS.items()]
    ax.legend(handles=handles, loc="lower left", fontsize=8)
    ax.set_xlim(-1.45, 1.45)
    ax.set_ylim(-1.45, 1.45)
    ax.set_aspect("equal")
    ax.axis("off")
    ax.set_title("Fault traceability graph (node color = rank after guards)")
    fig.tight_layout()
    return fig


def fig_min_gap(outcome: ScenarioOutcome, title: str = "Minimum inter-vehicle gap",
                vehicle_length: float = 4.5):
    """Smallest same-lane gap over time, with the collision threshold."""
    times = [step.time for step in outcome.trace]
    gaps = []
    for step in outcome.trace:
        per_lane: dict[int, list] = {}
        for v in step.vehicles:
            per_lane.setdefault(v.lane, []).append(v)
        worst = math.inf
        for vehicles in per_lane.values():
            ordered = sorted(vehicles, key=lambda v: v.position)
            for behind, ahead in zip(ordered, ordered[1:]):
                worst = min(worst, ahead.position - vehicle_length - behind.position)
            for appeared, lane, position in outcome.obstacles:
                if appeared > step.time or lane != ordered[0].lane:
                    continue
                for v in ordered:
                    if position > v.position - vehicle_length:
                        worst = min(worst, position - v.position)
        gaps.append(worst if worst != math.inf else float("nan"))
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(times, gaps, lw=1.2)
    ax.axhline(0.0, color="red", lw=1.0, linestyle="--", label="collision threshold")
    for time_appeared, lane, position in outcome.obstacles:
        ax.axvline(time_appeared, color="orange", lw=0.8, linestyle=":")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("gap [m]")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return fig


def write_report(matrix: Fcm, graph: FaultTraceabilityGraph, out_dir: str | Path,
                 outcomes: dict[str, ScenarioOutcome] | None = None) -> list[Path]:
    """Render the full report bundle; returns the files written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    csv_path = out / "fcm.csv"
    csv_path.write_text(fcm_to_csv(matrix), encoding="utf-8")
    written.append(csv_path)

    for name, fig in (
        ("rank_distribution.png", fig_rank_distribution(matrix)),
        ("criticality_waterfall.png", fig_criticality_waterfall(matrix)),
        ("traceability_graph.png", fig_traceability_graph(graph, matrix)),
    ):
        path = out / name
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    for name, outcome in (outcomes or {}).items():
        fig = fig_min_gap(outcome, title=f"Minimum gap: {name}")
        path = out / f"min_gap_{name}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    return written
