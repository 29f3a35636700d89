"""Render pipeline artifacts into a human-readable report.

Reads the JSON artifacts a pipeline run left in a directory and writes,
next to them, a plain-text summary plus a ``plots/`` folder holding CSV
tables and PNG figures (utility comparison, lane delays against the
level-of-service bands, and the surrogate delay-versus-green curves).
Output is deterministic: no timestamps, keys always sorted.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .los import DEFAULT_LOS_THRESHOLDS, delay_bound
from .pipeline import ARTIFACT_FILES, read_artifact

log = logging.getLogger(__name__)


def _fmt_units(units: dict[str, int]) -> list[str]:
    if not units:
        return ["  (no units installed)"]
    width = max(len(l) for l in units)
    return [f"  {lane:<{width}}  {units[lane]} unit(s)" for lane in sorted(units)]


def _arm_lines(title: str, arm: dict) -> list[str]:
    lines = [title, "-" * len(title)]
    lines.append(f"  total units: {arm['total_units']}   cost: {arm['cost']}")
    lines.append(f"  energy delivered: {arm['utility_wh']:.1f} Wh "
                 f"({arm['utility_rate_wh_per_h']:.1f} Wh/h after warmup)")
    lines.extend(_fmt_units(arm["units"]))
    return lines


def _write_summary(out: Path, compare: dict, solution: dict | None) -> Path:
    path = out / "summary.txt"
    sc = compare["scenario"]
    lines = ["Wireless charging deployment plan", "=" * 33, ""]
    lines.append(f"Budget: {sc['budget']}   unit cost: {sc['wcu']['unit_cost']}   "
                 f"LOS limit: {sc['los_limit']} "
                 f"(mean control delay <= {delay_bound(sc['los_limit']):.0f} s)")
    lines.append("")

    if compare["status"] == "no_candidates":
        lines.append("No approach lane graded at the target level of service;")
        lines.append("there is nothing to place units on. No plan was produced.")
        path.write_text("\n".join(lines) + "\n")
        return path

    lines.extend(_arm_lines("Optimized placement and timing", compare["optimized"]))
    lines.append("")
    lines.append("  signal greens (s, phase 0 / phase 1):")
    for node, greens in sorted(compare["optimized"]["greens"].items()):
        lines.append(f"    {node:<8} {greens[0]:.1f} / {greens[1]:.1f}")
    lines.append("")
    lines.extend(_arm_lines("Baseline placement (betweenness-ranked, base timings)",
                            compare["baseline"]))
    lines.append("")

    ratio = compare["utility_ratio"]
    ratio_txt = f"{ratio:.3f}" if ratio is not None else "undefined (baseline rate is 0)"
    lines.append(f"Utility ratio (optimized / baseline): {ratio_txt}")
    lines.append("")

    audit = compare["audit"]
    lines.append(f"Constraint audit: {'PASS' if audit['ok'] else 'FAIL'}")
    for name, ok in sorted(audit["checks"].items()):
        lines.append(f"  {name:<15} {'ok' if ok else 'VIOLATED'}")
    for failure in audit["failures"]:
        lines.append(f"  ! {failure}")

    if solution is not None and solution.get("validated"):
        lines.append("")
        lines.append("Candidate-lane delay after re-simulation (s):")
        for lane, d in sorted(solution["validated"]["lane_delay"].items()):
            lines.append(f"  {lane:<14} {d:.2f}")

    path.write_text("\n".join(lines) + "\n")
    return path


def _write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _comparison_outputs(plots: Path, compare: dict) -> list[Path]:
    arms = [("optimized", compare["optimized"]), ("baseline", compare["baseline"])]
    rows = [[name, arm["utility_wh"], arm["utility_rate_wh_per_h"],
             arm["total_units"], arm["cost"]] for name, arm in arms]
    written = [_write_csv(plots / "utility_comparison.csv",
                          ["arm", "utility_wh", "utility_rate_wh_per_h",
                           "total_units", "cost"], rows)]

    fig, ax = plt.subplots(figsize=(5, 4))
    names = [name for name, _ in arms]
    rates = [arm["utility_rate_wh_per_h"] for _, arm in arms]
    ax.bar(names, rates, color=["#2b7a46", "#888888"])
    ax.set_ylabel("energy delivered (Wh per hour)")
    ax.set_title("Charging utility by planning arm")
    fig.tight_layout()
    out = plots / "utility_comparison.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    written.append(out)
    return written


def _lane_delay_outputs(plots: Path, candidates: dict, solution: dict,
                        los_limit: str) -> list[Path]:
    base_delay = candidates["base_delay"]
    validated = (solution.get("validated") or {}).get("lane_delay", {})
    units = solution["deployment"]["units"]
    lanes = sorted(base_delay)
    rows = [[lane, base_delay[lane], validated.get(lane, ""), units.get(lane, 0)]
            for lane in lanes]
    written = [_write_csv(plots / "lane_delays.csv",
                          ["lane", "base_delay_s", "plan_delay_s", "units"], rows)]
    if not lanes:
        return written

    fig, ax = plt.subplots(figsize=(max(5.0, 0.45 * len(lanes)), 4))
    xs = range(len(lanes))
    ax.bar([x - 0.2 for x in xs], [base_delay[l] for l in lanes],
           width=0.4, label="base timings", color="#888888")
    ax.bar([x + 0.2 for x in xs],
           [validated.get(l, float("nan")) for l in lanes],
           width=0.4, label="optimized plan", color="#2b7a46")
    for grade, bound in DEFAULT_LOS_THRESHOLDS:
        ax.axhline(bound, color="#cccccc", linewidth=0.7, zorder=0)
        ax.text(len(lanes) - 0.4, bound, str(grade), fontsize=7,
                va="bottom", color="#666666")
    ax.axhline(delay_bound(los_limit), color="#c0392b", linewidth=1.2,
               linestyle="--", label=f"LOS {los_limit} bound")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(lanes, rotation=90, fontsize=7)
    ax.set_ylabel("mean control delay (s)")
    ax.set_title("Candidate-lane delay")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = plots / "lane_delays.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    written.append(out)
    return written


def _surrogate_outputs(plots: Path, surrogate: dict) -> list[Path]:
    lanes = surrogate["lanes"]
    rows = []
    for lane in sorted(lanes):
        doc = lanes[lane]
        for g, d in zip(doc["g_levels"], doc["delay"]):
            rows.append([lane, g, d])
    written = [_write_csv(plots / "delay_vs_green.csv",
                          ["lane", "phase0_green_s", "delay_s"], rows)]
    if not lanes:
        return written

    fig, ax = plt.subplots(figsize=(5.5, 4))
    shown = sorted(lanes)[:12]
    for lane in shown:
        doc = lanes[lane]
        ax.plot(doc["g_levels"], doc["delay"], marker="o", markersize=3,
                linewidth=1, label=lane)
    ax.set_xlabel("phase-0 green (s)")
    ax.set_ylabel("surrogate mean control delay (s)")
    title = "Delay response to the green split"
    if len(lanes) > len(shown):
        title += f" (first {len(shown)} of {len(lanes)} lanes)"
    ax.set_title(title)
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    out = plots / "delay_vs_green.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    written.append(out)
    return written


def _centrality_outputs(plots: Path, baseline: dict) -> list[Path]:
    scores = baseline["scores"]
    ranking = baseline["ranking"]
    rows = [[link, scores[link]] for link in ranking]
    return [_write_csv(plots / "centrality_scores.csv", ["link", "score"], rows)]


def write_report(out_dir: Path | str) -> list[Path]:
    """Build summary.txt and plots/ from the artifacts in ``out_dir``.

    Returns the paths written.  Raises ``MissingArtifactError`` naming the
    first artifact that is absent or unreadable.
    """
    out = Path(out_dir)
    compare = read_artifact(out / ARTIFACT_FILES["compare"], "compare").payload

    if compare["status"] == "no_candidates":
        log.info("report: no candidates; writing summary only")
        return [_write_summary(out, compare, None)]

    candidates = read_artifact(out / ARTIFACT_FILES["candidates"], "candidates").payload
    surrogate = read_artifact(out / ARTIFACT_FILES["surrogate"], "surrogate").payload
    solution = read_artifact(out / ARTIFACT_FILES["solution"], "solution").payload
    baseline = read_artifact(out / ARTIFACT_FILES["baseline"], "baseline").payload

    plots = out / "plots"
    plots.mkdir(parents=True, exist_ok=True)

    written = [_write_summary(out, compare, solution)]
    written += _comparison_outputs(plots, compare)
    written += _lane_delay_outputs(plots, candidates, solution,
                                   compare["scenario"]["los_limit"])
    written += _surrogate_outputs(plots, surrogate)
    written += _centrality_outputs(plots, baseline)
    return written
