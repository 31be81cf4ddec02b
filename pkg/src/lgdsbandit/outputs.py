"""CSV / JSON / SVG emission for benchmark, robustness and metric results.

All text is UTF-8 with '\\n' line endings; floats are written with ``repr``
so files are byte-stable across runs.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path

from .config import DISTRIBUTIONS
from .plots import boxplot_svg, scatter_svg
from .stats import CellStats, summarize

log = logging.getLogger(__name__)

ROUND_HEADER = ["t", "env", "run", "policy", "action", "reward", "oracle_action", "inst_regret", "err_norm"]
EPISODE_HEADER = ["seed", "dist", "group", "env", "run", "policy", "regret", "normalized_regret", "status"]
SUMMARY_HEADER = ["seed", "dist", "group", "policy", "median", "q1", "q3", "iqr",
                  "whisker_low", "whisker_high", "count", "excluded", "undefined"]
INTERVAL_HEADER = ["seed", "dist", "env", "policy", "low", "high", "empty", "status"]

PRETTY = {"idea": "IDEA", "kalman_ucb": "Kalman-UCB", "kode": "KODE", "kalman_oracle": "Kalman Oracle",
          "ucb": "UCB", "sw_ucb": "SW-UCB", "rexp3": "Rexp3", "oful": "OFUL", "random": "Random"}


def fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def _writer(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = open(path, "w", encoding="utf-8", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    fh, w = _writer(path)
    with fh:
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def read_rows(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _num(s: str) -> float:
    return float(s) if s not in ("", "nan") else math.nan


def round_rows(episodes):
    for e in episodes:
        rec = e.record
        if rec is None:
            continue
        for t in range(len(rec.actions)):
            yield (t + 1, rec.env, rec.run, rec.policy, int(rec.actions[t]), float(rec.rewards[t]),
                   int(rec.oracle_actions[t]), float(rec.inst_regret[t]), float(rec.err_norm[t]))


def episode_rows(episodes, seed, dist):
    for e in episodes:
        yield (seed, dist, e.group, e.env, e.run, e.policy, float(e.regret), float(e.normalized), e.status)


def summary_rows(summary: dict[str, CellStats], seed, dist, group=""):
    for p, c in summary.items():
        yield (seed, dist, group, p, c.median, c.q1, c.q3, c.iqr, c.whisker_low, c.whisker_high,
               c.count, c.excluded, c.undefined)


def table_rows(cells: dict[tuple[str, str], CellStats], policies, dists):
    """Policies down, distributions across; each cell is 'median (IQR)'."""
    header = ["Method"] + [d.capitalize() for d in dists]
    rows = []
    for p in policies:
        row = [PRETTY.get(p, p)]
        for d in dists:
            c = cells.get((p, d))
            row.append("missing" if c is None or c.missing else f"{c.median:.2f} ({c.iqr:.2f})")
        rows.append(row)
    return header, rows


def _save_svg(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_config(out: Path, cfg, extra=None) -> Path:
    # worker count and output path do not affect results, so they are left out
    data = {k: v for k, v in cfg.to_dict().items() if k not in ("jobs", "out")}
    data.update(extra or {})
    out.mkdir(parents=True, exist_ok=True)
    path = out / "config.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def fig1_points(episode_dicts, x_policy="kalman_ucb", y_policy="idea", dist=None):
    """Per-environment median normalized regret for two policies, paired by env."""
    per = {x_policy: {}, y_policy: {}}
    for r in episode_dicts:
        if r["status"] != "ok" or r.get("group", "") != "" or r["policy"] not in per:
            continue
        if dist is not None and r["dist"] != dist:
            continue
        v = _num(r["normalized_regret"])
        if math.isfinite(v):
            per[r["policy"]].setdefault((r["dist"], int(r["env"])), []).append(v)
    keys = sorted(set(per[x_policy]) & set(per[y_policy]))
    med = lambda v: summarize(v).median  # noqa: E731
    return [(med(per[x_policy][k]), med(per[y_policy][k])) for k in keys]


def emit_benchmark(result, out) -> list[Path]:
    """rounds.csv, episodes.csv, summary.csv, table.csv and the per-environment scatter."""
    out = Path(out)
    cfg = result.config
    paths = [write_config(out, cfg, {"excluded": result.excluded, "episodes": len(result.episodes)})]
    paths.append(write_rows(out / "rounds.csv", ROUND_HEADER, round_rows(result.episodes)))
    paths.append(write_rows(out / "episodes.csv", EPISODE_HEADER, episode_rows(result.episodes, cfg.seed, cfg.dist)))
    paths.append(write_rows(out / "summary.csv", SUMMARY_HEADER, summary_rows(result.summary, cfg.seed, cfg.dist)))
    header, rows = table_rows({(p, cfg.dist): c for p, c in result.summary.items()}, cfg.policies, [cfg.dist])
    paths.append(write_rows(out / "table.csv", header, rows))
    if not result.episodes:
        log.warning("no episodes; wrote header-only CSVs and no figures")
        return paths
    paths += render_fig1(out, read_rows(out / "episodes.csv"))
    return paths


def render_fig1(out: Path, episode_dicts) -> list[Path]:
    pts = fig1_points(episode_dicts)
    if not pts:
        return []
    svg = scatter_svg({"point": pts}, "Normalized regret per environment", "Kalman-UCB", "IDEA", log=True)
    return [_save_svg(out / "fig_scatter.svg", svg)]


def emit_robustness(result, out) -> list[Path]:
    out = Path(out)
    cfg = result.config
    paths = [write_config(out, cfg, {"nus": list(result.nus), "targets": list(result.targets)})]
    paths.append(write_rows(out / "robust_episodes.csv", EPISODE_HEADER,
                            episode_rows(result.episodes, cfg.seed, cfg.dist)))
    rows = [r for g, s in result.summary.items() for r in summary_rows(s, cfg.seed, cfg.dist, g)]
    paths.append(write_rows(out / "robust_summary.csv", SUMMARY_HEADER, rows))
    if not result.episodes:
        log.warning("no episodes; wrote header-only CSVs and no figures")
        return paths
    paths += render_fig3(out, read_rows(out / "robust_summary.csv"))
    return paths


def _cell_from_row(r) -> CellStats:
    return CellStats(_num(r["median"]), _num(r["q1"]), _num(r["q3"]), int(r["count"]), int(r["excluded"]),
                     int(r["undefined"]), _num(r["whisker_low"]), _num(r["whisker_high"]))


def render_fig3(out: Path, summary_dicts) -> list[Path]:
    """One SVG per perturbed matrix, one panel per magnitude (plus the unperturbed panel)."""
    by_group: dict[str, dict[str, CellStats]] = {}
    for r in summary_dicts:
        by_group.setdefault(r["group"], {})[r["policy"]] = _cell_from_row(r)
    targets = sorted({g.split("@")[0] for g in by_group if "@" in g})
    paths = []
    for t in targets:
        groups = sorted((g for g in by_group if g.startswith(t + "@")), key=lambda g: float(g.split("@")[1]))
        panels = []
        if "base" in by_group:
            panels.append(("unperturbed", by_group["base"]))
        panels += [(f"{t}, nu={g.split('@')[1]}", by_group[g]) for g in groups]
        paths.append(_save_svg(out / f"fig_box_{t}.svg", boxplot_svg(panels)))
    return paths


def emit_metric(result, out) -> list[Path]:
    out = Path(out)
    cfg = result.config
    paths = [write_config(out, cfg)]
    rows = [(cfg.seed, cfg.dist, r.env, r.policy, r.low, r.high, r.empty, r.status) for r in result.intervals]
    paths.append(write_rows(out / "intervals.csv", INTERVAL_HEADER, rows))
    paths.append(write_rows(out / "episodes.csv", EPISODE_HEADER, episode_rows(result.episodes, cfg.seed, cfg.dist)))
    if not result.intervals:
        log.warning("no intervals; wrote header-only CSVs and no figures")
        return paths
    paths += render_fig2(out, read_rows(out / "intervals.csv"))
    return paths


def interval_points(interval_dicts, x_policy="kalman_ucb", y_policy="idea"):
    """Lower and upper interval ends paired by (dist, env)."""
    d: dict[tuple, dict[str, tuple[float, float]]] = {}
    for r in interval_dicts:
        if r["status"] == "ok":
            d.setdefault((r["dist"], int(r["env"])), {})[r["policy"]] = (_num(r["low"]), _num(r["high"]))
    low, high = [], []
    for key in sorted(d):
        v = d[key]
        if x_policy in v and y_policy in v:
            low.append((v[x_policy][0], v[y_policy][0]))
            high.append((v[x_policy][1], v[y_policy][1]))
    return low, high


def render_fig2(out: Path, interval_dicts) -> list[Path]:
    low, high = interval_points(interval_dicts)
    if not low:
        return []
    svg = scatter_svg({"low": low, "high": high}, "Performance interval bounds", "Kalman-UCB", "IDEA")
    return [_save_svg(out / "fig_intervals.svg", svg)]


def rerender(out) -> list[Path]:
    """Rebuild every figure whose source CSV exists in ``out``."""
    out = Path(out)
    paths = []
    if (out / "episodes.csv").exists():
        paths += render_fig1(out, read_rows(out / "episodes.csv"))
    if (out / "intervals.csv").exists():
        paths += render_fig2(out, read_rows(out / "intervals.csv"))
    if (out / "robust_summary.csv").exists():
        paths += render_fig3(out, read_rows(out / "robust_summary.csv"))
    return paths


def combined_table(summaries: dict[str, dict[str, CellStats]], policies, out) -> Path:
    """Table with one column per distribution from several benchmark summaries."""
    dists = [d for d in DISTRIBUTIONS if d in summaries]
    cells = {(p, d): summaries[d][p] for d in dists for p in summaries[d]}
    header, rows = table_rows(cells, policies, dists)
    return write_rows(Path(out), header, rows)
