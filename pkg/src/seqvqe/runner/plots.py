"""PNG figures rendered next to the CSV outputs."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .io import Table  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "savefig.bbox": "tight",
}


def _table(tables: Sequence[Table], name: str) -> Table | None:
    for t in tables:
        if t.name == name:
            return t
    return None


def _save(fig, path: Path) -> Path:
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_exact(t: Table, out: Path) -> Path:
    fig, ax = plt.subplots()
    by_m = defaultdict(list)
    for m, j, e in t.rows:
        by_m[m].append((j, e / m))
    for m, pts in sorted(by_m.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", label=f"M = {m}")
    ax.set_xlabel("J")
    ax.set_ylabel("E0 / M")
    ax.legend()
    return _save(fig, out / "exact.png")


def plot_learning_curve(t: Table, out: Path) -> Path:
    """Mean of both branches per iteration for restart 0."""
    series = defaultdict(dict)
    for restart, it, branch, c, e, _, _, flag in t.rows:
        if restart != 0:
            continue
        label = "mitigated" if flag else f"c = {c:g}"
        series[label].setdefault(it, []).append(e)
    fig, ax = plt.subplots()
    for label, pts in series.items():
        its = sorted(pts)
        ax.plot(its, [sum(pts[i]) / len(pts[i]) for i in its], lw=1, label=label)
    ax.set_xlabel("SPSA iteration")
    ax.set_ylabel("energy")
    ax.set_title("restart 0")
    ax.legend()
    return _save(fig, out / "learning_curve.png")


def plot_sweep(t: Table, out: Path) -> list[Path]:
    cols = t.columns
    idx = {name: cols.index(name) for name in cols}
    by_m = defaultdict(list)
    for row in t.rows:
        by_m[row[idx["M"]]].append(row)
    paths = []
    for m, rows in sorted(by_m.items()):
        fig, ax = plt.subplots()
        rows.sort(key=lambda r: (r[idx["J"]], r[idx["c"]]))
        js = sorted({r[idx["J"]] for r in rows})
        first = {r[idx["J"]]: r for r in rows}
        ax.plot(js, [first[j][idx["exact"]] for j in js], "k--", label="exact")
        ax.plot(js, [first[j][idx["noise_free"]] for j in js], "^", color="goldenrod", label="noise-free")
        ax.plot(js, [first[j][idx["mitigated_first"]] for j in js], "s", color="tab:blue", label="mitigated")
        for c in sorted({r[idx["c"]] for r in rows}):
            pts = [r for r in rows if r[idx["c"]] == c]
            ax.plot([r[idx["J"]] for r in pts], [r[idx["raw_energy"]] for r in pts], "o", ms=4, alpha=0.7, label=f"raw c = {c:g}")
        ax.set_xlabel("J")
        ax.set_ylabel("energy")
        ax.set_title(f"M = {m}")
        ax.legend()
        paths.append(_save(fig, out / f"sweep_M{m}.png"))
    return paths


def plot_zne(t: Table, ext: Table | None, out: Path) -> list[Path]:
    by_key = defaultdict(list)
    for m, j, c, e, err, role in t.rows:
        by_key[(m, j)].append((c, e, err, role))
    paths = []
    for (m, j), pts in sorted(by_key.items()):
        fig, ax = plt.subplots()
        pts.sort()
        for role, marker in (("noise_free", "*"), ("reference", "o"), ("fit", "s")):
            sel = [p for p in pts if p[3] == role]
            if sel:
                ax.errorbar([p[0] for p in sel], [p[1] for p in sel], [p[2] for p in sel], fmt=marker, label=role)
        if ext is not None:
            for row in ext.rows:
                if row[0] == m and row[1] == j and row[2] not in ("noise_free", "raw_c1"):
                    ax.plot([0.0], [row[3]], "x", ms=9, label=row[2])
        ax.set_xlabel("noise scale c")
        ax.set_ylabel("optimised energy")
        ax.set_title(f"M = {m}, J = {j:g}")
        ax.legend()
        paths.append(_save(fig, out / f"zne_M{m}_J{j:g}.png"))
    return paths


def plot_rate_check(t: Table, out: Path) -> Path:
    fig, ax = plt.subplots()
    ratios = t.column("ratio")
    ax.plot(ratios, t.column("rel_err"), "o-", label="Gamma1")
    ax.plot(ratios, t.column("rel_err_g2"), "s-", label="Gamma2")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("Omega / Gamma")
    ax.set_ylabel("relative error vs closed form")
    ax.legend()
    return _save(fig, out / "rate_check.png")


def render(command: str, out: Path, tables: Sequence[Table]) -> list[Path]:
    """Draw the figures belonging to ``command``; returns the written paths."""
    with plt.rc_context(STYLE):
        if command == "exact":
            return [plot_exact(_table(tables, "exact.csv"), out)]
        if command == "vqe":
            return [plot_learning_curve(_table(tables, "learning_curve.csv"), out)]
        if command == "sweep":
            return plot_sweep(_table(tables, "sweep_best.csv"), out)
        if command == "zne-study":
            return plot_zne(_table(tables, "zne_study.csv"), _table(tables, "zne_extrapolation.csv"), out)
        if command == "rate-check":
            return [plot_rate_check(_table(tables, "rate_check.csv"), out)]
    return []
