"""Human-readable summary, CSV tables and figures from a run manifest."""

from __future__ import annotations

import csv
import logging
from pathlib import Path

from .store import ArtifactStore

log = logging.getLogger("fhnlab")

COLUMNS = ("id", "claim", "anchor", "predicted", "measured", "tolerance", "verdict")


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    if isinstance(x, list):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    return str(x)


def summary_tables(manifest: dict) -> dict:
    """Checks grouped by criterion (``None`` collects the invariant checks)."""
    checks = list(manifest.get("checks", [])) + list(manifest.get("run", {}).get("runtime_checks", []))
    groups: dict = {}
    for c in checks:
        groups.setdefault(c["criterion"], []).append(c)
    return groups


def failed_count(manifest: dict) -> int:
    groups = summary_tables(manifest)
    return sum(1 for rows in groups.values() for c in rows if c["verdict"] != "PASS")


def render_summary(manifest: dict) -> str:
    groups = summary_tables(manifest)
    lines = []
    order = sorted((k for k in groups if k is not None)) + ([None] if None in groups else [])
    for crit in order:
        rows = groups[crit]
        title = f"Criterion {crit}" if crit is not None else "Invariants"
        lines.append(title)
        cells = [[_fmt(c[k]) for k in COLUMNS] for c in rows]
        widths = [max(len(h), *(len(r[i]) for r in cells)) for i, h in enumerate(COLUMNS)]
        widths = [min(w, 60) for w in widths]
        lines.append("  ".join(h.ljust(w) for h, w in zip(COLUMNS, widths)))
        for r in cells:
            lines.append("  ".join(v[:w].ljust(w) for v, w in zip(r, widths)))
        lines.append("")
    fail = manifest.get("failure")
    if fail:
        lines.append(f"stage {fail['stage']} failed: {fail['error']}")
    nfail = failed_count(manifest)
    lines.append(f"{nfail} FAILED" if nfail else "all checks passed")
    return "\n".join(lines)


def write_csv(path: Path, tab: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(tab["columns"])
        for row in tab["rows"]:
            wr.writerow([repr(v) if isinstance(v, float) else v for v in row])


def checks_csv(path: Path, manifest: dict) -> None:
    rows = [[c["criterion"]] + [c[k] for k in COLUMNS] for c in summary_tables_flat(manifest)]
    write_csv(path, {"columns": ["criterion", *COLUMNS], "rows": rows})


def summary_tables_flat(manifest: dict) -> list:
    return list(manifest.get("checks", [])) + list(manifest.get("run", {}).get("runtime_checks", []))


def _figures(tables: dict, outdir: Path) -> list:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    made = []
    for name, tab in tables.items():
        cols = tab["columns"]
        rows = tab["rows"]
        if len(cols) < 2 or not rows:
            continue
        fig, ax = plt.subplots(figsize=(6, 4))
        xs = [r[0] for r in rows]
        positive = all(isinstance(v, (int, float)) and v > 0 for r in rows for v in r[1:] if v is not None)
        for j in range(1, len(cols)):
            ys = [r[j] for r in rows]
            if not all(isinstance(v, (int, float)) for v in ys):
                continue
            ax.plot(xs, ys, ".-" if len(rows) < 200 else "-", label=cols[j], ms=3)
        if positive and all(isinstance(x, (int, float)) and x > 0 for x in xs) and name not in ("wave_profile",):
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel(cols[0])
        ax.legend(fontsize=7)
        ax.set_title(name)
        fig.tight_layout()
        path = outdir / f"{name}.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        made.append(str(path))
    return made


def emit_report(manifest: dict, outdir=None, store: ArtifactStore | None = None, figures: bool = False) -> dict:
    """Summary text plus CSV (and optionally PNG) files for every stage table.

    Returns ``{"text", "failed", "files"}``; ``failed`` is the number of
    failing checks.
    """
    text = render_summary(manifest)
    files = []
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "summary.txt").write_text(text + "\n")
        files.append(str(outdir / "summary.txt"))
        checks_csv(outdir / "checks.csv", manifest)
        files.append(str(outdir / "checks.csv"))
        tables = {}
        if store is not None:
            for stage, info in manifest.get("stages", {}).items():
                if info.get("key") in store:
                    for name, tab in store.get(info["key"]).get("tables", {}).items():
                        tables[name] = tab
        for name, tab in tables.items():
            write_csv(outdir / f"{name}.csv", tab)
            files.append(str(outdir / f"{name}.csv"))
        if figures and tables:
            try:
                files.extend(_figures(tables, outdir))
            except ImportError:
                log.warning("matplotlib is not available; figures skipped")
    return {"text": text, "failed": failed_count(manifest), "files": files}
