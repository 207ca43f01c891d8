"""Command-line front end: one verb per pipeline stage plus report and run-all."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .pipeline import run_pipeline
from .report import emit_report
from .store import ArtifactStore, loads

VERBS = {
    "find-wave": (["wave"], "solve for the periodic travelling wave"),
    "continue": (["family"], "continue the wave in the wavenumber"),
    "bloch": (["spectrum"], "Bloch spectrum, hypotheses, critical curve and coefficients"),
    "floquet": (["floquet"], "spatial Floquet exponents, rank-one factors, high-frequency split, Laplace inversion"),
    "semigroup": (["semigroup"], "linear evolution and its low-frequency decomposition"),
    "simulate": (["simulate"], "nonlinear run, phase extraction and modulated perturbations"),
    "compare-hamjac": (["simulate"], "compare the phase with the Cole-Hopf solution"),
    "damping": (["simulate"], "damping energy diagnostics on a linear-regime run"),
    "run-all": (["wave", "family", "spectrum", "floquet", "semigroup", "simulate"], "every stage and the report"),
}

# verb-specific flags: (flag, config entry, type, help)
OVERRIDES = {
    "find-wave": [("--period", "grid.period", float, "cell period T"), ("--n", "grid.n", int, "points per cell")],
    "continue": [("--r0", "family.r0", float, "half-width of the wavenumber range"),
                 ("--n-k", "family.n_k", int, "number of wavenumber samples")],
    "bloch": [("--n-modes", "spectral.n_modes", int, "Fourier modes per component"),
              ("--n-xi", "spectral.n_xi", int, "Floquet exponents sampled")],
    "floquet": [("--hf-points", "floquet.hf_points", int, "grid points of the fine operator")],
    "semigroup": [("--t-end", "semigroup.t_end", float, "final time"),
                  ("--cells", "grid.cells", int, "cells of the periodic domain")],
    "simulate": [("--t-end", "simulation.t_end", float, "final time"),
                 ("--amplitude", "simulation.amplitude", float, "sup norm of the perturbation"),
                 ("--kind", "simulation.kind", str, "perturbation kind"),
                 ("--seed", "simulation.seed", int, "perturbation seed"),
                 ("--cells", "grid.cells", int, "cells of the periodic domain")],
    "compare-hamjac": [("--t-end", "simulation.t_end", float, "final time")],
    "damping": [("--linear-t-end", "simulation.linear_t_end", float, "final time of the linear-regime run")],
}

SECTIONS = {
    "compare-hamjac": ("simulate", ("cole_hopf_residual", "hamjac_relative_slope")),
    "damping": ("simulate", ("damping_alpha", "damping_theta", "damping_upsilon", "damping_inequality_constant",
                             "interpolation_defect", "window_ratio_max")),
}


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fhnlab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, (_, helptext) in list(VERBS.items()) + [("report", (None, "summarize an existing manifest"))]:
        p = sub.add_parser(verb, help=helptext)
        p.add_argument("--config", help="configuration file (default: the shipped defaults)")
        p.add_argument("--output", help="output root (default: [output] dir, then $FHNLAB_OUTPUT)")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config entry")
        for flag, entry, typ, h in OVERRIDES.get(verb, []):
            p.add_argument(flag, dest="ov_" + entry.replace(".", "__"), type=typ, help=f"{h} ({entry})")
        if verb in ("report", "run-all"):
            p.add_argument("--figures", action="store_true", help="also render PNG figures (needs matplotlib)")
        if verb == "report":
            p.add_argument("--manifest", help="manifest file (default: <output>/manifest.json)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        overrides = _parse_set(args.set)
        for name, value in vars(args).items():
            if name.startswith("ov_") and value is not None:
                overrides[name[3:].replace("__", ".")] = value
        config = load_config(args.config, overrides, args.output)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    out = Path(config.output_dir)
    if args.verb == "report":
        path = Path(args.manifest) if args.manifest else out / "manifest.json"
        if not path.exists():
            print(f"no manifest at {path}", file=sys.stderr)
            return 2
        manifest = loads(path.read_text())
        store_root = out / "artifacts"
        store = ArtifactStore(store_root) if store_root.exists() else None
        rep = emit_report(manifest, out / "report", store, figures=args.figures)
        print(rep["text"])
        return 0
    stages, _ = VERBS[args.verb]
    result = run_pipeline(config, stages)
    if args.verb == "run-all":
        rep = emit_report(result.manifest, out / "report", ArtifactStore(out / "artifacts"), figures=args.figures)
        print(rep["text"])
    elif args.verb in SECTIONS and result.status == 0:
        stage, names = SECTIONS[args.verb]
        res = result.manifest["stages"][stage]["results"]
        print(json.dumps({k: res[k] for k in names}, indent=1))
        prefix = {"compare-hamjac": "C9", "damping": "C10"}[args.verb]
        _print_checks([c for c in result.manifest["checks"] if c["id"].startswith(prefix)])
    else:
        _print_checks([c for c in result.manifest["checks"]])
    for stage, st in result.manifest["run"]["status"].items():
        print(f"{stage}: {st}", file=sys.stderr)
    if result.status:
        print(f"failed: {result.manifest['failure']['error']}", file=sys.stderr)
    return result.status


def _print_checks(checks) -> None:
    for c in checks:
        print(f"{c['verdict']} {c['id']}: measured {c['measured']!r} (tolerance {c['tolerance']})")


if __name__ == "__main__":
    sys.exit(main())
