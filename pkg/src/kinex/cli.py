"""Command line entry point: ``kinex simulate|sweep|fit|ingest-check``.

Exit codes: 0 success, 2 configuration or input error, 3 non-convergence,
4 fit failure.
"""
from __future__ import annotations

import argparse
import logging
import shutil
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from . import __version__
from .engine import ConfigError, ensemble_run
from .files import (
    DatasetError,
    IngestedDataset,
    RunManifest,
    ingest_dataset,
    parse_config,
    with_overrides,
    write_csv,
    write_json,
)
from .fitting import (
    EXPONENTIAL,
    FitError,
    GAMMA,
    LOGNORMAL,
    PIECEWISE,
    POWERLAW,
    fit_exponential,
    fit_family,
    fit_gamma,
    fit_lognormal,
    fit_piecewise,
    fit_powerlaw_tail,
)
from .kernels import ModelSpec
from .stats import (
    Linear,
    Logarithmic,
    build_histogram,
    empirical_ccdf,
    normalize_by_mean,
    summarize,
)

log = logging.getLogger("kinex")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_FIT = 0, 2, 3, 4


class NonConvergence(RuntimeError):
    pass


def _histogram(samples, manifest: RunManifest):
    opts = manifest.output
    if opts.binning == "log":
        return build_histogram(samples, Logarithmic(opts.bins))
    return build_histogram(samples, Linear(opts.bins, 0.0))


def _all_fits(samples) -> dict:
    fits = {}
    for name, fitter in ((EXPONENTIAL, fit_exponential), (GAMMA, fit_gamma),
                         (LOGNORMAL, fit_lognormal), (POWERLAW, fit_powerlaw_tail),
                         (PIECEWISE, fit_piecewise)):
        try:
            fits[name] = fitter(samples).to_dict()
        except (FitError, ValueError) as exc:
            fits[name] = {"family": name, "error": str(exc)}
    return fits


def _write_outputs(directory: Path, manifest: RunManifest, result) -> dict:
    x = result.samples
    hist = _histogram(x, manifest)
    stats = summarize(x, hist)
    if "csv" in manifest.formats:
        dens = hist.density
        write_csv(directory / "histogram.csv", ("bin_left", "bin_right", "count", "density"),
                  zip(hist.edges[:-1], hist.edges[1:], hist.counts, dens))
        curve = empirical_ccdf(x).thinned(manifest.output.ccdf_points)
        write_csv(directory / "ccdf.csv", ("w", "fraction"), zip(curve.w, curve.fraction))
    summary = {
        "artifact_version": manifest.artifact_version,
        "master_seed": int(manifest.config.master_seed),
        "config": manifest.resolved(),
        "moments": stats.to_dict(),
        "histogram": {"underflow": hist.underflow, "overflow": hist.overflow, "n_total": hist.n_total},
        "fits": _all_fits(x),
        "equilibration": {
            "all_converged": result.converged,
            "max_drift": result.max_drift,
            "realizations": result.realizations,
        },
    }
    if "json" in manifest.formats:
        write_json(directory / "summary.json", summary)
    return summary


def _staged(out: Path, produce):
    """Run ``produce(staging_dir)`` and move its files into ``out`` only on success."""
    out.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".partial-", dir=out))
    try:
        value = produce(staging)
        for f in sorted(staging.iterdir()):
            f.replace(out / f.name)
        return value
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def run_simulation(manifest: RunManifest, workers: int = 1) -> dict:
    """Simulate and write outputs; raises NonConvergence without leaving files behind."""
    result = ensemble_run(manifest.config, manifest.model, workers=workers)
    if not result.converged:
        bad = [r["index"] for r in result.realizations if not r["converged"]]
        raise NonConvergence(
            f"{len(bad)} realization(s) did not equilibrate within "
            f"{manifest.config.equilibration.max_steps} MC steps (first: {bad[0]})"
        )
    return _staged(manifest.output_dir, lambda d: _write_outputs(d, manifest, result))


def cmd_simulate(manifest: RunManifest, workers: int = 1) -> int:
    try:
        summary = run_simulation(manifest, workers)
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    m = summary["moments"]
    print(f"mean={m['mean']:.6g} variance={m['variance']:.6g} gini={m['gini']:.6g} "
          f"-> {manifest.output_dir}")
    return EXIT_OK


def parse_grid(text: str) -> list:
    try:
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"lambda-grid: expected comma-separated reals, got {text!r}") from None
    if not grid:
        raise ConfigError("lambda-grid: empty")
    for lam in grid:
        if not 0.0 <= lam < 1.0:
            raise ConfigError(f"lambda-grid: values must lie in [0, 1), got {lam!r}")
    return grid


def cmd_sweep(manifest: RunManifest, lambda_grid, workers: int = 1) -> int:
    rows = []
    root = manifest.output_dir
    for lam in lambda_grid:
        cell = replace(manifest, model=ModelSpec.uniform_saving(lam),
                       output_dir=root / f"lambda_{lam:g}")
        try:
            summary = run_simulation(cell, workers)
        except NonConvergence as exc:
            print(f"error: sweep cell lambda={lam}: {exc}", file=sys.stderr)
            return EXIT_NONCONVERGED
        m = summary["moments"]
        gamma = summary["fits"][GAMMA]["params"] if "params" in summary["fits"][GAMMA] else {}
        rows.append((lam, m["mean"], m["variance"], m["mode_bin_center"],
                     gamma.get("n"), gamma.get("T"), m["gini"]))
    root.mkdir(parents=True, exist_ok=True)
    write_csv(root / "sweep.csv",
              ("lambda", "mean", "variance", "mode_bin", "gamma_n", "gamma_T", "gini"), rows)
    print(f"{len(rows)} sweep cells -> {root / 'sweep.csv'}")
    return EXIT_OK


def run_fit(dataset: IngestedDataset, family: str, out: Path, ccdf_points: int = 2000) -> dict:
    x = normalize_by_mean(dataset.values)
    fit = fit_family(x, family)
    curve = empirical_ccdf(x).thinned(ccdf_points)
    model_ccdf = fit.ccdf(curve.w)
    payload = {
        "artifact_version": __version__,
        "dataset": dict(dataset.to_dict(), normalization_mean=float(dataset.values.mean())),
        "requested_family": family,
        "fit": fit.to_dict(),
    }

    def produce(d):
        write_json(d / "fit.json", payload)
        write_csv(d / "overlay.csv", ("w", "empirical_ccdf", "model_ccdf"),
                  zip(curve.w, curve.fraction, model_ccdf))
        return payload

    return _staged(out, produce)


def cmd_fit(dataset: IngestedDataset, family: str, out: Path) -> int:
    try:
        payload = run_fit(dataset, family, out)
    except FitError as exc:
        print(f"error: fit failed ({exc.family}): {exc}", file=sys.stderr)
        return EXIT_FIT
    fit = payload["fit"]
    print(f"{fit['family']}: {fit['params']} ks={fit['ks']:.4g} -> {out}")
    return EXIT_OK


def cmd_ingest_check(dataset: IngestedDataset) -> int:
    v = dataset.values
    print(f"source={dataset.source} n={v.size} dropped={dataset.dropped} "
          f"min={v.min():.6g} max={v.max():.6g} mean={v.mean():.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kinex", description="Kinetic wealth exchange simulations and fits")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("--config", type=Path, required=True, help="flat key=value config file")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        p.add_argument("--format", choices=("csv", "json", "both"), help="output formats")
        p.add_argument("--workers", type=int, default=1, help="realizations run concurrently")

    run_flags(sub.add_parser("simulate", help="run an ensemble and write histogram/ccdf/summary"))
    p = sub.add_parser("sweep", help="uniform-saving runs over a grid of lambda values")
    run_flags(p)
    p.add_argument("--lambda-grid", required=True, help="comma list, e.g. 0.3,0.5,0.7,0.9")

    p = sub.add_parser("fit", help="fit a distribution to one column of a data file")
    p.add_argument("dataset", type=Path)
    p.add_argument("--column", default="0", help="header name or 0-based index")
    p.add_argument("--family", default="auto",
                   choices=("auto", EXPONENTIAL, GAMMA, LOGNORMAL, POWERLAW, PIECEWISE))
    p.add_argument("--out", type=Path, default=Path("out"))

    p = sub.add_parser("ingest-check", help="report how a data file parses")
    p.add_argument("dataset", type=Path)
    p.add_argument("--column", default="0")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("simulate", "sweep"):
            manifest = with_overrides(parse_config(args.config), args.seed, args.out, args.format)
            if args.command == "simulate":
                return cmd_simulate(manifest, args.workers)
            return cmd_sweep(manifest, parse_grid(args.lambda_grid), args.workers)
        dataset = ingest_dataset(args.dataset, args.column)
        if args.command == "fit":
            return cmd_fit(dataset, args.family, args.out)
        return cmd_ingest_check(dataset)
    except (ConfigError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
