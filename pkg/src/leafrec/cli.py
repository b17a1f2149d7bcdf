"""leafrec command line: manifest, extract, train-encoders, cv, report, synth.

Exit codes: 0 success, 1 partial failure (some images or folds failed),
2 configuration error.
"""
from __future__ import annotations

import csv
import json
import logging
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import BRANCHES, __version__
from .config import ConfigError, RunConfig, load_config, parse_folds, require_paths
from .neural import make_arch, save_encoder, train_encoder
from .pipeline.cv import BRANCH_KIND, CvReport, _fold_seed, run_cv
from .pipeline.features import branch_inputs
from .pipeline.folds import DatasetManifest, make_fold_plan
from .pipeline.report import write_report
from .pipeline.store import FeatureStore, cache_dir, export_csvs, extract_manifest
from .pipeline.synth import write_dataset

log = logging.getLogger("leafrec")

OK, PARTIAL, CONFIG = 0, 1, 2
REPORT_JSON = "cv_report.json"


def flavia_ranges() -> Path:
    return Path(str(resources.files("leafrec") / "data" / "flavia_ranges.csv"))


def _fail(msg: str, code: int = CONFIG):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _config(ctx_obj, **overrides) -> RunConfig:
    try:
        return load_config(ctx_obj.get("config"), **overrides)
    except ConfigError as exc:
        _fail(str(exc))


def _store(cfg: RunConfig) -> FeatureStore:
    return FeatureStore(cache_dir(cfg.output / "cache"), cfg.cv.features)


def _manifest(cfg: RunConfig) -> DatasetManifest:
    try:
        require_paths(cfg, "manifest")
        return DatasetManifest.read(cfg.manifest_path)
    except (ConfigError, ValueError, KeyError) as exc:
        _fail(f"cannot read manifest: {exc}")


def _load_features(cfg: RunConfig, manifest: DatasetManifest):
    rows, missing = _store(cfg).load_all(manifest)
    if not rows:
        _fail("no extracted features found; run `leafrec extract` first")
    for e in missing:
        click.echo(f"warning: row {e.index} ({e.path}) has no features and is skipped", err=True)
    kept = DatasetManifest([replace(e, index=i) for i, (e, _) in enumerate(rows)])
    return kept, [f for _, f in rows], missing


def _plan(cfg: RunConfig, manifest: DatasetManifest):
    try:
        return make_fold_plan(manifest, cfg.cv.mode, cfg.cv.seed)
    except ValueError as exc:
        _fail(str(exc))


def _stamp(cfg: RunConfig) -> str:
    return f"# leafrec {__version__} config_hash={cfg.cv.hash()} seed={cfg.cv.seed} mode={cfg.cv.mode}\n"


common = [
    click.option("--output", "-o", type=click.Path(path_type=Path), help="Output directory."),
    click.option("--manifest", "-m", type=click.Path(path_type=Path), help="Manifest CSV."),
]


def with_common(fn):
    for opt in reversed(common):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(__version__)
@click.option("--config", "-c", type=click.Path(path_type=Path), help="YAML run config.")
@click.option("--verbose", "-v", is_flag=True, help="Log progress.")
@click.pass_context
def main(ctx, config, verbose):
    """Leaf recognition: handcrafted + learned features, fused, decoded by an SVM."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"config": config}


@main.command()
@click.argument("out", type=click.Path(path_type=Path))
@click.option("--n-per-class", default=40, show_default=True)
@click.option("--seed", default=0, show_default=True)
def synth(out, n_per_class, seed):
    """Write the seeded 8-class synthetic leaf dataset to OUT."""
    paths = write_dataset(out, n_per_class=n_per_class, seed=seed)
    click.echo(f"wrote {len(paths)} images to {out}")


@main.command()
@click.argument("dataset", required=False, type=click.Path(path_type=Path))
@with_common
@click.option("--ranges", type=click.Path(path_type=Path),
              help="start,end,label CSV for a flat folder of numbered files.")
@click.option("--flavia", is_flag=True, help="Use the bundled Flavia filename ranges.")
@click.pass_obj
def manifest(obj, dataset, output, manifest, ranges, flavia):
    """Index a dataset: one subdirectory per class, or a flat folder plus ranges."""
    cfg = _config(obj, dataset=dataset, output=output, manifest=manifest,
                  ranges=flavia_ranges() if flavia else ranges)
    try:
        require_paths(cfg, "dataset")
        if cfg.ranges is not None:
            require_paths(cfg, "ranges")
            man = DatasetManifest.from_ranges(cfg.dataset, cfg.ranges)
        else:
            man = DatasetManifest.from_directory(cfg.dataset)
    except (ConfigError, ValueError) as exc:
        _fail(str(exc))
    bad = []
    for e in man.entries:
        try:
            with Image.open(e.path) as im:
                im.verify()
        except Exception as exc:
            bad.append(e)
            click.echo(f"unreadable: {e.path} ({exc})", err=True)
    if bad:
        good = [e for e in man.entries if e not in bad]
        man = DatasetManifest([replace(e, index=i) for i, e in enumerate(good)])
    out = cfg.manifest_path
    out.parent.mkdir(parents=True, exist_ok=True)
    man.write(out)
    hist = man.histogram()
    click.echo(f"{len(man)} images, {len(hist)} classes -> {out}")
    for label, n in hist.items():
        click.echo(f"  {label}\t{n}")
    sys.exit(PARTIAL if bad else OK)


@main.command()
@with_common
@click.option("--debug/--no-debug", default=None, help="Dump intermediate PNGs per image.")
@click.option("--workers", type=int, help="Extraction processes.")
@click.pass_obj
def extract(obj, output, manifest, debug, workers):
    """Extract features for every manifest row (cached, resumable)."""
    cfg = _config(obj, output=output, manifest=manifest, debug=debug, workers=workers)
    man = _manifest(cfg)
    store = _store(cfg)
    summary = extract_manifest(man, store, cfg.output / "debug" if cfg.debug else None, cfg.workers)
    export_csvs(man, store, cfg.output / "features")
    failed = cfg.output / "features" / "failed.csv"
    with open(failed, "w", newline="") as fh:
        fh.write(_stamp(cfg))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "path", "error"])
        for e in man.entries:
            if e.index in summary.failed:
                w.writerow([e.index, e.path, summary.failed[e.index]])
    click.echo(f"rows {summary.total}: cache hits {summary.hits}, extracted {summary.computed}, "
               f"failed {len(summary.failed)}")
    for idx, err in summary.failed.items():
        click.echo(f"  failed row {idx}: {err}", err=True)
    sys.exit(PARTIAL if summary.failed else OK)


@main.command("train-encoders")
@with_common
@click.option("--fold", type=int, default=1, show_default=True)
@click.option("--mode", type=click.Choice(["random", "indexed"]))
@click.option("--seed", type=int)
@click.pass_obj
def train_encoders(obj, output, manifest, fold, mode, seed):
    """Train the seven branch encoders on one fold's training split and save them."""
    cfg = _config(obj, output=output, manifest=manifest, mode=mode, seed=seed)
    if not 1 <= fold <= 10:
        _fail("fold must be in 1..10")
    man, feats, missing = _load_features(cfg, _manifest(cfg))
    split = _plan(cfg, man).split(fold)
    inputs = branch_inputs(feats)
    labels = np.asarray(man.labels)
    tr, va, te = split["train"], split["valid"], split["test"]
    outdir = cfg.output / "encoders" / f"fold_{fold:02d}"
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for b_idx, branch in enumerate(BRANCHES):
        x = inputs[branch]
        tcfg = replace(cfg.cv.train_config(branch), seed=_fold_seed(cfg.cv.seed, fold, b_idx))
        model, _ = train_encoder(x[tr], labels[tr], make_arch(BRANCH_KIND[branch], x.shape[1:]),
                                 tcfg, x[va], labels[va])
        save_encoder(outdir / f"{branch}.npz", model)
        accs = [float((model.predict(x[s]) == labels[s]).mean()) for s in (va, te)]
        rows.append([branch] + [f"{a:.6f}" for a in accs])
        click.echo(f"{branch:<11} valid {accs[0]:.3f} test {accs[1]:.3f}")
    with open(outdir / "branches.csv", "w", newline="") as fh:
        fh.write(_stamp(cfg))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["branch", "valid_acc", "test_acc"])
        w.writerows(rows)
    sys.exit(PARTIAL if missing else OK)


@main.command()
@with_common
@click.option("--mode", type=click.Choice(["random", "indexed"]))
@click.option("--seed", type=int)
@click.option("--folds", help="Subset such as 1-3 or 1,4,7; a subset run is labeled partial.")
@click.option("--workers", type=int, help="Run folds in this many processes.")
@click.pass_obj
def cv(obj, output, manifest, mode, seed, folds, workers):
    """Cross-validate the full pipeline and write the report."""
    try:
        fold_list = None if folds is None else list(parse_folds(folds))
    except ConfigError as exc:
        _fail(str(exc))
    cfg = _config(obj, output=output, manifest=manifest, mode=mode, seed=seed, folds=fold_list,
                  workers=workers)
    man, feats, missing = _load_features(cfg, _manifest(cfg))
    report = run_cv(feats, man.labels, _plan(cfg, man), cfg.cv, workers=cfg.workers)
    outdir = cfg.output / "cv"
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / REPORT_JSON).write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")
    (outdir / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1, sort_keys=True) + "\n")
    write_report(report, outdir, {"skipped_rows": [e.index for e in missing]})
    _print_report(report)
    sys.exit(PARTIAL if (missing or report.failed) else OK)


def _print_report(report: CvReport) -> None:
    for f in report.folds:
        if f.status == "ok":
            click.echo(f"fold {f.fold:2d}  valid {f.valid_acc:.4f}  test {f.test_acc:.4f}  "
                       f"C={f.C:g} gamma={f.gamma:.3g}")
        else:
            click.echo(f"fold {f.fold:2d}  FAILED  {f.error}")
    mean, std = report.mean_std(report.test_accs)
    tag = " (partial)" if report.partial else ""
    click.echo(f"test accuracy {100 * mean:.2f}% +- {100 * std:.2f}%{tag} "
               f"[mode={report.mode} seed={report.seed} config={report.config_hash}]")


@main.command()
@click.argument("run_dir", required=False, type=click.Path(path_type=Path))
@click.pass_obj
def report(obj, run_dir):
    """Re-render report files from a saved cv run and print the summary."""
    run_dir = run_dir or _config(obj).output / "cv"
    src = Path(run_dir) / REPORT_JSON
    if not src.is_file():
        _fail(f"{src} not found; run `leafrec cv` first")
    rep = CvReport.from_dict(json.loads(src.read_text()))
    old = Path(run_dir) / "summary.json"
    skipped = json.loads(old.read_text()).get("skipped_rows", []) if old.is_file() else []
    write_report(rep, run_dir, {"skipped_rows": skipped})
    _print_report(rep)
    sys.exit(PARTIAL if rep.failed else OK)


if __name__ == "__main__":
    main()
