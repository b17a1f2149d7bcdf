"""CV report files: fold table CSV, confusion CSV, per-branch SVG bar chart."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .. import BRANCHES, __version__
from .cv import CvReport

REPORT_CSV = "cv_report.csv"
CONFUSION_CSV = "confusion.csv"
CHART_SVG = "branches.svg"
SUMMARY_JSON = "summary.json"


def _fmt(x) -> str:
    return "nan" if x is None or (isinstance(x, float) and np.isnan(x)) else f"{x:.6f}"


def _header(report: CvReport) -> str:
    status = "partial" if report.partial else "complete"
    return (f"# leafrec {__version__}\n"
            f"# config_hash={report.config_hash} seed={report.seed} mode={report.mode} status={status}\n")


def report_rows(report: CvReport) -> list[list[str]]:
    cols = ["fold", "status", "n_train", "n_valid", "n_test", "valid_acc", "test_acc", "C", "gamma",
            "kkt_max", "separation"] + [f"branch_{b}" for b in BRANCHES]
    rows = [cols]
    for f in report.folds:
        rows.append([str(f.fold), f.status, str(f.n_train), str(f.n_valid), str(f.n_test),
                     _fmt(f.valid_acc), _fmt(f.test_acc), f"{f.C:g}", f"{f.gamma:.6g}",
                     _fmt(f.kkt_max), _fmt(f.separation)]
                    + [_fmt(f.branch_test_acc.get(b, float("nan"))) for b in BRANCHES])
    ok = report.ok_folds
    for name, fn in (("mean", np.mean), ("std", np.std)):
        row = [name, "", "", "", ""]
        for attr in ("valid_acc", "test_acc"):
            row.append(_fmt(float(fn([getattr(f, attr) for f in ok]))) if ok else "nan")
        row += ["", "", "", ""]
        row += [_fmt(float(fn([f.branch_test_acc[b] for f in ok]))) if ok else "nan" for b in BRANCHES]
        rows.append(row)
    return rows


def report_csv_text(report: CvReport) -> str:
    buf = io.StringIO()
    buf.write(_header(report))
    csv.writer(buf, lineterminator="\n").writerows(report_rows(report))
    return buf.getvalue()


def csv_body(text: str) -> str:
    """The CSV without its comment lines."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def confusion_csv_text(report: CvReport) -> str:
    buf = io.StringIO()
    buf.write(_header(report))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["true\\pred"] + list(report.classes))
    for c, row in zip(report.classes, report.confusion):
        w.writerow([c] + [str(int(v)) for v in row])
    return buf.getvalue()


def chart_svg(report: CvReport) -> str:
    """Bar chart of mean test accuracy per branch plus the fused model."""
    names = list(BRANCHES) + ["fused"]
    ok = bool(report.ok_folds)
    values = [report.branch_mean(b) if ok else 0.0 for b in BRANCHES]
    values.append(report.mean_std(report.test_accs)[0] if ok else 0.0)
    w, h, pad, bar = 640, 320, 48, 56
    plot_h = h - 2 * pad
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
           f'<rect width="{w}" height="{h}" fill="white"/>',
           f'<line x1="{pad}" y1="{h - pad}" x2="{w - pad // 2}" y2="{h - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{h - pad}" stroke="black"/>']
    for tick in (0.0, 0.5, 1.0):
        y = h - pad - tick * plot_h
        out.append(f'<text x="{pad - 6}" y="{y + 4:.1f}" font-size="11" text-anchor="end">{tick:.1f}</text>')
    for i, (name, v) in enumerate(zip(names, values)):
        v = 0.0 if np.isnan(v) else v
        x = pad + 12 + i * (bar + 16)
        bh = v * plot_h
        fill = "#2f6f3e" if name == "fused" else "#7fae6a"
        out.append(f'<rect x="{x}" y="{h - pad - bh:.1f}" width="{bar}" height="{bh:.1f}" fill="{fill}"/>')
        out.append(f'<text x="{x + bar / 2}" y="{h - pad - bh - 4:.1f}" font-size="11" '
                   f'text-anchor="middle">{100 * v:.1f}</text>')
        out.append(f'<text x="{x + bar / 2}" y="{h - pad + 16}" font-size="11" text-anchor="middle">{name}</text>')
    out.append(f'<text x="{w / 2}" y="{pad / 2}" font-size="13" text-anchor="middle">'
               f'mean test accuracy per branch ({report.mode}, seed {report.seed})</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_report(report: CvReport, outdir, extra: dict | None = None) -> dict:
    """Write all report files; returns their paths by kind."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {"report": outdir / REPORT_CSV, "confusion": outdir / CONFUSION_CSV,
             "chart": outdir / CHART_SVG, "summary": outdir / SUMMARY_JSON}
    paths["report"].write_text(report_csv_text(report))
    paths["confusion"].write_text(confusion_csv_text(report))
    paths["chart"].write_text(chart_svg(report))
    mean, std = report.mean_std(report.test_accs)
    vmean, vstd = report.mean_std(report.valid_accs)
    summary = {"version": __version__, "config_hash": report.config_hash, "seed": report.seed,
               "mode": report.mode, "partial": report.partial,
               "folds": [f.fold for f in report.folds],
               "failed_folds": {str(f.fold): f.error for f in report.folds if f.status != "ok"},
               "test_mean": mean, "test_std": std, "valid_mean": vmean, "valid_std": vstd,
               "branch_test_mean": {b: report.branch_mean(b) if report.ok_folds else None
                                    for b in BRANCHES}}
    summary.update(extra or {})
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return paths
