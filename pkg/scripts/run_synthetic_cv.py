"""Full desk benchmark: synthetic set, random 10-fold CV, report files.

    python scripts/run_synthetic_cv.py --out runs/synthetic --seed 0
"""
import argparse
import logging
import time
from pathlib import Path

from leafrec.pipeline.bench import synthetic_benchmark
from leafrec.pipeline.cv import CvConfig
from leafrec.pipeline.report import write_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("runs/synthetic"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--mode", choices=["random", "indexed"], default="random")
    ap.add_argument("--folds", default="1-10", help="e.g. 1-10 or 1,2")
    ap.add_argument("--n-per-class", type=int, default=40)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    lo, _, hi = args.folds.partition("-")
    folds = tuple(range(int(lo), int(hi) + 1)) if hi else tuple(int(f) for f in args.folds.split(","))
    cfg = CvConfig(mode=args.mode, seed=args.seed, folds=folds)
    t = time.perf_counter()
    res = synthetic_benchmark(args.out, cfg, n_per_class=args.n_per_class, workers=args.workers)
    paths = write_report(res.report, args.out / "cv", {"extract_seconds": res.extract_seconds,
                                                      "cv_seconds": res.cv_seconds})
    mean, std = res.report.mean_std(res.report.test_accs)
    print(f"test {100 * mean:.2f}% +- {100 * std:.2f}%  ({time.perf_counter() - t:.0f}s)")
    for b in res.report.folds[0].branch_test_acc if res.report.ok_folds else ():
        print(f"  {b:<11} {100 * res.report.branch_mean(b):.2f}%")
    print(f"report: {paths['report']}")


if __name__ == "__main__":
    main()
