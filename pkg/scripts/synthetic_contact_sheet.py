"""Contact sheet of synthetic leaves: one row per class, N samples per row.

    python scripts/synthetic_contact_sheet.py sheet.png --per-class 6
"""
import argparse

import numpy as np
from PIL import Image

from leafrec.pipeline.synth import N_CLASSES, synth_leaf


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--per-class", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--thumb", type=int, default=96)
    args = ap.parse_args()
    t = args.thumb
    sheet = np.full((N_CLASSES * t, args.per_class * t, 3), 255, np.uint8)
    for c in range(N_CLASSES):
        for i in range(args.per_class):
            img = Image.fromarray(synth_leaf(c, (args.seed, c, i))[0]).resize((t, t), Image.BOX)
            sheet[c * t:(c + 1) * t, i * t:(i + 1) * t] = np.asarray(img)
    Image.fromarray(sheet).save(args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
