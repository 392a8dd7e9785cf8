#!/usr/bin/env python3
"""Build a small 3-class natural-photo dataset from images bundled with
scikit-image, scikit-learn and matplotlib.

Each class draws random crops (varying scale, position and mirroring) from its
own group of source photographs and resizes them to 150x150 RGB PNGs:

    OUT/<class>/img_0000.png ...

The output is a pure function of --seed and --per-class.
"""

import argparse
import os
import sys

import numpy as np
from PIL import Image


def _skimage(name):
    import skimage
    path = os.path.join(os.path.dirname(skimage.__file__), "data", name)
    return np.asarray(Image.open(path).convert("RGB"))


def _sklearn(name):
    from sklearn.datasets import load_sample_image
    return load_sample_image(name)


def _matplotlib(name):
    import matplotlib.cbook as cbook
    with cbook.get_sample_data(name) as f:
        return np.asarray(Image.open(f).convert("RGB"))


CLASSES = {
    "people": [("skimage", "astronaut.png"), ("matplotlib", "grace_hopper.jpg"), ("skimage", "camera.png")],
    "objects": [("skimage", "coffee.png"), ("skimage", "rocket.jpg"), ("skimage", "motorcycle_left.png")],
    "nature": [("sklearn", "china.jpg"), ("sklearn", "flower.jpg"), ("skimage", "chelsea.png")],
}

LOADERS = {"skimage": _skimage, "sklearn": _sklearn, "matplotlib": _matplotlib}


def load_rgb(source, name):
    img = np.asarray(LOADERS[source](name))
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    if img.shape[-1] == 4:
        img = img[..., :3]
    if img.dtype != np.uint8:
        img = (255 * (img.astype(np.float64) / max(img.max(), 1))).astype(np.uint8)
    return img


def random_crop(img, rng, size):
    h, w = img.shape[:2]
    side = int(rng.uniform(0.35, 0.9) * min(h, w))
    y = int(rng.integers(0, h - side + 1))
    x = int(rng.integers(0, w - side + 1))
    crop = Image.fromarray(img[y:y + side, x:x + side])
    if rng.random() < 0.5:
        crop = crop.transpose(Image.FLIP_LEFT_RIGHT)
    return crop.resize((size, size), Image.BILINEAR)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--per-class", type=int, default=120)
    ap.add_argument("--size", type=int, default=150)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    for cls, sources in CLASSES.items():
        images = [load_rgb(s, n) for s, n in sources]
        d = os.path.join(args.out, cls)
        os.makedirs(d, exist_ok=True)
        for i in range(args.per_class):
            src = images[i % len(images)]
            random_crop(src, rng, args.size).save(os.path.join(d, f"img_{i:04d}.png"))
    print(f"wrote {len(CLASSES)} x {args.per_class} images to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
