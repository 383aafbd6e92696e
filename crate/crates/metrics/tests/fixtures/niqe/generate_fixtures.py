"""Regenerates the NIQE oracle fixtures.

Requires numpy, scipy, opencv, torch, scikit-image and an unpacked BasicSR
source tree (pip download basicsr --no-deps) whose path is given as argv[1].
Writes images/*.png, oracle_scores.tsv and ../../../assets/niqe_pristine.json.
"""
import json
import os
import sys
import types

import cv2
import numpy as np
import skimage.data as data

root = sys.argv[1]
sys.path.insert(0, root)
# registry stub: the metric module only needs the decorator
registry = types.ModuleType("basicsr.utils.registry")


class _Reg:
    def register(self):
        return lambda f: f


registry.METRIC_REGISTRY = _Reg()
pkg = types.ModuleType("basicsr")
pkg.__path__ = [os.path.join(root, "basicsr")]
utils = types.ModuleType("basicsr.utils")
utils.__path__ = [os.path.join(root, "basicsr", "utils")]
sys.modules.update({"basicsr": pkg, "basicsr.utils": utils, "basicsr.utils.registry": registry})
from basicsr.utils.color_util import bgr2ycbcr  # noqa: E402

utils.bgr2ycbcr = bgr2ycbcr
metrics = types.ModuleType("basicsr.metrics")
metrics.__path__ = [os.path.join(root, "basicsr", "metrics")]
sys.modules["basicsr.metrics"] = metrics
from basicsr.metrics.niqe import calculate_niqe  # noqa: E402

here = os.path.dirname(os.path.abspath(__file__))
rng = np.random.default_rng(20190727)
S = 288


def crop(img, top, left):
    return np.ascontiguousarray(img[top:top + S, left:left + S])


bases = [
    ("astronaut", crop(data.astronaut(), 20, 160)),
    ("coffee", crop(data.coffee(), 80, 200)),
    ("chelsea", crop(data.chelsea(), 6, 100)),
    ("rocket", crop(data.rocket(), 100, 250)),
    ("immuno", crop(data.immunohistochemistry(), 100, 100)),
    ("camera", crop(data.camera(), 60, 120)),
    ("coins", crop(data.coins(), 10, 40)),
    ("moon", crop(data.moon(), 150, 150)),
    ("brick", crop(data.brick(), 100, 100)),
    ("gravel", crop(data.gravel(), 200, 200)),
]


def degrade(img, kind):
    f = img.astype(np.float64)
    if kind == "clean":
        out = f
    elif kind.startswith("blur"):
        s = float(kind[4:])
        out = cv2.GaussianBlur(f, (0, 0), s, borderType=cv2.BORDER_REFLECT)
    elif kind.startswith("noise"):
        s = float(kind[5:])
        out = f + rng.normal(0.0, s, size=f.shape)
    elif kind == "downup":
        h, w = f.shape[:2]
        small = cv2.resize(f, (w // 4, h // 4), interpolation=cv2.INTER_AREA)
        out = cv2.resize(small, (w, h), interpolation=cv2.INTER_CUBIC)
    else:
        raise ValueError(kind)
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


kinds = ["blur1.5", "noise10", "downup", "blur3", "noise25"]
rows = []
for i, (name, img) in enumerate(bases):
    for kind in ("clean", kinds[i % len(kinds)]):
        out = degrade(img, kind)
        fname = f"{name}_{kind}.png"
        if out.ndim == 3:
            cv2.imwrite(os.path.join(here, "images", fname), cv2.cvtColor(out, cv2.COLOR_RGB2BGR))
        else:
            cv2.imwrite(os.path.join(here, "images", fname), out)
        bgr = cv2.imread(os.path.join(here, "images", fname), cv2.IMREAD_UNCHANGED)
        if bgr.ndim == 2:
            score = calculate_niqe(bgr.astype(np.float32), 0, input_order="HW")
        else:
            score = calculate_niqe(bgr, 0, input_order="HWC", convert_to="y")
        rows.append((fname, score))
        print(fname, score)

with open(os.path.join(here, "oracle_scores.tsv"), "w") as f:
    for fname, score in rows:
        f.write(f"{fname}\t{score!r}\n")

params = np.load(os.path.join(root, "basicsr", "metrics", "niqe_pris_params.npz"))
doc = {
    "format_version": 1,
    "block_size": 96,
    "window_sigma": 7.0 / 6.0,
    "scales": 2,
    "mu": [float(v) for v in params["mu_pris_param"].ravel()],
    "cov": [[float(v) for v in row] for row in params["cov_pris_param"]],
}
with open(os.path.join(here, "..", "..", "..", "assets", "niqe_pristine.json"), "w") as f:
    json.dump(doc, f, indent=1)
