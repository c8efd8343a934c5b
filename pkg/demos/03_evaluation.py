"""Score jittered predictions against ground truth with every metric in the suite."""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))
from _common import output_dir  # noqa: E402

from hawp.evaluation import heatmap_ap_f, map_junctions, repeatability, sample_homography, sap_curves  # noqa: E402
from hawp.geometry import Wireframe, warp_wireframe  # noqa: E402
from hawp.svg import pr_curve_svg  # noqa: E402
from hawp.synth import generate  # noqa: E402

out = output_dir(__doc__)
rng = np.random.default_rng(1)

gts, preds = [], []
for k, prim in enumerate(["lines", "polygon", "star", "cube", "strips", "checkerboard"] * 3):
    gt = generate(prim, k).wireframe
    segs = gt.segment_array()
    jitter = rng.normal(0, 1.5, segs.shape)
    scores = rng.uniform(0.5, 1.0, len(segs))
    # a few confident false alarms
    junk = rng.uniform(0, gt.width, (2, 4))
    wf = Wireframe.from_arrays(gt.width, gt.height, np.vstack([segs + jitter, junk]),
                               np.concatenate([scores, [0.9, 0.6]]))
    preds.append(wf.with_endpoint_junctions(1.0))
    gts.append(gt)

curves = sap_curves(preds, gts)
for t, c in curves.items():
    print(f"sAP{t:g} = {c.ap:.3f}")
print(f"mAPJ = {map_junctions(preds, gts):.3f}")
ap_h, f_h = heatmap_ap_f(preds, gts)
print(f"heatmap AP = {ap_h:.3f}, F = {f_h:.3f}")

# repeatability: the same detector output seen through a random homography
gt = gts[1]
h = sample_homography(7, (gt.width, gt.height))
seen = warp_wireframe(h, preds[1], (gt.width, gt.height))
for metric in ("structural", "orthogonal"):
    r = repeatability(preds[1], seen, h, metric)
    print(f"Rep-5 ({metric}) = {r.rep:.3f}, Loc-5 = {r.loc:.3f} px")

(out / "pr.svg").write_text(pr_curve_svg({f"sAP{t:g}": c for t, c in curves.items()}))
print(f"PR curves written to {out / 'pr.svg'}")
