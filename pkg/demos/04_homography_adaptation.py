"""Pseudo-labelling by homography adaptation.

Edge maps "predicted" on ten warped views (here: noisy rasterisations of the
warped ground truth) are pulled back and averaged; putative segments,
including some spurious ones, are kept only when verification and edge
evidence agree.
"""

import sys
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

sys.path.insert(0, str(Path(__file__).parent))
from _common import output_dir  # noqa: E402

from hawp.evaluation import sample_homography  # noqa: E402
from hawp.geometry import Homography, Wireframe, warp_wireframe  # noqa: E402
from hawp.io import save_edge_map, save_wireframe  # noqa: E402
from hawp.ssl import N_VIEWS, EdgeMap, pseudo_label, rasterize_edges  # noqa: E402
from hawp.svg import plot_overlay  # noqa: E402
from hawp.synth import generate  # noqa: E402

out = output_dir(__doc__)
rng = np.random.default_rng(4)

sample = generate("checkerboard", 2)
gt = sample.wireframe
size = (gt.width, gt.height)

homs = [Homography.identity()] + [sample_homography(100 + k, size) for k in range(N_VIEWS - 1)]
views = []
for h in homs:
    edges = rasterize_edges(warp_wireframe(h, gt, size)).grid
    blurred = gaussian_filter(edges, 0.7) * 2.5 + rng.normal(0, 0.1, edges.shape)
    views.append(EdgeMap(blurred))

segs = gt.segment_array()
spurious = rng.uniform(20, 230, (8, 4))
putative = Wireframe.from_arrays(
    gt.width, gt.height, np.vstack([segs, spurious]),
    np.concatenate([rng.uniform(0.7, 1.0, len(segs)), rng.uniform(0.7, 1.0, 8)]),
).with_endpoint_junctions()

labelled, agg = pseudo_label(putative, views, homs)
real = {tuple(s) for s in segs}
kept_real = sum(tuple(s.as_array()) in real for s in labelled.segments)
print(f"{len(putative.segments)} putative segments ({len(segs)} real, 8 spurious)")
print(f"kept {len(labelled.segments)}: {kept_real} real, {len(labelled.segments) - kept_real} spurious")

save_edge_map(agg, out / "aggregated.pgm")
save_wireframe(labelled, out / "pseudo_label.json")
plot_overlay(sample.image, labelled, out / "pseudo_label.svg")
print(f"aggregated edges and pseudo-label written to {out}")
