"""From noisy decoded lines to scored wireframe proposals.

Junction peaks come from the ground-truth heatmap, line proposals from a
perturbed attraction field. Binding snaps both ends to junctions; the
verification labels and a randomly initialised scorer close the loop.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))
from _common import output_dir  # noqa: E402

from hawp.binding import assign_verification_labels, bind, proposals_to_wireframe  # noqa: E402
from hawp.hatfield import decode_field, encode_field  # noqa: E402
from hawp.io import save_proposals  # noqa: E402
from hawp.junctions import extract_junctions, gt_junction_maps  # noqa: E402
from hawp.loi import FeatureGrid, score_proposals, verification_network  # noqa: E402
from hawp.svg import plot_overlay  # noqa: E402
from hawp.synth import generate  # noqa: E402

out = output_dir(__doc__)
rng = np.random.default_rng(0)

sample = generate("polygons", 5)
gt = sample.wireframe
juncs = [j for j in extract_junctions(gt_junction_maps(gt), "test") if j[1] > 0]
print(f"{len(gt.junctions)} ground-truth junctions, {len(juncs)} heatmap peaks")

field = encode_field(gt)
noise = rng.normal(0, 0.01, field.shape).astype(np.float32)
field.theta += noise * field.mask
field.delta_d[:] = np.abs(rng.normal(0, 0.02, field.shape)).astype(np.float32) * field.mask
lines = decode_field(field).lines
print(f"{len(lines)} line proposals from the perturbed field")

for tau in (1.0, 10.0, np.inf):
    print(f"  tau_delta={tau:>4}: {len(bind(lines, juncs, tau))} bound proposals")

props = bind(lines, juncs)
labels = assign_verification_labels(props, gt)
print(f"{sum(labels)} of {len(props)} proposals match a ground-truth segment")

# a scorer with random weights; in practice the weights come from a trainer
w_main, w_psi, w_final, _ = verification_network(rng, channels=8, thin_channels=2, n=8, hidden=16)
h, w = gt.height // 4, gt.width // 4
grids = [FeatureGrid(rng.normal(size=(c, h, w))) for c in (8, 2, 2)]
scores = score_proposals(props, 8, *grids, w_main, w_psi, w_final, scale=4.0)
print(f"scores from the untrained scorer span [{scores.min():.3f}, {scores.max():.3f}]")

scored = [p.with_score(s) for p, s in zip(props, scores)]
save_proposals(scored, out / "proposals.json", units=4.0)
plot_overlay(sample.image, proposals_to_wireframe(props, gt.width, gt.height), out / "bound.svg")
print(f"proposals and overlay written to {out}")
