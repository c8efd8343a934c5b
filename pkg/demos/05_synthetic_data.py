"""Generate a small synthetic dataset and summarise what each primitive contains."""

import sys
from collections import defaultdict
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
from _common import output_dir  # noqa: E402

from hawp.io import load_pgm, load_wireframe  # noqa: E402
from hawp.svg import plot_overlay  # noqa: E402
from hawp.synth import generate_dataset  # noqa: E402

out = output_dir(__doc__)
manifest = generate_dataset(out, count_per_primitive=3, seed=2024, size=(128, 128))
print(f"{len(manifest['samples'])} samples in {out}")

stats = defaultdict(list)
for e in manifest["samples"]:
    wf = load_wireframe(out / e["wireframe"])
    stats[e["primitive"]].append((len(wf.segments), len(wf.junctions)))
    if e["image"].endswith("_00000.pgm"):
        plot_overlay(load_pgm(out / e["image"]), wf, out / (e["image"][:-4] + ".svg"))

print(f"{'primitive':<13}{'segments':>10}{'junctions':>11}")
for prim, rows in stats.items():
    segs = "/".join(str(s) for s, _ in rows)
    juncs = "/".join(str(j) for _, j in rows)
    print(f"{prim:<13}{segs:>10}{juncs:>11}")
