"""``hawp`` command line.

Exit status is 0 on success, 1 on usage errors and 2 on data errors. Every
command that writes a file also writes a run manifest next to it
(``<out>.run.json``, or ``run.json`` inside an output directory) holding
the argument vector and the resolved options.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
from scipy.ndimage import map_coordinates

from hawp import __version__
from hawp.binding import DEFAULT_UNITS, TAU_DELTA, bind, proposals_to_wireframe
from hawp.errors import HawpError
from hawp.evaluation import (
    HEATMAP_TOL,
    JUNCTION_THRESHOLDS,
    REPEAT_EPS,
    SAP_THRESHOLDS,
    heatmap_ap_f,
    junction_ap,
    repeatability,
    sample_homography,
    sap_curves,
)
from hawp.geometry import Homography, Wireframe, warp_wireframe
from hawp.hatfield import DEFAULT_D_MIN, DEFAULT_SCALES, DEFAULT_STRIDE, DEFAULT_TAU_D, decode_field, encode_field, merge_duplicate_lines
from hawp.io import (
    dump_json,
    load_edge_map,
    load_hat_field,
    load_homography,
    load_junction_maps,
    load_pgm,
    load_wireframe,
    save_edge_map,
    save_hat_field,
    save_homography,
    save_junction_maps,
    save_pgm,
    save_proposals,
    save_wireframe,
)
from hawp.junctions import extract_junctions, gt_junction_maps
from hawp.ssl import N_EDGE_POINTS, TAU_SSL, aggregate_edges, rasterize_edges, ssl_filter
from hawp.svg import plot_overlay, pr_curve_svg
from hawp.synth import DEFAULT_SIZE, PRIMITIVES, generate_dataset

PROG = "hawp"
_SKIP_JSON = {"manifest.json", "run.json"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _size(parser_default=None):
    return dict(nargs=2, type=int, metavar=("W", "H"), default=parser_default)


# --- run manifests -----------------------------------------------------------

def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def write_run_manifest(out, argv, args) -> Path:
    out = Path(out)
    path = out / "run.json" if out.is_dir() else out.with_name(out.name + ".run.json")
    opts = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k != "func"}
    dump_json({"program": PROG, "version": __version__, "argv": list(argv), "options": opts}, path)
    return path


# --- helpers -----------------------------------------------------------------

def _load_junctions(path):
    """Junction list from a JUNC container or from a wireframe JSON (falling back to its endpoints)."""
    p = str(path)
    if p.lower().endswith(".json"):
        wf = load_wireframe(p)
        if not wf.junctions:
            wf = wf.with_endpoint_junctions()
        return wf.junctions
    return extract_junctions(load_junction_maps(p), mode="test")


def _wireframe_files(path: Path) -> list[Path]:
    if path.is_dir():
        return sorted(p for p in path.glob("*.json") if p.name not in _SKIP_JSON and not p.name.endswith(".run.json"))
    return [path]


def _paired(pred: Path, gt: Path) -> tuple[list[Wireframe], list[Wireframe]]:
    preds, gts = [], []
    if pred.is_dir() != gt.is_dir():
        raise UsageError("--pred and --gt must both be files or both be directories")
    for g in _wireframe_files(gt):
        gwf = load_wireframe(g)
        p = pred / g.name if pred.is_dir() else pred
        # a missing prediction counts as an empty one
        preds.append(load_wireframe(p) if p.exists() else Wireframe(gwf.width, gwf.height))
        gts.append(gwf)
    return preds, gts


def _emit(result: dict, out) -> None:
    text = json.dumps(result, indent=1)
    if out:
        dump_json(result, out)
    print(text)


def _finite(v):
    return None if isinstance(v, float) and not math.isfinite(v) else v


def warp_image(image: np.ndarray, h: Homography, out_size) -> np.ndarray:
    """Bilinear inverse warp of ``image`` by ``h`` onto an ``out_size`` canvas (outside = 0)."""
    w, hgt = out_size
    ys, xs = np.mgrid[0:hgt, 0:w]
    q = np.stack([xs.ravel(), ys.ravel(), np.ones(w * hgt)]).astype(np.float64)
    r = h.inverse().m @ q
    ok = r[2] > 1e-12
    den = np.where(ok, r[2], 1.0)
    u, v = r[0] / den, r[1] / den
    vals = map_coordinates(image.astype(np.float64), [v, u], order=1, mode="constant", cval=0.0)
    vals[~ok] = 0.0
    return vals.reshape(hgt, w)


# --- commands ----------------------------------------------------------------

def cmd_synth(args):
    prims = PRIMITIVES if args.primitive == "all" else (args.primitive,)
    manifest = generate_dataset(args.out, args.count, args.seed, prims, tuple(args.size), threads=args.threads)
    print(f"wrote {len(manifest['samples'])} samples to {args.out}")
    return args.out


def cmd_encode(args):
    wf = load_wireframe(args.wireframe)
    field = encode_field(wf, args.stride, args.tau_d, args.d_min)
    save_hat_field(field, args.out)
    if args.junctions_out:
        save_junction_maps(gt_junction_maps(wf, args.stride), args.junctions_out)
    print(f"encoded {len(wf.segments)} segments onto a {field.width_s}x{field.height_s} lattice "
          f"({int(field.foreground().sum())} foreground pixels)")
    return args.out


def cmd_decode(args):
    field = load_hat_field(args.field)
    dec = decode_field(field, args.scales)
    width, height = args.size or (field.width_s * field.stride, field.height_s * field.stride)
    lines = dec.lines
    if args.junctions:
        props = bind(lines, _load_junctions(args.junctions), args.tau_delta, args.units)
        props = [p.with_score(1.0) for p in props]
        wf = proposals_to_wireframe(props, width, height)
        if args.proposals_out:
            save_proposals(props, args.proposals_out, args.units)
    else:
        keep, scores = merge_duplicate_lines(lines, args.merge_tol) if args.merge_tol > 0 else (
            np.arange(len(lines)), np.ones(len(lines)))
        wf = Wireframe.from_arrays(width, height, lines[keep], scores).with_endpoint_junctions(args.merge_tol)
    save_wireframe(wf, args.out)
    print(f"decoded {len(dec.lines)} proposals ({dec.skipped} skipped), wrote {len(wf.segments)} segments")
    return args.out


def cmd_bind(args):
    lines = load_wireframe(args.lines)
    props = bind(lines.segments, _load_junctions(args.junctions), args.tau_delta, args.units)
    save_proposals(props, args.out, args.units)
    if args.wireframe_out:
        scored = [p.with_score(1.0) for p in props]
        save_wireframe(proposals_to_wireframe(scored, lines.width, lines.height), args.wireframe_out)
    print(f"bound {len(props)} of {len(lines.segments)} lines")
    return args.out


def cmd_eval_sap(args):
    preds, gts = _paired(args.pred, args.gt)
    curves = sap_curves(preds, gts, args.thresholds)
    result = {"metric": "sAP", "images": len(gts),
              "ap": {f"{t:g}": c.ap for t, c in curves.items()}}
    if args.plot:
        Path(args.plot).write_text(pr_curve_svg({f"sAP{t:g}": c for t, c in curves.items()}), encoding="utf-8")
    _emit(result, args.out)
    return args.out


def cmd_eval_junc(args):
    preds, gts = _paired(args.pred, args.gt)
    aps = junction_ap(preds, gts, args.thresholds)
    result = {"metric": "mAPJ", "images": len(gts), "ap": {f"{t:g}": v for t, v in aps.items()},
              "map": float(np.mean(list(aps.values())))}
    _emit(result, args.out)
    return args.out


def cmd_eval_heatmap(args):
    preds, gts = _paired(args.pred, args.gt)
    ap, f = heatmap_ap_f(preds, gts, tol=args.tol)
    _emit({"metric": "heatmap", "images": len(gts), "ap": ap, "f": f}, args.out)
    return args.out


def cmd_eval_rep(args):
    a = load_wireframe(args.pred_a)
    b = load_wireframe(args.pred_b)
    h = load_homography(args.homography) if args.homography else Homography.identity()
    r = repeatability(a, b, h, args.metric, args.eps)
    _emit({"metric": f"rep-{args.metric}", "eps": args.eps, "rep": r.rep, "loc": _finite(r.loc),
           "matched": r.matched, "total": r.total}, args.out)
    return args.out


def cmd_homography(args):
    h = sample_homography(args.seed, tuple(args.size))
    save_homography(h, args.out)
    print(json.dumps(h.to_dict()))
    return args.out


def cmd_warp(args):
    h = load_homography(args.homography)
    wf = load_wireframe(args.wireframe)
    size = tuple(args.size) if args.size else (wf.width, wf.height)
    out = warp_wireframe(h, wf, size)
    save_wireframe(out, args.out)
    if args.image:
        if not args.image_out:
            raise UsageError("--image needs --image-out")
        img = warp_image(load_pgm(args.image), h, size)
        save_pgm(np.clip(np.rint(img), 0, 255).astype(np.uint8), args.image_out)
    print(f"warped {len(wf.segments)} segments, kept {len(out.segments)}")
    return args.out


def cmd_edges_aggregate(args):
    if len(args.maps) != len(args.homographies):
        raise UsageError("--maps and --homographies must have the same length")
    maps = [load_edge_map(m) for m in args.maps]
    homs = [load_homography(h) for h in args.homographies]
    size = tuple(args.size) if args.size else (maps[0].width, maps[0].height)
    save_edge_map(aggregate_edges(maps, homs, size), args.out)
    print(f"aggregated {len(maps)} views")
    return args.out


def cmd_edges_render(args):
    wf = load_wireframe(args.wireframe)
    save_edge_map(rasterize_edges(wf), args.out)
    return args.out


def cmd_pseudo_label(args):
    wf = load_wireframe(args.wireframe)
    edges = load_edge_map(args.edges)
    out = ssl_filter(wf, edges, args.tau_ssl, args.n_pts, args.window)
    save_wireframe(out, args.out)
    print(f"kept {len(out.segments)} of {len(wf.segments)} segments")
    return args.out


def cmd_plot(args):
    wf = load_wireframe(args.wireframe)
    image = load_pgm(args.image) if args.image else None
    plot_overlay(image, wf, args.out)
    return args.out


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog=PROG, description="Wireframe codec, evaluation and pseudo-labelling tools.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate synthetic primitive images with wireframes")
    s.add_argument("--primitive", choices=("all",) + PRIMITIVES, default="all")
    s.add_argument("--count", type=int, default=2000, help="samples per primitive")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--size", **_size(list(DEFAULT_SIZE)))
    s.add_argument("--threads", type=int, default=None, help="worker threads (default: HAWP_THREADS or CPU count)")
    s.add_argument("--out", type=Path, required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("encode", help="encode a wireframe as a HAT field container")
    s.add_argument("--wireframe", type=Path, required=True)
    s.add_argument("--stride", type=int, default=DEFAULT_STRIDE)
    s.add_argument("--tau-d", type=float, default=DEFAULT_TAU_D)
    s.add_argument("--d-min", type=float, default=DEFAULT_D_MIN)
    s.add_argument("--junctions-out", type=Path, help="also write endpoint heatmap/offsets (JUNC)")
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("decode", help="decode a HAT field into line proposals")
    s.add_argument("--field", type=Path, required=True)
    s.add_argument("--scales", type=int, nargs="+", default=list(DEFAULT_SCALES))
    s.add_argument("--size", **_size(), help="image size (default: lattice size times stride)")
    s.add_argument("--merge-tol", type=float, default=0.05, help="merge decodings closer than this (px)")
    s.add_argument("--junctions", type=Path, help="bind to junctions from a JUNC container or wireframe JSON")
    s.add_argument("--tau-delta", type=float, default=TAU_DELTA)
    s.add_argument("--units", type=float, default=DEFAULT_UNITS)
    s.add_argument("--proposals-out", type=Path)
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("bind", help="bind line segments to junctions")
    s.add_argument("--lines", type=Path, required=True, help="wireframe JSON holding the lines")
    s.add_argument("--junctions", type=Path, required=True)
    s.add_argument("--tau-delta", type=float, default=TAU_DELTA)
    s.add_argument("--units", type=float, default=DEFAULT_UNITS)
    s.add_argument("--wireframe-out", type=Path)
    s.add_argument("--out", type=Path, required=True, help="proposal JSON")
    s.set_defaults(func=cmd_bind)

    ev = sub.add_parser("eval", help="evaluation metrics")
    evs = ev.add_subparsers(dest="metric_name", required=True, parser_class=_Parser)
    for name, fn, thr in (("sap", cmd_eval_sap, SAP_THRESHOLDS), ("junc", cmd_eval_junc, JUNCTION_THRESHOLDS)):
        e = evs.add_parser(name, help=f"{name} over paired wireframe files or directories")
        e.add_argument("--pred", type=Path, required=True)
        e.add_argument("--gt", type=Path, required=True)
        e.add_argument("--thresholds", type=float, nargs="+", default=list(thr))
        if name == "sap":
            e.add_argument("--plot", type=Path, help="write the PR curves as SVG")
        e.add_argument("--out", type=Path)
        e.set_defaults(func=fn)
    e = evs.add_parser("heatmap", help="pixel-level AP and F")
    e.add_argument("--pred", type=Path, required=True)
    e.add_argument("--gt", type=Path, required=True)
    e.add_argument("--tol", type=float, default=HEATMAP_TOL)
    e.add_argument("--out", type=Path)
    e.set_defaults(func=cmd_eval_heatmap)
    e = evs.add_parser("rep", help="repeatability and localisation error")
    e.add_argument("--pred-a", type=Path, required=True)
    e.add_argument("--pred-b", type=Path, required=True)
    e.add_argument("--homography", type=Path, help="homography JSON mapping a to b (default identity)")
    e.add_argument("--metric", choices=("structural", "orthogonal"), default="structural")
    e.add_argument("--eps", type=float, default=REPEAT_EPS)
    e.add_argument("--out", type=Path)
    e.set_defaults(func=cmd_eval_rep)

    s = sub.add_parser("homography", help="sample a random homography")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--size", **_size(list(DEFAULT_SIZE)))
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_homography)

    s = sub.add_parser("warp", help="warp a wireframe (and optionally its image) by a homography")
    s.add_argument("--wireframe", type=Path, required=True)
    s.add_argument("--homography", type=Path, required=True)
    s.add_argument("--size", **_size())
    s.add_argument("--image", type=Path)
    s.add_argument("--image-out", type=Path)
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_warp)

    ed = sub.add_parser("edges", help="edge-map utilities")
    eds = ed.add_subparsers(dest="edges_command", required=True, parser_class=_Parser)
    e = eds.add_parser("aggregate", help="average edge maps predicted on warped views")
    e.add_argument("--maps", type=Path, nargs="+", required=True)
    e.add_argument("--homographies", type=Path, nargs="+", required=True)
    e.add_argument("--size", **_size())
    e.add_argument("--out", type=Path, required=True)
    e.set_defaults(func=cmd_edges_aggregate)
    e = eds.add_parser("render", help="rasterise a wireframe into an edge map")
    e.add_argument("--wireframe", type=Path, required=True)
    e.add_argument("--out", type=Path, required=True)
    e.set_defaults(func=cmd_edges_render)

    s = sub.add_parser("pseudo-label", help="prune a putative wireframe against an edge map")
    s.add_argument("--wireframe", type=Path, required=True)
    s.add_argument("--edges", type=Path, required=True)
    s.add_argument("--tau-ssl", type=float, default=TAU_SSL)
    s.add_argument("--n-pts", type=int, default=N_EDGE_POINTS)
    s.add_argument("--window", type=int, default=1)
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_pseudo_label)

    s = sub.add_parser("plot", help="SVG overlay of a wireframe on its image")
    s.add_argument("--image", type=Path)
    s.add_argument("--wireframe", type=Path, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        out = args.func(args)
    except UsageError as exc:
        print(f"{PROG}: usage error: {exc}", file=sys.stderr)
        return 1
    except (HawpError, OSError, ValueError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    if out is not None:
        write_run_manifest(out, argv, args)
    return 0


cli_dispatch = main


if __name__ == "__main__":
    sys.exit(main())
