"""Shared command-line handling for the demo scripts."""

import argparse
import tempfile
from pathlib import Path


def output_dir(description: str) -> Path:
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--out", type=Path, help="where to write artefacts (default: a fresh temp dir)")
    args = parser.parse_args()
    out = args.out or Path(tempfile.mkdtemp(prefix="hawp-demo-"))
    out.mkdir(parents=True, exist_ok=True)
    return out
