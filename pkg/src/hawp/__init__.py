"""Line-segment wireframe tools: HAT field codec, binding, losses, metrics, synthetic data and pseudo-labels."""

__version__ = "0.1.0"

from hawp.geometry import (  # noqa: E402
    Homography,
    Line,
    LineSegment,
    Point2,
    Wireframe,
    orthogonal_distance,
    project_to_segment,
    structural_distance,
    warp_wireframe,
)
from hawp.hatfield import HatField, decode_field, decode_point, encode_field, encode_point  # noqa: E402

__all__ = [
    "HatField",
    "Homography",
    "Line",
    "LineSegment",
    "Point2",
    "Wireframe",
    "decode_field",
    "decode_point",
    "encode_field",
    "encode_point",
    "orthogonal_distance",
    "project_to_segment",
    "structural_distance",
    "warp_wireframe",
]
