"""Label-region geometry, view synthesis and embedding ranking for labels on cylindrical bottles."""

from ._core import (
    Ellipse,
    LabelaugError,
    LabelRegion,
    Pose,
    augment,
    batch_all_triplet_loss,
    common_external_tangents,
    cosine_distance,
    cross_ratio,
    detect_label_region,
    fit_ellipse,
    front_view,
    project_rim_circle,
    rank_top_k,
    read_image,
    render_reference,
    solve_fourth_point,
    synthesize_view,
    target_region,
    write_png,
)

__all__ = [
    "Ellipse",
    "LabelaugError",
    "LabelRegion",
    "Pose",
    "augment",
    "batch_all_triplet_loss",
    "common_external_tangents",
    "cosine_distance",
    "cross_ratio",
    "detect_label_region",
    "fit_ellipse",
    "front_view",
    "project_rim_circle",
    "rank_top_k",
    "read_image",
    "render_reference",
    "solve_fourth_point",
    "synthesize_view",
    "target_region",
    "write_png",
]
