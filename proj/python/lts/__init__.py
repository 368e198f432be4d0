"""Long-term stability labelling of multi-session point clouds."""

from ._lts import (
    Error,
    auc,
    dense_weights,
    estimate_normals,
    evaluate,
    generate_scene,
    icp_align,
    label_maps,
    label_to_distance,
    miou,
    optimal_threshold,
    remove_ground_csf,
    remove_outliers_sor,
    resolve_votes,
    roc_curve,
    run_pipeline,
    stability_label,
    tile_submaps,
    weighted_rmse,
)

__all__ = [
    "Error",
    "auc",
    "dense_weights",
    "estimate_normals",
    "evaluate",
    "generate_scene",
    "icp_align",
    "label_maps",
    "label_to_distance",
    "miou",
    "optimal_threshold",
    "remove_ground_csf",
    "remove_outliers_sor",
    "resolve_votes",
    "roc_curve",
    "run_pipeline",
    "stability_label",
    "tile_submaps",
    "weighted_rmse",
]
