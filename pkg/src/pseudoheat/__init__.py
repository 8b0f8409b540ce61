"""Pseudo-heatmap panoptic clustering for LiDAR point clouds."""
from .assignment import assign_instances, fuse_panoptic
from .config import Config, load_config
from .core import (
    ClassTable,
    GridConfig,
    PanopticLabeling,
    PointCloud,
    seeded_rng,
    semantic_kitti_table,
)
from .grouping import group_centers, grid_class_majority, radius_for_class
from .heatmap import build_pseudo_image, class_agnostic, extract_centers
from .knn_attention import AttentionWeights, ThingFeatures, attention_forward, knn_indices
from .metrics import average_epe, mean_iou, panoptic_quality
from .partition import cylindrical_voxelize, voxel_to_bev
from .pipeline import cluster_shifted, segment_frame

__version__ = "0.1.0"
