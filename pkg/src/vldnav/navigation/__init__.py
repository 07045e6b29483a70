"""
VLD Navigation - Navigation Package

Floor localization and depth-discontinuity exploration.
"""

from .floor_localization import (
    AscentState, FloorLocResult, direct_count_height, band_adjusted_height, fl_failed,
    localize_floor, next_waypoint_spacing, proportional_height, target_height
)
from .exploration import (
    FacadeLine, SliceProfile, SplitResult, ViewpointChoice, approach_target, corridor_distance,
    crop_depth, decide_action, facade_line, find_split, mark_points, obstacle_points, safe_distance,
    select_viewpoint, slice_means
)

__all__ = [
    'AscentState', 'FloorLocResult', 'direct_count_height', 'band_adjusted_height', 'fl_failed',
    'localize_floor', 'next_waypoint_spacing', 'proportional_height', 'target_height',
    'FacadeLine', 'SliceProfile', 'SplitResult', 'ViewpointChoice', 'approach_target',
    'corridor_distance', 'crop_depth', 'decide_action', 'facade_line', 'find_split', 'mark_points',
    'obstacle_points', 'safe_distance', 'select_viewpoint', 'slice_means'
]
