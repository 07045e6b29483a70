"""
VLD Navigation - World Package

Procedural building worlds, the five-camera rig, depth rendering and drone kinematics.
"""

from .types import (
    Action, ActionKind, Building, CameraRig, DepthImage, DronePose, ObjectTag,
    VisibleFeature, Window, WorldModel, FRONT_CAMERA, RIGHT_CAMERA, CAMERA_INDICES
)
from .generator import WorldGenParams, generate_world, load_world, save_world, audit_world
from .camera import render_depth, visible_features, building_pixel_box, cast_rays
from .kinematics import apply_action, check_success, standoff_point

__all__ = [
    'Action', 'ActionKind', 'Building', 'CameraRig', 'DepthImage', 'DronePose',
    'ObjectTag', 'VisibleFeature', 'Window', 'WorldModel',
    'FRONT_CAMERA', 'RIGHT_CAMERA', 'CAMERA_INDICES',
    'WorldGenParams', 'generate_world', 'load_world', 'save_world', 'audit_world',
    'render_depth', 'visible_features', 'building_pixel_box', 'cast_rays',
    'apply_action', 'check_success', 'standoff_point'
]
