"""
VLD Navigation - Kinematics Module

Kinematic pose updates for the drone (no dynamics) with collision checks
against buildings inflated by the safety radius, and the delivery success
test around a window's standoff point.
"""

import math
import logging
from typing import Tuple

from vldnav.utils.error_handling import CollisionError
from vldnav.world.geometry import segment_clearance, vertical_clearance
from vldnav.world.types import Action, ActionKind, DronePose, Window, WorldModel, wrap_angle

logger = logging.getLogger('vldnav.world.kinematics')

ROTATION_STEP = math.pi / 6.0
DISTANCE_TOL = 1e-9


def apply_action(world: WorldModel, pose: DronePose, action: Action,
                 safety_radius: float = 0.5, l_max: float = 10.0) -> DronePose:
    """
    Return the pose after executing `action`.

    Translates move at constant altitude along the action bearing and turn the
    drone to face it; rotations and alignments leave the position unchanged
    apart from the requested altitude. Raises CollisionError when the motion
    comes closer than the safety radius to a building.
    """
    kind = action.kind
    if kind == ActionKind.STOP:
        return pose

    if kind == ActionKind.ROTATE_LEFT_30:
        return DronePose(pose.x, pose.y, pose.z, wrap_angle(pose.yaw + ROTATION_STEP))

    if kind == ActionKind.TRANSLATE:
        if action.distance > l_max + DISTANCE_TOL:
            raise ValueError(f"Translate distance {action.distance:.3f} exceeds L_max {l_max}")
        end = (pose.x + action.distance * math.cos(action.bearing),
               pose.y + action.distance * math.sin(action.bearing))
        clearance = segment_clearance(world, (pose.x, pose.y), end, pose.z, safety_radius)
        if clearance < safety_radius:
            raise CollisionError(
                f"Translate of {action.distance:.2f} m at bearing {math.degrees(action.bearing):.1f} deg "
                f"passes {clearance:.3f} m from a building (safety radius {safety_radius} m)"
            )
        return DronePose(end[0], end[1], pose.z, action.bearing)

    if kind in (ActionKind.ASCEND, ActionKind.APPROACH):
        altitude = pose.z if action.altitude is None else float(action.altitude)
        if altitude < 0.0:
            raise ValueError(f"Target altitude must be non-negative, got {altitude}")
        if altitude != pose.z:
            clearance = vertical_clearance(world, pose.x, pose.y, pose.z, altitude, safety_radius)
            if clearance < safety_radius:
                raise CollisionError(
                    f"Vertical move to {altitude:.2f} m passes {clearance:.3f} m from a building"
                )
        yaw = pose.yaw if action.bearing is None else action.bearing
        return DronePose(pose.x, pose.y, altitude, yaw)

    raise ValueError(f"Unsupported action kind: {kind}")


def path_increment(pose: DronePose, action: Action) -> float:
    """Distance flown by an executed action (horizontal translate or vertical leg)."""
    if action.kind == ActionKind.TRANSLATE:
        return action.distance
    if action.kind in (ActionKind.ASCEND, ActionKind.APPROACH) and action.altitude is not None:
        return abs(action.altitude - pose.z)
    return 0.0


def standoff_point(world: WorldModel, window: Window, standoff: float) -> Tuple[float, float, float]:
    """Window centre displaced outward along its facade normal."""
    building = world.building_of(window.id)
    nx, ny = building.facade_normal(window.facade_index)
    cx, cy, cz = window.center
    return cx + standoff * nx, cy + standoff * ny, cz


def check_success(pose: DronePose, world: WorldModel, target_window: Window,
                  radius: float = 3.0, standoff: float = 1.5) -> bool:
    """True iff the drone is within `radius` of the target's standoff point."""
    return pose.distance_to(standoff_point(world, target_window, standoff)) <= radius
