"""
VLD Navigation - Floor Localization Module

This module brings the drone from the building base to the target floor. The
drone climbs through non-overlapping vertical waypoints, counts the floors in
each front view, and once the running count reaches the target floor
interpolates back down inside the last band. The Direct Count baseline instead
estimates the floor height from a single whole-building view.
"""

import math
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from vldnav.perception.base import PerceptionBackend
from vldnav.perception.noise import NoiseStream
from vldnav.perception.types import FloorCountAnswer, RequestInterpretation
from vldnav.utils.error_handling import (
    CollisionError, DivisionUndefinedError, FloorLocAbortError, NoBuildingInViewError, OvershootError
)
from vldnav.world.camera import render_depth, row_elevation
from vldnav.world.kinematics import apply_action
from vldnav.world.types import (
    FRONT_CAMERA, Action, ActionKind, CameraRig, DepthImage, DronePose, PixelBox, WorldModel
)

logger = logging.getLogger('vldnav.navigation.floor_localization')

FL_FAIL_THRESHOLD = 7.0


@dataclass
class AscentState:
    """Mutable progress of one floor-localization run."""
    target_floor: int
    pose: DronePose
    waypoints_visited: List[float] = field(default_factory=list)  # band tops h_1..h_i
    f_cur: int = 0
    bbox_buil: Optional[PixelBox] = None
    done: bool = False
    queries_used: int = 0
    actions: List[Action] = field(default_factory=list)
    records: List[Dict[str, Any]] = field(default_factory=list)


@dataclass
class FloorLocResult:
    h_final: float
    bbox_buil: Optional[PixelBox]
    queries_used: int
    pose: DronePose
    method: str = 'ours'
    overshoot: bool = False
    actions: List[Action] = field(default_factory=list)
    records: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'h_final': self.h_final,
            'bbox_buil': list(self.bbox_buil) if self.bbox_buil is not None else None,
            'queries_used': self.queries_used,
            'method': self.method,
            'overshoot': self.overshoot,
            'records': self.records,
        }


def next_waypoint_spacing(vfov: float, standoff: float) -> float:
    """Vertical facade extent covered by one view: 2 * standoff * tan(vfov / 2)."""
    if standoff <= 0.0:
        raise ValueError(f"Standoff must be positive, got {standoff}")
    return 2.0 * standoff * math.tan(math.radians(vfov) / 2.0)


def band_adjusted_height(h_prev: float, h_i: float, f_new: int, f_cur: int, f_tar: int) -> Optional[float]:
    """
    Fine adjustment inside the band [h_prev, h_i].

    Returns h_i - (h_i - h_prev) / f_new * (f_cur - f_tar) once the running
    count has reached the target, or None to signal "ascend to the next
    waypoint". Raises DivisionUndefinedError when the band shows no floors.
    """
    if h_i <= h_prev:
        raise ValueError(f"Band top {h_i} must lie above band bottom {h_prev}")
    if f_new == 0:
        raise DivisionUndefinedError("No floors visible in the current band")
    if f_cur < f_tar:
        return None
    return h_i - (h_i - h_prev) / f_new * (f_cur - f_tar)


def fl_failed(h_final: float, h_tar_true: float, threshold: float = FL_FAIL_THRESHOLD) -> bool:
    return abs(h_final - h_tar_true) > threshold


def target_height(target_floor: int, floor_height: float) -> float:
    """Ground-truth hover height: the target floor's mid-height."""
    return (target_floor - 0.5) * floor_height


def proportional_height(height_est: float, target_floor: int, floors_total: int) -> float:
    """Direct Count estimate height_est * (F_tar - 0.5) / F_total, capped at the top floor's mid-height."""
    if floors_total < 1:
        raise DivisionUndefinedError("Direct count needs at least one floor")
    h = height_est * (target_floor - 0.5) / floors_total
    return min(h, height_est * (floors_total - 0.5) / floors_total)


def center_depth(depth: DepthImage) -> float:
    """Nearest of the four central pixels; at ground level the lower central rows point below z = 0."""
    rows = slice(depth.height // 2 - 1, depth.height // 2 + 1)
    cols = slice(depth.width // 2 - 1, depth.width // 2 + 1)
    return float(depth.data[rows, cols].min())


def visible_top(depth: DepthImage, rig: CameraRig, pose: DronePose) -> Optional[float]:
    """Height of the highest surface seen in the centre column, None when the column is empty."""
    column = depth.data[:, depth.width // 2]
    rows = [r for r in range(depth.height) if column[r] < depth.max_range]
    if not rows:
        return None
    row = rows[0]
    return pose.z + float(column[row]) * row_elevation(rig, row)


def _move_to_altitude(state: AscentState, world: WorldModel, altitude: float, safety_radius: float):
    altitude = max(0.0, altitude)
    action = Action(ActionKind.ASCEND, distance=abs(altitude - state.pose.z), altitude=altitude)
    state.pose = apply_action(world, state.pose, action, safety_radius)
    state.actions.append(action)


def _count_with_retries(state: AscentState, world: WorldModel, backend: PerceptionBackend,
                        noise: NoiseStream, max_refusals: int) -> FloorCountAnswer:
    refusals = 0
    while True:
        answer = backend.count_floors(world, state.pose, FRONT_CAMERA, noise)
        state.queries_used += 1
        if not answer.refused:
            return answer
        refusals += 1
        logger.warning(f"Floor count refused at z={state.pose.z:.2f} ({refusals}/{max_refusals})")
        if refusals >= max_refusals:
            raise FloorLocAbortError(
                f"{refusals} consecutive floor-count refusals at z={state.pose.z:.2f}",
                queries_used=state.queries_used,
            )


def _result(state: AscentState, method: str, overshoot: bool = False) -> FloorLocResult:
    return FloorLocResult(
        h_final=state.pose.z,
        bbox_buil=state.bbox_buil,
        queries_used=state.queries_used,
        pose=state.pose,
        method=method,
        overshoot=overshoot,
        actions=list(state.actions),
        records=list(state.records),
    )


def _acquire_box(state: AscentState, world: WorldModel, backend: PerceptionBackend, noise: NoiseStream):
    state.queries_used += 1
    try:
        state.bbox_buil = backend.locate_building(world, state.pose, FRONT_CAMERA, noise)
    except NoBuildingInViewError as e:
        logger.warning(f"No building box at the final height: {e}")
        state.bbox_buil = None
    state.records.append({'kind': 'bbox', 'pose': state.pose.to_dict(),
                          'bbox_buil': list(state.bbox_buil) if state.bbox_buil else None})


@contextmanager
def _keep_progress(state: AscentState):
    """Attach the executed actions to abort and collision errors."""
    try:
        yield
    except NoBuildingInViewError as e:
        raise FloorLocAbortError(str(e), queries_used=state.queries_used, actions=state.actions) from e
    except FloorLocAbortError as e:
        e.queries_used = state.queries_used
        e.actions = list(state.actions)
        raise
    except CollisionError as e:
        e.actions = list(state.actions)
        raise


def localize_floor(world: WorldModel, pose: DronePose, interpretation: RequestInterpretation,
                   backend: PerceptionBackend, noise: NoiseStream, rig: CameraRig,
                   max_refusals: int = 3, max_waypoints: int = 20,
                   safety_radius: float = 0.5) -> FloorLocResult:
    """
    Waypoint ascent with fine adjustment to the target floor.

    The drone hovers at the centre of each band so that the front camera spans
    exactly that band on the facade. Raises FloorLocAbortError on a refusal
    cascade and OvershootError (carrying the partial result) when the building
    top is passed before the target floor is reached.
    """
    state = AscentState(target_floor=interpretation.target_floor, pose=pose)
    with _keep_progress(state):
        return _waypoint_ascent(state, world, backend, noise, rig, max_refusals, max_waypoints, safety_radius)


def _waypoint_ascent(state: AscentState, world: WorldModel, backend: PerceptionBackend, noise: NoiseStream,
                     rig: CameraRig, max_refusals: int, max_waypoints: int,
                     safety_radius: float) -> FloorLocResult:
    pose = state.pose
    standoff = center_depth(render_depth(world, pose, FRONT_CAMERA, rig))
    if standoff >= rig.max_range:
        raise NoBuildingInViewError("Front camera sees no facade at the start pose")
    spacing = next_waypoint_spacing(rig.vfov, standoff)
    logger.info(f"Floor localization: F_tar={state.target_floor}, standoff {standoff:.2f} m, "
                f"waypoint spacing {spacing:.2f} m")

    low = 0.0
    last_with_floors = None
    for _ in range(max_waypoints):
        high = low + spacing
        _move_to_altitude(state, world, (low + high) / 2.0, safety_radius)
        state.waypoints_visited.append(high)

        top = visible_top(render_depth(world, state.pose, FRONT_CAMERA, rig), rig, state.pose)
        high_eff = top if top is not None and low < top < high else high

        answer = _count_with_retries(state, world, backend, noise, max_refusals)
        f_new = answer.floors_visible
        state.f_cur += f_new
        state.records.append({
            'kind': 'waypoint', 'altitude': state.pose.z, 'band': [low, high_eff],
            'floors_visible': f_new, 'f_cur': state.f_cur, 'queries_used': state.queries_used,
        })

        try:
            h_next = band_adjusted_height(low, high_eff, f_new, state.f_cur, state.target_floor)
        except DivisionUndefinedError:
            if last_with_floors is not None:
                logger.warning(f"Building top passed with F_cur={state.f_cur} < F_tar={state.target_floor}")
                _move_to_altitude(state, world, last_with_floors, safety_radius)
                _acquire_box(state, world, backend, noise)
                state.done = True
                result = _result(state, 'ours', overshoot=True)
                raise OvershootError(
                    f"Overshoot: only {state.f_cur} floors counted for target floor {state.target_floor}",
                    result=result,
                )
            logger.debug(f"No floors in band [{low:.1f}, {high:.1f}); ascending")
            low = high
            continue

        if h_next is None:
            last_with_floors = state.pose.z
            low = high
            continue

        # Hover half an estimated floor below the interpolated floor boundary
        h_next -= (high_eff - low) / f_new / 2.0
        logger.info(f"Fine adjustment: F_cur={state.f_cur}, F_new={f_new}, h_final={h_next:.2f} m")
        _move_to_altitude(state, world, h_next, safety_radius)
        state.records.append({'kind': 'adjust', 'altitude': state.pose.z})
        state.done = True
        break
    else:
        raise FloorLocAbortError(
            f"Target floor not reached within {max_waypoints} waypoints", queries_used=state.queries_used
        )

    _acquire_box(state, world, backend, noise)
    return _result(state, 'ours')


def direct_count_height(world: WorldModel, pose: DronePose, interpretation: RequestInterpretation,
                        backend: PerceptionBackend, noise: NoiseStream, rig: CameraRig,
                        max_retreats: int = 10, l_max: float = 10.0,
                        safety_radius: float = 0.5) -> FloorLocResult:
    """
    Direct Count baseline: one whole-building count, then proportional height.

    The drone rises to an altitude equal to its facade distance and backs away
    until the building box clears the image top and bottom, asks once for the
    total number of floors, flies back and takes
    height_est * (F_tar - 0.5) / F_total_est. A refusal fails the baseline.
    """
    state = AscentState(target_floor=interpretation.target_floor, pose=pose)
    with _keep_progress(state):
        return _direct_count(state, world, backend, noise, rig, max_retreats, l_max, safety_radius)


def _direct_count(state: AscentState, world: WorldModel, backend: PerceptionBackend, noise: NoiseStream,
                  rig: CameraRig, max_retreats: int, l_max: float, safety_radius: float) -> FloorLocResult:
    pose = state.pose
    heading = pose.yaw
    standoff = center_depth(render_depth(world, pose, FRONT_CAMERA, rig))
    if standoff >= rig.max_range:
        raise NoBuildingInViewError("Front camera sees no facade at the start pose")
    _move_to_altitude(state, world, standoff, safety_radius)

    retreated = 0.0
    for retreat in range(max_retreats + 1):
        state.queries_used += 1
        box = backend.locate_building(world, state.pose, FRONT_CAMERA, noise)
        if box[2] > 0 and box[3] < rig.height - 1:
            break
        if retreat == max_retreats:
            raise FloorLocAbortError(
                f"Building does not fit in view after {max_retreats} retreats", queries_used=state.queries_used
            )
        step = min(standoff, l_max)
        back = Action(ActionKind.TRANSLATE, bearing=heading + math.pi, distance=step)
        state.pose = apply_action(world, state.pose, back, safety_radius, l_max)
        state.actions.append(back)
        face = Action(ActionKind.APPROACH, bearing=heading, altitude=state.pose.z)
        state.pose = apply_action(world, state.pose, face, safety_radius, l_max)
        state.actions.append(face)
        retreated += step

    distance = center_depth(render_depth(world, state.pose, FRONT_CAMERA, rig))
    height_est = distance * (box[3] + 1 - box[2]) / rig.fy

    answer = backend.count_floors(world, state.pose, FRONT_CAMERA, noise)
    state.queries_used += 1
    if answer.refused or answer.floors_visible == 0:
        raise FloorLocAbortError("Direct count refused or saw no floors", queries_used=state.queries_used)
    f_total = answer.floors_visible
    h = proportional_height(height_est, state.target_floor, f_total)
    state.records.append({
        'kind': 'direct_count', 'distance': distance, 'box': list(box), 'height_est': height_est,
        'floors_total': f_total, 'h_est': h,
    })
    logger.info(f"Direct count: {f_total} floors over {height_est:.2f} m, h={h:.2f} m")

    _move_to_altitude(state, world, h, safety_radius)
    while retreated > 1e-9:
        step = min(retreated, l_max)
        forward = Action(ActionKind.TRANSLATE, bearing=heading, distance=step)
        state.pose = apply_action(world, state.pose, forward, safety_radius, l_max)
        state.actions.append(forward)
        retreated -= step

    state.done = True
    _acquire_box(state, world, backend, noise)
    return _result(state, 'direct-count')
