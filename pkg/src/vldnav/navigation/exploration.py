"""
VLD Navigation - Exploration Module

Depth-discontinuity viewpoint selection and step-wise action choice for
circling a building clockwise until the target window is recognised, plus the
approach manoeuvre toward a recognised window.

Pipeline per step: crop every view's depth to the building rows, average it
into vertical slices, find the best left/right split of each slice profile,
pick the view whose split lies furthest right, mark five points across that
view and let the choice role pick one.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from vldnav.perception.base import PerceptionBackend
from vldnav.perception.memory import ExplorationMemory
from vldnav.perception.noise import NoiseStream
from vldnav.perception.types import ChoiceAnswer, MarkedView, RecognitionAnswer
from vldnav.utils.error_handling import EmptyCropError
from vldnav.world.types import (
    CAMERA_INDICES, RIGHT_CAMERA, Action, ActionKind, CameraRig, DepthImage, DronePose,
    PixelBox, wrap_angle
)

logger = logging.getLogger('vldnav.navigation.exploration')

COMPARE_TOL = 1e-9
STOP_MARGIN = 0.1
NUM_MARKS = 5
LINE_SPAN = 8       # columns searched beyond the window box for the wall line
LINE_TOL = 1e-3     # wall-line support distance (m)
VIEWPOINT_STRATEGIES = ('ours', 'random', 'default')


@dataclass(frozen=True)
class SliceProfile:
    view: int
    means: Tuple[float, ...]

    @property
    def x(self) -> int:
        return len(self.means)


@dataclass(frozen=True)
class SplitResult:
    j_star: Optional[int] = None
    objective: Optional[float] = None

    @property
    def valid(self) -> bool:
        return self.j_star is not None

    def to_dict(self):
        return {'j_star': self.j_star, 'objective': self.objective}


@dataclass
class ViewpointChoice:
    """Outcome of viewpoint selection for one step."""
    view: int
    split: SplitResult
    d_max: float
    escalations: int = 0
    strategy: str = 'ours'
    fallback: bool = False
    splits: Dict[int, SplitResult] = field(default_factory=dict)

    def to_dict(self):
        return {
            'view': self.view,
            'split': self.split.to_dict(),
            'd_max': self.d_max,
            'escalations': self.escalations,
            'strategy': self.strategy,
            'fallback': self.fallback,
            'splits': {str(v): s.to_dict() for v, s in sorted(self.splits.items())},
        }


def crop_depth(depth: DepthImage, bbox: PixelBox) -> DepthImage:
    """Keep rows y_min..y_max (inclusive) of the building box, all columns."""
    _, _, y_min, y_max = bbox
    if not (0 <= y_min < depth.height and 0 <= y_max < depth.height):
        raise ValueError(f"Crop rows {y_min}..{y_max} outside a {depth.height}-row image")
    if y_min >= y_max:
        raise EmptyCropError(f"Crop rows {y_min}..{y_max} leave no usable image")
    return DepthImage(data=depth.data[y_min:y_max + 1, :], max_range=depth.max_range)


def slice_groups(width: int, x: int) -> List[Tuple[int, int]]:
    """Column ranges [start, stop) of x contiguous groups; the leftmost groups take the extra columns."""
    if width < x:
        raise ValueError(f"Image width {width} is smaller than the slice count {x}")
    base, extra = divmod(width, x)
    groups, start = [], 0
    for k in range(x):
        stop = start + base + (1 if k < extra else 0)
        groups.append((start, stop))
        start = stop
    return groups


def slice_means(depth: DepthImage, x: int = 20, view: int = 1) -> SliceProfile:
    data = depth.data
    means = tuple(float(data[:, start:stop].mean()) for start, stop in slice_groups(depth.width, x))
    return SliceProfile(view=view, means=means)


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _pvariance(values: Sequence[float]) -> float:
    m = _mean(values)
    return sum((v - m) ** 2 for v in values) / len(values)


def overflow_allowance(overflow_fraction: float, right_count: int) -> int:
    return math.ceil(overflow_fraction * right_count - COMPARE_TOL)


def find_split(profile: SliceProfile, delta: float, d_max: float, overflow_fraction: float = 0.2) -> SplitResult:
    """
    Best discontinuity split of a slice profile.

    A split after slice j is valid when the left partition is at least `delta`
    deeper on average than the right and few right slices exceed `d_max`.
    Among valid splits the one with the smallest summed population variance
    wins; ties go to the smallest j.
    """
    means = list(profile.means)
    x = len(means)
    if x < 2:
        raise ValueError("A slice profile needs at least two slices")
    best_j, best_obj = None, None
    for j in range(1, x):
        left, right = means[:j], means[j:]
        if _mean(left) - _mean(right) < delta - COMPARE_TOL:
            continue
        if sum(1 for m in right if m > d_max) > overflow_allowance(overflow_fraction, x - j):
            continue
        objective = _pvariance(left) + _pvariance(right)
        if best_obj is None or objective < best_obj - COMPARE_TOL:
            best_j, best_obj = j, objective
    return SplitResult(j_star=best_j, objective=best_obj)


def select_viewpoint(profiles: Dict[int, SliceProfile], delta: float = 5.0, d_max: float = 40.0,
                     overflow_fraction: float = 0.2, max_escalations: int = 2,
                     strategy: str = 'ours', rng: Optional[np.random.Generator] = None) -> ViewpointChoice:
    """
    View whose valid split lies furthest right (largest j*).

    Ties follow the rig order. With no valid split anywhere d_max is doubled up
    to max_escalations times before falling back to the right-facing view.
    The 'random' and 'default' strategies replace the choice with a uniformly
    drawn view or the right-facing view respectively.
    """
    if strategy not in VIEWPOINT_STRATEGIES:
        raise ValueError(f"Unknown viewpoint strategy: {strategy}")
    views = [v for v in CAMERA_INDICES if v in profiles]

    if strategy != 'ours':
        if strategy == 'random':
            if rng is None:
                raise ValueError("The random viewpoint strategy needs a random generator")
            view = views[int(rng.integers(len(views)))]
        else:
            view = RIGHT_CAMERA
        split = find_split(profiles[view], delta, d_max, overflow_fraction) if view in profiles else SplitResult()
        return ViewpointChoice(view, split, d_max, strategy=strategy, splits={view: split})

    for escalation in range(max_escalations + 1):
        limit = d_max * (2 ** escalation)
        splits = {v: find_split(profiles[v], delta, limit, overflow_fraction) for v in views}
        best_view = None
        for v in views:
            if splits[v].valid and (best_view is None or splits[v].j_star > splits[best_view].j_star):
                best_view = v
        if best_view is not None:
            if escalation:
                logger.debug(f"Valid split found after {escalation} d_max escalation(s) ({limit:.0f} m)")
            return ViewpointChoice(best_view, splits[best_view], limit, escalation, splits=splits)

    logger.debug("No valid split in any view; defaulting to the right-facing camera")
    return ViewpointChoice(RIGHT_CAMERA, SplitResult(), limit, max_escalations, fallback=True, splits=splits)


def mark_points(width: int, height: Optional[int] = None) -> Tuple[Tuple[int, ...], int]:
    """Columns round(width * k / 6) for k = 1..5 and the centre row."""
    if width < NUM_MARKS:
        raise ValueError(f"Image width {width} is too small for {NUM_MARKS} marks")
    columns = tuple(int(math.floor(width * k / 6.0 + 0.5)) for k in range(1, NUM_MARKS + 1))
    row = (height if height is not None else width) // 2
    return columns, row


def mark_bearings(rig: CameraRig, pose: DronePose, cam: int) -> Tuple[float, ...]:
    """World bearings through the continuous mark positions width * k / 6."""
    cam_yaw = rig.camera_yaw(pose, cam)
    return tuple(
        wrap_angle(cam_yaw - math.atan((rig.width * k / 6.0 - rig.width / 2.0) / rig.fx))
        for k in range(1, NUM_MARKS + 1)
    )


def safe_distance(depth: DepthImage, column: int, row: int, l_max: float = 10.0,
                  safety_radius: float = 0.5) -> float:
    """min(depth at the point minus the safety radius, floored at 0, and L_max)."""
    return min(max(depth.at(column, row) - safety_radius, 0.0), l_max)


def build_marked_view(depth: DepthImage, rig: CameraRig, pose: DronePose, cam: int,
                      split: SplitResult) -> MarkedView:
    columns, row = mark_points(depth.width, depth.height)
    return MarkedView(
        cam=cam, pose=pose, depth=depth, row=row, columns=columns,
        bearings=mark_bearings(rig, pose, cam), split_column=split.j_star,
    )


def decide_action(backend: PerceptionBackend, view: MarkedView, distances: Sequence[float],
                  memory: ExplorationMemory, noise: NoiseStream,
                  deadlock_threshold: float = 1.0) -> Tuple[Action, ChoiceAnswer]:
    """Translate toward the chosen mark, or rotate 30 degrees left on a deadlock or refusal."""
    answer = backend.choose_direction(view, distances, memory, noise)
    if answer.refused:
        logger.warning("Choice refused; rotating left")
        return Action.rotate_left(), answer
    distance = distances[answer.point_index - 1]
    if distance < deadlock_threshold:
        logger.debug(f"Point {answer.point_index} offers {distance:.2f} m; deadlock rotation")
        return Action.rotate_left(), answer
    bearing = view.bearings[answer.point_index - 1]
    return Action(ActionKind.TRANSLATE, bearing=bearing, distance=distance), answer


def pixel_points(depth: DepthImage, rig: CameraRig, pose: DronePose, cam: int,
                 columns: np.ndarray, row: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Horizontal world positions of the surface seen at (column, row).

    Depth is planar, so a pixel at normalised offset a right of the axis lies
    at pose + d * (forward + a * right). Pixels at the no-hit sentinel are
    dropped; the second array holds the columns that were kept.
    """
    columns = np.asarray(columns, dtype=int)
    d = depth.data[row, columns]
    keep = d < depth.max_range
    columns, d = columns[keep], d[keep]
    yaw = rig.camera_yaw(pose, cam)
    a = (columns + 0.5 - depth.width / 2.0) / rig.fx
    xs = pose.x + d * (math.cos(yaw) + a * math.sin(yaw))
    ys = pose.y + d * (math.sin(yaw) - a * math.cos(yaw))
    return np.column_stack([xs, ys]), columns


def obstacle_points(depths: Dict[int, DepthImage], rig: CameraRig, pose: DronePose) -> np.ndarray:
    """Surface points on the two centre rows of every view, as an (N, 2) array."""
    chunks = []
    for cam in CAMERA_INDICES:
        depth = depths.get(cam)
        if depth is None:
            continue
        columns = np.arange(depth.width)
        for row in (depth.height // 2 - 1, depth.height // 2):
            points, _ = pixel_points(depth, rig, pose, cam, columns, row)
            chunks.append(points)
    return np.concatenate(chunks) if chunks else np.zeros((0, 2))


def corridor_distance(points: np.ndarray, origin: Tuple[float, float], bearing: float,
                      limit: float, clearance: float) -> float:
    """
    Longest move along `bearing`, up to `limit`, that keeps every obstacle
    point at least `clearance` away from the drone's path.
    """
    if len(points) == 0:
        return limit
    ux, uy = math.cos(bearing), math.sin(bearing)
    rel = points - np.asarray(origin, dtype=float)
    along = rel[:, 0] * ux + rel[:, 1] * uy
    perp = np.abs(rel[:, 0] * uy - rel[:, 1] * ux)
    ahead = (perp < clearance) & (along > 0.0)
    if not ahead.any():
        return limit
    if (np.hypot(rel[ahead, 0], rel[ahead, 1]) < clearance).any():
        return 0.0
    entry = along[ahead] - np.sqrt(clearance ** 2 - perp[ahead] ** 2)
    return max(0.0, min(limit, float(entry.min())))


@dataclass(frozen=True)
class FacadeLine:
    """A wall line through `point` with unit direction `direction`."""
    point: Tuple[float, float]
    direction: Tuple[float, float]
    support: int

    def normal_towards(self, x: float, y: float) -> Tuple[float, float]:
        nx, ny = self.direction[1], -self.direction[0]
        if nx * (x - self.point[0]) + ny * (y - self.point[1]) < 0.0:
            nx, ny = -nx, -ny
        return nx, ny


def facade_line(depth: DepthImage, rig: CameraRig, pose: DronePose, cam: int, pixel_box: PixelBox,
                row: int, span: int = LINE_SPAN, tolerance: float = LINE_TOL) -> Optional[FacadeLine]:
    """
    Wall line under a recognised window, fitted on one image row.

    Every pair of surface points in the box columns widened by `span` is a
    candidate; a candidate scores the points within `tolerance` of it and
    must be supported by at least one point inside the box. Most support
    wins, then the longest supported extent.
    """
    x0, x1 = pixel_box[0], pixel_box[1]
    columns = np.arange(max(0, x0 - span), min(depth.width - 1, x1 + span) + 1)
    points, columns = pixel_points(depth, rig, pose, cam, columns, row)
    n = len(points)
    if n < 2:
        return None
    i, j = np.triu_indices(n, k=1)
    delta = points[j] - points[i]
    length = np.hypot(delta[:, 0], delta[:, 1])
    usable = length > 1e-6
    i, j, delta, length = i[usable], j[usable], delta[usable], length[usable]
    if len(i) == 0:
        return None
    unit = delta / length[:, None]

    # (pairs, points) distance of every point from every candidate line
    rel_x = points[None, :, 0] - points[i, 0][:, None]
    rel_y = points[None, :, 1] - points[i, 1][:, None]
    offset = np.abs(rel_x * unit[:, 1][:, None] - rel_y * unit[:, 0][:, None])
    supported = offset <= tolerance
    in_box = (columns >= x0) & (columns <= x1)
    valid = (supported & in_box[None, :]).any(axis=1)
    if not valid.any():
        return None

    support = supported.sum(axis=1)
    first = np.argmax(supported, axis=1)
    last = n - 1 - np.argmax(supported[:, ::-1], axis=1)
    extent = np.hypot(points[last, 0] - points[first, 0], points[last, 1] - points[first, 1])

    support = np.where(valid, support, -1)
    best_support = support.max()
    extent = np.where(support == best_support, extent, -1.0)
    best = int(np.flatnonzero(extent >= extent.max() - COMPARE_TOL)[0])
    return FacadeLine(
        point=(float(points[i[best], 0]), float(points[i[best], 1])),
        direction=(float(unit[best, 0]), float(unit[best, 1])),
        support=int(best_support),
    )


def approach_target(answer: RecognitionAnswer, depth: DepthImage, pose: DronePose, rig: CameraRig,
                    standoff: float = 1.5, l_max: float = 10.0, align_tolerance_deg: float = 2.0,
                    align_tolerance_m: float = 0.3, replan_distance: float = 20.0) -> List[Action]:
    """
    Plan toward a recognised window seen in `answer.view`.

    A misaligned drone first turns and climbs so the window sits on the front
    camera axis (one approach action, re-recognised on the next step). An
    aligned drone fits the wall line under the window and flies to the
    standoff point on the wall normal: out along the normal first when it is
    closer to the wall plane than the standoff, then in legs bounded by
    L_max, then it turns to face the window and stops. A standoff point
    further than `replan_distance` gets a single L_max leg and no stop, so
    the window is re-recognised from closer.
    """
    if not answer.found:
        raise ValueError("approach_target needs a positive recognition")
    x0, x1, y0, y1 = answer.pixel_box
    u_c = (x0 + x1 + 1) / 2.0
    v_c = (y0 + y1 + 1) / 2.0
    a = (u_c - depth.width / 2.0) / rig.fx
    b = (depth.height / 2.0 - v_c) / rig.fy
    row = min(int(v_c), depth.height - 1)
    d = depth.at(min(int(u_c), depth.width - 1), row)

    bearing = wrap_angle(rig.camera_yaw(pose, answer.view) - math.atan(a))
    altitude = max(0.0, pose.z + d * b)
    yaw_error = abs(wrap_angle(bearing - pose.yaw))
    if yaw_error > math.radians(align_tolerance_deg) or abs(altitude - pose.z) > align_tolerance_m:
        return [Action(ActionKind.APPROACH, bearing=bearing, altitude=altitude)]

    horizontal = d * math.sqrt(1.0 + a * a)
    if horizontal <= standoff + STOP_MARGIN:
        return [Action.stop()]

    ux, uy = math.cos(bearing), math.sin(bearing)
    wx, wy = pose.x + horizontal * ux, pose.y + horizontal * uy
    nx, ny = -ux, -uy
    line = facade_line(depth, rig, pose, answer.view, answer.pixel_box, row)
    if line is not None:
        nx, ny = line.normal_towards(pose.x, pose.y)
        facing = ux * nx + uy * ny
        if abs(facing) > 1e-6:
            t = ((line.point[0] - pose.x) * nx + (line.point[1] - pose.y) * ny) / facing
            if t > 0.0:
                wx, wy = pose.x + t * ux, pose.y + t * uy
    else:
        logger.debug("No wall line under the window; approaching along the line of sight")

    actions = []
    px, py = pose.x, pose.y
    height = nx * (px - wx) + ny * (py - wy)
    if height < standoff:
        out = standoff - height
        actions.append(Action(ActionKind.TRANSLATE, bearing=math.atan2(ny, nx), distance=out))
        px, py = px + out * nx, py + out * ny

    sx, sy = wx + standoff * nx, wy + standoff * ny
    remaining = math.hypot(sx - px, sy - py)
    leg_bearing = math.atan2(sy - py, sx - px)
    if remaining > replan_distance:
        actions.append(Action(ActionKind.TRANSLATE, bearing=leg_bearing, distance=min(l_max, remaining)))
        return actions
    while remaining > COMPARE_TOL:
        step = min(l_max, remaining)
        actions.append(Action(ActionKind.TRANSLATE, bearing=leg_bearing, distance=step))
        remaining -= step

    face = math.atan2(-ny, -nx)
    if abs(wrap_angle(face - leg_bearing)) > COMPARE_TOL:
        actions.append(Action(ActionKind.APPROACH, bearing=face, altitude=altitude))
    actions.append(Action.stop())
    return actions
