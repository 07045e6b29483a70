"""
VLD Navigation - Camera Module

Pinhole rendering for the five-camera rig: planar depth by vectorised ray
casting against extruded footprints, per-pixel building labels, projected
window features standing in for RGB content, and building silhouettes.
"""

import math
import logging
from typing import List, Optional, Tuple

import numpy as np

from vldnav.utils.error_handling import NotInViewError, PoseInsideGeometryError
from vldnav.world.geometry import inside_building, point_in_convex
from vldnav.world.types import (
    Building, CameraRig, DepthImage, DronePose, PixelBox, VisibleFeature, WorldModel
)

logger = logging.getLogger('vldnav.world.camera')

HIT_EPS = 1e-9
OCCLUSION_EPS = 1e-6
MIN_DEPTH = 1e-3
# Window sample grid used for occlusion (corners, edge midpoints, centre)
SAMPLE_GRID = [(a, b) for b in (-1.0, 0.0, 1.0) for a in (-1.0, 0.0, 1.0)]


def camera_basis(yaw: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forward, right and up unit vectors for a camera with the given world yaw."""
    forward = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    right = np.array([math.sin(yaw), -math.cos(yaw), 0.0])
    up = np.array([0.0, 0.0, 1.0])
    return forward, right, up


def pixel_offsets(rig: CameraRig) -> Tuple[np.ndarray, np.ndarray]:
    """Normalised image-plane offsets of every pixel centre (right, up)."""
    cols = (np.arange(rig.width) + 0.5 - rig.width / 2.0) / rig.fx
    rows = (rig.height / 2.0 - (np.arange(rig.height) + 0.5)) / rig.fy
    return cols, rows


def pixel_directions(rig: CameraRig, cam_yaw: float) -> np.ndarray:
    """(H, W, 3) ray directions whose forward component is 1, so hit t is planar depth."""
    forward, right, up = camera_basis(cam_yaw)
    cols, rows = pixel_offsets(rig)
    return (forward[None, None, :]
            + cols[None, :, None] * right[None, None, :]
            + rows[:, None, None] * up[None, None, :])


def cast_rays(world: WorldModel, origin, directions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    First hit of each ray against walls and roofs.

    Returns the hit parameter t (in units of each direction vector, inf on a
    miss) and the index of the building hit (-1 on a miss).
    """
    o = np.asarray(origin, dtype=float)
    d = np.asarray(directions, dtype=float).reshape(-1, 3)
    count = d.shape[0]
    t_best = np.full(count, np.inf)
    label = np.full(count, -1, dtype=int)

    edges = world.edge_table
    if edges['x0'].size:
        dx, dy, dz = d[:, 0:1], d[:, 1:2], d[:, 2:3]
        ex = edges['x1'] - edges['x0']
        ey = edges['y1'] - edges['y0']
        wx = edges['x0'] - o[0]
        wy = edges['y0'] - o[1]
        denom = dx * ey - dy * ex
        with np.errstate(divide='ignore', invalid='ignore'):
            t = (wx * ey - wy * ex) / denom
            s = (wx * dy - wy * dx) / denom
        z = o[2] + t * dz
        valid = ((np.abs(denom) > 1e-12) & (t > HIT_EPS) & (s >= 0.0) & (s <= 1.0)
                 & (z >= 0.0) & (z <= edges['height']))
        t = np.where(valid, t, np.inf)
        nearest = np.argmin(t, axis=1)
        t_min = t[np.arange(count), nearest]
        hit = np.isfinite(t_min)
        t_best[hit] = t_min[hit]
        label[hit] = edges['building'][nearest[hit]]

    for b_idx, building in enumerate(world.buildings):
        with np.errstate(divide='ignore', invalid='ignore'):
            t_roof = (building.height - o[2]) / d[:, 2]
        candidate = (d[:, 2] != 0.0) & (t_roof > HIT_EPS) & (t_roof < t_best)
        if not candidate.any():
            continue
        px = o[0] + t_roof * d[:, 0]
        py = o[1] + t_roof * d[:, 1]
        on_roof = candidate & point_in_convex(building.vertices, px, py)
        t_best[on_roof] = t_roof[on_roof]
        label[on_roof] = b_idx

    return t_best, label


def check_pose(world: WorldModel, pose: DronePose):
    for building in world.buildings:
        if inside_building(building, pose.x, pose.y, pose.z):
            raise PoseInsideGeometryError(
                f"Camera origin ({pose.x:.3f}, {pose.y:.3f}, {pose.z:.3f}) is inside building {building.id}"
            )


def _cast_view(world: WorldModel, pose: DronePose, cam: int, rig: CameraRig) -> Tuple[np.ndarray, np.ndarray]:
    check_pose(world, pose)
    directions = pixel_directions(rig, rig.camera_yaw(pose, cam))
    t, label = cast_rays(world, pose.position, directions)
    t = t.reshape(rig.height, rig.width)
    label = label.reshape(rig.height, rig.width)
    label[t > rig.max_range] = -1
    return t, label


def render_depth(world: WorldModel, pose: DronePose, cam: int, rig: CameraRig) -> DepthImage:
    """Planar depth image of camera `cam`; no-hit pixels equal max_range."""
    t, _ = _cast_view(world, pose, cam, rig)
    data = np.where(t <= rig.max_range, t, rig.max_range)
    data.setflags(write=False)
    return DepthImage(data=data, max_range=rig.max_range)


def pixel_range(depth: DepthImage, rig: CameraRig, column: int, row: int) -> float:
    """Distance along the ray of pixel (column, row) to the surface it sees; planar depth times the ray length."""
    a = (column + 0.5 - rig.width / 2.0) / rig.fx
    b = (rig.height / 2.0 - (row + 0.5)) / rig.fy
    return depth.at(column, row) * math.sqrt(1.0 + a * a + b * b)


def render_labels(world: WorldModel, pose: DronePose, cam: int, rig: CameraRig) -> np.ndarray:
    """Per-pixel index of the building seen first, -1 for sky."""
    _, label = _cast_view(world, pose, cam, rig)
    return label


def project_points(rig: CameraRig, pose: DronePose, cam: int, points: np.ndarray):
    """Continuous pixel coordinates (u right, v down) and planar depth of 3D points."""
    forward, right, _ = camera_basis(rig.camera_yaw(pose, cam))
    rel = np.asarray(points, dtype=float).reshape(-1, 3) - np.asarray(pose.position)
    depth = rel @ forward
    lateral = rel @ right
    safe = np.maximum(depth, MIN_DEPTH)
    u = rig.width / 2.0 + rig.fx * lateral / safe
    v = rig.height / 2.0 - rig.fy * rel[:, 2] / safe
    return u, v, depth


def round_box(rig: CameraRig, u_min: float, u_max: float, v_min: float, v_max: float) -> PixelBox:
    """Floor for minimum coordinates, ceil - 1 for maximum, clamped, never degenerate."""
    x_min = max(0, min(rig.width - 1, math.floor(u_min)))
    x_max = max(0, min(rig.width - 1, math.ceil(u_max) - 1))
    y_min = max(0, min(rig.height - 1, math.floor(v_min)))
    y_max = max(0, min(rig.height - 1, math.ceil(v_max) - 1))
    x_min, x_max = _widen(x_min, x_max, rig.width)
    y_min, y_max = _widen(y_min, y_max, rig.height)
    return x_min, x_max, y_min, y_max


def _widen(lo: int, hi: int, size: int) -> Tuple[int, int]:
    if hi > lo:
        return lo, hi
    if lo < size - 1:
        return lo, lo + 1
    return hi - 1, hi


def visible_features(world: WorldModel, pose: DronePose, cam: int, rig: CameraRig) -> List[VisibleFeature]:
    """Windows whose centre projects into the view and that are not fully occluded, sorted by id."""
    check_pose(world, pose)
    table = world.window_table
    if not table['ids']:
        return []

    centers = table['centers']
    u, v, depth = project_points(rig, pose, cam, centers)
    offsets = np.column_stack([pose.x - centers[:, 0], pose.y - centers[:, 1]])
    along_normal = (offsets * table['normals'][:, :2]).sum(axis=1)
    facing = along_normal > HIT_EPS
    ranges = np.maximum(np.hypot(offsets[:, 0], offsets[:, 1]), HIT_EPS)
    view_angles = np.degrees(np.arccos(np.clip(along_normal / ranges, -1.0, 1.0)))
    in_view = ((depth > MIN_DEPTH) & (depth <= rig.max_range) & facing
               & (u >= 0.0) & (u < rig.width) & (v >= 0.0) & (v < rig.height))
    candidates = np.flatnonzero(in_view)
    if candidates.size == 0:
        return []

    half_w = table['extents'][candidates, 0] / 2.0
    half_h = table['extents'][candidates, 1] / 2.0
    tangents = table['tangents'][candidates]
    samples = []
    for a, b in SAMPLE_GRID:
        offset = np.column_stack([a * half_w * tangents[:, 0], a * half_w * tangents[:, 1], b * half_h])
        samples.append(centers[candidates] + offset)
    samples = np.stack(samples, axis=1)  # (K, 9, 3)

    directions = samples.reshape(-1, 3) - np.asarray(pose.position)
    t_hit, _ = cast_rays(world, pose.position, directions)
    occluded = (t_hit < 1.0 - OCCLUSION_EPS).reshape(len(candidates), len(SAMPLE_GRID))
    fractions = occluded.mean(axis=1)

    corner_index = [i for i, (a, b) in enumerate(SAMPLE_GRID) if a != 0.0 and b != 0.0]
    features = []
    for k, w_idx in enumerate(candidates):
        if fractions[k] >= 1.0:
            continue
        cu, cv, _ = project_points(rig, pose, cam, samples[k, corner_index])
        box = round_box(rig, float(cu.min()), float(cu.max()), float(cv.min()), float(cv.max()))
        window = world.window(table['ids'][w_idx])
        building = world.buildings[int(table['building'][w_idx])]
        features.append(VisibleFeature(
            window_id=window.id,
            pixel_box=box,
            floor=window.floor,
            decorations=window.decorations,
            occluded_fraction=float(fractions[k]),
            building_id=building.id,
            view_angle=float(view_angles[w_idx]),
        ))
    features.sort(key=lambda f: f.window_id)
    return features


def building_pixel_box(world: WorldModel, pose: DronePose, cam: int, building: Building,
                       rig: CameraRig) -> PixelBox:
    """Tight box of the building's visible silhouette, clamped to the image."""
    labels = render_labels(world, pose, cam, rig)
    mask = labels == world.building_index(building.id)
    if not mask.any():
        raise NotInViewError(f"Building {building.id} is not in view of camera {cam}")
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    x_min, x_max = _widen(int(cols[0]), int(cols[-1]), rig.width)
    y_min, y_max = _widen(int(rows[0]), int(rows[-1]), rig.height)
    return x_min, x_max, y_min, y_max


def dominant_building(world: WorldModel, pose: DronePose, cam: int, rig: CameraRig) -> Optional[int]:
    """Index of the building covering most pixels of a view, None for an empty view."""
    labels = render_labels(world, pose, cam, rig)
    hits = labels[labels >= 0]
    if hits.size == 0:
        return None
    counts = np.bincount(hits, minlength=len(world.buildings))
    return int(np.argmax(counts))


def column_bearing(rig: CameraRig, pose: DronePose, cam: int, column: float) -> float:
    """World bearing of the ray through the centre of pixel column `column`."""
    offset = (column + 0.5 - rig.width / 2.0) / rig.fx
    return rig.camera_yaw(pose, cam) - math.atan(offset)


def row_elevation(rig: CameraRig, row: float) -> float:
    """Vertical image-plane offset of a pixel row centre (up per unit forward)."""
    return (rig.height / 2.0 - (row + 0.5)) / rig.fy


def axis_distance(building: Building, x: float, y: float, yaw: float) -> Optional[float]:
    """Planar distance along a horizontal ray to the footprint, None on a miss."""
    dx, dy = math.cos(yaw), math.sin(yaw)
    best = None
    for index in range(building.num_facades):
        (x0, y0), (x1, y1) = building.facade(index)
        ex, ey = x1 - x0, y1 - y0
        denom = dx * ey - dy * ex
        if abs(denom) < 1e-12:
            continue
        wx, wy = x0 - x, y0 - y
        t = (wx * ey - wy * ex) / denom
        s = (wx * dy - wy * dx) / denom
        if t > HIT_EPS and 0.0 <= s <= 1.0 and (best is None or t < best):
            best = t
    return best
