"""
VLD Navigation - Geometry Module

Planar helpers over building footprints: shapely polygons, convexity and
overlap audits, clearance of straight motions, and the vertex-path
shortest distance around a footprint.
"""

import math
import heapq
from typing import List, Sequence, Tuple

import numpy as np
from shapely.geometry import LineString, Point, Polygon

from vldnav.world.types import Building, WorldModel

Point2 = Tuple[float, float]

EPS = 1e-9


def footprint_polygon(building: Building) -> Polygon:
    return Polygon(building.footprint)


def signed_area(vertices: Sequence[Point2]) -> float:
    area = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        area += x0 * y1 - x1 * y0
    return 0.5 * area


def is_convex_ccw(vertices: Sequence[Point2]) -> bool:
    """True for a simple, strictly convex, counterclockwise polygon."""
    n = len(vertices)
    if n < 3 or signed_area(vertices) <= 0.0:
        return False
    for i in range(n):
        ax, ay = vertices[i]
        bx, by = vertices[(i + 1) % n]
        cx, cy = vertices[(i + 2) % n]
        if (bx - ax) * (cy - by) - (by - ay) * (cx - bx) <= 0.0:
            return False
    return Polygon(vertices).is_valid


def point_in_convex(vertices: np.ndarray, px: np.ndarray, py: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Vectorised closed point-in-polygon test for a CCW convex polygon."""
    inside = np.ones(np.shape(px), dtype=bool)
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        cross = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
        inside &= cross >= -tol
    return inside


def inside_building(building: Building, x: float, y: float, z: float) -> bool:
    """Strictly inside the extruded footprint."""
    return 0.0 <= z < building.height and footprint_polygon(building).contains(Point(x, y))


def footprints_overlap(a: Building, b: Building, gap: float = 0.0) -> bool:
    pa, pb = footprint_polygon(a), footprint_polygon(b)
    return pa.intersects(pb) or pa.distance(pb) < gap


def _vertical_overlap(building: Building, z: float, safety: float) -> bool:
    return z < building.height + safety


def segment_clearance(world: WorldModel, start: Point2, end: Point2, z: float, safety: float) -> float:
    """Smallest planar distance from the segment to any building the drone cannot overfly."""
    if tuple(start) == tuple(end):
        geometry = Point(start)
    else:
        geometry = LineString([start, end])
    clearance = math.inf
    for building in world.buildings:
        if not _vertical_overlap(building, z, safety):
            continue
        clearance = min(clearance, footprint_polygon(building).distance(geometry))
    return clearance


def vertical_clearance(world: WorldModel, x: float, y: float, z_from: float, z_to: float, safety: float) -> float:
    """Planar distance to buildings whose height range meets the vertical move."""
    z_low = min(z_from, z_to)
    clearance = math.inf
    point = Point(x, y)
    for building in world.buildings:
        if z_low >= building.height + safety:
            continue
        clearance = min(clearance, footprint_polygon(building).distance(point))
    return clearance


def _segment_visible(polygon: Polygon, a: Point2, b: Point2) -> bool:
    """A straight leg is usable when it never enters the polygon interior."""
    if a == b:
        return True
    return LineString([a, b]).relate_pattern(polygon, 'F********')


def vertex_path_length(start: Point2, goal: Point2, vertices: Sequence[Point2]) -> float:
    """
    Shortest planar path from start to goal along straight legs through the
    footprint vertices (a visibility graph solved with Dijkstra).
    """
    polygon = Polygon(vertices)
    nodes: List[Point2] = [tuple(start), tuple(goal)] + [tuple(v) for v in vertices]
    count = len(nodes)

    adjacency: List[List[Tuple[int, float]]] = [[] for _ in range(count)]
    for i in range(count):
        for j in range(i + 1, count):
            if _segment_visible(polygon, nodes[i], nodes[j]):
                length = math.dist(nodes[i], nodes[j])
                adjacency[i].append((j, length))
                adjacency[j].append((i, length))

    distances = [math.inf] * count
    distances[0] = 0.0
    queue = [(0.0, 0)]
    while queue:
        dist, node = heapq.heappop(queue)
        if dist > distances[node]:
            continue
        if node == 1:
            return dist
        for neighbour, length in adjacency[node]:
            candidate = dist + length
            if candidate < distances[neighbour]:
                distances[neighbour] = candidate
                heapq.heappush(queue, (candidate, neighbour))
    return distances[1]


def angle_about(center: Point2, point: Point2) -> float:
    return math.atan2(point[1] - center[1], point[0] - center[0])


def nearest_facade(building: Building, x: float, y: float) -> int:
    """Index of the facade edge closest to a planar point."""
    best, best_distance = 0, math.inf
    point = Point(x, y)
    for index in range(building.num_facades):
        distance = LineString(building.facade(index)).distance(point)
        if distance < best_distance - EPS:
            best, best_distance = index, distance
    return best


def facing_facade(building: Building, x: float, y: float, yaw: float) -> int:
    """Facade hit first by the horizontal heading ray, nearest facade when the ray misses."""
    dx, dy = math.cos(yaw), math.sin(yaw)
    best, best_t = None, math.inf
    for index in range(building.num_facades):
        (x0, y0), (x1, y1) = building.facade(index)
        ex, ey = x1 - x0, y1 - y0
        denom = dx * ey - dy * ex
        if abs(denom) < EPS:
            continue
        wx, wy = x0 - x, y0 - y
        t = (wx * ey - wy * ex) / denom
        s = (wx * dy - wy * dx) / denom
        if t > EPS and -EPS <= s <= 1.0 + EPS and t < best_t:
            best, best_t = index, t
    return nearest_facade(building, x, y) if best is None else best
