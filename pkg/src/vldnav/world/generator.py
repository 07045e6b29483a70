"""
VLD Navigation - World Generator Module

Procedural building worlds: convex extruded footprints with uniform floors,
window grids on every facade and distinctive objects at a subset of windows,
plus the versioned world file format and a post-generation audit.
"""

import json
import math
import logging
from dataclasses import dataclass, asdict, fields
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from shapely.geometry import Polygon

from vldnav.utils.common import DEFAULT_CONFIG, dumps_canonical
from vldnav.utils.error_handling import (
    GenerationInfeasibleError, SchemaError, atomic_write
)
from vldnav.world.geometry import footprint_polygon, is_convex_ccw
from vldnav.world.types import (
    Building, BuildingType, ObjectCategory, ObjectColor, ObjectTag, Window, WorldModel
)

logger = logging.getLogger('vldnav.world.generator')

WORLD_SCHEMA = "vld-world/1"
PLANE_TOLERANCE = 1e-9

OBJECT_CATALOG = {
    ObjectCategory.TOOL.value: ["watering can", "toolbox", "ladder"],
    ObjectCategory.CONTAINER.value: ["flower pot", "basket", "bucket"],
    ObjectCategory.HOUSEHOLD.value: ["lamp", "clock", "umbrella"],
    ObjectCategory.FOOD.value: ["pumpkin", "pineapple", "watermelon"],
    ObjectCategory.FURNITURE.value: ["chair", "stool", "bookshelf"],
    ObjectCategory.POSTER.value: ["movie poster", "map poster", "flag"],
    ObjectCategory.TOY.value: ["teddy bear", "toy robot", "rubber duck"],
    ObjectCategory.ORNAMENT.value: ["wind chime", "vase", "star lantern"],
}


@dataclass
class WorldGenParams:
    num_buildings: int = 1
    vertices: Tuple[int, int] = (4, 8)
    radius: Tuple[float, float] = (11.0, 16.0)
    floors: Tuple[int, int] = (3, 10)
    floor_height: Tuple[float, float] = (2.8, 3.6)
    window_spacing: float = 3.0
    window_width: float = 1.2
    window_height: float = 1.4
    facade_margin: float = 1.5
    min_facade_length: float = 6.0
    windows_per_facade: int = 8
    decoration_density: float = 0.12
    min_gap: float = 40.0
    bounds_margin: float = 60.0
    max_attempts: int = 200

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key in ('vertices', 'radius', 'floors', 'floor_height'):
            data[key] = list(data[key])
        return data

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]] = None) -> 'WorldGenParams':
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                continue
            if key in ('vertices', 'radius', 'floors', 'floor_height'):
                value = tuple(value)
            kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> 'WorldGenParams':
        return cls.from_dict(config.get('world', DEFAULT_CONFIG['world']))

    def validate(self):
        problems = []
        if self.num_buildings < 1:
            problems.append("num_buildings must be at least 1")
        if not 3 <= self.vertices[0] <= self.vertices[1] <= 8:
            problems.append("vertices must satisfy 3 <= min <= max <= 8")
        if not 0.0 < self.radius[0] <= self.radius[1]:
            problems.append("radius range must be positive and ordered")
        if not 1 <= self.floors[0] <= self.floors[1]:
            problems.append("floors range must satisfy 1 <= min <= max")
        if not 0.0 < self.floor_height[0] <= self.floor_height[1]:
            problems.append("floor_height range must be positive and ordered")
        if self.window_height >= self.floor_height[0]:
            problems.append("window_height must be smaller than the floor height")
        if not 0.0 <= self.decoration_density <= 1.0:
            problems.append("decoration_density must lie in [0, 1]")
        if self.window_spacing < self.window_width:
            problems.append("window_spacing must be at least window_width")
        # Longest achievable facade on a circle of the largest radius
        longest = 2.0 * self.radius[1] * math.sin(min(1.5 * math.pi / self.vertices[0], math.pi / 2.0))
        if longest < self.min_facade_length:
            problems.append("min_facade_length cannot be reached with the given radius and vertex counts")
        if problems:
            raise GenerationInfeasibleError("; ".join(problems))


def _footprint(rng: np.random.Generator, params: WorldGenParams, center: Tuple[float, float]) -> Optional[List[Tuple[float, float]]]:
    count = int(rng.integers(params.vertices[0], params.vertices[1] + 1))
    radius = float(rng.uniform(params.radius[0], params.radius[1]))
    step = 2.0 * math.pi / count
    base = float(rng.uniform(0.0, step))
    jitter = rng.uniform(-0.25, 0.25, size=count) * step
    vertices = []
    for k in range(count):
        angle = base + k * step + float(jitter[k])
        vertices.append((round(center[0] + radius * math.cos(angle), 3),
                         round(center[1] + radius * math.sin(angle), 3)))
    if not is_convex_ccw(vertices):
        return None
    for k in range(count):
        (x0, y0), (x1, y1) = vertices[k], vertices[(k + 1) % count]
        if math.hypot(x1 - x0, y1 - y0) < params.min_facade_length:
            return None
    return vertices


def _windows(building_id: str, footprint, floor_height: float, num_floors: int,
             params: WorldGenParams) -> List[Window]:
    windows = []
    count = len(footprint)
    for f_idx in range(count):
        (x0, y0), (x1, y1) = footprint[f_idx], footprint[(f_idx + 1) % count]
        length = math.hypot(x1 - x0, y1 - y0)
        usable = length - 2.0 * params.facade_margin
        if usable < params.window_width:
            continue
        per_floor = min(params.windows_per_facade,
                        int((usable - params.window_width) // params.window_spacing) + 1)
        for floor in range(1, num_floors + 1):
            z = (floor - 0.5) * floor_height
            for k in range(per_floor):
                offset = (k - (per_floor - 1) / 2.0) * params.window_spacing
                s = 0.5 + offset / length
                windows.append(Window(
                    id=f"{building_id}-f{f_idx}-l{floor:02d}-w{k}",
                    facade_index=f_idx,
                    floor=floor,
                    center=(x0 + s * (x1 - x0), y0 + s * (y1 - y0), z),
                    extent=(params.window_width, params.window_height),
                ))
    return windows


def _decorate(rng: np.random.Generator, windows: List[Window], density: float) -> List[Window]:
    catalog = [(category, color.value, label)
               for category, labels in OBJECT_CATALOG.items()
               for label in labels
               for color in ObjectColor]
    order = rng.permutation(len(catalog))
    next_tag = 0
    decorated = []
    for window in windows:
        if next_tag < len(order) and rng.random() < density:
            category, color, label = catalog[int(order[next_tag])]
            next_tag += 1
            window = Window(window.id, window.facade_index, window.floor, window.center,
                            window.extent, (ObjectTag(category, color, label),))
        decorated.append(window)
    return decorated


def generate_world(seed: int, params: Optional[WorldGenParams] = None) -> WorldModel:
    """Deterministic procedural world for a fixed (seed, params)."""
    params = params or WorldGenParams()
    params.validate()
    rng = np.random.default_rng(seed)

    buildings: List[Building] = []
    spread = (2.0 * params.radius[1] + params.min_gap) * math.ceil(math.sqrt(params.num_buildings))
    building_types = [t.value for t in BuildingType]

    for b_idx in range(params.num_buildings):
        building_id = f"b{b_idx}"
        placed = None
        for _ in range(params.max_attempts):
            center = (0.0, 0.0) if b_idx == 0 else (
                float(rng.uniform(-spread, spread)), float(rng.uniform(-spread, spread)))
            footprint = _footprint(rng, params, center)
            if footprint is None:
                continue
            candidate = Polygon(footprint)
            if any(candidate.distance(footprint_polygon(other)) < params.min_gap or
                   candidate.intersects(footprint_polygon(other)) for other in buildings):
                continue
            placed = footprint
            break
        if placed is None:
            raise GenerationInfeasibleError(
                f"Could not place building {b_idx + 1} of {params.num_buildings} "
                f"after {params.max_attempts} attempts"
            )

        num_floors = int(rng.integers(params.floors[0], params.floors[1] + 1))
        floor_height = round(float(rng.uniform(params.floor_height[0], params.floor_height[1])), 2)
        building_type = building_types[int(rng.integers(0, len(building_types)))]
        windows = _windows(building_id, placed, floor_height, num_floors, params)
        windows = _decorate(rng, windows, params.decoration_density)
        buildings.append(Building(
            id=building_id,
            footprint=tuple(placed),
            floor_height=floor_height,
            num_floors=num_floors,
            windows=tuple(windows),
            building_type=building_type,
        ))
        logger.debug(f"Placed {building_id}: {len(placed)} facades, {num_floors} floors, {len(windows)} windows")

    xs = [x for b in buildings for x, _ in b.footprint]
    ys = [y for b in buildings for _, y in b.footprint]
    margin = params.bounds_margin
    bounds = (min(xs) - margin, min(ys) - margin, max(xs) + margin, max(ys) + margin)
    world = WorldModel(buildings=tuple(buildings), bounds=bounds, seed=int(seed), params=params.to_dict())
    audit_world(world)
    logger.info(f"Generated world seed={seed}: {len(buildings)} building(s), "
                f"{len(world.decorated_windows())} decorated window(s)")
    return world


def facade_residual(building: Building, window: Window) -> float:
    """Distance of the window centre from its facade plane."""
    (x0, y0), _ = building.facade(window.facade_index)
    nx, ny = building.facade_normal(window.facade_index)
    return abs((window.center[0] - x0) * nx + (window.center[1] - y0) * ny)


def audit_world(world: WorldModel):
    """Re-check every world invariant; raises GenerationInfeasibleError on violation."""
    seen_ids = set()
    for i, building in enumerate(world.buildings):
        if not is_convex_ccw(building.footprint):
            raise GenerationInfeasibleError(f"Footprint of {building.id} is not a convex CCW polygon")
        if building.num_floors < 1 or building.floor_height <= 0.0:
            raise GenerationInfeasibleError(f"Building {building.id} has invalid floors")
        for other in world.buildings[i + 1:]:
            if footprint_polygon(building).intersects(footprint_polygon(other)):
                raise GenerationInfeasibleError(f"Footprints of {building.id} and {other.id} overlap")
        tags = set()
        for window in building.windows:
            if window.id in seen_ids:
                raise GenerationInfeasibleError(f"Duplicate window id {window.id}")
            seen_ids.add(window.id)
            if not 0 <= window.facade_index < building.num_facades:
                raise GenerationInfeasibleError(f"Window {window.id} references a missing facade")
            if not 1 <= window.floor <= building.num_floors:
                raise GenerationInfeasibleError(f"Window {window.id} floor out of range")
            if facade_residual(building, window) >= PLANE_TOLERANCE:
                raise GenerationInfeasibleError(f"Window {window.id} is off its facade plane")
            for tag in window.decorations:
                key = (tag.category, tag.color, tag.label)
                if key in tags:
                    raise GenerationInfeasibleError(f"Decoration {key} repeats within {building.id}")
                tags.add(key)


def world_to_dict(world: WorldModel) -> Dict[str, Any]:
    return {
        'schema': WORLD_SCHEMA,
        'seed': world.seed,
        'bounds': list(world.bounds),
        'params': world.params,
        'buildings': [b.to_dict() for b in world.buildings],
    }


def world_from_dict(data: Dict[str, Any]) -> WorldModel:
    if data.get('schema') != WORLD_SCHEMA:
        raise SchemaError(f"Expected schema {WORLD_SCHEMA}, got {data.get('schema')!r}")
    world = WorldModel(
        buildings=tuple(Building.from_dict(b) for b in data['buildings']),
        bounds=tuple(float(v) for v in data['bounds']),
        seed=int(data['seed']),
        params=dict(data.get('params', {})),
    )
    audit_world(world)
    return world


def dumps_world(world: WorldModel) -> str:
    return dumps_canonical(world_to_dict(world)) + "\n"


def save_world(world: WorldModel, path: str):
    with atomic_write(path) as handle:
        handle.write(dumps_world(world))
    logger.info(f"Wrote world to {path}")


def load_world(path: str) -> WorldModel:
    with open(path, 'r', encoding='utf-8') as handle:
        return world_from_dict(json.load(handle))
