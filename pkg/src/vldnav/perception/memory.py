"""
VLD Navigation - Exploration Memory Module

Facade coverage bookkeeping for the oracle choice policy. Every facade is
sampled at a fixed spacing; a sample counts as observed once it has been seen
facing the drone, unoccluded in plan view, within sensor range and outside the
rear blind sector.
"""

import math
import logging
from typing import List, Tuple

import numpy as np

from vldnav.world.camera import cast_rays
from vldnav.world.types import WorldModel

logger = logging.getLogger('vldnav.perception.memory')

OCCLUSION_EPS = 1e-6
REAR_BLIND_SECTOR_DEG = 90.0


def facade_samples(world: WorldModel, spacing: float) -> Tuple[List[str], np.ndarray, np.ndarray, np.ndarray]:
    """Sample ids, positions, outward normals and represented lengths for every facade."""
    ids, points, normals, weights = [], [], [], []
    for building in world.buildings:
        for index in range(building.num_facades):
            (x0, y0), (x1, y1) = building.facade(index)
            length = building.facade_length(index)
            count = max(1, int(round(length / spacing)))
            normal = building.facade_normal(index)
            for k in range(count):
                frac = (k + 0.5) / count
                ids.append(f"{building.id}:{index}:{k}")
                points.append((x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)))
                normals.append(normal)
                weights.append(length / count)
    return (ids,
            np.asarray(points, dtype=float).reshape(-1, 2),
            np.asarray(normals, dtype=float).reshape(-1, 2),
            np.asarray(weights, dtype=float))


class ExplorationMemory:
    """Which facade samples have been observed during an episode."""

    def __init__(self, world: WorldModel, spacing: float = 1.0, max_range: float = 80.0,
                 blind_sector_deg: float = REAR_BLIND_SECTOR_DEG):
        if spacing <= 0.0:
            raise ValueError("Facade sample spacing must be positive")
        self.world = world
        self.max_range = max_range
        self.half_blind = math.radians(blind_sector_deg) / 2.0
        self.ids, self.points, self.normals, self.weights = facade_samples(world, spacing)
        self.seen = np.zeros(len(self.ids), dtype=bool)

    def visible_mask(self, x: float, y: float, yaw: float) -> np.ndarray:
        """Samples observable from (x, y) when heading along `yaw`."""
        mask = np.zeros(len(self.ids), dtype=bool)
        if not self.ids:
            return mask
        rel = self.points - np.array([x, y])
        dist = np.hypot(rel[:, 0], rel[:, 1])
        facing = -(rel[:, 0] * self.normals[:, 0] + rel[:, 1] * self.normals[:, 1]) > OCCLUSION_EPS
        bearing = np.arctan2(rel[:, 1], rel[:, 0])
        relative = np.angle(np.exp(1j * (bearing - yaw)))
        in_front = np.abs(relative) <= math.pi - self.half_blind
        candidates = np.flatnonzero(facing & in_front & (dist > OCCLUSION_EPS) & (dist <= self.max_range))
        if candidates.size == 0:
            return mask
        directions = np.column_stack([rel[candidates], np.zeros(candidates.size)])
        t_hit, _ = cast_rays(self.world, (x, y, 0.0), directions)
        mask[candidates[t_hit >= 1.0 - OCCLUSION_EPS]] = True
        return mask

    def observe(self, x: float, y: float, yaw: float) -> float:
        """Mark what is visible from a pose as seen; returns the newly covered length."""
        visible = self.visible_mask(x, y, yaw)
        fresh = visible & ~self.seen
        self.seen |= visible
        gained = float(self.weights[fresh].sum())
        if gained > 0.0:
            logger.debug(f"Observed {gained:.1f} m of new facade from ({x:.1f}, {y:.1f})")
        return gained

    def unseen_length(self, x: float, y: float, yaw: float) -> float:
        """Facade length that would be newly observed from a pose."""
        visible = self.visible_mask(x, y, yaw)
        return float(self.weights[visible & ~self.seen].sum())

    @property
    def seen_length(self) -> float:
        return float(self.weights[self.seen].sum())

    @property
    def total_length(self) -> float:
        return float(self.weights.sum())
