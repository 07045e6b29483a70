"""
VLD Navigation - World Types Module

This module defines the immutable world model (buildings, facades, windows,
decorations), the drone pose, the camera rig and the sensor products that the
simulator hands to perception.
"""

import math
from enum import Enum
from functools import cached_property
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Tuple, Any

import numpy as np


PixelBox = Tuple[int, int, int, int]  # x_min, x_max, y_min, y_max (inclusive)


class ObjectCategory(Enum):
    """Categories of distinctive objects placed at windows."""
    TOOL = "tool"
    CONTAINER = "container"
    HOUSEHOLD = "household"
    FOOD = "food"
    FURNITURE = "furniture"
    POSTER = "poster"
    TOY = "toy"
    ORNAMENT = "ornament"


class ObjectColor(Enum):
    RED = "red"
    GREEN = "green"
    BLUE = "blue"
    YELLOW = "yellow"
    WHITE = "white"
    BLACK = "black"
    ORANGE = "orange"
    PURPLE = "purple"


class BuildingType(Enum):
    RESIDENTIAL = "residential"
    OFFICE = "office"
    MIXED = "mixed"


def wrap_angle(angle: float) -> float:
    """Wrap an angle in radians to (-pi, pi]."""
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped < 0.0:
        wrapped += 2.0 * math.pi
    wrapped -= math.pi
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


@dataclass(frozen=True)
class ObjectTag:
    """A distinctive object; (category, color, label) identify it within a building."""
    category: str
    color: str
    label: str

    def __post_init__(self):
        if not self.label or not self.label.strip():
            raise ValueError("ObjectTag label must be non-empty")
        ObjectCategory(self.category)
        ObjectColor(self.color)

    def describe(self) -> str:
        return f"{self.color} {self.label}"

    def to_dict(self) -> Dict[str, str]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, str]) -> 'ObjectTag':
        return cls(category=data['category'], color=data['color'], label=data['label'])


@dataclass(frozen=True)
class Window:
    id: str
    facade_index: int
    floor: int
    center: Tuple[float, float, float]
    extent: Tuple[float, float]  # width along the facade, height
    decorations: Tuple[ObjectTag, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.id,
            'facade_index': self.facade_index,
            'floor': self.floor,
            'center': list(self.center),
            'extent': list(self.extent),
            'decorations': [tag.to_dict() for tag in self.decorations],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Window':
        return cls(
            id=data['id'],
            facade_index=int(data['facade_index']),
            floor=int(data['floor']),
            center=tuple(float(v) for v in data['center']),
            extent=tuple(float(v) for v in data['extent']),
            decorations=tuple(ObjectTag.from_dict(d) for d in data.get('decorations', [])),
        )


@dataclass(frozen=True)
class Building:
    """An extruded convex footprint (counterclockwise vertices) with uniform floors."""
    id: str
    footprint: Tuple[Tuple[float, float], ...]
    floor_height: float
    num_floors: int
    windows: Tuple[Window, ...] = ()
    building_type: str = BuildingType.RESIDENTIAL.value

    @property
    def height(self) -> float:
        return self.floor_height * self.num_floors

    @property
    def num_facades(self) -> int:
        return len(self.footprint)

    def facade(self, index: int) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        """Endpoints of facade edge `index` (from vertex index to the next)."""
        p0 = self.footprint[index]
        p1 = self.footprint[(index + 1) % len(self.footprint)]
        return p0, p1

    def facade_normal(self, index: int) -> Tuple[float, float]:
        """Outward unit normal of a facade (right-hand side of a CCW edge)."""
        (x0, y0), (x1, y1) = self.facade(index)
        ex, ey = x1 - x0, y1 - y0
        length = math.hypot(ex, ey)
        return ey / length, -ex / length

    def facade_length(self, index: int) -> float:
        (x0, y0), (x1, y1) = self.facade(index)
        return math.hypot(x1 - x0, y1 - y0)

    @cached_property
    def vertices(self) -> np.ndarray:
        return np.asarray(self.footprint, dtype=float)

    @cached_property
    def centroid(self) -> Tuple[float, float]:
        from vldnav.world.geometry import footprint_polygon
        c = footprint_polygon(self).centroid
        return float(c.x), float(c.y)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.id,
            'building_type': self.building_type,
            'footprint': [list(v) for v in self.footprint],
            'floor_height': self.floor_height,
            'num_floors': self.num_floors,
            'windows': [w.to_dict() for w in self.windows],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Building':
        return cls(
            id=data['id'],
            footprint=tuple((float(x), float(y)) for x, y in data['footprint']),
            floor_height=float(data['floor_height']),
            num_floors=int(data['num_floors']),
            windows=tuple(Window.from_dict(w) for w in data.get('windows', [])),
            building_type=data.get('building_type', BuildingType.RESIDENTIAL.value),
        )


@dataclass(frozen=True)
class WorldModel:
    """Immutable after generation; safe to share between concurrent episodes."""
    buildings: Tuple[Building, ...]
    bounds: Tuple[float, float, float, float]  # x_min, y_min, x_max, y_max
    seed: int
    params: Dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    @cached_property
    def _window_index(self) -> Dict[str, Tuple[int, Window]]:
        index = {}
        for b_idx, building in enumerate(self.buildings):
            for window in building.windows:
                index[window.id] = (b_idx, window)
        return index

    @cached_property
    def edge_table(self) -> Dict[str, np.ndarray]:
        """Facade edges of every building stacked for vectorised ray casting."""
        x0, y0, x1, y1, heights, owners = [], [], [], [], [], []
        for b_idx, building in enumerate(self.buildings):
            for f_idx in range(building.num_facades):
                (ax, ay), (bx, by) = building.facade(f_idx)
                x0.append(ax)
                y0.append(ay)
                x1.append(bx)
                y1.append(by)
                heights.append(building.height)
                owners.append(b_idx)
        return {
            'x0': np.asarray(x0, dtype=float), 'y0': np.asarray(y0, dtype=float),
            'x1': np.asarray(x1, dtype=float), 'y1': np.asarray(y1, dtype=float),
            'height': np.asarray(heights, dtype=float),
            'building': np.asarray(owners, dtype=int),
        }

    @cached_property
    def window_table(self) -> Dict[str, Any]:
        """Window centres, facade frames and extents stacked in id order per building."""
        ids, owners, centers, normals, tangents, extents = [], [], [], [], [], []
        for b_idx, building in enumerate(self.buildings):
            for window in building.windows:
                (ax, ay), (bx, by) = building.facade(window.facade_index)
                length = math.hypot(bx - ax, by - ay)
                ids.append(window.id)
                owners.append(b_idx)
                centers.append(window.center)
                tangents.append(((bx - ax) / length, (by - ay) / length))
                normals.append(building.facade_normal(window.facade_index))
                extents.append(window.extent)
        return {
            'ids': ids,
            'building': np.asarray(owners, dtype=int),
            'centers': np.asarray(centers, dtype=float).reshape(-1, 3),
            'normals': np.asarray(normals, dtype=float).reshape(-1, 2),
            'tangents': np.asarray(tangents, dtype=float).reshape(-1, 2),
            'extents': np.asarray(extents, dtype=float).reshape(-1, 2),
        }

    def window(self, window_id: str) -> Window:
        try:
            return self._window_index[window_id][1]
        except KeyError:
            raise KeyError(f"Unknown window id: {window_id}") from None

    def building_of(self, window_id: str) -> Building:
        return self.buildings[self._window_index[window_id][0]]

    def building_index_of(self, window_id: str) -> int:
        return self._window_index[window_id][0]

    def building(self, building_id: str) -> Building:
        return self.buildings[self.building_index(building_id)]

    def building_index(self, building_id: str) -> int:
        for b_idx, building in enumerate(self.buildings):
            if building.id == building_id:
                return b_idx
        raise KeyError(f"Unknown building id: {building_id}")

    def decorated_windows(self) -> List[Window]:
        return [w for b in self.buildings for w in b.windows if w.decorations]

    def contains_xy(self, x: float, y: float) -> bool:
        x_min, y_min, x_max, y_max = self.bounds
        return x_min <= x <= x_max and y_min <= y <= y_max


@dataclass(frozen=True)
class DronePose:
    """Position in meters and yaw in radians (counterclockwise from +x)."""
    x: float
    y: float
    z: float
    yaw: float = 0.0

    def __post_init__(self):
        if self.z < 0.0:
            raise ValueError(f"Altitude must be non-negative, got {self.z}")
        object.__setattr__(self, 'yaw', wrap_angle(self.yaw))

    @property
    def position(self) -> Tuple[float, float, float]:
        return self.x, self.y, self.z

    def distance_to(self, point) -> float:
        return math.sqrt((self.x - point[0]) ** 2 + (self.y - point[1]) ** 2 + (self.z - point[2]) ** 2)

    def to_dict(self) -> Dict[str, float]:
        return {'x': self.x, 'y': self.y, 'z': self.z, 'yaw': self.yaw}

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> 'DronePose':
        return cls(x=float(data['x']), y=float(data['y']), z=float(data['z']), yaw=float(data['yaw']))


# Camera indices 1..5 in rig order; positive offsets turn right (clockwise)
RIG_OFFSETS_DEG = (0.0, 45.0, 90.0, -45.0, -90.0)
FRONT_CAMERA = 1
RIGHT_CAMERA = 3
CAMERA_INDICES = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class CameraRig:
    yaw_offsets: Tuple[float, ...] = RIG_OFFSETS_DEG
    hfov: float = 90.0
    vfov: float = 90.0
    width: int = 128
    height: int = 128
    max_range: float = 80.0

    def __post_init__(self):
        if len(self.yaw_offsets) != 5 or len(set(self.yaw_offsets)) != 5:
            raise ValueError("Camera rig needs exactly five distinct yaw offsets")
        if self.width < 16 or self.height < 16:
            raise ValueError("Camera images must be at least 16x16 pixels")
        if not 0.0 < self.hfov < 180.0 or not 0.0 < self.vfov < 180.0:
            raise ValueError("Fields of view must lie in (0, 180) degrees")

    @property
    def fx(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.hfov) / 2.0)

    @property
    def fy(self) -> float:
        return (self.height / 2.0) / math.tan(math.radians(self.vfov) / 2.0)

    def camera_yaw(self, pose: DronePose, cam: int) -> float:
        """World yaw of camera `cam` (1-based rig index)."""
        if cam not in CAMERA_INDICES:
            raise ValueError(f"Camera index must be 1..5, got {cam}")
        return wrap_angle(pose.yaw - math.radians(self.yaw_offsets[cam - 1]))

    def with_resolution(self, width: int, height: int) -> 'CameraRig':
        return CameraRig(self.yaw_offsets, self.hfov, self.vfov, width, height, self.max_range)

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> 'CameraRig':
        camera = config.get('camera', config)
        return cls(
            hfov=float(camera.get('hfov', 90.0)),
            vfov=float(camera.get('vfov', 90.0)),
            width=int(camera.get('width', 128)),
            height=int(camera.get('height', 128)),
            max_range=float(camera.get('max_range', 80.0)),
        )


@dataclass(frozen=True, eq=False)
class DepthImage:
    """Row-major planar depth in meters; no-hit pixels equal max_range exactly."""
    data: np.ndarray
    max_range: float

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    def at(self, column: int, row: int) -> float:
        return float(self.data[row, column])


@dataclass(frozen=True)
class VisibleFeature:
    window_id: str
    pixel_box: PixelBox
    floor: int
    decorations: Tuple[ObjectTag, ...]
    occluded_fraction: float
    building_id: str = ""
    view_angle: float = 0.0    # degrees between the line of sight and the facade normal

    def to_dict(self) -> Dict[str, Any]:
        return {
            'window_id': self.window_id,
            'pixel_box': list(self.pixel_box),
            'floor': self.floor,
            'decorations': [t.to_dict() for t in self.decorations],
            'occluded_fraction': self.occluded_fraction,
            'building_id': self.building_id,
            'view_angle': self.view_angle,
        }


class ActionKind(Enum):
    TRANSLATE = "translate"
    ROTATE_LEFT_30 = "rotate_left_30"
    APPROACH = "approach"      # align yaw and altitude on a recognised window
    STOP = "stop"
    ASCEND = "ascend"          # vertical move to an absolute altitude


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    bearing: Optional[float] = None    # world radians; translate heading or approach yaw
    distance: float = 0.0              # horizontal meters (translate) or |dz| (ascend)
    altitude: Optional[float] = None   # absolute target altitude (ascend, approach)

    def __post_init__(self):
        if self.distance < 0.0:
            raise ValueError("Action distance must be non-negative")
        if self.kind in (ActionKind.ROTATE_LEFT_30, ActionKind.STOP, ActionKind.APPROACH) and self.distance != 0.0:
            raise ValueError(f"{self.kind.value} actions carry no translation")
        if self.kind == ActionKind.TRANSLATE and self.bearing is None:
            raise ValueError("Translate actions need a bearing")
        if self.kind == ActionKind.ASCEND and self.altitude is None:
            raise ValueError("Ascend actions need a target altitude")

    @classmethod
    def rotate_left(cls) -> 'Action':
        return cls(ActionKind.ROTATE_LEFT_30)

    @classmethod
    def stop(cls) -> 'Action':
        return cls(ActionKind.STOP)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'bearing': self.bearing,
            'distance': self.distance,
            'altitude': self.altitude,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Action':
        return cls(
            kind=ActionKind(data['kind']),
            bearing=data.get('bearing'),
            distance=float(data.get('distance', 0.0)),
            altitude=data.get('altitude'),
        )
