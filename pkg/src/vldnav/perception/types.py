"""
VLD Navigation - Perception Types Module

This module defines the answers returned by the four model roles (request,
floor count, recognition, choice), the marked view handed to the choice role,
and the noise profiles that emulate the error modes of real vision-language
models.
"""

import math
from dataclasses import dataclass, replace
from typing import Any, Dict, Optional, Tuple

from vldnav.utils.error_handling import ConfigurationError
from vldnav.world.types import (
    CAMERA_INDICES, DepthImage, DronePose, ObjectTag, PixelBox, VisibleFeature
)


@dataclass(frozen=True)
class RequestInterpretation:
    target_floor: int
    target_object: ObjectTag
    perturbation: Optional[str] = None  # noise applied by the oracle, if any

    def __post_init__(self):
        if self.target_floor < 1:
            raise ValueError(f"Target floor must be >= 1, got {self.target_floor}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'target_floor': self.target_floor,
            'target_object': self.target_object.to_dict(),
            'perturbation': self.perturbation,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RequestInterpretation':
        return cls(
            target_floor=int(data['target_floor']),
            target_object=ObjectTag.from_dict(data['target_object']),
            perturbation=data.get('perturbation'),
        )


@dataclass(frozen=True)
class FloorCountAnswer:
    floors_visible: Optional[int] = None
    refused: bool = False

    def __post_init__(self):
        if self.refused and self.floors_visible is not None:
            raise ValueError("A refused floor count carries no value")
        if not self.refused and (self.floors_visible is None or self.floors_visible < 0):
            raise ValueError(f"Floor count must be a non-negative integer, got {self.floors_visible}")

    @classmethod
    def refusal(cls) -> 'FloorCountAnswer':
        return cls(floors_visible=None, refused=True)

    def to_dict(self) -> Dict[str, Any]:
        return {'floors_visible': self.floors_visible, 'refused': self.refused}


@dataclass(frozen=True)
class RecognitionAnswer:
    found: bool
    pixel_box: Optional[PixelBox] = None
    view: Optional[int] = None
    window_id: Optional[str] = None  # ground-truth attribution, never shown to navigation logic

    def __post_init__(self):
        if self.found and (self.pixel_box is None or self.view is None):
            raise ValueError("A positive recognition needs a pixel box and a view")

    @classmethod
    def not_found(cls) -> 'RecognitionAnswer':
        return cls(found=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'found': self.found,
            'pixel_box': list(self.pixel_box) if self.pixel_box is not None else None,
            'view': self.view,
            'window_id': self.window_id,
        }


@dataclass(frozen=True)
class ChoiceAnswer:
    point_index: Optional[int] = None
    refused: bool = False

    def __post_init__(self):
        if self.refused:
            if self.point_index is not None:
                raise ValueError("A refused choice carries no point")
        elif self.point_index not in CAMERA_INDICES:
            raise ValueError(f"Choice point must be 1..5, got {self.point_index}")

    @classmethod
    def refusal(cls) -> 'ChoiceAnswer':
        return cls(point_index=None, refused=True)

    def to_dict(self) -> Dict[str, Any]:
        return {'point_index': self.point_index, 'refused': self.refused}


@dataclass(frozen=True)
class ViewObservation:
    """Everything one camera produced at a step: depth and projected window features."""
    cam: int
    depth: DepthImage
    features: Tuple[VisibleFeature, ...] = ()


@dataclass(frozen=True, eq=False)
class MarkedView:
    """The selected exploration view with its five marked points."""
    cam: int
    pose: DronePose
    depth: DepthImage
    row: int                        # image row of the marks
    columns: Tuple[int, ...]        # mark columns, left to right
    bearings: Tuple[float, ...]     # world bearing of each mark (radians)
    split_column: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'cam': self.cam,
            'row': self.row,
            'columns': list(self.columns),
            'bearings': list(self.bearings),
            'split_column': self.split_column,
        }


# Parse-error kinds the request oracle can inject
PARSE_ERROR_KINDS = ('floor_up', 'floor_down', 'color_swap')


@dataclass(frozen=True)
class NoiseProfile:
    """Error rates of a simulated model; deterministic for a given seed and query sequence."""
    name: str = 'none'
    or_false_positive_rate: float = 0.0
    or_false_negative_rate: float = 0.0
    floor_count_error_dist: Tuple[Tuple[int, float], ...] = ((0, 1.0),)
    refusal_rate: float = 0.0
    parse_error_rate: float = 0.0
    parse_error_kinds: Tuple[str, ...] = PARSE_ERROR_KINDS
    count_scale_px: float = 0.0     # offsets grow when a floor spans fewer pixels than this
    seed: int = 0

    def __post_init__(self):
        for attr in ('or_false_positive_rate', 'or_false_negative_rate', 'refusal_rate', 'parse_error_rate'):
            value = getattr(self, attr)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"Noise rate {attr} must lie in [0, 1], got {value}")
        if not self.floor_count_error_dist:
            raise ConfigurationError("Floor-count error distribution must not be empty")
        probs = [p for _, p in self.floor_count_error_dist]
        if any(p < 0.0 for p in probs) or not math.isclose(sum(probs), 1.0, abs_tol=1e-6):
            raise ConfigurationError("Floor-count error probabilities must be non-negative and sum to 1")
        unknown = set(self.parse_error_kinds) - set(PARSE_ERROR_KINDS)
        if unknown or not self.parse_error_kinds:
            raise ConfigurationError(f"Unknown parse-error kinds: {sorted(unknown)}")
        if self.count_scale_px < 0.0:
            raise ConfigurationError("count_scale_px must be non-negative")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError("Noise seed must be a 64-bit unsigned integer")

    @property
    def is_noiseless(self) -> bool:
        return (self.or_false_positive_rate == 0.0 and self.or_false_negative_rate == 0.0
                and self.refusal_rate == 0.0 and self.parse_error_rate == 0.0
                and all(offset == 0 for offset, p in self.floor_count_error_dist if p > 0.0))

    def with_seed(self, seed: int) -> 'NoiseProfile':
        return replace(self, seed=seed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'or_false_positive_rate': self.or_false_positive_rate,
            'or_false_negative_rate': self.or_false_negative_rate,
            'floor_count_error_dist': {str(k): p for k, p in self.floor_count_error_dist},
            'refusal_rate': self.refusal_rate,
            'parse_error_rate': self.parse_error_rate,
            'parse_error_kinds': list(self.parse_error_kinds),
            'count_scale_px': self.count_scale_px,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'NoiseProfile':
        dist = data.get('floor_count_error_dist', {0: 1.0})
        if isinstance(dist, dict):
            dist = tuple(sorted((int(k), float(p)) for k, p in dist.items()))
        else:
            dist = tuple((int(k), float(p)) for k, p in dist)
        return cls(
            name=data.get('name', 'custom'),
            or_false_positive_rate=float(data.get('or_false_positive_rate', 0.0)),
            or_false_negative_rate=float(data.get('or_false_negative_rate', 0.0)),
            floor_count_error_dist=dist,
            refusal_rate=float(data.get('refusal_rate', 0.0)),
            parse_error_rate=float(data.get('parse_error_rate', 0.0)),
            parse_error_kinds=tuple(data.get('parse_error_kinds', PARSE_ERROR_KINDS)),
            count_scale_px=float(data.get('count_scale_px', 0.0)),
            seed=int(data.get('seed', 0)),
        )

    @classmethod
    def preset(cls, name: str) -> 'NoiseProfile':
        try:
            return NOISE_PRESETS[name]
        except KeyError:
            raise ConfigurationError(
                f"Unknown noise preset '{name}' (known: {', '.join(sorted(NOISE_PRESETS))})"
            ) from None


# Presets calibrated to the recognition failure levels reported for common VLMs
NOISE_PRESETS: Dict[str, NoiseProfile] = {
    'none': NoiseProfile(name='none'),
    'qwen2-vl': NoiseProfile(
        name='qwen2-vl',
        or_false_positive_rate=0.10,
        or_false_negative_rate=0.066,
        floor_count_error_dist=((-1, 0.05), (0, 0.9), (1, 0.05)),
        refusal_rate=0.02,
        parse_error_rate=0.02,
        count_scale_px=24.0,
    ),
    'llama3.1-vision': NoiseProfile(
        name='llama3.1-vision',
        or_false_positive_rate=0.28,
        or_false_negative_rate=0.172,
        floor_count_error_dist=((-1, 0.1), (0, 0.8), (1, 0.1)),
        refusal_rate=0.05,
        parse_error_rate=0.03,
        count_scale_px=24.0,
    ),
    'yi-vl': NoiseProfile(
        name='yi-vl',
        or_false_positive_rate=0.35,
        or_false_negative_rate=0.282,
        floor_count_error_dist=((-2, 0.05), (-1, 0.1), (0, 0.7), (1, 0.1), (2, 0.05)),
        refusal_rate=0.25,
        parse_error_rate=0.05,
        count_scale_px=24.0,
    ),
}

