"""
VLD Navigation - Oracle Perception Backend

Ground-truth answers for every model role, computed from the simulator, with
optional noise that reproduces the failure modes of real models: floor-count
offsets that grow on small floors, refusals, colour-driven false positives,
missed detections and misread requests.
"""

import math
import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from vldnav.perception.base import CENTER_POINT, PerceptionBackend
from vldnav.perception.memory import ExplorationMemory
from vldnav.perception.noise import NoiseStream
from vldnav.perception.types import (
    ChoiceAnswer, FloorCountAnswer, MarkedView, RecognitionAnswer,
    RequestInterpretation, ViewObservation
)
from vldnav.utils.error_handling import NoBuildingInViewError, NotInViewError
from vldnav.world.camera import (
    axis_distance, building_pixel_box, camera_basis, cast_rays, dominant_building
)
from vldnav.world.types import (
    CAMERA_INDICES, Building, CameraRig, DronePose, ObjectColor, ObjectTag, PixelBox, WorldModel
)

logger = logging.getLogger('vldnav.perception.oracle')

# Choice tie-break: middle point first, then leftward, then rightward
TIE_ORDER = (3, 2, 1, 4, 5)
SCORE_TOL = 1e-9


def viewed_building(world: WorldModel, pose: DronePose, cam: int, rig: CameraRig) -> Tuple[Building, float]:
    """
    The building a camera is pointed at and its distance along the optical axis.

    The building hit by the optical axis wins; otherwise the one covering most
    pixels, with its nearest footprint vertex ahead giving the distance.
    """
    cam_yaw = rig.camera_yaw(pose, cam)
    forward, _, _ = camera_basis(cam_yaw)
    t_hit, label = cast_rays(world, pose.position, forward[None, :])
    if np.isfinite(t_hit[0]) and t_hit[0] <= rig.max_range:
        building = world.buildings[int(label[0])]
        distance = axis_distance(building, pose.x, pose.y, cam_yaw)
        if distance is not None:
            return building, distance

    b_idx = dominant_building(world, pose, cam, rig)
    if b_idx is None:
        raise NoBuildingInViewError(f"No building in view of camera {cam} at {pose.to_dict()}")
    building = world.buildings[b_idx]
    distance = axis_distance(building, pose.x, pose.y, cam_yaw)
    if distance is None:
        rel = building.vertices - np.array([pose.x, pose.y])
        ahead = rel @ forward[:2]
        distance = float(ahead[ahead > 0.0].min()) if (ahead > 0.0).any() else float(np.hypot(*rel.T).min())
    return building, distance


def floors_in_band(building: Building, low: float, high: float) -> int:
    """Floors whose mid-height lies in [low, high)."""
    return sum(1 for floor in range(1, building.num_floors + 1)
               if low <= (floor - 0.5) * building.floor_height < high)


class OracleBackend(PerceptionBackend):
    """Simulator ground truth behind the model-role interface."""

    name = 'oracle'

    def __init__(self, rig: CameraRig, occlusion_threshold: float = 0.5, deadlock_threshold: float = 1.0,
                 max_view_angle_deg: float = 85.0):
        self.rig = rig
        self.occlusion_threshold = occlusion_threshold
        self.max_view_angle_deg = max_view_angle_deg
        self.deadlock_threshold = deadlock_threshold

    @classmethod
    def from_config(cls, config: Dict, rig: Optional[CameraRig] = None) -> 'OracleBackend':
        return cls(
            rig=rig or CameraRig.from_config(config),
            occlusion_threshold=config['perception']['occlusion_threshold'],
            deadlock_threshold=config['explore']['deadlock_threshold'],
            max_view_angle_deg=config['perception'].get('max_view_angle_deg', 85.0),
        )

    # ------------------------------------------------------------------
    # Request understanding
    # ------------------------------------------------------------------

    def parse_request(self, request_text: str, truth: RequestInterpretation,
                      noise: NoiseStream) -> RequestInterpretation:
        profile = noise.profile
        if not noise.chance(profile.parse_error_rate):
            return RequestInterpretation(truth.target_floor, truth.target_object)

        kind = noise.pick(profile.parse_error_kinds)
        floor, tag = truth.target_floor, truth.target_object
        if kind == 'floor_down' and floor == 1:
            kind = 'floor_up'
        if kind == 'floor_up':
            floor += 1
        elif kind == 'floor_down':
            floor -= 1
        else:
            colors = [c.value for c in ObjectColor if c.value != tag.color]
            tag = ObjectTag(category=tag.category, color=noise.pick(colors), label=tag.label)
        logger.info(f"Request misread ({kind}): floor {floor}, object '{tag.describe()}'")
        return RequestInterpretation(floor, tag, perturbation=kind)

    # ------------------------------------------------------------------
    # Floor counting and building box
    # ------------------------------------------------------------------

    def count_floors(self, world: WorldModel, pose: DronePose, cam: int,
                     noise: NoiseStream) -> FloorCountAnswer:
        building, distance = viewed_building(world, pose, cam, self.rig)
        half_span = distance * math.tan(math.radians(self.rig.vfov) / 2.0)
        true_count = floors_in_band(building, pose.z - half_span, pose.z + half_span)

        profile = noise.profile
        if noise.chance(profile.refusal_rate):
            logger.debug(f"Floor count refused at z={pose.z:.2f}")
            return FloorCountAnswer.refusal()
        offset = noise.floor_offset()
        if offset and profile.count_scale_px > 0.0:
            floor_px = building.floor_height * self.rig.fy / max(distance, 1e-6)
            offset *= max(1, int(round(profile.count_scale_px / floor_px)))
        return FloorCountAnswer(floors_visible=max(0, true_count + offset))

    def locate_building(self, world: WorldModel, pose: DronePose, cam: int,
                        noise: NoiseStream) -> PixelBox:
        building, _ = viewed_building(world, pose, cam, self.rig)
        try:
            return building_pixel_box(world, pose, cam, building, self.rig)
        except NotInViewError as e:
            raise NoBuildingInViewError(str(e)) from e

    # ------------------------------------------------------------------
    # Object recognition
    # ------------------------------------------------------------------

    def recognize_target(self, views: Dict[int, ViewObservation], target: RequestInterpretation,
                         noise: NoiseStream) -> RecognitionAnswer:
        wanted = target.target_object
        matches, decoys = [], []
        for cam in CAMERA_INDICES:
            observation = views.get(cam)
            if observation is None:
                continue
            for feature in observation.features:
                if feature.occluded_fraction >= self.occlusion_threshold:
                    continue
                # Decorations on a facade seen nearly edge-on are unreadable
                if feature.view_angle > self.max_view_angle_deg:
                    continue
                if wanted in feature.decorations:
                    matches.append((cam, feature))
                elif any(tag.color == wanted.color for tag in feature.decorations):
                    decoys.append((cam, feature))

        profile = noise.profile
        if decoys and noise.chance(profile.or_false_positive_rate):
            cam, feature = decoys[0]
            logger.debug(f"False positive on same-colour decoy {feature.window_id}")
            return RecognitionAnswer(True, feature.pixel_box, cam, feature.window_id)
        if matches:
            if noise.chance(profile.or_false_negative_rate):
                logger.debug("Target detection suppressed")
                return RecognitionAnswer.not_found()
            cam, feature = matches[0]
            return RecognitionAnswer(True, feature.pixel_box, cam, feature.window_id)
        return RecognitionAnswer.not_found()

    # ------------------------------------------------------------------
    # Direction choice
    # ------------------------------------------------------------------

    def choose_direction(self, view: MarkedView, distances: Sequence[float],
                         memory: ExplorationMemory, noise: NoiseStream) -> ChoiceAnswer:
        pose = view.pose
        scores = {}
        for index, (bearing, length) in enumerate(zip(view.bearings, distances), start=1):
            if length < self.deadlock_threshold:
                continue
            x = pose.x + length * math.cos(bearing)
            y = pose.y + length * math.sin(bearing)
            scores[index] = memory.unseen_length(x, y, bearing)
        if not scores:
            return ChoiceAnswer(point_index=CENTER_POINT)
        best = max(scores.values())
        for index in TIE_ORDER:
            if index in scores and scores[index] >= best - SCORE_TOL:
                return ChoiceAnswer(point_index=index)
        return ChoiceAnswer(point_index=CENTER_POINT)
