"""
VLD Navigation - Perception Backend Interface

Abstract boundary between navigation logic and whatever answers the model
roles: the ground-truth oracle, a remote chat-completion endpoint, or a
baseline that replaces one role with a fixed policy.
"""

from abc import ABC, abstractmethod
from typing import Dict, Sequence

from vldnav.perception.memory import ExplorationMemory
from vldnav.perception.noise import NoiseStream
from vldnav.perception.types import (
    ChoiceAnswer, FloorCountAnswer, MarkedView, RecognitionAnswer,
    RequestInterpretation, ViewObservation
)
from vldnav.world.types import DronePose, PixelBox, WorldModel

CENTER_POINT = 3


class PerceptionBackend(ABC):
    """
    The four model roles plus the building box query used by floor localization.

    Backends must:
        - Be deterministic given the same inputs and noise stream state
        - Keep no per-episode state (the noise stream and memory are passed in)
        - Never mutate their arguments
    """

    name = 'abstract'

    @abstractmethod
    def parse_request(self, request_text: str, truth: RequestInterpretation,
                      noise: NoiseStream) -> RequestInterpretation:
        """Extract the target floor and object description from a delivery request."""
        raise NotImplementedError

    @abstractmethod
    def count_floors(self, world: WorldModel, pose: DronePose, cam: int,
                     noise: NoiseStream) -> FloorCountAnswer:
        """Number of floors visible in one camera view."""
        raise NotImplementedError

    @abstractmethod
    def locate_building(self, world: WorldModel, pose: DronePose, cam: int,
                        noise: NoiseStream) -> PixelBox:
        """Bounding box of the building in view; NoBuildingInViewError when there is none."""
        raise NotImplementedError

    @abstractmethod
    def recognize_target(self, views: Dict[int, ViewObservation], target: RequestInterpretation,
                         noise: NoiseStream) -> RecognitionAnswer:
        """Search all five views for the window marked by the target object."""
        raise NotImplementedError

    @abstractmethod
    def choose_direction(self, view: MarkedView, distances: Sequence[float],
                         memory: ExplorationMemory, noise: NoiseStream) -> ChoiceAnswer:
        """Pick one of the five marked points to move toward."""
        raise NotImplementedError

    def health(self) -> bool:
        return True

    def shutdown(self) -> None:
        pass


class CenterOnlyBackend(PerceptionBackend):
    """Delegates every role except choice, which always returns the centre point."""

    name = 'center-only'

    def __init__(self, inner: PerceptionBackend):
        self.inner = inner

    def parse_request(self, request_text, truth, noise):
        return self.inner.parse_request(request_text, truth, noise)

    def count_floors(self, world, pose, cam, noise):
        return self.inner.count_floors(world, pose, cam, noise)

    def locate_building(self, world, pose, cam, noise):
        return self.inner.locate_building(world, pose, cam, noise)

    def recognize_target(self, views, target, noise):
        return self.inner.recognize_target(views, target, noise)

    def choose_direction(self, view, distances, memory, noise):
        return ChoiceAnswer(point_index=CENTER_POINT)

    def health(self) -> bool:
        return self.inner.health()

    def shutdown(self) -> None:
        self.inner.shutdown()
