"""
VLD Navigation - Perception Package

Model-role backends (oracle, remote), noise profiles and exploration memory.
"""

from typing import Dict, Optional

from vldnav.world.types import CameraRig
from .types import (
    ChoiceAnswer, FloorCountAnswer, MarkedView, NoiseProfile, NOISE_PRESETS,
    RecognitionAnswer, RequestInterpretation, ViewObservation
)
from .noise import NoiseStream
from .memory import ExplorationMemory
from .base import CenterOnlyBackend, PerceptionBackend
from .oracle import OracleBackend
from .remote import RemoteBackend, RemoteClient


def create_backend(config: Dict, rig: Optional[CameraRig] = None) -> PerceptionBackend:
    """Backend selected by perception.backend, wrapped for the center-only choice ablation."""
    rig = rig or CameraRig.from_config(config)
    if config['perception']['backend'] == 'remote':
        backend = RemoteBackend.from_config(config, rig)
    else:
        backend = OracleBackend.from_config(config, rig)
    if config['explore']['choice'] == 'center-only':
        backend = CenterOnlyBackend(backend)
    return backend


__all__ = [
    'ChoiceAnswer', 'FloorCountAnswer', 'MarkedView', 'NoiseProfile', 'NOISE_PRESETS',
    'RecognitionAnswer', 'RequestInterpretation', 'ViewObservation', 'NoiseStream',
    'ExplorationMemory', 'CenterOnlyBackend', 'PerceptionBackend', 'OracleBackend',
    'RemoteBackend', 'RemoteClient', 'create_backend'
]
