"""
VLD Navigation - Mission Package

Episode state machine, trace format and replay.
"""

from .types import EpisodeTrace, MissionPhase, MissionState, Outcome, TRACE_SCHEMA
from .orchestrator import MissionOrchestrator, noise_profile_from_config, redacted_config
from .replay import classify_outcome, replay, verify_trace

__all__ = [
    'EpisodeTrace', 'MissionPhase', 'MissionState', 'Outcome', 'TRACE_SCHEMA',
    'MissionOrchestrator', 'noise_profile_from_config', 'redacted_config',
    'classify_outcome', 'replay', 'verify_trace'
]
