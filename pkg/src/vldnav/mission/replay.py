"""
VLD Navigation - Trace Replay Module

Re-executes the actions recorded in an episode trace and re-derives the
episode outcome without any live mission state.
"""

import logging
from typing import Any, Dict, Optional

from vldnav.evaluation.tasks import TaskSpec
from vldnav.mission.types import EpisodeTrace, MissionPhase, Outcome
from vldnav.utils.error_handling import CollisionError, MalformedTraceError
from vldnav.world.kinematics import apply_action, check_success
from vldnav.world.types import Action, ActionKind, DronePose, WorldModel

logger = logging.getLogger('vldnav.mission.replay')


def _mission_settings(trace: EpisodeTrace, config: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    source = config or trace.header.get('config')
    if not source:
        raise MalformedTraceError(f"Trace {trace.task_id} carries no configuration")
    return {
        'safety_radius': float(source['mission']['safety_radius']),
        'success_radius': float(source['mission']['success_radius']),
        'standoff': float(source['mission']['standoff']),
        'l_max': float(source['explore']['l_max']),
    }


def replay(trace: EpisodeTrace, world: WorldModel, config: Optional[Dict[str, Any]] = None) -> DronePose:
    """Final pose after re-applying every executed action from the start pose."""
    settings = _mission_settings(trace, config)
    pose = DronePose.from_dict(trace.header['start_pose'])
    for data in trace.executed_actions():
        action = Action.from_dict(data)
        try:
            pose = apply_action(world, pose, action, settings['safety_radius'], settings['l_max'])
        except CollisionError as e:
            raise MalformedTraceError(f"Trace {trace.task_id}: recorded action collides on replay: {e}") from e
    return pose


def delivered_window(trace: EpisodeTrace) -> Optional[str]:
    """Window the recognition in the stopping step attributed the delivery to."""
    for record in reversed(trace.records):
        if record.get('actions'):
            return (record.get('recognition') or {}).get('window_id')
    return None


def classify_outcome(trace: EpisodeTrace, task: TaskSpec, world: WorldModel,
                     config: Optional[Dict[str, Any]] = None) -> Outcome:
    """
    Outcome recomputed from the recorded actions alone.

    A rejected action or a collision during the ascent means collision, an
    aborted ascent means floorloc_abort, a final stop succeeds only at the
    recognised target window and inside the success sphere of the replayed
    pose, and anything else ran out of steps.
    """
    if not trace.complete:
        raise MalformedTraceError(f"Trace {trace.task_id} is truncated (no footer)")
    if trace.task_id != task.task_id:
        raise MalformedTraceError(f"Trace {trace.task_id} does not belong to task {task.task_id}")

    settings = _mission_settings(trace, config)
    entries = [entry for record in trace.records for entry in record.get('actions', [])]
    if any(not entry.get('executed') for entry in entries):
        return Outcome.COLLISION
    for record in trace.records:
        if record.get('phase') == MissionPhase.ASCEND.value and record.get('error'):
            kind = record['error'].get('kind')
            if kind == 'collision':
                return Outcome.COLLISION
            if kind == 'abort':
                return Outcome.FLOORLOC_ABORT
            raise MalformedTraceError(f"Trace {trace.task_id}: unknown ascent error kind {kind!r}")

    final_pose = replay(trace, world, config)
    if entries and entries[-1]['action']['kind'] == ActionKind.STOP.value:
        target = world.window(task.target_window_id)
        at_target = check_success(final_pose, world, target, settings['success_radius'], settings['standoff'])
        if at_target and delivered_window(trace) == task.target_window_id:
            return Outcome.SUCCESS
        return Outcome.MISDELIVERY
    return Outcome.BUDGET_EXHAUSTED


def verify_trace(trace: EpisodeTrace, task: TaskSpec, world: WorldModel,
                 config: Optional[Dict[str, Any]] = None, tolerance: float = 1e-9) -> bool:
    """True when the recomputed outcome and replayed pose match the footer."""
    outcome = classify_outcome(trace, task, world, config)
    if outcome != trace.outcome:
        logger.warning(f"{trace.task_id}: recorded {trace.outcome.value}, recomputed {outcome.value}")
        return False
    pose = replay(trace, world, config)
    recorded = trace.final_pose
    if pose.distance_to(recorded.position) > tolerance:
        logger.warning(f"{trace.task_id}: replayed pose differs from the recorded final pose")
        return False
    return True
