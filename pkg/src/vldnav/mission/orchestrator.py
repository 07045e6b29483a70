"""
VLD Navigation - Mission Orchestrator

This module runs one delivery episode end to end: request understanding,
floor localization, then alternating exploration and approach steps under the
step budget. Every failure mode becomes an outcome in the returned trace;
only system errors (configuration, transport, malformed replies to the
request role) escape.
"""

import copy
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from vldnav.evaluation.tasks import TaskSpec
from vldnav.mission.types import EpisodeTrace, MissionPhase, MissionState, Outcome
from vldnav.navigation.exploration import (
    approach_target, build_marked_view, corridor_distance, crop_depth, decide_action, obstacle_points,
    safe_distance, select_viewpoint, slice_means
)
from vldnav.navigation.floor_localization import (
    FloorLocResult, direct_count_height, localize_floor, target_height
)
from vldnav.perception.base import PerceptionBackend
from vldnav.perception.memory import ExplorationMemory
from vldnav.perception.noise import NoiseStream
from vldnav.perception.types import NoiseProfile, RecognitionAnswer, RequestInterpretation, ViewObservation
from vldnav.utils.common import derive_seed
from vldnav.utils.error_handling import (
    CollisionError, EmptyCropError, FloorLocAbortError, OvershootError
)
from vldnav.world.camera import render_depth, visible_features
from vldnav.world.kinematics import apply_action, check_success
from vldnav.world.types import (
    CAMERA_INDICES, Action, ActionKind, CameraRig, DepthImage, PixelBox, WorldModel
)

REDACTED = '***'


def noise_profile_from_config(config: Dict[str, Any]) -> NoiseProfile:
    """Preset name or inline profile mapping, seeded from the root seed."""
    noise = config['perception'].get('noise', 'none')
    profile = NoiseProfile.from_dict(noise) if isinstance(noise, dict) else NoiseProfile.preset(noise)
    return profile.with_seed(int(config['seed']))


def redacted_config(config: Dict[str, Any]) -> Dict[str, Any]:
    """Effective configuration for output headers, with the endpoint token hidden."""
    clean = copy.deepcopy(config)
    remote = clean.get('remote', {})
    if remote.get('token'):
        remote['token'] = REDACTED
    return clean


@dataclass
class Episode:
    """Per-episode working set; nothing here is shared between episodes."""
    task: TaskSpec
    world: WorldModel
    state: MissionState
    noise: NoiseStream
    rng: np.random.Generator
    memory: ExplorationMemory
    records: List[Dict[str, Any]] = field(default_factory=list)
    claims: List[Dict[str, Any]] = field(default_factory=list)
    bbox_buil: Optional[PixelBox] = None
    delivered_window_id: Optional[str] = None
    floorloc: Dict[str, Any] = field(default_factory=dict)


class MissionOrchestrator:
    """
    Episode state machine over the perception backend.

    Floor localization runs outside the step budget; each exploration or
    approach iteration that captures images and queries the backend uses
    one step.
    """

    def __init__(self, config: Dict[str, Any], backend: PerceptionBackend, rig: Optional[CameraRig] = None):
        self.logger = logging.getLogger('vldnav.mission.orchestrator')
        self.config = config
        self.backend = backend
        self.rig = rig or CameraRig.from_config(config)
        self.profile = noise_profile_from_config(config)

        mission = config['mission']
        self.step_budget = int(mission['step_budget'])
        self.standoff = float(mission['standoff'])
        self.success_radius = float(mission['success_radius'])
        self.safety_radius = float(mission['safety_radius'])
        self.explore = config['explore']
        self.corridor_clearance = self.safety_radius + float(self.explore['corridor_margin'])
        self.approach_clearance = float(self.explore['approach_clearance'])

        # Phase router
        self.phase_routes = {
            MissionPhase.UNDERSTAND: self._handle_understand,
            MissionPhase.ASCEND: self._handle_ascend,
            MissionPhase.EXPLORE: self._handle_explore,
            MissionPhase.APPROACH: self._handle_approach,
        }

    # ------------------------------------------------------------------
    # Episode driver
    # ------------------------------------------------------------------

    def run_episode(self, task: TaskSpec, world: WorldModel) -> EpisodeTrace:
        """Run one task to an outcome and return its complete trace."""
        task.validate(world)
        episode = Episode(
            task=task,
            world=world,
            state=MissionState(MissionPhase.UNDERSTAND, task.start_pose, self.step_budget),
            noise=NoiseStream.for_episode(self.profile, task.task_id),
            rng=np.random.default_rng(derive_seed(int(self.config['seed']), f"viewpoint:{task.task_id}")),
            memory=ExplorationMemory(world, self.config['perception']['facade_sample_spacing'],
                                     self.rig.max_range),
        )
        self.logger.info(f"{task.task_id}: start at {task.start_pose.to_dict()}, "
                         f"target {task.target_window_id} ({task.difficulty})")

        state = episode.state
        while state.phase not in (MissionPhase.DONE, MissionPhase.FAILED):
            if state.phase in (MissionPhase.EXPLORE, MissionPhase.APPROACH) and state.budget_left <= 0:
                self._finish(episode, Outcome.BUDGET_EXHAUSTED)
                break
            self.phase_routes[state.phase](episode)

        self.logger.info(f"{task.task_id}: {state.outcome.value} after {state.step} steps, "
                         f"path {state.path_length:.1f} m + {state.vertical_length:.1f} m vertical")
        return EpisodeTrace(header=self._header(episode), records=episode.records, footer=self._footer(episode))

    def _finish(self, episode: Episode, outcome: Outcome):
        state = episode.state
        state.outcome = outcome
        state.transition(MissionPhase.DONE if outcome == Outcome.SUCCESS else MissionPhase.FAILED)

    # ------------------------------------------------------------------
    # Action execution
    # ------------------------------------------------------------------

    def _account(self, state: MissionState, action: Action):
        if action.kind == ActionKind.TRANSLATE:
            state.path_length += action.distance
        elif action.kind in (ActionKind.ASCEND, ActionKind.APPROACH) and action.altitude is not None:
            state.vertical_length += abs(action.altitude - state.pose.z)

    def _execute(self, episode: Episode, action: Action, entries: List[Dict[str, Any]]) -> bool:
        """Execute one action, logging it into `entries`; False when it ended the episode in a collision."""
        state = episode.state
        try:
            pose = apply_action(episode.world, state.pose, action, self.safety_radius,
                                float(self.explore['l_max']))
        except CollisionError as e:
            self.logger.warning(f"{episode.task.task_id}: collision: {e}")
            entries.append({'action': action.to_dict(), 'executed': False})
            self._finish(episode, Outcome.COLLISION)
            return False
        self._account(state, action)
        state.pose = pose
        entries.append({'action': action.to_dict(), 'executed': True})
        return True

    def _replay_partial(self, episode: Episode, actions: List[Action], entries: List[Dict[str, Any]]):
        """Re-apply actions executed inside floor localization, updating pose and path."""
        state = episode.state
        for action in actions:
            self._account(state, action)
            state.pose = apply_action(episode.world, state.pose, action, self.safety_radius,
                                      float(self.explore['l_max']))
            entries.append({'action': action.to_dict(), 'executed': True})

    # ------------------------------------------------------------------
    # Phase handlers
    # ------------------------------------------------------------------

    def _handle_understand(self, episode: Episode):
        task = episode.task
        truth = RequestInterpretation(task.target_floor, task.target_object)
        interpretation = self.backend.parse_request(task.request_text, truth, episode.noise)
        episode.state.interpretation = interpretation
        self.logger.debug(f"{task.task_id}: F_tar={interpretation.target_floor}, "
                          f"D_tar='{interpretation.target_object.describe()}'")
        episode.records.append({
            'step': 0, 'phase': MissionPhase.UNDERSTAND.value,
            'interpretation': interpretation.to_dict(), 'actions': [],
        })
        episode.state.transition(MissionPhase.ASCEND)

    def _handle_ascend(self, episode: Episode):
        state = episode.state
        method = self.config['floorloc']['method']
        floorloc = self.config['floorloc']
        entries: List[Dict[str, Any]] = []
        record = {'step': 0, 'phase': MissionPhase.ASCEND.value, 'method': method, 'actions': entries}
        episode.records.append(record)
        episode.floorloc = {'method': method, 'queries_used': 0, 'overshoot': False,
                            'aborted': False, 'h_final': None}

        result: Optional[FloorLocResult] = None
        try:
            if method == 'direct-count':
                result = direct_count_height(
                    episode.world, state.pose, state.interpretation, self.backend, episode.noise, self.rig,
                    max_retreats=floorloc['max_retreats'], l_max=self.explore['l_max'],
                    safety_radius=self.safety_radius,
                )
            else:
                result = localize_floor(
                    episode.world, state.pose, state.interpretation, self.backend, episode.noise, self.rig,
                    max_refusals=floorloc['max_refusals'], max_waypoints=floorloc['max_waypoints'],
                    safety_radius=self.safety_radius,
                )
        except OvershootError as e:
            result = e.result
            episode.floorloc['overshoot'] = True
            self.logger.warning(f"{episode.task.task_id}: {e}")
        except FloorLocAbortError as e:
            self._replay_partial(episode, e.actions, entries)
            episode.floorloc.update(aborted=True, queries_used=e.queries_used)
            record['error'] = {'kind': 'abort', 'message': str(e)}
            self.logger.warning(f"{episode.task.task_id}: floor localization aborted: {e}")
            self._finish(episode, Outcome.FLOORLOC_ABORT)
            return
        except CollisionError as e:
            self._replay_partial(episode, e.actions, entries)
            record['error'] = {'kind': 'collision', 'message': str(e)}
            self.logger.warning(f"{episode.task.task_id}: collision during floor localization: {e}")
            self._finish(episode, Outcome.COLLISION)
            return

        self._replay_partial(episode, result.actions, entries)
        state.floor_result = result
        episode.bbox_buil = result.bbox_buil
        episode.floorloc.update(queries_used=result.queries_used, h_final=result.h_final)
        record['floorloc'] = result.to_dict()
        state.transition(MissionPhase.EXPLORE)

    def _observe(self, episode: Episode) -> Dict[int, ViewObservation]:
        """Capture all five views at the current pose and update the exploration memory."""
        pose = episode.state.pose
        views = {}
        for cam in CAMERA_INDICES:
            depth = render_depth(episode.world, pose, cam, self.rig)
            views[cam] = ViewObservation(cam, depth, tuple(visible_features(episode.world, pose, cam, self.rig)))
        episode.memory.observe(pose.x, pose.y, pose.yaw)
        return views

    def _begin_step(self, episode: Episode, phase: MissionPhase) -> Dict[str, Any]:
        state = episode.state
        state.step += 1
        record = {'step': state.step, 'phase': phase.value, 'pose': state.pose.to_dict(), 'actions': []}
        episode.records.append(record)
        return record

    def _recognize(self, episode: Episode, views: Dict[int, ViewObservation],
                   record: Dict[str, Any]) -> RecognitionAnswer:
        answer = self.backend.recognize_target(views, episode.state.interpretation, episode.noise)
        record['recognition'] = answer.to_dict()
        return answer

    def _crop(self, episode: Episode, depth: DepthImage) -> DepthImage:
        box = episode.bbox_buil
        if box is None:
            return depth
        try:
            return crop_depth(depth, box)
        except EmptyCropError:
            return depth

    def _handle_explore(self, episode: Episode):
        state = episode.state
        record = self._begin_step(episode, MissionPhase.EXPLORE)
        views = self._observe(episode)

        answer = self._recognize(episode, views, record)
        if answer.found:
            correct = answer.window_id == episode.task.target_window_id
            episode.claims.append({'step': state.step, 'window_id': answer.window_id, 'correct': correct})
            self.logger.info(f"{episode.task.task_id}: step {state.step}: target claimed in view "
                             f"{answer.view} ({'correct' if correct else 'wrong window'})")
            state.transition(MissionPhase.APPROACH)
            self._approach(episode, answer, views, record)
            return

        explore = self.explore
        profiles = {
            cam: slice_means(self._crop(episode, view.depth), int(explore['slices']), cam)
            for cam, view in views.items()
        }
        choice = select_viewpoint(
            profiles, delta=explore['delta'], d_max=explore['d_max'],
            overflow_fraction=explore['overflow_fraction'], max_escalations=explore['max_escalations'],
            strategy=explore['viewpoint'], rng=episode.rng,
        )
        depth = views[choice.view].depth
        marked = build_marked_view(depth, self.rig, state.pose, choice.view, choice.split)
        points = obstacle_points({cam: view.depth for cam, view in views.items()}, self.rig, state.pose)
        origin = (state.pose.x, state.pose.y)
        distances = [
            min(safe_distance(depth, column, marked.row, explore['l_max'], self.safety_radius),
                corridor_distance(points, origin, bearing, explore['l_max'], self.corridor_clearance))
            for column, bearing in zip(marked.columns, marked.bearings)
        ]
        action, point = decide_action(self.backend, marked, distances, episode.memory, episode.noise,
                                      explore['deadlock_threshold'])
        record.update(viewpoint=choice.to_dict(), marks=marked.to_dict(), distances=distances,
                      choice=point.to_dict())
        self.logger.debug(f"{episode.task.task_id}: step {state.step}: view {choice.view}, "
                          f"point {point.point_index}, {action.kind.value}")
        self._execute(episode, action, record['actions'])
        record['pose_after'] = state.pose.to_dict()

    def _handle_approach(self, episode: Episode):
        state = episode.state
        record = self._begin_step(episode, MissionPhase.APPROACH)
        views = self._observe(episode)
        answer = self._recognize(episode, views, record)
        if not answer.found:
            self.logger.info(f"{episode.task.task_id}: step {state.step}: target lost; exploring")
            state.transition(MissionPhase.EXPLORE)
            record['pose_after'] = state.pose.to_dict()
            return
        self._approach(episode, answer, views, record)

    def _approach(self, episode: Episode, answer: RecognitionAnswer,
                  views: Dict[int, ViewObservation], record: Dict[str, Any]):
        """Execute one approach plan; STOP ends the episode."""
        state = episode.state
        explore = self.explore
        plan = approach_target(
            answer, views[answer.view].depth, state.pose, self.rig, standoff=self.standoff,
            l_max=explore['l_max'], align_tolerance_deg=explore['align_tolerance_deg'],
            align_tolerance_m=explore['align_tolerance_m'], replan_distance=explore['replan_distance'],
        )
        record['plan'] = [a.to_dict() for a in plan]
        points = obstacle_points({cam: view.depth for cam, view in views.items()}, self.rig, state.pose)
        for action in plan:
            if action.kind == ActionKind.STOP:
                record['actions'].append({'action': action.to_dict(), 'executed': True})
                self._deliver(episode, answer)
                break
            if action.kind == ActionKind.TRANSLATE:
                pose = state.pose
                allowed = corridor_distance(points, (pose.x, pose.y), action.bearing, action.distance,
                                            self.approach_clearance)
                if allowed < action.distance - 1e-9:
                    # Plan is stale once a leg is cut short; re-plan next step
                    self.logger.debug(f"{episode.task.task_id}: approach leg cut from "
                                      f"{action.distance:.2f} m to {allowed:.2f} m")
                    record['capped'] = {'planned': action.distance, 'allowed': allowed}
                    if allowed > 1e-9:
                        self._execute(episode, Action(ActionKind.TRANSLATE, bearing=action.bearing,
                                                      distance=allowed), record['actions'])
                    break
            if not self._execute(episode, action, record['actions']):
                break
        record['pose_after'] = state.pose.to_dict()

    def _deliver(self, episode: Episode, answer: RecognitionAnswer):
        task, world = episode.task, episode.world
        episode.delivered_window_id = answer.window_id
        target = world.window(task.target_window_id)
        at_target = check_success(episode.state.pose, world, target, self.success_radius, self.standoff)
        if answer.window_id == task.target_window_id and at_target:
            self._finish(episode, Outcome.SUCCESS)
        else:
            where = "off the standoff point" if answer.window_id == task.target_window_id else "not the target"
            self.logger.info(f"{task.task_id}: stopped at {answer.window_id}, {where}")
            self._finish(episode, Outcome.MISDELIVERY)

    # ------------------------------------------------------------------
    # Trace assembly
    # ------------------------------------------------------------------

    def _header(self, episode: Episode) -> Dict[str, Any]:
        task = episode.task
        return {
            'task_id': task.task_id,
            'target_window_id': task.target_window_id,
            'world_ref': task.world_ref,
            'start_pose': task.start_pose.to_dict(),
            'task': task.to_dict(),
            'backend': self.backend.name,
            'noise': self.profile.to_dict(),
            'config': redacted_config(self.config),
        }

    def _footer(self, episode: Episode) -> Dict[str, Any]:
        state, task = episode.state, episode.task
        building = episode.world.building_of(task.target_window_id)
        return {
            'outcome': state.outcome.value,
            'steps_used': state.step,
            'path_length': state.path_length,
            'vertical_length': state.vertical_length,
            'final_pose': state.pose.to_dict(),
            'h_final': episode.floorloc.get('h_final'),
            'h_tar_true': target_height(task.target_floor, building.floor_height),
            'floorloc': episode.floorloc,
            'claims': episode.claims,
            'delivered_window_id': episode.delivered_window_id,
            'seen_facade_fraction': (episode.memory.seen_length / episode.memory.total_length
                                     if episode.memory.total_length else 0.0),
        }
