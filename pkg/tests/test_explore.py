#!/usr/bin/env python3
# tests/test_explore.py

import math
from fractions import Fraction

import numpy as np

# Import base test class
from test_base import BaseTest, FACING_NORTH, GREEN_POT, expect_raises, south_window, square_world

from vldnav.navigation import (
    SliceProfile, approach_target, corridor_distance, crop_depth, decide_action, facade_line, find_split,
    mark_points, obstacle_points, safe_distance, select_viewpoint, slice_means
)
from vldnav.navigation.exploration import build_marked_view, mark_bearings, slice_groups
from vldnav.perception import (
    ChoiceAnswer, ExplorationMemory, NoiseProfile, NoiseStream, PerceptionBackend, RecognitionAnswer
)
from vldnav.utils.error_handling import EmptyCropError
from vldnav.world.camera import render_depth, visible_features
from vldnav.world.kinematics import apply_action
from vldnav.world.types import RIGHT_CAMERA, ActionKind, CameraRig, DepthImage, DronePose


class FixedChoiceBackend(PerceptionBackend):
    """Answers only the choice role, always with the same answer."""

    name = 'fixed-choice'

    def __init__(self, answer):
        self.answer = answer

    def parse_request(self, request_text, truth, noise):
        return truth

    def count_floors(self, world, pose, cam, noise):
        raise NotImplementedError

    def locate_building(self, world, pose, cam, noise):
        raise NotImplementedError

    def recognize_target(self, views, target, noise):
        return RecognitionAnswer.not_found()

    def choose_direction(self, view, distances, memory, noise):
        return self.answer


def flat_depth(value, size=128):
    return DepthImage(data=np.full((size, size), float(value)), max_range=80.0)


def reference_split(means, delta, d_max, overflow=Fraction(1, 5)):
    """Exact-arithmetic split search over integer slice means; returns (j*, objective)."""
    x = len(means)
    best_j, best_obj = None, None
    for j in range(1, x):
        left = [Fraction(m) for m in means[:j]]
        right = [Fraction(m) for m in means[j:]]
        ml, mr = sum(left) / len(left), sum(right) / len(right)
        if ml - mr < delta:
            continue
        allowance = math.ceil(overflow * len(right))
        if sum(1 for m in right if m > d_max) > allowance:
            continue
        objective = (sum((v - ml) ** 2 for v in left) / len(left)
                     + sum((v - mr) ** 2 for v in right) / len(right))
        if best_obj is None or objective < best_obj:
            best_j, best_obj = j, objective
    return best_j, best_obj


class TestExploration(BaseTest):
    """Tests for slicing, split search, viewpoint selection, choice and approach."""

    component_name = "explore"

    def test_crop_depth(self):
        depth = DepthImage(data=np.arange(64, dtype=float).reshape(8, 8), max_range=80.0)
        cropped = crop_depth(depth, (0, 7, 2, 5))
        assert cropped.data.shape == (4, 8) and cropped.data[0, 0] == 16.0
        expect_raises(EmptyCropError, crop_depth, depth, (0, 7, 3, 3))
        expect_raises(ValueError, crop_depth, depth, (0, 7, 2, 8))

    def test_slices(self):
        groups = slice_groups(128, 20)
        assert len(groups) == 20 and groups[0] == (0, 7) and groups[-1] == (122, 128)
        assert sum(stop - start for start, stop in groups) == 128
        expect_raises(ValueError, slice_groups, 10, 20)
        data = np.tile(np.linspace(40.0, 2.0, 128), (16, 1))
        profile = slice_means(DepthImage(data=data, max_range=80.0), 20, view=2)
        assert profile.view == 2 and profile.x == 20
        assert all(a > b for a, b in zip(profile.means, profile.means[1:]))

    def test_split_on_step_profile(self):
        profile = SliceProfile(view=1, means=(30.0,) * 10 + (10.0,) * 10)
        split = find_split(profile, delta=5.0, d_max=40.0)
        assert split.j_star == 10 and split.objective == 0.0
        flat = find_split(SliceProfile(view=1, means=(12.0,) * 20), delta=5.0, d_max=40.0)
        assert not flat.valid and flat.objective is None
        expect_raises(ValueError, find_split, SliceProfile(view=1, means=(1.0,)), 5.0, 40.0)

    def test_split_overflow(self):
        profile = SliceProfile(view=1, means=(75.0,) * 10 + (50.0,) * 9 + (70.0,))
        assert not find_split(profile, 5.0, 40.0).valid, "Right partition beyond d_max"
        assert find_split(profile, 5.0, 80.0).j_star == 10
        one_far = SliceProfile(view=1, means=(60.0,) * 5 + (45.0,) + (10.0,) * 4)
        assert find_split(one_far, 5.0, 40.0, overflow_fraction=0.2).valid
        assert find_split(one_far, 5.0, 40.0, overflow_fraction=0.0).j_star == 6

    def test_split_matches_exact_search(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            x = int(rng.integers(2, 9))
            means = [int(v) for v in rng.integers(0, 61, size=x)]
            delta = int(rng.integers(1, 16))
            d_max = int(rng.integers(20, 61))
            found = find_split(SliceProfile(view=1, means=tuple(float(m) for m in means)), delta, d_max, 0.2)
            expected, _ = reference_split(means, delta, d_max)
            assert found.j_star == expected, f"{means} delta={delta} d_max={d_max}: {found.j_star} != {expected}"

    def test_split_matches_exact_search_wide(self):
        rng = np.random.default_rng(1)
        valid = 0
        for _ in range(10000):
            means = [int(v) for v in rng.integers(0, 81, size=20)]
            delta = int(rng.integers(1, 16))
            d_max = int(rng.integers(20, 61))
            found = find_split(SliceProfile(view=1, means=tuple(float(m) for m in means)), delta, d_max, 0.2)
            expected_j, expected_obj = reference_split(means, delta, d_max)
            assert found.j_star == expected_j, f"{means} delta={delta} d_max={d_max}: {found.j_star} != {expected_j}"
            assert found.valid == (expected_j is not None)
            if expected_j is not None:
                valid += 1
                assert math.isclose(found.objective, float(expected_obj), rel_tol=1e-9, abs_tol=1e-9)
        assert valid > 1000, "The fuzz should exercise valid splits, not only rejections"

    def test_viewpoint_prefers_rightmost_split(self):
        profiles = {
            1: SliceProfile(1, (30.0,) * 5 + (10.0,) * 15),
            2: SliceProfile(2, (30.0,) * 12 + (10.0,) * 8),
            3: SliceProfile(3, (12.0,) * 20),
            4: SliceProfile(4, (30.0,) * 12 + (10.0,) * 8),
            5: SliceProfile(5, (80.0,) * 20),
        }
        choice = select_viewpoint(profiles)
        assert choice.view == 2 and choice.split.j_star == 12, "Ties follow the rig order"
        assert choice.escalations == 0 and not choice.fallback
        assert set(choice.splits) == {1, 2, 3, 4, 5}

    def test_viewpoint_escalation_and_fallback(self):
        far = {v: SliceProfile(v, (75.0,) * 10 + (50.0,) * 9 + (70.0,)) for v in (1, 2, 3, 4, 5)}
        escalated = select_viewpoint(far, delta=5.0, d_max=40.0)
        assert escalated.escalations == 1 and escalated.d_max == 80.0 and escalated.split.j_star == 10
        flat = {v: SliceProfile(v, (20.0,) * 20) for v in (1, 2, 3, 4, 5)}
        fallback = select_viewpoint(flat)
        assert fallback.view == RIGHT_CAMERA and fallback.fallback and fallback.escalations == 2

    def test_viewpoint_baselines(self):
        profiles = {v: SliceProfile(v, (30.0,) * 10 + (10.0,) * 10) for v in (1, 2, 3, 4, 5)}
        assert select_viewpoint(profiles, strategy='default').view == RIGHT_CAMERA
        expect_raises(ValueError, select_viewpoint, profiles, strategy='random')
        picks = {select_viewpoint(profiles, strategy='random', rng=np.random.default_rng(s)).view for s in range(40)}
        assert picks <= {1, 2, 3, 4, 5} and len(picks) > 1
        expect_raises(ValueError, select_viewpoint, profiles, strategy='spiral')

    def test_mark_points(self):
        assert mark_points(120) == ((20, 40, 60, 80, 100), 60)
        assert mark_points(128, 96) == ((21, 43, 64, 85, 107), 48)
        expect_raises(ValueError, mark_points, 4)

    def test_mark_bearings(self):
        rig = CameraRig()
        bearings = mark_bearings(rig, DronePose(0.0, 0.0, 5.0, 0.0), 3)
        assert math.isclose(bearings[2], -math.pi / 2.0)
        assert bearings[0] > bearings[2] > bearings[4], "Marks run left to right"

    def test_safe_distance(self):
        assert safe_distance(flat_depth(5.0), 64, 64) == 4.5
        assert safe_distance(flat_depth(80.0), 64, 64, l_max=10.0) == 10.0
        assert safe_distance(flat_depth(0.2), 64, 64) == 0.0

    def test_decide_action(self):
        world = square_world()
        rig = CameraRig()
        pose = DronePose(0.0, -20.0, 7.5, FACING_NORTH)
        depth = flat_depth(20.0)
        view = build_marked_view(depth, rig, pose, 1, find_split(slice_means(depth), 5.0, 40.0))
        memory = ExplorationMemory(world)
        noise = NoiseStream(NoiseProfile())
        distances = [safe_distance(depth, c, view.row) for c in view.columns]

        action, answer = decide_action(FixedChoiceBackend(ChoiceAnswer(point_index=2)), view, distances, memory, noise)
        assert action.kind == ActionKind.TRANSLATE and action.distance == 10.0
        assert math.isclose(action.bearing, view.bearings[1]) and answer.point_index == 2

        refused, _ = decide_action(FixedChoiceBackend(ChoiceAnswer.refusal()), view, distances, memory, noise)
        assert refused.kind == ActionKind.ROTATE_LEFT_30
        blocked = [10.0, 0.5, 10.0, 10.0, 10.0]
        stuck, _ = decide_action(FixedChoiceBackend(ChoiceAnswer(point_index=2)), view, blocked, memory, noise)
        assert stuck.kind == ActionKind.ROTATE_LEFT_30, "Below the deadlock threshold the drone rotates"

    def test_approach_aligned(self):
        rig = CameraRig()
        pose = DronePose(0.0, 0.0, 5.0, FACING_NORTH)
        centred = RecognitionAnswer(True, (63, 64, 63, 64), 1)
        plan = approach_target(centred, flat_depth(9.0), pose, rig)
        assert [a.kind for a in plan] == [ActionKind.TRANSLATE, ActionKind.STOP]
        assert math.isclose(plan[0].distance, 7.5) and math.isclose(plan[0].bearing, FACING_NORTH)
        assert approach_target(centred, flat_depth(1.0), pose, rig)[0].kind == ActionKind.STOP

    def test_approach_far_window_replans(self):
        rig = CameraRig()
        pose = DronePose(0.0, 0.0, 5.0, FACING_NORTH)
        centred = RecognitionAnswer(True, (63, 64, 63, 64), 1)
        far = approach_target(centred, flat_depth(25.0), pose, rig)
        assert [a.kind for a in far] == [ActionKind.TRANSLATE], "One leg, then recognise again"
        assert math.isclose(far[0].distance, 10.0)
        whole = approach_target(centred, flat_depth(25.0), pose, rig, replan_distance=30.0)
        assert [a.kind for a in whole] == [ActionKind.TRANSLATE] * 3 + [ActionKind.STOP]
        assert np.allclose([a.distance for a in whole[:-1]], [10.0, 10.0, 3.5])

    def test_approach_oblique_window(self):
        window = south_window(0.0, 3, GREEN_POT)
        world = square_world([window])
        rig = CameraRig()
        pose = DronePose(-6.0, -16.0, 7.5, math.atan2(6.0, 6.0))
        feature = visible_features(world, pose, 1, rig)[0]
        answer = RecognitionAnswer(True, feature.pixel_box, 1, feature.window_id)
        plan = approach_target(answer, render_depth(world, pose, 1, rig), pose, rig)
        assert [a.kind for a in plan] == [ActionKind.TRANSLATE, ActionKind.APPROACH, ActionKind.STOP]
        assert math.isclose(plan[1].bearing, FACING_NORTH, abs_tol=1e-6), "Ends facing the wall"
        for action in plan[:-1]:
            pose = apply_action(world, pose, action)
        assert math.hypot(pose.x - 0.0, pose.y + 11.5) < 0.2, f"Stopped at {pose.to_dict()}"

    def test_approach_backs_off_a_close_wall(self):
        window = south_window(0.0, 3, GREEN_POT)
        world = square_world([window])
        rig = CameraRig()
        pose = DronePose(-5.0, -10.9, 7.5, math.atan2(0.9, 5.0))
        feature = visible_features(world, pose, 1, rig)[0]
        answer = RecognitionAnswer(True, feature.pixel_box, 1, feature.window_id)
        plan = approach_target(answer, render_depth(world, pose, 1, rig), pose, rig)
        assert [a.kind for a in plan] == [
            ActionKind.TRANSLATE, ActionKind.TRANSLATE, ActionKind.APPROACH, ActionKind.STOP
        ]
        assert math.isclose(plan[0].bearing, -FACING_NORTH, abs_tol=1e-6), "First leg moves away from the wall"
        assert math.isclose(plan[0].distance, 0.6, abs_tol=1e-6)
        for action in plan[:-1]:
            pose = apply_action(world, pose, action)
        assert math.hypot(pose.x - 0.0, pose.y + 11.5) < 0.2, f"Stopped at {pose.to_dict()}"

    def test_corridor_distance(self):
        ahead = np.array([[0.0, 10.0]])
        assert math.isclose(corridor_distance(ahead, (0.0, 0.0), FACING_NORTH, 20.0, 0.75), 9.25)
        assert corridor_distance(ahead, (0.0, 0.0), FACING_NORTH, 5.0, 0.75) == 5.0
        offset = np.array([[0.5, 10.0]])
        assert math.isclose(corridor_distance(offset, (0.0, 0.0), FACING_NORTH, 20.0, 0.75),
                            10.0 - math.sqrt(0.75 ** 2 - 0.5 ** 2))
        beside = np.array([[1.0, 5.0], [0.0, -3.0]])
        assert corridor_distance(beside, (0.0, 0.0), FACING_NORTH, 10.0, 0.75) == 10.0
        touching = np.array([[0.3, 0.2]])
        assert corridor_distance(touching, (0.0, 0.0), FACING_NORTH, 10.0, 0.75) == 0.0
        assert corridor_distance(np.zeros((0, 2)), (0.0, 0.0), 0.0, 10.0, 0.75) == 10.0

    def test_obstacle_points(self):
        rig = CameraRig()
        pose = DronePose(0.0, 0.0, 5.0, FACING_NORTH)
        points = obstacle_points({1: flat_depth(10.0), 2: flat_depth(80.0)}, rig, pose)
        assert points.shape == (256, 2), "Two rows of the front view; open sky adds nothing"
        assert np.allclose(points[:, 1], 10.0)
        assert math.isclose(points[:, 0].max(), 10.0 * 63.5 / 64.0)

    def test_facade_line(self):
        rig = CameraRig()
        pose = DronePose(0.0, 0.0, 5.0, FACING_NORTH)
        line = facade_line(flat_depth(9.0), rig, pose, 1, (63, 64, 63, 64), 64)
        assert line.support == 18, "Box columns widened by eight on each side"
        nx, ny = line.normal_towards(pose.x, pose.y)
        assert math.isclose(nx, 0.0, abs_tol=1e-9) and math.isclose(ny, -1.0)
        assert facade_line(flat_depth(80.0), rig, pose, 1, (63, 64, 63, 64), 64) is None

    def test_approach_misaligned(self):
        rig = CameraRig()
        pose = DronePose(0.0, 0.0, 5.0, FACING_NORTH)
        edge = approach_target(RecognitionAnswer(True, (0, 5, 63, 64), 1), flat_depth(9.0), pose, rig)
        assert len(edge) == 1 and edge[0].kind == ActionKind.APPROACH
        assert edge[0].bearing > FACING_NORTH, "A window on the left turns the drone left"
        side = approach_target(RecognitionAnswer(True, (63, 64, 63, 64), 3), flat_depth(9.0), pose, rig)
        assert side[0].kind == ActionKind.APPROACH and math.isclose(side[0].bearing, 0.0, abs_tol=1e-12)
        high = approach_target(RecognitionAnswer(True, (63, 64, 20, 21), 1), flat_depth(9.0), pose, rig)
        assert high[0].kind == ActionKind.APPROACH and high[0].altitude > pose.z
        expect_raises(ValueError, approach_target, RecognitionAnswer.not_found(), flat_depth(9.0), pose, rig)


def run_tests(verbose=False):
    """Run exploration tests."""
    test = TestExploration().configure(verbose)
    return test.run_all_tests()


if __name__ == "__main__":
    run_tests(verbose=True)
