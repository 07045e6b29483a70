#!/usr/bin/env python3
# tests/test_world.py

import os
import math
import tempfile

import numpy as np

# Import base test class
from test_base import (
    BaseTest, FACING_NORTH, GREEN_POT, expect_raises, square_building, square_world, south_window
)

from vldnav.utils.error_handling import (
    CollisionError, GenerationInfeasibleError, NotInViewError, SchemaError
)
from vldnav.world.camera import (
    building_pixel_box, pixel_range, project_points, render_depth, round_box, visible_features
)
from vldnav.world.generator import (
    WorldGenParams, facade_residual, generate_world, load_world, save_world, world_from_dict, world_to_dict
)
from vldnav.world.geometry import inside_building, is_convex_ccw, segment_clearance, vertex_path_length
from vldnav.world.kinematics import apply_action, check_success, standoff_point
from vldnav.world.types import CAMERA_INDICES, Action, ActionKind, CameraRig, DronePose, WorldModel


def naive_depth(world, pose, rig, cam):
    """Per-pixel planar depth from a direct 2x2 solve against every facade segment."""
    yaw = pose.yaw - math.radians(rig.yaw_offsets[cam - 1])
    fx = (rig.width / 2.0) / math.tan(math.radians(rig.hfov) / 2.0)
    fy = (rig.height / 2.0) / math.tan(math.radians(rig.vfov) / 2.0)
    out = np.full((rig.height, rig.width), rig.max_range)
    for row in range(rig.height):
        for col in range(rig.width):
            a = (col + 0.5 - rig.width / 2.0) / fx
            b = (rig.height / 2.0 - (row + 0.5)) / fy
            dx = math.cos(yaw) + a * math.sin(yaw)
            dy = math.sin(yaw) - a * math.cos(yaw)
            best = math.inf
            for building in world.buildings:
                for index in range(building.num_facades):
                    (x0, y0), (x1, y1) = building.facade(index)
                    matrix = np.array([[dx, -(x1 - x0)], [dy, -(y1 - y0)]])
                    if abs(np.linalg.det(matrix)) < 1e-12:
                        continue
                    t, s = np.linalg.solve(matrix, np.array([x0 - pose.x, y0 - pose.y]))
                    z = pose.z + t * b
                    if t > 1e-9 and 0.0 <= s <= 1.0 and 0.0 <= z <= building.height:
                        best = min(best, t)
            if best <= rig.max_range:
                out[row, col] = best
    return out


class TestWorld(BaseTest):
    """Tests for world generation, rendering and kinematics."""

    component_name = "world"

    def test_generation_is_deterministic(self):
        a = world_to_dict(generate_world(7))
        b = world_to_dict(generate_world(7))
        assert a == b, "Same seed and parameters should give the same world"
        assert world_to_dict(generate_world(8)) != a, "A different seed should give a different world"

    def test_forced_floor_count(self):
        world = generate_world(7, WorldGenParams(num_buildings=1, floors=(5, 5)))
        assert len(world.buildings) == 1
        building = world.buildings[0]
        assert building.num_floors == 5
        assert math.isclose(building.height, 5 * building.floor_height)

    def test_generated_invariants(self):
        world = generate_world(13)
        for building in world.buildings:
            assert is_convex_ccw(building.footprint), "Footprints must be convex and counterclockwise"
            for window in building.windows:
                assert facade_residual(building, window) < 1e-9, f"{window.id} is off its facade plane"
                assert 1 <= window.floor <= building.num_floors
        tags = [t for w in world.decorated_windows() for t in w.decorations]
        assert len(tags) == len(set(tags)), "Decorations must not repeat within a building"

    def test_multi_building_gap(self):
        params = WorldGenParams(num_buildings=3)
        world = generate_world(21, params)
        assert len(world.buildings) == 3
        ids = [w.id for b in world.buildings for w in b.windows]
        assert len(ids) == len(set(ids)), "Window ids must be unique across the world"

    def test_infeasible_params(self):
        expect_raises(GenerationInfeasibleError, generate_world, 1, WorldGenParams(vertices=(2, 5)))
        expect_raises(GenerationInfeasibleError, generate_world, 1,
                      WorldGenParams(floor_height=(1.0, 1.2), window_height=1.4))

    def test_world_file_round_trip(self):
        world = generate_world(5)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'world.json')
            save_world(world, path)
            loaded = load_world(path)
        assert loaded == world, "A saved world should load back unchanged"
        data = world_to_dict(world)
        data['schema'] = 'vld-world/0'
        expect_raises(SchemaError, world_from_dict, data)

    def test_center_pixel_on_flat_facade(self):
        world = square_world()
        rig = CameraRig()
        pose = DronePose(0.0, -20.0, 7.5, FACING_NORTH)
        depth = render_depth(world, pose, 1, rig)
        assert abs(depth.at(64, 64) - 10.0) <= 1e-6, f"Expected 10 m, got {depth.at(64, 64)}"

    def test_open_sky_is_max_range(self):
        world = square_world()
        rig = CameraRig()
        pose = DronePose(0.0, -20.0, 7.5, -FACING_NORTH)
        depth = render_depth(world, pose, 1, rig)
        assert np.all(depth.data == rig.max_range), "A view of open sky should be all max_range"

    def test_render_matches_naive_intersector(self):
        world = square_world()
        rig = CameraRig(width=16, height=16)
        pose = DronePose(20.0, -20.0, 6.0, 3.0 * math.pi / 4.0)
        for cam in (1, 2, 4):
            rendered = render_depth(world, pose, cam, rig).data
            expected = naive_depth(world, pose, rig, cam)
            assert np.allclose(rendered, expected, rtol=0.0, atol=1e-9), f"Camera {cam} disagrees"
        front = render_depth(world, pose, 1, rig).data
        assert (front < rig.max_range).any() and (front == rig.max_range).any()

    def test_window_pixel_box(self):
        window = south_window(0.0, 3, GREEN_POT, width=2.0)
        world = square_world([window])
        pose = DronePose(0.0, -20.0, 7.5, FACING_NORTH)
        features = visible_features(world, pose, 1, CameraRig())
        assert [f.window_id for f in features] == [window.id]
        assert features[0].pixel_box == (57, 70, 59, 68), f"Unexpected box {features[0].pixel_box}"
        assert features[0].occluded_fraction == 0.0

    def test_render_matches_naive_on_fuzzed_poses(self):
        world = square_world()
        rig = CameraRig(width=16, height=16)
        rng = np.random.default_rng(11)
        checked = 0
        while checked < 50:
            x, y = rng.uniform(-40.0, 40.0, size=2)
            if max(abs(x), abs(y)) <= 10.5:
                continue
            pose = DronePose(float(x), float(y), float(rng.uniform(0.5, 14.5)),
                             float(rng.uniform(-math.pi, math.pi)))
            cam = 1 + checked % 5
            rendered = render_depth(world, pose, cam, rig).data
            expected = naive_depth(world, pose, rig, cam)
            assert np.allclose(rendered, expected, rtol=0.0, atol=1e-9), f"Camera {cam} disagrees at {pose}"
            checked += 1

    def test_downsampled_rendering_consistency(self):
        world = square_world()
        coarse = CameraRig(width=16, height=16)
        fine = coarse.with_resolution(144, 144)
        pose = DronePose(23.0, -17.0, 6.3, 2.3)
        for cam in CAMERA_INDICES:
            low = render_depth(world, pose, cam, coarse).data
            high = render_depth(world, pose, cam, fine).data
            # Pixel c of the coarse image shares its ray with pixel 9c + 4 of the fine one
            assert np.allclose(high[4::9, 4::9], low, rtol=0.0, atol=1e-9), f"Camera {cam} disagrees"
        front = render_depth(world, pose, 1, coarse).data
        assert (front < coarse.max_range).any() and (front == coarse.max_range).any()

    def test_apply_action_fuzz(self):
        world = square_world()
        building = world.buildings[0]
        rng = np.random.default_rng(5)
        moved = 0
        for _ in range(300):
            x, y = rng.uniform(-30.0, 30.0, size=2)
            if max(abs(x), abs(y)) <= 10.5:
                continue
            pose = DronePose(float(x), float(y), float(rng.uniform(0.0, 20.0)),
                             float(rng.uniform(-math.pi, math.pi)))
            choice = rng.integers(3)
            if choice == 0:
                action = Action(ActionKind.TRANSLATE, bearing=float(rng.uniform(-math.pi, math.pi)),
                                distance=float(rng.uniform(0.0, 10.0)))
            elif choice == 1:
                action = Action.rotate_left()
            else:
                action = Action(ActionKind.APPROACH, bearing=float(rng.uniform(-math.pi, math.pi)),
                                altitude=float(rng.uniform(0.0, 20.0)))
            try:
                after = apply_action(world, pose, action, 0.5, 10.0)
            except CollisionError:
                continue
            moved += 1
            assert not inside_building(building, after.x, after.y, after.z), f"{action} ended inside at {after}"
            if action.kind == ActionKind.TRANSLATE:
                flown = math.hypot(after.x - pose.x, after.y - pose.y)
                assert math.isclose(flown, action.distance, abs_tol=1e-9)
                assert after.z == pose.z and math.isclose(after.yaw, action.bearing, abs_tol=1e-12)
                assert segment_clearance(world, (pose.x, pose.y), (after.x, after.y), pose.z, 0.5) >= 0.5
            else:
                assert (after.x, after.y) == (pose.x, pose.y), "Rotations and alignments keep the position"
        assert moved > 100

    def test_features_match_depth_range(self):
        windows = [south_window(x, floor, GREEN_POT) for x in (-6.0, -3.0, 0.0, 3.0, 6.0) for floor in range(1, 6)]
        world = square_world(windows)
        rig = CameraRig()
        rng = np.random.default_rng(3)
        checked = 0
        for _ in range(20):
            pose = DronePose(float(rng.uniform(-15.0, 15.0)), float(rng.uniform(-33.0, -18.0)),
                             float(rng.uniform(1.0, 14.0)), FACING_NORTH + float(rng.uniform(-0.6, 0.6)))
            for cam in CAMERA_INDICES:
                depth = render_depth(world, pose, cam, rig)
                for feature in visible_features(world, pose, cam, rig):
                    if feature.occluded_fraction > 0.0:
                        continue
                    center = world.window(feature.window_id).center
                    u, v, planar = project_points(rig, pose, cam, np.array([center]))
                    column, row = int(u[0]), int(v[0])
                    seen = pixel_range(depth, rig, column, row)
                    euclid = pose.distance_to(center)
                    assert abs(seen - euclid) <= 3.0, \
                        f"{feature.window_id}: pixel range {seen:.3f} vs {euclid:.3f}"
                    assert depth.at(column, row) <= seen + 1e-9
                    b = (rig.height / 2.0 - (row + 0.5)) / rig.fy
                    hit_z = pose.z + depth.at(column, row) * b
                    assert math.floor(hit_z / 3.0) + 1 == feature.floor, "The centre pixel sees the window's floor"
                    checked += 1
        assert checked > 20

    def test_box_rounding_rule(self):
        rig = CameraRig()
        assert round_box(rig, 57.6, 70.4, 59.52, 68.48) == (57, 70, 59, 68)
        assert round_box(rig, 57.0, 71.0, 59.0, 69.0) == (57, 70, 59, 68), "Integer maxima round down by one"
        assert round_box(rig, -4.0, 3.2, 126.5, 140.0) == (0, 3, 126, 127)
        assert round_box(rig, 40.2, 40.7, 10.0, 10.5) == (40, 41, 10, 11), "Boxes are never degenerate"

    def test_window_behind_camera_absent(self):
        world = square_world([south_window(0.0, 3, GREEN_POT)])
        pose = DronePose(0.0, -20.0, 7.5, -FACING_NORTH)
        assert visible_features(world, pose, 1, CameraRig()) == []

    def test_occluded_window_absent(self):
        near = south_window(0.0, 3, GREEN_POT)
        far = south_window(0.0, 3, None, half=5.0, y_center=40.0, building_id='b1')
        behind = square_building([far], half=5.0, center=(0.0, 40.0), building_id='b1')
        world = square_world([near], extra_buildings=[behind])
        pose = DronePose(0.0, -20.0, 7.5, FACING_NORTH)
        ids = [f.window_id for f in visible_features(world, pose, 1, CameraRig())]
        assert near.id in ids
        assert far.id not in ids, "A window hidden behind another building must not be reported"

    def test_building_box(self):
        world = square_world()
        rig = CameraRig()
        close = DronePose(0.0, -11.0, 7.5, FACING_NORTH)
        assert building_pixel_box(world, close, 1, world.buildings[0], rig) == (0, 127, 0, 127)
        away = DronePose(0.0, -20.0, 7.5, -FACING_NORTH)
        expect_raises(NotInViewError, building_pixel_box, world, away, 1, world.buildings[0], rig)

    def test_translate_and_rotate(self):
        world = square_world()
        pose = apply_action(world, DronePose(30.0, 30.0, 12.0, 0.0),
                            Action(ActionKind.TRANSLATE, bearing=0.0, distance=5.0))
        assert math.isclose(pose.x, 35.0) and math.isclose(pose.y, 30.0) and pose.z == 12.0
        turned = apply_action(world, pose, Action.rotate_left())
        assert math.isclose(turned.yaw, math.pi / 6.0)
        assert turned.position == pose.position

    def test_collision_and_limits(self):
        world = square_world()
        grazing = DronePose(-20.0, -10.2, 7.5, 0.0)
        action = Action(ActionKind.TRANSLATE, bearing=0.0, distance=10.0)
        expect_raises(CollisionError, apply_action, world, grazing, action, 0.5)
        too_far = Action(ActionKind.TRANSLATE, bearing=0.0, distance=12.0)
        expect_raises(ValueError, apply_action, world, DronePose(30.0, 30.0, 5.0), too_far, 0.5, 10.0)
        above = apply_action(world, DronePose(0.0, -20.0, 20.0, FACING_NORTH),
                             Action(ActionKind.TRANSLATE, bearing=FACING_NORTH, distance=10.0))
        assert math.isclose(above.y, -10.0, abs_tol=1e-9), "Flying above the roof line is not a collision"

    def test_success_neighbourhood(self):
        window = south_window(0.0, 3, GREEN_POT)
        world = square_world([window])
        goal = standoff_point(world, window, 1.5)
        assert np.allclose(goal, (0.0, -11.5, 7.5))
        assert check_success(DronePose(*goal), world, window, 3.0, 1.5)
        outside = DronePose(goal[0], goal[1] - 3.0 - 1e-6, goal[2])
        assert not check_success(outside, world, window, 3.0, 1.5)
        floor_below = DronePose(goal[0], goal[1], goal[2] - 3.0)
        assert not check_success(floor_below, world, window, 2.0, 1.5)

    def test_vertex_path(self):
        square = ((0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0))
        around = vertex_path_length((5.0, -1.0), (5.0, 11.0), square)
        assert math.isclose(around, 10.0 + 2.0 * math.sqrt(26.0), rel_tol=1e-12)
        assert math.isclose(vertex_path_length((-1.0, -1.0), (11.0, -1.0), square), 12.0)
        assert vertex_path_length((5.0, -1.0), (5.0, -1.0), square) == 0.0

    def test_world_lookup(self):
        window = south_window(0.0, 3, GREEN_POT)
        world = square_world([window])
        assert world.window(window.id) == window
        assert world.building_of(window.id).id == 'b0'
        expect_raises(KeyError, world.window, 'missing')
        assert isinstance(world, WorldModel) and world.decorated_windows() == [window]


def run_tests(verbose=False):
    """Run world tests."""
    test = TestWorld().configure(verbose)
    return test.run_all_tests()


if __name__ == "__main__":
    run_tests(verbose=True)
