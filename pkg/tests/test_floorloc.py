#!/usr/bin/env python3
# tests/test_floorloc.py

import math

# Import base test class
from test_base import BaseTest, FACING_NORTH, GREEN_POT, expect_raises, square_world

from vldnav.navigation import (
    band_adjusted_height, direct_count_height, fl_failed, localize_floor,
    next_waypoint_spacing, proportional_height, target_height
)
from vldnav.perception import NoiseProfile, NoiseStream, OracleBackend, RequestInterpretation
from vldnav.utils.error_handling import DivisionUndefinedError, FloorLocAbortError, OvershootError
from vldnav.world.types import ActionKind, CameraRig, DronePose

# Highest facade point seen from 10 m at a 10 m hover: 10 + 10 * 31.5 / 64
VISIBLE_TOP_5F = 10.0 + 10.0 * 31.5 / 64.0
VISIBLE_TOP_10F = 10.0 * 63.5 / 64.0 + 10.0


def ground_start():
    return DronePose(0.0, -20.0, 0.0, FACING_NORTH)


def stream(**rates):
    return NoiseStream(NoiseProfile.from_dict(dict(name='test', **rates)), seed=7)


class TestFloorLocalization(BaseTest):
    """Tests for waypoint ascent, fine adjustment and the direct count baseline."""

    component_name = "floorloc"

    def test_waypoint_spacing(self):
        assert math.isclose(next_waypoint_spacing(90.0, 10.0), 20.0)
        assert math.isclose(next_waypoint_spacing(60.0, 5.0), 10.0 * math.tan(math.radians(30.0)))
        expect_raises(ValueError, next_waypoint_spacing, 90.0, 0.0)

    def test_band_adjustment(self):
        assert band_adjusted_height(0.0, 20.0, 5, 5, 3) == 12.0
        assert band_adjusted_height(20.0, 40.0, 4, 7, 7) == 40.0
        assert band_adjusted_height(10.0, 20.0, 4, 8, 6) == 15.0
        assert band_adjusted_height(0.0, 20.0, 5, 2, 3) is None, "Below target: keep ascending"
        expect_raises(DivisionUndefinedError, band_adjusted_height, 0.0, 20.0, 0, 3, 3)
        expect_raises(ValueError, band_adjusted_height, 20.0, 20.0, 2, 3, 3)

    def test_band_adjustment_monotone(self):
        heights = [band_adjusted_height(10.0, 30.0, 6, 4 + k, 4) for k in range(7)]
        assert all(a > b for a, b in zip(heights, heights[1:])), "More overshoot gives a lower height"
        assert all(10.0 - 1e-9 <= h <= 30.0 + 1e-9 for h in heights)

    def test_height_helpers(self):
        assert target_height(3, 3.0) == 7.5
        assert fl_failed(7.5, 0.0) and not fl_failed(7.0, 0.0)
        assert fl_failed(3.0, 0.0, threshold=2.0)
        assert proportional_height(15.0, 3, 5) == 7.5
        assert math.isclose(proportional_height(15.0, 9, 5), 13.5), "Capped at the top floor"
        expect_raises(DivisionUndefinedError, proportional_height, 15.0, 3, 0)

    def test_localize_middle_floor(self):
        world = square_world()
        result = localize_floor(world, ground_start(), RequestInterpretation(3, GREEN_POT),
                                OracleBackend(CameraRig()), stream(), CameraRig())
        assert abs(result.h_final - VISIBLE_TOP_5F * 0.5) < 1e-9, f"Unexpected height {result.h_final}"
        assert abs(result.h_final - target_height(3, 3.0)) < 0.1
        assert result.method == 'ours' and not result.overshoot
        assert result.queries_used == 2, "One count and one building box"
        assert [r['kind'] for r in result.records] == ['waypoint', 'adjust', 'bbox']
        assert result.records[0]['floors_visible'] == 5
        assert result.bbox_buil is not None
        assert [a.kind for a in result.actions] == [ActionKind.ASCEND, ActionKind.ASCEND]
        assert result.pose.x == 0.0 and result.pose.y == -20.0

    def test_localize_tall_building(self):
        world = square_world(num_floors=10)
        backend, rig = OracleBackend(CameraRig()), CameraRig()
        sixth = localize_floor(world, ground_start(), RequestInterpretation(6, GREEN_POT), backend, stream(), rig)
        assert abs(sixth.h_final - target_height(6, 3.0)) <= 1.5
        assert math.isclose(sixth.h_final, VISIBLE_TOP_10F * (1.0 - 1.0 / 7.0 - 0.5 / 7.0))
        first = localize_floor(world, ground_start(), RequestInterpretation(1, GREEN_POT), backend, stream(), rig)
        assert sum(r['kind'] == 'waypoint' for r in first.records) == 1
        assert abs(first.h_final - target_height(1, 3.0)) < 0.1

    def test_refusal_cascade_aborts(self):
        world = square_world()
        error = expect_raises(FloorLocAbortError, localize_floor, world, ground_start(),
                              RequestInterpretation(3, GREEN_POT), OracleBackend(CameraRig()),
                              stream(refusal_rate=1.0), CameraRig(), 3)
        assert error.queries_used == 3
        assert len(error.actions) == 1 and error.actions[0].kind == ActionKind.ASCEND

    def test_overshoot_returns_to_last_band(self):
        world = square_world()
        error = expect_raises(OvershootError, localize_floor, world, ground_start(),
                              RequestInterpretation(8, GREEN_POT), OracleBackend(CameraRig()),
                              stream(), CameraRig())
        result = error.result
        assert result.overshoot and math.isclose(result.h_final, 10.0)
        assert [r['floors_visible'] for r in result.records if r['kind'] == 'waypoint'] == [5, 0]

    def test_no_facade_at_start(self):
        world = square_world()
        away = DronePose(0.0, -20.0, 0.0, -FACING_NORTH)
        expect_raises(FloorLocAbortError, localize_floor, world, away, RequestInterpretation(3, GREEN_POT),
                      OracleBackend(CameraRig()), stream(), CameraRig())

    def test_direct_count(self):
        world = square_world()
        result = direct_count_height(world, ground_start(), RequestInterpretation(3, GREEN_POT),
                                     OracleBackend(CameraRig()), stream(), CameraRig())
        record = [r for r in result.records if r['kind'] == 'direct_count'][0]
        assert record['box'][2:] == [48, 95], f"Unexpected box rows {record['box']}"
        assert math.isclose(record['height_est'], 15.0) and record['floors_total'] == 5
        assert math.isclose(result.h_final, 7.5) and result.method == 'direct-count'
        assert math.isclose(result.pose.y, -20.0, abs_tol=1e-9), "The drone flies back to its standoff"
        assert [a.kind for a in result.actions] == [
            ActionKind.ASCEND, ActionKind.TRANSLATE, ActionKind.APPROACH, ActionKind.ASCEND, ActionKind.TRANSLATE
        ]

    def test_direct_count_refusal(self):
        world = square_world()
        expect_raises(FloorLocAbortError, direct_count_height, world, ground_start(),
                      RequestInterpretation(3, GREEN_POT), OracleBackend(CameraRig()),
                      stream(refusal_rate=1.0), CameraRig())


def run_tests(verbose=False):
    """Run floor localization tests."""
    test = TestFloorLocalization().configure(verbose)
    return test.run_all_tests()


if __name__ == "__main__":
    run_tests(verbose=True)
