#!/usr/bin/env python3
# tests/test_acceptance.py

import io
import os
import tempfile
from contextlib import redirect_stdout

# Import base test class
from test_base import BaseTest, FACING_NORTH, GREEN_POT, make_config, square_building

from vldnav.cli import main
from vldnav.evaluation.batch import BatchRunner
from vldnav.evaluation.metrics import compute_sr
from vldnav.evaluation.tasks import generate_task_batch
from vldnav.mission import Outcome
from vldnav.navigation import fl_failed, localize_floor, target_height
from vldnav.perception import NoiseProfile, NoiseStream, OracleBackend, RequestInterpretation
from vldnav.utils.error_handling import OvershootError
from vldnav.world.generator import generate_world
from vldnav.world.types import CameraRig, DronePose, WorldModel

MIXED = {'easy': 0.4, 'moderate': 0.4, 'hard': 0.2}
AROUND_CORNERS = {'moderate': 0.5, 'hard': 0.5}


def task_set(seeds, count, mix=MIXED, seed=0):
    worlds = [generate_world(s) for s in seeds]
    tasks = generate_task_batch(worlds, count, mix, seed=seed)
    return tasks, {f"seed:{w.seed}": w for w in worlds}


def run_batch(tasks, worlds, **sections):
    config = make_config(**sections)
    runner = BatchRunner(config, OracleBackend.from_config(config))
    return runner.run(tasks, worlds, progress=False)


def read_bytes(path):
    with open(path, 'rb') as handle:
        return handle.read()


class TestAcceptance(BaseTest):
    """End-to-end checks on generated worlds with the noise-free oracle."""

    component_name = "acceptance"

    def test_oracle_batch_succeeds(self):
        tasks, worlds = task_set([0, 1, 2], 24)
        traces = run_batch(tasks, worlds)
        outcomes = [t.outcome for t in traces]
        assert Outcome.COLLISION not in outcomes, f"Collisions in {outcomes}"
        sr = compute_sr(traces)
        assert sr >= 0.9, f"Success rate {sr:.2f} below 0.9: {outcomes}"
        assert all(t.steps_used <= 30 for t in traces)

    def test_no_collisions_on_other_seed(self):
        tasks, worlds = task_set([3, 4], 16, seed=1)
        traces = run_batch(tasks, worlds)
        collided = [t.task_id for t in traces if t.outcome == Outcome.COLLISION]
        assert not collided, f"Collisions in {collided}"

    def test_floor_localization_converges(self):
        rig = CameraRig()
        backend = OracleBackend(rig)
        runs = 0
        for floors in (1, 3, 5, 8, 12):
            for floor_height in (2.5, 3.2, 4.0):
                building = square_building(floor_height=floor_height, num_floors=floors)
                world = WorldModel(buildings=(building,), bounds=(-80.0, -80.0, 80.0, 80.0), seed=0)
                for distance in (8.0, 12.0):
                    start = DronePose(0.0, -10.0 - distance, 0.0, FACING_NORTH)
                    for target in range(1, floors + 1):
                        noise = NoiseStream(NoiseProfile.from_dict({'name': 'none'}), seed=0)
                        try:
                            result = localize_floor(world, start, RequestInterpretation(target, GREEN_POT),
                                                    backend, noise, rig)
                        except OvershootError as e:
                            result = e.result
                        truth = target_height(target, floor_height)
                        assert not fl_failed(result.h_final, truth, threshold=floor_height), \
                            f"{floors} floors of {floor_height} m from {distance} m: " \
                            f"floor {target} at {result.h_final:.2f} m, expected {truth:.2f} m"
                        runs += 1
        assert runs == 174

    def test_viewpoint_ablation_ordering(self):
        tasks, worlds = task_set([0, 1, 2], 12, mix=AROUND_CORNERS, seed=2)
        rates = {}
        for strategy in ('ours', 'random', 'default'):
            rates[strategy] = compute_sr(run_batch(tasks, worlds, explore={'viewpoint': strategy}))
        assert rates['ours'] >= rates['random'], f"Rates {rates}"
        assert rates['ours'] > rates['default'], f"Rates {rates}"

    def test_runs_are_byte_identical(self):
        with tempfile.TemporaryDirectory() as out:
            gen = ["gen", "--out", out, "--seed", "4", "--worlds", "2", "--tasks", "4"]
            run = ["run", "--out", out, "--jobs", "2"]
            with redirect_stdout(io.StringIO()):
                assert main(gen) == 0
                assert main(run) == 0
            trace_dir = os.path.join(out, 'traces')
            first = {name: read_bytes(os.path.join(trace_dir, name)) for name in sorted(os.listdir(trace_dir))}
            first_report = read_bytes(os.path.join(out, 'report.json'))
            with redirect_stdout(io.StringIO()):
                assert main(run) == 0
            second = {name: read_bytes(os.path.join(trace_dir, name)) for name in sorted(os.listdir(trace_dir))}
            assert len(first) == 4
            assert first == second, "Re-running the same tasks must write identical traces"
            assert read_bytes(os.path.join(out, 'report.json')) == first_report


def run_tests(verbose=False):
    """Run acceptance tests."""
    test = TestAcceptance().configure(verbose)
    return test.run_all_tests()


if __name__ == "__main__":
    run_tests(verbose=True)
