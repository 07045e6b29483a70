#!/usr/bin/env python3
# tests/test_tasks.py

import os
import json
import tempfile
from dataclasses import replace

# Import base test class
from test_base import (
    BaseTest, GREEN_POT, RED_LAMP, expect_raises, south_task, square_world, south_window
)

from vldnav.evaluation.tasks import (
    Difficulty, dataset_statistics, difficulty_label, difficulty_quotas, facade_turns,
    format_statistics, generate_task, generate_task_batch, load_tasks, min_turns, ordinal, save_tasks
)
from vldnav.utils.error_handling import GenerationInfeasibleError, NoDecoratedWindowError, SchemaError
from vldnav.world.types import Window


def north_window(floor, tag):
    return Window(id=f"b0-f2-l{floor:02d}-x+0", facade_index=2, floor=floor,
                  center=(0.0, 10.0, (floor - 0.5) * 3.0), extent=(1.2, 1.4), decorations=(tag,))


def two_sided_world():
    return square_world([south_window(0.0, 3, GREEN_POT), north_window(4, RED_LAMP)])


class TestTasks(BaseTest):
    """Tests for difficulty labels, task generation and the task file."""

    component_name = "tasks"

    def test_facade_turns(self):
        assert facade_turns(6, 0, 3) == 3
        assert facade_turns(6, 0, 5) == 1
        assert facade_turns(4, 0, 2) == 2
        assert facade_turns(8, 1, 5) == 4
        assert facade_turns(5, 2, 2) == 0

    def test_difficulty_label(self):
        labels = [difficulty_label(t) for t in range(6)]
        assert labels == [Difficulty.EASY, Difficulty.EASY, Difficulty.MODERATE, Difficulty.MODERATE,
                          Difficulty.HARD, Difficulty.HARD]
        expect_raises(ValueError, difficulty_label, -1)

    def test_min_turns_on_square(self):
        world = two_sided_world()
        front = south_window(0.0, 3, GREEN_POT)
        task = south_task(front, GREEN_POT)
        assert min_turns(world, task.start_pose, front) == 0
        assert min_turns(world, task.start_pose, north_window(4, RED_LAMP)) == 2

    def test_task_validation(self):
        world = two_sided_world()
        window = south_window(0.0, 3, GREEN_POT)
        south_task(window, GREEN_POT).validate(world)
        expect_raises(SchemaError, replace(south_task(window, GREEN_POT), target_floor=4).validate, world)
        expect_raises(SchemaError, south_task(window, RED_LAMP).validate, world)

    def test_generate_task_deterministic(self):
        world = two_sided_world()
        a = generate_task(world, 11, world_ref='seed:0')
        b = generate_task(world, 11, world_ref='seed:0')
        assert a == b, "Same world and seed must give the same task"
        a.validate(world)
        assert a.start_pose.z == 0.0
        assert a.target_object.describe() in a.request_text
        floor_words = (ordinal(a.target_floor), str(a.target_floor))
        assert any(word in a.request_text for word in floor_words)

    def test_generate_task_difficulty(self):
        world = two_sided_world()
        for seed in range(5):
            moderate = generate_task(world, seed, Difficulty.MODERATE)
            assert moderate.difficulty == 'moderate' and moderate.min_turns == 2
            easy = generate_task(world, seed, Difficulty.EASY)
            assert easy.difficulty == 'easy' and easy.min_turns < 2
        expect_raises(GenerationInfeasibleError, generate_task, world, 0, Difficulty.HARD)
        expect_raises(NoDecoratedWindowError, generate_task, square_world(), 0)

    def test_difficulty_quotas(self):
        mix = {'easy': 0.4, 'moderate': 0.4, 'hard': 0.2}
        counts = lambda labels: [labels.count(d) for d in Difficulty]  # noqa: E731
        assert counts(difficulty_quotas(10, mix)) == [4, 4, 2]
        assert counts(difficulty_quotas(7, mix)) == [3, 3, 1]
        assert counts(difficulty_quotas(3, {'hard': 1.0})) == [0, 0, 3]
        expect_raises(GenerationInfeasibleError, difficulty_quotas, 5, {'easy': 0.0})

    def test_batch_fallback(self):
        world = two_sided_world()
        tasks = generate_task_batch([world], 6, {'hard': 1.0}, seed=3)
        assert [t.task_id for t in tasks] == [f"task-{i:04d}" for i in range(6)]
        assert all(t.difficulty == 'moderate' for t in tasks), "Hard is infeasible on four facades"
        assert all(t.world_ref == 'seed:0' for t in tasks)
        again = generate_task_batch([world], 6, {'hard': 1.0}, seed=3)
        assert again == tasks
        expect_raises(GenerationInfeasibleError, generate_task_batch, [], 3, {'easy': 1.0}, 0)

    def test_statistics(self):
        world = two_sided_world()
        tasks = generate_task_batch([world], 8, {'easy': 0.5, 'moderate': 0.5}, seed=1)
        stats = dataset_statistics(tasks, {'seed:0': world})
        assert stats['count'] == 8
        assert sum(stats['difficulty'].values()) == 8
        assert sum(stats['floors'].values()) == 8
        assert stats['building_types'] == {'residential': 8}
        text = format_statistics(stats)
        assert text.startswith("Tasks: 8") and "Difficulty:" in text

    def test_task_file(self):
        world = two_sided_world()
        tasks = generate_task_batch([world], 4, {'easy': 1.0}, seed=2)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'tasks.json')
            save_tasks(path, tasks, config={'seed': 2})
            loaded, meta = load_tasks(path)
            assert loaded == tasks and meta['config'] == {'seed': 2}

            with open(path, 'r', encoding='utf-8') as handle:
                document = json.load(handle)
            document['schema'] = 'vld-task/0'
            with open(path, 'w', encoding='utf-8') as handle:
                json.dump(document, handle)
            expect_raises(SchemaError, load_tasks, path)

            document['schema'] = 'vld-task/1'
            del document['tasks'][0]['target_floor']
            with open(path, 'w', encoding='utf-8') as handle:
                json.dump(document, handle)
            expect_raises(SchemaError, load_tasks, path)

            with open(path, 'w', encoding='utf-8') as handle:
                handle.write("{ not json")
            expect_raises(SchemaError, load_tasks, path)

    def test_ordinals(self):
        assert [ordinal(n) for n in (1, 3, 12)] == ['first', 'third', 'twelfth']
        assert [ordinal(n) for n in (13, 21, 22, 23, 111)] == ['13th', '21st', '22nd', '23rd', '111th']


def run_tests(verbose=False):
    """Run task generation tests."""
    test = TestTasks().configure(verbose)
    return test.run_all_tests()


if __name__ == "__main__":
    run_tests(verbose=True)
