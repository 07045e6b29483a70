#!/usr/bin/env python3
# tests/test_cli.py

import io
import os
import json
import argparse
import tempfile
from contextlib import redirect_stdout

# Import base test class
from test_base import BaseTest, expect_raises

from vldnav.cli import _mix, _range, build_parser, config_overrides, main


def quiet_main(argv):
    """main() with stdout captured; returns (exit code, printed text)."""
    buffer = io.StringIO()
    with redirect_stdout(buffer):
        code = main(argv)
    return code, buffer.getvalue()


def gen_args(out, seed=3):
    return ["gen", "--out", out, "--seed", str(seed), "--worlds", "1", "--tasks", "3",
            "--floors", "4-6", "--mix", "easy=1"]


class TestCli(BaseTest):
    """Tests for argument parsing and the gen, run and report commands."""

    component_name = "cli"

    def test_argument_types(self):
        assert _range("5") == [5, 5] and _range("3-10") == [3, 10]
        expect_raises(argparse.ArgumentTypeError, _range, "ten")
        expect_raises(argparse.ArgumentTypeError, _range, "6-4")
        assert _mix("easy=0.5,hard=0.5") == {'easy': 0.5, 'moderate': 0.0, 'hard': 0.5}
        expect_raises(argparse.ArgumentTypeError, _mix, "trivial=1")
        expect_raises(argparse.ArgumentTypeError, _mix, "easy")

    def test_config_overrides(self):
        args = build_parser().parse_args(["run", "--budget", "12", "--d-max", "60", "--out", "x",
                                          "--backend", "oracle", "--noise", "yi-vl"])
        overrides = config_overrides(args)
        assert overrides['mission'] == {'step_budget': 12}
        assert overrides['explore'] == {'d_max': 60.0}
        assert overrides['output'] == {'dir': 'x'}
        assert overrides['perception'] == {'backend': 'oracle', 'noise': 'yi-vl'}
        assert 'seed' not in overrides, "Flags that were not given leave the config alone"

    def test_gen_run_report(self):
        with tempfile.TemporaryDirectory() as out:
            code, text = quiet_main(gen_args(out))
            assert code == 0 and text.startswith("Tasks: 3")
            assert os.path.exists(os.path.join(out, 'worlds', 'world-000.json'))

            code, text = quiet_main(["run", "--out", out, "--limit", "2", "--budget", "3"])
            assert code == 0, "run failed"
            assert text.splitlines()[0].startswith('Split')
            traces = sorted(os.listdir(os.path.join(out, 'traces')))
            assert traces == ['task-0000.jsonl', 'task-0001.jsonl']

            code, text = quiet_main(["report", "--out", out])
            assert code == 0 and 'Outcomes:' in text
            with open(os.path.join(out, 'report.json'), 'r', encoding='utf-8') as handle:
                document = json.load(handle)
            assert document['schema'] == 'vld-report/1'
            assert document['reports'][0]['n_tasks'] == 2

    def test_gen_is_reproducible(self):
        with tempfile.TemporaryDirectory() as out:
            path = os.path.join(out, 'tasks.json')
            assert quiet_main(gen_args(out))[0] == 0
            with open(path, 'rb') as handle:
                first = handle.read()
            assert quiet_main(gen_args(out))[0] == 0
            with open(path, 'rb') as handle:
                second = handle.read()
            assert first == second, "Same seed must write byte-identical task files"

    def test_failures_return_exit_codes(self):
        with tempfile.TemporaryDirectory() as out:
            assert quiet_main(["run", "--out", out])[0] == 1, "Missing task file"
            assert quiet_main(["fly", "--out", out])[0] == 2, "Unknown subcommand"
            assert quiet_main(gen_args(out))[0] == 0
            assert quiet_main(["run", "--out", out, "--backend", "remote"])[0] == 1, "Remote without an endpoint"
            assert quiet_main(["run", "--out", out, "--limit", "0"])[0] == 1


def run_tests(verbose=False):
    """Run command line tests."""
    test = TestCli().configure(verbose)
    return test.run_all_tests()


if __name__ == "__main__":
    run_tests(verbose=True)
