"""
VLD Navigation - Command Line Interface

Commands:
    gen      generate worlds and a task set
    run      run every task and write traces plus a metric report
    ablate   run the same task set under several configurations
    report   recompute metrics from trace files
"""

import os
import sys
import copy
import logging
import argparse
from typing import Any, Dict, List, Optional, Sequence, Tuple

from vldnav import __version__
from vldnav.evaluation.batch import (
    BatchRunner, load_traces, resolve_worlds, save_report
)
from vldnav.evaluation.metrics import MetricReport, build_report, format_comparison, format_table
from vldnav.evaluation.tasks import (
    Difficulty, TaskSpec, dataset_statistics, format_statistics, generate_task_batch, load_tasks, save_tasks
)
from vldnav.mission.orchestrator import redacted_config
from vldnav.mission.replay import verify_trace
from vldnav.perception import create_backend
from vldnav.utils.common import derive_seed, load_config, setup_logging
from vldnav.utils.error_handling import ConfigurationError, DataInconsistencyError, VLDNavError
from vldnav.world.generator import WorldGenParams, generate_world, save_world
from vldnav.world.types import CameraRig, WorldModel

DIFFICULTY_LABELS = tuple(d.value for d in Difficulty)

ABLATION_STUDIES = {
    'viewpoint': ('explore', 'viewpoint', ('ours', 'random', 'default')),
    'choice': ('explore', 'choice', ('backend', 'center-only')),
    'floorloc': ('floorloc', 'method', ('ours', 'direct-count')),
}


def _range(text: str) -> List[int]:
    """'N' or 'MIN-MAX' as an inclusive integer range."""
    try:
        parts = [int(p) for p in text.split('-', 1)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or MIN-MAX, got '{text}'")
    low, high = (parts[0], parts[0]) if len(parts) == 1 else parts
    if low < 1 or high < low:
        raise argparse.ArgumentTypeError(f"invalid range '{text}'")
    return [low, high]


def _mix(text: str) -> Dict[str, float]:
    """'easy=0.4,moderate=0.4,hard=0.2'"""
    mix = {}
    try:
        for item in text.split(','):
            key, value = item.split('=')
            mix[key.strip()] = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected label=weight pairs, got '{text}'")
    unknown = set(mix) - set(DIFFICULTY_LABELS)
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown difficulty label(s): {', '.join(sorted(unknown))}")
    # Unlisted labels get no tasks instead of inheriting the default weights
    return {label: mix.get(label, 0.0) for label in DIFFICULTY_LABELS}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='vldnav',
        description="Window-delivery navigation engine and simulator"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="Path to a YAML config file")
    common.add_argument("--debug", action="store_true", default=None, help="Enable debug logging")
    common.add_argument("--seed", type=int, help="Root seed")
    common.add_argument("--out", type=str, help="Output directory")

    running = argparse.ArgumentParser(add_help=False)
    running.add_argument("--tasks", type=str, help="Task file (default <out>/tasks.json)")
    running.add_argument("--limit", type=int, help="Run only the first N tasks")
    running.add_argument("--jobs", type=int, help="Concurrent episodes")
    running.add_argument("--backend", choices=('oracle', 'remote'), help="Perception backend")
    running.add_argument("--noise", type=str, help="Oracle noise preset")
    running.add_argument("--endpoint", type=str, help="Remote chat-completion URL")
    running.add_argument("--token", type=str, help="Remote bearer token")
    running.add_argument("--model", type=str, help="Remote model name")
    running.add_argument("--viewpoint", choices=('ours', 'random', 'default'), help="Viewpoint strategy")
    running.add_argument("--choice", choices=('backend', 'center-only'), help="Direction choice mode")
    running.add_argument("--floorloc", choices=('ours', 'direct-count'), help="Floor localization method")
    running.add_argument("--budget", type=int, help="Exploration step budget")
    running.add_argument("--delta", type=float, help="Depth-jump threshold (m)")
    running.add_argument("--d-max", dest="d_max", type=float, help="Far-depth limit (m)")
    running.add_argument("--l-max", dest="l_max", type=float, help="Maximum translation per step (m)")
    running.add_argument("--slices", type=int, help="Slice count")
    running.add_argument("--safety-radius", dest="safety_radius", type=float, help="Collision radius (m)")
    running.add_argument("--success-radius", dest="success_radius", type=float, help="Success radius (m)")

    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="Generate worlds and tasks")
    gen.add_argument("--worlds", type=int, help="Number of worlds")
    gen.add_argument("--tasks", dest="task_count", type=int, help="Number of tasks")
    gen.add_argument("--floors", type=_range, help="Floors per building: N or MIN-MAX")
    gen.add_argument("--buildings", type=int, help="Buildings per world")
    gen.add_argument("--mix", type=_mix, help="Difficulty mix, e.g. easy=0.4,moderate=0.4,hard=0.2")

    run = sub.add_parser("run", parents=[common, running], help="Run all tasks")
    run.add_argument("--label", type=str, default='run', help="Report label")

    ablate = sub.add_parser("ablate", parents=[common, running], help="Compare configurations")
    ablate.add_argument("--study", choices=sorted(ABLATION_STUDIES), required=True, help="Ablation study")

    report = sub.add_parser("report", parents=[common], help="Recompute metrics from traces")
    report.add_argument("--traces", type=str, help="Trace directory (default <out>/traces)")
    report.add_argument("--tasks", type=str, help="Task file (default <out>/tasks.json)")
    report.add_argument("--no-verify", dest="verify", action="store_false",
                        help="Skip re-classifying every trace")
    return parser


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Flag values that were given, shaped like the config."""
    mapping = {
        'seed': ('seed',), 'debug': ('debug',), 'out': ('output', 'dir'), 'jobs': ('output', 'jobs'),
        'worlds': ('tasks', 'worlds'), 'task_count': ('tasks', 'count'), 'mix': ('tasks', 'mix'),
        'floors': ('world', 'floors'), 'buildings': ('world', 'num_buildings'),
        'backend': ('perception', 'backend'), 'noise': ('perception', 'noise'),
        'endpoint': ('remote', 'url'), 'token': ('remote', 'token'), 'model': ('remote', 'model'),
        'viewpoint': ('explore', 'viewpoint'), 'choice': ('explore', 'choice'),
        'floorloc': ('floorloc', 'method'), 'budget': ('mission', 'step_budget'),
        'delta': ('explore', 'delta'), 'd_max': ('explore', 'd_max'), 'l_max': ('explore', 'l_max'),
        'slices': ('explore', 'slices'), 'safety_radius': ('mission', 'safety_radius'),
        'success_radius': ('mission', 'success_radius'),
    }
    overrides: Dict[str, Any] = {}
    for attr, path in mapping.items():
        value = getattr(args, attr, None)
        if value is None:
            continue
        node = overrides
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value
    return overrides


def _output_dir(config: Dict[str, Any]) -> str:
    return config['output']['dir']


def cmd_gen(config: Dict[str, Any]) -> int:
    logger = logging.getLogger('vldnav.cli')
    out = _output_dir(config)
    params = WorldGenParams.from_config(config)
    params.validate()

    world_dir = os.path.join(out, 'worlds')
    os.makedirs(world_dir, exist_ok=True)
    worlds, refs = [], []
    for i in range(int(config['tasks']['worlds'])):
        world = generate_world(derive_seed(config['seed'], f"world:{i}"), params)
        ref = f"worlds/world-{i:03d}.json"
        save_world(world, os.path.join(out, ref))
        worlds.append(world)
        refs.append(ref)

    tasks = generate_task_batch(worlds, int(config['tasks']['count']), config['tasks']['mix'],
                                config['seed'], refs, tuple(config['mission']['start_distance']))
    stats = dataset_statistics(tasks, dict(zip(refs, worlds)))
    task_path = os.path.join(out, 'tasks.json')
    save_tasks(task_path, tasks, redacted_config(config), stats)
    logger.info(f"Wrote {len(worlds)} worlds and {len(tasks)} tasks to {out}")
    print(format_statistics(stats))
    return 0


def _load_task_set(config: Dict[str, Any], task_file: Optional[str],
                   limit: Optional[int] = None) -> Tuple[List[TaskSpec], Dict[str, WorldModel]]:
    path = task_file or os.path.join(_output_dir(config), 'tasks.json')
    if not os.path.exists(path):
        raise ConfigurationError(f"Task file not found: {path}")
    tasks, meta = load_tasks(path)
    if limit is not None:
        if limit < 1:
            raise ConfigurationError("--limit must be at least 1")
        tasks = tasks[:limit]
    world_params = meta.get('config', {}).get('world')
    worlds = resolve_worlds(tasks, os.path.dirname(os.path.abspath(path)), world_params)
    return tasks, worlds


def _run_batch(config: Dict[str, Any], tasks: Sequence[TaskSpec], worlds: Dict[str, WorldModel],
               trace_dir: str, label: str) -> MetricReport:
    rig = CameraRig.from_config(config)
    backend = create_backend(config, rig)
    try:
        runner = BatchRunner(config, backend, rig, os.path.join(_output_dir(config), 'logs', 'errors.log'))
        traces = runner.run(tasks, worlds, trace_dir, progress=not config.get('debug'))
    finally:
        backend.shutdown()
    task_map = {t.task_id: t for t in tasks}
    return build_report(traces, task_map, worlds, config['mission']['standoff'],
                        config['floorloc']['fail_threshold'], label)


def cmd_run(config: Dict[str, Any], args: argparse.Namespace) -> int:
    tasks, worlds = _load_task_set(config, args.tasks, args.limit)
    out = _output_dir(config)
    report = _run_batch(config, tasks, worlds, os.path.join(out, 'traces'), args.label)
    save_report(os.path.join(out, 'report.json'), [report], config)
    print(format_table(report))
    return 0


def cmd_ablate(config: Dict[str, Any], args: argparse.Namespace) -> int:
    section, key, values = ABLATION_STUDIES[args.study]
    tasks, worlds = _load_task_set(config, args.tasks, args.limit)
    out = os.path.join(_output_dir(config), 'ablate', args.study)
    reports = []
    for value in values:
        variant = copy.deepcopy(config)
        variant[section][key] = value
        reports.append(_run_batch(variant, tasks, worlds, os.path.join(out, value, 'traces'), value))
    save_report(os.path.join(out, 'report.json'), reports, config, study=args.study)
    print(format_comparison(args.study, reports))
    return 0


def cmd_report(config: Dict[str, Any], args: argparse.Namespace) -> int:
    logger = logging.getLogger('vldnav.cli')
    out = _output_dir(config)
    traces = load_traces(args.traces or os.path.join(out, 'traces'))
    tasks, worlds = _load_task_set(config, args.tasks)
    task_map = {t.task_id: t for t in tasks}

    if args.verify:
        mismatched = []
        for trace in traces:
            task = task_map.get(trace.task_id)
            if task is None:
                raise DataInconsistencyError(f"Trace {trace.task_id} has no task in the task file")
            if not verify_trace(trace, task, worlds[task.world_ref]):
                mismatched.append(trace.task_id)
        if mismatched:
            raise DataInconsistencyError(f"Traces disagree with their replay: {', '.join(mismatched)}")
        logger.info(f"Verified {len(traces)} traces by replay")

    report = build_report(traces, task_map, worlds, config['mission']['standoff'],
                          config['floorloc']['fail_threshold'], 'report')
    save_report(os.path.join(out, 'report.json'), [report], config)
    print(format_table(report))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logger = setup_logging(debug=bool(args.debug), log_dir=os.path.join(args.out or 'out', 'logs'))

    try:
        config = load_config(args.config, config_overrides(args))
    except Exception as e:
        logger.critical(f"Failed to load configuration: {e}")
        print(f"CRITICAL: Failed to load configuration: {e}")
        return 1

    routes = {
        'gen': lambda: cmd_gen(config),
        'run': lambda: cmd_run(config, args),
        'ablate': lambda: cmd_ablate(config, args),
        'report': lambda: cmd_report(config, args),
    }
    try:
        return routes[args.command]()
    except VLDNavError as e:
        logger.critical(f"{args.command} failed: {e}")
        print(f"CRITICAL: {e}")
        return 1
    except Exception as e:
        logger.critical(f"Unexpected error in {args.command}: {e}", exc_info=True)
        print(f"CRITICAL: Unexpected error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
