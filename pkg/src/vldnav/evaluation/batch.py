"""
VLD Navigation - Batch Runner Module

Runs a task set through the mission orchestrator with bounded concurrency,
writes one trace file per episode, and loads traces and worlds back for
reporting.
"""

import os
import glob
import json
import logging
from typing import Any, Dict, List, Optional, Sequence

from tqdm import tqdm

from vldnav.evaluation.metrics import MetricReport
from vldnav.evaluation.tasks import TaskSpec
from vldnav.mission.orchestrator import MissionOrchestrator, redacted_config
from vldnav.mission.types import EpisodeTrace
from vldnav.perception.base import PerceptionBackend
from vldnav.utils.common import dumps_canonical
from vldnav.utils.error_handling import ErrorLogger, SchemaError, atomic_write, map_with_limit
from vldnav.world.generator import WorldGenParams, generate_world, load_world
from vldnav.world.types import CameraRig, WorldModel

logger = logging.getLogger('vldnav.evaluation.batch')

REPORT_SCHEMA = "vld-report/1"
SEED_REF_PREFIX = "seed:"


def resolve_worlds(tasks: Sequence[TaskSpec], base_dir: str = '.',
                   world_params: Optional[Dict[str, Any]] = None) -> Dict[str, WorldModel]:
    """World for every reference used by the tasks: 'seed:<n>' regenerates, anything else is a file."""
    worlds = {}
    for ref in sorted({t.world_ref for t in tasks}):
        if ref.startswith(SEED_REF_PREFIX):
            params = WorldGenParams.from_dict(world_params)
            worlds[ref] = generate_world(int(ref[len(SEED_REF_PREFIX):]), params)
        else:
            worlds[ref] = load_world(os.path.join(base_dir, ref))
    return worlds


def trace_path(trace_dir: str, task_id: str) -> str:
    return os.path.join(trace_dir, f"{task_id}.jsonl")


class BatchRunner:
    """Episodes run concurrently; each writes its own trace file atomically."""

    def __init__(self, config: Dict[str, Any], backend: PerceptionBackend, rig: Optional[CameraRig] = None,
                 error_log: Optional[str] = None):
        self.config = config
        self.orchestrator = MissionOrchestrator(config, backend, rig)
        self.error_logger = ErrorLogger(error_log)
        self.jobs = int(config['output']['jobs'])

    def run(self, tasks: Sequence[TaskSpec], worlds: Dict[str, WorldModel], trace_dir: Optional[str] = None,
            progress: bool = True) -> List[EpisodeTrace]:
        """Traces in task order; the first system error is logged and re-raised."""
        if trace_dir:
            os.makedirs(trace_dir, exist_ok=True)
        logger.info(f"Running {len(tasks)} episodes with {self.jobs} worker(s)")

        with tqdm(total=len(tasks), desc="Episodes", unit="task", disable=not progress) as bar:
            def run_one(task: TaskSpec) -> EpisodeTrace:
                try:
                    trace = self.orchestrator.run_episode(task, worlds[task.world_ref])
                except Exception as e:
                    self.error_logger.log_error(e, {'task_id': task.task_id, 'world_ref': task.world_ref})
                    raise
                if trace_dir:
                    trace.save(trace_path(trace_dir, task.task_id))
                return trace

            return map_with_limit(run_one, tasks, self.jobs, on_done=bar.update)


def load_traces(trace_dir: str) -> List[EpisodeTrace]:
    """Every trace file in a directory, ordered by task id."""
    paths = sorted(glob.glob(os.path.join(trace_dir, "*.jsonl")))
    if not paths:
        raise SchemaError(f"No trace files in {trace_dir}")
    traces = [EpisodeTrace.load(path) for path in paths]
    return sorted(traces, key=lambda t: t.task_id)


def save_report(path: str, reports: Sequence[MetricReport], config: Dict[str, Any],
                study: Optional[str] = None):
    document = {
        'schema': REPORT_SCHEMA,
        'config': redacted_config(config),
        'study': study,
        'reports': [r.to_dict() for r in reports],
    }
    with atomic_write(path) as handle:
        handle.write(dumps_canonical(document) + "\n")


def load_report(path: str) -> Dict[str, Any]:
    with open(path, 'r', encoding='utf-8') as handle:
        document = json.load(handle)
    if document.get('schema') != REPORT_SCHEMA:
        raise SchemaError(f"{path}: expected schema {REPORT_SCHEMA}")
    return document
