"""
VLD Navigation - Metrics Module

Success rate, success weighted by path length, average steps, and the two
perception failure rates (object recognition and floor localization),
computed from episode traces alone, with plain-text report tables.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from vldnav.evaluation.tasks import Difficulty, TaskSpec
from vldnav.mission.types import EpisodeTrace, Outcome
from vldnav.navigation.floor_localization import FL_FAIL_THRESHOLD, fl_failed
from vldnav.utils.error_handling import DataInconsistencyError
from vldnav.world.geometry import vertex_path_length
from vldnav.world.kinematics import standoff_point
from vldnav.world.types import Building, WorldModel

logger = logging.getLogger('vldnav.evaluation.metrics')

SPL_NOTE = "SPL shortest path: horizontal vertex path around the footprint plus one vertical leg."


def shortest_path_length(start: Tuple[float, float, float], goal: Tuple[float, float, float],
                         building: Building) -> float:
    """Shorter boundary-tangent path around the footprint plus |delta altitude|."""
    horizontal = vertex_path_length((start[0], start[1]), (goal[0], goal[1]), building.footprint)
    return horizontal + abs(goal[2] - start[2])


def episode_shortest_path(task: TaskSpec, world: WorldModel, standoff: float = 1.5) -> float:
    window = world.window(task.target_window_id)
    goal = standoff_point(world, window, standoff)
    return shortest_path_length(task.start_pose.position, goal, world.building_of(window.id))


def traveled_length(trace: EpisodeTrace) -> float:
    return trace.path_length + trace.vertical_length


def compute_sr(traces: Sequence[EpisodeTrace]) -> float:
    if not traces:
        raise ValueError("Success rate needs at least one trace")
    return sum(1 for t in traces if t.outcome == Outcome.SUCCESS) / len(traces)


def compute_avg_steps(traces: Sequence[EpisodeTrace]) -> Optional[float]:
    """Mean steps over successful episodes; None when nothing succeeded."""
    steps = [t.steps_used for t in traces if t.outcome == Outcome.SUCCESS]
    if not steps:
        return None
    return sum(steps) / len(steps)


def spl_term(success: bool, shortest: float, traveled: float, task_id: str = '') -> float:
    if not success:
        return 0.0
    if shortest <= 0.0:
        return 1.0
    if traveled <= 0.0:
        raise DataInconsistencyError(
            f"Task {task_id} succeeded with zero traveled distance but a {shortest:.3f} m shortest path"
        )
    return shortest / max(traveled, shortest)


def compute_spl(traces: Sequence[EpisodeTrace], tasks: Mapping[str, TaskSpec],
                worlds: Mapping[str, WorldModel], standoff: float = 1.5) -> float:
    """Mean over traces of S_i * l_i / max(p_i, l_i)."""
    if not traces:
        raise ValueError("SPL needs at least one trace")
    total = 0.0
    for trace in traces:
        success = trace.outcome == Outcome.SUCCESS
        if not success:
            continue
        task = tasks[trace.task_id]
        shortest = episode_shortest_path(task, worlds[task.world_ref], standoff)
        total += spl_term(success, shortest, traveled_length(trace), trace.task_id)
    return total / len(traces)


def or_fail_rate(traces: Sequence[EpisodeTrace]) -> Optional[float]:
    """Share of positive recognition claims made on a non-target window; None without claims."""
    claims = [c for t in traces for c in t.claims]
    if not claims:
        return None
    return sum(1 for c in claims if not c['correct']) / len(claims)


def fl_fail_rate(traces: Sequence[EpisodeTrace], threshold: float = FL_FAIL_THRESHOLD) -> float:
    """Share of episodes whose final floor-localization height misses by more than the threshold.

    Aborted localizations (no final height) count as failures.
    """
    if not traces:
        raise ValueError("FL failure rate needs at least one trace")
    failures = 0
    for trace in traces:
        h_final = trace.footer.get('h_final')
        if h_final is None or fl_failed(h_final, trace.footer['h_tar_true'], threshold):
            failures += 1
    return failures / len(traces)


@dataclass
class MetricReport:
    n_tasks: int
    sr: float
    spl: float
    avg_steps: Optional[float]
    fl_fail_rate: float
    or_fail_rate: Optional[float]
    outcomes: Dict[str, int] = field(default_factory=dict)
    per_difficulty: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    label: str = ''

    def to_dict(self) -> Dict[str, Any]:
        return {
            'label': self.label,
            'n_tasks': self.n_tasks,
            'sr': self.sr,
            'spl': self.spl,
            'avg_steps': self.avg_steps,
            'fl_fail_rate': self.fl_fail_rate,
            'or_fail_rate': self.or_fail_rate,
            'outcomes': dict(self.outcomes),
            'per_difficulty': self.per_difficulty,
            'note': SPL_NOTE,
        }


def _summary(traces: Sequence[EpisodeTrace], tasks: Mapping[str, TaskSpec],
             worlds: Mapping[str, WorldModel], standoff: float, threshold: float) -> Dict[str, Any]:
    return {
        'n_tasks': len(traces),
        'sr': compute_sr(traces),
        'spl': compute_spl(traces, tasks, worlds, standoff),
        'avg_steps': compute_avg_steps(traces),
        'fl_fail_rate': fl_fail_rate(traces, threshold),
        'or_fail_rate': or_fail_rate(traces),
    }


def build_report(traces: Sequence[EpisodeTrace], tasks: Mapping[str, TaskSpec],
                 worlds: Mapping[str, WorldModel], standoff: float = 1.5,
                 threshold: float = FL_FAIL_THRESHOLD, label: str = '') -> MetricReport:
    """Full metric suite plus the same numbers per difficulty label."""
    missing = [t.task_id for t in traces if t.task_id not in tasks]
    if missing:
        raise DataInconsistencyError(f"Traces without a task: {', '.join(sorted(missing))}")

    outcomes = OrderedDict((o.value, 0) for o in Outcome)
    for trace in traces:
        outcomes[trace.outcome.value] += 1

    per_difficulty = {}
    for difficulty in Difficulty:
        subset = [t for t in traces if tasks[t.task_id].difficulty == difficulty.value]
        if subset:
            per_difficulty[difficulty.value] = _summary(subset, tasks, worlds, standoff, threshold)

    report = MetricReport(
        outcomes=dict(outcomes), per_difficulty=per_difficulty, label=label,
        **_summary(traces, tasks, worlds, standoff, threshold)
    )
    logger.info(f"Report{' ' + label if label else ''}: SR={report.sr:.3f} SPL={report.spl:.3f} "
                f"n={report.n_tasks}")
    return report


def _pct(value: Optional[float]) -> str:
    return '-' if value is None else f"{100.0 * value:.1f}"


def _steps(value: Optional[float]) -> str:
    return '-' if value is None else f"{value:.2f}"


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> List[str]:
    widths = [max(len(str(cell)) for cell in column) for column in zip(header, *rows)]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join('-' * w for w in widths))
    for row in rows:
        lines.append("  ".join(str(c).rjust(w) if i else str(c).ljust(w)
                               for i, (c, w) in enumerate(zip(row, widths))))
    return lines


def format_table(report: MetricReport) -> str:
    header = ('Split', 'Tasks', 'SR (%)', 'SPL (%)', 'Average Steps', 'FL fail (%)', 'OR fail (%)')
    rows = [('all', report.n_tasks, _pct(report.sr), _pct(report.spl), _steps(report.avg_steps),
             _pct(report.fl_fail_rate), _pct(report.or_fail_rate))]
    for name, s in report.per_difficulty.items():
        rows.append((name, s['n_tasks'], _pct(s['sr']), _pct(s['spl']), _steps(s['avg_steps']),
                     _pct(s['fl_fail_rate']), _pct(s['or_fail_rate'])))
    lines = _table(header, rows)
    outcome_text = ", ".join(f"{k}={v}" for k, v in report.outcomes.items())
    lines.extend(["", f"Outcomes: {outcome_text}", SPL_NOTE])
    return "\n".join(lines)


ABLATION_COLUMNS = {
    'viewpoint': ('SR (%)', 'SPL (%)', 'Average Steps'),
    'choice': ('SR (%)', 'SPL (%)', 'Average Steps'),
    'floorloc': ('FL fail (%)', 'SR (%)', 'SPL (%)'),
}


def format_comparison(study: str, reports: Sequence[MetricReport]) -> str:
    """Side-by-side table, one row per configuration."""
    columns = ABLATION_COLUMNS.get(study, ('SR (%)', 'SPL (%)', 'Average Steps'))
    cells = {
        'SR (%)': lambda r: _pct(r.sr),
        'SPL (%)': lambda r: _pct(r.spl),
        'Average Steps': lambda r: _steps(r.avg_steps),
        'FL fail (%)': lambda r: _pct(r.fl_fail_rate),
    }
    rows = [(r.label, *(cells[c](r) for c in columns)) for r in reports]
    lines = _table(('Strategy', *columns), rows)
    lines.extend(["", SPL_NOTE])
    return "\n".join(lines)
