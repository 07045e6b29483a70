"""
VLD Navigation - Evaluation Package

Task generation, metrics and report tables. The batch runner lives in
vldnav.evaluation.batch.
"""

from .tasks import (
    Difficulty, TaskSpec, difficulty_label, generate_task, generate_task_batch, load_tasks,
    min_turns, save_tasks
)
from .metrics import (
    MetricReport, build_report, compute_avg_steps, compute_spl, compute_sr, fl_fail_rate,
    format_comparison, format_table, or_fail_rate, shortest_path_length
)

__all__ = [
    'Difficulty', 'TaskSpec', 'difficulty_label', 'generate_task', 'generate_task_batch', 'load_tasks',
    'min_turns', 'save_tasks', 'MetricReport', 'build_report', 'compute_avg_steps', 'compute_spl',
    'compute_sr', 'fl_fail_rate', 'format_comparison', 'format_table', 'or_fail_rate',
    'shortest_path_length'
]
