"""
VLD Navigation - Mission Types Module

Episode phases, outcomes, the mutable mission state and the episode trace
with its line-delimited JSON codec (header, one record per step, footer).
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from vldnav.perception.types import RequestInterpretation
from vldnav.utils.common import dumps_canonical
from vldnav.utils.error_handling import MalformedTraceError, atomic_write
from vldnav.world.types import DronePose

TRACE_SCHEMA = "vld-trace/1"


class MissionPhase(Enum):
    UNDERSTAND = "understand"
    ASCEND = "ascend"
    EXPLORE = "explore"
    APPROACH = "approach"
    DONE = "done"
    FAILED = "failed"


class Outcome(Enum):
    SUCCESS = "success"
    BUDGET_EXHAUSTED = "budget_exhausted"
    COLLISION = "collision"
    FLOORLOC_ABORT = "floorloc_abort"
    MISDELIVERY = "misdelivery"


@dataclass
class MissionState:
    phase: MissionPhase
    pose: DronePose
    step_budget: int
    step: int = 0
    interpretation: Optional[RequestInterpretation] = None
    floor_result: Optional[Any] = None
    path_length: float = 0.0
    vertical_length: float = 0.0
    outcome: Optional[Outcome] = None

    def transition(self, phase: MissionPhase):
        self.phase = phase

    @property
    def budget_left(self) -> int:
        return self.step_budget - self.step


@dataclass
class EpisodeTrace:
    """Self-contained record of one episode; enough to recompute every metric."""
    header: Dict[str, Any]
    records: List[Dict[str, Any]] = field(default_factory=list)
    footer: Optional[Dict[str, Any]] = None

    @property
    def task_id(self) -> str:
        return self.header['task_id']

    @property
    def complete(self) -> bool:
        return self.footer is not None

    def _footer_value(self, key: str) -> Any:
        if self.footer is None:
            raise MalformedTraceError(f"Trace {self.header.get('task_id')} has no footer")
        return self.footer[key]

    @property
    def outcome(self) -> Outcome:
        return Outcome(self._footer_value('outcome'))

    @property
    def steps_used(self) -> int:
        return int(self._footer_value('steps_used'))

    @property
    def path_length(self) -> float:
        return float(self._footer_value('path_length'))

    @property
    def vertical_length(self) -> float:
        return float(self._footer_value('vertical_length'))

    @property
    def claims(self) -> List[Dict[str, Any]]:
        return list(self._footer_value('claims'))

    @property
    def final_pose(self) -> DronePose:
        return DronePose.from_dict(self._footer_value('final_pose'))

    def executed_actions(self) -> List[Dict[str, Any]]:
        """Executed action dicts in order, floor localization included."""
        actions = []
        for record in self.records:
            for entry in record.get('actions', []):
                if entry.get('executed'):
                    actions.append(entry['action'])
        return actions

    def to_lines(self) -> List[str]:
        lines = [dumps_canonical({'record': 'header', 'schema': TRACE_SCHEMA, **self.header}, indent=None)]
        lines.extend(dumps_canonical({'record': 'step', **r}, indent=None) for r in self.records)
        if self.footer is not None:
            lines.append(dumps_canonical({'record': 'footer', **self.footer}, indent=None))
        return lines

    def dumps(self) -> str:
        return "\n".join(self.to_lines()) + "\n"

    @classmethod
    def from_lines(cls, lines: List[str]) -> 'EpisodeTrace':
        entries = []
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                entries.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise MalformedTraceError(f"Trace line {number} is not valid JSON: {e}") from e
        if not entries or entries[0].get('record') != 'header':
            raise MalformedTraceError("Trace does not start with a header record")
        header = dict(entries[0])
        if header.pop('schema', None) != TRACE_SCHEMA:
            raise MalformedTraceError(f"Trace schema is not {TRACE_SCHEMA}")
        header.pop('record')
        footer = None
        records = []
        for entry in entries[1:]:
            kind = entry.get('record')
            body = {k: v for k, v in entry.items() if k != 'record'}
            if footer is not None:
                raise MalformedTraceError("Records found after the trace footer")
            if kind == 'step':
                records.append(body)
            elif kind == 'footer':
                footer = body
            else:
                raise MalformedTraceError(f"Unknown trace record kind: {kind!r}")
        return cls(header=header, records=records, footer=footer)

    @classmethod
    def loads(cls, text: str) -> 'EpisodeTrace':
        return cls.from_lines(text.splitlines())

    def save(self, path: str):
        with atomic_write(path) as handle:
            handle.write(self.dumps())

    @classmethod
    def load(cls, path: str) -> 'EpisodeTrace':
        with open(path, 'r', encoding='utf-8') as handle:
            return cls.from_lines(handle.read().splitlines())
