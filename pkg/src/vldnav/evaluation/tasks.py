"""
VLD Navigation - Task Generation Module

This module turns generated worlds into delivery tasks: a decorated target
window, a start pose near the building base, a templated request text with
distracting details, and a difficulty label from the number of building
corners the drone must round before the target can be seen.
"""

import json
import math
import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from vldnav.utils.common import derive_seed, dumps_canonical
from vldnav.utils.error_handling import (
    GenerationInfeasibleError, NoDecoratedWindowError, SchemaError, atomic_write
)
from vldnav.world.geometry import facing_facade, segment_clearance
from vldnav.world.generator import OBJECT_CATALOG
from vldnav.world.types import Building, DronePose, ObjectColor, ObjectTag, Window, WorldModel

logger = logging.getLogger('vldnav.evaluation.tasks')

TASK_SCHEMA = "vld-task/1"


class Difficulty(Enum):
    EASY = "easy"
    MODERATE = "moderate"
    HARD = "hard"


# Fallback order when a world cannot produce the requested label
DIFFICULTY_FALLBACK = {
    Difficulty.EASY: (Difficulty.EASY, Difficulty.MODERATE, Difficulty.HARD),
    Difficulty.MODERATE: (Difficulty.MODERATE, Difficulty.EASY, Difficulty.HARD),
    Difficulty.HARD: (Difficulty.HARD, Difficulty.MODERATE, Difficulty.EASY),
}

REQUEST_TEMPLATES = (
    "Hi, please bring my parcel to the {ordinal} floor. You will recognise my window by the {object}.",
    "Deliver to floor {floor}. Look for the window with a {object} in it.",
    "My flat is on the {ordinal} floor and there is a {object} at the window.",
    "Could you drop the package at the {ordinal} floor window? It's the one with the {object}.",
    "Parcel for the {ordinal} floor, please. I've put a {object} by my window so you can find it.",
    "I live {floor} floors up, counting the ground floor as one. Find the {object} at my window.",
    "Window delivery: {ordinal} floor, marked with a {object}.",
    "Please leave the box at the window with the {object}; that's on the {ordinal} floor.",
)

DISTRACTOR_TEMPLATES = (
    " My neighbour has a {decoy} but that is not my window.",
    " Don't mix it up with the {decoy} one floor below.",
    " The building has a {decoy} somewhere too, ignore it.",
    " The weather is lovely today, thanks a lot!",
    " I ordered this last week and I'm really looking forward to it.",
    " There's also a {decoy} on another side of the building.",
)

ORDINALS = ("first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth",
            "ninth", "tenth", "eleventh", "twelfth")


def ordinal(n: int) -> str:
    if 1 <= n <= len(ORDINALS):
        return ORDINALS[n - 1]
    suffix = 'th' if 10 <= n % 100 <= 20 else {1: 'st', 2: 'nd', 3: 'rd'}.get(n % 10, 'th')
    return f"{n}{suffix}"


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    world_ref: str
    target_window_id: str
    target_floor: int
    target_object: ObjectTag
    request_text: str
    start_pose: DronePose
    difficulty: str
    min_turns: int = 0
    seed: int = 0

    def validate(self, world: WorldModel):
        window = world.window(self.target_window_id)
        if window.floor != self.target_floor:
            raise SchemaError(f"Task {self.task_id}: window floor {window.floor} != F_tar {self.target_floor}")
        if self.target_object not in window.decorations:
            raise SchemaError(f"Task {self.task_id}: target window does not carry '{self.target_object.describe()}'")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'task_id': self.task_id,
            'world_ref': self.world_ref,
            'target_window_id': self.target_window_id,
            'target_floor': self.target_floor,
            'target_object': self.target_object.to_dict(),
            'request_text': self.request_text,
            'start_pose': self.start_pose.to_dict(),
            'difficulty': self.difficulty,
            'min_turns': self.min_turns,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TaskSpec':
        difficulty = data['difficulty']
        Difficulty(difficulty)
        return cls(
            task_id=data['task_id'],
            world_ref=data['world_ref'],
            target_window_id=data['target_window_id'],
            target_floor=int(data['target_floor']),
            target_object=ObjectTag.from_dict(data['target_object']),
            request_text=data['request_text'],
            start_pose=DronePose.from_dict(data['start_pose']),
            difficulty=difficulty,
            min_turns=int(data.get('min_turns', 0)),
            seed=int(data.get('seed', 0)),
        )


def facade_turns(num_facades: int, start_facade: int, target_facade: int) -> int:
    """Corner roundings between two facades along the shorter direction."""
    d = (target_facade - start_facade) % num_facades
    return min(d, num_facades - d)


def min_turns(world: WorldModel, start_pose: DronePose, target_window: Window) -> int:
    building = world.building_of(target_window.id)
    start_facade = facing_facade(building, start_pose.x, start_pose.y, start_pose.yaw)
    return facade_turns(building.num_facades, start_facade, target_window.facade_index)


def difficulty_label(turns: int) -> Difficulty:
    if turns < 0:
        raise ValueError(f"Turn count must be non-negative, got {turns}")
    if turns < 2:
        return Difficulty.EASY
    if turns <= 3:
        return Difficulty.MODERATE
    return Difficulty.HARD


def start_pose_for(building: Building, facade: int, rng: np.random.Generator,
                   start_distance: Tuple[float, float]) -> DronePose:
    """Pose at ground level in front of a facade, facing it squarely."""
    (x0, y0), (x1, y1) = building.facade(facade)
    nx, ny = building.facade_normal(facade)
    along = float(rng.uniform(0.3, 0.7))
    distance = float(rng.uniform(start_distance[0], start_distance[1]))
    x = x0 + along * (x1 - x0) + distance * nx
    y = y0 + along * (y1 - y0) + distance * ny
    return DronePose(round(x, 6), round(y, 6), 0.0, math.atan2(-ny, -nx))


def compose_request(rng: np.random.Generator, floor: int, tag: ObjectTag, decoys: Sequence[ObjectTag]) -> str:
    template = REQUEST_TEMPLATES[int(rng.integers(len(REQUEST_TEMPLATES)))]
    text = template.format(ordinal=ordinal(floor), floor=floor, object=tag.describe())
    for _ in range(int(rng.integers(1, 3))):
        distractor = DISTRACTOR_TEMPLATES[int(rng.integers(len(DISTRACTOR_TEMPLATES)))]
        decoy = decoys[int(rng.integers(len(decoys)))] if decoys else tag
        text += distractor.format(decoy=decoy.describe())
    return text


def _decoy_tags(rng: np.random.Generator, world: WorldModel, tag: ObjectTag) -> List[ObjectTag]:
    """Other objects worth mentioning: decorations in the world, else catalog objects."""
    decoys = [t for w in world.decorated_windows() for t in w.decorations if t != tag]
    if decoys:
        return decoys
    label = OBJECT_CATALOG[tag.category][int(rng.integers(len(OBJECT_CATALOG[tag.category])))]
    colors = [c.value for c in ObjectColor if c.value != tag.color]
    return [ObjectTag(tag.category, colors[int(rng.integers(len(colors)))], label)]


def _pose_is_clear(world: WorldModel, pose: DronePose, safety: float = 0.5) -> bool:
    return segment_clearance(world, (pose.x, pose.y), (pose.x, pose.y), pose.z, safety) >= safety


def generate_task(world: WorldModel, seed: int, difficulty: Optional[Difficulty] = None,
                  task_id: str = "task-0000", world_ref: str = "",
                  start_distance: Tuple[float, float] = (8.0, 12.0)) -> TaskSpec:
    """
    One deterministic task for a world.

    With a difficulty target, only (window, start facade) pairs producing that
    label are considered; GenerationInfeasibleError when the world has none.
    """
    decorated = world.decorated_windows()
    if not decorated:
        raise NoDecoratedWindowError(f"World seed {world.seed} has no decorated window")
    rng = np.random.default_rng(seed)

    for w_idx in rng.permutation(len(decorated)):
        target = decorated[int(w_idx)]
        building = world.building_of(target.id)
        facades = list(range(building.num_facades))
        if difficulty is not None:
            facades = [f for f in facades
                       if difficulty_label(facade_turns(building.num_facades, f, target.facade_index)) == difficulty]
        if not facades:
            continue
        facade = facades[int(rng.integers(len(facades)))]
        pose = start_pose_for(building, facade, rng, start_distance)
        if not _pose_is_clear(world, pose):
            continue
        tag = target.decorations[0]
        turns = min_turns(world, pose, target)
        return TaskSpec(
            task_id=task_id,
            world_ref=world_ref,
            target_window_id=target.id,
            target_floor=target.floor,
            target_object=tag,
            request_text=compose_request(rng, target.floor, tag, _decoy_tags(rng, world, tag)),
            start_pose=pose,
            difficulty=difficulty_label(turns).value,
            min_turns=turns,
            seed=int(seed),
        )
    wanted = difficulty.value if difficulty else 'any'
    raise GenerationInfeasibleError(f"World seed {world.seed} cannot produce a '{wanted}' task")


def difficulty_quotas(count: int, mix: Dict[str, float]) -> List[Difficulty]:
    """Largest-remainder split of `count` tasks over the requested mix, in label order."""
    weights = [max(0.0, float(mix.get(d.value, 0.0))) for d in Difficulty]
    total = sum(weights)
    if total <= 0.0:
        raise GenerationInfeasibleError("Difficulty mix must have a positive weight")
    exact = [count * w / total for w in weights]
    quotas = [int(math.floor(e)) for e in exact]
    by_remainder = sorted(range(len(exact)), key=lambda i: (-(exact[i] - quotas[i]), i))
    for i in by_remainder[:count - sum(quotas)]:
        quotas[i] += 1
    labels = []
    for d, q in zip(Difficulty, quotas):
        labels.extend([d] * q)
    return labels


def generate_task_batch(worlds: Sequence[WorldModel], count: int, mix: Dict[str, float], seed: int,
                        world_refs: Optional[Sequence[str]] = None,
                        start_distance: Tuple[float, float] = (8.0, 12.0)) -> List[TaskSpec]:
    """Tasks spread round-robin over worlds with difficulty quotas and nearest-label fallback."""
    if not worlds:
        raise GenerationInfeasibleError("Task generation needs at least one world")
    world_refs = list(world_refs) if world_refs else [f"seed:{w.seed}" for w in worlds]
    labels = difficulty_quotas(count, mix)
    order = np.random.default_rng(derive_seed(seed, "task-mix")).permutation(len(labels))
    labels = [labels[int(i)] for i in order]

    tasks = []
    for i, wanted in enumerate(labels):
        w_idx = i % len(worlds)
        task_seed = derive_seed(seed, f"task:{i}")
        task = None
        for label in DIFFICULTY_FALLBACK[wanted]:
            try:
                task = generate_task(worlds[w_idx], task_seed, label, f"task-{i:04d}",
                                     world_refs[w_idx], start_distance)
                break
            except NoDecoratedWindowError:
                raise
            except GenerationInfeasibleError:
                continue
        if task is None:
            raise GenerationInfeasibleError(f"No feasible task for world {world_refs[w_idx]}")
        if task.difficulty != wanted.value:
            logger.info(f"task-{i:04d}: '{wanted.value}' infeasible on {world_refs[w_idx]}, "
                        f"using '{task.difficulty}'")
        tasks.append(task)
    return tasks


def dataset_statistics(tasks: Sequence[TaskSpec], worlds: Dict[str, WorldModel]) -> Dict[str, Any]:
    """Histograms of object category, target floor, difficulty and building type."""
    building_types = Counter()
    for task in tasks:
        world = worlds.get(task.world_ref)
        if world is not None:
            building_types[world.building_of(task.target_window_id).building_type] += 1
    return {
        'count': len(tasks),
        'categories': dict(sorted(Counter(t.target_object.category for t in tasks).items())),
        'floors': {str(k): v for k, v in sorted(Counter(t.target_floor for t in tasks).items())},
        'difficulty': {d.value: sum(1 for t in tasks if t.difficulty == d.value) for d in Difficulty},
        'building_types': dict(sorted(building_types.items())),
    }


def format_statistics(stats: Dict[str, Any]) -> str:
    lines = [f"Tasks: {stats['count']}"]
    for key, title in (('difficulty', 'Difficulty'), ('floors', 'Target floor'),
                       ('categories', 'Object category'), ('building_types', 'Building type')):
        lines.append(f"{title}:")
        for name, value in stats[key].items():
            lines.append(f"  {name:<12} {value:>5}")
    return "\n".join(lines)


def save_tasks(path: str, tasks: Sequence[TaskSpec], config: Optional[Dict[str, Any]] = None,
               statistics: Optional[Dict[str, Any]] = None):
    document = {
        'schema': TASK_SCHEMA,
        'config': config or {},
        'statistics': statistics or {},
        'tasks': [t.to_dict() for t in tasks],
    }
    with atomic_write(path) as handle:
        handle.write(dumps_canonical(document) + "\n")


def load_tasks(path: str) -> Tuple[List[TaskSpec], Dict[str, Any]]:
    """Tasks and the document metadata (config, statistics)."""
    with open(path, 'r', encoding='utf-8') as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path} is not valid JSON: {e}") from e
    if document.get('schema') != TASK_SCHEMA:
        raise SchemaError(f"{path}: expected schema {TASK_SCHEMA}, found {document.get('schema')!r}")
    try:
        tasks = [TaskSpec.from_dict(t) for t in document.get('tasks', [])]
    except (KeyError, ValueError, TypeError) as e:
        raise SchemaError(f"{path}: malformed task record: {e}") from e
    meta = {k: v for k, v in document.items() if k != 'tasks'}
    return tasks, meta
