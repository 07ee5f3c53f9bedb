"""Deterministic 2D playground: state, transition dynamics, feature encoding.

The world holds an agent body and N objects in [-1, 1]^2. The body moves by
bounded displacements and can grasp one object at a time with its gripper.
Animals wander on their own, and supplies grow their partner objects on
contact (food or water grows animals, water grows plants). All randomness
flows through an explicit numpy Generator, so every trajectory is exactly
reproducible from its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

# Geometry / dynamics constants.
WORLD_MIN = -1.0
WORLD_MAX = 1.0
N_OBJECTS = 3
T_STEPS = 30
AGENT_SIZE = 0.05
MAX_SPEED = 0.15
MIN_INIT_DISTANCE = 0.3
SIZE_MIN = 0.2
SIZE_MAX = 0.3
GROWTH_RATE = 0.01
MAX_SIZE = 0.35
ANIMAL_WANDER = 0.05
GRIPPER_OPEN = -1.0
GRIPPER_CLOSED = 1.0

# Object inventory: 32 types in 4 base categories. living_thing is derived
# (animals plus plants) and is never encoded in features.
ANIMALS = (
    "dog", "cat", "chameleon", "human", "fly",
    "parrot", "mouse", "lion", "pig", "cow",
)
PLANTS = (
    "cactus", "carnivorous", "flower", "tree", "bush",
    "grass", "algae", "tea", "rose", "bonsai",
)
FURNITURE = (
    "door", "chair", "desk", "lamp", "table",
    "cupboard", "sink", "window", "sofa", "carpet",
)
SUPPLIES = ("water", "food")

OBJECT_TYPES = ANIMALS + PLANTS + FURNITURE + SUPPLIES
TYPE_INDEX = {name: i for i, name in enumerate(OBJECT_TYPES)}

BASE_CATEGORY = {}
for _name in ANIMALS:
    BASE_CATEGORY[_name] = "animal"
for _name in PLANTS:
    BASE_CATEGORY[_name] = "plant"
for _name in FURNITURE:
    BASE_CATEGORY[_name] = "furniture"
for _name in SUPPLIES:
    BASE_CATEGORY[_name] = "supply"

CATEGORY_MEMBERS = {
    "animal": frozenset(ANIMALS),
    "plant": frozenset(PLANTS),
    "furniture": frozenset(FURNITURE),
    "supply": frozenset(SUPPLIES),
    "living_thing": frozenset(ANIMALS + PLANTS),
}

# Each color word owns an axis-aligned RGB box. The boxes are pairwise
# disjoint (dominant channel >= 0.6 vs. <= 0.35 elsewhere), so color-word
# membership is exact and invertible.
COLOR_BOXES = {
    "red": ((0.6, 1.0), (0.0, 0.35), (0.0, 0.35)),
    "green": ((0.0, 0.35), (0.6, 1.0), (0.0, 0.35)),
    "blue": ((0.0, 0.35), (0.0, 0.35), (0.6, 1.0)),
}
COLOR_WORDS = ("red", "green", "blue")

BODY_FEATURES = 3
OBJECT_FEATURES = 2 + 1 + 3 + len(OBJECT_TYPES) + 1  # pos, size, rgb, one-hot, grasped


class PlacementError(RuntimeError):
    """Raised when rejection sampling cannot place objects; retriable."""


@dataclass(frozen=True)
class Vec2:
    x: float
    y: float

    def clamped(self) -> "Vec2":
        return Vec2(
            min(max(self.x, WORLD_MIN), WORLD_MAX),
            min(max(self.y, WORLD_MIN), WORLD_MAX),
        )

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def scaled_to(self, length: float) -> "Vec2":
        n = self.norm()
        if n < 1e-12:
            return Vec2(0.0, 0.0)
        return Vec2(self.x * length / n, self.y * length / n)


def distance(a: Vec2, b: Vec2) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class ObjectState:
    pos: Vec2
    size: float
    rgb: tuple[float, float, float]
    type_name: str
    grasped: bool = False

    @property
    def category(self) -> str:
        return BASE_CATEGORY[self.type_name]


@dataclass(frozen=True)
class BodyState:
    pos: Vec2
    gripper: float = GRIPPER_OPEN


@dataclass(frozen=True)
class WorldState:
    body: BodyState
    objects: tuple[ObjectState, ...]
    held_index: Optional[int] = None


@dataclass(frozen=True)
class Action:
    """One control step: a displacement request plus a gripper command."""

    delta: Vec2
    gripper_cmd: float = GRIPPER_OPEN

    def clamped_delta(self) -> Vec2:
        n = self.delta.norm()
        if n > MAX_SPEED:
            return self.delta.scaled_to(MAX_SPEED)
        return self.delta


@dataclass(frozen=True)
class Trace:
    """Episode history: exactly T world states, state 0 being the initial one."""

    steps: tuple[WorldState, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def feature_tensor(self) -> np.ndarray:
        """(T, 1+N, OBJECT_FEATURES) float32; body row zero-padded to object width."""
        t_steps = len(self.steps)
        n = len(self.steps[0].objects)
        out = np.zeros((t_steps, 1 + n, OBJECT_FEATURES), dtype=np.float32)
        for t, state in enumerate(self.steps):
            body_row, obj_rows = encode_features(state)
            out[t, 0, : len(body_row)] = body_row
            out[t, 1:, :] = obj_rows
        return out


def color_word_of(rgb: Sequence[float]) -> Optional[str]:
    """Exact color-word membership; None when outside every box."""
    for word, box in COLOR_BOXES.items():
        if all(lo <= c <= hi for c, (lo, hi) in zip(rgb, box)):
            return word
    return None


def sample_color(rng: np.random.Generator, word: Optional[str] = None) -> tuple[str, tuple[float, float, float]]:
    if word is None:
        word = COLOR_WORDS[rng.integers(len(COLOR_WORDS))]
    box = COLOR_BOXES[word]
    rgb = tuple(float(rng.uniform(lo, hi)) for lo, hi in box)
    return word, rgb


def grasp_eligible(body: BodyState, obj: ObjectState) -> bool:
    """Strictly-below threshold (agent_size + object_size) / 2."""
    return distance(body.pos, obj.pos) < (AGENT_SIZE + obj.size) / 2.0


def contact(o1: ObjectState, o2: ObjectState) -> bool:
    """Touching when the center distance is at most the mean of the two sizes."""
    return distance(o1.pos, o2.pos) <= (o1.size + o2.size) / 2.0


def grasp_winner(body: BodyState, objects: Sequence[ObjectState]) -> Optional[int]:
    """Index of the object a closing gripper would acquire: nearest eligible,
    ties broken by lowest index."""
    best: Optional[int] = None
    best_d = math.inf
    for i, obj in enumerate(objects):
        if grasp_eligible(body, obj):
            d = distance(body.pos, obj.pos)
            if d < best_d:
                best = i
                best_d = d
    return best


def _grows_from(target: ObjectState, supply: ObjectState) -> bool:
    if supply.category != "supply":
        return False
    if target.category == "animal":
        return True
    if target.category == "plant":
        return supply.type_name == "water"
    return False


def init_world(
    rng: np.random.Generator,
    required: Optional[Sequence[tuple[Optional[str], Optional[str]]]] = None,
    n_objects: int = N_OBJECTS,
    max_attempts: int = 400,
) -> WorldState:
    """Fresh world: body at the origin with an open gripper, n objects placed
    with pairwise distance > MIN_INIT_DISTANCE, sizes uniform in [0.2, 0.3].

    ``required`` pins (type_name, color_word) pairs to the first object slots
    so that callers can guarantee a scenario is realizable; None entries are
    sampled. Types are drawn without replacement.
    """
    required = list(required or [])
    if len(required) > n_objects:
        raise ValueError("more required objects than slots")

    type_names: list[str] = []
    for type_name, _ in required:
        if type_name is not None and type_name not in TYPE_INDEX:
            raise ValueError(f"unknown object type {type_name!r}")
        if type_name is not None:
            type_names.append(type_name)
    pool = [t for t in OBJECT_TYPES if t not in type_names]
    needed = n_objects - len(type_names)
    picks = list(rng.choice(len(pool), size=needed, replace=False))
    fill = [pool[int(i)] for i in picks]

    slots: list[tuple[str, Optional[str]]] = []
    for type_name, color in required:
        if type_name is None:
            type_name = fill.pop(0)
        slots.append((type_name, color))
    for type_name in fill:
        slots.append((type_name, None))

    for _ in range(max_attempts):
        positions = [
            Vec2(float(rng.uniform(WORLD_MIN, WORLD_MAX)), float(rng.uniform(WORLD_MIN, WORLD_MAX)))
            for _ in range(n_objects)
        ]
        ok = all(
            distance(positions[i], positions[j]) > MIN_INIT_DISTANCE
            for i in range(n_objects)
            for j in range(i + 1, n_objects)
        )
        if not ok:
            continue
        objects = []
        for (type_name, color), pos in zip(slots, positions):
            size = float(rng.uniform(SIZE_MIN, SIZE_MAX))
            _, rgb = sample_color(rng, color)
            objects.append(ObjectState(pos=pos, size=size, rgb=rgb, type_name=type_name))
        return WorldState(
            body=BodyState(pos=Vec2(0.0, 0.0), gripper=GRIPPER_OPEN),
            objects=tuple(objects),
            held_index=None,
        )
    raise PlacementError(f"no valid placement after {max_attempts} attempts")


def step(state: WorldState, action: Action, rng: np.random.Generator) -> WorldState:
    """One transition. Pure in (state, action, rng-state).

    Phase order: body moves, gripper updates, grasp/release resolves, the held
    object tracks the body, loose animals wander, then growth applies wherever
    a supply touches a compatible partner in the new configuration.
    """
    delta = action.clamped_delta()
    body = BodyState(pos=(state.body.pos + delta).clamped(), gripper=float(action.gripper_cmd))

    objects = list(state.objects)
    held = state.held_index

    if body.gripper == GRIPPER_CLOSED and held is None:
        winner = grasp_winner(body, objects)
        if winner is not None:
            objects[winner] = replace(objects[winner], grasped=True)
            held = winner
    elif body.gripper != GRIPPER_CLOSED and held is not None:
        objects[held] = replace(objects[held], grasped=False)
        held = None

    if held is not None:
        objects[held] = replace(objects[held], pos=body.pos)

    for i, obj in enumerate(objects):
        if obj.category == "animal" and not obj.grasped:
            wander = Vec2(
                float(rng.uniform(-ANIMAL_WANDER, ANIMAL_WANDER)),
                float(rng.uniform(-ANIMAL_WANDER, ANIMAL_WANDER)),
            )
            objects[i] = replace(obj, pos=(obj.pos + wander).clamped())

    # Contacts are evaluated on the post-move configuration with pre-growth
    # sizes; every touched partner gains at most one increment per step.
    grown = list(objects)
    for i, target in enumerate(objects):
        if target.category not in ("animal", "plant"):
            continue
        touched = any(
            _grows_from(target, supply) and contact(target, supply)
            for j, supply in enumerate(objects)
            if j != i
        )
        if touched and target.size < MAX_SIZE:
            grown[i] = replace(grown[i], size=min(target.size + GROWTH_RATE, MAX_SIZE))

    return WorldState(body=body, objects=tuple(grown), held_index=held)


def encode_features(state: WorldState) -> tuple[np.ndarray, np.ndarray]:
    """Ragged feature rows: body (3,) and objects (N, 39).

    Object layout: x, y, size, r, g, b, 32-way type one-hot, grasped flag.
    """
    body = np.array([state.body.pos.x, state.body.pos.y, state.body.gripper], dtype=np.float32)
    rows = np.zeros((len(state.objects), OBJECT_FEATURES), dtype=np.float32)
    for i, obj in enumerate(state.objects):
        rows[i, 0] = obj.pos.x
        rows[i, 1] = obj.pos.y
        rows[i, 2] = obj.size
        rows[i, 3:6] = obj.rgb
        rows[i, 6 + TYPE_INDEX[obj.type_name]] = 1.0
        rows[i, 38] = 1.0 if obj.grasped else 0.0
    return body, rows
