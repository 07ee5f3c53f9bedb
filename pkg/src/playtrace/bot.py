"""Scripted policy producing grasp / grow / shake episodes.

Each episode realizes one scenario in present or past tense. The controller
is closed-loop: it navigates by straight-line waypoint pursuit, predicts the
world's grasp resolution before closing the gripper, and keys its phase
changes on observed state (held object, contact, oscillation count). Present
scenarios keep the predicate true through the final step; past scenarios make
it true mid-episode and then retreat so it has lapsed by the end.

``rollout`` verifies the scenario contract with the oracle and resamples the
world (from the same rng stream, hence deterministically) on the rare
geometries the controller cannot realize within the step budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import oracle, world
from .world import (
    Action,
    GRIPPER_CLOSED,
    GRIPPER_OPEN,
    MAX_SPEED,
    T_STEPS,
    Trace,
    Vec2,
    WorldState,
    distance,
)

SCENARIO_KINDS = ("grasp", "grow", "shake")
PAST_PROBABILITY = 0.5

_SHAKE_STEPS = 12  # past-tense oscillation count before release
_OSC_AMPLITUDE = 0.1
_OSC_MARGIN = 0.82  # recenter before oscillating this close to a wall
_STANDOFF = 0.5  # carry distance held before the final growth approach
_GROW_CONTACT_STEPS = 3
_DRIVE_IN_AT = T_STEPS - 6  # when a present-tense grow starts closing in


class InfeasibleWorldError(RuntimeError):
    """No scenario of the requested kind can be realized in this world."""


class RolloutBudgetError(RuntimeError):
    """The generator could not realize a sound scenario within its retries."""


@dataclass(frozen=True)
class Scenario:
    kind: str
    target_index: int
    past_flag: bool
    supply_index: Optional[int] = None


@dataclass(frozen=True)
class ScenarioRequest:
    """Episode constraints used by the corpus generator: pin the scenario
    kind, the target's type and color word, and the tense."""

    kind: str
    target_type: str
    target_color: str
    past_flag: bool


def _grow_pairs(state: WorldState) -> list[tuple[int, int]]:
    pairs = []
    for ti, target in enumerate(state.objects):
        for si, supply in enumerate(state.objects):
            if si == ti:
                continue
            if world._grows_from(target, supply):
                pairs.append((ti, si))
    return pairs


def sample_scenario(state: WorldState, rng: np.random.Generator) -> Scenario:
    """Uniform over feasible kinds, then uniform over valid targets."""
    grow_pairs = _grow_pairs(state)
    kinds = [k for k in SCENARIO_KINDS if k != "grow" or grow_pairs]
    if not kinds:
        raise InfeasibleWorldError("no feasible scenario kind")
    kind = kinds[int(rng.integers(len(kinds)))]
    past = bool(rng.random() < PAST_PROBABILITY)
    if kind == "grow":
        ti, si = grow_pairs[int(rng.integers(len(grow_pairs)))]
        return Scenario(kind="grow", target_index=ti, past_flag=past, supply_index=si)
    ti = int(rng.integers(len(state.objects)))
    return Scenario(kind=kind, target_index=ti, past_flag=past)


class Controller:
    """Closed-loop scenario controller; one instance per episode."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.grasped_once = False
        self.released = False
        self.osc_steps = 0
        self.contact_steps = 0
        self.withdrawing = False

    # -- primitives ------------------------------------------------------

    @staticmethod
    def _toward(src: Vec2, dst: Vec2, cap: float = MAX_SPEED) -> Vec2:
        diff = dst - src
        if diff.norm() <= cap:
            return diff
        return diff.scaled_to(cap)

    @staticmethod
    def _away(src: Vec2, other: Vec2) -> Vec2:
        diff = src - other
        if diff.norm() < 1e-9:
            diff = Vec2(1.0, 0.0)
        step = diff.scaled_to(MAX_SPEED)
        # Steer along the axis with more room when pinned against a wall.
        nxt = (src + step).clamped()
        if distance(nxt, src) < MAX_SPEED * 0.5:
            step = Vec2(-step.y, step.x)
        return step

    def _approach_and_grasp(self, state: WorldState, index: int) -> Action:
        target = state.objects[index]
        delta = self._toward(state.body.pos, target.pos)
        predicted = world.BodyState(pos=(state.body.pos + delta).clamped(), gripper=GRIPPER_CLOSED)
        if world.grasp_winner(predicted, state.objects) == index:
            return Action(delta=delta, gripper_cmd=GRIPPER_CLOSED)
        return Action(delta=delta, gripper_cmd=GRIPPER_OPEN)

    def _hold(self) -> Action:
        return Action(delta=Vec2(0.0, 0.0), gripper_cmd=GRIPPER_CLOSED)

    def _idle(self) -> Action:
        return Action(delta=Vec2(0.0, 0.0), gripper_cmd=GRIPPER_OPEN)

    # -- scenario logic ---------------------------------------------------

    def act(self, state: WorldState, t: int) -> Action:
        kind = self.scenario.kind
        if kind == "grasp":
            return self._act_grasp(state)
        if kind == "shake":
            return self._act_shake(state)
        return self._act_grow(state, t)

    def _act_grasp(self, state: WorldState) -> Action:
        ti = self.scenario.target_index
        if state.held_index == ti:
            self.grasped_once = True
            if not self.scenario.past_flag:
                return self._hold()
            self.released = True
            return Action(delta=self._away(state.body.pos, state.objects[ti].pos), gripper_cmd=GRIPPER_OPEN)
        if self.released or self.grasped_once:
            target = state.objects[ti]
            if distance(state.body.pos, target.pos) < 0.5:
                return Action(delta=self._away(state.body.pos, target.pos), gripper_cmd=GRIPPER_OPEN)
            return self._idle()
        return self._approach_and_grasp(state, ti)

    def _act_shake(self, state: WorldState) -> Action:
        ti = self.scenario.target_index
        if state.held_index == ti:
            self.grasped_once = True
            if self.scenario.past_flag and self.osc_steps >= _SHAKE_STEPS:
                self.released = True
                return Action(delta=self._away(state.body.pos, state.objects[ti].pos), gripper_cmd=GRIPPER_OPEN)
            x = state.body.pos.x
            if abs(x) > _OSC_MARGIN:
                recenter = self._toward(state.body.pos, Vec2(0.0, state.body.pos.y))
                return Action(delta=recenter, gripper_cmd=GRIPPER_CLOSED)
            sign = 1.0 if self.osc_steps % 2 == 0 else -1.0
            self.osc_steps += 1
            return Action(delta=Vec2(sign * _OSC_AMPLITUDE, 0.0), gripper_cmd=GRIPPER_CLOSED)
        if self.released:
            target = state.objects[ti]
            if distance(state.body.pos, target.pos) < 0.5:
                return Action(delta=self._away(state.body.pos, target.pos), gripper_cmd=GRIPPER_OPEN)
            return self._idle()
        return self._approach_and_grasp(state, ti)

    def _act_grow(self, state: WorldState, t: int) -> Action:
        ti = self.scenario.target_index
        si = self.scenario.supply_index
        assert si is not None
        target = state.objects[ti]
        supply = state.objects[si]

        if state.held_index != si and not self.withdrawing:
            return self._approach_and_grasp(state, si)

        if self.scenario.past_flag:
            if world.contact(supply, target):
                self.contact_steps += 1
            if self.contact_steps >= _GROW_CONTACT_STEPS:
                self.withdrawing = True
            if self.withdrawing:
                # Keep carrying the supply; never leave it near a growable.
                if distance(state.body.pos, target.pos) < 0.75:
                    return Action(delta=self._away(state.body.pos, target.pos), gripper_cmd=GRIPPER_CLOSED)
                return self._hold()
            return Action(delta=self._toward(state.body.pos, target.pos), gripper_cmd=GRIPPER_CLOSED)

        # Present tense: loiter at standoff, then close in near the end so
        # the target is still below its size cap -- and growing -- at T.
        if t >= _DRIVE_IN_AT:
            return Action(delta=self._toward(state.body.pos, target.pos), gripper_cmd=GRIPPER_CLOSED)
        d = distance(state.body.pos, target.pos)
        if d > _STANDOFF + 0.1:
            gap = d - _STANDOFF
            return Action(delta=self._toward(state.body.pos, target.pos, cap=min(MAX_SPEED, gap)), gripper_cmd=GRIPPER_CLOSED)
        if d < _STANDOFF - 0.1:
            return Action(delta=self._away(state.body.pos, target.pos), gripper_cmd=GRIPPER_CLOSED)
        return self._hold()


def act(state: WorldState, scenario: Scenario, t: int, controller: Optional[Controller] = None) -> Action:
    """Single-step policy. Pass the episode's Controller to keep the phase
    memory (oscillation and contact counters) across calls."""
    ctl = controller or Controller(scenario)
    return ctl.act(state, t)


def run_episode(initial: WorldState, scenario: Scenario, rng: np.random.Generator, t_steps: int = T_STEPS) -> Trace:
    controller = Controller(scenario)
    states = [initial]
    for t in range(1, t_steps):
        action = controller.act(states[-1], t)
        states.append(world.step(states[-1], action, rng))
    return Trace(steps=tuple(states))


def scenario_satisfied(trace: Trace, scenario: Scenario) -> bool:
    """Contract check: present => predicate true at T; past => WAS-true."""
    view = oracle.TraceView(trace)
    timeline = view.pred[oracle._PRED_INDEX[scenario.kind], scenario.target_index]
    if scenario.past_flag:
        return bool(timeline[:-1].any() and not timeline[-1])
    return bool(timeline[-1])


def _required_objects(request: ScenarioRequest, rng: np.random.Generator) -> list[tuple[Optional[str], Optional[str]]]:
    required: list[tuple[Optional[str], Optional[str]]] = [(request.target_type, request.target_color)]
    if request.kind == "grow":
        category = world.BASE_CATEGORY[request.target_type]
        if category == "plant":
            required.append(("water", None))
        elif category == "animal":
            required.append((world.SUPPLIES[int(rng.integers(len(world.SUPPLIES)))], None))
        else:
            raise InfeasibleWorldError(f"{request.target_type} cannot grow")
    return required


def rollout_with_scenario(
    rng: np.random.Generator,
    request: Optional[ScenarioRequest] = None,
    max_retries: int = 40,
) -> tuple[Trace, Scenario]:
    """Generate one sound episode; retries draw fresh worlds from the same
    rng, so the outcome is a pure function of the generator state."""
    last_error: Optional[Exception] = None
    for _ in range(max_retries):
        try:
            if request is None:
                state = world.init_world(rng)
                scenario = sample_scenario(state, rng)
            else:
                required = _required_objects(request, rng)
                state = world.init_world(rng, required=required)
                scenario = Scenario(
                    kind=request.kind,
                    target_index=0,
                    past_flag=request.past_flag,
                    supply_index=1 if request.kind == "grow" else None,
                )
        except (world.PlacementError, InfeasibleWorldError) as err:
            last_error = err
            continue
        trace = run_episode(state, scenario, rng)
        if scenario_satisfied(trace, scenario):
            return trace, scenario
    raise RolloutBudgetError(f"no sound rollout in {max_retries} attempts (last: {last_error})")


def rollout(rng: np.random.Generator, request: Optional[ScenarioRequest] = None) -> Trace:
    return rollout_with_scenario(rng, request)[0]
