"""The action repertoire, trajectory playback, and reward-based selection.

Ten preprogrammed actions plus a short no-op.  Behaviors are sequences:
a peek-a-boo turn is hide-face then home, a drumming turn is start-drum,
one or more drum-hits, then right-arm-down or home, with no-ops allowed
anywhere in between.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .config import EihaConfig
from .experience import Experience, ExperienceSpace

POSE_SIZE = 38  # head 3, eyes 3, left arm 7, left hand 9, right arm 7, right hand 9

SUCCESSOR_DEPTH = 3   # temporal links followed when collecting candidate actions
REWARD_FLOOR = 0.0    # reward assumed for actions absent from the candidates
K_NOVEL = 4.0         # probes beyond K_NOVEL * merge_threshold trigger exploration


class ActionId(str, Enum):
    RIGHT_ARM_DOWN = "right-arm-down"
    LEFT_ARM_DOWN = "left-arm-down"
    HOME = "home"
    HIDE_FACE = "hide-face"
    RIGHT_ARM_UP = "right-arm-up"
    LEFT_ARM_UP = "left-arm-up"
    RIGHT_ARM_WAVE = "right-arm-wave"
    LEFT_ARM_WAVE = "left-arm-wave"
    START_DRUM = "start-drum"
    DRUM_HIT = "drum-hit"
    NO_OP = "no-op"

    def __str__(self) -> str:  # logs and messages carry the hyphenated name
        return self.value


ACTION_IDS: tuple[ActionId, ...] = tuple(ActionId)


class Behavior(str, Enum):
    PEEKABOO = "peekaboo"
    DRUMMING = "drumming"

    def __str__(self) -> str:
        return self.value


PEEKABOO_ACTIONS = frozenset({ActionId.HIDE_FACE, ActionId.HOME})
DRUM_ACTIONS = frozenset({ActionId.START_DRUM, ActionId.DRUM_HIT,
                          ActionId.RIGHT_ARM_DOWN, ActionId.HOME})
DRUM_TURN_ENDERS = frozenset({ActionId.RIGHT_ARM_DOWN, ActionId.HOME})


# -- poses and trajectories ----------------------------------------------------

_HEAD = slice(0, 3)
_RIGHT_ARM = slice(22, 29)
_LEFT_ARM = slice(6, 13)
_LEFT_HAND = slice(13, 22)
_RIGHT_HAND = slice(29, 38)


def _pose(head: Sequence[float] = (0, 0, 0),
          left_arm: Sequence[float] = (0,) * 7,
          right_arm: Sequence[float] = (0,) * 7,
          left_hand: float = 0.0,
          right_hand: float = 0.0) -> np.ndarray:
    p = np.zeros(POSE_SIZE)
    p[_HEAD] = head
    p[_LEFT_ARM] = left_arm
    p[_RIGHT_ARM] = right_arm
    p[_LEFT_HAND] = left_hand
    p[_RIGHT_HAND] = right_hand
    return p


def _arm(pitch: float = 0.0, roll: float = 0.0, yaw: float = 0.0,
         elbow: float = 0.0, prosup: float = 0.0,
         wrist_pitch: float = 0.0, wrist_yaw: float = 0.0) -> tuple[float, ...]:
    return (pitch, roll, yaw, elbow, prosup, wrist_pitch, wrist_yaw)


HOME_POSE = _pose()
_ARM_RAISED = _arm(pitch=-1.5, roll=0.3)
_ARM_WAVE_L = _arm(pitch=-1.5, roll=0.5, elbow=0.8, wrist_yaw=0.8)
_ARM_WAVE_R = _arm(pitch=-1.5, roll=0.1, elbow=0.8, wrist_yaw=-0.8)
_ARM_AT_FACE = _arm(pitch=-1.8, roll=0.2, elbow=1.9)
_ARM_LIFTING = _arm(pitch=-1.6, roll=0.2, elbow=1.2)
_DRUM_READY = _arm(pitch=-0.5, roll=0.4, elbow=1.0)
_DRUM_STRIKE = _arm(pitch=-0.5, roll=0.4, elbow=1.5, wrist_pitch=-0.7)

DRUM_HIT_BEAT_OFFSET = 2  # trajectory tick at which the stick meets the drum


@dataclass(frozen=True)
class ActionSpec:
    id: ActionId
    duration: int
    keyframes: tuple[tuple[int, np.ndarray], ...]
    characteristic_for: Behavior | None = None

    def __post_init__(self) -> None:
        if self.duration < 1:
            raise ValueError(f"{self.id}: duration must be at least 1 tick")
        ticks = [t for t, _ in self.keyframes]
        if ticks != sorted(ticks) or ticks[0] != 0 or ticks[-1] > self.duration - 1:
            raise ValueError(f"{self.id}: keyframe ticks must be sorted within the duration")

    def pose_at(self, offset: int) -> np.ndarray:
        if not 0 <= offset < self.duration:
            raise ValueError(f"{self.id}: offset {offset} outside duration {self.duration}")
        frames = self.keyframes
        if offset >= frames[-1][0]:
            return frames[-1][1].copy()
        for (t0, p0), (t1, p1) in zip(frames, frames[1:]):
            if t0 <= offset <= t1:
                if t1 == t0:
                    return p1.copy()
                alpha = (offset - t0) / (t1 - t0)
                return p0 + alpha * (p1 - p0)
        return frames[-1][1].copy()


def _spec(action: ActionId, duration: int,
          keyframes: Sequence[tuple[int, np.ndarray]],
          characteristic_for: Behavior | None = None) -> ActionSpec:
    return ActionSpec(action, duration, tuple((t, p.copy()) for t, p in keyframes),
                      characteristic_for)


def _build_specs() -> dict[ActionId, ActionSpec]:
    up_r = _pose(right_arm=_ARM_RAISED)
    up_l = _pose(left_arm=_ARM_RAISED)
    hide_mid = _pose(left_arm=_ARM_LIFTING, right_arm=_ARM_LIFTING,
                     left_hand=0.3, right_hand=0.3)
    hide_end = _pose(head=(0, -0.2, 0), left_arm=_ARM_AT_FACE, right_arm=_ARM_AT_FACE,
                     left_hand=0.9, right_hand=0.9)
    ready = _pose(right_arm=_DRUM_READY)
    strike = _pose(right_arm=_DRUM_STRIKE)
    specs = [
        _spec(ActionId.RIGHT_ARM_DOWN, 10, [(0, up_r), (9, HOME_POSE)]),
        _spec(ActionId.LEFT_ARM_DOWN, 10, [(0, up_l), (9, HOME_POSE)]),
        _spec(ActionId.HOME, 10, [(0, HOME_POSE), (9, HOME_POSE)]),
        _spec(ActionId.HIDE_FACE, 12, [(0, HOME_POSE), (4, hide_mid), (11, hide_end)],
              Behavior.PEEKABOO),
        _spec(ActionId.RIGHT_ARM_UP, 10, [(0, HOME_POSE), (9, up_r)]),
        _spec(ActionId.LEFT_ARM_UP, 10, [(0, HOME_POSE), (9, up_l)]),
        _spec(ActionId.RIGHT_ARM_WAVE, 14,
              [(0, up_r), (4, _pose(right_arm=_ARM_WAVE_R)),
               (8, _pose(right_arm=_ARM_WAVE_L)), (13, up_r)]),
        _spec(ActionId.LEFT_ARM_WAVE, 14,
              [(0, up_l), (4, _pose(left_arm=_ARM_WAVE_L)),
               (8, _pose(left_arm=_ARM_WAVE_R)), (13, up_l)]),
        _spec(ActionId.START_DRUM, 10, [(0, HOME_POSE), (9, ready)]),
        _spec(ActionId.DRUM_HIT, 5, [(0, ready), (2, strike), (4, ready)],
              Behavior.DRUMMING),
        _spec(ActionId.NO_OP, 2, [(0, HOME_POSE), (1, HOME_POSE)]),
    ]
    return {s.id: s for s in specs}


ACTION_SPECS: dict[ActionId, ActionSpec] = _build_specs()


class StepResult(NamedTuple):
    pose: np.ndarray
    finished: bool
    beat: bool  # the drum-hit strike lands this tick


class ActionExecutor:
    """Plays one action trajectory at a time; actions are atomic."""

    def __init__(self) -> None:
        self._spec: ActionSpec | None = None
        self._offset = 0

    @property
    def action(self) -> ActionId:
        if self._spec is None:
            raise RuntimeError("no action loaded")
        return self._spec.id

    @property
    def offset(self) -> int:
        return self._offset

    @property
    def busy(self) -> bool:
        return self._spec is not None and self._offset < self._spec.duration

    def load(self, spec: ActionSpec) -> None:
        if self.busy:
            raise RuntimeError(f"cannot load {spec.id}: {self._spec.id} still executing")
        self._spec = spec
        self._offset = 0

    def step(self) -> StepResult:
        if self._spec is None:
            raise RuntimeError("no action loaded")
        if self._offset >= self._spec.duration:
            raise RuntimeError(f"{self._spec.id} already finished")
        pose = self._spec.pose_at(self._offset)
        beat = (self._spec.id is ActionId.DRUM_HIT
                and self._offset == DRUM_HIT_BEAT_OFFSET)
        finished = self._offset == self._spec.duration - 1
        self._offset += 1
        return StepResult(pose, finished, beat)


def step_executor(executor: ActionExecutor) -> StepResult:
    return executor.step()


# -- probabilistic selection ----------------------------------------------------

def softmax_distribution(rewards: Mapping[ActionId, float],
                         temperature: float,
                         floor: float = REWARD_FLOOR) -> np.ndarray:
    """Selection probabilities over ACTION_IDS; actions missing from
    ``rewards`` sit at ``floor`` (-inf excludes them entirely)."""
    values = np.array([rewards.get(a, floor) for a in ACTION_IDS]) / temperature
    top = values.max()
    if not np.isfinite(top):
        raise ValueError("softmax needs at least one finite reward")
    exp = np.exp(values - top)
    return exp / exp.sum()


def collect_candidates(space: ExperienceSpace, recalled: Experience,
                       extra: Experience | None = None,
                       ) -> dict[ActionId, tuple[float, int]]:
    """Candidate actions from a recalled experience (plus an optional
    second recall, e.g. the probe's same-action merge target) and their
    temporal successors: per action, the best reward and the experience
    supplying it (the recall to revise when the outcome disappoints)."""
    sources = [recalled, *space.successors(recalled.id, SUCCESSOR_DEPTH)]
    if extra is not None and extra.id != recalled.id:
        sources.extend([extra, *space.successors(extra.id, SUCCESSOR_DEPTH)])
    candidates: dict[ActionId, tuple[float, int]] = {}
    for exp in sources:
        action = ActionId(exp.action)
        if action not in candidates or exp.reward > candidates[action][0]:
            candidates[action] = (exp.reward, exp.id)
    return candidates


def select_action_detail(space: ExperienceSpace, probe: Experience | None,
                         cfg: EihaConfig, rng: np.random.Generator,
                         nearest: tuple[Experience, float] | None = None,
                         extra: Experience | None = None,
                         ) -> tuple[ActionId, int | None]:
    """Reward-weighted probabilistic choice among the 11 actions.

    With probability exploration_epsilon (or with no usable recall) the
    choice is uniform.  Otherwise the candidates come from the nearest
    experience and its temporal successors, and the draw is softmax at the
    configured temperature with absent actions at the floor reward.
    Returns the chosen action plus the id of the experience whose reward
    recommended it, if any.  ``nearest`` may carry a precomputed
    (experience, distance) pair for the same probe.
    """
    if rng.random() < cfg.exploration_epsilon:
        return ACTION_IDS[rng.integers(len(ACTION_IDS))], None
    if probe is None or len(space) == 0:
        return ACTION_IDS[rng.integers(len(ACTION_IDS))], None
    if nearest is None:
        nearest = space.nearest(probe)
    exp, dist = nearest
    if dist >= cfg.merge_threshold * K_NOVEL:
        return ACTION_IDS[rng.integers(len(ACTION_IDS))], None
    candidates = collect_candidates(space, exp, extra)
    rewards = {a: rv[0] for a, rv in candidates.items()}
    probs = softmax_distribution(rewards, cfg.softmax_temperature)
    choice = ACTION_IDS[rng.choice(len(ACTION_IDS), p=probs)]
    supplier = candidates[choice][1] if choice in candidates else None
    return choice, supplier


def select_action(space: ExperienceSpace, probe: Experience | None,
                  cfg: EihaConfig, rng: np.random.Generator,
                  nearest: tuple[Experience, float] | None = None) -> ActionId:
    return select_action_detail(space, probe, cfg, rng, nearest)[0]


# -- behavior grammar ------------------------------------------------------------

class TurnMatcher:
    """Recognizes completed robot turns of either behavior from the stream
    of completed actions, ignoring interspersed no-ops."""

    def __init__(self) -> None:
        self._hide_armed = False
        self._drum_open = False
        self._drum_hits = 0

    @property
    def in_drum_turn(self) -> bool:
        return self._drum_open

    def reset(self) -> None:
        self._hide_armed = False
        self._drum_open = False
        self._drum_hits = 0

    def on_action_complete(self, action: ActionId) -> Behavior | None:
        if action is ActionId.NO_OP:
            return None
        turn: Behavior | None = None
        if action is ActionId.HOME:
            if self._hide_armed:
                turn = Behavior.PEEKABOO
            elif self._drum_open and self._drum_hits >= 1:
                turn = Behavior.DRUMMING
            self._hide_armed = False
            self._drum_open = False
            self._drum_hits = 0
            return turn
        if action is ActionId.RIGHT_ARM_DOWN:
            if self._drum_open and self._drum_hits >= 1:
                turn = Behavior.DRUMMING
            self._hide_armed = False
            self._drum_open = False
            self._drum_hits = 0
            return turn
        if action is ActionId.HIDE_FACE:
            self._hide_armed = True
            self._drum_open = False
            self._drum_hits = 0
            return None
        if action is ActionId.START_DRUM:
            self._drum_open = True
            self._drum_hits = 0
            self._hide_armed = False
            return None
        if action is ActionId.DRUM_HIT:
            if self._drum_open:
                self._drum_hits += 1
            self._hide_armed = False
            return None
        # any other action breaks both pending sequences
        self.reset()
        return None


def behavior_turn_of(actions: Sequence[ActionId]) -> Behavior | None:
    """The behavior whose turn the sequence completes with its final
    action, or None."""
    matcher = TurnMatcher()
    turn: Behavior | None = None
    for action in actions:
        turn = matcher.on_action_complete(action)
    return turn


__all__ = [
    "ActionId", "ACTION_IDS", "ActionSpec", "ACTION_SPECS", "ActionExecutor",
    "StepResult", "step_executor", "select_action", "softmax_distribution",
    "Behavior", "TurnMatcher", "behavior_turn_of", "PEEKABOO_ACTIONS",
    "DRUM_ACTIONS", "DRUM_TURN_ENDERS", "HOME_POSE", "POSE_SIZE",
    "SUCCESSOR_DEPTH", "REWARD_FLOOR", "K_NOVEL", "DRUM_HIT_BEAT_OFFSET",
]
