"""Simulated human interaction partners and the live-event interface.

Scripted partners stand in for a trained teacher/playmate: they gaze at
the robot while the game is alive, respond to completed robot turns with
turns of their own, look away briefly when the robot does something
off-game, lose interest when nothing game-like happens, and occasionally
seed a game themselves.  The same PartnerState container is driven by
external events in live mode, so the learning core cannot tell scripted
and live play apart.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .actions import ActionId, Behavior
from .config import EihaConfig


@dataclass(frozen=True)
class PartnerState:
    present: bool = True
    hiding: bool = False
    hide_elapsed: int = 0          # ticks spent in the current hide
    drummed_this_tick: bool = False
    gaze_on_robot: bool = False

    def __post_init__(self) -> None:
        if self.hide_elapsed > 0 and not self.hiding:
            raise ValueError("hide_elapsed > 0 requires hiding")


class PartnerEvent(str, Enum):
    HIDE_START = "hide_start"
    HIDE_END = "hide_end"
    DRUM_BEAT = "drum_beat"
    GAZE_ON = "gaze_on"
    GAZE_OFF = "gaze_off"
    PRESENT = "present"
    ABSENT = "absent"

    def __str__(self) -> str:
        return self.value


def advance_tick(state: PartnerState) -> PartnerState:
    """Per-tick bookkeeping for event-driven state: drum pulses last one
    tick and hide time accumulates."""
    return replace(
        state,
        drummed_this_tick=False,
        hide_elapsed=state.hide_elapsed + 1 if state.hiding else 0,
    )


def apply_external_event(state: PartnerState, event: PartnerEvent | str) -> PartnerState:
    try:
        event = PartnerEvent(event)
    except ValueError:
        raise ValueError(f"unknown partner event {event!r}") from None
    if event is PartnerEvent.HIDE_START:
        return replace(state, hiding=True, hide_elapsed=max(state.hide_elapsed, 1))
    if event is PartnerEvent.HIDE_END:
        return replace(state, hiding=False, hide_elapsed=0)
    if event is PartnerEvent.DRUM_BEAT:
        return replace(state, drummed_this_tick=True)
    if event is PartnerEvent.GAZE_ON:
        return replace(state, gaze_on_robot=True)
    if event is PartnerEvent.GAZE_OFF:
        return replace(state, gaze_on_robot=False)
    if event is PartnerEvent.PRESENT:
        return replace(state, present=True)
    return PartnerState(present=False, hiding=False, hide_elapsed=0,
                        drummed_this_tick=False, gaze_on_robot=False)


@dataclass(frozen=True)
class ObservedRobot:
    """What a partner can see of the robot during one tick."""
    action: ActionId
    action_started: bool
    action_completed: Optional[ActionId]
    completed_turn: Optional[Behavior]
    robot_beat: bool
    mid_drum_turn: bool


class Variant(str, Enum):
    PEEKABOO_TEACHER = "peekaboo_teacher"
    DRUM_TEACHER = "drum_teacher"
    DUAL_TEACHER = "dual_teacher"
    INATTENTIVE = "inattentive"
    SWITCHING_TEACHER = "switching_teacher"

    def __str__(self) -> str:
        return self.value


_GAME_SETS = {
    Behavior.PEEKABOO: frozenset({ActionId.HIDE_FACE, ActionId.HOME, ActionId.NO_OP}),
    Behavior.DRUMMING: frozenset({ActionId.START_DRUM, ActionId.DRUM_HIT,
                                  ActionId.RIGHT_ARM_DOWN, ActionId.HOME,
                                  ActionId.NO_OP}),
}

_CHARACTERISTIC = {Behavior.PEEKABOO: ActionId.HIDE_FACE,
                   Behavior.DRUMMING: ActionId.DRUM_HIT}


@dataclass(frozen=True)
class PartnerScript:
    variant: Variant
    latency_ticks: int
    hide_range: tuple[float, float]       # seconds, strictly inside (min_time, max_time)
    beats_range: tuple[int, int]
    beat_interval_ticks: int
    seed_period_ticks: int
    aversion_ticks: int
    boredom_ticks: int
    interest_ticks: int
    phase_patience_ticks: int
    seed: int

    @classmethod
    def from_config(cls, variant: Variant | str, cfg: EihaConfig, seed: int) -> "PartnerScript":
        res = cfg.resolution
        return cls(
            variant=Variant(variant),
            latency_ticks=int(round(cfg.partner_latency * res)),
            hide_range=(cfg.partner_hide_min, cfg.partner_hide_max),
            beats_range=(cfg.partner_beats_min, cfg.partner_beats_max),
            beat_interval_ticks=max(1, int(round(cfg.partner_beat_interval * res))),
            seed_period_ticks=int(round(cfg.partner_seed_period * res)),
            aversion_ticks=int(round(cfg.partner_aversion * res)),
            boredom_ticks=int(round(cfg.partner_boredom * res)),
            interest_ticks=int(round(cfg.partner_interest * res)),
            phase_patience_ticks=int(round(cfg.partner_phase_patience * res)),
            seed=seed,
        )


class ScriptedPartner:
    """Deterministic teacher policy given (script seed, robot action stream)."""

    def __init__(self, script: PartnerScript, cfg: EihaConfig,
                 rng: np.random.Generator | None = None) -> None:
        self.script = script
        self.cfg = cfg
        self._rng = rng if rng is not None else np.random.default_rng(script.seed)
        v = script.variant
        self._teaches = {
            Variant.PEEKABOO_TEACHER: (Behavior.PEEKABOO,),
            Variant.DRUM_TEACHER: (Behavior.DRUMMING,),
            Variant.DUAL_TEACHER: (Behavior.PEEKABOO, Behavior.DRUMMING),
            Variant.SWITCHING_TEACHER: (Behavior.PEEKABOO, Behavior.DRUMMING),
            Variant.INATTENTIVE: (),
        }[v]
        self._teaching_index = 0
        self._phase_started = 0
        self._pending: Optional[tuple[Behavior, int]] = None  # (behavior, due tick)
        self._hide_left = 0
        self._hide_elapsed = 0
        self._beats_left = 0
        self._next_beat_in = 0
        self._responding_to: Optional[Behavior] = None
        self._aversion_left = 0
        self._last_round = 0       # seeding clock: turns and own play
        self._last_robot_turn = 0  # sustained gaze must be earned by robot turns
        self._seeds_unanswered = 0  # demos dry up until the robot reciprocates
        self._interest_left = 0   # brief gaze drawn by characteristic actions
        self._interest_charges = 3  # empty gestures habituate until a turn completes
        self._exchange: Optional[Behavior] = None  # the game currently being played
        self._exchange_tick = 0
        self._robot_hides_in_row = 0  # hides without an intervening reveal
        self._reinvite_due: Optional[int] = None  # keep a stalled rally alive
        self._reinvites_left = 0
        self._responses = {Behavior.PEEKABOO: 0, Behavior.DRUMMING: 0}
        # the teacher judges mastery like a coder: consecutive alternations
        self._alternations = {Behavior.PEEKABOO: 0, Behavior.DRUMMING: 0}
        self._mastered = {Behavior.PEEKABOO: 0, Behavior.DRUMMING: 0}  # high-water marks
        self._answered = {Behavior.PEEKABOO: False, Behavior.DRUMMING: False}
        self._quit_peekaboo = False
        self.quit_tick: Optional[int] = None  # when the switching teacher dropped peek-a-boo

    # -- helpers -----------------------------------------------------------

    @property
    def _teaching(self) -> Optional[Behavior]:
        if not self._teaches:
            return None
        return self._teaches[self._teaching_index % len(self._teaches)]

    def _allowed_actions(self, tick: int) -> frozenset[ActionId]:
        if self.script.variant is Variant.PEEKABOO_TEACHER:
            return _GAME_SETS[Behavior.PEEKABOO]
        if self.script.variant is Variant.DRUM_TEACHER:
            return _GAME_SETS[Behavior.DRUMMING]
        if self._quit_peekaboo:
            return _GAME_SETS[Behavior.DRUMMING]
        # mid-exchange, actions from the other game break the round too
        if (self._exchange is not None
                and tick - self._exchange_tick <= self.script.boredom_ticks):
            return _GAME_SETS[self._exchange]
        return _GAME_SETS[Behavior.PEEKABOO] | _GAME_SETS[Behavior.DRUMMING]

    def _responds_to(self, behavior: Behavior) -> bool:
        if self.script.variant is Variant.INATTENTIVE:
            return False
        if self.script.variant is Variant.PEEKABOO_TEACHER:
            return behavior is Behavior.PEEKABOO
        if self.script.variant is Variant.DRUM_TEACHER:
            return behavior is Behavior.DRUMMING
        if self._quit_peekaboo and behavior is Behavior.PEEKABOO:
            return False
        return True

    def _busy(self) -> bool:
        return self._hide_left > 0 or self._beats_left > 0 or self._pending is not None

    def _begin_hide(self, tick: int) -> None:
        lo, hi = self.script.hide_range
        seconds = float(self._rng.uniform(lo, hi))
        self._hide_left = max(1, int(round(seconds * self.cfg.resolution)))
        self._hide_elapsed = 0
        self._responding_to = Behavior.PEEKABOO
        self._exchange = Behavior.PEEKABOO
        self._exchange_tick = tick

    def _begin_drum_turn(self, tick: int) -> None:
        lo, hi = self.script.beats_range
        self._beats_left = int(self._rng.integers(lo, hi + 1))
        self._next_beat_in = 1
        self._responding_to = Behavior.DRUMMING
        self._exchange = Behavior.DRUMMING
        self._exchange_tick = tick

    def _maybe_switch_phase(self, tick: int) -> None:
        if len(self._teaches) < 2:
            return
        if (self.script.variant is Variant.SWITCHING_TEACHER
                and not self._quit_peekaboo
                and all(n >= 3 for n in self._mastered.values())):
            self._quit_peekaboo = True
            self.quit_tick = tick
        teaching = self._teaching
        taught_enough = self._mastered[teaching] >= 3
        worn_out = tick - self._phase_started >= self.script.phase_patience_ticks
        if taught_enough or worn_out:
            self._teaching_index += 1
            self._phase_started = tick

    # -- the per-tick policy -------------------------------------------------

    def step(self, observed: Optional[ObservedRobot], tick: int) -> PartnerState:
        script = self.script
        if script.variant is Variant.INATTENTIVE:
            return PartnerState(present=True, gaze_on_robot=False)

        if self._aversion_left > 0:
            self._aversion_left -= 1

        if observed is not None:
            action = observed.action
            if observed.action_started:
                if action is ActionId.HIDE_FACE:
                    self._robot_hides_in_row += 1
                elif action is not ActionId.NO_OP:
                    self._robot_hides_in_row = 0
                off_game = action not in self._allowed_actions(tick)
                # hiding again without revealing is not playing the game
                if action is ActionId.HIDE_FACE and self._robot_hides_in_row >= 2:
                    off_game = True
                if off_game:
                    self._aversion_left = script.aversion_ticks
                    self._alternations = {b: 0 for b in self._alternations}
            if (observed.action_started
                    and action in (_CHARACTERISTIC[Behavior.PEEKABOO],
                                   _CHARACTERISTIC[Behavior.DRUMMING])
                    and self._interest_charges > 0):
                self._interest_charges -= 1
                self._interest_left = max(self._interest_left, script.interest_ticks)
            turn = observed.completed_turn
            if turn is not None:
                self._last_round = tick
                self._last_robot_turn = tick
                self._seeds_unanswered = 0
                self._interest_charges = 3
                self._reinvite_due = None
                self._reinvites_left = 0
                if self._answered[turn]:
                    self._alternations[turn] += 1
                else:
                    self._alternations[turn] = 1
                self._mastered[turn] = max(self._mastered[turn], self._alternations[turn])
                self._answered[turn] = False
                self._exchange = turn
                self._exchange_tick = tick
                if self._responds_to(turn) and not self._busy():
                    response = turn
                    if (self._teaching is not None and self._teaching is not turn
                            and self._mastered[turn] >= 3
                            and self._mastered[self._teaching] < 3):
                        response = self._teaching  # steer toward the game being taught
                    self._pending = (response, tick + script.latency_ticks)

        # due responses; a robot that just went off-game forfeits the
        # response, and one still occupying its own turn is given room
        if self._pending is not None and tick >= self._pending[1]:
            behavior, _ = self._pending
            if self._aversion_left > 0:
                self._pending = None
            else:
                blocked = observed is not None and (
                    observed.mid_drum_turn if behavior is Behavior.DRUMMING
                    else observed.action is ActionId.HIDE_FACE)
                if not blocked:
                    self._pending = None
                    if behavior is Behavior.PEEKABOO:
                        self._begin_hide(tick)
                    else:
                        self._begin_drum_turn(tick)

        # a stalled rally gets re-invited before full seeding kicks in
        if (self._reinvite_due is not None and tick >= self._reinvite_due
                and not self._busy() and self._aversion_left == 0
                and self._seeds_unanswered < 2
                and self._exchange is not None and not self._quit_peekaboo):
            behavior = self._exchange
            if self._responds_to(behavior):
                self._reinvites_left -= 1
                self._reinvite_due = None
                self._seeds_unanswered += 1
                if behavior is Behavior.PEEKABOO:
                    self._begin_hide(tick)
                else:
                    self._begin_drum_turn(tick)
                self._responding_to = None
                self._last_round = tick

        # seeding: initiate the currently taught game when no round has
        # completed for a while (stray characteristic actions do not count)
        if (not self._busy() and self._teaching is not None
                and not self._quit_peekaboo
                and tick - self._last_round >= script.seed_period_ticks):
            self._maybe_switch_phase(tick)
            self._seeds_unanswered += 1
            if self._teaching is Behavior.PEEKABOO:
                self._begin_hide(tick)
            else:
                self._begin_drum_turn(tick)
            self._responding_to = None  # a seed, not a response
            self._last_round = tick

        hiding = False
        drummed = False
        if self._hide_left > 0:
            hiding = True
            self._hide_elapsed += 1
            self._hide_left -= 1
            if self._hide_left == 0:
                if self._responding_to is Behavior.PEEKABOO:
                    self._responses[Behavior.PEEKABOO] += 1
                    self._answered[Behavior.PEEKABOO] = True
                self._responding_to = None
                self._last_round = tick
                if self._reinvites_left > 0:
                    self._reinvite_due = tick + 4 * self.cfg.resolution
                self._maybe_switch_phase(tick)
        elif self._beats_left > 0:
            if observed is not None and observed.mid_drum_turn:
                # never drum over the robot's turn; yield the rest of ours
                self._beats_left = 0
                self._next_beat_in = 0
                self._responding_to = None
            else:
                self._next_beat_in -= 1
                if self._next_beat_in <= 0:
                    drummed = True
                    self._beats_left -= 1
                    self._next_beat_in = script.beat_interval_ticks
                    if self._beats_left == 0:
                        if self._responding_to is Behavior.DRUMMING:
                            self._responses[Behavior.DRUMMING] += 1
                            self._answered[Behavior.DRUMMING] = True
                        self._responding_to = None
                        self._last_round = tick
                        if self._reinvites_left > 0:
                            self._reinvite_due = tick + 4 * self.cfg.resolution
                        self._maybe_switch_phase(tick)

        if self._interest_left > 0:
            self._interest_left -= 1
        engaged = (tick - self._last_round) <= script.boredom_ticks or self._busy()
        gaze = self._aversion_left == 0 and (engaged or hiding or self._interest_left > 0)
        if not hiding:
            self._hide_elapsed = 0
        return PartnerState(
            present=True,
            hiding=hiding,
            hide_elapsed=self._hide_elapsed if hiding else 0,
            drummed_this_tick=drummed,
            gaze_on_robot=gaze,
        )


def partner_step(partner: ScriptedPartner, observed: Optional[ObservedRobot],
                 tick: int) -> PartnerState:
    return partner.step(observed, tick)
