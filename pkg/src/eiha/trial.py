"""The 10 Hz loop binding sensors, memory, learning, and the partner.

A trial runs until both behaviors are learned or the time cap expires.
Learning is judged by the turn ledger: three consecutive robot-human turn
alternations of a behavior, with the count reset whenever the robot
interleaves an off-behavior action (no-ops are exempt) or the human hides
for an out-of-range duration.
"""

from __future__ import annotations

import json
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .actions import (ACTION_SPECS, ActionExecutor, ActionId, Behavior,
                      DRUM_ACTIONS, PEEKABOO_ACTIONS, TurnMatcher,
                      select_action_detail)
from .config import EihaConfig, load_config
from .experience import Experience, ExperienceSpace, MergeOutcome
from .partner import (ObservedRobot, PartnerState, PartnerScript,
                      ScriptedPartner, Variant)
from .sensors import ChannelTable, discretize, synthesize_frame
from .stm import EngagementScores, StmWindow, TickFlags, drum_score, hide_score

RESULTS_SCHEMA = "eiha-results/1"

CONDITION_MEM_LENGTH = {"stm4": 4.0, "stm1": 1.0, "none": 0.0}

DRUM_BURST_GAP_SECONDS = 1.0  # silence that closes a human drum turn

_BEHAVIOR_ACTIONS = {Behavior.PEEKABOO: PEEKABOO_ACTIONS,
                     Behavior.DRUMMING: DRUM_ACTIONS}

_CHARACTERISTIC = {Behavior.PEEKABOO: ActionId.HIDE_FACE,
                   Behavior.DRUMMING: ActionId.DRUM_HIT}


def make_rng_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """One stream for the learning core, one for the scripted partner, so
    live play (which has no scripted partner) replays identically."""
    core_ss, partner_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(core_ss), np.random.default_rng(partner_ss)


@dataclass
class _BehaviorLedger:
    count: int = 0
    awaiting_human: bool = False
    learned: bool = False
    first_characteristic_tick: Optional[int] = None
    learned_tick: Optional[int] = None


class TurnLedger:
    """Counts consecutive robot-human turn alternations per behavior."""

    def __init__(self, cfg: EihaConfig) -> None:
        self.cfg = cfg
        self.ledgers = {b: _BehaviorLedger() for b in Behavior}
        self.events: list[dict[str, Any]] = []
        self._min_hide = cfg.resolution * cfg.min_time
        self._max_hide = cfg.resolution * cfg.max_time
        self._gap_ticks = int(round(DRUM_BURST_GAP_SECONDS * cfg.resolution))
        self._hide_start: Optional[int] = None
        self._was_hiding = False
        self._seg_start: Optional[int] = None
        self._was_human_only = False
        self._burst_last_beat: Optional[int] = None
        self._burst_valid = False

    # -- robot side ---------------------------------------------------------

    def on_action_start(self, action: ActionId, tick: int) -> None:
        for behavior, char in _CHARACTERISTIC.items():
            led = self.ledgers[behavior]
            if action is char and led.first_characteristic_tick is None:
                led.first_characteristic_tick = tick
                self.events.append({"t": tick, "e": "first_characteristic",
                                    "behavior": behavior.value})

    def on_robot_action_complete(self, action: ActionId,
                                 turn: Optional[Behavior], tick: int) -> None:
        if turn is not None:
            self._on_robot_turn(turn, tick)
        if action is ActionId.NO_OP:
            return
        for behavior, allowed in _BEHAVIOR_ACTIONS.items():
            if action not in allowed:
                self._reset(behavior, tick, f"foreign action {action.value}")

    def _on_robot_turn(self, behavior: Behavior, tick: int) -> None:
        led = self.ledgers[behavior]
        if led.awaiting_human:
            led.count = 1  # two robot turns in a row restart the chain here
        else:
            led.count += 1
        led.awaiting_human = True
        self.events.append({"t": tick, "e": "robot_turn", "behavior": behavior.value,
                            "count": led.count})
        if not led.learned and led.count >= 3:
            led.learned = True
            led.learned_tick = tick
            self.events.append({"t": tick, "e": "learned", "behavior": behavior.value})

    def _on_human_turn(self, behavior: Behavior, tick: int) -> None:
        led = self.ledgers[behavior]
        self.events.append({"t": tick, "e": "human_turn", "behavior": behavior.value})
        if led.awaiting_human:
            led.awaiting_human = False
        elif led.count > 0:
            self._reset(behavior, tick, "human turn out of order")

    def _reset(self, behavior: Behavior, tick: int, reason: str) -> None:
        led = self.ledgers[behavior]
        if led.count > 0 or led.awaiting_human:
            self.events.append({"t": tick, "e": "reset", "behavior": behavior.value,
                                "reason": reason})
        led.count = 0
        led.awaiting_human = False

    # -- human side (ground-truth partner state) ------------------------------

    def observe_tick(self, partner_hiding: bool, robot_hiding: bool,
                     human_beat: bool, robot_occupies_drum: bool, tick: int) -> None:
        # a human peek-a-boo turn is an in-range stretch of the human hiding
        # alone; stretches the robot's own hide cuts short count for nothing
        human_only = partner_hiding and not robot_hiding
        if human_only and not self._was_human_only:
            self._seg_start = tick
        if self._was_human_only and not human_only and self._seg_start is not None:
            segment = tick - self._seg_start
            if self._min_hide < segment < self._max_hide:
                self._on_human_turn(Behavior.PEEKABOO, tick)
            self._seg_start = None
        self._was_human_only = human_only
        # hides that are too short or too long break the chain outright
        if partner_hiding and not self._was_hiding:
            self._hide_start = tick
        if self._was_hiding and not partner_hiding and self._hide_start is not None:
            duration = tick - self._hide_start
            if not self._min_hide < duration < self._max_hide:
                self._reset(Behavior.PEEKABOO, tick,
                            f"out-of-range human hide ({duration} ticks)")
            self._hide_start = None
        self._was_hiding = partner_hiding

        if human_beat:
            self._burst_last_beat = tick
            if not robot_occupies_drum:
                self._burst_valid = True
        elif (self._burst_last_beat is not None
              and tick - self._burst_last_beat > self._gap_ticks):
            if self._burst_valid:
                self._on_human_turn(Behavior.DRUMMING, tick)
            self._burst_last_beat = None
            self._burst_valid = False

    # -- summaries -----------------------------------------------------------

    def all_learned(self) -> bool:
        return all(led.learned for led in self.ledgers.values())

    def turn_counts(self) -> dict[str, int]:
        return {b.value: led.count for b, led in self.ledgers.items()}

    def learned_flags(self) -> dict[str, bool]:
        return {b.value: led.learned for b, led in self.ledgers.items()}


@dataclass
class TickOutput:
    tick: int
    action: ActionId
    scores: EngagementScores
    reward: float
    observed: ObservedRobot
    outcome: Optional[MergeOutcome]


class TickEngine:
    """Owns all learning-core state; one call per 10 Hz tick.

    The engine sees the partner only through PartnerState, so scripted
    play, live play, and event-log replay share this code path exactly.
    """

    def __init__(self, cfg: EihaConfig, rng: np.random.Generator | None = None) -> None:
        self.cfg = cfg
        self.rng = rng if rng is not None else make_rng_streams(cfg.rng_seed)[0]
        self.table = ChannelTable()
        self.space = ExperienceSpace(cfg.merge_threshold, cfg.reward_update_rate)
        self.stm = StmWindow(cfg.mem_ticks) if cfg.mem_ticks > 0 else None
        self.ledger = TurnLedger(cfg)
        self.matcher = TurnMatcher()
        self.executor = ActionExecutor()
        self.executor.load(ACTION_SPECS[ActionId.NO_OP])
        self._window: deque[np.ndarray] = deque(maxlen=cfg.window_ticks)
        self._rewards: list[float] = []
        # (kind, experience id, created tick): reward updates waiting for
        # the future horizon to elapse
        self._pending: deque[tuple[str, int, int]] = deque()
        self._prev_scores = EngagementScores(0, 0.0, 0.0)
        self._hide_occluded = False  # drawn once per hide-face execution
        self.tick_index = 0
        self.core_log: list[list[Any]] = []
        self.traces: dict[str, list[float]] = {
            "attention": [], "hide": [], "drum": [], "total": []}
        self.events: list[dict[str, Any]] = []

    # -- helpers -------------------------------------------------------------

    def _occupies_drum(self, action: ActionId) -> bool:
        return (self.matcher.in_drum_turn
                or action in (ActionId.START_DRUM, ActionId.DRUM_HIT))

    def _mature_pending(self, tick: int) -> None:
        horizon = max(1, self.cfg.horizon_ticks)
        while self._pending and self._pending[0][2] + horizon - 1 <= tick:
            kind, exp_id, created = self._pending.popleft()
            future = self._rewards[created:created + horizon]
            if kind == "inserted":
                self.space.apply_future_reward(exp_id, future)
            else:
                self.space.ema_reward(exp_id, float(np.mean(future)))

    # -- the tick -------------------------------------------------------------

    def tick(self, partner: PartnerState) -> TickOutput:
        cfg = self.cfg
        t = self.tick_index
        action = self.executor.action
        started = self.executor.offset == 0
        if started:
            self.events.append({"t": t, "e": "action_start", "action": action.value})
            self.ledger.on_action_start(action, t)
            if action is ActionId.HIDE_FACE:
                self._hide_occluded = bool(self.rng.random() < cfg.p_occlude)
        pose, finished, robot_beat = self.executor.step()
        robot_hiding = action is ActionId.HIDE_FACE

        frame_scores = self._prev_scores if self.stm is not None else None
        frame = synthesize_frame(pose, action.value, partner, frame_scores,
                                 cfg, self.rng,
                                 occluded=self._hide_occluded if robot_hiding else False)
        self._window.append(discretize(frame, self.table, cfg.bins))

        flags = TickFlags(
            human_hide=not frame.face_detected,
            robot_hide=robot_hiding,
            robot_drum=action is ActionId.DRUM_HIT,
            human_drum=bool(frame.beat_detected),
        )
        attention = int(partner.present and partner.gaze_on_robot)
        if self.stm is not None:
            self.stm.push(flags)
            scores = EngagementScores(attention,
                                      hide_score(self.stm, cfg),
                                      drum_score(self.stm, flags, cfg))
        else:
            scores = EngagementScores(attention, 0.0, 0.0)
        reward = scores.total
        self._rewards.append(reward)
        self._prev_scores = scores
        self.traces["attention"].append(float(attention))
        self.traces["hide"].append(scores.hide_score)
        self.traces["drum"].append(scores.drum_score)
        self.traces["total"].append(reward)

        probe: Optional[Experience] = None
        outcome: Optional[MergeOutcome] = None
        if len(self._window) == cfg.window_ticks:
            samples = np.stack(self._window, axis=1)
            probe = Experience(id=-1, samples=samples, action=action.value,
                               reward=reward, created_tick=t)
            outcome = self.space.insert_or_merge(probe, defer_merge_reward=True)
            self._pending.append((outcome.kind, outcome.id, t))
        self._mature_pending(t)

        occupies = self._occupies_drum(action)
        self.ledger.observe_tick(partner.hiding, robot_hiding,
                                 partner.drummed_this_tick, occupies, t)

        completed_turn: Optional[Behavior] = None
        if finished:
            completed_turn = self.matcher.on_action_complete(action)
            if completed_turn is not None:
                self.events.append({"t": t, "e": "robot_turn_complete",
                                    "behavior": completed_turn.value})
            self.ledger.on_robot_action_complete(action, completed_turn, t)
            nearest = None
            extra = None
            if outcome is not None and outcome.nearest_id is not None:
                nearest = (self.space.experiences[outcome.nearest_id],
                           outcome.nearest_distance)
                if not outcome.inserted:
                    # the same-action merge target recalls what followed
                    # this context the last times it was lived through
                    extra = self.space.experiences[outcome.id]
            next_action, supplier = select_action_detail(
                self.space, probe, cfg, self.rng, nearest=nearest, extra=extra)
            if supplier is not None:
                # the recalled experience is revised toward what following
                # its recommendation actually earned
                self._pending.append(("suggest", supplier, t + 1))
            self.executor.load(ACTION_SPECS[next_action])

        learned = self.ledger.learned_flags()
        self.core_log.append([
            t, action.value, attention, scores.hide_score, scores.drum_score,
            reward, len(self.space),
            learned["peekaboo"], learned["drumming"],
        ])
        observed = ObservedRobot(
            action=action,
            action_started=started,
            action_completed=action if finished else None,
            completed_turn=completed_turn,
            robot_beat=robot_beat,
            mid_drum_turn=occupies,
        )
        self.tick_index += 1
        return TickOutput(t, action, scores, reward, observed, outcome)


# -- trial orchestration ---------------------------------------------------------


@dataclass(frozen=True)
class TrialConfig:
    condition: str
    partner: str
    seed: int
    trial_index: int = 0
    base: EihaConfig = field(default_factory=EihaConfig)

    def resolved(self) -> EihaConfig:
        if self.condition not in CONDITION_MEM_LENGTH:
            raise ValueError(f"unknown condition {self.condition!r}; "
                             f"expected one of {sorted(CONDITION_MEM_LENGTH)}")
        return self.base.replace(mem_length=CONDITION_MEM_LENGTH[self.condition],
                                 rng_seed=self.seed)


@dataclass
class TrialResult:
    condition: str
    partner: str
    seed: int
    trial_index: int
    total_ticks: int
    learned: dict[str, bool]
    first_characteristic_tick: dict[str, Optional[int]]
    learned_tick: dict[str, Optional[int]]
    time_to_learn: dict[str, Optional[float]]
    experience_count: int
    teacher_quit_tick: Optional[int]
    traces: dict[str, list[float]]
    core_log: list[list[Any]]
    events: list[dict[str, Any]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "condition": self.condition,
            "partner": self.partner,
            "seed": self.seed,
            "trial_index": self.trial_index,
            "total_ticks": self.total_ticks,
            "learned": self.learned,
            "first_characteristic_tick": self.first_characteristic_tick,
            "learned_tick": self.learned_tick,
            "time_to_learn": self.time_to_learn,
            "experience_count": self.experience_count,
            "teacher_quit_tick": self.teacher_quit_tick,
            "traces": self.traces,
            "core_log": self.core_log,
            "events": self.events,
        }


def run_trial(trial: TrialConfig) -> TrialResult:
    """Run one seeded trial to completion; bit-reproducible per seed."""
    cfg = trial.resolved()
    core_rng, partner_rng = make_rng_streams(cfg.rng_seed)
    engine = TickEngine(cfg, rng=core_rng)
    script = PartnerScript.from_config(trial.partner, cfg, seed=trial.seed)
    partner = ScriptedPartner(script, cfg, rng=partner_rng)

    observed: Optional[ObservedRobot] = None
    events: list[dict[str, Any]] = []
    for t in range(cfg.max_ticks):
        state = partner.step(observed, t)
        out = engine.tick(state)
        observed = out.observed
        if state.hiding and state.hide_elapsed == 1:
            events.append({"t": t, "e": "partner_hide_start"})
        if state.drummed_this_tick:
            events.append({"t": t, "e": "partner_beat"})
        if engine.ledger.all_learned():
            break

    ledgers = engine.ledger.ledgers
    learned = {b.value: led.learned for b, led in ledgers.items()}
    first = {b.value: led.first_characteristic_tick for b, led in ledgers.items()}
    learned_tick = {b.value: led.learned_tick for b, led in ledgers.items()}
    ttl: dict[str, Optional[float]] = {}
    for b, led in ledgers.items():
        if led.learned and led.first_characteristic_tick is not None:
            ttl[b.value] = (led.learned_tick - led.first_characteristic_tick) / cfg.resolution
        else:
            ttl[b.value] = None
    all_events = sorted(engine.events + engine.ledger.events + events,
                        key=lambda e: (e["t"], e["e"]))
    return TrialResult(
        condition=trial.condition,
        partner=trial.partner,
        seed=trial.seed,
        trial_index=trial.trial_index,
        total_ticks=engine.tick_index,
        learned=learned,
        first_characteristic_tick=first,
        learned_tick=learned_tick,
        time_to_learn=ttl,
        experience_count=len(engine.space),
        teacher_quit_tick=partner.quit_tick,
        traces=engine.traces,
        core_log=engine.core_log,
        events=all_events,
    )


def _run_trial_job(args: tuple[dict[str, Any], str, str, int, int]) -> dict[str, Any]:
    base_doc, condition, partner, seed, index = args
    trial = TrialConfig(condition=condition, partner=partner, seed=seed,
                        trial_index=index, base=load_config(base_doc))
    return run_trial(trial).to_dict()


def run_batch(conditions: Sequence[str], trials_per_condition: int,
              base: EihaConfig, partner: str, base_seed: int,
              workers: int = 1) -> dict[str, Any]:
    """Independent seeded trials for each condition; seeds are shared
    across conditions (base_seed + trial index)."""
    jobs = [(base.to_dict(), cond, partner, base_seed + i, i)
            for cond in conditions for i in range(trials_per_condition)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trial_dicts = list(pool.map(_run_trial_job, jobs))
    else:
        trial_dicts = [_run_trial_job(job) for job in jobs]
    return {
        "schema": RESULTS_SCHEMA,
        "config": base.to_dict(),
        "partner": partner,
        "base_seed": base_seed,
        "conditions": list(conditions),
        "trials_per_condition": trials_per_condition,
        "trials": trial_dicts,
    }


def save_results(doc: dict[str, Any], path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc))


def load_results(path: str | Path) -> dict[str, Any]:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != RESULTS_SCHEMA:
        raise ValueError(f"unsupported results schema {doc.get('schema')!r}")
    return doc


def replay_trial(doc: dict[str, Any], index: int) -> tuple[bool, dict[str, Any]]:
    """Re-execute one logged trial and compare records bit for bit."""
    trials = doc["trials"]
    if not 0 <= index < len(trials):
        raise IndexError(f"trial index {index} outside 0..{len(trials) - 1}")
    recorded = trials[index]
    trial = TrialConfig(
        condition=recorded["condition"],
        partner=recorded["partner"],
        seed=recorded["seed"],
        trial_index=recorded["trial_index"],
        base=load_config(doc["config"]),
    )
    fresh = json.loads(json.dumps(run_trial(trial).to_dict()))
    return fresh == recorded, fresh
