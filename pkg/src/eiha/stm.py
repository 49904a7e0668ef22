"""Short-term memory over interaction flags and the engagement scores.

A sliding window of per-tick flags (who hid, who drummed, and overlaps)
backs the two history-based scores; visual attention is instantaneous.
The total of the three is the reward signal for the learning core.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .config import EihaConfig

FLAG_NAMES = ("human_hide", "robot_hide", "human_only_hide",
              "robot_drum", "human_drum", "both_drum")


@dataclass(frozen=True)
class TickFlags:
    human_hide: bool    # no face found in the robot's eye camera
    robot_hide: bool    # robot action is hide-face
    robot_drum: bool    # robot action is drum-hit
    human_drum: bool    # beat detected from the partner's drum

    @property
    def human_only_hide(self) -> bool:
        return self.human_hide and not self.robot_hide

    @property
    def both_drum(self) -> bool:
        return self.human_drum and self.robot_drum


class StmWindow:
    """Ring buffer of TickFlags with O(1) running sums per flag."""

    def __init__(self, capacity: int) -> None:
        if capacity <= 0:
            raise ValueError("StmWindow capacity must be positive")
        self.capacity = capacity
        self._buf: deque[TickFlags] = deque()
        self.sum_human_hide = 0
        self.sum_robot_hide = 0
        self.sum_human_only_hide = 0
        self.sum_robot_drum = 0
        self.sum_human_drum = 0
        self.sum_both_drum = 0

    def __len__(self) -> int:
        return len(self._buf)

    def _apply(self, flags: TickFlags, sign: int) -> None:
        self.sum_human_hide += sign * flags.human_hide
        self.sum_robot_hide += sign * flags.robot_hide
        self.sum_human_only_hide += sign * flags.human_only_hide
        self.sum_robot_drum += sign * flags.robot_drum
        self.sum_human_drum += sign * flags.human_drum
        self.sum_both_drum += sign * flags.both_drum

    def push(self, flags: TickFlags) -> None:
        if len(self._buf) == self.capacity:
            self._apply(self._buf.popleft(), -1)
        self._buf.append(flags)
        self._apply(flags, +1)

    def recount(self) -> dict[str, int]:
        """Brute-force sums over the stored entries (testing oracle)."""
        return {name: sum(getattr(f, name) for f in self._buf)
                for name in FLAG_NAMES}

    def sums(self) -> dict[str, int]:
        return {
            "human_hide": self.sum_human_hide,
            "robot_hide": self.sum_robot_hide,
            "human_only_hide": self.sum_human_only_hide,
            "robot_drum": self.sum_robot_drum,
            "human_drum": self.sum_human_drum,
            "both_drum": self.sum_both_drum,
        }


def hide_score(window: StmWindow, cfg: EihaConfig) -> float:
    """Peek-a-boo engagement over the memory window.

    Scores only when the human-only hide time sits strictly between the
    min_time and max_time thresholds (shorter losses look like tracking
    glitches, longer ones like an absent partner).
    """
    if cfg.mem_length <= 0:
        raise ValueError("hide_score requires mem_length > 0")
    s = window.sum_human_only_hide
    if cfg.resolution * cfg.min_time < s < cfg.resolution * cfg.max_time:
        return (s + window.sum_robot_hide) / (cfg.resolution * cfg.mem_length)
    return 0.0


def drum_score(window: StmWindow, current: TickFlags, cfg: EihaConfig) -> float:
    """Drumming engagement over the memory window.

    Hiding while the partner drums earns a fixed -0.5.  Otherwise the score
    credits both players' recent drumming, penalizes simultaneous beats,
    and pays nothing unless the human drummed within the window.
    """
    if cfg.mem_length <= 0:
        raise ValueError("drum_score requires mem_length > 0")
    if current.robot_hide:
        if current.human_drum:
            return -0.5
        return 0.0
    if window.sum_human_drum > 0:
        return (0.5 * (window.sum_robot_drum + window.sum_human_drum)
                - window.sum_both_drum) / (cfg.resolution * cfg.mem_length)
    return 0.0


def visual_attention(gaze_point: tuple[float, float] | None,
                     robot_face_box: tuple[float, float, float, float],
                     face_found: bool) -> int:
    """1 iff the robot's face was found and the gaze point falls inside its
    bounding box (x_lo, x_hi, y_lo, y_hi), boundaries inclusive."""
    if not face_found or gaze_point is None:
        return 0
    x, y = gaze_point
    x_lo, x_hi, y_lo, y_hi = robot_face_box
    return int(x_lo <= x <= x_hi and y_lo <= y <= y_hi)


@dataclass(frozen=True)
class EngagementScores:
    visual_attention: int
    hide_score: float
    drum_score: float

    @property
    def total(self) -> float:
        return self.visual_attention + self.hide_score + self.drum_score


ZERO_SCORES = EngagementScores(0, 0.0, 0.0)


def total_reward(scores: EngagementScores) -> float:
    """Sum of the engagement scores; with the memory disabled the hide and
    drum terms are zero so this reduces to the attention term."""
    return scores.total
