"""The 107-channel sensorimotor frame and its synthesis from simulation state.

Channel layout (in order): 64 intensity pixels (8x8, row major), head 3,
eyes 3, left arm 7, left hand 9, right arm 7, right hand 9, then the five
scalar channels face_detected, beat_detected, visual_attention,
drum_engagement, hide_engagement.

The image is a deliberately crude rendering: a bright face block while the
partner's face is visible, a pulse row on drum beats, plus uniform noise.
It exists to give the experience space its visual-context dimensions, not
to do vision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .config import EihaConfig
from .stm import EngagementScores

if TYPE_CHECKING:  # pragma: no cover
    from .partner import PartnerState

# Joint ranges, radians (hand channels are normalized curl values).
HEAD_RANGE = (-0.8, 0.8)
EYES_RANGE = (-0.6, 0.6)
ARM_RANGE = (-2.2, 2.2)
HAND_RANGE = (0.0, 1.6)

DRUM_ENGAGEMENT_RANGE = (-0.5, 0.5)
HIDE_ENGAGEMENT_RANGE = (0.0, 2.0)

N_CHANNELS = 107
POSE_SLICE = slice(64, 102)  # head..right_hand inside the frame vector

# Image geometry (8x8, row major): the partner fills most of the frame at
# one meter, so partner state dominates the pixels.  Levels sit at bin
# centers so small noise does not flip bins and swamp the metric.
_FACE_ROWS = range(0, 4)
_FACE_COLS = range(2, 6)
_EYE_CELLS = ((1, 3), (1, 5))
_ARM_CELLS = ((4, 0), (4, 1), (5, 0), (5, 1))  # partner's drumming arm
_DRUM_ROW = 7
_DRUM_COLS = range(2, 6)
_TABLE_ROW = 6
_BACKGROUND = 0.0625
_OCCLUDED_LEVEL = 0.1875  # the robot's own hands over its camera
_TABLE_LEVEL = 0.4375
_HANDS_LEVEL = 0.5625     # the partner's hands covering their face
_GAZE_LEVEL = 0.6875      # eye cells while the partner looks at the robot
_DRUM_LEVEL = 0.8125
_AVERTED_LEVEL = 0.8125   # face shown in profile, attention elsewhere
_FACE_LEVEL = 0.9375


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    kind: str            # "continuous" or "binary"
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("continuous", "binary"):
            raise ValueError(f"{self.name}: unknown channel kind {self.kind!r}")
        if self.kind == "continuous" and not self.lo < self.hi:
            raise ValueError(f"{self.name}: empty range [{self.lo}, {self.hi}]")


def channel_specs() -> list[ChannelSpec]:
    specs: list[ChannelSpec] = []
    for i in range(64):
        specs.append(ChannelSpec(f"image_{i:02d}", "continuous", 0.0, 1.0))
    for group, count, (lo, hi) in (
        ("head", 3, HEAD_RANGE),
        ("eyes", 3, EYES_RANGE),
        ("left_arm", 7, ARM_RANGE),
        ("left_hand", 9, HAND_RANGE),
        ("right_arm", 7, ARM_RANGE),
        ("right_hand", 9, HAND_RANGE),
    ):
        for i in range(count):
            specs.append(ChannelSpec(f"{group}_{i}", "continuous", lo, hi))
    specs.append(ChannelSpec("face_detected", "binary"))
    specs.append(ChannelSpec("beat_detected", "binary"))
    specs.append(ChannelSpec("visual_attention", "binary"))
    specs.append(ChannelSpec("drum_engagement", "continuous", *DRUM_ENGAGEMENT_RANGE))
    specs.append(ChannelSpec("hide_engagement", "continuous", *HIDE_ENGAGEMENT_RANGE))
    assert len(specs) == N_CHANNELS
    return specs


class ChannelTable:
    """Channel specs plus the vectorized arrays discretize needs."""

    def __init__(self, specs: Sequence[ChannelSpec] | None = None) -> None:
        self.specs = list(specs) if specs is not None else channel_specs()
        self.names = [s.name for s in self.specs]
        self.lo = np.array([s.lo for s in self.specs])
        self.hi = np.array([s.hi for s in self.specs])
        self.is_binary = np.array([s.kind == "binary" for s in self.specs])

    def __len__(self) -> int:
        return len(self.specs)


@dataclass
class SensorFrame:
    image: np.ndarray       # (64,) intensities in [0, 1]
    head: np.ndarray        # (3,)
    eyes: np.ndarray        # (3,)
    left_arm: np.ndarray    # (7,)
    left_hand: np.ndarray   # (9,)
    right_arm: np.ndarray   # (7,)
    right_hand: np.ndarray  # (9,)
    face_detected: int
    beat_detected: int
    visual_attention: int
    drum_engagement: float
    hide_engagement: float

    def to_vector(self) -> np.ndarray:
        out = np.empty(N_CHANNELS)
        out[0:64] = self.image
        out[64:67] = self.head
        out[67:70] = self.eyes
        out[70:77] = self.left_arm
        out[77:86] = self.left_hand
        out[86:93] = self.right_arm
        out[93:102] = self.right_hand
        out[102] = self.face_detected
        out[103] = self.beat_detected
        out[104] = self.visual_attention
        out[105] = self.drum_engagement
        out[106] = self.hide_engagement
        return out

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "SensorFrame":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (N_CHANNELS,):
            raise ValueError(f"frame vector must have {N_CHANNELS} channels")
        return cls(
            image=vec[0:64].copy(),
            head=vec[64:67].copy(),
            eyes=vec[67:70].copy(),
            left_arm=vec[70:77].copy(),
            left_hand=vec[77:86].copy(),
            right_arm=vec[86:93].copy(),
            right_hand=vec[93:102].copy(),
            face_detected=int(vec[102]),
            beat_detected=int(vec[103]),
            visual_attention=int(vec[104]),
            drum_engagement=float(vec[105]),
            hide_engagement=float(vec[106]),
        )


def discretize(frame: SensorFrame | np.ndarray, table: ChannelTable,
               bins: int) -> np.ndarray:
    """Map a frame to per-channel bin indices.

    Continuous value v in [lo, hi] lands in floor((v-lo)/(hi-lo)*bins),
    with v == hi mapping to the top bin; binary channels pass through.
    Out-of-range values are an error naming the channel.
    """
    vec = frame.to_vector() if isinstance(frame, SensorFrame) else np.asarray(frame, dtype=float)
    if vec.shape != (len(table),):
        raise ValueError(f"frame vector must have {len(table)} channels")
    below = vec < table.lo
    above = vec > table.hi
    if below.any() or above.any():
        idx = int(np.argmax(below | above))
        raise ValueError(
            f"channel {table.names[idx]}: value {vec[idx]} outside "
            f"[{table.lo[idx]}, {table.hi[idx]}]")
    binary = table.is_binary
    bad = binary & (vec != 0.0) & (vec != 1.0)
    if bad.any():
        idx = int(np.argmax(bad))
        raise ValueError(f"channel {table.names[idx]}: binary value {vec[idx]} not in {{0, 1}}")
    scaled = (vec - table.lo) / (table.hi - table.lo) * bins
    out = np.floor(scaled).astype(np.uint8)
    np.minimum(out, bins - 1, out=out)  # v == hi belongs to the top bin
    out[binary] = vec[binary].astype(np.uint8)
    return out


def render_image(face_visible: bool, beat: bool, sigma_img: float,
                 rng: np.random.Generator, occluded: bool = False,
                 partner_present: bool = False, partner_hiding: bool = False,
                 partner_gazing: bool = False) -> np.ndarray:
    """Crude but phase-distinctive scene: the face block is bright when the
    face shows, a hands pattern when the partner covers it, dark when they
    are gone; the eye cells carry gaze, a drum row pulses on beats, and the
    robot's own occluding hands darken the whole frame."""
    if occluded:
        img = np.full((8, 8), _OCCLUDED_LEVEL)
    else:
        img = np.full((8, 8), _BACKGROUND)
        img[_TABLE_ROW, :] = _TABLE_LEVEL
        if face_visible:
            # a head-on attentive face reads brighter than an averted one
            level = _FACE_LEVEL if partner_gazing else _AVERTED_LEVEL
            for r in _FACE_ROWS:
                for c in _FACE_COLS:
                    img[r, c] = level
            if partner_gazing:
                for r, c in _EYE_CELLS:
                    img[r, c] = _GAZE_LEVEL
        elif partner_present and partner_hiding:
            for r in _FACE_ROWS:
                for c in _FACE_COLS:
                    img[r, c] = _HANDS_LEVEL
        if beat:
            for c in _DRUM_COLS:
                img[_DRUM_ROW, c] = _DRUM_LEVEL
            for r, c in _ARM_CELLS:
                img[r, c] = _DRUM_LEVEL
    flat = img.ravel()
    if sigma_img > 0:
        flat = flat + rng.uniform(-sigma_img, sigma_img, size=64)
    return np.clip(flat, 0.0, 1.0)


def synthesize_frame(robot_pose: np.ndarray, robot_action: "str",
                     partner: "PartnerState",
                     stm_scores: EngagementScores | None,
                     cfg: EihaConfig, rng: np.random.Generator,
                     occluded: bool | None = None) -> SensorFrame:
    """Build one sensor frame from the simulated body and partner state.

    Face detection fails while the partner is absent or hiding, and (with
    probability ``p_occlude``) while the robot's own hide action blocks its
    camera; callers that model occlusion per hide execution rather than per
    tick pass the drawn value in ``occluded``.  ``stm_scores`` of None
    stands for a disabled short-term memory: the three score channels are
    pinned to zero so the experience space keeps the same dimensionality
    across conditions.
    """
    pose = np.asarray(robot_pose, dtype=float)
    if pose.shape != (38,):
        raise ValueError("robot_pose must have 38 joint values")
    if robot_action != "hide-face":
        occluded = False
    elif occluded is None:
        occluded = bool(rng.random() < cfg.p_occlude)
    face_visible = bool(partner.present and not partner.hiding and not occluded)
    beat = bool(partner.drummed_this_tick)
    image = render_image(face_visible, beat, cfg.sigma_img, rng,
                         occluded=occluded,
                         partner_present=bool(partner.present),
                         partner_hiding=bool(partner.hiding),
                         partner_gazing=bool(partner.gaze_on_robot))
    if stm_scores is None:
        attention, drum_eng, hide_eng = 0, 0.0, 0.0
    else:
        attention = int(stm_scores.visual_attention)
        drum_eng = float(stm_scores.drum_score)
        hide_eng = float(stm_scores.hide_score)
    return SensorFrame(
        image=image,
        head=pose[0:3].copy(),
        eyes=pose[3:6].copy(),
        left_arm=pose[6:13].copy(),
        left_hand=pose[13:22].copy(),
        right_arm=pose[22:29].copy(),
        right_hand=pose[29:38].copy(),
        face_detected=int(face_visible),
        beat_detected=int(beat),
        visual_attention=attention,
        drum_engagement=drum_eng,
        hide_engagement=hide_eng,
    )
