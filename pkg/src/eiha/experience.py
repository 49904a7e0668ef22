"""Experiences, the information metric between them, and the growing space.

An experience is a per-channel window of discretized samples with an
associated action and reward.  Distance between two experiences is the
per-channel sum of information distances d(X,Y) = H(X|Y) + H(Y|X), where
the joint distribution comes from pairing time-aligned samples.  Recall is
an exact nearest scan; the space accelerates it by interning channel
windows and caching pairwise channel distances, which reproduces the
linear scan bit for bit because every distance still comes from the same
canonical function.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

SPACE_SCHEMA = "eiha-space/1"


_log2 = math.log2
_ENTROPY_MEMO: dict[tuple[int, ...], float] = {}


def _entropy_of_counts(counts: Sequence[int], total: int) -> float:
    """Plug-in entropy; terms are summed over ascending counts so every
    call site computes identical floats for the same count multiset."""
    key = tuple(sorted(c for c in counts if c > 0))
    h = _ENTROPY_MEMO.get(key)
    if h is None:
        h = 0.0
        for c in key:
            p = c / total
            h -= p * _log2(p)
        h = abs(h)  # fold -0.0 from single-count histograms
        _ENTROPY_MEMO[key] = h
    return h


def channel_entropy(counts: Sequence[int] | np.ndarray) -> float:
    """Plug-in entropy in bits of a histogram, with 0*log(0) = 0."""
    arr = np.asarray(counts)
    if arr.size == 0:
        raise ValueError("empty histogram")
    if (arr < 0).any():
        raise ValueError("histogram counts must be non-negative")
    total = int(arr.sum())
    if total <= 0:
        raise ValueError("histogram has no observations")
    return _entropy_of_counts([int(c) for c in arr], total)


def _counts_of(seq: bytes) -> list[int]:
    counts: dict[int, int] = {}
    for v in seq:
        counts[v] = counts.get(v, 0) + 1
    return list(counts.values())


def channel_information_distance(x: Sequence[int] | np.ndarray,
                                 y: Sequence[int] | np.ndarray) -> float:
    """H(X|Y) + H(Y|X) from the empirical joint of time-aligned samples.

    Symmetric bit for bit (the pair is canonically ordered internally) and
    exactly 0.0 for identical sequences.
    """
    xa = np.ascontiguousarray(x, dtype=np.uint8)
    ya = np.ascontiguousarray(y, dtype=np.uint8)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError(f"sample sequences must share one length, got {xa.shape} vs {ya.shape}")
    if xa.size == 0:
        raise ValueError("sample sequences must be non-empty")
    bx, by = xa.tobytes(), ya.tobytes()
    return _distance_of_bytes(bx, by)


def _distance_of_bytes(bx: bytes, by: bytes) -> float:
    if bx == by:
        return 0.0
    if by < bx:
        bx, by = by, bx
    n = len(bx)
    const_x = bx == bx[:1] * n
    const_y = by == by[:1] * n
    if const_x and const_y:
        return 0.0  # two deterministic variables carry no information apart
    if const_x:
        return _entropy_of_counts(_counts_of(by), n)
    if const_y:
        return _entropy_of_counts(_counts_of(bx), n)
    joint: dict[int, int] = {}
    for a, b in zip(bx, by):
        code = (a << 8) | b
        joint[code] = joint.get(code, 0) + 1
    h_xy = _entropy_of_counts(list(joint.values()), n)
    h_x = _entropy_of_counts(_counts_of(bx), n)
    h_y = _entropy_of_counts(_counts_of(by), n)
    d = (h_xy - h_y) + (h_xy - h_x)
    return d if d > 0.0 else 0.0


@dataclass
class Experience:
    id: int
    samples: np.ndarray          # (channels, window) bin indices, uint8
    action: str
    reward: float
    visit_count: int = 1
    prev_id: int | None = None
    next_id: int | None = None
    created_tick: int = 0

    def __post_init__(self) -> None:
        self.samples = np.ascontiguousarray(self.samples, dtype=np.uint8)
        if self.samples.ndim != 2:
            raise ValueError("samples must be a (channels, window) array")


def experience_distance(a: Experience, b: Experience) -> float:
    """Sum of per-channel information distances between two experiences."""
    if a.samples.shape != b.samples.shape:
        raise ValueError("experiences live in different spaces "
                         f"({a.samples.shape} vs {b.samples.shape})")
    total = 0.0
    for c in range(a.samples.shape[0]):
        total += channel_information_distance(a.samples[c], b.samples[c])
    return total


@dataclass(frozen=True)
class MergeOutcome:
    kind: str                    # "inserted" or "merged"
    id: int                      # the inserted or merged-into experience
    distance: float              # candidate's distance to that experience
    nearest_id: int | None       # overall nearest PRIOR experience (recall target)
    nearest_distance: float      # inf when the space was empty

    @property
    def inserted(self) -> bool:
        return self.kind == "inserted"


class _GrowBuf:
    """Append-only numpy buffer with amortized doubling."""

    def __init__(self, dtype) -> None:
        self._arr = np.empty(64, dtype=dtype)
        self.n = 0

    def append(self, value) -> None:
        if self.n == len(self._arr):
            bigger = np.empty(len(self._arr) * 2, dtype=self._arr.dtype)
            bigger[: self.n] = self._arr
            self._arr = bigger
        self._arr[self.n] = value
        self.n += 1

    def view(self) -> np.ndarray:
        return self._arr[: self.n]


class _ChannelIndex:
    """Per-channel interning of window patterns plus a one-probe cache of
    distances from the current probe pattern to every experience."""

    def __init__(self) -> None:
        self.local_of: dict[int, int] = {}   # global pattern id -> local id
        self.globals: list[int] = []         # local id -> global pattern id
        self.col = _GrowBuf(np.int32)        # per experience, local pattern id
        self.cache_ppid: int | None = None   # global probe pattern id cached
        self.cache = _GrowBuf(np.float64)

    def add_row(self, global_pid: int, pair_distance) -> int:
        local = self.local_of.get(global_pid)
        if local is None:
            local = len(self.globals)
            self.local_of[global_pid] = local
            self.globals.append(global_pid)
        self.col.append(local)
        if self.cache_ppid is not None:
            self.cache.append(pair_distance(self.cache_ppid, global_pid))
        return local

    def contributions(self, probe_pid: int, pair_distance) -> np.ndarray:
        if self.cache_ppid == probe_pid and self.cache.n == self.col.n:
            return self.cache.view()
        lut = np.array([pair_distance(probe_pid, g) for g in self.globals])
        contrib = lut[self.col.view()]
        self.cache_ppid = probe_pid
        self.cache = _GrowBuf(np.float64)
        self.cache._arr = contrib.copy()
        self.cache.n = len(contrib)
        return self.cache.view()


class ExperienceSpace:
    """The growing metric space of experiences with exact nearest recall."""

    def __init__(self, merge_threshold: float, reward_update_rate: float) -> None:
        self.merge_threshold = float(merge_threshold)
        self.reward_update_rate = float(reward_update_rate)
        self.experiences: dict[int, Experience] = {}
        self._order: list[int] = []
        self._next_id = 0
        self._last_visited: int | None = None
        self._shape: tuple[int, int] | None = None
        # acceleration state
        self._pattern_ids: dict[bytes, int] = {}
        self._pattern_bytes: list[bytes] = []
        self._pair_cache: dict[tuple[int, int], float] = {}
        self._channels: list[_ChannelIndex] = []
        self._created = _GrowBuf(np.int64)
        self._actions: list[str] = []

    def __len__(self) -> int:
        return len(self._order)

    def __iter__(self) -> Iterator[Experience]:
        return (self.experiences[i] for i in self._order)

    # -- internal helpers ---------------------------------------------------

    def _check_shape(self, samples: np.ndarray) -> None:
        if self._shape is None:
            self._shape = samples.shape
            self._channels = [_ChannelIndex() for _ in range(samples.shape[0])]
        elif samples.shape != self._shape:
            raise ValueError(f"experience shape {samples.shape} does not match "
                             f"space shape {self._shape}")

    def _intern(self, window: np.ndarray) -> int:
        key = window.tobytes()
        pid = self._pattern_ids.get(key)
        if pid is None:
            pid = len(self._pattern_bytes)
            self._pattern_ids[key] = pid
            self._pattern_bytes.append(key)
        return pid

    def _intern_row(self, samples: np.ndarray) -> list[int]:
        return [self._intern(samples[c]) for c in range(samples.shape[0])]

    def _pair_distance(self, a: int, b: int) -> float:
        if a == b:
            return 0.0
        key = (a, b) if a < b else (b, a)
        d = self._pair_cache.get(key)
        if d is None:
            d = _distance_of_bytes(self._pattern_bytes[a], self._pattern_bytes[b])
            self._pair_cache[key] = d
        return d

    def _distances_to(self, probe_pids: list[int]) -> np.ndarray:
        total = np.zeros(len(self._order))
        pair = self._pair_distance
        for chan, ppid in zip(self._channels, probe_pids):
            total += chan.contributions(ppid, pair)
        return total

    def _nearest_index(self, distances: np.ndarray) -> int:
        best = distances.min()
        ties = np.nonzero(distances == best)[0]
        if len(ties) == 1:
            return int(ties[0])
        # most recently created wins; insertion order breaks exact ties
        created = self._created.view()[ties]
        latest = created.max()
        return int(ties[np.nonzero(created == latest)[0][-1]])

    # -- public operations ---------------------------------------------------

    def nearest(self, probe: Experience) -> tuple[Experience, float] | None:
        if not self._order:
            return None
        self._check_shape(probe.samples)
        distances = self._distances_to(self._intern_row(probe.samples))
        idx = self._nearest_index(distances)
        return self.experiences[self._order[idx]], float(distances[idx])

    def insert_or_merge(self, candidate: Experience,
                        defer_merge_reward: bool = False) -> MergeOutcome:
        """Merge into the nearest same-action experience within the merge
        threshold (exponential moving average on its reward); otherwise
        append a new experience.

        Temporal links always point from the previously visited experience
        to the one this candidate lands on, so following next_id replays
        the order in which contexts actually succeed one another (a merge
        revisits its target and refreshes the link).

        With ``defer_merge_reward`` the caller revises the merge target
        itself (via :meth:`ema_reward`) once the candidate's future-horizon
        reward is known, so merged and inserted experiences carry rewards
        with the same future-mean semantics.  The outcome also carries the
        candidate's nearest prior experience, the recall target for action
        selection.
        """
        self._check_shape(candidate.samples)
        if not np.isfinite(candidate.reward):
            raise ValueError("candidate reward must be finite")
        row = self._intern_row(candidate.samples)
        if self._order:
            distances = self._distances_to(row)
            near_idx = self._nearest_index(distances)
            near_id = self._order[near_idx]
            near_dist = float(distances[near_idx])
            same = np.array([a == candidate.action for a in self._actions])
            if same.any():
                masked = np.where(same, distances, np.inf)
                m_idx = self._nearest_index(masked)
                m_dist = float(masked[m_idx])
                if m_dist < self.merge_threshold:
                    target = self.experiences[self._order[m_idx]]
                    target.visit_count += 1
                    if not defer_merge_reward:
                        self.ema_reward(target.id, candidate.reward)
                    self._note_visit(target.id)
                    return MergeOutcome("merged", target.id, m_dist,
                                        near_id, near_dist)
            new_id = self._insert(candidate, row)
            return MergeOutcome("inserted", new_id, 0.0, near_id, near_dist)
        new_id = self._insert(candidate, row)
        return MergeOutcome("inserted", new_id, 0.0, None, float("inf"))

    def _note_visit(self, exp_id: int) -> None:
        prev = self._last_visited
        if prev is not None and prev != exp_id:
            self.experiences[prev].next_id = exp_id
            self.experiences[exp_id].prev_id = prev
        self._last_visited = exp_id

    def ema_reward(self, exp_id: int, value: float) -> float:
        """One exponential-moving-average step of an experience's reward
        toward ``value``."""
        exp = self.experiences.get(exp_id)
        if exp is None:
            raise KeyError(f"unknown experience id {exp_id}")
        rate = self.reward_update_rate
        exp.reward = (1.0 - rate) * exp.reward + rate * float(value)
        return exp.reward

    def _insert(self, candidate: Experience, row: list[int]) -> int:
        new_id = self._next_id
        self._next_id += 1
        exp = Experience(
            id=new_id,
            samples=candidate.samples,
            action=candidate.action,
            reward=candidate.reward,
            visit_count=candidate.visit_count,
            prev_id=None,
            next_id=None,
            created_tick=candidate.created_tick,
        )
        self.experiences[new_id] = exp
        self._order.append(new_id)
        self._created.append(exp.created_tick)
        self._actions.append(exp.action)
        pair = self._pair_distance
        for chan, pid in zip(self._channels, row):
            chan.add_row(pid, pair)
        self._note_visit(new_id)
        return new_id

    def apply_future_reward(self, exp_id: int, future_rewards: Sequence[float]) -> float:
        exp = self.experiences.get(exp_id)
        if exp is None:
            raise KeyError(f"unknown experience id {exp_id}")
        rewards = np.asarray(list(future_rewards), dtype=float)
        if rewards.size == 0:
            raise ValueError("future_rewards must be non-empty")
        exp.reward = float(rewards.mean())
        return exp.reward

    def successors(self, exp_id: int, depth: int) -> list[Experience]:
        out: list[Experience] = []
        cur = self.experiences.get(exp_id)
        for _ in range(depth):
            if cur is None or cur.next_id is None:
                break
            cur = self.experiences[cur.next_id]
            out.append(cur)
        return out


def nearest_experience(space: ExperienceSpace,
                       probe: Experience) -> tuple[Experience, float] | None:
    """Minimal-distance experience; ties go to the most recently created."""
    return space.nearest(probe)


def insert_or_merge(space: ExperienceSpace, candidate: Experience) -> MergeOutcome:
    return space.insert_or_merge(candidate)


def apply_future_reward(space: ExperienceSpace, exp_id: int,
                        future_rewards: Sequence[float]) -> float:
    """Replace an experience's reward with the mean instantaneous reward
    over its future horizon."""
    return space.apply_future_reward(exp_id, future_rewards)


# -- snapshots ----------------------------------------------------------------

def space_to_dict(space: ExperienceSpace) -> dict:
    return {
        "schema": SPACE_SCHEMA,
        "merge_threshold": space.merge_threshold,
        "reward_update_rate": space.reward_update_rate,
        "next_id": space._next_id,
        "last_visited": space._last_visited,
        "experiences": [
            {
                "id": e.id,
                "samples": e.samples.tolist(),
                "action": e.action,
                "reward": e.reward,
                "visit_count": e.visit_count,
                "prev_id": e.prev_id,
                "next_id": e.next_id,
                "created_tick": e.created_tick,
            }
            for e in space
        ],
    }


def space_from_dict(doc: dict) -> ExperienceSpace:
    if doc.get("schema") != SPACE_SCHEMA:
        raise ValueError(f"unsupported snapshot schema {doc.get('schema')!r}")
    space = ExperienceSpace(doc["merge_threshold"], doc["reward_update_rate"])
    for rec in doc["experiences"]:
        exp = Experience(
            id=rec["id"],
            samples=np.array(rec["samples"], dtype=np.uint8),
            action=rec["action"],
            reward=rec["reward"],
            visit_count=rec["visit_count"],
            prev_id=rec["prev_id"],
            next_id=rec["next_id"],
            created_tick=rec["created_tick"],
        )
        space._check_shape(exp.samples)
        space.experiences[exp.id] = exp
        space._order.append(exp.id)
        space._created.append(exp.created_tick)
        space._actions.append(exp.action)
        row = space._intern_row(exp.samples)
        for chan, pid in zip(space._channels, row):
            chan.add_row(pid, space._pair_distance)
    space._next_id = doc["next_id"]
    space._last_visited = doc["last_visited"]
    return space


def save_space(space: ExperienceSpace, path: str | Path) -> None:
    Path(path).write_text(json.dumps(space_to_dict(space)))


def load_space(path: str | Path) -> ExperienceSpace:
    return space_from_dict(json.loads(Path(path).read_text()))
