"""Random-waypoint mobility, constant-velocity prediction and service-time bound."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class Phase(str, enum.Enum):
    MOVING = "moving"
    PAUSED = "paused"


@dataclass(frozen=True)
class Room:
    width: float
    depth: float

    def __post_init__(self):
        if not (self.width > 0 and self.depth > 0):
            raise ValueError(f"room dimensions must be positive, got {self.width} x {self.depth}")

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.depth)

    def clamp(self, pos):
        pos = np.asarray(pos, dtype=float)
        return np.stack(
            [np.clip(pos[..., 0], 0.0, self.width), np.clip(pos[..., 1], 0.0, self.depth)], axis=-1
        )

    def contains(self, pos, tol: float = 0.0) -> bool:
        pos = np.asarray(pos, dtype=float)
        return bool(
            np.all(pos[..., 0] >= -tol) and np.all(pos[..., 0] <= self.width + tol)
            and np.all(pos[..., 1] >= -tol) and np.all(pos[..., 1] <= self.depth + tol)
        )

    def uniform(self, rng: np.random.Generator, size=None) -> np.ndarray:
        shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
        return np.stack(
            [rng.uniform(0.0, self.width, shape), rng.uniform(0.0, self.depth, shape)], axis=-1
        )


@dataclass(frozen=True)
class MobilityParams:
    v_min: float = 0.0
    v_max: float = 1.0
    pause_min: float = 0.0
    pause_max: float = 1.0

    def __post_init__(self):
        if not (0 <= self.v_min <= self.v_max and self.v_max > 0):
            raise ValueError("speeds must satisfy 0 <= v_min <= v_max, v_max > 0")
        if not (0 <= self.pause_min <= self.pause_max):
            raise ValueError("pauses must satisfy 0 <= pause_min <= pause_max")

    def draw_speed(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.v_min, self.v_max))

    def draw_pause(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.pause_min, self.pause_max))


@dataclass(frozen=True)
class UserState:
    position: np.ndarray
    waypoint: np.ndarray
    speed: float
    pause_remaining: float = 0.0
    phase: Phase = Phase.MOVING

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(2))
        object.__setattr__(self, "waypoint", np.asarray(self.waypoint, dtype=float).reshape(2))
        object.__setattr__(self, "phase", Phase(self.phase))
        if self.pause_remaining < 0:
            raise ValueError("pause_remaining must be >= 0")

    @property
    def remaining_leg(self) -> float:
        return float(np.hypot(*(self.waypoint - self.position)))

    @property
    def velocity(self) -> np.ndarray:
        if self.phase is Phase.PAUSED:
            return np.zeros(2)
        d = self.waypoint - self.position
        dist = np.hypot(*d)
        return np.zeros(2) if dist == 0 else self.speed * d / dist


def rwp_step(state: UserState, dt: float, params: MobilityParams, room: Room,
             rng: np.random.Generator) -> UserState:
    """Advance one user by ``dt`` seconds.

    Walks straight to the waypoint at the leg speed, pauses there for a
    Uniform(pause_min, pause_max) time, then draws a new uniform waypoint and
    a new Uniform(v_min, v_max) speed. Any number of leg/pause transitions may
    happen inside one call. Random draws happen only at those events, so
    splitting ``dt`` into pieces consumes the same draw sequence.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    pos = state.position.copy()
    wp = state.waypoint.copy()
    speed = state.speed
    pause = state.pause_remaining
    phase = state.phase
    left = float(dt)
    while left > 0:
        if phase is Phase.PAUSED:
            if pause > left:
                pause -= left
                left = 0.0
                break
            left -= pause
            pause = 0.0
            wp = room.uniform(rng)
            speed = params.draw_speed(rng)
            phase = Phase.MOVING
            continue
        dist = float(np.hypot(*(wp - pos)))
        travel = speed * left
        if travel < dist:
            pos = pos + (wp - pos) * (travel / dist)
            left = 0.0
            break
        left -= dist / speed if speed > 0 else left
        pos = wp.copy()
        pause = params.draw_pause(rng)
        phase = Phase.PAUSED
    return UserState(room.clamp(pos), wp, speed, pause, phase)


def rwp_init(room: Room, params: MobilityParams, count: int, rng_seed=None,
             include_pauses: bool = True) -> list[UserState]:
    """Draw ``count`` users from the stationary random-waypoint distribution.

    A leg (start, end, speed) is accepted with probability proportional to the
    time it occupies, ``length / speed + pause``; the user is then placed
    either uniformly along the leg or at its end (paused, with a uniformly
    elapsed part of the pause) in proportion to the two durations. With
    ``v_min == 0`` the mean leg time diverges, so legs are weighted by length
    alone, speeds stay uniform and nobody starts paused.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    timed = params.v_min > 0
    pause_weight = include_pauses and timed and params.pause_max > 0
    if timed:
        bound = room.diagonal / params.v_min + (params.pause_max if pause_weight else 0.0)
    else:
        bound = room.diagonal

    states: list[UserState] = []
    while len(states) < count:
        n = max(64, 2 * (count - len(states)))
        if timed:
            n *= 8
        a = room.uniform(rng, n)
        b = room.uniform(rng, n)
        v = rng.uniform(params.v_min, params.v_max, n)
        p = rng.uniform(params.pause_min, params.pause_max, n) if pause_weight else np.zeros(n)
        length = np.hypot(*(b - a).T)
        if timed:
            move_t = length / v
            weight = move_t + p
        else:
            move_t = length
            weight = length
        accept = rng.uniform(0.0, bound, n) < weight
        frac = rng.uniform(0.0, 1.0, n)
        which = rng.uniform(0.0, 1.0, n) * weight  # < move_t -> moving
        elapsed = rng.uniform(0.0, 1.0, n)
        for i in np.flatnonzero(accept):
            if which[i] < move_t[i]:
                pos = a[i] + frac[i] * (b[i] - a[i])
                states.append(UserState(pos, b[i], float(v[i]), 0.0, Phase.MOVING))
            else:
                states.append(UserState(b[i].copy(), b[i], float(v[i]), float(p[i] * elapsed[i]), Phase.PAUSED))
            if len(states) == count:
                break
    return states


def predict(pos_prev, pos_now, tau_p: float, T: int, room: Room | None = None) -> np.ndarray:
    """Constant-velocity forecast from two position fixes ``tau_p`` apart.

    Returns an array of shape (T, ..., 2); entry ``t-1`` is the position
    ``t`` service times ahead. Works for a single user or a stack of users.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if tau_p <= 0:
        raise ValueError("tau_p must be positive")
    prev = np.asarray(pos_prev, dtype=float)
    now = np.asarray(pos_now, dtype=float)
    velocity = (now - prev) / tau_p
    steps = np.arange(1, T + 1, dtype=float).reshape((T,) + (1,) * now.ndim)
    out = now + steps * tau_p * velocity
    return room.clamp(out) if room is not None else out


def misprediction_probability(state: UserState, T: int, tau_p: float) -> float:
    """Probability that a moving user stops inside the T-step horizon.

    Paused users return 1: their velocity estimate is zero and any later
    motion is unpredicted.
    """
    if state.phase is Phase.PAUSED:
        return 1.0
    travel = state.speed * T * tau_p
    leg = state.remaining_leg
    if leg <= 0:
        return 1.0
    return min(1.0, travel / leg)


def misprediction_frequency(room: Room, params: MobilityParams, T: int, tau_p: float, trials: int,
                            rng_seed=None) -> float:
    """Fraction of stationary moving users that reach their waypoint within T service times.

    Moving users of the stationary process (with or without pauses) follow
    the time-weighted leg law, so they are drawn with pauses switched off.
    """
    states = rwp_init(room, params, trials, rng_seed, include_pauses=False)
    travel = np.array([s.speed for s in states]) * T * tau_p
    remaining = np.array([s.remaining_leg for s in states])
    return float(np.mean(remaining <= travel))


def expected_leg_length(room: Room, samples: int, rng_seed=None, chunk: int = 1_000_000) -> float:
    """Monte Carlo mean distance between two independent uniform points in the room."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(rng_seed)
    total = 0.0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        dx = (rng.random(n) - rng.random(n)) * room.width
        dy = (rng.random(n) - rng.random(n)) * room.depth
        total += float(np.hypot(dx, dy).sum())
        done += n
    return total / samples


def service_time_bound(delta: float, T: int, v_min: float, v_max: float, mean_leg: float) -> float:
    """Largest service time keeping the expected misprediction probability below ``delta``."""
    if v_min <= 0:
        raise ValueError("v_min must be > 0; a zero minimum speed is equivalent to a pause")
    if not v_min < v_max:
        raise ValueError("need v_min < v_max")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if T < 1:
        raise ValueError("T must be >= 1")
    if mean_leg <= 0:
        raise ValueError("mean leg length must be positive")
    return delta / T * math.log(v_max / v_min) / (v_max - v_min) * mean_leg


def trajectory(states: list[UserState], n_samples: int, dt: float, params: MobilityParams,
               room: Room, seed=None) -> np.ndarray:
    """Ground-truth positions sampled every ``dt``: shape (n_samples, n_users, 2).

    Sample 0 is the initial position. Each user draws from its own child
    stream of ``seed``, so users are independent of each other's history.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rngs = [np.random.default_rng(s) for s in ss.spawn(len(states))]
    out = np.empty((n_samples, len(states), 2))
    current = list(states)
    for k in range(n_samples):
        if k:
            current = [rwp_step(s, dt, params, room, g) for s, g in zip(current, rngs)]
        for u, s in enumerate(current):
            out[k, u] = s.position
    return out
