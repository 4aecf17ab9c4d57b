"""Flow-matching execution: Euler sampling, disentangled object sampling,
and the truncated-window schedule used for reward-based finetuning.

Time runs on a uniform grid tau_k = 1 - k/T, k = 0..T, from pure noise
(tau = 1) to the sample (tau = 0); an Euler step therefore adds
v * (tau_{k+1} - tau_k) = -v / T. A field whose velocity equals
(noise - sample) transports noise to the sample exactly on this grid.

Disentangled object sampling: per step, an update conditioned on the
global prompt and scene map is computed, then per-object updates (each
from the same pre-step latent, conditioned on that object's prompt and
map) overwrite the latent inside their masks, in object-index order.
Conditioning is only injected for the first `injection_steps` steps;
afterwards a single update with no map runs.

No network training happens here: the truncated run exposes the schedule,
the per-step gradient-window annotation, the coarse estimate, and a reward
hook, so an outer training loop could attach gradients to steps inside
[T0, T1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .render import CnocsMap

__all__ = [
    "VelocityField",
    "LatentState",
    "DosConfig",
    "TruncationConfig",
    "StepRecord",
    "TruncatedRun",
    "uniform_schedule",
    "euler_step",
    "dos_sample",
    "coarse_estimate",
    "sample_truncation_window",
    "truncated_run",
    "ZeroField",
    "LinearToTargetField",
    "SeededRandomField",
    "FIELD_REGISTRY",
    "make_field",
]


class VelocityField(Protocol):
    """v(x, step, prompt, cnocs_map) -> velocity with x's shape."""

    def __call__(self, x: np.ndarray, step: int, prompt: str,
                 cnocs_map: CnocsMap | None) -> np.ndarray: ...


def uniform_schedule(steps: int) -> np.ndarray:
    """tau_k = 1 - k/steps for k = 0..steps."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    return 1.0 - np.arange(steps + 1, dtype=np.float64) / steps


@dataclass(frozen=True)
class LatentState:
    x: np.ndarray
    step: int
    schedule: np.ndarray
    noise: np.ndarray

    def __post_init__(self):
        sched = np.asarray(self.schedule, dtype=np.float64)
        if sched[0] != 1.0 or sched[-1] != 0.0 or not np.all(np.diff(sched) < 0):
            raise ValueError("schedule must decrease strictly from 1 to 0")
        if not (0 <= self.step <= len(sched) - 1):
            raise ValueError("step index outside schedule")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("latent must be finite")
        object.__setattr__(self, "schedule", sched)

    @property
    def tau(self) -> float:
        return float(self.schedule[self.step])

    @staticmethod
    def initial(noise: np.ndarray, steps: int) -> "LatentState":
        noise = np.asarray(noise, dtype=np.float64)
        return LatentState(x=noise.copy(), step=0,
                           schedule=uniform_schedule(steps), noise=noise)


def euler_step(state: LatentState, v: np.ndarray) -> LatentState:
    """Advance one step: x += v * (tau_{k+1} - tau_k)."""
    v = np.asarray(v)
    if v.shape != state.x.shape:
        raise ValueError(f"velocity shape {v.shape} != latent shape {state.x.shape}")
    if state.step >= len(state.schedule) - 1:
        raise ValueError("schedule exhausted")
    dt = state.schedule[state.step + 1] - state.schedule[state.step]
    return LatentState(x=state.x + v * dt, step=state.step + 1,
                       schedule=state.schedule, noise=state.noise)


@dataclass
class DosConfig:
    """Inputs of one disentangled sampling run."""

    steps: int = 20
    injection_steps: int = 15
    prompt: str = ""
    global_map: CnocsMap | None = None
    object_prompts: Sequence[str] = ()
    object_maps: Sequence[CnocsMap | None] = ()
    masks: Sequence[np.ndarray] = ()  # latent-resolution binary, one per object

    def __post_init__(self):
        if self.injection_steps > self.steps:
            raise ValueError("injection_steps must be <= steps")
        if not (len(self.object_prompts) == len(self.object_maps) == len(self.masks)):
            raise ValueError("object prompts, maps, and masks must align")
        for m in self.masks:
            vals = np.unique(np.asarray(m))
            if not np.all(np.isin(vals, (0, 1))):
                raise ValueError("masks must be binary")

    @property
    def num_objects(self) -> int:
        return len(self.masks)


def dos_sample(noise: np.ndarray, config: DosConfig, field: VelocityField) -> np.ndarray:
    """Integrate the field from `noise` with per-object masked merging."""
    schedule = uniform_schedule(config.steps)
    x = np.asarray(noise, dtype=np.float64).copy()
    for k in range(config.steps):
        dt = schedule[k + 1] - schedule[k]
        inject = k < config.injection_steps
        v = field(x, k, config.prompt, config.global_map if inject else None)
        x_next = x + v * dt
        if inject:
            for i in range(config.num_objects):
                v_i = field(x, k, config.object_prompts[i], config.object_maps[i])
                x_obj = x + v_i * dt
                m = config.masks[i]
                x_next = (1 - m) * x_next + m * x_obj
        x = x_next
    return x


def coarse_estimate(x_at: np.ndarray, tau: float, noise: np.ndarray) -> np.ndarray:
    """Invert the interpolation x_tau = (1 - tau) x + tau noise for x."""
    if tau >= 1.0 - 1e-6:
        raise ValueError("tau too close to 1; estimate would blow up")
    return (np.asarray(x_at) - tau * np.asarray(noise)) / (1.0 - tau)


def sample_truncation_window(t_min: int, t_max: int, k: int,
                             rng: np.random.Generator) -> tuple[int, int]:
    """Draw (T0, T1): T1 uniform on [t_min, t_max], T0 uniform on
    [T1 - k, T1 - 1], so 0 < T1 - T0 <= k."""
    if not (1 <= k <= t_min):
        raise ValueError("need 1 <= k <= t_min")
    if t_min > t_max:
        raise ValueError("need t_min <= t_max")
    t1 = int(rng.integers(t_min, t_max + 1))
    t0 = int(rng.integers(t1 - k, t1))
    return t0, t1


@dataclass(frozen=True)
class TruncationConfig:
    """Finetuning-schedule hyperparameters."""

    k: int = 2
    t_min: int = 6
    t_max: int = 16
    beta: float = 5e-3


@dataclass(frozen=True)
class StepRecord:
    step: int
    tau: float
    grad: bool  # inside the backpropagation window [T0, T1)


@dataclass(frozen=True)
class TruncatedRun:
    records: tuple[StepRecord, ...]
    window: tuple[int, int]
    x_final: np.ndarray  # latent at step T1
    x_hat: np.ndarray  # coarse estimate of the clean sample
    reward: float | None
    objective: float | None  # -beta * reward, what a training loop would minimize


def truncated_run(noise: np.ndarray, field: VelocityField, prompt: str,
                  cnocs_map: CnocsMap | None, steps: int,
                  window: tuple[int, int],
                  reward_fn: Callable[[np.ndarray], float] | None = None,
                  beta: float = TruncationConfig.beta) -> TruncatedRun:
    """Run the first T1 steps of a T-step schedule, annotating the gradient
    window, and coarse-estimate the sample from the truncated latent."""
    t0, t1 = window
    if not (0 <= t0 < t1 <= steps):
        raise ValueError("window must satisfy 0 <= T0 < T1 <= steps")
    state = LatentState.initial(noise, steps)
    records = []
    for k in range(t1):
        records.append(StepRecord(step=k, tau=state.tau, grad=t0 <= k < t1))
        v = field(state.x, k, prompt, cnocs_map)
        state = euler_step(state, v)
    x_hat = coarse_estimate(state.x, state.tau, state.noise)
    r = reward_fn(x_hat) if reward_fn is not None else None
    return TruncatedRun(records=tuple(records), window=(t0, t1),
                        x_final=state.x.copy(), x_hat=x_hat,
                        reward=r, objective=(None if r is None else -beta * r))


# ---------------------------------------------------------------------------
# Toy field registry
# ---------------------------------------------------------------------------

@dataclass
class ZeroField:
    def __call__(self, x, step, prompt, cnocs_map):
        return np.zeros_like(x)


@dataclass
class LinearToTargetField:
    """Exact straight-line flow toward a per-condition target.

    On the interpolation line the velocity (x - target) / tau equals
    (noise - target), so Euler integration on the uniform grid lands on the
    target exactly. Prompts without a registered target flow toward zero.
    """

    targets: dict
    steps: int
    schedule: np.ndarray = field(init=False)

    def __post_init__(self):
        self.schedule = uniform_schedule(self.steps)

    def __call__(self, x, step, prompt, cnocs_map):
        tau = self.schedule[step]
        target = self.targets.get(prompt)
        if target is None:
            target = np.zeros_like(x)
        return (x - target) / tau


@dataclass
class SeededRandomField:
    """Stationary noise drawn once from the seed, returned at every step."""

    seed: int
    shape: tuple
    scale: float = 1.0

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        self._noise = self.scale * rng.standard_normal(self.shape)

    def __call__(self, x, step, prompt, cnocs_map):
        if x.shape != self._noise.shape:
            raise ValueError("latent shape differs from the field's shape")
        return self._noise


FIELD_REGISTRY = {
    "zero": ZeroField,
    "linear_to_target": LinearToTargetField,
    "seeded_random": SeededRandomField,
}


def make_field(name: str, **kwargs) -> VelocityField:
    try:
        cls = FIELD_REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown field {name!r}") from None
    return cls(**kwargs)
