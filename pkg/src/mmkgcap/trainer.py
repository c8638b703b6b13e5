"""Shared optimization machinery: warmup/linear-decay schedule, clipping, Adam.

Parameters and gradients travel as ``dict[str, np.ndarray]`` keyed by tensor
name; all functions are pure state transitions, the caller owns sequencing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import SchemaError, ShapeError, StepOutOfRange


@dataclass(frozen=True)
class OptimConfig:
    base_lr: float = 1e-4
    init_lr: float = 1e-7
    warmup_steps: int = 4000
    total_steps: int = 10000
    weight_decay: float = 1e-5
    clip_norm: float = 0.1
    batch_size: int = 16
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (0.0 < self.init_lr <= self.base_lr):
            raise SchemaError(
                f"need 0 < init_lr <= base_lr, got init_lr={self.init_lr}, base_lr={self.base_lr}"
            )
        if not (0 <= self.warmup_steps < self.total_steps):
            raise SchemaError(
                f"need 0 <= warmup_steps < total_steps, got {self.warmup_steps} / {self.total_steps}"
            )
        if self.clip_norm <= 0:
            raise SchemaError(f"clip_norm must be positive, got {self.clip_norm}")


def load_optim_config(path) -> OptimConfig:
    """Read an OptimConfig from a JSON or TOML file (by extension)."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"config file not found: {path}")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    else:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    known = {f for f in OptimConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise SchemaError(f"unknown optimizer config keys: {sorted(unknown)}")
    return OptimConfig(**raw)


def config_as_json(config: OptimConfig) -> str:
    return json.dumps(asdict(config), indent=2)


def lr_at_step(step: int, config: OptimConfig) -> float:
    """Linear ramp init_lr -> base_lr over warmup, then linear decay to zero."""
    if step < 0 or step > config.total_steps:
        raise StepOutOfRange(f"step {step} outside [0, {config.total_steps}]")
    if step <= config.warmup_steps:
        if config.warmup_steps == 0:
            return config.base_lr
        frac = step / config.warmup_steps
        return config.init_lr + frac * (config.base_lr - config.init_lr)
    frac = (step - config.warmup_steps) / (config.total_steps - config.warmup_steps)
    return config.base_lr * (1.0 - frac)


def global_norm(grads: dict[str, np.ndarray]) -> float:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(np.asarray(g, dtype=np.float64) ** 2))
    return float(np.sqrt(total))


def clip_gradients(grads: dict[str, np.ndarray], clip_norm: float) -> dict[str, np.ndarray]:
    """Scale all gradients so the global L2 norm is at most clip_norm."""
    norm = global_norm(grads)
    if norm <= clip_norm or norm == 0.0:
        return dict(grads)
    scale = clip_norm / norm
    return {k: g * scale for k, g in grads.items()}


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def init(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            step=0,
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    config: OptimConfig,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One Adam update with bias correction and decoupled weight decay.

    The decay term lr * weight_decay * p uses the parameter value from before
    the moment update, so a zero gradient with nonzero decay shrinks params by
    exactly that amount.
    """
    if set(params) != set(grads):
        raise ShapeError(
            f"param/grad key mismatch: {sorted(set(params) ^ set(grads))}"
        )
    t = state.step + 1
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name in params:
        p, g = params[name], grads[name]
        if p.shape != g.shape:
            raise ShapeError(f"{name}: param shape {p.shape} != grad shape {g.shape}")
        m = config.beta1 * state.m[name] + (1.0 - config.beta1) * g
        v = config.beta2 * state.v[name] + (1.0 - config.beta2) * g * g
        m_hat = m / (1.0 - config.beta1 ** t)
        v_hat = v / (1.0 - config.beta2 ** t)
        update = lr * m_hat / (np.sqrt(v_hat) + config.eps)
        new_params[name] = p - update - lr * config.weight_decay * p
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(step=t, m=new_m, v=new_v)
