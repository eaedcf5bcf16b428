"""Run configuration: every tunable constant of the vocoder in one flat record.

The on-disk format is UTF-8 text, one ``key = value`` pair per line, ``#``
starts a comment.  Unknown keys are rejected so typos never pass silently.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass(frozen=True)
class RunConfig:
    # signal
    sample_rate: int = 24000
    n_bands: int = 4
    bits: int = 10
    preemph: float = 0.85
    # filterbank prototype
    fb_taps: int = 63
    fb_beta: float = 9.0
    fb_cutoff: float = 0.142
    # features
    hop: int = 300
    win: int = 1200
    fft_size: int = 2048
    n_mels: int = 80
    lpc_order: int = 8
    lag_hz: float = 60.0
    mel_ridge: float = 1e-6
    # network
    gru_units: int = 384
    affine_units: int = 128
    embed_dim: int = 16
    cond_channels: int = 256
    cond_layers: int = 5
    block_rows: int = 16
    # sampling
    threshold: float = 0.02
    seed: int = 1234
    # pruning schedule (full-scale iteration counts)
    warmup_target: float = 0.5
    warmup_ramp_iters: int = 300_000
    warmup_maintain_iters: int = 100_000
    loop_increment: float = 0.1
    loop_ramp_iters: int = 100_000
    loop_maintain_iters: int = 100_000
    n_loops: int = 4
    schedule_scale: int = 1000
    # optimisation
    lr: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 1536
    seq_len: int = 64
    iterations: int = 1_200_000
    log_every: int = 50

    def __post_init__(self) -> None:
        self.validate()

    # derived quantities -------------------------------------------------
    @property
    def q_root(self) -> int:
        return 1 << (self.bits // 2)

    @property
    def levels(self) -> int:
        return 1 << self.bits

    @property
    def repeat(self) -> int:
        """Network steps per mel frame (``hop / n_bands``)."""
        return self.hop // self.n_bands

    @property
    def final_sparsity(self) -> float:
        return self.warmup_target + self.n_loops * self.loop_increment

    @property
    def train_iterations(self) -> int:
        return self.iterations // self.schedule_scale

    @property
    def chunks_per_batch(self) -> int:
        return max(1, self.batch_size // (self.seq_len * self.n_bands))

    def validate(self) -> None:
        if self.bits < 2 or self.bits % 2:
            raise ConfigError(f"bits must be even and >= 2, got {self.bits}")
        if self.n_bands < 1:
            raise ConfigError("n_bands must be positive")
        if self.hop % self.n_bands:
            raise ConfigError(f"hop {self.hop} is not a multiple of n_bands {self.n_bands}")
        if self.fb_taps % 2 == 0 or self.fb_taps < 4 * self.n_bands:
            raise ConfigError("fb_taps must be odd and >= 4 * n_bands")
        if not 0.0 < self.fb_cutoff < 0.5:
            raise ConfigError("fb_cutoff must lie in (0, 0.5)")
        if not 0.0 <= self.preemph < 1.0:
            raise ConfigError("preemph must lie in [0, 1)")
        if self.win > self.fft_size:
            raise ConfigError("win must not exceed fft_size")
        if self.gru_units % self.block_rows:
            raise ConfigError("gru_units must be a multiple of block_rows")
        if not 0.0 <= self.threshold < 1.0 / self.q_root:
            raise ConfigError(f"threshold must lie in [0, 1/Q) = [0, {1.0 / self.q_root})")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.schedule_scale < 1:
            raise ConfigError("schedule_scale must be >= 1")
        if not 0.0 <= self.final_sparsity < 1.0:
            raise ConfigError("warmup_target + n_loops * loop_increment must be < 1")
        for name in ("gru_units", "affine_units", "embed_dim", "cond_channels",
                     "cond_layers", "lpc_order", "n_mels", "seq_len", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        coerced = {}
        for key, value in data.items():
            kind = known[key].type
            try:
                if kind == "int":
                    if isinstance(value, str):
                        value = value.replace("_", "")
                    fv = float(value)
                    if fv != int(fv):
                        raise ValueError
                    coerced[key] = int(fv)
                else:
                    coerced[key] = float(value)
            except (TypeError, ValueError):
                raise ConfigError(f"bad value for {key}: {value!r}") from None
        return cls(**coerced)


def parse_config_text(text: str) -> RunConfig:
    data = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in data:
            raise ConfigError(f"line {lineno}: duplicate key {key}")
        data[key] = value
    return RunConfig.from_dict(data)


def format_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.to_dict().items())


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)


def bundled_config(name: str) -> RunConfig:
    """Load one of the configs shipped in ``featherwave/configs`` (``default``, ``desk``)."""
    text = resources.files("featherwave").joinpath("configs").joinpath(f"{name}.cfg").read_text("utf-8")
    return parse_config_text(text)
