"""Run configuration shared by the command-line tools."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields

from .diffusion import GuidanceConfig
from .errors import InvalidConfig
from .losses import LossWeights
from .network import DenoiserConfig
from .training import TrainConfig

SEED_ENV = "HOI_SEED"


@dataclass
class RunConfig:
    """Everything that determines a training or sampling run.

    The ablation switches override the corresponding settings:
    ``no_guidance`` disables guidance, ``no_contact_modality`` drops the
    contact tokens and their loss, ``no_canonicalization`` keeps windows in
    world coordinates and ``no_aux_loss`` zeroes the vertex, joint and
    foot-skating weights.
    """

    schedule: str = "cosine"
    T: int = 100
    W: int = 60
    ramp_mix: float = 0.5
    d_model: int = 128
    n_layers: int = 4
    n_heads: int = 4
    mlp_ratio: int = 4
    class_count: int = 33
    weights: dict = field(default_factory=lambda: LossWeights().to_dict())
    guidance: bool = True
    guidance_scale: float = 1e-2
    K: int = 10
    seed: int = 0
    batch_size: int = 16
    steps: int = 2000
    lr: float = 1e-3
    warmup: int = 100
    clip_norm: float = 1.0
    weight_decay: float = 1e-4
    obs_prob: float = 0.25
    checkpoint_every: int = 500
    no_guidance: bool = False
    no_contact_modality: bool = False
    no_canonicalization: bool = False
    no_aux_loss: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.schedule not in ("linear", "cosine"):
            raise InvalidConfig(f"unknown schedule {self.schedule!r}")
        if self.T < 1 or self.W < 2:
            raise InvalidConfig("T must be >= 1 and W >= 2")
        if not 0 <= self.K < self.W:
            raise InvalidConfig(f"K={self.K} must lie in [0, W)")
        if not 0.0 <= self.ramp_mix <= 1.0 or not 0.0 <= self.obs_prob <= 1.0:
            raise InvalidConfig("ramp_mix and obs_prob must be probabilities")
        if self.d_model % self.n_heads:
            raise InvalidConfig("d_model must be divisible by n_heads")
        if self.batch_size < 1 or self.steps < 0 or self.lr <= 0 or self.guidance_scale <= 0:
            raise InvalidConfig("batch_size, lr and guidance_scale must be positive")
        try:
            LossWeights(**self.weights)
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(f"bad loss weights: {exc}") from None

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidConfig(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self):
        return asdict(self)

    def effective_seed(self, override=None):
        """Explicit override, else ``$HOI_SEED``, else the configured seed."""
        if override is not None:
            return int(override)
        env = os.environ.get(SEED_ENV)
        if env is not None:
            try:
                return int(env)
            except ValueError:
                raise InvalidConfig(f"{SEED_ENV} must be an integer, got {env!r}") from None
        return self.seed

    def loss_weights(self) -> LossWeights:
        w = LossWeights(**self.weights)
        if self.no_aux_loss:
            w = w.without_aux()
        if self.no_contact_modality:
            w = LossWeights(w.h_n, w.o_n, 0.0, w.o_v, w.h_j, w.h_s)
        return w

    def denoiser(self) -> DenoiserConfig:
        return DenoiserConfig(d_model=self.d_model, n_layers=self.n_layers, n_heads=self.n_heads,
                              mlp_ratio=self.mlp_ratio, window=self.W, T=self.T,
                              class_count=self.class_count, use_contact=not self.no_contact_modality)

    def guidance_config(self) -> GuidanceConfig:
        return GuidanceConfig(scale=self.guidance_scale, enabled=self.guidance and not self.no_guidance)

    def train_config(self) -> TrainConfig:
        return TrainConfig(steps=self.steps, batch_size=self.batch_size, lr=self.lr,
                           weight_decay=self.weight_decay, clip_norm=self.clip_norm, warmup=self.warmup,
                           ramp_mix=self.ramp_mix, max_context=self.K, obs_prob=self.obs_prob)

    @property
    def canonical(self):
        return not self.no_canonicalization
