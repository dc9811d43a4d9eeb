"""Training configuration records."""

from dataclasses import asdict, dataclass, field

from coadapt.exceptions import ConfigError
from coadapt.numerics.mlp import HEAD_MODES

__all__ = ["SELECTORS", "LOSS_HEADS", "DR3_VARIANTS", "OPTIMIZERS", "Dr3Config", "TrainConfig"]

# sarsa: dataset next action; expected: expectation under the behavior policy;
# max: greedy in the target network; mc: regression onto Monte-Carlo returns.
SELECTORS = ("sarsa", "expected", "max", "mc")
LOSS_HEADS = ("td", "cql", "rem")
DR3_VARIANTS = ("off", "dot", "dot_stopgrad", "label_noise")
OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class Dr3Config:
    """Explicit feature-dot-product penalty, weighted by ``coef``.

    ``dot`` penalises the summed dot products of current and next features,
    ``dot_stopgrad`` blocks the gradient through the next-state features,
    and ``label_noise`` weights the product by the Lyapunov covariance of
    label-noise SGD computed with ``lyapunov_iters`` fixed-point steps.
    """

    variant: str = "off"
    coef: float = 0.0
    lyapunov_iters: int = 20
    lyapunov_lr: float = 1e-3

    def __post_init__(self):
        if self.variant not in DR3_VARIANTS:
            raise ConfigError(f"unknown DR3 variant {self.variant!r}")
        if self.coef < 0:
            raise ConfigError("DR3 coefficient must be non-negative")
        if (self.coef == 0.0) != (self.variant == "off"):
            raise ConfigError("DR3 coefficient must be zero exactly when the variant is 'off'")
        if self.lyapunov_iters < 1 or self.lyapunov_lr <= 0:
            raise ConfigError("lyapunov_iters must be >= 1 and lyapunov_lr > 0")

    @classmethod
    def make(cls, variant="dot", coef=0.0, **kwargs):
        """Like the constructor, but a zero coefficient switches the penalty off."""
        if coef == 0.0:
            variant = "off"
        return cls(variant, float(coef), **kwargs)

    @property
    def enabled(self):
        return self.variant != "off"


@dataclass(frozen=True)
class TrainConfig:
    """Every knob of an offline training run."""

    selector: str = "expected"
    loss_head: str = "td"
    cql_alpha: float = 0.0
    rem_heads: int = 1
    rem_loss: str = "huber"
    dr3: Dr3Config = field(default_factory=Dr3Config)
    gamma: float | None = None
    lr: float = 1e-3
    optimizer: str = "adam"
    batch_size: int = 64
    target_period: int = 10
    total_steps: int = 10_000
    eval_every: int = 1000
    seed: int = 0
    head_mode: str = "state_multihead"
    hidden: tuple = (64, 64)
    srank_delta: float = 0.01
    eval_episodes: int = 1
    eval_max_len: int = 100
    divergence_cap: float = 1e6

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.selector not in SELECTORS:
            raise ConfigError(f"unknown selector {self.selector!r}; choose from {SELECTORS}")
        if self.loss_head not in LOSS_HEADS:
            raise ConfigError(f"unknown loss head {self.loss_head!r}; choose from {LOSS_HEADS}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.head_mode not in HEAD_MODES:
            raise ConfigError(f"unknown head mode {self.head_mode!r}")
        if self.rem_loss not in ("huber", "squared"):
            raise ConfigError("rem_loss must be 'huber' or 'squared'")
        if self.cql_alpha < 0:
            raise ConfigError("CQL alpha must be non-negative")
        if self.rem_heads < 1:
            raise ConfigError("REM needs at least one head")
        if self.loss_head != "rem" and self.rem_heads != 1:
            raise ConfigError("multiple heads are only meaningful with the REM loss")
        if self.target_period < 1 or self.batch_size < 1 or self.eval_every < 1:
            raise ConfigError("target_period, batch_size and eval_every must be >= 1")
        if self.total_steps < 0:
            raise ConfigError("total_steps must be non-negative")
        if not self.lr >= 0:
            raise ConfigError("learning rate must be non-negative")
        if self.gamma is not None and not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must lie in [0, 1)")
        if not 0.0 < self.srank_delta < 1.0:
            raise ConfigError("srank delta must lie in (0, 1)")
        if not self.hidden or min(self.hidden) < 1:
            raise ConfigError("need at least one hidden layer")

    @property
    def n_heads(self):
        return self.rem_heads if self.loss_head == "rem" else 1

    def to_flat(self):
        """Flat ``key -> value`` view used for provenance headers."""
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, dict):
                for sub, v in value.items():
                    out[f"{key}.{sub}"] = v
            else:
                out[key] = list(value) if isinstance(value, tuple) else value
        return out
