"""Policy heads and the agent bundle: encoder, squashed-Gaussian actor, twin critics."""

import copy
import math
from typing import NamedTuple, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from viewdistill.core.exceptions import FingerprintError, ShapeError
from viewdistill.core.hashing import hash_document
from viewdistill.models.archive import ParameterSet
from viewdistill.models.encoder import PixelEncoder, views_to_tensor
from viewdistill.schemas.training import PolicySpec

LOG_TWO = math.log(2.0)
HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)


class PolicySample(NamedTuple):
    action: torch.Tensor  # squashed, in (-1, 1)
    log_prob: torch.Tensor  # (B,)
    pre_tanh: torch.Tensor
    mean_action: torch.Tensor  # tanh(mean), the deterministic action


def _mlp(input_dim: int, hidden_dim: int, output_dim: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(input_dim, hidden_dim),
        nn.SiLU(),
        nn.Linear(hidden_dim, hidden_dim),
        nn.SiLU(),
        nn.Linear(hidden_dim, output_dim),
    )


def squashed_gaussian_sample(
    mean: torch.Tensor, log_std: torch.Tensor, generator: torch.Generator | None = None
) -> PolicySample:
    """Reparameterized sample of tanh(N(mean, exp(log_std))) with its log density."""
    noise = torch.randn(mean.shape, generator=generator, dtype=mean.dtype, device=mean.device)
    pre_tanh = mean + noise * log_std.exp()
    action = torch.tanh(pre_tanh)
    gaussian = (-0.5 * noise.pow(2) - log_std - HALF_LOG_TWO_PI).sum(dim=-1)
    # log(1 - tanh(u)^2) in a form that stays finite for large |u|
    squash = (2.0 * (LOG_TWO - pre_tanh - F.softplus(-2.0 * pre_tanh))).sum(dim=-1)
    return PolicySample(action, gaussian - squash, pre_tanh, torch.tanh(mean))


class Actor(nn.Module):
    """Gaussian policy head; log_std is squashed into [log_std_min, log_std_max]."""

    def __init__(
        self,
        input_dim: int,
        action_dim: int,
        hidden_dim: int = 256,
        log_std_min: float = -10.0,
        log_std_max: float = 2.0,
    ):
        super().__init__()
        self.trunk = _mlp(input_dim, hidden_dim, 2 * action_dim)
        self.log_std_min = log_std_min
        self.log_std_max = log_std_max

    def forward(self, h: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        mean, raw = self.trunk(h).chunk(2, dim=-1)
        span = self.log_std_max - self.log_std_min
        log_std = self.log_std_min + 0.5 * span * (torch.tanh(raw) + 1.0)
        return mean, log_std

    def sample(self, h: torch.Tensor, generator: torch.Generator | None = None) -> PolicySample:
        mean, log_std = self(h)
        return squashed_gaussian_sample(mean, log_std, generator)

    def deterministic(self, h: torch.Tensor) -> torch.Tensor:
        mean, _ = self(h)
        return torch.tanh(mean)


class Critic(nn.Module):
    """Twin Q functions over (feature [+ joints], action)."""

    def __init__(self, input_dim: int, action_dim: int, hidden_dim: int = 256):
        super().__init__()
        self.q1 = _mlp(input_dim + action_dim, hidden_dim, 1)
        self.q2 = _mlp(input_dim + action_dim, hidden_dim, 1)

    def forward(self, h: torch.Tensor, action: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        x = torch.cat([h, action], dim=-1)
        return self.q1(x).squeeze(-1), self.q2(x).squeeze(-1)


class Agent(nn.Module):
    """Encoder + actor + critics with delayed target copies and a learned temperature."""

    def __init__(
        self,
        encoder: nn.Module,
        actor: Actor,
        critic: Critic,
        spec: PolicySpec | None = None,
        init_temperature: float = 0.1,
    ):
        super().__init__()
        self.spec = spec
        self.encoder = encoder
        self.actor = actor
        self.critic = critic
        self.encoder_target = copy.deepcopy(encoder)
        self.critic_target = copy.deepcopy(critic)
        for module in (self.encoder_target, self.critic_target):
            module.requires_grad_(False)
        self.log_alpha = nn.Parameter(torch.tensor(math.log(init_temperature)))

    @classmethod
    def build(cls, spec: PolicySpec, init_temperature: float = 0.1) -> "Agent":
        head_dim = spec.encoder.feature_dim + spec.joint_dim
        return cls(
            encoder=PixelEncoder(spec.encoder),
            actor=Actor(
                head_dim, spec.action_dim, spec.hidden_dim, spec.log_std_min, spec.log_std_max
            ),
            critic=Critic(head_dim, spec.action_dim, spec.hidden_dim),
            spec=spec,
            init_temperature=init_temperature,
        )

    @property
    def alpha(self) -> torch.Tensor:
        return self.log_alpha.exp()

    def fingerprint(self) -> str:
        if self.spec is not None:
            return self.spec.fingerprint()
        layout = [[name, list(t.shape)] for name, t in self.state_dict().items()]
        return hash_document(layout)

    @staticmethod
    def head_input(feature: torch.Tensor, q: torch.Tensor | None) -> torch.Tensor:
        """Feature with the optional joint vector appended after the encoder."""
        return feature if q is None else torch.cat([feature, q], dim=-1)

    def online_modules(self) -> list[nn.Module]:
        return [self.encoder, self.actor, self.critic]

    def parameter_set(self, **metadata: str) -> ParameterSet:
        tensors = {k: v.detach().clone() for k, v in self.state_dict().items()}
        return ParameterSet(tensors=tensors, fingerprint=self.fingerprint(), metadata=metadata)

    def load_parameter_set(self, params: ParameterSet) -> None:
        if params.fingerprint != self.fingerprint():
            raise FingerprintError(
                f"parameter fingerprint {params.fingerprint[:12]} does not match "
                f"architecture {self.fingerprint()[:12]}"
            )
        self.load_state_dict(params.tensors)


def encode(
    agent: Agent, images: Sequence[np.ndarray], q: np.ndarray | None = None
) -> tuple[torch.Tensor, torch.Tensor]:
    """Encode one observation. Returns the feature vector and the policy-head input."""
    spec = agent.spec
    if spec is None:
        raise ShapeError("encode() needs an agent built from a PolicySpec")
    obs = views_to_tensor(images, spec.encoder.views, spec.encoder.image_size).unsqueeze(0)
    feature = agent.encoder(obs).squeeze(0)
    if spec.joint_dim and q is None:
        raise ShapeError("this architecture expects a joint-state vector")
    q_t = None
    if spec.joint_dim:
        q_t = torch.as_tensor(np.asarray(q, dtype=np.float32))
        if q_t.shape != (spec.joint_dim,):
            raise ShapeError(f"joint vector must have {spec.joint_dim} entries")
    return feature, agent.head_input(feature, q_t)


def actor_sample(
    agent: Agent, feature: torch.Tensor, generator: torch.Generator | None = None
) -> tuple[torch.Tensor, torch.Tensor]:
    """Stochastic action in (-1, 1)^5 and its log-probability for one head input."""
    sample = agent.actor.sample(feature.unsqueeze(0), generator)
    return sample.action.squeeze(0), sample.log_prob.squeeze(0)
