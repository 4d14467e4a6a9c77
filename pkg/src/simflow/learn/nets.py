"""Policy/value network and GAIL discriminator.

Architecture: optional 2-layer conv encoder for image observations, a 3-layer
MLP trunk (128 units), then heads for the continuous action mean, a state-
independent log-std, an optional Bernoulli toggle logit, and the value.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from ..config import RunConfig


def _ortho(layer: nn.Linear | nn.Conv2d, gain: float) -> nn.Module:
    nn.init.orthogonal_(layer.weight, gain=gain)
    nn.init.zeros_(layer.bias)
    return layer


def _conv_encoder(channels_in: int, conv_channels, image_hw) -> tuple[nn.Module, int]:
    c1, c2 = conv_channels
    enc = nn.Sequential(
        _ortho(nn.Conv2d(channels_in, c1, kernel_size=8, stride=4), float(np.sqrt(2))),
        nn.Tanh(),
        _ortho(nn.Conv2d(c1, c2, kernel_size=4, stride=2), float(np.sqrt(2))),
        nn.Tanh(),
        nn.Flatten(),
    )
    with torch.no_grad():
        dummy = torch.zeros(1, channels_in, image_hw[0], image_hw[1])
        flat = enc(dummy).shape[1]
    return enc, flat


def _trunk(in_dim: int, hidden: int, layers: int) -> nn.Sequential:
    mods: list[nn.Module] = []
    d = in_dim
    for _ in range(layers):
        mods.append(_ortho(nn.Linear(d, hidden), float(np.sqrt(2))))
        mods.append(nn.Tanh())
        d = hidden
    return nn.Sequential(*mods)


class PolicyNet(nn.Module):
    def __init__(self, vector_dim: int, action_dim: int, has_toggle: bool,
                 image_shape=None, hidden: int = 128, layers: int = 3,
                 conv_channels=(16, 32), log_std_init: float = -0.5):
        super().__init__()
        self.vector_dim = vector_dim
        self.action_dim = action_dim
        self.has_toggle = has_toggle
        self.image_shape = image_shape
        feat = vector_dim
        self.encoder = None
        if image_shape is not None:
            c, h, w = image_shape
            self.encoder, flat = _conv_encoder(c, conv_channels, (h, w))
            feat += flat
        self.trunk = _trunk(feat, hidden, layers)
        self.mean_head = _ortho(nn.Linear(hidden, action_dim), 0.01)
        self.log_std = nn.Parameter(torch.full((action_dim,), float(log_std_init)))
        self.toggle_head = _ortho(nn.Linear(hidden, 1), 0.01) if has_toggle else None
        self.value_head = _ortho(nn.Linear(hidden, 1), 1.0)

    def features(self, vector: torch.Tensor, image: torch.Tensor | None = None):
        if self.encoder is not None:
            if image is None:
                raise ValueError("vision policy requires an image input")
            x = torch.cat([vector, self.encoder(image)], dim=1)
        else:
            x = vector
        return self.trunk(x)

    def forward(self, vector: torch.Tensor, image: torch.Tensor | None = None):
        """Returns (mean, log_std, toggle_logit | None, value)."""
        h = self.features(vector, image)
        mean = self.mean_head(h)
        value = self.value_head(h).squeeze(-1)
        logit = self.toggle_head(h).squeeze(-1) if self.toggle_head is not None else None
        return mean, self.log_std.expand_as(mean), logit, value


class ActionDist:
    """Diagonal Gaussian over joint increments plus an optional Bernoulli toggle."""

    def __init__(self, mean, log_std, toggle_logit=None):
        self.mean = mean
        self.log_std = log_std
        self.toggle_logit = toggle_logit

    def sample(self, generator=None):
        std = self.log_std.exp()
        eps = torch.randn(self.mean.shape, generator=generator, device=self.mean.device)
        cont = self.mean + std * eps
        if self.toggle_logit is None:
            return cont
        u = torch.rand(self.toggle_logit.shape, generator=generator,
                       device=self.mean.device)
        tog = (u < torch.sigmoid(self.toggle_logit)).to(cont.dtype)
        return torch.cat([cont, tog.unsqueeze(-1)], dim=1)

    def deterministic(self):
        if self.toggle_logit is None:
            return self.mean
        tog = (self.toggle_logit > 0).to(self.mean.dtype)
        return torch.cat([self.mean, tog.unsqueeze(-1)], dim=1)

    def log_prob(self, action: torch.Tensor) -> torch.Tensor:
        cont = action[:, : self.mean.shape[1]]
        var = torch.exp(2 * self.log_std)
        lp = -0.5 * (((cont - self.mean) ** 2) / var
                     + 2 * self.log_std + np.log(2 * np.pi)).sum(dim=1)
        if self.toggle_logit is not None:
            tog = action[:, -1]
            lp = lp + -nn.functional.binary_cross_entropy_with_logits(
                self.toggle_logit, tog, reduction="none"
            )
        return lp

    def entropy(self) -> torch.Tensor:
        ent = (0.5 * (1.0 + np.log(2 * np.pi)) + self.log_std).sum(-1)
        ent = ent.expand(self.mean.shape[0]).clone()
        if self.toggle_logit is not None:
            p = torch.sigmoid(self.toggle_logit)
            eps = 1e-7
            ent = ent - (p * torch.log(p + eps) + (1 - p) * torch.log(1 - p + eps))
        return ent


class Discriminator(nn.Module):
    """Observation-only discriminator; output strictly inside (0, 1)."""

    LOGIT_CLAMP = 12.0

    def __init__(self, vector_dim: int, image_shape=None, hidden: int = 128,
                 layers: int = 3, conv_channels=(16, 32)):
        super().__init__()
        feat = vector_dim
        self.encoder = None
        if image_shape is not None:
            c, h, w = image_shape
            self.encoder, flat = _conv_encoder(c, conv_channels, (h, w))
            feat += flat
        self.trunk = _trunk(feat, hidden, layers)
        self.head = _ortho(nn.Linear(hidden, 1), 0.01)

    def logits(self, vector: torch.Tensor, image: torch.Tensor | None = None):
        if self.encoder is not None:
            x = torch.cat([vector, self.encoder(image)], dim=1)
        else:
            x = vector
        return self.head(self.trunk(x)).squeeze(-1).clamp(-self.LOGIT_CLAMP,
                                                          self.LOGIT_CLAMP)

    def forward(self, vector: torch.Tensor, image: torch.Tensor | None = None):
        return torch.sigmoid(self.logits(vector, image))


def obs_dims(cfg: RunConfig, task: str) -> tuple[int, tuple | None, int, bool]:
    """(vector_dim, image_shape, action_dim, has_toggle) for a task/config."""
    per_frame = 6 if cfg.env.obs_mode == "vision" else 13
    vector_dim = per_frame * cfg.env.frame_stack
    image_shape = None
    if cfg.env.obs_mode == "vision":
        channels = 6 if task == "irrigation" else 3  # current (+ initial) frame
        image_shape = (channels, cfg.env.image_height, cfg.env.image_width)
    action_dim = 5
    has_toggle = task == "irrigation"
    return vector_dim, image_shape, action_dim, has_toggle


def build_policy(cfg: RunConfig, task: str | None = None) -> PolicyNet:
    task = task or cfg.task
    vector_dim, image_shape, action_dim, has_toggle = obs_dims(cfg, task)
    return PolicyNet(
        vector_dim, action_dim, has_toggle, image_shape=image_shape,
        hidden=cfg.train.mlp_hidden, layers=cfg.train.mlp_layers,
        conv_channels=cfg.train.conv_channels, log_std_init=cfg.train.log_std_init,
    )


def build_discriminator(cfg: RunConfig, task: str | None = None) -> Discriminator:
    task = task or cfg.task
    vector_dim, image_shape, _, _ = obs_dims(cfg, task)
    return Discriminator(vector_dim, image_shape=image_shape,
                         hidden=cfg.train.mlp_hidden, layers=cfg.train.mlp_layers,
                         conv_channels=cfg.train.conv_channels)


def obs_batch_to_tensors(observations, task: str, device="cpu"):
    """Stack Observation objects into (vector, image|None) tensors."""
    vecs = torch.as_tensor(np.stack([o.vector for o in observations]),
                           dtype=torch.float32, device=device)
    first = observations[0]
    if first.image is None:
        return vecs, None
    imgs = []
    for o in observations:
        img = o.image.astype(np.float32) / 255.0
        if task == "irrigation" and o.initial_image is not None:
            init = o.initial_image.astype(np.float32) / 255.0
            img = np.concatenate([img, init], axis=2)
        imgs.append(np.transpose(img, (2, 0, 1)))
    return vecs, torch.as_tensor(np.stack(imgs), device=device)
