"""Gradient updates: PPO clipped surrogate, behavior-cloning auxiliary loss,
and the GAIL discriminator with its auxiliary reward."""

from __future__ import annotations

import copy

import numpy as np
import torch
import torch.nn.functional as F

from .nets import ActionDist, Discriminator, PolicyNet


class UpdateDiverged(RuntimeError):
    """Non-finite loss; parameters were restored to the pre-update snapshot."""


def _forward_dist(net: PolicyNet, obs_vec, images=None):
    mean, log_std, logit, value = net(obs_vec, images)
    return ActionDist(mean, log_std, logit), value


def clipped_objective(ratio: torch.Tensor, adv: torch.Tensor,
                      clip_eps: float) -> torch.Tensor:
    """Per-sample clipped PPO surrogate (to be maximized)."""
    return torch.min(ratio * adv,
                     torch.clamp(ratio, 1 - clip_eps, 1 + clip_eps) * adv)


def ppo_update(net: PolicyNet, optimizer, buffer, cfg, clip_eps: float,
               rng: np.random.Generator, device="cpu") -> dict:
    """Clipped-surrogate PPO over shuffled minibatches; returns mean stats.

    Advantages are normalized over the whole update batch. On a non-finite
    loss the parameters roll back to the pre-update snapshot.
    """
    snapshot = copy.deepcopy(net.state_dict())
    obs = torch.as_tensor(buffer.flat(buffer.obs), device=device)
    images = (
        torch.as_tensor(buffer.flat(buffer.images), device=device)
        if buffer.images is not None else None
    )
    actions = torch.as_tensor(buffer.flat(buffer.actions), device=device)
    old_logp = torch.as_tensor(buffer.flat(buffer.log_probs), device=device)
    returns = torch.as_tensor(buffer.flat(buffer.returns), device=device)
    adv = buffer.flat(buffer.advantages)
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    adv = torch.as_tensor(adv, device=device)

    stats = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0,
             "clip_fraction": 0.0, "approx_kl": 0.0}
    batches = 0
    for _ in range(cfg.epochs_per_update):
        for sel in buffer.minibatch_indices(cfg.batch_size, rng):
            idx = torch.as_tensor(sel, device=device)
            dist, values = _forward_dist(
                net, obs[idx], None if images is None else images[idx]
            )
            logp = dist.log_prob(actions[idx])
            ratio = torch.exp(logp - old_logp[idx])
            a = adv[idx]
            surr = clipped_objective(ratio, a, clip_eps)
            policy_loss = -surr.mean()
            value_loss = F.mse_loss(values, returns[idx])
            entropy = dist.entropy().mean()
            loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_beta * entropy
            if not torch.isfinite(loss):
                net.load_state_dict(snapshot)
                raise UpdateDiverged(f"non-finite PPO loss at batch {batches}")
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(net.parameters(), cfg.max_grad_norm)
            optimizer.step()
            with torch.no_grad():
                stats["policy_loss"] += float(policy_loss)
                stats["value_loss"] += float(value_loss)
                stats["entropy"] += float(entropy)
                stats["clip_fraction"] += float(
                    ((ratio - 1.0).abs() > clip_eps).float().mean()
                )
                stats["approx_kl"] += float((old_logp[idx] - logp).mean())
            batches += 1
    for k in stats:
        stats[k] /= max(batches, 1)
    stats["batches"] = batches
    return stats


def bc_update(net: PolicyNet, optimizer, obs_vec, actions, strength: float,
              images=None, device="cpu") -> float:
    """One supervised step toward demo actions: MSE on the continuous part,
    cross-entropy on the toggle, scaled by the (decayed) BC strength."""
    if strength <= 0.0:
        return 0.0
    obs_vec = torch.as_tensor(obs_vec, dtype=torch.float32, device=device)
    actions = torch.as_tensor(actions, dtype=torch.float32, device=device)
    imgs = None if images is None else torch.as_tensor(images, device=device)
    mean, _, logit, _ = net(obs_vec, imgs)
    cont = actions[:, : mean.shape[1]]
    loss = F.mse_loss(mean, cont)
    if logit is not None:
        loss = loss + F.binary_cross_entropy_with_logits(logit, actions[:, -1])
    scaled = strength * loss
    optimizer.zero_grad()
    scaled.backward()
    optimizer.step()
    return float(loss.detach())


def gail_update(disc: Discriminator, optimizer, expert_obs, agent_obs,
                expert_images=None, agent_images=None, device="cpu") -> dict:
    """Binary-classification ascent of E_expert[log D] + E_agent[log(1-D)]."""
    e_vec = torch.as_tensor(expert_obs, dtype=torch.float32, device=device)
    a_vec = torch.as_tensor(agent_obs, dtype=torch.float32, device=device)
    e_img = None if expert_images is None else torch.as_tensor(expert_images, device=device)
    a_img = None if agent_images is None else torch.as_tensor(agent_images, device=device)
    e_logit = disc.logits(e_vec, e_img)
    a_logit = disc.logits(a_vec, a_img)
    loss = F.binary_cross_entropy_with_logits(e_logit, torch.ones_like(e_logit)) + \
        F.binary_cross_entropy_with_logits(a_logit, torch.zeros_like(a_logit))
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    with torch.no_grad():
        acc = 0.5 * (float((e_logit > 0).float().mean())
                     + float((a_logit <= 0).float().mean()))
    return {"loss": float(loss.detach()), "accuracy": acc}


def gail_reward(disc: Discriminator, obs_vec, strength: float,
                images=None, device="cpu") -> np.ndarray:
    """Auxiliary reward -strength * log(1 - D(s)), computed stably as
    strength * softplus(logit); nonnegative for D in (0, 1)."""
    with torch.no_grad():
        vec = torch.as_tensor(obs_vec, dtype=torch.float32, device=device)
        imgs = None if images is None else torch.as_tensor(images, device=device)
        logit = disc.logits(vec, imgs)
        return (strength * F.softplus(logit)).cpu().numpy()
