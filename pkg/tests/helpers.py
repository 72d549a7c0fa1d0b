"""Random small trajectories and nets for Q-network tests."""

import numpy as np

from pitchrl.actions import OFF_BALL_MASK, ON_BALL_MASK
from pitchrl.ingest import Trajectory


def random_trajectory(rng, state_dim, length, episode=0, player_id=1, team="home",
                      on_ball_rate=0.3):
    on_ball = rng.random(length) < on_ball_rate
    masks = np.array([ON_BALL_MASK if o else OFF_BALL_MASK for o in on_ball])
    actions = np.array([rng.choice(np.flatnonzero(m)) for m in masks], dtype=np.int64)
    return Trajectory(episode, team, player_id, np.arange(length, dtype=np.int64),
                      rng.normal(size=(length, state_dim)), actions, rng.normal(size=length), masks)


def random_dataset(rng, state_dim, n_episodes, players=3, length=(3, 8)):
    out = []
    for ep in range(n_episodes):
        T = int(rng.integers(*length))
        rewards = rng.normal(size=T)
        for pid in range(players):
            tr = random_trajectory(rng, state_dim, T, ep, pid + 1)
            tr.rewards = rewards.copy()
            out.append(tr)
    return out


def finite_difference_check(net, batch, cfg, step=1e-5, floor=1e-8):
    """Worst per-coordinate relative error of the analytic gradient.

    The step shrinks to half of |w| for weights closer to zero than ``step``
    so the difference never straddles the L1 kink.
    """
    from pitchrl.rlearn import batch_loss, frozen_targets, loss_and_grad

    targets = frozen_targets(net, batch, cfg)
    _, _, grad = loss_and_grad(net, batch, cfg)
    base = net.params.copy()
    numeric = np.empty_like(grad)
    for i in range(net.size):
        h = step if base[i] == 0.0 else min(step, abs(base[i]) / 2)
        net.params = base.copy()
        net.params[i] += h
        lp = batch_loss(net, batch, cfg, targets)
        net.params[i] = base[i] - h
        lm = batch_loss(net, batch, cfg, targets)
        numeric[i] = (lp - lm) / (2 * h)
    net.params = base
    rel = np.abs(grad - numeric) / np.maximum(np.maximum(np.abs(grad), np.abs(numeric)), floor)
    return float(rel.max()), grad, numeric
