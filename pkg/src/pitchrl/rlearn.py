"""Masked SARSA recurrent Q-network in plain numpy.

Network: ``x -> (x - mean) / std -> ReLU(W0 x + b0) -> GRU(64) -> Wout h + bout``.
The GRU follows the common gate convention::

    r = sigmoid(Wx_r u + bx_r + Wh_r h + bh_r)
    z = sigmoid(Wx_z u + bx_z + Wh_z h + bh_z)
    n = tanh(Wx_n u + bx_n + r * (Wh_n h + bh_n))
    h' = (1 - z) * n + z * h

Flat parameter order (row-major, float64): ``W0 (D, H)``, ``b0 (H,)``,
``Wx (H, 3H)``, ``bx (3H,)``, ``Wh (H, 3H)``, ``bh (3H,)``, ``Wout (H, 16)``,
``bout (16,)``; the three gate blocks of ``Wx``/``Wh`` are ordered r, z, n.
The input mean/std are fixed at construction and are not trained.
"""

from __future__ import annotations

import base64
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .actions import N_ACTIONS, ON_BALL_MASK
from .config import TrainConfig

CHECKPOINT_VERSION = 1
LOSS_COLUMNS = ("epoch", "action_loss", "td_loss", "total_loss")


def param_shapes(state_dim: int, hidden: int = 64, n_actions: int = N_ACTIONS) -> list[tuple[str, tuple]]:
    h3 = 3 * hidden
    return [
        ("W0", (state_dim, hidden)),
        ("b0", (hidden,)),
        ("Wx", (hidden, h3)),
        ("bx", (h3,)),
        ("Wh", (hidden, h3)),
        ("bh", (h3,)),
        ("Wout", (hidden, n_actions)),
        ("bout", (n_actions,)),
    ]


def _sigmoid(a: np.ndarray) -> np.ndarray:
    # overflow-free form
    return 0.5 * np.tanh(0.5 * a) + 0.5


class QNet:
    """Parameters live in one flat vector; named views index into it."""

    def __init__(self, state_dim: int, hidden: int = 64, n_actions: int = N_ACTIONS,
                 params: np.ndarray | None = None, input_mean: np.ndarray | None = None,
                 input_std: np.ndarray | None = None):
        if state_dim < 1 or hidden < 1:
            raise ValueError("state_dim and hidden must be positive")
        self.state_dim, self.hidden, self.n_actions = state_dim, hidden, n_actions
        self.shapes = param_shapes(state_dim, hidden, n_actions)
        self.size = sum(math.prod(s) for _, s in self.shapes)
        if params is None:
            params = np.zeros(self.size)
        params = np.array(params, dtype=np.float64)
        if params.shape != (self.size,):
            raise ValueError(f"expected {self.size} parameters, got {params.shape}")
        self.params = params
        self.input_mean = np.zeros(state_dim) if input_mean is None else np.asarray(input_mean, dtype=np.float64)
        self.input_std = np.ones(state_dim) if input_std is None else np.asarray(input_std, dtype=np.float64)
        if self.input_mean.shape != (state_dim,) or self.input_std.shape != (state_dim,):
            raise ValueError("input normalization must match state_dim")
        if np.any(self.input_std <= 0):
            raise ValueError("input std must be positive")

    @classmethod
    def initialize(cls, state_dim: int, seed: int = 0, hidden: int = 64, **kw) -> "QNet":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every block, drawn in flat order."""
        rng = np.random.default_rng(seed)
        net = cls(state_dim, hidden, **kw)
        fan_in = {"W0": state_dim, "b0": state_dim}
        chunks = []
        for name, shape in net.shapes:
            bound = 1.0 / math.sqrt(fan_in.get(name, hidden))
            chunks.append(rng.uniform(-bound, bound, size=math.prod(shape)))
        net.params = np.concatenate(chunks)
        return net

    def views(self, vec: np.ndarray | None = None) -> dict[str, np.ndarray]:
        vec = self.params if vec is None else vec
        out, k = {}, 0
        for name, shape in self.shapes:
            n = math.prod(shape)
            out[name] = vec[k:k + n].reshape(shape)
            k += n
        return out

    def copy(self) -> "QNet":
        return QNet(self.state_dim, self.hidden, self.n_actions, self.params.copy(),
                    self.input_mean.copy(), self.input_std.copy())

    def set_normalization(self, states: np.ndarray) -> None:
        states = np.asarray(states, dtype=np.float64)
        self.input_mean = states.mean(axis=0)
        std = states.std(axis=0)
        self.input_std = np.where(std > 1e-12, std, 1.0)


@dataclass
class ForwardCache:
    x: np.ndarray
    pre: np.ndarray
    u: np.ndarray
    gh: np.ndarray
    r: np.ndarray
    z: np.ndarray
    n: np.ndarray
    h: np.ndarray  # (B, T + 1, H), h[:, 0] is the zero start state
    q: np.ndarray


def forward(net: QNet, states: np.ndarray, cache: bool = False):
    """Q-values for ``(T, D)`` or ``(B, T, D)`` state sequences, hidden starting at zero."""
    states = np.asarray(states, dtype=np.float64)
    single = states.ndim == 2
    if single:
        states = states[None]
    if states.ndim != 3 or states.shape[2] != net.state_dim:
        raise ValueError(f"state shape {states.shape} does not match state_dim {net.state_dim}")
    p = net.views()
    H = net.hidden
    B, T, _ = states.shape
    x = (states - net.input_mean) / net.input_std
    pre = x @ p["W0"] + p["b0"]
    u = np.maximum(pre, 0.0)
    gx = u @ p["Wx"] + p["bx"]
    # hidden-side r/z biases fold into the input side; the n-gate bias sits inside r * (.)
    gx[..., :2 * H] += p["bh"][:2 * H]
    bh_n = p["bh"][2 * H:]
    h = np.zeros((B, T + 1, H))
    gh_all = np.empty((B, T, 3 * H))
    rz_all = np.empty((B, T, 2 * H))
    n_all = np.empty((B, T, H))
    Wh = p["Wh"]
    for t in range(T):
        hp = h[:, t]
        gh = gh_all[:, t]
        np.matmul(hp, Wh, out=gh)
        gh[:, 2 * H:] += bh_n
        rz = rz_all[:, t]
        np.add(gx[:, t, :2 * H], gh[:, :2 * H], out=rz)
        rz *= 0.5
        np.tanh(rz, out=rz)
        rz *= 0.5
        rz += 0.5
        n = n_all[:, t]
        np.multiply(rz[:, :H], gh[:, 2 * H:], out=n)
        n += gx[:, t, 2 * H:]
        np.tanh(n, out=n)
        # h = n + z * (h_prev - n)
        ht = h[:, t + 1]
        np.subtract(hp, n, out=ht)
        ht *= rz[:, H:]
        ht += n
    r_all, z_all = rz_all[..., :H], rz_all[..., H:]
    q = h[:, 1:] @ p["Wout"] + p["bout"]
    out_q = q[0] if single else q
    if not cache:
        return out_q
    return out_q, ForwardCache(x, pre, u, gh_all, r_all, z_all, n_all, h, q)


def apply_mask(q: np.ndarray, valid: np.ndarray | bool, mask_value: float = -9999.0) -> np.ndarray:
    """Replace invalid entries by ``mask_value``.

    ``valid`` is either a boolean validity array broadcastable to ``q`` or a
    single ``is_on_ball`` flag.
    """
    if isinstance(valid, (bool, np.bool_)):
        valid = ON_BALL_MASK if valid else ~ON_BALL_MASK
    return np.where(valid, q, mask_value)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    s = logits - m
    return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))


def chosen_q(q: np.ndarray, actions: np.ndarray) -> np.ndarray:
    return np.take_along_axis(q, np.asarray(actions)[..., None], axis=-1)[..., 0]


def td_targets(q_taken: np.ndarray, rewards: np.ndarray, gamma: float = 1.0,
               lengths: np.ndarray | None = None) -> np.ndarray:
    """``r_t + gamma * Q(s_{t+1}, a_{t+1})`` with a zero bootstrap at the last step."""
    q_taken = np.asarray(q_taken, dtype=np.float64)
    rewards = np.asarray(rewards, dtype=np.float64)
    if q_taken.shape != rewards.shape:
        raise ValueError("Q and reward sequences differ in length")
    nxt = np.zeros_like(q_taken)
    nxt[..., :-1] = q_taken[..., 1:]
    if lengths is not None:
        rows = np.arange(len(lengths))
        nxt[rows, np.asarray(lengths) - 1] = 0.0
    return rewards + gamma * nxt


def td_loss(q_taken: np.ndarray, rewards: np.ndarray, gamma: float = 1.0,
            targets: np.ndarray | None = None) -> float:
    """Sum of squared SARSA residuals; ``targets`` overrides the bootstrapped target."""
    q_taken = np.asarray(q_taken, dtype=np.float64)
    if targets is None:
        targets = td_targets(q_taken, rewards, gamma)
    if np.shape(targets) != q_taken.shape:
        raise ValueError("Q and target sequences differ in length")
    return float(np.sum((targets - q_taken) ** 2))


def _check_labels(actions: np.ndarray, valid: np.ndarray | None) -> None:
    if valid is None:
        return
    ok = np.take_along_axis(valid, np.asarray(actions)[..., None], axis=-1)[..., 0]
    if not np.all(ok):
        bad = np.argwhere(~ok)[0]
        raise ValueError(f"action label invalid under mask at step {tuple(int(i) for i in bad)}")


def action_loss(q: np.ndarray, actions: np.ndarray, valid: np.ndarray | None = None,
                mask_value: float = -9999.0) -> float:
    """Cross-entropy of the labels under softmax(Q); masked when ``valid`` is given."""
    q = np.asarray(q, dtype=np.float64)
    _check_labels(actions, valid)
    logits = q if valid is None else apply_mask(q, valid, mask_value)
    return float(-chosen_q(log_softmax(logits), actions).sum())


def l1_norm(params: np.ndarray) -> float:
    return float(np.abs(params).sum())


def total_loss(td: float, action: float, l1: float, l1_weight: float = 0.001,
               action_weight: float = 0.05) -> float:
    return td + l1_weight * l1 + action_weight * action


@dataclass
class Batch:
    states: np.ndarray  # (B, T, D)
    actions: np.ndarray  # (B, T)
    rewards: np.ndarray  # (B, T)
    masks: np.ndarray  # (B, T, 16)
    lengths: np.ndarray  # (B,)

    @property
    def step_valid(self) -> np.ndarray:
        return np.arange(self.actions.shape[1])[None, :] < self.lengths[:, None]

    @classmethod
    def from_trajectories(cls, trajectories: Sequence) -> "Batch":
        if not trajectories:
            raise ValueError("empty batch")
        lengths = np.array([len(t) for t in trajectories])
        B, T = len(trajectories), int(lengths.max())
        D = np.asarray(trajectories[0].states).shape[1]
        states = np.zeros((B, T, D))
        actions = np.full((B, T), N_ACTIONS - 1, dtype=np.int64)
        rewards = np.zeros((B, T))
        masks = np.ones((B, T, N_ACTIONS), dtype=bool)
        for b, tr in enumerate(trajectories):
            n = lengths[b]
            states[b, :n] = tr.states
            actions[b, :n] = tr.actions
            rewards[b, :n] = tr.rewards
            masks[b, :n] = tr.masks
        return cls(states, actions, rewards, masks, lengths)


@dataclass
class LossParts:
    td: float  # summed over valid steps
    action: float
    l1: float
    steps: int


def _loss_and_dq(net: QNet, batch: Batch, q: np.ndarray, cfg: TrainConfig,
                 targets: np.ndarray | None = None) -> tuple[LossParts, np.ndarray]:
    valid_steps = batch.step_valid
    valid = batch.masks if cfg.mask else None
    _check_labels(batch.actions, valid)
    qa = chosen_q(q, batch.actions)
    if targets is None:
        targets = td_targets(qa, batch.rewards, cfg.gamma, batch.lengths)
    resid = np.where(valid_steps, targets - qa, 0.0)
    logits = q if valid is None else apply_mask(q, valid, cfg.mask_value)
    logp = log_softmax(logits)
    ce = np.where(valid_steps, -chosen_q(logp, batch.actions), 0.0)

    dq = np.exp(logp)
    onehot = np.zeros_like(q)
    np.put_along_axis(onehot, batch.actions[..., None], 1.0, axis=-1)
    dq -= onehot
    if valid is not None:
        dq *= valid
    dq *= cfg.action_weight * valid_steps[..., None]
    np.put_along_axis(dq, batch.actions[..., None],
                      chosen_q(dq, batch.actions)[..., None] - 2.0 * resid[..., None], axis=-1)
    parts = LossParts(float(np.sum(resid ** 2)), float(ce.sum()), l1_norm(net.params),
                      int(valid_steps.sum()))
    return parts, dq


def _outer_sum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sum over batch and time of ``a[b, t]^T b[b, t]``."""
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def _backward(net: QNet, c: ForwardCache, dq: np.ndarray, l1_weight: float) -> np.ndarray:
    p = net.views()
    grad = np.zeros(net.size)
    g = net.views(grad)
    H = net.hidden
    B, T, _ = dq.shape
    hs = c.h[:, 1:]
    g["Wout"][...] = _outer_sum(hs, dq)
    g["bout"][...] = dq.sum(axis=(0, 1))
    dH = dq @ p["Wout"].T
    dgx = np.empty((B, T, 3 * H))
    dgh = np.empty((B, T, 3 * H))
    carry = np.zeros((B, H))
    Wh_T = p["Wh"].T
    one_minus_n2 = 1.0 - c.n * c.n
    dzr = c.z * (1.0 - c.z)
    drr = c.r * (1.0 - c.r)
    hp_n = c.h[:, :-1] - c.n
    gh_n = c.gh[..., 2 * H:]
    dh = np.empty((B, H))
    for t in range(T - 1, -1, -1):
        np.add(dH[:, t], carry, out=dh)
        gx_t, gh_t = dgx[:, t], dgh[:, t]
        dan = gx_t[:, 2 * H:]
        np.multiply(dh, 1.0 - c.z[:, t], out=dan)
        dan *= one_minus_n2[:, t]
        dar = gx_t[:, :H]
        np.multiply(dan, gh_n[:, t], out=dar)
        dar *= drr[:, t]
        daz = gx_t[:, H:2 * H]
        np.multiply(dh, hp_n[:, t], out=daz)
        daz *= dzr[:, t]
        gh_t[:, :2 * H] = gx_t[:, :2 * H]
        np.multiply(dan, c.r[:, t], out=gh_t[:, 2 * H:])
        carry = dh * c.z[:, t]
        carry += gh_t @ Wh_T
    g["Wh"][...] = _outer_sum(c.h[:, :-1], dgh)
    g["bh"][...] = dgh.sum(axis=(0, 1))
    g["Wx"][...] = _outer_sum(c.u, dgx)
    g["bx"][...] = dgx.sum(axis=(0, 1))
    dpre = (dgx @ p["Wx"].T) * (c.pre > 0)
    g["W0"][...] = _outer_sum(c.x, dpre)
    g["b0"][...] = dpre.sum(axis=(0, 1))
    grad += l1_weight * np.sign(net.params)
    return grad


def loss_and_grad(net: QNet, batch: Batch, cfg: TrainConfig,
                  targets: np.ndarray | None = None) -> tuple[float, LossParts, np.ndarray]:
    """Total loss (sums over steps and trajectories) and its gradient, TD target held fixed."""
    q, cache = forward(net, batch.states, cache=True)
    parts, dq = _loss_and_dq(net, batch, q, cfg, targets)
    grad = _backward(net, cache, dq, cfg.l1_weight)
    return total_loss(parts.td, parts.action, parts.l1, cfg.l1_weight, cfg.action_weight), parts, grad


def batch_loss(net: QNet, batch: Batch, cfg: TrainConfig, targets: np.ndarray | None = None) -> float:
    """Total loss only; with ``targets`` given it is the fixed-target objective."""
    q = forward(net, batch.states)
    parts, _ = _loss_and_dq(net, batch, q, cfg, targets)
    return total_loss(parts.td, parts.action, parts.l1, cfg.l1_weight, cfg.action_weight)


def frozen_targets(net: QNet, batch: Batch, cfg: TrainConfig) -> np.ndarray:
    q = forward(net, batch.states)
    return td_targets(chosen_q(q, batch.actions), batch.rewards, cfg.gamma, batch.lengths)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0, beta1, beta2, eps)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState,
              lr: float = 0.001) -> tuple[np.ndarray, AdamState]:
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ValueError("parameter, gradient and moment shapes differ")
    bad = np.flatnonzero(~np.isfinite(grads))
    if bad.size:
        raise FloatingPointError(f"non-finite gradient at parameter index {int(bad[0])}")
    t = state.step + 1
    m = state.m * state.beta1
    m += (1.0 - state.beta1) * grads
    v = state.v * state.beta2
    v += (1.0 - state.beta2) * (grads * grads)
    denom = np.sqrt(v / (1.0 - state.beta2 ** t))
    denom += state.eps
    new = params - (lr / (1.0 - state.beta1 ** t)) * m / denom
    return new, AdamState(m, v, t, state.beta1, state.beta2, state.eps)


def group_episodes(trajectories: Iterable) -> list[list]:
    """Trajectories grouped by episode, in first-seen order."""
    groups: dict = {}
    for tr in trajectories:
        groups.setdefault(tr.episode, []).append(tr)
    return list(groups.values())


@dataclass
class Metrics:
    action_loss: float  # per-step mean
    td_loss: float  # per-step mean
    total_loss: float
    steps: int


def evaluate(net: QNet, trajectories: Sequence, cfg: TrainConfig | None = None,
             mask: bool | None = None) -> Metrics:
    """Dataset-mean per-step losses; ``total_loss`` adds the weighted L1 and action terms."""
    cfg = cfg or TrainConfig()
    if mask is not None and mask != cfg.mask:
        cfg = _with(cfg, mask=mask)
    episodes = group_episodes(trajectories)
    if not episodes:
        raise ValueError("cannot evaluate on an empty dataset")
    td = act = 0.0
    steps = 0
    for ep in episodes:
        batch = Batch.from_trajectories(ep)
        q = forward(net, batch.states)
        parts, _ = _loss_and_dq(net, batch, q, cfg)
        td += parts.td
        act += parts.action
        steps += parts.steps
    td_mean, act_mean = td / steps, act / steps
    total = td_mean + cfg.l1_weight * l1_norm(net.params) + cfg.action_weight * act_mean
    return Metrics(act_mean, td_mean, total, steps)


def _with(cfg: TrainConfig, **changes) -> TrainConfig:
    from dataclasses import replace
    return replace(cfg, **changes)


@dataclass
class TrainResult:
    net: QNet
    log: list[tuple[int, float, float, float]] = field(default_factory=list)
    adam: AdamState | None = None


def train(trajectories: Sequence, cfg: TrainConfig | None = None, net: QNet | None = None,
          group: str = "trajectory") -> TrainResult:
    """Adam training with seeded shuffling of the update units.

    ``group="trajectory"`` takes one step per player trajectory;
    ``group="episode"`` takes one step per episode with the gradient summed
    over its player trajectories.

    Row 0 of the log holds the losses of the initial network; row ``e`` the
    losses after epoch ``e``.
    """
    cfg = cfg or TrainConfig()
    episodes = group_episodes(trajectories)
    if not episodes:
        raise ValueError("cannot train on an empty dataset")
    if net is None:
        dim = np.asarray(episodes[0][0].states).shape[1]
        net = QNet.initialize(dim, seed=cfg.seed, hidden=cfg.hidden_size)
        net.set_normalization(np.concatenate([np.asarray(t.states) for ep in episodes for t in ep]))
    if group == "trajectory":
        batches = [Batch.from_trajectories([tr]) for ep in episodes for tr in ep]
    elif group == "episode":
        batches = [Batch.from_trajectories(ep) for ep in episodes]
    else:
        raise ValueError(f"unknown update grouping {group!r}")
    rng = np.random.default_rng(cfg.seed)
    adam = AdamState.zeros(net.size, cfg.beta1, cfg.beta2, cfg.eps)
    result = TrainResult(net, adam=adam)

    def log(epoch: int) -> None:
        m = evaluate(net, trajectories, cfg)
        result.log.append((epoch, m.action_loss, m.td_loss, m.total_loss))

    log(0)
    for epoch in range(1, cfg.epochs + 1):
        for i in rng.permutation(len(batches)):
            _, _, grad = loss_and_grad(net, batches[i], cfg)
            net.params, adam = adam_step(net.params, grad, adam, cfg.learning_rate)
        log(epoch)
    result.adam = adam
    return result


def write_loss_csv(path: str | Path, log: Sequence[tuple]) -> None:
    from .ingest import _atomic_write_rows
    _atomic_write_rows(path, LOSS_COLUMNS, [(e, repr(a), repr(t), repr(tot)) for e, a, t, tot in log])


def read_loss_csv(path: str | Path) -> list[tuple[int, float, float, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != LOSS_COLUMNS:
            raise ValueError(f"{path}: expected columns {','.join(LOSS_COLUMNS)}")
        return [(int(r["epoch"]), float(r["action_loss"]), float(r["td_loss"]), float(r["total_loss"]))
                for r in reader]


def _b64(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")


def _unb64(s: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(s), dtype="<f8").astype(np.float64)


@dataclass
class Checkpoint:
    net: QNet
    state_kind: str
    mask: bool
    scaling: dict | None = None
    config: dict | None = None
    feature_names: list[str] | None = None


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    net = ckpt.net
    doc = {
        "layout_version": CHECKPOINT_VERSION,
        "state_kind": ckpt.state_kind,
        "mask": ckpt.mask,
        "state_dim": net.state_dim,
        "hidden": net.hidden,
        "n_actions": net.n_actions,
        "param_order": [[name, list(shape)] for name, shape in net.shapes],
        "scaling": ckpt.scaling,
        "config": ckpt.config,
        "feature_names": ckpt.feature_names,
        "input_mean": _b64(net.input_mean),
        "input_std": _b64(net.input_std),
        "params": _b64(net.params),
    }
    from .ingest import _atomic_write_text
    _atomic_write_text(path, [json.dumps(doc)])


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("layout_version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('layout_version')!r}")
    net = QNet(int(doc["state_dim"]), int(doc["hidden"]), int(doc["n_actions"]),
               _unb64(doc["params"]), _unb64(doc["input_mean"]), _unb64(doc["input_std"]))
    return Checkpoint(net, doc["state_kind"], bool(doc["mask"]), doc.get("scaling"),
                      doc.get("config"), doc.get("feature_names"))
