#!/usr/bin/env python3
"""Tests for the CQL losses, gradient routing between optimizers and trainer determinism"""

import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from pixelnav.core.actions import unit_vector
from pixelnav.core.exceptions import EmptyBatch, InvalidConfig
from pixelnav.core.trajectory import Keyframe, PixelPoint, Trajectory
from pixelnav.data.dataset import DatasetConfig, build_episodes
from pixelnav.engine.tensor import Tensor, no_grad
from pixelnav.models.encoders import EncoderConfig
from pixelnav.models.networks import PixelNavModel
from pixelnav.training.losses import (
    LossReport,
    TrainConfig,
    bc_loss,
    bellman_target,
    critic_loss,
    magnitude_loss,
    policy_loss,
    soft_state_value,
)
from pixelnav.training.trainer import CQLTrainer
from test_engine import check_gradients

LN9 = math.log(9)
TINY = EncoderConfig(crop_size=16, channels=(4, 8, 8), model_dim=16, heads=2, layers=1,
                     freq_pairs=4, coord_dim=8, state_dim=16, hidden_dim=16)


def tiny_episodes():
    res = (1264, 902)
    trajectories = []
    for n, (dx, dy) in enumerate([(40, 0), (0, 35), (30, -30)]):
        keyframes = [Keyframe(10 * i, PixelPoint.from_pixels(400 + dx * i, 450 + dy * i + 3 * i * (n - 1), res))
                     for i in range(9)]
        trajectories.append(Trajectory.from_keyframes(f"t{n}", keyframes, res, f"s{n}"))
    rng = np.random.default_rng(0)
    tiles = {t.id: rng.integers(0, 256, size=(len(t.dense), 16, 16, 3), dtype=np.uint8) for t in trajectories}
    return build_episodes(trajectories, tiles, DatasetConfig(t_obs=6, t_pred=3, frame_stride=5, crop_size=16))


def critic_oracle(q, actions, targets, alpha):
    taken = q[np.arange(len(actions)), actions]
    peak = q.max(axis=1)
    lse = peak + np.log(np.exp(q - peak[:, None]).sum(axis=1))
    return np.mean((taken - targets) ** 2) + alpha * np.mean(lse - taken)


def softmax_rows(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def conservative_gap(model, batch):
    """Mean over both heads of logsumexp_a Q(s, a) - Q(s, a_exp)"""
    with no_grad():
        q1, q2 = model.critics(batch.states.detach())
    gaps = []
    for q in (q1.data, q2.data):
        peak = q.max(axis=1)
        lse = peak + np.log(np.exp(q - peak[:, None]).sum(axis=1))
        gaps.append(np.mean(lse - q[np.arange(batch.size), batch.actions]))
    return float(np.mean(gaps))


def test_loss_constants():
    zeros = Tensor(np.zeros((4, 9)))
    actions = np.array([0, 3, 8, 2])
    total, parts = critic_loss(zeros, zeros, actions, np.zeros(4), alpha_cql=0.01)
    assert abs(parts['cql_penalty'] - 0.01 * LN9) < 1e-12
    assert parts['bellman'] == 0.0
    assert abs(total.item() - 2 * 0.01 * LN9) < 1e-12

    value = soft_state_value(np.zeros((2, 9)), np.zeros((2, 9)), np.zeros((2, 9)), 0.2)
    assert np.allclose(value, 0.2 * LN9)
    assert abs(policy_loss(zeros, zeros, zeros, 0.2).item() + 0.2 * LN9) < 1e-12
    assert abs(bc_loss(zeros, actions).item() - LN9) < 1e-12


def test_critic_loss_matches_oracle():
    rng = np.random.default_rng(1)
    q1, q2 = rng.normal(size=(6, 9)), rng.normal(size=(6, 9))
    actions = rng.integers(0, 9, size=6)
    targets = rng.normal(size=6)
    total, parts = critic_loss(Tensor(q1), Tensor(q2), actions, targets, 0.5)
    expected1 = critic_oracle(q1, actions, targets, 0.5)
    expected2 = critic_oracle(q2, actions, targets, 0.5)
    assert abs(parts['critic1'] - expected1) < 1e-12 and abs(parts['critic2'] - expected2) < 1e-12
    assert abs(total.item() - expected1 - expected2) < 1e-12

    try:
        critic_loss(Tensor(np.zeros((0, 9))), Tensor(np.zeros((0, 9))), np.zeros(0, dtype=int), np.zeros(0), 0.1)
        assert False, "expected EmptyBatch"
    except EmptyBatch:
        pass


def test_soft_value_and_bellman_target():
    rng = np.random.default_rng(2)
    q1, q2, logits = rng.normal(size=(3, 9)), rng.normal(size=(3, 9)), rng.normal(size=(3, 9))
    pi = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    expected = np.sum(pi * (np.minimum(q1, q2) - 0.2 * np.log(pi)), axis=1)
    assert np.allclose(soft_state_value(q1, q2, logits, 0.2), expected, atol=1e-12)

    targets = bellman_target(np.array([1.0, 0.5]), np.array([False, True]), np.array([2.0, 100.0]), 0.95)
    assert np.allclose(targets, [1.0 + 0.95 * 2.0, 0.5])


def test_policy_loss_prefers_high_q():
    q = Tensor(np.tile(np.arange(9, dtype=float), (2, 1)))
    logits = Tensor(np.zeros((2, 9)), requires_grad=True)
    policy_loss(logits, q, q, 0.2).backward()
    # descending the loss raises the logit of the best action
    assert np.argmin(logits.grad[0]) == 8


def test_actor_losses_match_scalar_oracles():
    rng = np.random.default_rng(11)
    for _ in range(5):
        n = int(rng.integers(1, 8))
        logits, q1, q2 = (rng.normal(size=(n, 9)) for _ in range(3))
        actions = rng.integers(0, 9, size=n)
        magnitude = rng.uniform(0.0, 0.05, size=n)
        lengths = rng.uniform(0.0, 0.05, size=n)
        pi = softmax_rows(logits)

        policy = bc = mag = 0.0
        for i in range(n):
            for a in range(9):
                policy += pi[i, a] * (0.2 * math.log(pi[i, a]) - min(q1[i, a], q2[i, a]))
            bc -= math.log(pi[i, actions[i]])
            ex = sum(pi[i, a] * unit_vector(a + 1)[0] for a in range(9))
            ey = sum(pi[i, a] * unit_vector(a + 1)[1] for a in range(9))
            mag += (magnitude[i] * math.hypot(ex, ey) - lengths[i]) ** 2

        assert abs(policy_loss(Tensor(logits), Tensor(q1), Tensor(q2), 0.2).item() - policy / n) < 1e-9
        assert abs(bc_loss(Tensor(logits), actions).item() - bc / n) < 1e-9
        assert abs(magnitude_loss(Tensor(magnitude), Tensor(pi), lengths, 1.5).item() - 1.5 * mag / n) < 1e-9


def test_composite_loss_gradients():
    rng = np.random.default_rng(12)
    for trial in range(3):
        n = trial + 2
        actions = rng.integers(0, 9, size=n)
        targets = rng.normal(size=n)
        lengths = rng.uniform(0.0, 0.05, size=n)
        probs = Tensor(softmax_rows(rng.normal(size=(n, 9))))

        check_gradients(lambda q1, q2: critic_loss(q1, q2, actions, targets, 0.5)[0],
                        rng.normal(size=(n, 9)), rng.normal(size=(n, 9)), seed=trial)
        check_gradients(lambda logits, q1, q2: policy_loss(logits, q1, q2, 0.2) + bc_loss(logits, actions),
                        rng.normal(size=(n, 9)), rng.normal(size=(n, 9)), rng.normal(size=(n, 9)), seed=trial)
        check_gradients(lambda m: magnitude_loss(m, probs, lengths, 2.0),
                        rng.uniform(0.0, 0.05, size=n), seed=trial)


def test_magnitude_loss_routing():
    probs = Tensor(np.eye(9)[[2, 2]], requires_grad=True)
    magnitude = Tensor(np.array([0.03, 0.05]), requires_grad=True)
    loss = magnitude_loss(magnitude, probs, np.array([0.05, 0.05]), lambda_mag=2.0)
    assert abs(loss.item() - 2.0 * 0.5 * (0.02 ** 2)) < 1e-15
    loss.backward()
    assert probs.grad is None
    assert magnitude.grad is not None and magnitude.grad[0] < 0 and magnitude.grad[1] == 0

    # idle direction has no length to scale
    idle = Tensor(np.eye(9)[[8]])
    assert abs(magnitude_loss(Tensor(np.array([0.05])), idle, np.array([0.01]), 1.0).item() - 1e-4) < 1e-15


def test_train_config_validation():
    for kwargs in ({'gamma': 1.0}, {'alpha_cql': 0.0}, {'epochs': 0}, {'lr_actor': -1e-3}):
        try:
            TrainConfig(**kwargs)
            assert False, f"expected InvalidConfig for {kwargs}"
        except InvalidConfig:
            pass


def test_gradient_routing():
    episodes = tiny_episodes()
    model = PixelNavModel(TINY, seed=3)
    trainer = CQLTrainer(model, TrainConfig(epochs=2, batch_size=4), seed=3)
    batch = trainer.prepare(episodes)
    assert batch.size == 9 and batch.states.shape == (9, TINY.state_dim)

    trainer.zero_grad()
    trainer.critic_backward(batch)
    assert all(p.grad is not None for p in model.critic_parameters())
    assert all(p.grad is None for p in model.encoder_parameters())
    assert all(p.grad is None for p in model.actor_parameters() + model.magnitude_parameters())

    trainer.zero_grad()
    trainer.actor_backward(batch)
    assert all(p.grad is not None for p in model.actor_parameters())
    assert all(p.grad is not None for p in model.magnitude_parameters())
    encoder = model.observation_encoder
    groups = {
        'cnn': [p for conv in encoder.convs for p in conv.parameters()],
        'attention': [p for layer in encoder.layers for p in layer.attention.parameters()],
        'state': model.state_encoder.parameters(),
    }
    for name, params in groups.items():
        assert params, name
        assert any(p.grad is not None and np.any(p.grad) for p in params), name
    assert all(t.grad is None for t in model.critics.target_tensors())


def test_critic_updates_shrink_the_conservative_gap():
    model = PixelNavModel(TINY, seed=9)
    trainer = CQLTrainer(model, TrainConfig(alpha_cql=1.0), seed=9)
    batch = trainer.prepare(tiny_episodes())
    gaps = [conservative_gap(model, batch)]
    for _ in range(10):
        trainer.zero_grad()
        trainer.critic_backward(batch)
        trainer.optimizers['critic'].step()
        gaps.append(conservative_gap(model, batch))
    assert all(later <= earlier + 1e-12 for earlier, later in zip(gaps, gaps[1:])), gaps
    assert gaps[-1] < gaps[0]


def test_update_steps_every_group():
    episodes = tiny_episodes()
    model = PixelNavModel(TINY, seed=4)
    trainer = CQLTrainer(model, TrainConfig(epochs=2, batch_size=4, tau_soft=0.5), seed=4)
    groups = {
        'encoder': model.encoder_parameters(),
        'actor': model.actor_parameters(),
        'critic': model.critic_parameters(),
        'magnitude': model.magnitude_parameters(),
        'target': model.critics.target_tensors(),
    }
    before = {name: [p.data.copy() for p in params] for name, params in groups.items()}
    report = trainer.update(episodes)
    for name, params in groups.items():
        assert any(not np.array_equal(b, p.data) for b, p in zip(before[name], params)), name
    assert all(p.grad is None for p in model.parameters())
    assert all(np.isfinite(v) for v in report.as_dict().values())


def test_transition_subsampling():
    episodes = tiny_episodes()
    trainer = CQLTrainer(PixelNavModel(TINY, seed=5), TrainConfig(max_transitions_per_update=4), seed=5)
    batch = trainer.prepare(episodes)
    # the critic keeps every transition; only the actor path is capped
    assert batch.size == 9 and len(batch.targets) == 9
    assert batch.actor_size == 4 and len(set(batch.actor_rows)) == 4
    assert np.all(np.diff(batch.actor_rows) > 0) and batch.actor_rows[-1] < 9

    trainer.zero_grad()
    parts = trainer.critic_backward(batch)
    q1, _ = trainer.model.critics(batch.states.detach())
    assert q1.shape == (9, 9) and np.isfinite(parts['critic_total'])
    trainer.zero_grad()
    assert np.isfinite(trainer.actor_backward(batch)['actor_total'])
    assert all(p.grad is not None for p in trainer.model.actor_parameters())

    uncapped = CQLTrainer(PixelNavModel(TINY, seed=5), TrainConfig(), seed=5).prepare(episodes)
    assert uncapped.actor_size == uncapped.size == 9


def test_fit_is_deterministic_and_learns():
    episodes = tiny_episodes()
    cfg = TrainConfig(epochs=30, batch_size=4, lr_actor=3e-3, lr_encoder=1e-3, lr_critic=1e-3, lr_mag=1e-3)

    def run():
        model = PixelNavModel(TINY, seed=6)
        trainer = CQLTrainer(model, cfg, seed=6)
        rows = []
        logs = trainer.fit(episodes, boundaries=(8, 12, 16), on_epoch=lambda log: rows.append(log.as_row()))
        return model, logs, rows

    model_a, logs_a, rows_a = run()
    model_b, logs_b, _ = run()
    assert [log.report for log in logs_a] == [log.report for log in logs_b]
    for (name, p), (_, q) in zip(model_a.named_tensors(), model_b.named_tensors()):
        assert np.array_equal(p.data, q.data), name

    assert model_a.epochs_trained == 30 and len(rows_a) == 30
    assert abs(rows_a[0]['lr_actor'] - 3e-3) < 1e-15 and rows_a[-1]['lr_actor'] < rows_a[0]['lr_actor']
    assert logs_a[-1].report.bc < logs_a[0].report.bc
    assert all(math.isfinite(r['critic1']) and math.isfinite(r['wall_time']) for r in rows_a)


def test_trainer_checkpoint_resume(tmp_path=None):
    import tempfile
    directory = Path(tmp_path or tempfile.mkdtemp())
    episodes = tiny_episodes()
    cfg = TrainConfig(epochs=3, batch_size=4)
    trainer = CQLTrainer(PixelNavModel(TINY, seed=8), cfg, seed=8)
    trainer.fit(episodes, epochs=2)
    path = trainer.save(directory / "model_seed8.npz", {'config_hash': 'h'})

    model, rest, metadata = PixelNavModel.load(path)
    assert model.epochs_trained == 2 and metadata['train_seed'] == 8
    resumed = CQLTrainer(model, cfg, seed=8)
    resumed.load_optimizer_arrays(rest)
    for name, opt in resumed.optimizers.items():
        original = trainer.optimizers[name]
        assert opt.state.step == original.state.step > 0
        assert all(np.array_equal(a, b) for a, b in zip(opt.state.m, original.state.m))


def test_loss_report_mean():
    reports = [LossReport(critic1=1.0, bc=2.0), LossReport(critic1=3.0, bc=4.0)]
    mean = LossReport.mean(reports)
    assert mean.critic1 == 2.0 and mean.bc == 3.0 and mean.policy == 0.0
    try:
        LossReport.mean([])
        assert False, "expected EmptyBatch"
    except EmptyBatch:
        pass


if __name__ == "__main__":
    from test_platform import run_module
    sys.exit(run_module(sys.modules[__name__]))
