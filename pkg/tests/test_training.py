import json
import math

import numpy as np
import pytest

from lexsyn.experiments import gradcheck_fixture, toy_setup
from lexsyn.model import PAIR, TAGGING, build_model
from lexsyn.synth_corpus import PAIR_LABELS
from lexsyn.training import (AdamState, TrainingConfig, TrainingDiverged, adamw_step, clip_by_global_norm,
                             cross_entropy_grad, cross_entropy_loss, grad_check, train)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainingConfig(learning_rate=-1)
    with pytest.raises(ValueError):
        TrainingConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainingConfig(task="regression")
    c = TrainingConfig()
    assert (c.learning_rate, c.batch_size) == (2e-5, 64)


def test_cross_entropy_uniform_is_log_c():
    for C in (2, 3, 7):
        assert cross_entropy_loss(np.zeros(C), 0) == pytest.approx(math.log(C), abs=1e-15)


def test_cross_entropy_margin_monotone():
    losses = [cross_entropy_loss(np.array([m, 0.0, 0.0]), 0) for m in (1, 10, 100)]
    assert losses[0] > losses[1] > losses[2] >= 0
    assert losses[2] < 1e-40


def test_cross_entropy_direct_summation(rng):
    logits = rng.normal(size=(5, 3)) * 4
    labels = rng.integers(0, 3, 5)
    oracle = np.mean([-(l[y] - math.log(sum(math.exp(v) for v in l))) for l, y in zip(logits, labels)])
    assert abs(cross_entropy_loss(logits, labels) - oracle) < 1e-12


def test_cross_entropy_large_logits_finite():
    assert math.isfinite(cross_entropy_loss(np.array([[1000.0, -1000.0, 0.0]]), [1]))


def test_cross_entropy_label_out_of_range():
    with pytest.raises(ValueError):
        cross_entropy_loss(np.zeros((2, 3)), [0, 3])


def test_cross_entropy_grad_finite_differences(rng):
    logits = rng.normal(size=(4, 3))
    labels = rng.integers(0, 3, 4)
    g = cross_entropy_grad(logits, labels)
    h = 1e-6
    for i in range(4):
        for j in range(3):
            lp, lm = logits.copy(), logits.copy()
            lp[i, j] += h
            lm[i, j] -= h
            num = (cross_entropy_loss(lp, labels) - cross_entropy_loss(lm, labels)) / (2 * h)
            assert abs(num - g[i, j]) < 1e-9


def test_adamw_zero_gradient_no_decay():
    p = {"W": np.array([1.5, -2.0])}
    adamw_step(p, {"W": np.zeros(2)}, AdamState(), TrainingConfig(learning_rate=0.1, weight_decay=0.0))
    assert np.array_equal(p["W"], [1.5, -2.0])


def test_adamw_single_step_closed_form():
    lr, eps = 0.01, 1e-8
    p = {"W": np.array([0.5])}
    adamw_step(p, {"W": np.array([1.0])}, AdamState(), TrainingConfig(learning_rate=lr, weight_decay=0.0, eps=eps))
    # bias-corrected moments are both exactly 1 after one step with g = 1
    assert p["W"][0] == pytest.approx(0.5 - lr * 1.0 / (1.0 + eps), abs=1e-15)


def test_adamw_decoupled_decay():
    lr, wd = 0.1, 0.01
    p = {"W": np.array([2.0]), "b": np.array([2.0])}
    adamw_step(p, {"W": np.zeros(1), "b": np.zeros(1)}, AdamState(), TrainingConfig(learning_rate=lr, weight_decay=wd))
    assert p["W"][0] == pytest.approx(2.0 * (1 - lr * wd), abs=1e-15)
    assert p["b"][0] == 2.0


def test_adamw_refuses_non_finite():
    p = {"W": np.array([1.0, 2.0])}
    st = AdamState()
    ok = adamw_step(p, {"W": np.array([np.nan, 1.0])}, st, TrainingConfig(learning_rate=0.1))
    assert not ok and st.refused == 1 and st.step == 0
    assert np.array_equal(p["W"], [1.0, 2.0])


def test_clip_by_global_norm():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert clip_by_global_norm(g, 1.0) == pytest.approx(5.0)
    assert math.hypot(g["a"][0], g["b"][0]) == pytest.approx(1.0)


@pytest.fixture(scope="module")
def small():
    return toy_setup(n_train=64, n_test=16)


def _model(setup, seed=0, **enc):
    return build_model(PAIR, PAIR_LABELS, setup.words, enc_config=enc or None, seed=seed)


def test_lr_zero_leaves_parameters(small):
    m = _model(small)
    before = {k: v.copy() for k, v in m.params.items()}
    train(m, small.corpus.examples("en", "train"),
          TrainingConfig(learning_rate=0.0, weight_decay=0.0, epochs=1, batch_size=16))
    assert all(np.array_equal(before[k], m.params[k]) for k in before)


def test_every_group_is_updated(small):
    m = _model(small)
    res = train(m, small.corpus.examples("en", "train"), TrainingConfig(learning_rate=1e-3, epochs=1, batch_size=16))
    for group in ("W_c", "W_pos", "gat_heads", "bias_Q", "bias_K", "encoder", "task_head"):
        assert res.update_norms[group] > 0, group


def test_deterministic_loss_curve(small, tmp_path):
    curves = []
    for run in range(2):
        m = _model(small, seed=3)
        log = tmp_path / f"log{run}.jsonl"
        res = train(m, small.corpus.examples("en", "train"),
                    TrainingConfig(learning_rate=1e-3, epochs=2, batch_size=16, seed=3), log_path=log)
        curves.append(res.losses)
    assert curves[0] == curves[1]
    row = json.loads(log.read_text().splitlines()[0])
    assert set(row) == {"step", "loss", "lr", "task", "seed"}


def test_divergence_aborts(small):
    m = _model(small)
    m.params["head.W"][:] = np.nan
    with pytest.raises(TrainingDiverged):
        train(m, small.corpus.examples("en", "train"), TrainingConfig(learning_rate=1e-3, epochs=1))


def test_grad_check_linear_model_exact():
    m, ex = gradcheck_fixture(PAIR, seed=0)
    res = grad_check(m, ex, groups=["task_head"], samples=50)
    assert res["task_head"] <= 1e-8


def test_grad_check_detects_planted_fault():
    m, ex = gradcheck_fixture(PAIR, seed=0)
    _, grads, _ = m.loss_and_grads(m.params, m.batch([ex]))
    grads["enc.W_1"] = grads["enc.W_1"] * 2
    res = grad_check(m, ex, groups=["encoder"], samples=200, grads=grads)
    assert res["encoder"] >= 0.5


@pytest.mark.parametrize("task", [PAIR, TAGGING])
def test_grad_check_full_model(task):
    m, ex = gradcheck_fixture(task, seed=0)
    assert sum(s.n for s in ex.sentences) == 8
    res = grad_check(m, ex, samples=60)
    assert max(res.values()) <= 1e-4, res
