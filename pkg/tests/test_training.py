import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgcn.data import LabelSet, RelationRecord
from sgcn.errors import ConfigError, NumericError
from sgcn.training import (
    AdamState,
    EpochLog,
    Example,
    Task,
    TrainConfig,
    adam_step,
    balance_negatives,
    clip_gradients,
    evaluate,
    lr_at_epoch,
    report_from_predictions,
    to_examples,
    train,
)

from conftest import tiny_model

LABELS = LabelSet("pdtb_top4", ("Comparison", "Contingency", "Expansion", "Temporal"))


def test_clip_componentwise():
    out = clip_gradients({"a": np.array([[7.0, -7.0, 2.0]])}, -5.0, 5.0)
    assert out["a"].tolist() == [[5.0, -5.0, 2.0]]


def test_adam_first_step_moves_by_lr():
    params = {"x": np.array([[1.0, -2.0, 0.5]])}
    adam_step(AdamState(), params, {"x": np.array([[0.3, -4.0, 1e-3]])}, 0.01)
    assert np.allclose(params["x"], [[0.99, -1.99, 0.49]], atol=1e-6)


def test_adam_zero_gradient_leaves_params():
    params = {"x": np.array([[1.5]])}
    adam_step(AdamState(), params, {"x": np.zeros((1, 1))}, 0.01)
    assert params["x"][0, 0] == 1.5


def test_adam_decreases_quadratic():
    params = {"x": np.array([[3.0]])}
    state = AdamState()
    values = [9.0]
    for _ in range(3):
        adam_step(state, params, {"x": 2 * params["x"]}, 0.1)
        values.append(float(params["x"][0, 0] ** 2))
    assert all(b < a for a, b in zip(values, values[1:]))


def test_adam_rejects_non_finite():
    params = {"w": np.zeros((1, 2))}
    with pytest.raises(NumericError, match="w"):
        adam_step(AdamState(), params, {"w": np.array([[np.nan, 0.0]])}, 0.01)
    assert np.array_equal(params["w"], np.zeros((1, 2)))


def test_lr_schedule():
    cfg = TrainConfig()
    assert lr_at_epoch(cfg, 0) == 1e-2
    assert lr_at_epoch(cfg, 1) == pytest.approx(9e-3, rel=1e-12)
    assert lr_at_epoch(cfg, 2) == pytest.approx(8.1e-3, rel=1e-12)


def test_config_validation():
    for bad in (TrainConfig(decay=0.0), TrainConfig(clip_lo=5, clip_hi=-5), TrainConfig(batch=0), TrainConfig(select_metric="x")):
        with pytest.raises(ConfigError):
            bad.validate()


def test_task_parse_and_relabel():
    assert Task.parse("multi-class").kind == "multi_class"
    t = Task.parse("one-vs-all:Temporal")
    assert t.classes(LABELS) == ["not-Temporal", "Temporal"]
    assert t.label_index("Temporal", LABELS) == 1 and t.label_index("Expansion", LABELS) == 0
    with pytest.raises(ConfigError):
        Task.parse("binary")
    with pytest.raises(ConfigError):
        Task.parse("one-vs-all:Nope").classes(LABELS)


def _examples(toks, n, seed=0):
    r = np.random.default_rng(seed)
    out = []
    for k in range(n):
        a = [toks[i] for i in r.integers(0, len(toks), size=r.integers(1, 4))]
        b = [toks[i] for i in r.integers(0, len(toks), size=r.integers(1, 4))]
        out.append(Example(f"e{k}", tuple(a), tuple(b), int(r.integers(0, 4))))
    return out


def test_one_step_per_epoch_when_batch_covers_dataset():
    model, toks = tiny_model()
    data = _examples(toks, 6)
    res = train(model, data, None, TrainConfig(epochs=3, batch=len(data)))
    assert res.steps == 3


def test_training_is_deterministic():
    logs, params = [], []
    for _ in range(2):
        model, toks = tiny_model(seed=2)
        data = _examples(toks, 8)
        res = train(model, data, data[:4], TrainConfig(epochs=2, batch=3, seed=5))
        logs.append([e.line() for e in res.log])
        params.append(model.params)
    assert logs[0] == logs[1]
    assert all(np.array_equal(params[0][k], params[1][k]) for k in params[0])


def test_loss_decreases_on_tiny_set():
    model, toks = tiny_model(seed=1)
    data = _examples(toks, 10, seed=3)
    res = train(model, data, None, TrainConfig(epochs=3, batch=10, lr=0.05, decay=1.0))
    losses = [e.train_loss for e in res.log]
    assert losses[2] < losses[0]


def test_best_snapshot_restored():
    model, toks = tiny_model(seed=1)
    data = _examples(toks, 10, seed=3)
    res = train(model, data, data, TrainConfig(epochs=4, batch=5))
    scores = [e.dev_macro_f1 for e in res.log]
    assert res.best_epoch == scores.index(max(scores))
    assert evaluate(model, data, Task()).macro_f1 == pytest.approx(max(scores), abs=1e-12)
    assert model.meta["epoch"] == res.best_epoch


def test_epoch_log_line_round_trips():
    e = EpochLog(3, 0.1 * 0.9 ** 3, 1 / 3, 0.5, 0.25, 7)
    fields = e.line().split("\t")
    assert len(fields) == 6 and int(fields[0]) == 3 and int(fields[5]) == 7
    assert float(fields[1]) == e.lr and float(fields[2]) == e.train_loss


def test_metrics_small_case():
    # class 1: TP=1, FP=1, FN=1
    rep = report_from_predictions([1, 1, 0, 0], [1, 0, 1, 0], ["n", "p"], positive=1)
    assert rep.precision[1] == 0.5 and rep.recall[1] == 0.5 and rep.f1[1] == 0.5
    assert rep.positive_f1 == 0.5 and rep.accuracy == 0.5
    perfect = report_from_predictions([0, 1, 2, 3], [0, 1, 2, 3], list("abcd"))
    assert perfect.macro_f1 == 1.0 and perfect.accuracy == 1.0


def test_metrics_absent_class_scores_zero():
    rep = report_from_predictions([0, 0], [0, 0], ["a", "b"])
    assert rep.f1 == [1.0, 0.0] and rep.macro_f1 == 0.5


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=60))
def test_metrics_against_counting(pairs):
    gold = [g for g, _ in pairs]
    pred = [p for _, p in pairs]
    rep = report_from_predictions(gold, pred, list("abcd"))
    for k in range(4):
        tp = sum(1 for g, p in pairs if g == k and p == k)
        fp = sum(1 for g, p in pairs if g != k and p == k)
        fn = sum(1 for g, p in pairs if g == k and p != k)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        assert abs(rep.f1[k] - f1) < 1e-12
    assert abs(rep.accuracy - sum(g == p for g, p in pairs) / len(pairs)) < 1e-12
    assert rep.total == len(pairs)


def test_one_vs_all_relabel_invariance():
    recs = [RelationRecord(str(k), ["a"], ["b"], s) for k, s in enumerate(["Temporal", "Expansion", "Comparison", "Temporal"])]
    a = to_examples(recs, LABELS, Task.parse("one-vs-all:Temporal"))
    swapped = [RelationRecord(r.id, r.arg1_tokens, r.arg2_tokens, "Contingency" if r.sense == "Expansion" else r.sense) for r in recs]
    b = to_examples(swapped, LABELS, Task.parse("one-vs-all:Temporal"))
    assert [e.label for e in a] == [e.label for e in b] == [1, 0, 0, 1]


def test_balance_negatives():
    ex = [Example(str(k), ("a",), ("b",), int(k % 5 == 0)) for k in range(20)]
    kept = balance_negatives(ex, 1)
    assert sum(e.label for e in kept) == 4 and len(kept) == 8
    assert kept == balance_negatives(ex, 1)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_raises():
    model, toks = tiny_model()
    model.params["mlp.b2"][0, 0] = np.inf
    with pytest.raises(NumericError):
        train(model, _examples(toks, 2), None, TrainConfig(epochs=1))
