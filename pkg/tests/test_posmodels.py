import numpy as np
import pytest

from nlosloc import posmodels as pm
from nlosloc.nn import TrainSchedule


def test_snapshot_counts():
    assert pm.build_snapshot(12).n_params == 1_058_306
    assert pm.build_snapshot(960).n_params == 1_543_682
    assert pm.build_snapshot(1).n_params == 1_052_674


def test_sequence_counts_and_deltas():
    counts = {d: pm.build_sequence(d).n_params for d in (12, 15, 960)}
    assert counts[15] - counts[12] == 3 * 1024
    assert counts[960] - counts[12] == 970_752
    assert abs(counts[12] - 1_667_192) <= 0.05 * 1_667_192
    assert abs(counts[960] - 2_637_944) <= 0.05 * 2_637_944


def test_sequence_wiring_counts():
    m = pm.build_sequence(12)
    L = m.layers
    assert L["lstm_parallel"].input_dim == 256
    assert L["lstm_out"].input_dim == 256 + m.lstm_hidden
    assert L["lstm_out"].hidden == 5 and L["lstm_out"].activation == "linear"


def small_sequence(seed=0):
    return pm.SequenceModel(4, (8, 8, 6, 6, 5), lstm_hidden=3, window=6, seed=seed)


def test_zero_length_window_rejected():
    m = small_sequence()
    with pytest.raises(pm.ArchitectureError):
        m.forward(np.zeros((1, 0, 4)))
    with pytest.raises(pm.ArchitectureError):
        pm.make_windows(np.zeros((5, 4)), window=0)


def test_predict_descales():
    m = pm.SnapshotModel(3, width=4, depth=1)
    out = m.layers["out"]
    out.params["W"][...] = 0
    out.params["b"][...] = [0.1, 0.2]
    np.testing.assert_allclose(pm.predict(m, np.zeros(3)), [30.0, 60.0])
    with pytest.raises(pm.ArchitectureError):
        pm.predict(m, np.zeros(4))


def test_heading_decoding():
    pos, spd, unit, ang = pm._decode(np.array([[0.0, 0.0, 1.0, 0.0, 0.5]]))
    np.testing.assert_allclose(unit[0], [0.0, 1.0])
    assert ang[0] == pytest.approx(90.0)
    assert spd[0] == pytest.approx(10.0)


def test_short_window_padded_and_flagged():
    m = small_sequence()
    x = np.random.default_rng(0).normal(size=(4, 4))
    est = pm.predict_sequence(m, x)
    assert est.positions.shape == (4, 2) and est.padded.all()
    full = pm.predict_sequence(m, np.random.default_rng(0).normal(size=(6, 4)))
    assert not full.padded.any()
    tr = pm.predict_track(m, np.random.default_rng(1).normal(size=(20, 4)))
    assert tr.positions.shape == (20, 2)
    assert tr.padded.sum() == 5


def test_heading_head_bounded():
    m = small_sequence()
    y = m.forward(np.random.default_rng(0).normal(size=(3, 6, 4)) * 3)
    assert np.all(np.abs(y[..., 3:5]) < 1)


def test_sequence_causal():
    m = small_sequence(2)
    rng = np.random.default_rng(3)
    x = rng.normal(size=(1, 6, 4))
    y = m.forward(x).copy()
    x2 = x.copy()
    x2[0, 4:] += rng.normal(size=(2, 4))
    y2 = m.forward(x2)
    np.testing.assert_array_equal(y[0, :4], y2[0, :4])
    assert not np.allclose(y[0, 4:], y2[0, 4:])


def test_snapshot_permutation_sensitive():
    m = pm.SnapshotModel(6, width=16, depth=2, seed=1)
    x = np.random.default_rng(0).normal(size=(1, 6))
    assert not np.allclose(m.forward(x), m.forward(x[:, ::-1]))


def test_sequence_model_gradient():
    m = small_sequence(4)
    rng = np.random.default_rng(5)
    x = rng.normal(size=(2, 6, 4))
    t = rng.normal(size=(2, 6, 5))
    from nlosloc.nn.train import loss_of
    loss = loss_of(m)
    m.backward(loss.grad(m.forward(x), t))
    for name, g in list(m.named_grads())[::3]:
        layer, key = name.split("/")
        p = m.layers[layer].params[key]
        idx = tuple(rng.integers(s) for s in p.shape)
        o = p[idx]
        p[idx] = o + 1e-6
        lp = loss(m.forward(x), t)
        p[idx] = o - 1e-6
        lm = loss(m.forward(x), t)
        p[idx] = o
        num = (lp - lm) / 2e-6
        assert abs(num - g[idx]) <= 1e-4 * max(abs(num), abs(g[idx]), 1e-6)


def _toy_sets(seed=0, n=64, d=5):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    y = np.c_[x[:, 0], -x[:, 1]] * 0.1
    return (x[:48], y[:48]), (x[48:], y[48:])


def test_transfer_freezes_all_but_first_layer():
    src = pm.SnapshotModel(5, width=8, depth=3, seed=0)
    tr, va = _toy_sets()
    model, hist = pm.transfer_adapt(src, tr, va, schedule=TrainSchedule(phase1_epochs=8, max_stop_epochs=4,
                                                                         patience=2, batch_size=16))
    before, after = src.get_weights(), model.get_weights()
    for k in before:
        if k.startswith("dense1/"):
            assert not np.array_equal(before[k], after[k])
        else:
            assert before[k].tobytes() == after[k].tobytes()
    assert hist.stops and hist.stops[0][0] == 1


def test_transfer_empty_mask_identity():
    src = pm.SnapshotModel(5, width=8, depth=2, seed=0)
    tr, va = _toy_sets()
    model, _ = pm.transfer_adapt(src, tr, va, pm.TransferPlan(trainable=()),
                                 TrainSchedule(phase1_epochs=3, max_stop_epochs=2, patience=1))
    for k, v in src.get_weights().items():
        assert model.get_weights()[k].tobytes() == v.tobytes()


def test_transfer_architecture_mismatch():
    src = pm.SnapshotModel(5, width=8, depth=2)
    other = pm.SnapshotModel(5, width=9, depth=2)
    tr, va = _toy_sets()
    with pytest.raises(pm.ArchitectureError):
        pm.transfer_adapt(src, tr, va, target=other)


def test_manifest_rebuild():
    m = small_sequence(7)
    again = pm.model_from_manifest(m.manifest())
    again.set_weights(m.get_weights())
    x = np.random.default_rng(0).normal(size=(1, 6, 4))
    np.testing.assert_array_equal(m.forward(x), again.forward(x))
