import json
import math

import numpy as np
import pytest

import sunet


def test_generate_and_region_stats_agree():
    samples = sunet.generate(6, seed=3)
    assert [s["sample_id"] for s in samples] == ["SYN_000"] * 6
    for s in samples:
        assert s["image"].shape == (32, 32)
        assert s["mask"].dtype == np.uint8
        assert sunet.region_stats(s["mask"]) == s["stats"]


def test_gumbel_softmax_is_a_simplex():
    y = sunet.gumbel_softmax([0.7, 0.2, 0.1], 0.5, [0.1, -0.3, 1.2])
    assert math.isclose(sum(y), 1.0, abs_tol=1e-12)
    assert all(v > 0 for v in y)
    with pytest.raises(sunet.ConfigError):
        sunet.gumbel_softmax([0.5, 0.5], 0.0, [0.0, 0.0])


def test_largest_component_and_dsc():
    m = np.zeros((6, 6), dtype=np.uint8)
    m[0:2, 0:2] = 1
    m[4, 4] = 1
    kept = sunet.largest_component(m)
    assert kept.sum() == 4 and kept[4, 4] == 0
    assert sunet.dsc(kept, m) == pytest.approx(8 / 9)
    assert sunet.dsc(np.zeros((3, 3)), np.zeros((3, 3))) == 1.0


def test_regressions():
    x = np.array([[0.0], [1.0], [2.0], [3.0]])
    assert sunet.fit_linear(x, np.array([1.0, 3.0, 5.0, 7.0]))["r2"] == pytest.approx(1.0)
    fit = sunet.fit_logistic(np.array([[0.0], [0.0], [1.0], [1.0]]), [0, 1, 0, 1])
    assert abs(fit["pseudo_r2"]) < 1e-6
    with pytest.raises(sunet.DegenerateOutcome):
        sunet.fit_multinomial(np.zeros((3, 1)), ["a", "a", "a"])


def test_prefix_mining_on_cs4941_rows():
    rows = [[657, 653, 6531, 4394]] * 19 + [[657, 653, 6613, 4394]] * 2
    rows += [[8584, 1, 2, 3], [8584, 4, 2, 3], [1168, 5, 2, 3], [1168, 6, 2, 3]]
    labels = ["normal"] * 21 + ["tumor"] * 4
    mined = sunet.mine_prefixes(rows, labels, max_k=2, min_coverage=0.2)
    assert [p["pattern"] for p in mined["normal"]] == ["657, 653, *"]
    assert mined["normal"][0]["purity"] == 1.0
    _, columns, reference = sunet.encode_position(rows, 1, 1)
    assert reference == "657"


def test_run_config_rejects_unknown_keys():
    filled = json.loads(sunet.parse_run_config('{"seed": 4}'))
    assert filled["channel"]["sentence_length"] == 10
    with pytest.raises(sunet.ConfigError, match="nope"):
        sunet.parse_run_config('{"seed": 1, "train": {"nope": 1}}')


TINY = json.dumps({
    "seed": 2,
    "data": {"image_size": 16, "area_range": [10, 30]},
    "backbone": {"base_channels": 4, "depth": 2},
    "channel": {"sentence_length": 3, "vocab_size": 8, "hidden_size": 6, "cell_size": 6},
    "train": {"epochs": 2, "batch_size": 4},
})


def test_train_predict_save_load(tmp_path):
    sunet.write_dataset(tmp_path / "data", 8, 5, TINY)
    model = sunet.Model(TINY, seed=2)
    reports = model.fit(tmp_path / "data")
    assert [r.epoch for r in reports] == [1, 2]
    images = np.random.default_rng(0).random((3, 16, 16))
    preds = model.predict(images)
    assert len(preds) == 3
    assert all(len(p["sentence"]) == 3 and all(1 <= i < 8 for i in p["sentence"]) for p in preds)
    model.save(tmp_path / "m.bin")
    again = sunet.Model.load(tmp_path / "m.bin").predict(images)
    for a, b in zip(preds, again):
        assert a["sentence"] == b["sentence"]
        np.testing.assert_array_equal(a["prob"], b["prob"])

    baseline = sunet.Model(TINY, seed=2, ablate_channel=True)
    assert baseline.ablated
    assert not any(n.startswith(("sender", "receiver", "fusion")) for n in baseline.parameter_names())
    assert baseline.predict(images)[0]["sentence"] is None
