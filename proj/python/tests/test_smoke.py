import math
import os
from pathlib import Path

import numpy as np
import pytest

import neuromanip as nm

DATA = Path(os.environ.get("NEUROMANIP_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


@pytest.fixture(scope="module")
def small():
    cfg = nm.load_config(DATA / "config.json")
    cfg.train_size = 600
    cfg.epochs = 10
    world = nm.load_world(cfg)
    return cfg, world, nm.build_model(cfg, world)


def test_gestures_and_constants():
    assert nm.gesture_names() == [
        "Rest", "CylindricalGrip", "LateralPinch", "TripodPinch", "OpenHand", "IndexPoint"]
    assert nm.SAMPLE_RATE_HZ == 200.0
    assert nm.FEATURES == 32


def test_filter_response():
    assert nm.filter_magnitude_db(50.0) <= -30.0
    assert abs(nm.filter_magnitude_db(20.0)) <= 1.0
    x = nm.synth_emg("CylindricalGrip", 1000, seed=3)
    y = nm.filter_signal(x)
    assert y.shape == x.shape == (200, 8)
    assert np.all(nm.filter_signal(np.zeros((50, 8))) == 0.0)


def test_features_closed_form():
    # Constant 0.5 on every channel: MAV = RMS = 0.5, no length, no crossings.
    f = nm.extract_features(np.full((40, 8), 0.5))
    assert f.shape == (32,)
    assert np.allclose(f.reshape(8, 4), [[0.5, 0.5, 0.0, 0.0]] * 8)


def test_encode_rate_counts():
    rates = [0.0, 0.25, 0.5, 1.0, 1.7, -0.3, 0.999]
    assert nm.encode_rate_counts(rates, 64) == [math.floor(64 * min(max(r, 0.0), 1.0)) for r in rates]


def test_candidates_for_cup():
    cfg = nm.load_config(DATA / "config.json")
    world = nm.load_world(cfg)
    assert 1 in world.object_ids()
    assert world.object_class(1) == "cup"
    cands = world.candidates(1)
    assert [c[0] for c in cands] == [2, 7, 4]
    assert sum(c[2] for c in cands) == pytest.approx(1.0)


def test_dataset_model_and_eval(small, tmp_path):
    cfg, world, model = small
    x, y, obj = nm.generate_dataset(cfg, world, "test", sigma=0.2, n=60)
    assert x.shape == (60, 32)
    assert list(y[:6]) == [0, 1, 2, 3, 4, 5]
    assert model.has_spiking
    d = model.classify(x[1])
    s = model.classify(x[1], backend="spiking")
    assert d["label"] in nm.gesture_names()
    assert 0.0 < d["confidence"] <= 1.0
    assert s["synaptic_events"] >= 0 and s["dense_macs"] == 6528

    path = tmp_path / "model.json"
    model.save(path)
    again = nm.load_model(path)
    assert again.classify(x[1])["logits"] == d["logits"]

    report = nm.evaluate(cfg, world, model, sigma=0.2, n=120)
    assert report["unsafe_executions"] == 0
    assert report["acc_restricted"] >= report["acc_unrestricted"]


def test_study_stats_reference():
    rows = nm.study_stats(DATA / "reference_study_aggregates.csv")
    by = {(r["metric"], r["mass_g"]): r for r in rows}
    assert [by[("completion_s", m)]["mean"] for m in (100, 200, 300)] == [51.6, 67.5, 92.1]
    assert by[("completion_s", 100)]["sd"] is None


def test_errors_carry_codes():
    with pytest.raises(nm.NeuromanipError) as e:
        nm.extract_features(np.zeros((40, 3)))
    assert e.value.code == "DimensionMismatch"
    with pytest.raises(nm.NeuromanipError):
        nm.load_config(DATA / "does_not_exist.json")
