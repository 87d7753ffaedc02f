# Copyright 2026 The touchmap Authors
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json
import struct

import numpy as np
import pytest

import touchmap as tm


def test_stft_geometry():
    x = np.random.default_rng(0).uniform(-0.5, 0.5, 3200)
    assert tm.stft(x).shape == (20, 257)
    assert tm.segment_features(x).shape == (20, 257)
    assert tm.stft(x, pad_end=False).shape == (18, 257)


def test_features_of_a_sine():
    n = np.arange(16000)
    x = 0.5 * np.sin(2 * np.pi * 1000 * n / tm.SAMPLE_RATE)
    f = tm.features(x)
    assert set(f) == {"energy", "flatness", "onset", "centroid", "zcr"}
    assert np.all((f["flatness"] >= 0) & (f["flatness"] <= 1))
    assert abs(np.median(f["centroid"]) - 1000) < 100


def test_wav_round_trip(tmp_path):
    x = np.round(np.linspace(-0.5, 0.5, 1000) * 32768) / 32768
    tm.write_wav(tmp_path / "a.wav", x)
    np.testing.assert_array_equal(tm.read_wav(tmp_path / "a.wav"), x)
    with pytest.raises(tm.FormatError):
        tm.read_wav(tmp_path / "missing.wav")


def test_detect_a_burst():
    rng = np.random.default_rng(1)
    x = 0.001 * rng.standard_normal(3 * tm.SAMPLE_RATE)
    burst = 0.3 * rng.standard_normal(1280) * np.hanning(1280)
    start = int(1.5 * tm.SAMPLE_RATE) - 640
    x[start:start + 1280] += burst
    events = tm.detect(x)
    assert len(events) == 1
    assert abs(events[0]["peak_time"] - 1.5) < 0.01
    with pytest.raises(tm.ConfigError):
        tm.detect(x, tm.config_json({"detector": {"no_such_key": 1}}))


def test_embed_separates_blobs():
    rng = np.random.default_rng(2)
    centres = np.eye(3, 16) * 10
    x = np.vstack([centres[i % 3] + 0.3 * rng.standard_normal(16) for i in range(150)])
    y = tm.embed(x, n_neighbors=10, n_epochs=100, seed=3)
    assert y.shape == (150, 2)
    np.testing.assert_array_equal(y, tm.embed(x, n_neighbors=10, n_epochs=100, seed=3))
    assert 0.0 <= tm.neighborhood_preservation(x, y, 10) <= 1.0


def test_embedding_files_from_python_load_in_the_core(tmp_path):
    # The format an image-embedding extractor writes: float32 blob + sidecar.
    rows = np.array([[0.5, -1.25], [2.0, 3.5], [0.0, 1.0]], dtype=np.float32)
    ids = ["a.png", "b.png", "c.png"]
    rows.astype("<f4").tofile(tmp_path / "e.f32")
    (tmp_path / "e.json").write_text(json.dumps(
        {"n": 3, "d": 2, "ids": ids, "model_name": "vgg19", "layer_name": "fc2"}))
    got_ids, got = tm.read_embedding(tmp_path / "e.f32")
    assert got_ids == ids
    np.testing.assert_array_equal(got, rows.astype(np.float64))

    tm.write_embedding(tmp_path / "w.f32", got, ids)
    assert (tmp_path / "w.f32").read_bytes() == (tmp_path / "e.f32").read_bytes()
    assert struct.unpack("<f", (tmp_path / "w.f32").read_bytes()[:4])[0] == 0.5
    tm.write_embedding(tmp_path / "w.csv", got, ids)
    assert tm.read_embedding(tmp_path / "w.csv")[0] == ids


def test_pipeline_stages(tmp_path):
    cfg = tm.config_json({"manifold": {"n_neighbors": 5, "n_epochs": 50},
                          "regressor": {"epochs": 2, "batch": 8}})
    tm.synth(tmp_path / "corpus", n_clips=12, seed=5)
    det = tm.run_detect(tmp_path / "corpus" / "audio", tmp_path / "det", cfg)
    assert det["clips"] == 12 and det["events"] > 12 and not det["failures"]
    tm.run_reduce(tmp_path / "corpus" / "embeddings.csv", tmp_path / "red", cfg,
                  tmp_path / "corpus" / "manifest.jsonl")
    report = json.loads(tm.run_train(tmp_path / "det" / "segments", tmp_path / "red" / "coords.csv",
                                     tmp_path / "corpus" / "manifest.jsonl", tmp_path / "train", cfg))
    assert report["epochs"] == 2
    model = tm.Model.load(tmp_path / "train" / "model.json")
    assert model.n_params == 61442
    assert model.input_shape == (20, 257)
    seg = tm.read_wav(sorted((tmp_path / "det" / "segments").glob("*.wav"))[0])
    x, y = model.predict(seg)
    assert np.isfinite(x) and np.isfinite(y)
    assert json.loads(tm.default_config())["seed"] == 42
