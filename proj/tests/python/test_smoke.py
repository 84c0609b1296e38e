# Copyright 2026 The blockmetric Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import numpy as np
import pytest

import blockmetric as bm


def unit_rows(rng, rows, dim):
    m = rng.standard_normal((rows, dim)).astype(np.float32)
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def test_param_counts():
    assert bm.param_count(bm.MetricConfig.diag(1024)) == 1024
    assert bm.param_count(bm.MetricConfig.block_diag(1024, 256)) == 262144
    assert bm.param_count(bm.MetricConfig.dense(1024)) == 1048576
    assert bm.param_count(bm.MetricConfig.cosine(1024)) == 0


def test_identity_scores_are_dot_products():
    rng = np.random.default_rng(0)
    x, y = unit_rows(rng, 20, 32), unit_rows(rng, 30, 32)
    for cfg in (bm.MetricConfig.diag(32), bm.MetricConfig.block_diag(32, 4),
                bm.MetricConfig.dense(32)):
        s = bm.score_matrix(x, y, bm.init_identity(cfg))
        assert s.shape == (20, 30)
        np.testing.assert_allclose(s, x @ y.T, atol=1e-6)


def test_dense_matches_bilinear_form():
    rng = np.random.default_rng(1)
    params = bm.init_random(bm.MetricConfig.block_diag(16, 4), 3)
    w = params.dense()
    assert w.shape == (16, 16)
    assert np.all(w[0:4, 4:] == 0.0)
    x, y = unit_rows(rng, 5, 16), unit_rows(rng, 6, 16)
    np.testing.assert_allclose(bm.score_matrix(x, y, params), x @ w @ y.T, atol=1e-5)
    right = bm.pre_project(y, params, "right")
    np.testing.assert_allclose(x @ right.T, x @ w @ y.T, atol=1e-5)


def test_synth_train_evaluate():
    x, y = bm.synth(pairs=300, dim=16, block=4, seed=5)
    assert x.shape == (300, 16)
    cfg = bm.MetricConfig.make("bdiag", 16, 4)
    params, history = bm.train(x, y, cfg, epochs=3, batch_size=64, learning_rate=1e-2, seed=1)
    again, history2 = bm.train(x, y, cfg, epochs=3, batch_size=64, learning_rate=1e-2, seed=1)
    assert params == again and history == history2
    assert len(history) == 3
    report = bm.evaluate(bm.score_matrix(x, y, params))
    assert 0.0 <= report["x2y_r1"] <= 100.0
    assert report["rsum"] == pytest.approx(sum(
        report[k] for k in ("x2y_r1", "x2y_r5", "x2y_r10", "y2x_r1", "y2x_r5", "y2x_r10")))


def test_losses_and_gradcheck():
    value, grad = bm.loss_and_grad(np.eye(2), "infonce", temperature=1.0)
    assert value == pytest.approx(math.log1p(math.exp(-1.0)), abs=1e-12)
    assert grad.shape == (2, 2)
    result = bm.gradcheck("diag", 16, 0, "cmpm", trials=10)
    assert result["max_relative_error"] < 1e-4
    with pytest.raises(ValueError):
        bm.loss_and_grad(np.eye(2), "hinge")


def test_apps():
    rng = np.random.default_rng(2)
    ident = bm.init_identity(bm.MetricConfig.diag(8))
    a, b = unit_rows(rng, 1, 8), unit_rows(rng, 1, 8)
    single = float(bm.score_matrix(a, b, ident)[0, 0])
    for strategy in ("maxave", "maxsum", "maxsoft"):
        assert bm.token_alignment(a, b, ident, strategy) == pytest.approx(single, abs=1e-6)
    w = bm.metric_attention(unit_rows(rng, 3, 8), unit_rows(rng, 5, 8),
                            np.eye(5, dtype=np.float32), ident)
    np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-6)
    s = rng.standard_normal((3, 3))
    assert bm.distill_kl(s, s, 0.5) == 0.0


def test_file_round_trip_and_typed_errors(tmp_path):
    params = bm.init_random(bm.MetricConfig.dense(8), 4)
    path = str(tmp_path / "m.gsw")
    bm.save_checkpoint(path, params)
    assert bm.load_checkpoint(path) == params
    data = bytearray((tmp_path / "m.gsw").read_bytes())
    data[20] ^= 0x01
    (tmp_path / "bad.gsw").write_bytes(bytes(data))
    with pytest.raises(bm.FormatError, match="checksum"):
        bm.load_checkpoint(str(tmp_path / "bad.gsw"))
    with pytest.raises(OSError):
        bm.read_features(str(tmp_path / "absent.gsf"))
    feats = unit_rows(np.random.default_rng(3), 4, 6)
    bm.write_features(str(tmp_path / "f.gsf"), feats)
    np.testing.assert_array_equal(bm.read_features(str(tmp_path / "f.gsf")), feats)
