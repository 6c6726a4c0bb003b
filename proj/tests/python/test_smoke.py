# Copyright (c) 2026 The redforge Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json
import math
import subprocess

import numpy as np
import pytest

import redforge as rf


def record(i, mos, rolloff, conf):
    return {
        "segment_id": f"s{i}",
        "asset_id": "a",
        "start": 10.0 * i,
        "end": 10.0 * i + 4.0,
        "multi_speaker": False,
        "transcript": "x",
        "mos_score": mos,
        "rolloff_hz": rolloff,
        "asr_confidence": conf,
    }


def test_filter_boundaries():
    recs = [record(0, 3.3, 8000, 0.9), record(1, 4.0, 7000, 0.9), record(2, 4.0, 8000, 0.79),
            record(3, 3.4, 7000.1, 0.8)]
    r = rf.apply_filters(recs)
    assert [k["segment_id"] for k in r["kept"]] == ["s3"]
    assert [k["reject_reason"] for k in r["rejected"]] == ["quality", "bandwidth", "confidence"]
    with pytest.raises(rf.ConfigError):
        rf.apply_filters(recs, mos_min=9.0)


def test_manifest_round_trip(tmp_path):
    recs = [record(0, 4.0, 8000, 0.9)]
    rf.write_manifest(recs, tmp_path / "m.jsonl")
    back = rf.read_manifest(tmp_path / "m.jsonl")
    assert back[0]["mos_score"] == 4.0
    (tmp_path / "bad.jsonl").write_text("{\n")
    with pytest.raises(rf.ManifestError):
        rf.read_manifest(tmp_path / "bad.jsonl")


def test_segment_track():
    decisions = [0] * 40 + [1] * 100 + [0] * 20 + [1] * 100 + [0] * 40
    kept, rejected = rf.segment_track(decisions, 0.025, 300 * 0.025)
    assert rejected == []
    assert len(kept) == 1
    assert kept[0][0] == pytest.approx(0.7)
    assert kept[0][1] == pytest.approx(6.8)


def test_rolloff_tone():
    sr = 16000
    t = np.arange(2 * sr) / sr
    r = rf.rolloff(0.5 * np.sin(2 * np.pi * 3000 * t), sr)
    assert abs(r - 3000) <= 16000 / 1024
    assert rf.rolloff(np.zeros(sr), sr) == 0.0


def test_cluster_merges_close_centroids():
    rng = np.random.default_rng(0)
    e = np.concatenate([rng.normal([5, 0, 0], 0.1, (20, 3)), rng.normal([0, 5, 0], 0.1, (20, 3))])
    model = rf.cluster(e, k=6, seed=1)
    assert len(model["centroids"]) == 2
    assert len(set(model["assignments"][:20])) == 1


def test_kernels():
    cb = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    idx, q, loss = rf.vq_quantize(np.array([[0.9, 1.1], [0.1, -0.1]]), cb)
    assert idx == [1, 0]
    assert q.shape == (2, 2)
    assert loss == pytest.approx(0.01)
    assert rf.composite_loss(1.0, 0.001, 2.0) == pytest.approx(4.0)

    streams = [[1, 2, 3], [4, 5, 6]]
    grid = rf.delay_encode(streams, n_codes=8)
    assert grid == [[1, 2, 3, 8], [8, 4, 5, 6]]
    assert rf.delay_decode(grid, [0, 1], n_codes=8) == streams
    with pytest.raises(rf.InvariantError):
        rf.delay_decode([[1, 2, 3, 4], [8, 4, 5, 6]], [0, 1], n_codes=8)

    assert rf.lookahead_align(8, 16, 2, 2) == [-1, -1, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6]

    frames = np.arange(200, dtype=float).reshape(200, 1)
    c = rf.clip_and_shuffle(frames, 50.0, fraction=0.5, seed=3)
    assert c["span_frames"] == 100
    assert sorted(c["output"][:, 0]) == list(range(c["span_start"], c["span_start"] + 100))


def test_flow_matching():
    x0 = np.array([1.0, -2.0, 0.5])
    x1 = np.array([0.3, 0.1, -1.0])
    assert np.array_equal(rf.ot_path(x0, x1, 0.0), x0)
    assert np.array_equal(rf.ot_path(x0, x1, 1.0, sigma=0.0), x1)
    assert rf.cfg_combine(np.array(2.0), np.array(1.0), 0.7).item() == 2.7
    v = rf.ot_field(x0, x1, 0.0)
    end = rf.integrate_ode(lambda x, t: v, x0, 10)
    assert np.allclose(end, x1, atol=1e-12)


def test_annotation():
    modes = rf.behaviors()
    assert len(modes) == 13
    assert sum(m == "token_insertion" for m in modes.values()) == 7
    plan = rf.parse_annotated("你好[laugh] 好^ really", "happy")
    assert plan["emotion"] == "happy"
    assert rf.canonical_text("你好  [laugh]  好^ really") == "你好 [laugh] 好^ really"
    with pytest.raises(rf.InvariantError):
        rf.parse_annotated("[nonsense]")


def test_pipeline_end_to_end(tmp_path):
    truth = rf.write_corpus(tmp_path / "wav", n_files=4, file_seconds=10.0, seed=2)
    assert len(truth) == 4
    cfg = {"inputs": [str(tmp_path / "wav" / "*.wav")], "workspace": str(tmp_path / "ws"), "seed": 1}
    seen = []
    out = rf.run_pipeline(cfg, progress=seen.append)
    stages = out["funnel"]["stages"]
    assert len(stages) == 5
    for prev, cur in zip(stages, stages[1:]):
        assert math.isclose(cur["input_hours"], prev["kept_hours"], abs_tol=1e-6)
    assert rf.stats(tmp_path / "ws") == out["funnel"]
    assert all(s["resumed"] for s in rf.run_pipeline(cfg)["stages"])
    assert rf.run_stage(cfg, "filter")["resumed"]
    with pytest.raises(rf.ConfigError):
        rf.run_pipeline({"workspace": "w", "bogus": 1})
    with pytest.raises(rf.Error):
        rf.stats(tmp_path / "nothing")


def test_cli_available():
    cli = rf.cli_path()
    if cli is None:
        pytest.skip("redforge CLI not found")
    out = subprocess.run([cli, "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "run" in out.stdout
