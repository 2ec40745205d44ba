# Copyright 2026 The esdd Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import numpy as np
import pytest

import esdd


def test_eer_cases():
    assert esdd.compute_eer([0.9, 1.0], [0.1, 0.2])[0] == 0.0
    assert esdd.compute_eer([0.1, 0.2], [0.9, 1.0])[0] == 1.0
    same = [float(i % 7) for i in range(100)]
    assert abs(esdd.compute_eer(same, same)[0] - 0.5) <= 0.005
    with pytest.raises(esdd.Error, match="argument"):
        esdd.compute_eer([], [1.0])


def test_formatting():
    assert esdd.format_percent(0.08) == "0.08"
    assert esdd.format_percent((0.66 + 3.70 + 6.80 + 17.50) / 4) == "7.17"


def test_captions():
    assert esdd.rewrite_label("gun_shot") == "Gun shot."
    kind, text = esdd.render_prompt("park", ["birds singing"])
    assert kind == "A"
    assert "recorded in park, where" in text
    kind, text = esdd.render_prompt("office")
    assert kind == "B"
    assert text.startswith("This clip is an audio clip recorded in office.")


def test_logmel_shape_and_peak():
    rate = 16000
    t = np.arange(4 * rate) / rate
    feats = esdd.logmel((0.5 * np.sin(2 * math.pi * 1000 * t)).astype(np.float32), rate)
    assert feats.shape == (398, 64)
    assert feats.dtype == np.float32
    assert np.all(np.isfinite(feats))
    band = int(np.argmax(feats.mean(axis=0)))
    assert 0 < band < 63


def test_embedding_round_trip(tmp_path):
    values = np.random.default_rng(0).standard_normal((12, 768)).astype(np.float32)
    path = tmp_path / "clip.emb"
    esdd.write_embedding(path, values, "beats-l12")
    back, front_end = esdd.read_embedding(path)
    assert front_end == "beats-l12"
    assert back.tobytes() == values.tobytes()
    path.write_bytes(b"NOTMAGIC" + path.read_bytes()[8:])
    with pytest.raises(esdd.Error, match="format"):
        esdd.read_embedding(path)


def test_cli_chain(tmp_path):
    code, out, _ = esdd.run_cli(["--version"])
    assert code == 0 and out.startswith("esdd ")
    src = tmp_path / "src"
    assert esdd.run_cli(["-q", "synth", "-o", str(src), "-n", "6"])[0] == 0
    ini = tmp_path / "run.ini"
    ini.write_text("[paths]\nwork_dir = .\n[corpus]\nd1 = src\n[generation]\ntta_models = G1\nata_models =\n")
    for cmd in ["build-manifest", "caption", "plan-gen", "run-gen", "split", "verify"]:
        code, _, err = esdd.run_cli(["-q", "-c", str(ini), cmd])
        assert code == 0, err
    records, provenance = esdd.read_manifest(tmp_path / "manifest.tsv")
    assert len(records) == 12
    assert provenance[0].startswith("esdd ")
    fakes = [r for r in records if r["label"] == "fake"]
    assert {r["parent_clip_id"] for r in fakes} == {r["clip_id"] for r in records if r["label"] == "real"}
    samples, rate = esdd.read_wav(tmp_path / fakes[0]["path"])
    assert rate == 16000 and samples.shape == (64000,)
    assert esdd.run_cli(["-c", str(ini), "--set", "nope.key=1", "split"])[0] == 2
