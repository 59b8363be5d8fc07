# Copyright 2026 The KPA Toolkit Authors.
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

"""Smoke tests for the Python bindings."""

import itertools
import json
import os
from pathlib import Path

import pytest

import kpa

MINI = Path(os.environ.get("KPA_SOURCE_DIR", Path(__file__).resolve().parents[2])) / "data" / "mini"


def mini(out):
    return dict(arguments=MINI / "arguments.csv", key_points=MINI / "key_points.csv",
                labels=MINI / "labels.csv", embeddings=MINI / "embeddings.jsonl", out=out)


def test_run_pipeline(tmp_path):
    summary = kpa.run(**mini(tmp_path))
    assert summary["partitions"] == 4
    assert summary["key_points"] > 0
    assert len(summary["report"]["per_partition"]) == 4
    assert (tmp_path / "keypoints.jsonl").exists()
    again = kpa.run(**mini(tmp_path / "again"))
    assert (tmp_path / "keypoints.jsonl").read_bytes() == (tmp_path / "again" / "keypoints.jsonl").read_bytes()


def test_sweep(tmp_path):
    rows = kpa.sweep("0.6:0.9:0.1", **mini(tmp_path))
    assert [r["lambda"] for r in rows] == [0.6, 0.7, 0.8, 0.9]


def test_config_errors():
    with pytest.raises(kpa.UsageError):
        kpa.run(arguments="a.csv", lamda=0.3)
    with pytest.raises(kpa.UsageError, match="empty sweep"):
        kpa.sweep("0.9:0.1:0.1", **mini("/tmp/unused"))
    with pytest.raises(kpa.InputError):
        kpa.run(arguments="/nonexistent.csv", embeddings="/nonexistent.jsonl")
    assert issubclass(kpa.BackendError, kpa.KpaError)
    assert kpa.config_hash(arguments="a.csv") == kpa.config_hash(arguments="a.csv", out="x", jobs=3)


def test_soft_scores_worked_example():
    table = {("c1", "r1"): 0.9, ("c1", "r2"): 0.4}
    s = kpa.soft_scores(["c1"], ["r1", "r2"], lambda c, r: table[(c, r)])
    assert s["sP"] == pytest.approx(0.9, abs=1e-12)
    assert s["sR"] == pytest.approx(0.65, abs=1e-12)
    assert s["sF1"] == pytest.approx(0.75484, abs=1e-5)
    with pytest.raises(kpa.BackendError):
        kpa.soft_scores(["a"], ["b"], lambda c, r: 2.0)


def test_optimal_match_brute_force():
    m = [[0.3, 0.9, 0.2], [0.8, 0.1, 0.4], [0.5, 0.6, 0.7]]
    pairs, total = kpa.optimal_match(m)
    best = max(sum(m[i][p[i]] for i in range(3)) for p in itertools.permutations(range(3)))
    assert total == pytest.approx(best)
    assert pairs == [(0, 1), (1, 0), (2, 2)]


def test_rouge_and_spearman():
    r = kpa.rouge("the cat sat", "the cat ran")
    assert r["rouge1"] == pytest.approx(2 / 3, abs=1e-12)
    assert r["rouge2"] == pytest.approx(0.5, abs=1e-12)
    assert kpa.corpus_rouge([(["x y"], ["x y"]), (["p"], ["q"])])["rouge1"] == 0.5
    assert kpa.spearman([1, 2, 3, 4], [10, 20, 30, 40]) == 1.0
    assert kpa.fractional_ranks([3, 1, 3]) == [2.5, 1.0, 2.5]
    assert kpa.tokenize("The Cat!") == ["the", "cat"]


def test_textrank_and_clustering():
    ranks = kpa.textrank([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    assert sum(ranks) == pytest.approx(1.0, abs=1e-9)
    assert ranks[1] > ranks[0]
    points = [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [0.1, 0.1],
              [9.0, 9.0], [9.1, 9.0], [9.0, 9.1], [9.1, 9.1]]
    assert kpa.hdbscan_labels(points) == [0, 0, 0, 0, 1, 1, 1, 1]
    assert len(set(kpa.kmeans_labels(points, 2))) == 2


def test_quality_filter():
    pairs = [("a", "o", "0.5"), ("b", "o", "0.1"), ("c", "o", "0.9"), ("d", "o", "0.7")]
    kept = kpa.quality_filter(pairs, lambda generated, original: float(generated))
    assert [k for k, _ in kept] == ["a", "c", "d"]
