"""Cross-module flows: corpus provenance -> per-origin agreement, and the
binary group-agreement path on merge decisions."""
import math

import numpy as np
import pytest

from scatterscore.agreement import (
    GroupRatings,
    IsolatedRatings,
    bootstrap_kappa,
    majority_vote_by_origin,
    read_group_csv,
    vanbelle_kappa,
)
from scatterscore.augment import JudgmentRecord, build_corpus
from scatterscore.mergemodel import TrainConfig, predict, train_bagged
from scatterscore.pairspace import PairFeatures, ShapeParams, align_training_record
from scatterscore.preprocess import PreprocessSpec
from scatterscore.util import derive_seed, spawn_rng


def grid_records(n, seed):
    rng = np.random.default_rng(seed)
    records = []
    seen = set()
    while len(records) < n:
        sep = float(rng.choice([0.0, 1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0]))
        s = [float(rng.choice([0.5, 1.0, 1.5, 2.0, 2.5, 3.0])) for _ in range(4)]
        th = [float(rng.choice([0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 8, math.pi / 2])) for _ in range(2)]
        tau = float(rng.choice([0.1, 0.2, 0.3, 0.4, 0.5]))
        key = (tau, sep, *s, *th)
        if key in seen:
            continue
        seen.add(key)
        merge = sep <= 0.55 * sum(s)
        votes = tuple(int(merge) for _ in range(34))
        params = PairFeatures(tau, sep, ShapeParams(th[0], s[0], s[1]), ShapeParams(th[1], s[2], s[3]))
        records.append(JudgmentRecord(record_id=f"g{len(records)}", params=params, judgments=votes))
    return records


class TestPerOriginAgreement:
    def test_replica_predictions_summarize_back_to_origin_labels(self):
        records = grid_records(120, seed=31)
        corpus = build_corpus(records)
        config = TrainConfig(
            n_trees=15, seed=4, balance="up_sample", preprocess=PreprocessSpec(steps=("center_scale",))
        )
        model, _ = train_bagged(corpus, config)

        predictions = [
            (rec.origin_id, predict(model, rec.features)[0]) for rec in corpus.records
        ]
        per_origin = majority_vote_by_origin(predictions)
        truth = {r.record_id: int(all(r.judgments)) for r in records}
        kept = [o for o in per_origin if o in truth]
        agreement_rate = np.mean([per_origin[o] == truth[o] for o in kept])
        assert agreement_rate >= 0.95

    def test_origin_groups_match_provenance(self):
        records = grid_records(30, seed=32)
        corpus = build_corpus(records)
        predictions = [(rec.origin_id, rec.label) for rec in corpus.records]
        per_origin = majority_vote_by_origin(predictions)
        for origin, rows in corpus.provenance.items():
            # replicas inherit their origin's label, so the vote is unanimous
            assert per_origin[origin] == corpus.records[rows[0]].label


class TestBinaryGroupAgreement:
    def test_merge_decisions_vs_judge_group(self, tmp_path):
        records = grid_records(100, seed=33)
        corpus = build_corpus(records)
        config = TrainConfig(
            n_trees=15, seed=2, balance="up_sample", preprocess=PreprocessSpec(steps=("center_scale",))
        )
        model, _ = train_bagged(corpus, config)

        # noisy votes around the rule that generated the labels
        rng = spawn_rng(derive_seed(33, "votes"))
        path = tmp_path / "group.csv"
        with open(path, "w") as fh:
            fh.write("item_id," + ",".join(f"r{i}" for i in range(34)) + "\n")
            for rec in records:
                base = int(all(rec.judgments))
                votes = [str(base if rng.random() < 0.92 else 1 - base) for _ in range(34)]
                fh.write(f"{rec.record_id}," + ",".join(votes) + "\n")
        ids, group = read_group_csv(path)
        assert ids == [r.record_id for r in records]

        machine = IsolatedRatings(
            votes=tuple(str(predict(model, align_training_record(r.params))[0]) for r in records)
        )
        result = vanbelle_kappa(group, machine)
        assert result.kappa > 0.7
        summary = bootstrap_kappa(group, machine, b=300, seed=5)
        assert abs(summary.mean - result.kappa) < 0.1
        assert summary.percentiles[2.5] <= result.kappa <= summary.percentiles[97.5]
