"""End-to-end acceptance gate.

One test per acceptance criterion; each prints a single
``[ACCEPTANCE] <criterion>: PASS|FAIL`` line (visible with ``-s``/``-rA``),
and under plain ``pytest -v`` the test names themselves give one pass/fail
line per criterion.

The two corpus-scale criteria replay published headline numbers and need the
public 61-feature Wikipedia vandalism corpus on disk; point the
``FNVD_CORPUS`` environment variable at that ARFF file to enable them.  The
corpus is not redistributable with this package, so by default those two
skip and the always-runnable property criteria below stand in for them.
"""
import contextlib
import json
import math
import os
import time
from importlib import resources

import numpy as np
import pytest

from fnvd.cluster import ClusterConfig, kmeans
from fnvd.data import (
    Dataset,
    FeatureSchema,
    SynthConfig,
    parse_arff,
    solve_intercept,
    stratified_kfold,
    synth_generate,
)
from fnvd.explain import contributions, relevant_features
from fnvd.lmt import (
    LmtModel,
    LogisticLeafModel,
    Node,
    TrainParams,
    deserialize_model,
    evaluate,
    fit_logitboost,
    predict_proba,
    sigmoid,
    train,
)
from fnvd.service import (
    DECISION_REJECTED,
    RECORDS_FILE,
    ActionSubmission,
    DuplicateActionId,
    WorkflowService,
)
from fnvd.taxonomy import load_taxonomy, subtree, taxonomy_to_dict, wikipedia_taxonomy

from oracles import brute_force_two_means, newton_logistic_mle


@contextlib.contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"[ACCEPTANCE] {name}: PASS")


def _fixture_text(name: str) -> str:
    return resources.files("fnvd").joinpath(f"fixtures/{name}").read_text()


# ------------------------------------------------------------- corpus replay

CORPUS = os.environ.get("FNVD_CORPUS")

needs_corpus = pytest.mark.skipif(
    CORPUS is None,
    reason="needs FNVD_CORPUS=<path to the public 61-feature vandalism ARFF>;"
    " corpus not redistributable, property criteria below stand in",
)


@pytest.fixture(scope="module")
def corpus() -> Dataset:
    with open(CORPUS, encoding="utf-8") as fh:
        return parse_arff(fh.read())


@needs_corpus
def test_criterion_corpus_crossvalidation(corpus):
    with criterion("corpus 10-fold cross-validation"):
        params = TrainParams(seed=17)
        folds = stratified_kfold(corpus, 10, seed=17)
        started = time.monotonic()
        metrics = evaluate(lambda ds: train(ds, params), corpus, folds)
        elapsed = time.monotonic() - started
        assert elapsed <= 15 * 60
        assert metrics.accuracy() >= 0.95
        assert abs(metrics.precision_violation() - 0.781) <= 0.05
        assert abs(metrics.recall_violation() - 0.638) <= 0.06
        assert metrics.precision_regular() >= 0.96
        assert metrics.recall_regular() >= 0.975


@needs_corpus
def test_criterion_corpus_tree_size(corpus):
    with criterion("corpus pruned tree size"):
        model = train(corpus, TrainParams(seed=17))
        assert model.leaf_count() <= 15


# -------------------------------------------------- probability/logit identity

def _random_leaf(rng: np.random.Generator, d: int) -> LogisticLeafModel:
    picked = rng.choice(d, size=int(rng.integers(1, d + 1)), replace=False)
    coeffs = {int(j): float(rng.normal(0.0, 0.4)) for j in picked}
    return LogisticLeafModel(float(rng.normal(0.0, 0.5)), coeffs)


def _random_tree(rng: np.random.Generator, d: int, depth: int) -> Node:
    if depth == 0 or rng.uniform() < 0.3:
        return Node(_random_leaf(rng, d))
    return Node(
        _random_leaf(rng, d),
        int(rng.integers(d)),
        float(rng.normal(0.0, 1.0)),
        _random_tree(rng, d, depth - 1),
        _random_tree(rng, d, depth - 1),
    )


def test_criterion_probability_logit_identity():
    with criterion("probability/logit identity, 1000 random (model, input) pairs"):
        d = 6
        schema = FeatureSchema(
            tuple(f"F{j}" for j in range(d)), "class", "vandalism", "regular"
        )
        rng = np.random.default_rng(20260814)
        pairs = 0
        worst = 0.0
        for _ in range(100):
            model = LmtModel(schema, _random_tree(rng, d, 3), {})
            for _ in range(10):
                x = rng.normal(0.0, 1.0, d)
                node = model.root
                while not node.is_leaf:
                    node = node.left if x[node.feature] < node.threshold else node.right
                f = node.model.intercept + sum(
                    c * x[j] for j, c in node.model.coeffs.items()
                )
                p, _trace = predict_proba(model, x)
                worst = max(worst, abs(math.log(p / (1.0 - p)) - f))
                pairs += 1
        assert pairs == 1000
        assert worst <= 1e-9


# ----------------------------------------------------- boosting vs Newton MLE

def test_criterion_boosting_matches_newton_oracle():
    with criterion("boosting fixed point vs Newton MLE, 20 seeded datasets"):
        worst = 0.0
        for seed in range(100, 120):
            rng = np.random.default_rng(seed)
            x = rng.uniform(0.0, 1.0, 1000)
            p_true = 1.0 / (1.0 + np.exp(-(-0.1 + 0.25 * x)))
            y = (rng.uniform(size=1000) < p_true).astype(np.float64)
            leaf = fit_logitboost(x[:, None], y, 200, 3.0)
            beta = newton_logistic_mle(x[:, None], y)
            ours = sigmoid(leaf.logit_rows(x[:, None]))
            oracle = 1.0 / (1.0 + np.exp(-(beta[0] + beta[1] * x)))
            worst = max(worst, float(np.abs(ours - oracle).max()))
        assert worst <= 1e-3


# ------------------------------------------------ 2-means vs exhaustive split

def test_criterion_two_means_matches_exhaustive_optimum():
    with criterion("2-means equals exhaustive contiguous optimum on small sets"):
        checked = 0
        for size in range(2, 13):
            for seed in range(10):
                rng = np.random.default_rng([size, seed])
                values = rng.uniform(-5.0, 5.0, size).round(3)
                got = kmeans(values, ClusterConfig(k=2, seed=7)).sse
                want, _, _ = brute_force_two_means(values)
                assert abs(got - want) <= 1e-12 * max(1.0, want)
                checked += 1
        for seed in range(10):  # duplicate-heavy draws
            rng = np.random.default_rng([99, seed])
            size = int(rng.integers(4, 13))
            values = rng.integers(0, 4, size).astype(np.float64)
            if len(set(values.tolist())) < 2:
                continue
            got = kmeans(values, ClusterConfig(k=2, seed=7)).sse
            want, _, _ = brute_force_two_means(values)
            assert abs(got - want) <= 1e-12 * max(1.0, want)
            checked += 1
        assert checked >= 120


# ------------------------------------------------- reference contribution set

REFERENCE_TOTALS = {
    "WT_NO_DELAY": 1.08254896,
    "HIST_REP_COUNTRY": 0.899847,
    "LANG_ALL_ALPHA": 0.7261543,
    "HASH_REC_DIVERSITY": 0.15714292,
    "WT_DELAYED": 0.12748878,
    "LANG_ALL_CHAR_REP": 0.12,
    "HIST_REP_ARTICLE": 0.093548,
}

STARRED = frozenset({"WT_NO_DELAY", "HIST_REP_COUNTRY", "LANG_ALL_ALPHA"})


def _reference_case() -> tuple[LmtModel, np.ndarray]:
    model = deserialize_model(_fixture_text("example_leaf_model.json"))
    action = json.loads(_fixture_text("example_action.json"))
    x = model.schema.vector_from_mapping(action["features"])
    return model, x


def test_criterion_reference_contribution_totals():
    with criterion("reference record: contribution totals and starred group"):
        model, x = _reference_case()
        contribs = contributions(model.root.model, x, model.schema)
        by_name = {c.feature: c.product for c in contribs}
        for name, total in REFERENCE_TOTALS.items():
            assert abs(by_name[name] - total) <= 1e-8
        split = relevant_features(contribs)
        assert not split.degenerate
        assert split.relevant == STARRED


# ----------------------------------------------------- reference subtree form

def test_criterion_reference_relevance_subtree():
    with criterion("reference record: relevance subtree equals golden fragment"):
        fragment = subtree(wikipedia_taxonomy(), STARRED)
        golden = json.loads(_fixture_text("golden_relevant_subtree.json"))
        assert taxonomy_to_dict(fragment) == golden


# ------------------------------------------------------ workflow fuzz totality

FUZZ_TAXONOMY = json.dumps(
    {
        "norm": "no violation",
        "root": {
            "name": "no violation",
            "description": "root",
            "children": [
                {"name": "first signal", "description": "d", "feature": "F0"},
                {"name": "second signal", "description": "d", "feature": "F1"},
                {"name": "third signal", "description": "d", "feature": "F2"},
            ],
        },
    }
)


def _fuzz_model() -> LmtModel:
    schema = FeatureSchema(("F0", "F1", "F2"), "class", "violation", "regular")
    leaf = LogisticLeafModel(-1.0, {0: 4.0, 1: 1.0})
    return LmtModel(schema, Node(leaf), {"origin": "fuzz", "seed": 0})


def test_criterion_workflow_totality_fuzz(tmp_path):
    with criterion("workflow totality, 1000-submission fuzz"):
        threshold = 0.45
        service = WorkflowService(
            tmp_path, load_taxonomy(FUZZ_TAXONOMY), threshold=threshold
        )
        service.register_model(_fuzz_model(), activate=True)
        records_path = tmp_path / RECORDS_FILE

        rng = np.random.default_rng(2026)
        rejected = 0
        for i in range(1, 1001):
            feats = {name: float(rng.uniform(0.0, 1.0)) for name in ("F0", "F1", "F2")}
            sub = ActionSubmission(f"act-{i:04d}", f"user-{i % 37}", feats)
            rec = service.evaluate_action(sub)

            assert rec.record_id == f"r{i:06d}"  # exactly one record per action
            p = 1.0 / (1.0 + math.exp(-(-1.0 + 4.0 * feats["F0"] + feats["F1"])))
            assert abs(rec.probability - p) <= 1e-12
            assert (rec.decision == DECISION_REJECTED) == (rec.probability >= threshold)
            assert (rec.report is not None) == (rec.decision == DECISION_REJECTED)
            rejected += rec.decision == DECISION_REJECTED

            if i % 25 == 0:  # resubmission never yields a second record
                with pytest.raises(DuplicateActionId):
                    service.evaluate_action(sub)
            if i % 100 == 0:  # log only ever grows, one line per action
                lines = records_path.read_text().splitlines()
                assert len(lines) == i

        metrics = service.service_metrics()
        assert metrics["evaluated"] == 1000
        assert metrics["rejected"] == rejected
        assert metrics["rejected"] + metrics["accepted"] == 1000
        assert len(records_path.read_text().splitlines()) == 1000
        assert 0 < rejected < 1000


# ------------------------------------------- imbalanced single-leaf recovery

def test_criterion_imbalanced_single_leaf_recovery():
    with criterion("imbalanced synthetic recovery, 7.4% positive rate"):
        cfg = SynthConfig(n=30000, d=2, true_coeffs=(25.0, 18.0), positive_rate=0.074)
        ds = synth_generate(cfg, seed=100)
        true_b = np.array([25.0, 18.0])
        true_b0 = solve_intercept(ds.X, true_b, 0.074)

        leaf = fit_logitboost(ds.X, ds.y, 600, 100.0)
        assert abs(leaf.coeffs.get(0, 0.0) - 25.0) / 25.0 <= 0.10
        assert abs(leaf.coeffs.get(1, 0.0) - 18.0) / 18.0 <= 0.10
        assert abs(leaf.intercept - true_b0) / abs(true_b0) <= 0.10

        positives = ds.y == 1
        hits = (leaf.logit_rows(ds.X) >= 0.0) & positives
        assert hits.sum() / positives.sum() >= 0.5

        model = train(ds, TrainParams(seed=3))
        assert model.leaf_count() == 1
