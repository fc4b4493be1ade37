#!/usr/bin/env python3
"""Regenerate the worked-example fixtures shipped inside the package.

The demonstration leaf model is pinned so that its eight nonzero coefficients
multiplied by the demonstration action's feature values reproduce the
documented contribution totals exactly in float64; the three top contributions
form the starred relevant group and the golden taxonomy fragment.

Idempotent: running it twice leaves the files byte-identical.
"""
from __future__ import annotations

import json
import tempfile
from pathlib import Path

from fnvd.data import FeatureSchema
from fnvd.lmt import LmtModel, LogisticLeafModel, Node, serialize_model
from fnvd.service import (
    VERDICT_VIOLATION,
    ActionSubmission,
    FeedbackFlag,
    WorkflowService,
    record_to_dict,
)
from fnvd.taxonomy import subtree, taxonomy_to_dict, wikipedia_taxonomy

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "src" / "fnvd" / "fixtures"
UI_FIXTURES = ROOT / "frontend" / "tests" / "fixtures"

# (feature, contribution total, feature value); coefficient = total / value.
PINNED_CONTRIBUTIONS = [
    ("WT_NO_DELAY", 1.08254896, 0.731452),
    ("HIST_REP_COUNTRY", 0.899847, 0.155146),
    ("LANG_ALL_ALPHA", 0.7261543, 0.615385),
    ("HASH_REC_DIVERSITY", 0.15714292, 0.25),
    ("WT_DELAYED", 0.12748878, 0.5),
    ("LANG_ALL_CHAR_REP", 0.12, 0.4),
    ("HIST_REP_ARTICLE", 0.093548, 0.2),
]
# One mitigating feature so reports exercise the negative branch.
NEGATIVE_FEATURE = ("COMM_LEN", -0.8, 0.12)
INTERCEPT = -1.25
STARRED = ["WT_NO_DELAY", "HIST_REP_COUNTRY", "LANG_ALL_ALPHA"]


def main() -> None:
    tax = wikipedia_taxonomy()
    features = tax.leaf_features()
    schema = FeatureSchema(features, "class", "vandalism", "regular")

    coeffs = {schema.index_of(f): total / value
              for f, total, value in PINNED_CONTRIBUTIONS}
    name, coeff, _ = NEGATIVE_FEATURE
    coeffs[schema.index_of(name)] = coeff
    leaf = LogisticLeafModel(INTERCEPT, dict(sorted(coeffs.items())))
    model = LmtModel(schema, Node(leaf),
                     {"origin": "hand-built demonstration leaf",
                      "boost_iters": 0, "seed": 0})
    (FIXTURES / "example_leaf_model.json").write_text(
        serialize_model(model) + "\n", encoding="utf-8")

    values = {f: 0.0 for f in features}
    for f, _, value in PINNED_CONTRIBUTIONS:
        values[f] = value
    values[NEGATIVE_FEATURE[0]] = NEGATIVE_FEATURE[2]
    values["USER_IS_IP"] = 1.0
    action = {
        "action_id": "wp-2026-000001",
        "actor_id": "203.0.113.42",
        "raw_context": "u r dumb!!",
        "features": values,
    }
    (FIXTURES / "example_action.json").write_text(
        json.dumps(action, indent=2) + "\n", encoding="utf-8")

    golden = taxonomy_to_dict(subtree(tax, set(STARRED)))
    (FIXTURES / "golden_relevant_subtree.json").write_text(
        json.dumps(golden, indent=2) + "\n", encoding="utf-8")

    # Replay the action through a throwaway service so the review UI gets a
    # decision record exactly as GET /records/{id} would return it; the two
    # wall-clock stamps are frozen to keep the fixture byte-stable.
    with tempfile.TemporaryDirectory() as tmp:
        service = WorkflowService(Path(tmp), tax)
        service.register_model(model, activate=True)
        record = service.evaluate_action(ActionSubmission(**action))
        record = service.flag_feedback(
            record.record_id,
            FeedbackFlag("moderator-7", VERDICT_VIOLATION,
                         comment="clear insult, no sources touched"))
        doc = record_to_dict(record)
    doc["created_at"] = "2026-08-14T12:00:00+00:00"
    doc["feedback"][0]["at"] = "2026-08-14T12:05:00+00:00"
    UI_FIXTURES.mkdir(parents=True, exist_ok=True)
    (UI_FIXTURES / "example_decision_record.json").write_text(
        json.dumps(doc, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
