"""Explanations for violation-classified inputs.

A classified instance lands in one logistic leaf; each nonzero-coefficient
feature contributes coeff*value to the decision.  Positive contributions are
split by 2-means into a "relevant" high group and the rest, and the relevant
features are located in the norm's taxonomy so the report can show where the
violation concentrates.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .cluster import ClusterConfig, split_two_groups
from .data import Dataset, FeatureSchema, SchemaMismatch
from .lmt import LmtModel, LogisticLeafModel, predict_proba
from .taxonomy import Taxonomy, TaxonomyNode, load_taxonomy, subtree, taxonomy_to_dict


class ExplainError(ValueError):
    pass


class NotViolation(ExplainError):
    """Raised when asked to explain an input the model classifies as regular."""


@dataclass(frozen=True)
class Contribution:
    feature: str
    coeff: float
    value: float
    product: float  # coeff * value, the term this feature adds to the logit


@dataclass(frozen=True)
class RelevanceSplit:
    relevant: frozenset
    rest: frozenset
    degenerate: bool = False


@dataclass(frozen=True)
class ExplanationReport:
    probability: float
    intercept: float
    contributions: tuple[Contribution, ...]   # every nonzero-coeff feature, product desc
    relevant: tuple[Contribution, ...]        # the starred high group, product desc
    other_positive: tuple[Contribution, ...]  # positive but below the relevance split
    taxonomy_fragment: Taxonomy
    descriptions: dict                        # feature -> human-readable text
    flags: tuple[str, ...]


def _sorted_by_product(contribs, schema: FeatureSchema):
    return tuple(sorted(contribs,
                        key=lambda c: (-c.product, schema.index_of(c.feature))))


def contributions(leaf: LogisticLeafModel, x, schema: FeatureSchema,
                  ) -> tuple[Contribution, ...]:
    """Per-feature logit terms, one per nonzero coefficient, largest first.

    The intercept is not a feature and is reported separately.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (schema.n_features,):
        raise SchemaMismatch(f"input shape {x.shape}, schema expects "
                             f"({schema.n_features},)")
    if not np.all(np.isfinite(x)):
        raise SchemaMismatch("non-finite input value")
    out = [Contribution(schema.feature_names[j], c, float(x[j]), c * float(x[j]))
           for j, c in sorted(leaf.coeffs.items()) if c != 0.0]
    return _sorted_by_product(out, schema)


def relevant_features(contribs, cfg: ClusterConfig | None = None) -> RelevanceSplit:
    """Split positive contributions into the high (relevant) group and the rest.

    Fewer than two positive contributions cannot be clustered: the whole
    positive set is returned as relevant with the degenerate flag raised,
    because an explanation must never block the decision it explains.
    """
    if not contribs:
        raise ExplainError("need at least one contribution")
    positive = [c for c in contribs if c.product > 0]
    if len(positive) <= 1:
        return RelevanceSplit(frozenset(c.feature for c in positive), frozenset(),
                              degenerate=True)
    split = split_two_groups([(c.feature, c.product) for c in positive], cfg)
    return RelevanceSplit(split.high, split.low, split.degenerate)


def build_report(model: LmtModel, x, taxonomy: Taxonomy,
                 cfg: ClusterConfig | None = None,
                 threshold: float = 0.5) -> ExplanationReport:
    """Compose probability, contributions, relevance split, and taxonomy fragment.

    Deterministic for fixed inputs.  Only violation-classified inputs
    (p >= threshold; ties classify as violation) can be explained; regular ones
    raise NotViolation.
    """
    p, trace = predict_proba(model, x)
    if p < threshold:
        raise NotViolation(f"p={p:.4f} classified regular; nothing to explain")
    contribs = contributions(trace.leaf, x, model.schema)
    split = relevant_features(contribs, cfg) if contribs else \
        RelevanceSplit(frozenset(), frozenset(), degenerate=True)
    relevant = tuple(c for c in contribs if c.feature in split.relevant)
    other_positive = tuple(c for c in contribs
                           if c.product > 0 and c.feature not in split.relevant)
    fragment = subtree(taxonomy, split.relevant)
    leaf_text = _leaf_descriptions(taxonomy)
    descriptions = {c.feature: leaf_text[c.feature]
                    for c in contribs if c.feature in leaf_text}
    flags = ("degenerate_relevance",) if split.degenerate else ()
    return ExplanationReport(
        probability=p,
        intercept=trace.leaf.intercept,
        contributions=contribs,
        relevant=relevant,
        other_positive=other_positive,
        taxonomy_fragment=fragment,
        descriptions=descriptions,
        flags=flags,
    )


def _leaf_descriptions(tax: Taxonomy) -> dict:
    out: dict = {}

    def walk(node: TaxonomyNode) -> None:
        if node.is_leaf:
            if node.feature:
                out[node.feature] = node.description
        else:
            for child in node.children:
                walk(child)

    walk(tax.root)
    return out


def relevance_histogram(model: LmtModel, ds: Dataset, threshold: float = 0.5,
                        cfg: ClusterConfig | None = None) -> dict:
    """Across all violation-classified rows, how often each feature is relevant.

    Every schema feature appears in the result, zero counts included.
    """
    counts = {name: 0 for name in model.schema.feature_names}
    for i in range(ds.X.shape[0]):
        p, trace = predict_proba(model, ds.X[i])
        if p < threshold:
            continue
        contribs = contributions(trace.leaf, ds.X[i], model.schema)
        if not contribs:
            continue
        for feature in relevant_features(contribs, cfg).relevant:
            counts[feature] += 1
    return counts


# ------------------------------------------------------------------- rendering

def report_to_dict(report: ExplanationReport) -> dict:
    return {
        "probability": report.probability,
        "intercept": report.intercept,
        "contributions": [
            {"feature": c.feature, "coeff": c.coeff, "value": c.value,
             "product": c.product}
            for c in report.contributions
        ],
        "relevant": [c.feature for c in report.relevant],
        "other_positive": [c.feature for c in report.other_positive],
        "taxonomy_fragment": taxonomy_to_dict(report.taxonomy_fragment),
        "descriptions": dict(report.descriptions),
        "flags": list(report.flags),
    }


def report_from_dict(doc: dict) -> ExplanationReport:
    contribs = tuple(Contribution(e["feature"], e["coeff"], e["value"], e["product"])
                     for e in doc["contributions"])
    by_name = {c.feature: c for c in contribs}
    return ExplanationReport(
        probability=doc["probability"],
        intercept=doc["intercept"],
        contributions=contribs,
        relevant=tuple(by_name[f] for f in doc["relevant"]),
        other_positive=tuple(by_name[f] for f in doc["other_positive"]),
        taxonomy_fragment=load_taxonomy(json.dumps(doc["taxonomy_fragment"])),
        descriptions=dict(doc["descriptions"]),
        flags=tuple(doc["flags"]),
    )


def render_text(report: ExplanationReport) -> str:
    """Plain-text rendering for the CLI."""
    lines = [f"violation probability: {report.probability:.4f}"]
    logit = report.intercept + math.fsum(c.product for c in report.contributions)
    lines.append(f"decision score: {logit:+.4f} (intercept {report.intercept:+.4f})")
    if report.flags:
        lines.append(f"flags: {', '.join(report.flags)}")
    lines.append("most relevant features:")
    if not report.relevant:
        lines.append("  (none)")
    for c in report.relevant:
        text = report.descriptions.get(c.feature, "")
        lines.append(f"  * {c.feature}  contribution {c.product:+.4f}  {text}")
    if report.other_positive:
        lines.append("other contributing features:")
        for c in report.other_positive:
            lines.append(f"    {c.feature}  contribution {c.product:+.4f}")
    negatives = [c for c in report.contributions if c.product < 0]
    if negatives:
        lines.append("mitigating features:")
        for c in negatives:
            lines.append(f"    {c.feature}  contribution {c.product:+.4f}")
    lines.append("where the violation concentrates:")
    lines.extend(_render_tree(report.taxonomy_fragment.root, 1))
    return "\n".join(lines)


def _render_tree(node: TaxonomyNode, depth: int) -> list:
    pad = "  " * depth
    if node.is_leaf and node.feature:
        return [f"{pad}{node.name} [{node.feature}]: {node.description}"]
    lines = [f"{pad}{node.name}"]
    for child in node.children:
        lines.extend(_render_tree(child, depth + 1))
    return lines
