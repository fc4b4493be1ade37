"""Feature taxonomy: a rooted tree of named groups whose leaves carry feature
identifiers and human-readable descriptions; supports validation against a
feature schema and minimal-subtree extraction for explanations."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from .data import FeatureSchema


class TaxonomyError(ValueError):
    pass


class Malformed(TaxonomyError):
    pass


class DuplicateFeature(TaxonomyError):
    pass


class InternalNodeWithFeature(TaxonomyError):
    pass


class UnknownFeature(TaxonomyError):
    pass


@dataclass(frozen=True)
class TaxonomyNode:
    name: str
    description: str
    children: tuple["TaxonomyNode", ...] = ()
    feature: str | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class Taxonomy:
    norm: str
    root: TaxonomyNode
    comments: dict = field(default_factory=dict, compare=False)

    def leaf_features(self) -> tuple[str, ...]:
        """All feature names in depth-first leaf order."""
        out: list[str] = []

        def walk(node: TaxonomyNode) -> None:
            if node.is_leaf:
                if node.feature:
                    out.append(node.feature)
            else:
                for child in node.children:
                    walk(child)

        walk(self.root)
        return tuple(out)


def _node_from_dict(doc: dict, path: str, seen_features: set) -> TaxonomyNode:
    if not isinstance(doc, dict):
        raise Malformed(f"node at {path} is not an object")
    name = doc.get("name")
    if not name or not isinstance(name, str):
        raise Malformed(f"node at {path} lacks a name")
    description = doc.get("description", "")
    if not isinstance(description, str):
        raise Malformed(f"node {name!r} has a non-string description")
    children_doc = doc.get("children")
    feature = doc.get("feature")
    if children_doc:
        if feature is not None:
            raise InternalNodeWithFeature(f"group {name!r} also declares feature {feature!r}")
        if not isinstance(children_doc, list):
            raise Malformed(f"children of {name!r} is not a list")
        children = tuple(_node_from_dict(c, f"{path}/{name}", seen_features)
                         for c in children_doc)
        names = [c.name for c in children]
        if len(set(names)) != len(names):
            raise Malformed(f"duplicate child names under {name!r}")
        return TaxonomyNode(name, description, children)
    if feature is None:
        raise Malformed(f"leaf {name!r} declares no feature")
    if not isinstance(feature, str):
        raise Malformed(f"feature of {name!r} is not a string")
    if feature in seen_features:
        raise DuplicateFeature(f"feature {feature!r} appears in more than one leaf")
    seen_features.add(feature)
    return TaxonomyNode(name, description, feature=feature)


def load_taxonomy(text: str) -> Taxonomy:
    """Parse and validate a taxonomy JSON document: {norm, root, comments?}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise Malformed(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "root" not in doc:
        raise Malformed("document must be an object with a 'root' node")
    norm = doc.get("norm", "")
    if not isinstance(norm, str):
        raise Malformed("'norm' must be a string")
    comments = doc.get("comments", {})
    if not isinstance(comments, dict):
        raise Malformed("'comments' must be an object")
    root = _node_from_dict(doc["root"], "", set())
    return Taxonomy(norm, root, comments)


def taxonomy_to_dict(tax: Taxonomy) -> dict:
    def node_dict(node: TaxonomyNode) -> dict:
        out: dict = {"name": node.name, "description": node.description}
        if node.is_leaf:
            out["feature"] = node.feature
        else:
            out["children"] = [node_dict(c) for c in node.children]
        return out

    doc: dict = {"norm": tax.norm, "root": node_dict(tax.root)}
    if tax.comments:
        doc["comments"] = tax.comments
    return doc


@dataclass(frozen=True)
class Issue:
    kind: str  # "missing_feature" | "unknown_feature"
    feature: str


def validate_against(tax: Taxonomy, schema: FeatureSchema) -> list[Issue]:
    """Empty result iff taxonomy leaves and schema features cover each other exactly."""
    tax_features = set(tax.leaf_features())
    schema_features = set(schema.feature_names)
    issues = [Issue("missing_feature", f) for f in sorted(schema_features - tax_features)]
    issues += [Issue("unknown_feature", f) for f in sorted(tax_features - schema_features)]
    return issues


def subtree(tax: Taxonomy, features) -> Taxonomy:
    """Minimal subtree containing the root and every path to a requested leaf.

    Child order and descriptions are preserved.  Unknown feature names error.
    """
    wanted = set(features)
    unknown = wanted - set(tax.leaf_features())
    if unknown:
        raise UnknownFeature(f"not in taxonomy: {sorted(unknown)}")

    def filter_node(node: TaxonomyNode) -> TaxonomyNode | None:
        if node.is_leaf:
            return node if node.feature in wanted else None
        kept = tuple(c for c in (filter_node(child) for child in node.children)
                     if c is not None)
        if not kept:
            return None
        return TaxonomyNode(node.name, node.description, kept)

    root = filter_node(tax.root)
    if root is None:  # empty request: minimality leaves just the bare root
        root = TaxonomyNode(tax.root.name, tax.root.description)
    return Taxonomy(tax.norm, root)


def wikipedia_taxonomy() -> Taxonomy:
    """The packaged 61-feature Wikipedia "no vandalism" taxonomy."""
    path = resources.files("fnvd").joinpath("fixtures/wikipedia_taxonomy.json")
    return load_taxonomy(path.read_text(encoding="utf-8"))
