"""Moderation workflow: evaluate submitted actions against the active model,
persist decision records, collect feedback flags, export a feedback-corrected
dataset, and manage model versions.

Persistence is an append-only pair of JSON-lines logs (decisions, feedback)
plus a JSON model registry, all under one log directory.  A single lock
serializes writes; model lookups are immutable snapshots, so evaluation never
blocks on other readers and activation is an atomic swap.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading

import numpy as np
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from .data import Dataset, SchemaMismatch, serialize_csv
from .explain import ExplanationReport, NotViolation, build_report, report_from_dict, \
    report_to_dict
from .lmt import LmtModel, TrainParams, deserialize_model, predict_proba, \
    serialize_model, train
from .taxonomy import Taxonomy

VERDICT_VIOLATION = "flag_as_violation"
VERDICT_NON_VIOLATION = "flag_as_non_violation"
DECISION_REJECTED = "rejected_violation"
DECISION_ACCEPTED = "accepted"

RECORDS_FILE = "records.jsonl"
FEEDBACK_FILE = "feedback.jsonl"
REGISTRY_FILE = "registry.json"
SHADOW_FILE = "shadow_labels.json"
MODELS_DIR = "models"


class ServiceError(ValueError):
    pass


class NoActiveModel(ServiceError):
    pass


class DuplicateActionId(ServiceError):
    pass


class UnknownRecord(ServiceError):
    pass


class DuplicateFlag(ServiceError):
    pass


class BadFilter(ServiceError):
    pass


class UnknownVersion(ServiceError):
    pass


class DegenerateExport(ServiceError):
    """Retraining needs both classes in the exported dataset."""


@dataclass(frozen=True)
class ActionSubmission:
    action_id: str
    actor_id: str
    features: dict
    raw_context: str | None = None

    def __post_init__(self) -> None:
        if not self.action_id or not isinstance(self.action_id, str):
            raise ServiceError("action_id must be a non-empty string")
        if not isinstance(self.actor_id, str):
            raise ServiceError("actor_id must be a string")


@dataclass(frozen=True)
class FeedbackFlag:
    member_id: str
    verdict: str
    comment: str | None = None
    at: str = ""

    def __post_init__(self) -> None:
        if not self.member_id or not isinstance(self.member_id, str):
            raise ServiceError("member_id must be a non-empty string")
        if self.verdict not in (VERDICT_VIOLATION, VERDICT_NON_VIOLATION):
            raise ServiceError(f"verdict must be {VERDICT_VIOLATION!r} or "
                               f"{VERDICT_NON_VIOLATION!r}")


@dataclass(frozen=True)
class DecisionRecord:
    record_id: str
    action: ActionSubmission
    probability: float
    decision: str
    report: ExplanationReport | None
    model_version: str
    threshold: float
    created_at: str
    feedback: tuple[FeedbackFlag, ...] = ()

    @property
    def flagged(self) -> bool:
        return bool(self.feedback)


@dataclass(frozen=True)
class RecordPage:
    records: tuple[DecisionRecord, ...]
    page: int
    page_size: int
    total: int


def record_to_dict(rec: DecisionRecord) -> dict:
    return {
        "record_id": rec.record_id,
        "action": asdict(rec.action),
        "probability": rec.probability,
        "decision": rec.decision,
        "report": report_to_dict(rec.report) if rec.report is not None else None,
        "model_version": rec.model_version,
        "threshold": rec.threshold,
        "created_at": rec.created_at,
        "feedback": [asdict(f) for f in rec.feedback],
    }


def record_from_dict(doc: dict) -> DecisionRecord:
    return DecisionRecord(
        record_id=doc["record_id"],
        action=ActionSubmission(**doc["action"]),
        probability=doc["probability"],
        decision=doc["decision"],
        report=report_from_dict(doc["report"]) if doc["report"] is not None else None,
        model_version=doc["model_version"],
        threshold=doc["threshold"],
        created_at=doc["created_at"],
        feedback=tuple(FeedbackFlag(**f) for f in doc["feedback"]),
    )


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def _parse_when(text: str) -> datetime:
    try:
        when = datetime.fromisoformat(text)
    except ValueError as exc:
        raise BadFilter(f"bad timestamp {text!r}") from exc
    if when.tzinfo is None:
        when = when.replace(tzinfo=timezone.utc)
    return when


class WorkflowService:
    """Single-directory moderation service over an immutable active model."""

    def __init__(self, log_dir: str | Path, taxonomy: Taxonomy,
                 threshold: float = 0.5) -> None:
        if not 0.0 < threshold < 1.0:
            raise ServiceError("threshold must lie in (0, 1)")
        self.log_dir = Path(log_dir)
        self.taxonomy = taxonomy
        self.threshold = threshold
        self._lock = threading.Lock()
        self._records: dict[str, DecisionRecord] = {}
        self._order: list[str] = []          # insertion order of record ids
        self._action_ids: set[str] = set()
        self._registry: dict = {"versions": {}, "active": None}
        self._active: tuple[str, LmtModel] | None = None  # immutable snapshot
        self._seq = 0
        self.log_dir.mkdir(parents=True, exist_ok=True)
        (self.log_dir / MODELS_DIR).mkdir(exist_ok=True)
        self._load()

    # ------------------------------------------------------------- persistence

    def _load(self) -> None:
        reg_path = self.log_dir / REGISTRY_FILE
        if reg_path.exists():
            self._registry = json.loads(reg_path.read_text(encoding="utf-8"))
            active = self._registry.get("active")
            if active is not None:
                self._active = (active, self._load_model(active))
        rec_path = self.log_dir / RECORDS_FILE
        if rec_path.exists():
            with rec_path.open(encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = record_from_dict(json.loads(line))
                    self._records[rec.record_id] = rec
                    self._order.append(rec.record_id)
                    self._action_ids.add(rec.action.action_id)
        self._seq = len(self._order)
        fb_path = self.log_dir / FEEDBACK_FILE
        if fb_path.exists():
            with fb_path.open(encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    doc = json.loads(line)
                    rid = doc.pop("record_id")
                    rec = self._records[rid]
                    self._records[rid] = replace(
                        rec, feedback=rec.feedback + (FeedbackFlag(**doc),))

    def _load_model(self, version: str) -> LmtModel:
        entry = self._registry["versions"].get(version)
        if entry is None:
            raise UnknownVersion(f"no model version {version!r}")
        return deserialize_model(
            (self.log_dir / entry["file"]).read_text(encoding="utf-8"))

    def _append_jsonl(self, filename: str, doc: dict) -> None:
        with (self.log_dir / filename).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(doc) + "\n")

    def _write_registry(self) -> None:
        tmp = self.log_dir / (REGISTRY_FILE + ".tmp")
        tmp.write_text(json.dumps(self._registry, indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, self.log_dir / REGISTRY_FILE)

    # ------------------------------------------------------------ model admin

    def register_model(self, model: LmtModel, params: dict | None = None,
                       dataset_digest: str | None = None,
                       activate: bool = False) -> str:
        """Add a model as the next version; optionally make it active."""
        with self._lock:
            version = f"v{len(self._registry['versions']) + 1}"
            path = f"{MODELS_DIR}/{version}.json"
            (self.log_dir / path).write_text(serialize_model(model) + "\n",
                                             encoding="utf-8")
            self._registry["versions"][version] = {
                "file": path,
                "params": params or {},
                "dataset_digest": dataset_digest,
            }
            if activate:
                self._registry["active"] = version
            self._write_registry()
            if activate:
                self._active = (version, model)
            return version

    def activate(self, version: str) -> str:
        with self._lock:
            model = self._load_model(version)
            self._registry["active"] = version
            self._write_registry()
            self._active = (version, model)
            return version

    def active_version(self) -> str | None:
        snapshot = self._active
        return snapshot[0] if snapshot else None

    # -------------------------------------------------------------- workflow

    def evaluate_action(self, sub: ActionSubmission) -> DecisionRecord:
        """Classify one submission and persist exactly one decision record."""
        snapshot = self._active
        if snapshot is None:
            raise NoActiveModel("no active model version")
        version, model = snapshot
        x = model.schema.vector_from_mapping(sub.features)
        p, _ = predict_proba(model, x)
        if p >= self.threshold:
            decision = DECISION_REJECTED
            report = build_report(model, x, self.taxonomy, threshold=self.threshold)
        else:
            decision = DECISION_ACCEPTED
            report = None
        with self._lock:
            if sub.action_id in self._action_ids:
                raise DuplicateActionId(f"action {sub.action_id!r} already evaluated")
            self._seq += 1
            rec = DecisionRecord(
                record_id=f"r{self._seq:06d}",
                action=sub,
                probability=float(p),
                decision=decision,
                report=report,
                model_version=version,
                threshold=self.threshold,
                created_at=_utcnow(),
            )
            self._append_jsonl(RECORDS_FILE, record_to_dict(rec))
            self._records[rec.record_id] = rec
            self._order.append(rec.record_id)
            self._action_ids.add(sub.action_id)
            return rec

    def get_record(self, record_id: str) -> DecisionRecord:
        rec = self._records.get(record_id)
        if rec is None:
            raise UnknownRecord(f"no record {record_id!r}")
        return rec

    def flag_feedback(self, record_id: str, flag: FeedbackFlag) -> DecisionRecord:
        """Append one member's verdict to a record; everything else is immutable."""
        if not flag.at:
            flag = replace(flag, at=_utcnow())
        with self._lock:
            rec = self._records.get(record_id)
            if rec is None:
                raise UnknownRecord(f"no record {record_id!r}")
            if any(f.member_id == flag.member_id for f in rec.feedback):
                raise DuplicateFlag(f"member {flag.member_id!r} already flagged "
                                    f"{record_id!r}")
            self._append_jsonl(FEEDBACK_FILE, {"record_id": record_id, **asdict(flag)})
            updated = replace(rec, feedback=rec.feedback + (flag,))
            self._records[record_id] = updated
            return updated

    # -------------------------------------------------------------- retraining

    def export_retrain_dataset(self) -> Dataset:
        """All decisions re-labeled where a strict feedback majority disagrees."""
        snapshot = self._active
        if snapshot is None:
            raise NoActiveModel("no active model version")
        schema = snapshot[1].schema
        with self._lock:
            records = [self._records[rid] for rid in self._order]
        rows, labels = [], []
        for rec in records:
            label = 1 if rec.decision == DECISION_REJECTED else 0
            pro = sum(1 for f in rec.feedback if f.verdict == VERDICT_VIOLATION)
            con = sum(1 for f in rec.feedback if f.verdict == VERDICT_NON_VIOLATION)
            if pro > con:
                label = 1
            elif con > pro:
                label = 0
            rows.append(schema.vector_from_mapping(rec.action.features))
            labels.append(label)
        X = np.array(rows, dtype=np.float64) if rows else np.empty((0, schema.n_features))
        return Dataset(schema, X, np.array(labels, dtype=np.int8))

    def retrain(self, params: TrainParams) -> str:
        """Train on the feedback-corrected export and register (not activate) it."""
        ds = self.export_retrain_dataset()
        if len(set(ds.y.tolist())) < 2:
            raise DegenerateExport("export needs both classes to retrain")
        model = train(ds, params)
        digest = hashlib.sha256(serialize_csv(ds).encode("utf-8")).hexdigest()
        return self.register_model(model, params=asdict(params),
                                   dataset_digest=f"sha256:{digest}")

    # ----------------------------------------------------------------- queries

    def list_records(self, decision: str | None = None, flagged: bool | None = None,
                     since: str | None = None, page: int = 0,
                     page_size: int = 50) -> RecordPage:
        """Newest first (created_at desc, record_id desc tiebreak), then paged."""
        if decision is not None and decision not in (DECISION_REJECTED,
                                                     DECISION_ACCEPTED):
            raise BadFilter(f"decision must be {DECISION_REJECTED!r} or "
                            f"{DECISION_ACCEPTED!r}")
        if page < 0 or page_size < 1:
            raise BadFilter("page must be >= 0 and page_size >= 1")
        cutoff = _parse_when(since) if since is not None else None
        with self._lock:
            records = list(self._records.values())
        selected = []
        for rec in records:
            if decision is not None and rec.decision != decision:
                continue
            if flagged is not None and rec.flagged != flagged:
                continue
            if cutoff is not None and _parse_when(rec.created_at) < cutoff:
                continue
            selected.append(rec)
        selected.sort(key=lambda r: (r.created_at, r.record_id), reverse=True)
        start = page * page_size
        return RecordPage(tuple(selected[start:start + page_size]),
                          page, page_size, len(selected))

    def service_metrics(self) -> dict:
        """Counter snapshot plus, when a shadow-label file exists, a live
        confusion matrix of decisions against those labels."""
        with self._lock:
            records = list(self._records.values())
        rejected = sum(1 for r in records if r.decision == DECISION_REJECTED)
        flagged = sum(1 for r in records if r.flagged)
        out = {
            "evaluated": len(records),
            "rejected": rejected,
            "accepted": len(records) - rejected,
            "flagged": flagged,
            "model_version": self.active_version(),
            "threshold": self.threshold,
            "confusion": None,
        }
        shadow_path = self.log_dir / SHADOW_FILE
        if shadow_path.exists():
            shadow = json.loads(shadow_path.read_text(encoding="utf-8"))
            tp = fp = tn = fn = 0
            for rec in records:
                truth = shadow.get(rec.action.action_id)
                if truth is None:
                    continue
                predicted = 1 if rec.decision == DECISION_REJECTED else 0
                truth = int(truth)
                if predicted == 1 and truth == 1:
                    tp += 1
                elif predicted == 1 and truth == 0:
                    fp += 1
                elif truth == 0:
                    tn += 1
                else:
                    fn += 1
            out["confusion"] = {"tp": tp, "fp": fp, "tn": tn, "fn": fn}
        return out
