"""The analysis bundle: one JSON document holding every result the UI
and exporters consume.

Serialization is deterministic (sorted keys, shortest round-trip float
formatting) and forward-compatible: unknown top-level fields survive a
read/write cycle untouched.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["SchemaVersionMismatchError", "BundleIoError", "AnalysisBundle", "write_bundle", "read_bundle"]

SCHEMA_VERSION = "gxestat-bundle/1"


class SchemaVersionMismatchError(ValueError):
    pass


class BundleIoError(IOError):
    def __init__(self, message, byte_offset=None):
        super().__init__(message)
        self.byte_offset = byte_offset


@dataclass
class AnalysisBundle:
    dataset_summary: dict
    significance: dict
    stability: dict
    ammi: dict
    gge: dict
    version: str = SCHEMA_VERSION
    extra: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        doc = {
            "version": self.version,
            "dataset_summary": self.dataset_summary,
            "significance": self.significance,
            "stability": self.stability,
            "ammi": self.ammi,
            "gge": self.gge,
        }
        doc.update(self.extra)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json_dict(cls, doc: dict) -> "AnalysisBundle":
        version = doc.get("version")
        if version != SCHEMA_VERSION:
            raise SchemaVersionMismatchError(f"expected {SCHEMA_VERSION}, found {version!r}")
        known = {"version", "dataset_summary", "significance", "stability", "ammi", "gge"}
        return cls(
            dataset_summary=doc.get("dataset_summary", {}),
            significance=doc.get("significance", {}),
            stability=doc.get("stability", {}),
            ammi=doc.get("ammi", {}),
            gge=doc.get("gge", {}),
            version=version,
            extra={k: v for k, v in doc.items() if k not in known},
        )


def write_bundle(bundle: AnalysisBundle, path) -> None:
    Path(path).write_text(bundle.to_json(), encoding="utf-8")


def read_bundle(path) -> AnalysisBundle:
    raw = Path(path).read_bytes()
    try:
        doc = json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as e:
        raise BundleIoError(f"not valid JSON at byte {e.pos}: {e.msg}", byte_offset=e.pos) from None
    except UnicodeDecodeError as e:
        raise BundleIoError(f"not UTF-8 at byte {e.start}", byte_offset=e.start) from None
    if not isinstance(doc, dict):
        raise BundleIoError("bundle root must be a JSON object")
    return AnalysisBundle.from_json_dict(doc)
