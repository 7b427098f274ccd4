"""Run reports: structure, canonical JSON, schema validation and diffing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

SCHEMA_VERSION = 1


@dataclass
class RunReport:
    per_sample: list[dict[str, Any]]
    aggregates: dict[str, Any]
    provenance: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"per_sample": self.per_sample, "aggregates": self.aggregates}


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def canonical(report: dict) -> str:
    """Report serialized without its timestamp, for reproducibility checks."""
    stripped = json.loads(json.dumps(report))
    stripped.get("provenance", {}).pop("timestamp", None)
    return json.dumps(stripped, sort_keys=True, separators=(",", ":"), allow_nan=False)


def load_schema() -> dict:
    return json.loads(resources.files("qdac").joinpath("report.schema.json").read_text(encoding="utf-8"))


class SchemaMismatch(ValueError):
    pass


DIFF_KEYS = ("agreement_rate", "mean_fidelity", "accuracy", "source_only_accuracy", "mean_success_probability")


def diff_reports(a: dict, b: dict) -> list[tuple[str, float, float]]:
    """Aggregate fields that differ between two reports, as ``(key, a, b)``."""
    for name, r in (("first", a), ("second", b)):
        if r.get("schema") != SCHEMA_VERSION:
            raise SchemaMismatch(f"{name} report has schema {r.get('schema')!r}, expected {SCHEMA_VERSION}")
    pa, pb = a.get("pipelines", {}), b.get("pipelines", {})
    if set(pa) != set(pb):
        raise SchemaMismatch(f"pipelines differ: {sorted(pa)} vs {sorted(pb)}")
    out = []
    for name in sorted(pa):
        ga, gb = pa[name]["aggregates"], pb[name]["aggregates"]
        for key in DIFF_KEYS:
            va, vb = ga.get(key), gb.get(key)
            if va is None and vb is None:
                continue
            if va != vb:
                out.append((f"{name}.{key}", va, vb))
    return out


def agreement_regressions(a: dict, b: dict, threshold: float) -> list[str]:
    bad = []
    for name, pipe in a["pipelines"].items():
        va = pipe["aggregates"].get("agreement_rate")
        vb = b["pipelines"][name]["aggregates"].get("agreement_rate")
        if va is not None and vb is not None and va - vb > threshold:
            bad.append(name)
    return bad
