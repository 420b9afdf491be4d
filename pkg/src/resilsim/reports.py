"""Machine-readable report emission.

Two formats, both versioned:

* csv: a ``# resilsim schema_version=1 kind=<kind>`` comment line followed
  by a standard CSV table;
* structured: a JSON document with ``schema_version`` and ``kind`` fields.

Writers are deterministic byte-for-byte for identical inputs: fixed field
order, shortest-round-trip float formatting, sorted JSON keys, and no
timestamps.  Reports are written only after the computation has finished,
so failed runs leave no partial files.
"""

from __future__ import annotations

import csv
import io
import json
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import jsonschema

SCHEMA_VERSION = 1

FORMAT_CSV = "csv"
FORMAT_STRUCTURED = "structured"
FORMATS = (FORMAT_CSV, FORMAT_STRUCTURED)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(kind: str, fieldnames: Sequence[str], rows: Sequence[Mapping]) -> str:
    buf = io.StringIO()
    buf.write(f"# resilsim schema_version={SCHEMA_VERSION} kind={kind}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fieldnames)
    for row in rows:
        writer.writerow([_cell(row.get(name)) for name in fieldnames])
    return buf.getvalue()


def render_structured(kind: str, payload: Mapping) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind}
    doc.update(payload)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_csv_report(text: str) -> tuple[dict, list[dict]]:
    """Re-parse an emitted CSV report; returns (header meta, rows)."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# resilsim "):
        raise ValueError("missing resilsim report header line")
    meta = {}
    for item in lines[0][len("# resilsim ") :].split():
        key, _, value = item.partition("=")
        meta[key] = value
    if meta.get("schema_version") != str(SCHEMA_VERSION):
        raise ValueError(f"unsupported report schema_version {meta.get('schema_version')!r}")
    reader = csv.DictReader(io.StringIO("\n".join(lines[1:])))
    return meta, list(reader)


@lru_cache(maxsize=1)
def report_schema() -> dict:
    """The published structured-report envelope schema."""
    text = resources.files("resilsim").joinpath("schemas/report.schema.json").read_text()
    return json.loads(text)


def parse_structured_report(text: str) -> dict:
    doc = json.loads(text)
    try:
        jsonschema.validate(doc, report_schema())
    except jsonschema.ValidationError as exc:
        raise ValueError(f"unsupported structured report: {exc.message}") from exc
    return doc


def write_report(
    directory: str | Path,
    name: str,
    kind: str,
    fieldnames: Sequence[str],
    rows: Sequence[Mapping],
    fmt: str,
    structured_payload: Mapping | None = None,
) -> Path:
    """Write one report in the chosen format; returns the file path.

    For the structured format the payload defaults to {"rows": rows}.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if fmt == FORMAT_CSV:
        path = directory / f"{name}.csv"
        path.write_text(render_csv(kind, fieldnames, rows))
    elif fmt == FORMAT_STRUCTURED:
        path = directory / f"{name}.json"
        payload = structured_payload if structured_payload is not None else {"rows": [dict(r) for r in rows]}
        path.write_text(render_structured(kind, payload))
    else:
        raise ValueError(f"unknown report format {fmt!r}; want one of {FORMATS}")
    return path


def write_manifest(directory: str | Path, name: str, payload: Mapping) -> Path:
    """Write the run manifest (always structured JSON)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{name}.json"
    path.write_text(render_structured("manifest", payload))
    return path
