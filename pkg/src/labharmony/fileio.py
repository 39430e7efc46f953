"""CSV/JSONL readers and writers for the documented file formats.

Reference records: CSV with header
``id,test,sample,unit,labcode,preferred_unit,conversion_factor,synonyms``
(synonyms ``|``-separated). Queries: CSV ``test,sample,unit`` with
optional ``code_hint`` and ``frequency`` columns; query ids are assigned
``q000001...`` in row order. Gold labels: CSV ``query_id,record_id``.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import FileError, ParseError
from .types import QueryRecord, ReferenceRecord, Triad

REFERENCE_HEADER = ["id", "test", "sample", "unit", "labcode",
                    "preferred_unit", "conversion_factor", "synonyms"]
QUERY_HEADER = ["test", "sample", "unit", "code_hint", "frequency"]


def query_id(row_number: int) -> str:
    """Stable query id for the 1-based row number of a query file."""
    return f"q{row_number:06d}"


def write_reference_csv(path, records: list[ReferenceRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(REFERENCE_HEADER)
        for r in records:
            writer.writerow([
                r.id, r.triad.test, r.triad.sample, r.triad.unit,
                r.labcode, r.preferred_unit, repr(r.conversion_factor),
                "|".join(r.synonyms),
            ])


def read_reference_csv(path) -> list[ReferenceRecord]:
    path = Path(path)
    if not path.exists():
        raise FileError(f"reference file {path} does not exist")
    records = []
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        missing = set(REFERENCE_HEADER) - set(reader.fieldnames or ())
        if missing:
            raise ParseError(f"reference CSV missing columns {sorted(missing)}")
        for i, row in enumerate(reader, start=2):
            try:
                records.append(ReferenceRecord(
                    id=row["id"],
                    triad=Triad(row["test"], row["sample"], row["unit"]),
                    labcode=row["labcode"],
                    preferred_unit=row["preferred_unit"],
                    conversion_factor=float(row["conversion_factor"] or 1.0),
                    synonyms=tuple(s for s in (row["synonyms"] or "").split("|") if s),
                ))
            except (ValueError, KeyError) as exc:
                raise ParseError(f"{path}:{i}: {exc}") from exc
    return records


def write_queries_csv(path, queries: list[QueryRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(QUERY_HEADER)
        for q in queries:
            writer.writerow([
                q.triad.test, q.triad.sample, q.triad.unit,
                q.code_hint or "", q.frequency,
            ])


def read_query_rows(path) -> list[dict]:
    """Raw query rows (strings, unvalidated) with their assigned ids."""
    path = Path(path)
    if not path.exists():
        raise FileError(f"query file {path} does not exist")
    rows = []
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        required = {"test", "sample", "unit"}
        missing = required - set(reader.fieldnames or ())
        if missing:
            raise ParseError(f"query CSV missing columns {sorted(missing)}")
        for i, row in enumerate(reader, start=1):
            row = dict(row)
            row["query_id"] = query_id(i)
            rows.append(row)
    return rows


def write_gold_csv(path, gold: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["query_id", "record_id"])
        for qid in sorted(gold):
            writer.writerow([qid, gold[qid]])


def read_gold_csv(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise FileError(f"gold file {path} does not exist")
    gold = {}
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            gold[row["query_id"]] = row["record_id"]
    return gold


def write_jsonl(path, objects) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as handle:
        for obj in objects:
            handle.write(json.dumps(obj, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_jsonl(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FileError(f"file {path} does not exist")
    out = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return out


def read_runs_jsonl(path) -> dict[str, list[str]]:
    """Ranked-run file: one object per query with its candidate id list."""
    runs = {}
    for obj in read_jsonl(path):
        qid = obj.get("query_id")
        if qid is None:
            raise ParseError(f"run line missing query_id: {obj}")
        if "candidates" in obj:
            runs[qid] = [c["id"] for c in obj["candidates"]]
        else:
            runs[qid] = list(obj.get("ranked_ids", []))
    return runs
