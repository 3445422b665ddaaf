"""JSONL transcripts, aggregate CSV rows and transcript verification."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from ..dialogue import SessionTranscript, decode
from ..qubit import BellOutcome, PrepBasis

ANNOUNCEMENT_LABELS = [o.label for o in BellOutcome]

_BIT = {"type": "integer", "enum": [0, 1]}
_GUESS = {"oneOf": [_BIT, {"type": "null"}]}

TRANSCRIPT_SCHEMA = {
    "type": "object",
    "properties": {
        "round": {"type": "integer", "minimum": 0},
        "a": _BIT,
        "a_prime": _BIT,
        "b": _BIT,
        "announcement": {"type": "string", "enum": ANNOUNCEMENT_LABELS},
        "kept": {"type": "boolean"},
        "g_a": _GUESS,
        "g_b": _GUESS,
        "revealed": {"type": "boolean"},
    },
    "required": ["round", "a", "a_prime", "b", "announcement", "kept", "g_a", "g_b", "revealed"],
    "additionalProperties": False,
}

DIALOGUE_CSV_COLUMNS = [
    "seed",
    "m",
    "kept_count",
    "revealed_count",
    "observed_qber",
    "nu",
    "aborted",
    "guess_error_rate",
    "leak_bits_expected",
]

LEAKAGE_CSV_COLUMNS = [
    "announcement",
    "posterior00",
    "posterior01",
    "posterior10",
    "posterior11",
    "entropy_bits",
    "leak_bits",
    "kept",
]


def transcript_lines(t: SessionTranscript):
    """Yield one JSON-ready dict per round, in round order."""
    a = t.a.tolist()
    ap = t.a_prime.tolist()
    b = t.b.tolist()
    ann = t.announcements.tolist()
    kept = t.kept.tolist()
    ga = t.g_a.tolist()
    gb = t.g_b.tolist()
    rev = t.revealed.tolist()
    for j in range(t.m):
        yield {
            "round": j,
            "a": a[j],
            "a_prime": ap[j],
            "b": b[j],
            "announcement": ANNOUNCEMENT_LABELS[ann[j]],
            "kept": kept[j],
            "g_a": ga[j] if kept[j] else None,
            "g_b": gb[j] if kept[j] else None,
            "revealed": rev[j],
        }


def write_jsonl(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for rec in records:
            f.write(json.dumps(rec, separators=(",", ":")))
            f.write("\n")


def write_transcript(path: Path, t: SessionTranscript) -> None:
    write_jsonl(path, transcript_lines(t))


def read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(row[c]) for c in columns])


@dataclass
class VerifyReport:
    rounds: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_records(
    records: list[dict],
    *,
    restricted: bool | None = None,
    gamma: float | None = None,
    m: int | None = None,
    max_violations: int = 50,
) -> VerifyReport:
    """Re-check a transcript's structural invariants.

    Checks the schema, the sifting rule, that guesses exist exactly on kept
    rounds and equal what each party decodes from its own bit, and that only
    kept rounds are revealed.  ``restricted=None`` infers the analyzer mode
    from the presence of inconclusive announcements.
    """
    rep = VerifyReport(rounds=len(records))

    def fail(msg):
        if len(rep.violations) < max_violations:
            rep.violations.append(msg)

    validator = jsonschema.Draft7Validator(TRANSCRIPT_SCHEMA)
    valid = []
    for i, rec in enumerate(records):
        errs = list(validator.iter_errors(rec))
        if errs:
            fail(f"line {i + 1}: schema: {errs[0].message}")
        else:
            valid.append(rec)
    if restricted is None:
        restricted = any(r["announcement"] == "inconclusive" for r in valid)
    kept_labels = {"psi+"} if restricted else {"phi-", "psi+"}

    for i, rec in enumerate(valid):
        where = f"round {rec['round']}"
        if rec["round"] != i:
            fail(f"{where}: out of order (expected {i})")
        if rec["announcement"] == "inconclusive" and not restricted:
            fail(f"{where}: inconclusive announcement outside restricted-analyzer mode")
        expect_kept = rec["announcement"] in kept_labels
        if rec["kept"] != expect_kept:
            fail(f"{where}: kept={rec['kept']} but announcement is {rec['announcement']}")
        if rec["kept"]:
            if rec["g_a"] is None or rec["g_b"] is None:
                fail(f"{where}: kept round without guesses")
                continue
            ann = BellOutcome.from_label(rec["announcement"])
            basis = PrepBasis(rec["b"])
            if rec["g_a"] != decode(rec["a"], basis, ann):
                fail(f"{where}: g_a does not match Alice's decoding")
            if rec["g_b"] != decode(rec["a_prime"], basis, ann):
                fail(f"{where}: g_b does not match Bob's decoding")
        else:
            if rec["g_a"] is not None or rec["g_b"] is not None:
                fail(f"{where}: discarded round carries guesses")
            if rec["revealed"]:
                fail(f"{where}: discarded round marked revealed")

    if m is not None and len(records) != m:
        fail(f"round count {len(records)} != m = {m}")
    if gamma is not None and len(valid) == len(records):
        kept = sum(r["kept"] for r in valid)
        revealed = sum(r["revealed"] for r in valid)
        if revealed != math.floor(gamma * kept):
            fail(f"revealed {revealed} != floor(gamma * kept) = {math.floor(gamma * kept)}")
    return rep
