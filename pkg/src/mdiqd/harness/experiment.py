"""Batch runner: fan seeds out, collect results in seed order, write artifacts."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path

import numpy as np

from ..adversary import (
    eve_information_bound,
    empirical_mutual_information,
    leakage_table,
    mdiqd_announcement_entropy,
    nguyen_simulate_and_leak,
)
from ..bb84 import (
    run_bb84,
    secure_key_length,
    secure_key_length_raw,
    secure_length_at_security_rate,
)
from ..dialogue import run_dialogue
from ..qubit import CONCLUSIVE, make_rng
from .config import ExperimentConfig
from .cost import cost_compare, expand_keystream
from .transcript_io import (
    DIALOGUE_CSV_COLUMNS,
    LEAKAGE_CSV_COLUMNS,
    transcript_lines,
    verify_records,
    write_csv,
    write_jsonl,
)

log = logging.getLogger(__name__)

BB84_CSV_COLUMNS = [
    "seed",
    "n_signals",
    "eve",
    "sifted_count",
    "sample_count",
    "observed_qber",
    "secure_length",
    "aborted",
    "eve_key_information",
]


@dataclass
class ExperimentResult:
    exit_status: int
    artifacts: list[Path] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)


@dataclass
class SessionResult:
    seed: int
    row: dict
    records: list[dict]
    violations: list[str]


# ---------------------------------------------------------------------------
# per-seed sessions (module level so a process pool can pickle them)


def _shared_key(cfg: ExperimentConfig, rng: np.random.Generator):
    """Key ``b`` for the dialogue, or ``None`` when key establishment aborted."""
    m = cfg.dialogue.m
    if cfg.dialogue.key_source == "uniform":
        return rng.integers(0, 2, m, dtype=np.int8)
    out = run_bb84(cfg.bb84, rng)
    if out.aborted or out.secure_length_l == 0:
        return None
    if out.secure_length_l >= m:
        return out.key[:m].astype(np.int8)
    # short key: use it as a seed and stretch it
    return expand_keystream(out.key, m).astype(np.int8)


def dialogue_session(cfg: ExperimentConfig, seed: int) -> SessionResult:
    dc = cfg.dialogue
    params = dc.security_params()
    rng = make_rng(seed)
    b = _shared_key(cfg, rng)
    if b is None:
        row = {
            "seed": seed, "m": dc.m, "kept_count": 0, "revealed_count": 0,
            "observed_qber": 0.0, "nu": params.nu, "aborted": True,
            "guess_error_rate": 0.0, "leak_bits_expected": 0.0,
        }
        return SessionResult(seed, row, [], [])

    a = rng.integers(0, 2, dc.m, dtype=np.int8)
    a_prime = rng.integers(0, 2, dc.m, dtype=np.int8)
    utp = dc.strategy()
    t = run_dialogue(b, a, a_prime, params, utp, dc.p_flip, rng)

    announcement_leak = float(
        mdiqd_announcement_entropy(kept_only=True, restricted=utp.restricted).expected_leak_bits
    )
    q = min(t.observed_qber, 1.0)
    noise_leak = eve_information_bound(q, min(t.nu, 1.0 - q)).mutual_information_bound
    row = {
        "seed": seed,
        "m": t.m,
        "kept_count": t.kept_count,
        "revealed_count": t.revealed_count,
        "observed_qber": t.observed_qber,
        "nu": t.nu,
        "aborted": t.aborted,
        "guess_error_rate": t.guess_error_rate,
        "leak_bits_expected": announcement_leak + noise_leak,
    }
    records = list(transcript_lines(t))
    rep = verify_records(records, restricted=utp.restricted, gamma=params.gamma, m=params.m)
    return SessionResult(seed, row, records, [f"seed {seed}: {v}" for v in rep.violations])


def bb84_session(cfg: ExperimentConfig, seed: int) -> SessionResult:
    bc = cfg.bb84
    out = run_bb84(bc, make_rng(seed))
    violations = []
    if out.sifted_bits_alice.size != out.sifted_bits_bob.size:
        violations.append("sifted strings differ in length")
    if out.aborted and out.secure_length_l != 0:
        violations.append("aborted session reports a key")
    if bc.eve_strategy == "none" and bc.p_flip_channel == 0.0:
        if not np.array_equal(out.sifted_bits_alice, out.sifted_bits_bob) or out.aborted:
            violations.append("noiseless honest run produced errors")

    eve_bits = out.eve_guesses_on_key
    eve_info = empirical_mutual_information(out.key, eve_bits) if eve_bits.size else 0.0
    eve_bases = out.eve_bases
    records = []
    for j in range(bc.n_signals):
        records.append({
            "signal": j,
            "alice_bit": int(out.alice_bits[j]),
            "alice_basis": int(out.alice_bases[j]),
            "eve_basis": None if eve_bases is None else int(eve_bases[j]),
            "bob_basis": int(out.bob_bases[j]),
            "bob_bit": int(out.bob_bits[j]),
            "sifted": bool(out.sifted_mask[j]),
        })
    row = {
        "seed": seed,
        "n_signals": bc.n_signals,
        "eve": bc.eve_strategy,
        "sifted_count": out.sifted_count,
        "sample_count": out.sample_count,
        "observed_qber": out.observed_qber,
        "secure_length": out.secure_length_l,
        "aborted": out.aborted,
        "eve_key_information": eve_info,
    }
    return SessionResult(seed, row, records, [f"seed {seed}: {v}" for v in violations])


def _fan_out(fn, cfg: ExperimentConfig) -> list[SessionResult]:
    job = partial(fn, cfg)
    if cfg.workers == 1 or len(cfg.seeds) == 1:
        return [job(s) for s in cfg.seeds]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        # map() yields in submission order, so output order is seed order
        return list(pool.map(job, cfg.seeds))


# ---------------------------------------------------------------------------
# modes


def _run_sessions(cfg: ExperimentConfig, out: Path, fn, prefix: str, columns) -> ExperimentResult:
    results = _fan_out(fn, cfg)
    res = ExperimentResult(0)
    for r in results:
        path = out / f"{prefix}_seed{r.seed}.jsonl"
        write_jsonl(path, r.records)
        res.artifacts.append(path)
        res.violations.extend(r.violations)
    agg = out / f"{cfg.mode}_aggregate.csv"
    write_csv(agg, columns, [r.row for r in results])
    res.artifacts.append(agg)
    aborted = [bool(r.row["aborted"]) for r in results]
    qbers = [float(r.row["observed_qber"]) for r in results]
    res.summary = {
        "mode": cfg.mode,
        "sessions": len(results),
        "abort_rate": sum(aborted) / len(aborted),
        "mean_observed_qber": sum(qbers) / len(qbers),
    }
    return res


def _run_leakage(cfg: ExperimentConfig, out: Path) -> ExperimentResult:
    res = ExperimentResult(0)
    rows, stream = [], []
    for r in leakage_table():
        post = {f"posterior{a}{b}": float(r.posterior[(a, b)]) for a in (0, 1) for b in (0, 1)}
        if abs(sum(post.values()) - 1.0) > 1e-12:
            res.violations.append(f"{r.outcome.label}: posterior does not sum to 1")
        if r.kept and r.leak_bits != 0:
            res.violations.append(f"{r.outcome.label}: kept announcement leaks {r.leak_bits}")
        row = {
            "announcement": r.outcome.label,
            **post,
            "entropy_bits": float(r.entropy_bits),
            "leak_bits": float(r.leak_bits),
            "kept": r.kept,
        }
        rows.append(row)
        stream.append({"protocol": "mdi-qd", **row})
    for seed in cfg.seeds:
        rep = nguyen_simulate_and_leak(cfg.dialogue.m, make_rng(seed))
        for o in CONCLUSIVE:
            stream.append({
                "protocol": "nguyen",
                "seed": seed,
                "announcement": o.label,
                "entropy_bits": float(rep.per_announcement_entropy[o]),
                "leak_bits": float(rep.message_bits - rep.per_announcement_entropy[o]),
                "empirical_frequency": rep.empirical_frequency[o],
            })
    csv_path = out / "leakage.csv"
    jsonl_path = out / "leakage.jsonl"
    write_csv(csv_path, LEAKAGE_CSV_COLUMNS, rows)
    write_jsonl(jsonl_path, stream)
    res.artifacts += [csv_path, jsonl_path]
    res.summary = {
        "mode": "leakage",
        "kept_expected_leak_bits": float(mdiqd_announcement_entropy(kept_only=True).expected_leak_bits),
        "all_expected_leak_bits": float(mdiqd_announcement_entropy().expected_leak_bits),
    }
    return res


def _run_keylen(cfg: ExperimentConfig, out: Path) -> ExperimentResult:
    kc = cfg.keylen
    p = kc.params()
    if kc.eps_per_bit is None:
        length = secure_key_length(p)
    else:
        length = secure_length_at_security_rate(
            kc.n, kc.k, kc.qber, kc.eps_per_bit,
            q=kc.source_quality, eps_Q=kc.eps_Q, f_EC=kc.f_EC,
        )
    row = {
        "n": kc.n,
        "k": kc.k,
        "qber": kc.qber,
        "mu": p.mu,
        "leak_ec": p.leak_EC,
        "bound": secure_key_length_raw(p),
        "secure_length": length,
        "rate": length / kc.n,
        "aborted": length == 0,
    }
    path = out / "keylen.csv"
    write_csv(path, list(row), [row])
    return ExperimentResult(0, [path], {"mode": "keylen", "secure_length": length})


def _run_cost(cfg: ExperimentConfig, out: Path) -> ExperimentResult:
    q = cfg.cost
    rep = cost_compare(q).as_dict()
    row = {
        "security_bits": q.security_bits,
        "dialogue_uses": q.dialogue_uses,
        "rate": q.rate,
        "qber": q.qber,
        **rep,
    }
    path = out / "cost.csv"
    write_csv(path, list(row), [row])
    res = ExperimentResult(0, [path], {"mode": "cost", **rep})
    if q.dialogue_uses > 2 * q.security_bits and any(
        rep[f"seed_{s}"] > rep[f"direct_{s}"]
        for s in ("naive_qubits", "finite_raw_bits", "finite_qubits")
    ):
        res.violations.append("seed path costs more than the direct path although T > 2M")
    return res


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    header = out / "experiment.json"
    header.write_text(json.dumps(cfg.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    if cfg.mode == "dialogue":
        res = _run_sessions(cfg, out, dialogue_session, "dialogue", DIALOGUE_CSV_COLUMNS)
    elif cfg.mode in ("bb84", "attack"):
        if cfg.mode == "attack":
            cfg = replace(cfg, bb84=replace(cfg.bb84, eve_strategy="intercept-resend"))
        res = _run_sessions(cfg, out, bb84_session, cfg.mode, BB84_CSV_COLUMNS)
    elif cfg.mode == "leakage":
        res = _run_leakage(cfg, out)
    elif cfg.mode == "keylen":
        res = _run_keylen(cfg, out)
    else:
        res = _run_cost(cfg, out)

    res.artifacts.insert(0, header)
    summary = out / "summary.json"
    summary.write_text(json.dumps(res.summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    res.artifacts.append(summary)
    for v in res.violations:
        log.error("invariant violation: %s", v)
    res.exit_status = 1 if res.violations else 0
    return res
