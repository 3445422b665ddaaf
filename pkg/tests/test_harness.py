import csv
import json
import math

import numpy as np
import pytest

from mdiqd.harness.cli import main
from mdiqd.harness.config import ConfigError, build_config, load_config
from mdiqd.harness.cost import CostQuery, cost_compare, expand_keystream
from mdiqd.harness.experiment import run_experiment
from mdiqd.harness.transcript_io import read_jsonl, verify_records
from mdiqd.qubit import make_rng


def _csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def _tree(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


class TestCost:
    def test_reference_figures(self):
        r = cost_compare(CostQuery(128, 512))
        assert (r.direct_key_bits, r.direct_naive_qubits) == (2048, 8192)
        assert (r.seed_bits, r.seed_naive_qubits) == (256, 1024)
        assert (r.direct_finite_raw_bits, r.direct_finite_qubits) == (17504, 70016)
        assert (r.seed_finite_raw_bits, r.seed_finite_qubits) == (2188, 8752)

    def test_ceil_rounding(self):
        r = cost_compare(CostQuery(128, 512, rounding="ceil"))
        assert r.direct_finite_raw_bits == math.ceil(2048 / 0.117) == 17505
        assert r.seed_finite_raw_bits == 2189

    def test_break_even(self):
        # T = M/2 makes both paths carry the same number of key bits
        r = cost_compare(CostQuery(128, 64))
        assert r.direct_key_bits == r.seed_bits

    @pytest.mark.parametrize("T", [257, 512, 4096, 10**6])
    def test_seed_cheaper_for_long_dialogues(self, T):
        r = cost_compare(CostQuery(128, T))
        assert r.seed_finite_qubits <= r.direct_finite_qubits

    @pytest.mark.parametrize("kw", [{"rate": 0.0}, {"rate": 1.5}, {"rounding": "floor"}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            CostQuery(128, 512, **kw)


class TestKeystream:
    def test_deterministic_and_exact_length(self):
        seed = make_rng(0).integers(0, 2, 256)
        a = expand_keystream(seed, 1001)
        assert a.size == 1001
        np.testing.assert_array_equal(a, expand_keystream(seed, 1001))
        np.testing.assert_array_equal(a[:500], expand_keystream(seed, 500))

    def test_length_prefix_separates_seeds(self):
        assert not np.array_equal(expand_keystream("0", 64), expand_keystream("00", 64))

    def test_avalanche(self):
        seed = make_rng(1).integers(0, 2, 256)
        flipped = seed.copy()
        flipped[17] ^= 1
        diff = np.mean(expand_keystream(seed, 10_000) != expand_keystream(flipped, 10_000))
        assert abs(diff - 0.5) <= 0.05

    def test_balance(self):
        assert abs(expand_keystream("1011", 100_000).mean() - 0.5) <= 0.02

    @pytest.mark.parametrize("seed", ["", [2, 0]])
    def test_bad_seed(self, seed):
        with pytest.raises(ValueError):
            expand_keystream(seed, 8)


class TestConfig:
    def test_load(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("mode: dialogue\nseeds: [3, 4]\ndialogue:\n  m: 200\n  eps: 1e-8\n")
        cfg = load_config(p)
        assert cfg.seeds == (3, 4) and cfg.dialogue.m == 200 and cfg.dialogue.eps == 1e-8

    def test_error_names_line(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("mode: dialogue\ndialogue:\n  m: 200\n  gamma: 1.5\n")
        with pytest.raises(ConfigError, match=r"c\.yaml:4: dialogue\.gamma"):
            load_config(p)

    def test_unknown_key_line(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("mode: bb84\nbb84:\n  n_signal: 5\n")
        with pytest.raises(ConfigError, match=r"c\.yaml:3: bb84\.n_signal: unknown key"):
            load_config(p)

    def test_type_error(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("mode: dialogue\ndialogue:\n  m: lots\n")
        with pytest.raises(ConfigError, match=":3: dialogue.m: expected an integer"):
            load_config(p)

    def test_override_origin(self):
        with pytest.raises(ConfigError, match="--gamma"):
            build_config({"mode": "dialogue", "dialogue": {"gamma": 2.0}},
                         origins={("dialogue", "gamma"): "--gamma"})

    def test_missing_mode(self):
        with pytest.raises(ConfigError, match="mode"):
            build_config({})


class TestCli:
    def test_dialogue_noiseless(self, tmp_path):
        out = tmp_path / "d"
        assert main(["dialogue", "--seed", ",".join(map(str, range(10))), "--m", "2000",
                     "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["abort_rate"] == 0.0 and summary["mean_observed_qber"] == 0.0
        rows = _csv(out / "dialogue_aggregate.csv")
        assert [int(r["seed"]) for r in rows] == list(range(10))
        recs = read_jsonl(out / "dialogue_seed0.jsonl")
        assert len(recs) == 2000
        assert verify_records(recs, gamma=0.1, m=2000).ok

    def test_verify_verb(self, tmp_path, capsys):
        out = tmp_path / "d"
        main(["dialogue", "--seed", "1", "--m", "500", "--out", str(out)])
        path = out / "dialogue_seed1.jsonl"
        assert main(["verify", str(path), "--gamma", "0.1"]) == 0
        recs = read_jsonl(path)
        j = next(i for i, r in enumerate(recs) if r["kept"])
        recs[j]["g_b"] ^= 1
        bad = tmp_path / "bad.jsonl"
        bad.write_text("".join(json.dumps(r) + "\n" for r in recs))
        assert main(["verify", str(bad)]) == 1
        assert "g_b does not match" in capsys.readouterr().out

    def test_verify_missing_paths(self):
        assert main(["verify"]) == 2

    def test_attack(self, tmp_path):
        out = tmp_path / "a"
        assert main(["attack", "--seed", "1,2,3", "--n-signals", "4000", "--out", str(out)]) == 0
        assert json.loads((out / "summary.json").read_text())["abort_rate"] == 1.0
        rec = read_jsonl(out / "attack_seed1.jsonl")[0]
        assert rec["eve_basis"] in (0, 1)

    def test_bb84(self, tmp_path):
        out = tmp_path / "b"
        assert main(["bb84", "--seed", "5", "--n-signals", "2000", "--qber", "0.05",
                     "--out", str(out)]) == 0
        rec = read_jsonl(out / "bb84_seed5.jsonl")[0]
        assert rec["eve_basis"] is None

    def test_leakage(self, tmp_path):
        out = tmp_path / "l"
        assert main(["leakage", "--seed", "0", "--m", "4000", "--out", str(out)]) == 0
        rows = _csv(out / "leakage.csv")
        assert [r["announcement"] for r in rows] == ["phi+", "phi-", "psi+", "psi-", "inconclusive"]
        assert [float(r["leak_bits"]) for r in rows[:4]] == [1.0, 0.0, 0.0, 1.0]
        nguyen = [r for r in read_jsonl(out / "leakage.jsonl") if r["protocol"] == "nguyen"]
        assert len(nguyen) == 4 and all(r["leak_bits"] == 2.0 for r in nguyen)

    def test_keylen(self, tmp_path):
        out = tmp_path / "k"
        assert main(["keylen", "--out", str(out)]) == 0
        row = _csv(out / "keylen.csv")[0]
        assert int(row["secure_length"]) > 0

    def test_cost(self, tmp_path):
        out = tmp_path / "c"
        assert main(["cost", "--out", str(out)]) == 0
        row = _csv(out / "cost.csv")[0]
        assert int(row["direct_finite_qubits"]) == 70016

    def test_config_error_exit_code(self, tmp_path, capsys):
        assert main(["dialogue", "--gamma", "3", "--out", str(tmp_path)]) == 2
        assert "--gamma" in capsys.readouterr().err

    def test_conflicting_modes(self):
        assert main(["cost", "--mode", "bb84"]) == 2

    def test_config_file_with_override(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text(f"mode: dialogue\nseeds: [2]\nout: {tmp_path / 'o'}\ndialogue:\n  m: 300\n")
        assert main(["--config", str(p), "--m", "400"]) == 0
        assert len(read_jsonl(tmp_path / "o" / "dialogue_seed2.jsonl")) == 400


def test_workers_do_not_change_output(tmp_path):
    base = {"mode": "dialogue", "seeds": [1, 2, 3, 4], "dialogue": {"m": 1000, "p_flip": 0.02}}
    one = build_config({**base, "out": str(tmp_path / "w1"), "workers": 1})
    two = build_config({**base, "out": str(tmp_path / "w2"), "workers": 2})
    run_experiment(one)
    run_experiment(two)
    t1, t2 = _tree(tmp_path / "w1"), _tree(tmp_path / "w2")
    t1.pop(next(k for k in t1 if k.name == "experiment.json"))
    t2.pop(next(k for k in t2 if k.name == "experiment.json"))
    assert t1 == t2


def test_bb84_keyed_dialogue(tmp_path):
    cfg = build_config({
        "mode": "dialogue", "seeds": [0], "out": str(tmp_path),
        "dialogue": {"m": 500, "key_source": "bb84"},
        "bb84": {"n_signals": 20000, "sample_fraction": 0.5, "q_tolerable": 0.02},
    })
    res = run_experiment(cfg)
    assert res.exit_status == 0
    assert len(read_jsonl(tmp_path / "dialogue_seed0.jsonl")) == 500
