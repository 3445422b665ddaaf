"""Command-line entry point.

    mdiqd dialogue --seed 1,2,3 --m 10000 --out results/dlg
    mdiqd attack --config attack.yaml
    mdiqd verify results/dlg/dialogue_seed1.jsonl --gamma 0.1
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import MODES, ConfigError, build_config, load_config, merge_overrides
from .transcript_io import read_jsonl, verify_records

VERBS = MODES + ("verify",)


def _seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdiqd", description="MDI quantum dialogue simulator")
    p.add_argument("verb", nargs="?", choices=VERBS, help="experiment mode, or 'verify'")
    p.add_argument("paths", nargs="*", help="transcript files for 'verify'")
    p.add_argument("--mode", choices=VERBS, help="alternative to the positional verb")
    p.add_argument("--config", type=Path, help="YAML experiment configuration")
    p.add_argument("--seed", type=_seeds, help="comma-separated u64 seeds")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--workers", type=int, help="worker processes for the seed fan-out")
    p.add_argument("--m", type=int, help="dialogue rounds")
    p.add_argument("--gamma", type=float, help="estimation sampling fraction")
    p.add_argument("--qber", type=float, help="tolerable QBER (abort threshold)")
    p.add_argument("--eps", type=float, help="security parameter")
    p.add_argument("--p-flip", type=float, help="per-qubit flip probability of the channel")
    p.add_argument("--n-signals", type=int, help="BB84 signals per session")
    p.add_argument("--utp", choices=("honest", "honest-restricted", "random", "biased-lie",
                                     "measure-record"))
    p.add_argument("--restricted-analyzer", action="store_true",
                   help="UTP resolves only psi+/psi-")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _overrides(args) -> tuple[dict, dict]:
    """CLI flags as config overrides, plus their origin labels for error messages."""
    ov, origins = {}, {}

    def put(key, value, flag):
        if value is not None:
            ov[key] = value
            origins[key] = flag

    put(("seeds",), args.seed, "--seed")
    put(("out",), str(args.out) if args.out else None, "--out")
    put(("workers",), args.workers, "--workers")
    put(("dialogue", "m"), args.m, "--m")
    put(("dialogue", "gamma"), args.gamma, "--gamma")
    put(("dialogue", "utp"), args.utp, "--utp")
    put(("dialogue", "p_flip"), args.p_flip, "--p-flip")
    put(("bb84", "p_flip_channel"), args.p_flip, "--p-flip")
    put(("bb84", "n_signals"), args.n_signals, "--n-signals")
    if args.restricted_analyzer:
        put(("dialogue", "restricted_analyzer"), True, "--restricted-analyzer")
    if args.qber is not None:
        put(("dialogue", "q_threshold"), args.qber, "--qber")
        put(("bb84", "q_tolerable"), args.qber, "--qber")
        put(("keylen", "qber"), args.qber, "--qber")
    if args.eps is not None:
        put(("dialogue", "eps"), args.eps, "--eps")
        put(("bb84", "eps_qkd"), args.eps, "--eps")
        put(("keylen", "eps_qkd"), args.eps, "--eps")
    return ov, origins


def _verify(args) -> int:
    if not args.paths:
        print("verify: no transcript files given", file=sys.stderr)
        return 2
    status = 0
    restricted = True if args.restricted_analyzer else None
    for path in args.paths:
        rep = verify_records(read_jsonl(Path(path)), restricted=restricted,
                             gamma=args.gamma, m=args.m)
        if rep.ok:
            print(f"{path}: ok ({rep.rounds} rounds)")
        else:
            status = 1
            for v in rep.violations:
                print(f"{path}: {v}")
    return status


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    verb = args.verb or args.mode
    if args.verb and args.mode and args.verb != args.mode:
        print(f"conflicting modes: {args.verb!r} and --mode {args.mode!r}", file=sys.stderr)
        return 2
    if verb == "verify":
        return _verify(args)

    # local import keeps `mdiqd verify` light
    from .experiment import run_experiment

    ov, origins = _overrides(args)
    if verb:
        ov[("mode",)] = verb
        origins[("mode",)] = "<verb>"
    try:
        if args.config:
            cfg = load_config(args.config, ov, origins)
        else:
            cfg = build_config(merge_overrides({}, ov), source="<command line>", origins=origins)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    res = run_experiment(cfg)
    for path in res.artifacts:
        print(path)
    for v in res.violations:
        print(f"violation: {v}", file=sys.stderr)
    return res.exit_status


if __name__ == "__main__":
    sys.exit(main())
