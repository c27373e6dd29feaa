"""Command line entry point: ``bisorank <command> [flags]``."""

from __future__ import annotations

import argparse
import sys

from . import harness
from .classify import classify_pipeline
from .losses import loss_cph, loss_l01na, loss_lph, loss_rph
from .model import MODELS, instance_from_text, instance_to_text, oracle_level_set
from .sampling import ObservationSet, SamplingConfig, child_rngs, draw_observations, make_rng
from .sohlob import RankConfig, ThresholdSpec, rank_pair


def _write(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _common(sp, *, sampling=True, ranking=False):
    sp.add_argument("--n", type=int, default=32)
    sp.add_argument("--d", type=int, default=32)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--h", type=float, default=0.3)
    sp.add_argument("--model", choices=MODELS, default="TwoValue")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None, help="output file (default: stdout)")
    sp.add_argument("--instance", default=None, help="instance file instead of generating one")
    if sampling:
        sp.add_argument("--lambda0", type=float, default=1.0)
        sp.add_argument("--sigma", type=float, default=0.5)
        sp.add_argument("--noise", choices=("gaussian", "bernoulli"), default="gaussian")
    if ranking:
        sp.add_argument("--obs", default=None, help="observation CSV instead of sampling")
        sp.add_argument("--delta", type=float, default=0.1)
        sp.add_argument("--scale", type=float, default=1.0)


def _instance(args, rng):
    if args.instance:
        return instance_from_text(_read(args.instance))
    lambda0 = getattr(args, "lambda0", 1.0)
    sigma = getattr(args, "sigma", 0.5)
    return harness.make_instance(args.model, args.n, args.d, args.p, args.h, sigma, lambda0, rng)


def _observations(args, rngs):
    """Observations from ``--obs`` or sampled from the instance; instance may be ``None``."""
    if getattr(args, "obs", None):
        inst = instance_from_text(_read(args.instance)) if args.instance else None
        n, d = (inst.n, inst.d) if inst is not None else (args.n, args.d)
        return inst, ObservationSet.from_csv(_read(args.obs), n, d)
    inst = _instance(args, rngs[0])
    return inst, draw_observations(inst, SamplingConfig(args.lambda0, args.sigma, args.noise), rngs[1])


def cmd_generate(args) -> int:
    inst = _instance(args, make_rng(args.seed))
    inst.validate()
    _write(instance_to_text(inst), args.out)
    return 0


def cmd_sample(args) -> int:
    gen_rng, sample_rng = child_rngs(make_rng(args.seed), 2)
    _, obs = _observations(args, (gen_rng, sample_rng))
    _write(obs.to_csv(), args.out)
    return 0


def cmd_rank(args) -> int:
    rngs = child_rngs(make_rng(args.seed), 3)
    inst, obs = _observations(args, rngs)
    cfg = RankConfig(args.lambda0, args.sigma, args.delta, args.scale)
    rows, cols = rank_pair(obs, ThresholdSpec.single(args.p, args.h), cfg, rngs[2], record=args.diagnostics)
    out = ["rows " + " ".join(map(str, rows.pi_hat)), "cols " + " ".join(map(str, cols.pi_hat)),
           f"rounds {rows.rounds} {cols.rounds}"]
    if inst is not None:
        out.append(f"L_ph {loss_lph(inst, rows.pi_hat, cols.pi_hat, args.p, args.h)} "
                   f"R_ph {loss_rph(inst, rows.pi_hat, args.p, args.h)} "
                   f"C_ph {loss_cph(inst, cols.pi_hat, args.p, args.h)}")
    _write("\n".join(out) + "\n", args.out)
    if args.diagnostics:
        sys.stderr.write("[rows]\n" + rows.dump_diagnostics() + "[cols]\n" + cols.dump_diagnostics())
    return 0


def cmd_classify(args) -> int:
    rngs = child_rngs(make_rng(args.seed), 3)
    inst, obs = _observations(args, rngs)
    cfg = RankConfig(args.lambda0, args.sigma, args.delta, args.scale)
    res = classify_pipeline(obs, args.p, args.h, cfg, rngs[2])
    _write(res.estimate.to_text(), args.out)
    if inst is not None:
        err = loss_l01na(oracle_level_set(inst, args.p, args.h), res.estimate)
        sys.stderr.write(f"L01NA {err}\n")
    return 0


def cmd_sweep(args) -> int:
    values = harness.parse_config_text(_read(args.config)) if args.config else {}
    for key in harness.GRID_KEYS:
        val = getattr(args, key)
        if val is not None:
            values[key] = [str(v) for v in val]
    for key in ("model", "delta", "reps", "seed", "mode", "noise", "workers"):
        val = getattr(args, key)
        if val is not None:
            values[key] = [str(val)]
    if args.timing:
        values["timing"] = ["1"]
    try:
        config = harness.build_config(values)
    except harness.ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    rows = harness.run_experiment(config)
    _write(harness.emit_csv(rows), args.out)
    if len(config.h) > 1:
        slope, intercept, r2 = harness.rate_fit(rows, "h", "L_ph")
        sys.stderr.write(f"L_ph vs h: slope {slope:.3f} intercept {intercept:.3f} r2 {r2:.3f}\n")
    return 0


def cmd_audit(args) -> int:
    bad = harness.audit(args.cases, args.seed)
    for name, count in bad.items():
        sys.stdout.write(f"{name:10s} {'PASS' if count == 0 else 'FAIL'} violations={count}\n")
    return 0 if not any(bad.values()) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bisorank", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("generate", help="write an instance file")
    _common(sp, sampling=False)
    sp.add_argument("--lambda0", type=float, default=1.0, help="sets the packing width")
    sp.add_argument("--sigma", type=float, default=0.5, help="sets the packing width")
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("sample", help="write an observation CSV")
    _common(sp)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("rank", help="estimate row and column orderings")
    _common(sp, ranking=True)
    sp.add_argument("--diagnostics", action="store_true", help="per-round trace on stderr")
    sp.set_defaults(func=cmd_rank)

    sp = sub.add_parser("classify", help="estimate the level set as N/0/1 text")
    _common(sp, ranking=True)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("sweep", help="run a seeded experiment grid and write CSV")
    sp.add_argument("--config", default=None, help="key = value file; repeated keys form grids")
    for key, typ in (("n", int), ("d", int), ("lambda0", float), ("h", float), ("p", float),
                     ("sigma", float), ("scale", float)):
        sp.add_argument(f"--{key}", type=typ, nargs="+", default=None)
    sp.add_argument("--model", choices=MODELS, default=None)
    sp.add_argument("--mode", choices=harness.MODES, default=None)
    sp.add_argument("--noise", choices=("gaussian", "bernoulli"), default=None)
    sp.add_argument("--delta", type=float, default=None)
    sp.add_argument("--reps", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--timing", action="store_true", help="fill the ms column")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("audit", help="check loss identities on random instances")
    sp.add_argument("--cases", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
