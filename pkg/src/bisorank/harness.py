"""Seeded Monte Carlo experiments, CSV output and rate fits."""

from __future__ import annotations

import csv
import io
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .classify import classify_pipeline
from .losses import kendall_tau, loss_cph, loss_frobenius_perm, loss_l01na, loss_lph, loss_rph
from .model import (
    MODELS,
    BisoInstance,
    ClassificationMatrix,
    gen_multi_level,
    gen_noisy_sorting,
    gen_packing,
    gen_random_biso,
    gen_two_value,
    inverse,
    oracle_level_set,
    packing_width,
    random_permutation,
    reversed_perm,
)
from .sampling import SamplingConfig, child_rngs, draw_observations, make_rng
from .sohlob import RankConfig, ThresholdSpec, rank_pair

MODES = ("RankOnly", "ClassifyPipeline", "LossAudit")
HEADER = ("model", "n", "d", "lambda0", "h", "p", "sigma", "scale", "seed", "rep", "rounds",
          "L_ph", "R_ph", "C_ph", "L01NA", "frob", "kendall", "ms")
GRID_KEYS = ("n", "d", "lambda0", "h", "p", "sigma", "scale")
SQUARE_MODELS = ("NoisySorting", "NoisySortingGeneral")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "TwoValue"
    n: tuple = (32,)
    d: tuple = (32,)
    lambda0: tuple = (1.0,)
    h: tuple = (0.3,)
    p: tuple = (0.5,)
    sigma: tuple = (0.5,)
    scale: tuple = (1.0,)
    delta: float = 0.1
    reps: int = 1
    seed: int = 0
    out: str | None = None
    mode: str = "RankOnly"
    noise: str = "gaussian"
    timing: bool = False  # wall-clock ms makes the CSV non-reproducible
    workers: int = 1

    def __post_init__(self):
        for key in GRID_KEYS:
            val = getattr(self, key)
            val = tuple(val) if isinstance(val, (list, tuple)) else (val,)
            if not val:
                raise ConfigError(f"grid {key!r} is empty")
            object.__setattr__(self, key, val)
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if any(h <= 0 for h in self.h):
            raise ConfigError("all h must be positive")
        if any(n < 1 for n in self.n) or any(d < 1 for d in self.d):
            raise ConfigError("dimensions must be positive")
        if any(lam <= 0 for lam in self.lambda0):
            raise ConfigError("lambda0 must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def grid(self) -> list[dict]:
        """Grid points in config order; square models take ``d = n``."""
        points = []
        seen = set()
        for combo in itertools.product(*(getattr(self, k) for k in GRID_KEYS)):
            pt = dict(zip(GRID_KEYS, combo))
            if self.model in SQUARE_MODELS:
                pt["d"] = pt["n"]
                pt["p"] = 0.5
            key = tuple(pt.values())
            if key not in seen:
                seen.add(key)
                points.append(pt)
        return points


@dataclass
class ResultRow:
    model: str
    n: int
    d: int
    lambda0: float
    h: float
    p: float
    sigma: float
    scale: float
    seed: int
    rep: int
    rounds: int
    L_ph: int | None = None
    R_ph: int | None = None
    C_ph: int | None = None
    L01NA: int | None = None
    frob: float | None = None
    kendall: int | None = None
    ms: int | None = None

    def __post_init__(self):
        for name in ("L_ph", "R_ph", "C_ph", "L01NA", "frob", "kendall"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise ValueError(f"{name} must be nonnegative")


_INT_COLS = {"n", "d", "seed", "rep", "rounds", "L_ph", "R_ph", "C_ph", "L01NA", "kendall", "ms"}
_STR_COLS = {"model"}


def _fmt(val) -> str:
    if val is None:
        return ""
    if isinstance(val, float):
        return repr(val)
    return str(val)


def emit_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for row in rows:
        rec = asdict(row)
        writer.writerow([_fmt(rec[k]) for k in HEADER])
    return buf.getvalue()


def parse_csv(text: str) -> list[ResultRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != HEADER:
        raise ValueError("unexpected CSV header")
    out = []
    for rec in reader:
        vals = {}
        for key, raw in zip(HEADER, rec):
            if raw == "":
                vals[key] = None
            elif key in _STR_COLS:
                vals[key] = raw
            elif key in _INT_COLS:
                vals[key] = int(raw)
            else:
                vals[key] = float(raw)
        out.append(ResultRow(**vals))
    return out


def write_rows(rows, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(emit_csv(rows))


# ------------------------------------------------------------- config files


def parse_config_text(text: str) -> dict[str, list[str]]:
    """Flat ``key = value`` lines; repeated keys accumulate into a grid."""
    out: dict[str, list[str]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out.setdefault(key, []).extend(val.split())
    return out


_CASTS = {"n": int, "d": int, "lambda0": float, "h": float, "p": float, "sigma": float, "scale": float}
_SCALARS = {"model": str, "delta": float, "reps": int, "seed": int, "out": str, "mode": str,
            "noise": str, "workers": int}


def build_config(values: dict[str, list]) -> ExperimentConfig:
    """Turn parsed key/value lists into a config; unknown keys are rejected."""
    kwargs = {}
    for key, vals in values.items():
        if key in _CASTS:
            kwargs[key] = tuple(_CASTS[key](v) for v in vals)
        elif key in _SCALARS:
            if len(vals) != 1:
                raise ConfigError(f"{key!r} takes a single value")
            kwargs[key] = _SCALARS[key](vals[0])
        elif key == "timing":
            kwargs[key] = str(vals[-1]).lower() in ("1", "true", "yes", "on")
        else:
            raise ConfigError(f"unknown key {key!r}")
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------- execution


def make_instance(model: str, n: int, d: int, p: float, h: float, sigma: float, lambda0: float,
                  rng) -> BisoInstance:
    if model == "TwoValue":
        return gen_two_value(n, d, p, h, rng=rng)
    if model in SQUARE_MODELS:
        return gen_noisy_sorting(n, h, generalized=model == "NoisySortingGeneral", rng=rng)
    if model == "Packing":
        width = max(1, packing_width(sigma, lambda0, h, d))
        v = np.zeros(n, dtype=np.int64)
        v[rng.permutation(n)[: n // 2]] = 1
        return gen_packing(n, d, p, h, width, v)
    if model == "MultiLevel":
        levels = np.unique(np.clip([0.0, p - h, p + h, 1.0], 0.0, 1.0))
        return gen_multi_level(n, d, levels, rng)
    return gen_random_biso(n, d, rng)


def _audit_check(inst, pi_hat, eta_hat, p, h) -> None:
    lph = loss_lph(inst, pi_hat, eta_hat, p, h)
    if lph * (2 * h) ** 2 > loss_frobenius_perm(inst, pi_hat, eta_hat) + 1e-9:
        raise AssertionError("Frobenius domination violated")
    if lph < max(loss_rph(inst, pi_hat, p, h), loss_cph(inst, eta_hat, p, h)):
        raise AssertionError("row/column lower bound violated")


def run_cell(config: ExperimentConfig, index: int, point: dict, rep: int) -> ResultRow:
    """One grid point and replicate; fully determined by ``(seed, index, rep)``."""
    ss = np.random.SeedSequence([config.seed, index, rep])
    gen_rng, sample_rng, est_rng = child_rngs(make_rng(ss), 3)
    n, d, p, h = point["n"], point["d"], point["p"], point["h"]
    sigma, lambda0, scale = point["sigma"], point["lambda0"], point["scale"]
    start = time.perf_counter()
    inst = make_instance(config.model, n, d, p, h, sigma, lambda0, gen_rng)
    row = ResultRow(config.model, n, d, lambda0, h, p, sigma, scale, config.seed, rep, 0)
    if config.mode == "LossAudit":
        pi_hat, eta_hat = random_permutation(n, est_rng), random_permutation(d, est_rng)
        _audit_check(inst, pi_hat, eta_hat, p, h)
    else:
        obs = draw_observations(inst, SamplingConfig(lambda0, sigma, config.noise), sample_rng)
        rank_cfg = RankConfig(lambda0, sigma, config.delta, scale)
        if config.mode == "RankOnly":
            rows, cols = rank_pair(obs, ThresholdSpec.single(p, h), rank_cfg, est_rng)
            pi_hat, eta_hat = rows.pi_hat, cols.pi_hat
            row.rounds = max(rows.rounds, cols.rounds)
        else:
            res = classify_pipeline(obs, p, h, rank_cfg, est_rng)
            pi_hat, eta_hat = res.pi_hat, res.eta_hat
            row.rounds = res.rounds
            row.L01NA = loss_l01na(oracle_level_set(inst, p, h), res.estimate)
    row.L_ph = loss_lph(inst, pi_hat, eta_hat, p, h)
    row.R_ph = loss_rph(inst, pi_hat, p, h)
    row.C_ph = loss_cph(inst, eta_hat, p, h)
    row.frob = loss_frobenius_perm(inst, pi_hat, eta_hat)
    if config.model in SQUARE_MODELS:
        row.kendall = kendall_tau(pi_hat, inst.row_perm)
    if config.timing:
        row.ms = int(round(1000 * (time.perf_counter() - start)))
    return row


def _run_cell_args(args):
    return run_cell(*args)


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    """All grid points times replicates, in config order; writes ``config.out`` if set."""
    jobs = [(config, i, pt, rep) for i, pt in enumerate(config.grid()) for rep in range(config.reps)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            rows = list(pool.map(_run_cell_args, jobs))
    else:
        rows = [run_cell(*job) for job in jobs]
    if config.out:
        write_rows(rows, config.out)
    return rows


# ------------------------------------------------------------------ reports


def _value(row, name):
    return row[name] if isinstance(row, dict) else getattr(row, name)


def group_means(rows, x: str, y: str) -> list[tuple[float, float, float, int]]:
    """``(x, mean y, standard error, count)`` per distinct ``x``, sorted by ``x``."""
    groups: dict[float, list[float]] = {}
    for row in rows:
        yv = _value(row, y)
        if yv is not None:
            groups.setdefault(float(_value(row, x)), []).append(float(yv))
    out = []
    for xv in sorted(groups):
        ys = np.asarray(groups[xv])
        se = float(ys.std(ddof=1) / math.sqrt(ys.size)) if ys.size > 1 else 0.0
        out.append((xv, float(ys.mean()), se, ys.size))
    return out


def rate_fit(rows, x: str, y: str) -> tuple[float, float, float]:
    """Least-squares line through ``(log x, log mean y)``; returns slope, intercept, r^2."""
    pts = group_means(rows, x, y)
    if len(pts) < 2:
        raise ValueError("need at least two distinct x values")
    xs = np.array([pt[0] for pt in pts])
    ys = np.array([pt[1] for pt in pts])
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit needs positive x and mean y")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(slope), float(intercept), r2


# ------------------------------------------------------------------- audit


def _naive_lph(inst, pi_hat, eta_hat, p, h) -> int:
    """Cell-by-cell count straight from the definition."""
    pinv, einv = inverse(inst.row_perm), inverse(inst.col_perm)
    qinv, finv = inverse(pi_hat), inverse(eta_hat)
    count = 0
    for i in range(inst.n):
        for j in range(inst.d):
            a = inst.M[pinv[i], einv[j]]
            b = inst.M[qinv[i], finv[j]]
            if (a <= p - h and b >= p + h) or (a >= p + h and b <= p - h):
                count += 1
    return count


def audit(cases: int = 200, seed: int = 0) -> dict[str, int]:
    """Violation counts of the loss identities on random small instances."""
    rng = make_rng(seed)
    bad = dict.fromkeys(("naive", "lower", "upper", "frobenius", "plugin", "kendall"), 0)
    # dyadic grid keeps p - h - h == p - 2h exact
    for _ in range(cases):
        n, d = (int(v) for v in rng.integers(1, 7, size=2))
        inst = gen_random_biso(n, d, rng)
        p = int(rng.integers(4, 13)) / 16
        h = int(rng.integers(1, 5)) / 32
        pi_hat, eta_hat = random_permutation(n, rng), random_permutation(d, rng)
        lph = loss_lph(inst, pi_hat, eta_hat, p, h)
        bad["naive"] += lph != _naive_lph(inst, pi_hat, eta_hat, p, h)
        bad["lower"] += lph < max(loss_rph(inst, pi_hat, p, h), loss_cph(inst, eta_hat, p, h))
        wide = loss_lph(inst, pi_hat, eta_hat, p, 2 * h)
        bound = 2 * min(loss_rph(inst, pi_hat, p - h, h) + loss_cph(inst, eta_hat, p + h, h),
                        loss_cph(inst, eta_hat, p - h, h) + loss_rph(inst, pi_hat, p + h, h))
        bad["upper"] += wide > bound
        bad["frobenius"] += lph * (2 * h) ** 2 > loss_frobenius_perm(inst, pi_hat, eta_hat) + 1e-12
        M_hat = np.clip(inst.M + rng.normal(0, 0.2, size=inst.M.shape), 0, 1)
        truth = oracle_level_set(inst, p, h)
        est = (M_hat >= p).astype(np.int8)
        err = loss_l01na(truth, ClassificationMatrix(est, p, h))
        # a wrong side on a decided cell costs at least h^2 in squared error
        bad["plugin"] += err > np.sum((M_hat - inst.M) ** 2) / (h * h) + 1e-9
    for _ in range(max(1, cases // 10)):
        n = int(rng.integers(2, 12))
        inst = gen_noisy_sorting(n, 0.25, generalized=bool(rng.integers(2)), rng=rng)
        guess = random_permutation(n, rng)
        lph = loss_lph(inst, guess, reversed_perm(guess), 0.5, 0.25)
        bad["kendall"] += lph != 2 * kendall_tau(guess, inst.row_perm)
    return {k: int(v) for k, v in bad.items()}
