"""Command line front end for the experiment families.

Each subcommand runs one experiment, writes a canonical data file (CSV
by default, a JSON mirror with --format json) and prints a short
summary naming the claim every row exercises.  `render` pretty-prints
an existing data file as an aligned text table with per-row pass/fail
margins.

Reproducibility contract: given the same config and seed, the written
data file is byte-identical, independent of worker count.  The
environment variable named by config.THREADS_ENV caps the worker pool.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import config, effverify, jordan, partition, protocol
from .qsim import StateVector


class ConfigError(Exception):
    """Bad command, key, value, or missing seed; nothing was written."""


class RuntimeFailure(Exception):
    """The run itself failed (unwritable output, backend fault)."""


class ParseError(Exception):
    """A data file or rendered table could not be read back."""


EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


# ---------------------------------------------------------------------------
# Configuration

# per-command parameter schema: name -> (type, default)
_PARAM_SPECS: dict[str, dict[str, tuple[type, object]]] = {
    "jordan-demo": {
        "pairs": (int, 20),
        "dim_min": (int, 2),
        "dim_max": (int, 8),
    },
    "partition-claims": {
        "T": (int, 16),
        "m": (int, 2),
        "strategies": (int, 5),
        "grid_strategies": (int, 1),
        "mode": (str, "ideal"),
    },
    "repetition-sweep": {
        "m_list": (str, "1,2,3,4,5,6,7,8"),
        "trials": (int, 20000),
        "adversary": (str, "testonly"),
        "n": (int, 12),
    },
    "fs-attack": {
        "m": (int, 4),
        "budgets": (str, "1,2,4,8,16,32"),
        "trials": (int, 5000),
        "n": (int, 12),
    },
    "effverify-demo": {
        "inner": (str, "toy"),
        "suite": (str, "stub"),
        "n": (int, 12),
        "m": (int, 4),
        "time_bound": (int, 4096),
        "trials": (int, 20),
        "flow": (str, "two-round"),
    },
}

_COMMANDS = tuple(_PARAM_SPECS)


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    seed: int
    out: str
    fmt: str
    params: dict = field(default_factory=dict)


def _coerce(command: str, key: str, value, from_text: bool):
    spec = _PARAM_SPECS[command]
    if key not in spec:
        raise ConfigError(f"unknown key {key!r} for {command} "
                          f"(known: {', '.join(sorted(spec))})")
    want, _ = spec[key]
    if from_text:
        if want is int:
            try:
                return int(value)
            except ValueError:
                raise ConfigError(f"{key} must be an integer, got {value!r}")
        return str(value)
    if want is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    if want is str and not isinstance(value, str):
        raise ConfigError(f"{key} must be a string, got {value!r}")
    return value


def _parse_int_list(text: str, key: str) -> tuple[int, ...]:
    items = [p.strip() for p in text.split(",")]
    if not items or any(not p for p in items):
        raise ConfigError(f"{key} must be a comma-separated list of integers, "
                          f"got {text!r}")
    out = []
    for p in items:
        try:
            out.append(int(p))
        except ValueError:
            raise ConfigError(f"{key} entry {p!r} is not an integer")
    return tuple(out)


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _validate(cfg: ExperimentConfig):
    p = cfg.params
    _require(cfg.fmt in ("csv", "json"), f"format must be csv or json, got {cfg.fmt!r}")
    _require(cfg.seed >= 0, f"seed must be >= 0, got {cfg.seed}")
    c = cfg.command
    if c == "jordan-demo":
        _require(1 <= p["pairs"] <= 10000, f"pairs={p['pairs']} outside 1..10000")
        _require(2 <= p["dim_min"] <= p["dim_max"] <= 32,
                 f"need 2 <= dim_min <= dim_max <= 32, got {p['dim_min']}..{p['dim_max']}")
    elif c == "partition-claims":
        _require(2 <= p["T"] <= 64, f"T={p['T']} outside 2..64")
        _require(1 <= p["m"] <= 4, f"m={p['m']} outside 1..4")
        _require(1 <= p["strategies"] <= 200, f"strategies={p['strategies']} outside 1..200")
        _require(0 <= p["grid_strategies"] <= 50,
                 f"grid_strategies={p['grid_strategies']} outside 0..50")
        _require(p["mode"] in ("ideal", "kernel"),
                 f"mode must be ideal or kernel, got {p['mode']!r}")
        if p["mode"] == "kernel":
            # phase-register width grows with T; keep the demo desk-sized
            _require(p["T"] <= 32, "kernel mode limited to T <= 32")
    elif c == "repetition-sweep":
        ms = _parse_int_list(p["m_list"], "m_list")
        _require(all(1 <= m <= 24 for m in ms), f"m_list entries outside 1..24: {p['m_list']}")
        _require(1 <= p["trials"] <= 10**7, f"trials={p['trials']} outside 1..1e7")
        _require(p["adversary"] in ("honest", "testonly", "cheat"),
                 f"adversary must be honest, testonly or cheat, got {p['adversary']!r}")
        _require(1 <= p["n"] <= 18, f"n={p['n']} outside 1..18")
        if p["adversary"] == "cheat":
            # the cheat simulates a dense unitary on 2^(n+3) amplitudes
            _require(p["n"] <= 6, "cheat adversary limited to n <= 6")
    elif c == "fs-attack":
        _require(1 <= p["m"] <= 16, f"m={p['m']} outside 1..16")
        qs = _parse_int_list(p["budgets"], "budgets")
        _require(all(1 <= q <= 10**6 for q in qs), f"budgets entries outside 1..1e6: {p['budgets']}")
        _require(1 <= p["trials"] <= 10**7, f"trials={p['trials']} outside 1..1e7")
        _require(1 <= p["n"] <= 18, f"n={p['n']} outside 1..18")
    elif c == "effverify-demo":
        _require(p["inner"] == "toy", f"only the toy inner protocol is shipped, got {p['inner']!r}")
        _require(p["suite"] == "stub", f"only the stub backend suite is shipped, got {p['suite']!r}")
        _require(1 <= p["n"] <= 16, f"n={p['n']} outside 1..16")
        _require(1 <= p["m"] <= 16, f"m={p['m']} outside 1..16")
        _require(256 <= p["time_bound"] <= 65536,
                 f"time_bound={p['time_bound']} outside 256..65536")
        _require(1 <= p["trials"] <= 1000, f"trials={p['trials']} outside 1..1000")
        _require(p["flow"] in ("four-round", "two-round"),
                 f"flow must be four-round or two-round, got {p['flow']!r}")
    else:
        raise ConfigError(f"unknown command {c!r}")


def build_config(command: str, *, seed=None, out=None, fmt=None,
                 config_path=None, sets=()) -> ExperimentConfig:
    """Assemble and validate a run configuration.

    Precedence: built-in defaults, then the JSON config file, then
    --set pairs.  seed is mandatory; every command draws randomness.
    """
    if command not in _COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    params = {k: d for k, (_, d) in _PARAM_SPECS[command].items()}

    file_seed = None
    file_fmt = None
    if config_path is not None:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {config_path}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path} is not valid JSON: {exc}")
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in loaded.items():
            if key == "seed":
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"seed must be an integer, got {value!r}")
                file_seed = value
            elif key == "format":
                file_fmt = _coerce_fmt(value)
            else:
                params[key] = _coerce(command, key, value, from_text=False)

    for pair in sets:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        key = key.strip()
        if key == "seed":
            raise ConfigError("set the seed with --seed, not --set")
        params[key] = _coerce(command, key, value, from_text=True)

    if seed is None:
        seed = file_seed
    if seed is None:
        raise ConfigError(f"{command} draws randomness; --seed is required")
    if fmt is None:
        fmt = file_fmt if file_fmt is not None else "csv"
    if out is None:
        out = f"{command}.{fmt}"

    cfg = ExperimentConfig(command=command, seed=int(seed), out=out,
                           fmt=fmt, params=params)
    _validate(cfg)
    return cfg


def _coerce_fmt(value) -> str:
    if value not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {value!r}")
    return value


# ---------------------------------------------------------------------------
# Worker pool

def _worker_cap() -> int:
    raw = os.environ.get(config.THREADS_ENV)
    if raw is None or not raw.strip():
        return 1
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"{config.THREADS_ENV} must be an integer, got {raw!r}")
    if cap < 1:
        raise ConfigError(f"{config.THREADS_ENV} must be >= 1, got {cap}")
    return cap


def _pool_map(fn, items):
    """Order-preserving map, optionally fanned out over threads.

    Results are joined by input position, so the merged output is
    independent of completion order and of the worker count.
    """
    items = list(items)
    workers = min(_worker_cap(), max(len(items), 1))
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _task_seeds(seed: int, count: int) -> list[int]:
    state = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)
    return [int(v) for v in state]


# ---------------------------------------------------------------------------
# Canonical cells

def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        raise RuntimeFailure(f"boolean cell {value!r}; encode flags as 0/1 ints")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    raise RuntimeFailure(f"cannot serialize cell {value!r}")


def _stringify_rows(columns, rows):
    out = []
    for row in rows:
        missing = [c for c in columns if c not in row]
        if missing:
            raise RuntimeFailure(f"row missing columns {missing}")
        out.append({c: _cell(row[c]) for c in columns})
    return out


# ---------------------------------------------------------------------------
# Experiment: jordan-demo

_JORDAN_COLUMNS = ("pair", "dim", "rank0", "rank1", "blocks2d", "blocks1d",
                   "claim_id", "bound", "measured")


def _dense_eigenphases(p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    # folded to |angle| so the -pi/+pi branch cut cannot misalign the sort
    w = jordan.reflect(p1).mat @ jordan.reflect(p0).mat
    return np.sort(np.abs(np.angle(np.linalg.eigvals(w))))


def _jordan_pair(task):
    index, task_seed, dim_min, dim_max = task
    rng = np.random.default_rng(task_seed)
    dim = int(rng.integers(dim_min, dim_max + 1))
    rank0 = int(rng.integers(1, dim))
    rank1 = int(rng.integers(1, dim))
    p0 = jordan.random_projector(rng, dim, rank0)
    p1 = jordan.random_projector(rng, dim, rank1)
    dec = jordan.jordan_decompose(p0, p1)
    res = jordan.reconstruct_check(dec, p0, p1)
    residual = max(res.max_p0, res.max_p1, res.max_q, res.gram)
    got = np.sort(np.abs(jordan.eigenphases(dec)))
    want = _dense_eigenphases(p0, p1)
    phase_err = float(np.max(np.abs(got - want))) if len(got) == len(want) else float("inf")
    base = {"pair": index, "dim": dim, "rank0": rank0, "rank1": rank1,
            "blocks2d": len(dec.blocks2d), "blocks1d": len(dec.blocks1d)}
    return [
        dict(base, claim_id="jordan-reconstruct", bound=config.RESIDUAL_TOL,
             measured=residual),
        dict(base, claim_id="jordan-eigenphase", bound=config.EIGPHASE_TOL,
             measured=phase_err),
    ]


def _run_jordan(cfg: ExperimentConfig):
    p = cfg.params
    seeds = _task_seeds(cfg.seed, p["pairs"])
    tasks = [(i, seeds[i], p["dim_min"], p["dim_max"]) for i in range(p["pairs"])]
    rows = [row for chunk in _pool_map(_jordan_pair, tasks) for row in chunk]
    return _JORDAN_COLUMNS, rows, {}


# ---------------------------------------------------------------------------
# Experiment: partition-claims

_PARTITION_COLUMNS = ("seed", "m", "i", "gamma0", "T", "gamma", "mode",
                      "norm_psi0", "norm_psi1", "norm_err",
                      "claim_id", "bound", "measured")


def _random_xz_state(rng, strategy) -> StateVector:
    amps = rng.normal(size=strategy.xz_dim) + 1j * rng.normal(size=strategy.xz_dim)
    amps /= np.linalg.norm(amps)
    return StateVector(strategy.xz_layout(), amps)


def _partition_row(idx, params, out, claim_id, bound, measured):
    return {
        "seed": idx, "m": params.m, "i": params.i, "gamma0": params.gamma0,
        "T": params.T, "gamma": params.gamma, "mode": params.mode,
        "norm_psi0": out[0], "norm_psi1": out[1], "norm_err": out[2],
        "claim_id": claim_id, "bound": bound, "measured": measured,
    }


def _partition_err_grid(task):
    """Single-step branch-defect mass, averaged over the whole gamma grid."""
    idx, task_seed, T, mode = task
    rng = np.random.default_rng(task_seed)
    s = partition.random_strategy(rng, m=1, x_width=1, z_width=1)
    psi = _random_xz_state(rng, s)
    grid = partition.gamma_grid(1.0, T)
    outs = []
    for gamma in grid:
        params = partition.PartitionParams(1, 1, 1.0, T, float(gamma), mode)
        outs.append((params, partition.run_G(s, params, psi)))
    avg = float(np.mean([o.psi_err.norm2 for _, o in outs]))
    bound = 6.0 / T + 0.02
    # every grid point gets a row for its norms; measured repeats the
    # strategy's grid average because the claim only bounds that average
    return [
        _partition_row(idx, params, (o.psi0.norm2, o.psi1.norm2, o.psi_err.norm2),
                       "err-grid-avg", bound, avg)
        for params, o in outs
    ]


def _partition_branches(task):
    """Exclusivity and contraction of one split at a mid-grid gamma.

    Contraction holds in both execution modes; exact branch
    orthogonality is a property of the ideal threshold split only, so
    that row always uses the ideal route.
    """
    idx, task_seed, m, T, mode = task
    rng = np.random.default_rng(task_seed)
    s = partition.random_strategy(rng, m=m, x_width=1, z_width=1)
    psi = _random_xz_state(rng, s)
    grid = partition.gamma_grid(1.0, T)
    gamma = float(grid[len(grid) // 2])
    params = partition.PartitionParams(m, 1, 1.0, T, gamma, mode)
    out = partition.run_G(s, params, psi)
    norms = (out.psi0.norm2, out.psi1.norm2, out.psi_err.norm2)
    e_b = 0.5 * (out.psi0.norm2 + out.psi1.norm2)
    ideal_params = partition.PartitionParams(m, 1, 1.0, T, gamma, "ideal")
    ideal_out = out if mode == "ideal" else partition.run_G(s, ideal_params, psi)
    overlap = abs(complex(np.vdot(ideal_out.psi0.amps, ideal_out.psi1.amps)))
    return [
        _partition_row(idx, ideal_params,
                       (ideal_out.psi0.norm2, ideal_out.psi1.norm2,
                        ideal_out.psi_err.norm2),
                       "branch-exclusivity", config.RESIDUAL_TOL, overlap),
        _partition_row(idx, params, norms, "branch-contraction",
                       0.5 * psi.norm2 + 1e-9, e_b),
    ]


def _partition_test_round(task):
    """Worst fixed-rest-challenge test acceptance of the low branch.

    The bound is proved for the exact split, so this row is always
    computed on the ideal route regardless of the configured mode.
    """
    idx, task_seed, m, T, _mode = task
    rng = np.random.default_rng(task_seed)
    s = partition.random_strategy(rng, m=m, x_width=1, z_width=1, controlled=True)
    grid = partition.gamma_grid(1.0, T)
    gamma = float(grid[len(grid) // 2])
    params = partition.PartitionParams(m, 1, 1.0, T, gamma, "ideal")
    out = None
    for _ in range(20):
        psi = _random_xz_state(rng, s)
        out = partition.run_G(s, params, psi)
        if out.psi0.norm2 > 1e-9:
            break
    norms = (out.psi0.norm2, out.psi1.norm2, out.psi_err.norm2)
    psi0 = StateVector(s.xz_layout(), out.psi0.amps / np.sqrt(out.psi0.norm2))
    worst = 0.0
    for rest in range(1 << (m - 1)):
        tail = format(rest, f"0{m - 1}b") if m > 1 else ""
        worst = max(worst, partition.test_round_accept_prob(s, 1, "0" + tail, psi0))
    bound = 2.0 ** (m - 1) * gamma + 1e-6
    return [_partition_row(idx, params, norms, "test-round", bound, worst)]


def _partition_chain_remainder(task):
    """Exhaustive challenge average of the surviving remainder mass.

    The 2^-m average is exact for the ideal split, so this row ignores
    the configured mode.
    """
    idx, task_seed, m, T, _mode = task
    mode = "ideal"
    rng = np.random.default_rng(task_seed)
    s = partition.random_strategy(rng, m=m, x_width=1, z_width=1)
    psi = _random_xz_state(rng, s)
    grid = partition.gamma_grid(1.0, T)
    gammas = tuple(float(grid[int(v)]) for v in rng.integers(0, len(grid), size=m))
    kept = rem = err = 0.0
    for cbits in range(1 << m):
        c = format(cbits, f"0{m}b")
        chain = partition.partition_chain(s, gammas, c, psi,
                                          gamma0=1.0, T=T, mode=mode)
        kept += sum(chain.kept_norms2)
        rem += chain.remainder_norm2
        err += sum(chain.err_norms2)
    shots = float(1 << m)
    params = partition.PartitionParams(m, 1, 1.0, T, gammas[0], mode)
    return [_partition_row(idx, params, (kept / shots, rem / shots, err / shots),
                           "chain-remainder-avg", 2.0 ** -m + 1e-9, rem / shots)]


def _partition_chain_grid(task):
    """Accumulated defect mass averaged over the full gamma-tuple grid."""
    idx, task_seed, m, T, mode = task
    rng = np.random.default_rng(task_seed)
    s = partition.random_strategy(rng, m=m, x_width=1, z_width=1)
    psi = _random_xz_state(rng, s)
    grid = [float(g) for g in partition.gamma_grid(1.0, T)]
    total = kept = rem = 0.0
    count = 0
    for flat in range(len(grid) ** m):
        digits, v = [], flat
        for _ in range(m):
            digits.append(grid[v % len(grid)])
            v //= len(grid)
        c = format(int(rng.integers(1 << m)), f"0{m}b")
        chain = partition.partition_chain(s, tuple(digits), c, psi,
                                          gamma0=1.0, T=T, mode=mode)
        total += sum(chain.err_norms2)
        kept += sum(chain.kept_norms2)
        rem += chain.remainder_norm2
        count += 1
    params = partition.PartitionParams(m, 1, 1.0, T, grid[len(grid) // 2], mode)
    bound = 6.0 * m * m / T + 0.05
    return [_partition_row(idx, params, (kept / count, rem / count, total / count),
                           "chain-err-grid-avg", bound, total / count)]


def _run_partition(cfg: ExperimentConfig):
    p = cfg.params
    m, T, mode = p["m"], p["T"], p["mode"]
    n_str, n_grid = p["strategies"], p["grid_strategies"]
    seeds = _task_seeds(cfg.seed, 4 * n_str + n_grid)
    tasks = []
    for i in range(n_str):
        tasks.append((_partition_err_grid, (i, seeds[i], T, mode)))
        tasks.append((_partition_branches, (i, seeds[n_str + i], m, T, mode)))
        tasks.append((_partition_test_round, (i, seeds[2 * n_str + i], m, T, mode)))
        tasks.append((_partition_chain_remainder, (i, seeds[3 * n_str + i], m, T, mode)))
    for i in range(n_grid):
        tasks.append((_partition_chain_grid, (i, seeds[4 * n_str + i], m, T, mode)))
    chunks = _pool_map(lambda t: t[0](t[1]), tasks)
    rows = [row for chunk in chunks for row in chunk]
    return _PARTITION_COLUMNS, rows, {}


# ---------------------------------------------------------------------------
# Experiments: repetition-sweep and fs-attack

_PROTOCOL_COLUMNS = ("m", "adversary", "trials", "accepts", "rate", "queries",
                     "claim_id", "bound", "measured")


def _protocol_row(m, adversary, stats, claim_id, bound, measured):
    return {
        "m": m, "adversary": adversary, "trials": stats.trials,
        "accepts": stats.accepts, "rate": stats.accept_rate,
        "queries": stats.queries,
        "claim_id": claim_id, "bound": bound, "measured": measured,
    }


def _sweep_point(task):
    m, n, adversary, trials, task_seed = task
    base = protocol.toy_protocol(n)
    rep = protocol.parallel_repeat(base, m)
    if adversary == "honest":
        adv = protocol.Honest(rep)
    elif adversary == "testonly":
        adv = protocol.TestOnly(rep)
    else:
        rng = np.random.default_rng(task_seed ^ 0xA5A5)
        adv = protocol.UnitaryCheat(
            partition.random_strategy(rng, m=1, x_width=n + 1, z_width=1))
    stats = protocol.run_protocol(rep, adv, "yes", trials=trials, seed=task_seed)
    return m, adversary, stats


def _run_repetition(cfg: ExperimentConfig):
    p = cfg.params
    ms = _parse_int_list(p["m_list"], "m_list")
    adversary, trials, n = p["adversary"], p["trials"], p["n"]
    seeds = _task_seeds(cfg.seed, len(ms))
    tasks = [(m, n, adversary, trials, seeds[i]) for i, m in enumerate(ms)]
    points = _pool_map(_sweep_point, tasks)
    rows = []
    prev_rate = 1.0
    for m, name, stats in points:
        if name == "testonly":
            expect = protocol.testonly_rate_oracle(m)
            sigma = float(np.sqrt(expect * (1.0 - expect) / stats.trials))
            row = _protocol_row(m, name, stats, "testonly-rate",
                                3.0 * sigma + 1e-12, abs(stats.accept_rate - expect))
        elif name == "honest":
            expect = protocol.honest_rate_oracle(n, m)
            sigma = float(np.sqrt(expect * (1.0 - expect) / stats.trials))
            row = _protocol_row(m, name, stats, "honest-rate",
                                3.0 * sigma + 1e-12, abs(stats.accept_rate - expect))
        else:
            # product structure: more coordinates can only hurt the cheat
            row = _protocol_row(m, name, stats, "cheat-nonincreasing",
                                prev_rate + 0.03, stats.accept_rate)
            prev_rate = stats.accept_rate
        rows.append(row)
    return _PROTOCOL_COLUMNS, rows, {}


def _fs_point(task):
    kind, m, n, trials, budget, task_seed = task
    base = protocol.parallel_repeat(protocol.toy_protocol(n), m)
    fs = protocol.fiat_shamir(base, protocol.OracleTable(task_seed ^ 0x0F5, m))
    if kind == "honest":
        adv = protocol.Honest(base)
    else:
        adv = protocol.FsGrinder(budget, protocol.TestOnly(base))
    stats = protocol.run_protocol(fs, adv, "yes", trials=trials, seed=task_seed)
    return kind, budget, stats


def _run_fs(cfg: ExperimentConfig):
    p = cfg.params
    m, n, trials = p["m"], p["n"], p["trials"]
    budgets = _parse_int_list(p["budgets"], "budgets")
    seeds = _task_seeds(cfg.seed, len(budgets) + 1)
    tasks = [("honest", m, n, trials, 0, seeds[0])]
    tasks += [("grind", m, n, trials, q, seeds[1 + i])
              for i, q in enumerate(budgets)]
    points = _pool_map(_fs_point, tasks)
    rows = []
    for kind, budget, stats in points:
        if kind == "honest":
            rows.append(_protocol_row(m, "honest", stats, "fs-completeness",
                                      0.01, 1.0 - stats.accept_rate))
        else:
            expect = protocol.grinder_rate_oracle(m, budget)
            sigma = float(np.sqrt(expect * (1.0 - expect) / stats.trials))
            rows.append(_protocol_row(m, f"grinder[{budget}]", stats,
                                      "grinder-rate", 3.0 * sigma + 1e-12,
                                      abs(stats.accept_rate - expect)))
    # hashed challenges must make reruns reproducible, not just close
    a = _fs_point(tasks[0])[2]
    same = (a.accepts == points[0][2].accepts and a.queries == points[0][2].queries)
    rows.append(_protocol_row(m, "honest-rerun", a, "fs-deterministic",
                              0.0, 0.0 if same else 1.0))
    return _PROTOCOL_COLUMNS, rows, {}


# ---------------------------------------------------------------------------
# Experiment: effverify-demo

_EFF_COLUMNS = ("session", "flow", "n", "m", "time_bound", "verdict",
                "verifier_ops", "prover_ops", "message_bytes",
                "claim_id", "bound", "measured")

_EFF_SWEEP = (256, 1024, 4096)


def _eff_session(task):
    idx, task_seed, n, m, time_bound, flow = task
    suite = effverify.make_stub_suite(task_seed)
    inner = effverify.toy_inner(n, m, fs_seed=task_seed ^ 0x7E57)
    runner = (effverify.run_two_round_fs if flow == "two-round"
              else effverify.run_four_round)
    verdict, ses = runner(suite, inner, "yes", prover="honest",
                          seed=task_seed, time_bound=time_bound)
    return idx, verdict, ses


def _eff_row(idx, flow, n, m, time_bound, verdict, report, claim_id, bound, measured):
    return {
        "session": idx, "flow": flow, "n": n, "m": m, "time_bound": time_bound,
        "verdict": int(verdict), "verifier_ops": report.verifier_ops,
        "prover_ops": report.prover_ops, "message_bytes": report.message_bytes,
        "claim_id": claim_id, "bound": bound, "measured": measured,
    }


def _run_effverify(cfg: ExperimentConfig):
    p = cfg.params
    n, m, time_bound, flow = p["n"], p["m"], p["time_bound"], p["flow"]
    seeds = _task_seeds(cfg.seed, p["trials"] + len(_EFF_SWEEP))
    tasks = [(i, seeds[i], n, m, time_bound, flow) for i in range(p["trials"])]
    results = _pool_map(_eff_session, tasks)
    rows, dumps = [], []
    for idx, verdict, ses in results:
        report = effverify.cost_report(ses)
        rows.append(_eff_row(idx, flow, n, m, time_bound, verdict, report,
                             "eff-completeness", 0.0, 0.0 if verdict else 1.0))
        dumps.append(ses.dump())

    # cost scaling probe: one session per time bound, fixed seed
    sweep = []
    for j, tb in enumerate(_EFF_SWEEP):
        _, verdict, ses = _eff_session((j, seeds[p["trials"] + j], n, m, tb, flow))
        sweep.append((tb, verdict, effverify.cost_report(ses)))
    v_delta = sweep[-1][2].verifier_ops - sweep[0][2].verifier_ops
    logs_t = np.log([float(tb) for tb, _, _ in sweep])
    logs_p = np.log([float(r.prover_ops) for _, _, r in sweep])
    slope = float(np.polyfit(logs_t, logs_p, 1)[0])
    tb, verdict, report = sweep[-1]
    rows.append(_eff_row(-1, "sweep", n, m, tb, verdict, report,
                         "eff-verifier-flat", 16.0, float(v_delta)))
    rows.append(_eff_row(-1, "sweep", n, m, tb, verdict, report,
                         "eff-prover-linear", 0.0, max(0.0, 0.9 - slope)))
    return _EFF_COLUMNS, rows, {"sessions": dumps}


# ---------------------------------------------------------------------------
# Output files

_RUNNERS = {
    "jordan-demo": _run_jordan,
    "partition-claims": _run_partition,
    "repetition-sweep": _run_repetition,
    "fs-attack": _run_fs,
    "effverify-demo": _run_effverify,
}


def _write_csv(path: str, columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row[c] for c in columns])
    _write_text(path, buf.getvalue())


def _write_json(path: str, payload: dict):
    _write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_text(path: str, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise RuntimeFailure(f"cannot write {path}: {exc}")


def summarize(columns, rows) -> str:
    """One line per claim: the worst row decides the printed margin."""
    lines = []
    order, worst = [], {}
    for row in rows:
        cid = row["claim_id"]
        if cid not in worst:
            order.append(cid)
            worst[cid] = (row, 0)
        ref, count = worst[cid]
        margin_new = float(row["bound"]) - float(row["measured"])
        margin_old = float(ref["bound"]) - float(ref["measured"])
        worst[cid] = (row if margin_new < margin_old else ref, count + 1)
    for cid in order:
        row, count = worst[cid]
        bound, measured = float(row["bound"]), float(row["measured"])
        verdict = "measured <= bound" if measured <= bound else "measured > bound FAIL"
        lines.append(f"{cid}: bound {_cell(bound)} measured {_cell(measured)} "
                     f"{verdict} [{count} rows]")
    return "\n".join(lines)


def run(cfg: ExperimentConfig, stream=None) -> int:
    """Execute a validated config; returns the process exit code."""
    stream = stream if stream is not None else sys.stdout
    try:
        columns, raw_rows, extra = _RUNNERS[cfg.command](cfg)
        rows = _stringify_rows(columns, raw_rows)
        if cfg.fmt == "csv":
            _write_csv(cfg.out, columns, rows)
        else:
            payload = {
                "command": cfg.command,
                "seed": cfg.seed,
                "params": dict(sorted(cfg.params.items())),
                "columns": list(columns),
                "rows": rows,
            }
            payload.update(extra)
            _write_json(cfg.out, payload)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeFailure as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(rows)} rows to {cfg.out}", file=stream)
    print(summarize(columns, rows), file=stream)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Rendering

def _load_rows(path: str):
    """Read a data file back as (columns, rows-of-strings)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}")
    if not text.strip():
        raise ParseError(f"{path} is empty")
    if path.endswith(".json") or text.lstrip()[0] in "{[":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}")
        if not isinstance(payload, dict) or "columns" not in payload or "rows" not in payload:
            raise ParseError(f"{path}: JSON data files need 'columns' and 'rows'")
        columns = payload["columns"]
        if (not isinstance(columns, list) or not columns
                or not all(isinstance(c, str) for c in columns)):
            raise ParseError(f"{path}: malformed column list")
        rows = []
        for row in payload["rows"]:
            if not isinstance(row, dict) or set(columns) - set(row):
                raise ParseError(f"{path}: row does not match columns")
            rows.append({c: row[c] if isinstance(row[c], str) else _cell(row[c])
                         for c in columns})
        return list(columns), rows
    reader = csv.reader(io.StringIO(text))
    table = [r for r in reader if r]
    if not table:
        raise ParseError(f"{path} holds no CSV header")
    columns = table[0]
    if len(columns) == 1 and "  " in columns[0]:
        raise ParseError(f"{path} looks like a rendered table, not a CSV data file")
    if len(set(columns)) != len(columns) or any(not c for c in columns):
        raise ParseError(f"{path}: header names must be unique and non-empty")
    rows = []
    for r in table[1:]:
        if len(r) != len(columns):
            raise ParseError(f"{path}: row width {len(r)} != header width {len(columns)}")
        rows.append(dict(zip(columns, r)))
    return columns, rows


def render_table(columns, rows) -> str:
    """Aligned text table; appends margin and pass unless already present."""
    columns = list(columns)
    derive = ("bound" in columns and "measured" in columns
              and "pass" not in columns and "margin" not in columns)
    if derive:
        columns += ["margin", "pass"]
    body = []
    for row in rows:
        cells = dict(row)
        if derive:
            try:
                bound = float(row["bound"])
                measured = float(row["measured"])
            except (ValueError, TypeError):
                raise ParseError(f"non-numeric bound/measured in row {row!r}")
            cells["margin"] = _cell(bound - measured)
            cells["pass"] = "yes" if measured <= bound else "no"
        missing = [c for c in columns if c not in cells or cells[c] == ""]
        if missing:
            raise ParseError(f"row missing columns {missing}")
        body.append([str(cells[c]) for c in columns])
    widths = [max(len(c), *(len(r[j]) for r in body)) if body else len(c)
              for j, c in enumerate(columns)]
    def line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    out = [line(columns), line(["-" * w for w in widths])]
    out.extend(line(r) for r in body)
    return "\n".join(out) + "\n"


def parse_table(text: str):
    """Inverse of render_table over its own output."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty table")
    split = lambda ln: re.split(r" {2,}", ln.strip())
    columns = split(lines[0])
    rows = []
    for ln in lines[1:]:
        if set(ln) <= {"-", " "}:
            continue
        cells = split(ln)
        if len(cells) != len(columns):
            raise ParseError(f"table row width {len(cells)} != header width {len(columns)}")
        rows.append(dict(zip(columns, cells)))
    return columns, rows


def render_summary(data_file: str) -> str:
    """Render a CSV or JSON data file as an aligned pass/fail table."""
    columns, rows = _load_rows(data_file)
    return render_table(columns, rows)


# ---------------------------------------------------------------------------
# Entry point

def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvqc-lab",
        description="desk-scale experiments for verifiable delegated computation")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cp = sub.add_parser(name, help=f"run the {name} experiment")
        cp.add_argument("--config", default=None, help="JSON file of parameter overrides")
        cp.add_argument("--set", dest="sets", action="append", default=[],
                        metavar="KEY=VALUE", help="override a single parameter")
        cp.add_argument("--seed", type=int, default=None, required=False)
        cp.add_argument("--out", default=None, help="output data file path")
        cp.add_argument("--format", dest="fmt", choices=("csv", "json"), default=None)
        if name == "effverify-demo":
            cp.add_argument("--inner", default=None, help="inner protocol (toy)")
            cp.add_argument("--suite", default=None, help="backend suite (stub)")
            cp.add_argument("--time-bound", dest="time_bound", type=int, default=None)
            cp.add_argument("--trials", type=int, default=None)
    rp = sub.add_parser("render", help="pretty-print a data file")
    rp.add_argument("data_file")
    return parser


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if args.command == "render":
        try:
            sys.stdout.write(render_summary(args.data_file))
        except ParseError as exc:
            print(f"parse error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        return EXIT_OK
    sets = list(args.sets)
    for flag in ("inner", "suite", "time_bound", "trials"):
        value = getattr(args, flag, None)
        if value is not None:
            sets.append(f"{flag}={value}")
    try:
        cfg = build_config(args.command, seed=args.seed, out=args.out,
                           fmt=args.fmt, config_path=args.config, sets=sets)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
