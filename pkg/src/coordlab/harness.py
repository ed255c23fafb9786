"""Experiment configs, seeded Monte Carlo sweeps and result files.

Config files are JSON objects. Unknown keys are rejected and every
violation is reported at once. Example::

    {"preset": {"name": "binary_example", "p": 0.4, "eps": 0.1, "d": 0.2},
     "scheme": "hybrid", "n_values": [100, 300, 900], "trials_per_n": 100,
     "epsilon_policy": [0.15, 0.12], "subblock": 50, "rule": "best",
     "master_seed": 20240611}

Seeds
-----
Every (scheme, n, trial) gets its own 64-bit seed, the first 8 bytes
(little endian) of BLAKE2b keyed with ``SEED_KEY`` over the ASCII text
``"{master_seed}:{scheme}:{n}:{trial}"``. Codebooks use ``trial =
"codebook"`` with ``n`` replaced by ``"sub{subblock}"`` for product codes
(one component code for every n); witness searches use ``n = 0, trial =
"search"``.
Results therefore do not depend on thread count or execution order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import prob
from .blockmarkov import build_blockmarkov, run_chain
from .hybrid import build_hybrid, build_separation, run_hybrid_trial, run_separation_trial
from .presets import PRESETS, get_preset
from .region import (CAUSAL, NONCAUSAL, SEPARATION, STRICT, CoordinationTarget, SearchConfig, certify,
                     check_region, target_from_dict, witness_from_dict)

SEED_KEY = b"coordlab/seed/v1"

SCHEMES = ("hybrid", "separation", "blockmarkov_strict", "blockmarkov_causal", "region_check")
REGION_OF = {"hybrid": NONCAUSAL, "separation": SEPARATION, "blockmarkov_strict": STRICT,
             "blockmarkov_causal": CAUSAL}
REGIONS = {"noncausal": NONCAUSAL, "causal": CAUSAL, "strict": STRICT, "strictly_causal": STRICT,
           "separation": SEPARATION}
BLOCKMARKOV = ("blockmarkov_strict", "blockmarkov_causal")

CONFIG_KEYS = ("preset", "problem", "target", "scheme", "n_values", "trials_per_n", "B", "epsilon_policy",
               "margins", "master_seed", "search", "subblock", "rule", "witness", "tv_threshold",
               "binning", "rates")
SEARCH_KEYS = ("region", "card_u", "card_v", "starts")

COLUMNS = ("scheme", "n", "trial", "seed", "status", "tv", "tv_omniscient", "encode_ok", "decode_ok",
           "index_correct", "subblocks", "subblocks_ok", "exact", "slack", "error")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = [problems] if isinstance(problems, str) else list(problems)
        super().__init__("; ".join(self.problems))


class HarnessError(RuntimeError):
    """Experiment cannot start (no witness, unwritable output...)."""


class NoWitness(HarnessError):
    pass


# ------------------------------------------------------------------ config

@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    scheme: str
    master_seed: int
    n_values: tuple = ()
    trials_per_n: int = 1
    preset: dict | None = None
    problem: dict | None = None
    target: dict | None = None
    B: int | None = None
    epsilon_policy: object = "schedule"
    margins: object = None
    search: dict = field(default_factory=dict)
    subblock: int | None = None
    rule: str = "first"
    witness: dict | None = None
    tv_threshold: float = 0.1
    binning: str = "auto"
    rates: tuple | None = None


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def parse_config(d: dict) -> ExperimentConfig:
    """Validate a config mapping; raises :class:`ConfigError` listing every problem."""
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    bad = []
    unknown = sorted(set(d) - set(CONFIG_KEYS))
    if unknown:
        bad.append(f"unknown keys {unknown} (allowed: {list(CONFIG_KEYS)})")
    scheme = d.get("scheme")
    if scheme not in SCHEMES:
        bad.append(f"scheme: must be one of {list(SCHEMES)}, got {scheme!r}")
    region_check = scheme == "region_check"
    bm = scheme in BLOCKMARKOV

    if ("preset" in d) == ("problem" in d):
        bad.append("exactly one of 'preset' and 'problem' is required")
    preset = d.get("preset")
    if isinstance(preset, str):
        preset = {"name": preset}
    if preset is not None:
        if not isinstance(preset, dict) or preset.get("name") not in PRESETS:
            bad.append(f"preset: needs a 'name' from {sorted(PRESETS)}")
        elif "target" in d:
            bad.append("target: not allowed with a preset (the preset defines it)")
    if "problem" in d:
        p = d["problem"]
        if not isinstance(p, dict) or set(p) != {"source", "channel"}:
            bad.append("problem: must be an object with exactly the keys 'source' and 'channel'")
        if "target" not in d:
            bad.append("target: required with 'problem'")

    if "master_seed" not in d:
        bad.append("master_seed: required")
    elif not _is_int(d["master_seed"]) or not 0 <= d["master_seed"] < 2 ** 64:
        bad.append("master_seed: must be an integer in [0, 2^64)")

    n_values = d.get("n_values")
    if n_values is None:
        if not region_check:
            bad.append("n_values: required")
        n_values = []
    elif not isinstance(n_values, list) or not n_values or not all(_is_int(n) and n > 0 for n in n_values):
        bad.append("n_values: must be a nonempty list of positive integers")
        n_values = []
    elif len(set(n_values)) != len(n_values):
        bad.append("n_values: duplicates")

    trials = d.get("trials_per_n")
    if trials is None:
        if not region_check:
            bad.append("trials_per_n: required")
        trials = 1
    elif not _is_int(trials) or trials < 1:
        bad.append("trials_per_n: must be a positive integer")

    B = d.get("B")
    if bm:
        if B is None:
            bad.append("B: required for block-Markov schemes")
        elif not _is_int(B) or B < 2:
            bad.append("B: must be an integer >= 2")
    elif B is not None:
        bad.append(f"B: only valid for {list(BLOCKMARKOV)}")

    eps = d.get("epsilon_policy", "schedule")
    stages = 3 if bm else 2
    if isinstance(eps, list):
        if len(eps) != stages or not all(_is_num(e) and 0 < e <= 1 for e in eps):
            bad.append(f"epsilon_policy: a list needs {stages} numbers in (0, 1]")
        else:
            eps = tuple(eps)
    elif eps != "schedule" and not (_is_num(eps) and 0 < eps <= 1):
        bad.append("epsilon_policy: 'schedule', a number in (0, 1] or a list of per-stage numbers")

    margins = d.get("margins")
    if isinstance(margins, list):
        if not all(_is_num(m) and m > 0 for m in margins) or len(margins) != (3 if bm else 2 if scheme == "separation" else 1):
            bad.append("margins: wrong length or non-positive entries")
        else:
            margins = tuple(margins)
    elif margins is not None and not (_is_num(margins) and margins > 0):
        bad.append("margins: must be a positive number, a list or null")

    search = d.get("search", {})
    if not isinstance(search, dict):
        bad.append("search: must be an object")
        search = {}
    else:
        extra = sorted(set(search) - set(SEARCH_KEYS))
        if extra:
            bad.append(f"search: unknown keys {extra} (allowed: {list(SEARCH_KEYS)})")
        for k in ("card_u", "card_v", "starts"):
            if k in search and (not _is_int(search[k]) or search[k] < 1):
                bad.append(f"search.{k}: must be a positive integer")
        if region_check and search.get("region") not in REGIONS:
            bad.append(f"search.region: required for region_check, one of {sorted(REGIONS)}")
        elif not region_check and "region" in search:
            bad.append("search.region: only valid for region_check (other schemes imply the region)")

    sub = d.get("subblock")
    if sub is not None:
        if not _is_int(sub) or sub < 1:
            bad.append("subblock: must be a positive integer")
        else:
            bad += [f"subblock: {sub} does not divide n={n}" for n in n_values if _is_int(n) and n % sub]

    rule = d.get("rule", "first")
    if rule not in ("first", "best"):
        bad.append("rule: 'first' or 'best'")
    thr = d.get("tv_threshold", 0.1)
    if not (_is_num(thr) and thr >= 0):
        bad.append("tv_threshold: must be a nonnegative number")
    binning = d.get("binning", "auto")
    rates = d.get("rates")
    if not bm and ("binning" in d or "rates" in d):
        bad.append("binning/rates: only valid for block-Markov schemes")
    if binning not in ("auto", "random", "singleton"):
        bad.append("binning: 'auto', 'random' or 'singleton'")
    if rates is not None:
        if not (isinstance(rates, list) and len(rates) == 2 and all(_is_num(r) and r >= 0 for r in rates)):
            bad.append("rates: [R_v, R_m] with nonnegative numbers")
        else:
            rates = tuple(rates)
    witness = d.get("witness")
    if witness is not None and (region_check or scheme == "separation"):
        bad.append("witness: not used by this scheme")
    if region_check and any(k in d for k in ("subblock", "rule", "epsilon_policy", "margins")):
        bad.append("region_check takes no code parameters (subblock, rule, epsilon_policy, margins)")
    if bad:
        raise ConfigError(bad)
    return ExperimentConfig(
        scheme=scheme, master_seed=d["master_seed"], n_values=tuple(n_values), trials_per_n=trials,
        preset=preset, problem=d.get("problem"), target=d.get("target"), B=B, epsilon_policy=eps,
        margins=margins, search=dict(search), subblock=sub, rule=rule, witness=witness,
        tv_threshold=float(thr), binning=binning, rates=rates,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror or e}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: JSON parse error at line {e.lineno}, column {e.colno}: {e.msg}") from None
    return parse_config(d)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {"scheme": cfg.scheme, "master_seed": cfg.master_seed}
    if cfg.n_values:
        out["n_values"] = list(cfg.n_values)
    out["trials_per_n"] = cfg.trials_per_n
    for k in ("preset", "problem", "target", "B", "search", "subblock", "witness", "rates"):
        v = getattr(cfg, k)
        if v not in (None, {}):
            out[k] = list(v) if isinstance(v, tuple) else v
    eps = cfg.epsilon_policy
    out["epsilon_policy"] = list(eps) if isinstance(eps, tuple) else eps
    if cfg.margins is not None:
        out["margins"] = list(cfg.margins) if isinstance(cfg.margins, tuple) else cfg.margins
    if cfg.scheme != "region_check":
        out["rule"] = cfg.rule
    out["tv_threshold"] = cfg.tv_threshold
    if cfg.scheme in BLOCKMARKOV:
        out["binning"] = cfg.binning
    return out


# ------------------------------------------------------------------- seeds

def derive_seed(master_seed: int, scheme: str, n, trial) -> int:
    msg = f"{master_seed}:{scheme}:{n}:{trial}".encode("ascii")
    return int.from_bytes(hashlib.blake2b(msg, digest_size=8, key=SEED_KEY).digest(), "little")


# ----------------------------------------------------------------- running

@dataclass(eq=False)
class ResultsTable:
    scheme: str
    n_values: tuple
    tv_threshold: float
    rows: list
    aggregates: list
    seconds: float = 0.0           # wall time; never serialised

    def column(self, name: str, n: int | None = None) -> list:
        return [r[name] for r in self.rows if n is None or r["n"] == n]


def resolve_problem(cfg: ExperimentConfig) -> tuple:
    """Return (target, witnesses) for the config."""
    if cfg.preset is not None:
        params = {k: v for k, v in cfg.preset.items() if k != "name"}
        try:
            pr = get_preset(cfg.preset["name"], **params)
        except TypeError as e:
            raise ConfigError(f"preset {cfg.preset['name']}: {e}") from None
        except ValueError as e:
            raise ConfigError(f"preset {cfg.preset['name']}: {e}") from None
        return pr.target, dict(pr.witnesses)
    try:
        source = prob.from_dict(cfg.problem["source"])
        channel = prob.from_dict(cfg.problem["channel"])
        joint = cfg.target["joint"] if cfg.target.get("type") == "target" else cfg.target
        t = CoordinationTarget(source, channel, prob.from_dict(joint))
    except (ValueError, KeyError, TypeError, AttributeError) as e:
        raise ConfigError(f"problem/target: {e}") from None
    return t, {}


def _search_config(cfg: ExperimentConfig, seed: int) -> SearchConfig:
    return SearchConfig(starts=cfg.search.get("starts", 64), seed=seed % 2 ** 32)


def find_witness(cfg: ExperimentConfig, target: CoordinationTarget, known: dict):
    region = REGION_OF[cfg.scheme]
    if cfg.witness is not None:
        try:
            w = witness_from_dict(cfg.witness)
        except ValueError as e:
            raise ConfigError(f"witness: {e}") from None
        if w.scheme != region:
            raise ConfigError(f"witness: scheme {w.scheme} does not match {cfg.scheme}")
        c = certify(target, w)
        if not c.ok:
            raise NoWitness(f"supplied witness fails its certificate (TV {c.tv:.3g}, slack {c.slack:.4g})")
        return w
    if region in known:
        return known[region]
    if region == SEPARATION:
        return None
    seed = derive_seed(cfg.master_seed, cfg.scheme, 0, "search")
    v = check_region(target, region, cfg.search.get("card_u"), cfg.search.get("card_v"), _search_config(cfg, seed))
    if not v.member:
        raise NoWitness(f"no {region} witness found ({v.status}): {v.search_log.get('problems', '')}")
    return v.witness


def _eps(cfg: ExperimentConfig):
    return None if cfg.epsilon_policy == "schedule" else cfg.epsilon_policy


def _row(cfg, n, trial, seed, **kw) -> dict:
    row = dict.fromkeys(COLUMNS)
    row.update(scheme=cfg.scheme, n=n, trial=trial, seed=seed, status="ok")
    row.update(kw)
    return row


def _build(cfg: ExperimentConfig, target, witness, n: int):
    # a product code keeps one component code for every n
    key = n if cfg.subblock is None else f"sub{cfg.subblock}"
    seed = derive_seed(cfg.master_seed, cfg.scheme, key, "codebook")
    eps = _eps(cfg)
    if cfg.scheme == "hybrid":
        e = (None, None) if eps is None else (eps, eps) if np.isscalar(eps) else eps
        return build_hybrid(target, witness, n, cfg.margins, e[0], e[1], seed, cfg.subblock, cfg.rule)
    if cfg.scheme == "separation":
        m = (cfg.margins, cfg.margins) if np.isscalar(cfg.margins) else cfg.margins
        return build_separation(target, n, m, eps, seed, cfg.subblock, rule=cfg.rule)
    return build_blockmarkov(target, witness, n, cfg.B, cfg.margins, eps, seed, cfg.subblock,
                             cfg.binning, cfg.rates, cfg.rule)


def _trial(cfg, target, code, slack, n, trial) -> dict:
    seed = derive_seed(cfg.master_seed, cfg.scheme, n, trial)
    try:
        if cfg.scheme in ("hybrid", "separation"):
            run = run_hybrid_trial if cfg.scheme == "hybrid" else run_separation_trial
            r = run(code, target, seed, seed)
            return _row(cfg, n, trial, seed, tv=r.tv, tv_omniscient=r.tv_omniscient, encode_ok=r.encode_ok,
                        decode_ok=r.decode_ok, index_correct=r.index_correct, subblocks=r.subblocks,
                        subblocks_ok=r.subblocks - r.wrong_index, slack=slack)
        r = run_chain(code, target, seed, seed)
        blocks = r.per_block
        return _row(cfg, n, trial, seed, tv=float(np.mean([b.tv for b in blocks])),
                    tv_omniscient=float(np.mean([b.tv_omniscient for b in blocks])),
                    encode_ok=all(b.cover_ok for b in blocks), decode_ok=all(b.v_decode_ok for b in blocks),
                    index_correct=all(b.bin_decode_ok for b in blocks),
                    subblocks=sum(len(b.sub_ok) for b in blocks), subblocks_ok=sum(sum(b.sub_ok) for b in blocks),
                    exact=all(b.exact_on_ok for b in blocks), slack=slack)
    except Exception as e:  # recorded, never aborts the sweep
        return _row(cfg, n, trial, seed, status="error", error=f"{type(e).__name__}: {e}")


def _region_trial(cfg, target, trial) -> dict:
    seed = derive_seed(cfg.master_seed, cfg.scheme, 0, trial)
    region = REGIONS[cfg.search["region"]]
    try:
        v = check_region(target, region, cfg.search.get("card_u"), cfg.search.get("card_v"), _search_config(cfg, seed))
    except Exception as e:
        return _row(cfg, 0, trial, seed, status="error", error=f"{type(e).__name__}: {e}")
    tv = slack = None
    if v.witness is not None:
        c = certify(target, v.witness)
        tv, slack = c.tv, c.slack
    return _row(cfg, 0, trial, seed, status=v.status, tv=tv, slack=slack)


def run_experiment(cfg: ExperimentConfig, threads: int = 1, master_seed: int | None = None) -> ResultsTable:
    """Sweep n_values x trials. ``master_seed`` overrides the config's."""
    if master_seed is not None:
        cfg = ExperimentConfig(**{**cfg.__dict__, "master_seed": master_seed})
    t0 = time.perf_counter()
    target, known = resolve_problem(cfg)
    rows = []
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        if cfg.scheme == "region_check":
            rows = list(pool.map(lambda k: _region_trial(cfg, target, k), range(cfg.trials_per_n)))
        else:
            witness = find_witness(cfg, target, known)
            slack = None if witness is None else witness.slack
            for n in cfg.n_values:
                try:
                    code = _build(cfg, target, witness, n)
                except Exception as e:
                    err = f"{type(e).__name__}: {e}"
                    rows += [_row(cfg, n, k, derive_seed(cfg.master_seed, cfg.scheme, n, k), status="error", error=err)
                             for k in range(cfg.trials_per_n)]
                    continue
                rows += list(pool.map(lambda k: _trial(cfg, target, code, slack, n, k), range(cfg.trials_per_n)))
    n_values = (0,) if cfg.scheme == "region_check" else cfg.n_values
    return ResultsTable(cfg.scheme, n_values, cfg.tv_threshold, rows, aggregate(rows, n_values, cfg.tv_threshold),
                        time.perf_counter() - t0)


def aggregate(rows: list, n_values, threshold: float) -> list:
    """Per n: median and mean TV over successful rows and P[TV > threshold]."""
    out = []
    for n in n_values:
        sel = [r for r in rows if r["n"] == n]
        tv = np.array([r["tv"] for r in sel if r["status"] != "error" and r["tv"] is not None], dtype=float)
        tv = tv[np.isfinite(tv)]
        out.append({
            "n": n, "trials": len(sel), "errors": sum(r["status"] == "error" for r in sel),
            "median_tv": float(np.median(tv)) if tv.size else None,
            "mean_tv": float(tv.mean()) if tv.size else None,
            "failure_rate": float((tv > threshold).mean()) if tv.size else None,
        })
    return out


def check_aggregates(table: ResultsTable) -> bool:
    return aggregate(table.rows, table.n_values, table.tv_threshold) == table.aggregates


# ----------------------------------------------------------------- output

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def results_csv(table: ResultsTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in table.rows:
        w.writerow([_fmt(r[c]) for c in COLUMNS])
    return buf.getvalue()


def results_json(table: ResultsTable) -> str:
    def clean(v):
        if isinstance(v, (bool, np.bool_)):
            return bool(v)
        if isinstance(v, float) and not math.isfinite(v):
            return repr(v)
        return v
    doc = {"scheme": table.scheme, "tv_threshold": table.tv_threshold, "columns": list(COLUMNS),
           "rows": [{c: clean(r[c]) for c in COLUMNS} for r in table.rows], "aggregates": table.aggregates}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _write(path, text: str):
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as e:
        raise HarnessError(f"cannot write {path}: {e.strerror or e}") from None


def emit_results(table: ResultsTable, fmt: str = "csv", path=None) -> str:
    """Serialise the table; write it to ``path`` when given. Returns the text."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    text = results_csv(table) if fmt == "csv" else results_json(table)
    if path is not None:
        _write(path, text)
    return text


def emit_plotdata(table: ResultsTable, path=None) -> str:
    """One line per n: x = n, y = median TV, y2 = failure rate."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("n", "median_tv", "mean_tv", "failure_rate", "trials", "errors"))
    for a in table.aggregates:
        w.writerow([_fmt(a[k]) for k in ("n", "median_tv", "mean_tv", "failure_rate", "trials", "errors")])
    text = buf.getvalue()
    if path is not None:
        _write(path, text)
    return text


_INT_COLS = ("n", "trial", "seed", "subblocks", "subblocks_ok")
_BOOL_COLS = ("encode_ok", "decode_ok", "index_correct", "exact")
_FLOAT_COLS = ("tv", "tv_omniscient", "slack")


def read_results_csv(text: str) -> list:
    """Parse :func:`results_csv` output back into typed rows."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {}
        for c in COLUMNS:
            v = rec[c]
            if v == "":
                row[c] = None
            elif c in _INT_COLS:
                row[c] = int(v)
            elif c in _BOOL_COLS:
                row[c] = v == "1"
            elif c in _FLOAT_COLS:
                row[c] = float(v)
            else:
                row[c] = v
        rows.append(row)
    return rows
