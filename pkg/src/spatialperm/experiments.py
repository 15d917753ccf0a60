"""Experiment registry, seeded runner, and result persistence.

Each experiment is a pure function of its configuration: every random
stream is derived from (seed, label) with a counter-based generator, all
reductions happen in replica order, and each run writes

* ``result.csv`` or ``result.json``: the result table (byte-reproducible
  for a fixed config and seed),
* ``run.json``: the run record (config echo, summary, wall time, library
  version, RNG identifier, backend).

Worker parallelism only changes how replica indices are scheduled, never
which stream a replica reads, so multi-worker runs produce identical
result values.
"""

from __future__ import annotations

import csv
import json
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .cycles import contact_mask, strand_counts_from_psi, traversal_ids_by_start_row
from .dynamics import DynState, run_updates, split_merge_probe, split_merge_rates
from .gapchain import build_chain, hitting_prob_up
from .hardcore import Activity, build_qtable, enumerate_columns
from .permutation import (
    StepParam,
    activity_from_step,
    occupation_to_arrows,
    rejection_sample_columns,
)
from .refmodels import pd1_largest_parts, two_sample_stats
from .streams import RNG_ID, derive_key, derive_stream
from .torus import make_dims

EXPERIMENT_NAMES = (
    "oracle-equivalence",
    "global-shift-decay",
    "glauber-stationarity",
    "splitmerge-invariant",
    "pd1-convergence",
    "contact-concentration",
    "gapchain-hitting",
    "strand-separation",
)


class UnknownExperimentError(ValueError):
    pass


class InvalidConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    m: int | None = None
    cprime: float = 1.0
    a: float = 1.0 / 3.0
    samples: int | None = None
    updates: int | None = None
    reps: int | None = None
    output_dir: str = "."
    format: str = "csv"
    workers: int = 1
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        base = {k: v for k, v in doc.items() if k in known and k != "params"}
        params = dict(doc.get("params", {}))
        extra = {k: v for k, v in doc.items() if k not in known}
        params.update(extra)
        cfg = cls(**base, params=params)
        return cfg


@dataclass
class RunRecord:
    experiment: str
    config: dict
    summary: dict
    wall_time_s: float
    version: str
    rng: str
    backend: str
    result_path: str


def load_preset(name: str) -> dict:
    if name not in EXPERIMENT_NAMES:
        raise UnknownExperimentError(
            f"unknown experiment {name!r}; known: {', '.join(EXPERIMENT_NAMES)}"
        )
    ref = resources.files("spatialperm.presets").joinpath(f"{name.replace('-', '_')}.json")
    return json.loads(ref.read_text())


def resolve_config(doc: dict) -> ExperimentConfig:
    """Merge a user config document over the experiment's preset.

    Precedence (low to high): shipped preset, config file, explicit
    overrides; merging happens key by key, with ``params`` dictionaries
    merged rather than replaced.
    """
    name = doc.get("experiment")
    if not name:
        raise InvalidConfigError("config needs an 'experiment' name")
    preset = load_preset(name)
    merged = dict(preset)
    params = dict(preset.get("params", {}))
    params.update(doc.get("params", {}))
    for k, v in doc.items():
        if k != "params" and v is not None:
            merged[k] = v
    merged["params"] = params
    merged["experiment"] = name
    return ExperimentConfig.from_dict(merged)


def _map_indices(fn, args_list, workers: int):
    """Ordered map; with workers > 1 the work is distributed but results
    come back in argument order, keeping reductions deterministic."""
    if workers <= 1:
        return [fn(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, args_list, chunksize=max(1, len(args_list) // (4 * workers) or 1)))


# ---------------------------------------------------------------------------
# oracle-equivalence

def _column_law_by_steps(m: int, act: Activity) -> dict[tuple, float]:
    occ_probs = enumerate_columns(m, act)
    law = {}
    for col, prob in occ_probs:
        steps = tuple(int(x) for x in occupation_to_arrows(col.occ[None, :])[0])
        law[steps] = prob
    return law


def _tv_counts_vs_law(counts: Counter, total: int, law: dict) -> float:
    keys = set(counts) | set(law)
    return 0.5 * sum(abs(counts.get(k, 0) / total - law.get(k, 0.0)) for k in keys)


def run_oracle_equivalence(cfg: ExperimentConfig):
    m_list = cfg.params.get("m_list", [3, 4, 5, 6, 7, 8])
    a_list = cfg.params.get("a_list", [0.25, 1.0 / 3.0])
    samples = cfg.samples or 100_000
    rows = []
    for m in m_list:
        for a in a_list:
            rng = derive_stream(cfg.seed, f"oracle/{m}/{a:.12g}")
            p = StepParam(a)
            draws = rejection_sample_columns(m, p, exclude_shifts=True,
                                             count=samples, rng=rng)
            counts = Counter(map(tuple, draws.tolist()))
            law = _column_law_by_steps(m, activity_from_step(p))
            law_unc = _column_law_by_steps(m, activity_from_step(p, uncorrected=True))
            rows.append({
                "m": m,
                "a": a,
                "samples": samples,
                "tv": _tv_counts_vs_law(counts, samples, law),
                "tv_uncorrected": _tv_counts_vs_law(counts, samples, law_unc),
            })
    tv_max = max(r["tv"] for r in rows)
    unc_third = [r["tv_uncorrected"] for r in rows if abs(r["a"] - 1.0 / 3.0) < 1e-12]
    summary = {
        "tv_max": tv_max,
        "tv_uncorrected_min_at_a_third": min(unc_third) if unc_third else None,
        "pass_corrected": tv_max < 0.01,
        "pass_uncorrected_fails": bool(unc_third) and min(unc_third) >= 0.05,
    }
    return rows, summary


# ---------------------------------------------------------------------------
# global-shift-decay

def run_global_shift_decay(cfg: ExperimentConfig):
    m_list = cfg.params.get("m_list", [4, 6, 8, 10, 12])
    a = cfg.a
    target = cfg.samples or 40_000
    rows = []
    for m in m_list:
        rng = derive_stream(cfg.seed, f"shift/{m}")
        draws = rejection_sample_columns(m, StepParam(a), exclude_shifts=False,
                                         count=target, rng=rng)
        shifts = int(np.sum(np.all(draws == 1, axis=1) | np.all(draws == -1, axis=1)))
        p_hat = shifts / target
        se = math.sqrt(max(p_hat * (1 - p_hat), 1.0 / target) / target)
        rows.append({"m": m, "bijective": target, "shifts": shifts,
                     "p_shift": p_hat, "stderr": se})
    ms = np.array([r["m"] for r in rows], dtype=float)
    ps = np.array([r["p_shift"] for r in rows])
    ses = np.array([r["stderr"] for r in rows])
    logp = np.log(ps)
    w = (ps / ses) ** 2  # delta method: var(log p) = (se/p)^2
    wx = np.sum(w * ms)
    wy = np.sum(w * logp)
    ww = np.sum(w)
    sxx = np.sum(w * ms * ms) - wx * wx / ww
    slope = (np.sum(w * ms * logp) - wx * wy / ww) / sxx
    slope_se = math.sqrt(1.0 / sxx)
    decreasing = bool(np.all(np.diff(ps) < 0))
    summary = {
        "slope": float(slope),
        "slope_se": float(slope_se),
        "strictly_decreasing": decreasing,
        "pass": decreasing and (slope + 3 * slope_se < 0),
    }
    return rows, summary


# ---------------------------------------------------------------------------
# glauber-stationarity

def _stationarity_replica(args):
    seed, m, cprime, a, updates, idx = args
    rng = derive_stream(seed, f"stat/rep/{idx}")
    dims = make_dims(m, cprime)
    state = DynState.from_equilibrium(dims, StepParam(a), rng, track=False)

    def measure(s):
        sc = s.decomposition()
        return (
            s.swap_density(),
            int(contact_mask(s.field).sum()),
            float(sc.counts.max() / dims.m),
        )

    before = measure(state)
    run_updates(state, updates, rng)
    after = measure(state)
    return before, after


def run_glauber_stationarity(cfg: ExperimentConfig):
    m = cfg.m or 128
    reps = cfg.reps or 100
    dims = make_dims(m, cfg.cprime)
    updates = cfg.updates or 10 * dims.n * dims.m
    args = [(cfg.seed, m, cfg.cprime, cfg.a, updates, i) for i in range(reps)]
    pairs = _map_indices(_stationarity_replica, args, cfg.workers)
    before = np.array([p[0] for p in pairs])
    after = np.array([p[1] for p in pairs])
    names = ["swap_density", "contact_count", "largest_normalized_cycle"]
    rows = []
    all_ok = True
    for i, name in enumerate(names):
        diff = after[:, i] - before[:, i]
        se = float(diff.std(ddof=1) / math.sqrt(reps))
        z = float(diff.mean() / se) if se > 0 else 0.0
        ok = abs(z) <= 3.0
        all_ok &= ok
        rows.append({
            "observable": name,
            "mean_before": float(before[:, i].mean()),
            "mean_after": float(after[:, i].mean()),
            "mean_diff": float(diff.mean()),
            "se_diff": se,
            "z": z,
        })
    summary = {"replicas": reps, "updates": updates, "pass": bool(all_ok),
               "max_abs_z": max(abs(r["z"]) for r in rows)}
    return rows, summary


# ---------------------------------------------------------------------------
# splitmerge-invariant

def run_splitmerge_invariant(cfg: ExperimentConfig):
    m = cfg.m or 4096
    snapshots = cfg.samples or 8
    probes = int(cfg.params.get("probes", 20_000))
    dims = make_dims(m, cfg.cprime)
    dims.require_traversals()
    rows = []
    emp, pred = [], []
    unpredicted = 0
    total_hits = 0
    for s in range(snapshots):
        rng = derive_stream(cfg.seed, f"sm/{s}")
        state = DynState.from_equilibrium(dims, StepParam(cfg.a), rng, track=False)
        sc = state.decomposition()
        probe = split_merge_probe(state, probes, rng)
        pair_rows, hits, unpred = split_merge_rates(probe, sc, dims)
        unpredicted += unpred
        total_hits += hits
        for r in pair_rows:
            r = dict(r)
            r["snapshot"] = s
            rows.append(r)
            emp.append(r["empirical_share"])
            pred.append(r["predicted_share"])
    r_coef = float(np.corrcoef(np.array(emp), np.array(pred))[0, 1])
    summary = {
        "pearson_r": r_coef,
        "pairs": len(rows),
        "accepted_changes": total_hits,
        "unpredicted_fraction": unpredicted / max(total_hits + unpredicted, 1),
        "pass": r_coef > 0.9,
    }
    return rows, summary


# ---------------------------------------------------------------------------
# pd1-convergence

def _pd1_replica(args):
    seed, m, cprime, a, idx = args
    dims = make_dims(m, cprime)
    act = activity_from_step(StepParam(a))
    key = derive_key(seed, f"pd1/{m}/sample/{idx}")
    psi = kernels.sample_return_map(dims.m, dims.n, act, key)
    sc = strand_counts_from_psi(psi, dims)
    return float(sc.counts.max() / dims.m)


def run_pd1_convergence(cfg: ExperimentConfig):
    m_list = cfg.params.get("m_list", [4096, 8192, 16384])
    samples = cfg.samples or 200
    ref_n = int(cfg.params.get("reference_samples", 1_000_000))
    ref_rng = derive_stream(cfg.seed, "pd1/reference")
    ref = pd1_largest_parts(ref_n, ref_rng)
    ref_mean = float(ref.mean())
    ref_se = float(ref.std(ddof=1) / math.sqrt(ref_n))
    rows = []
    for m in m_list:
        args = [(cfg.seed, m, cfg.cprime, cfg.a, i) for i in range(samples)]
        largest = np.array(_map_indices(_pd1_replica, args, cfg.workers))
        ts = two_sample_stats(largest, ref)
        rows.append({
            "m": m,
            "n_samples": samples,
            "mean_largest": float(largest.mean()),
            "se_largest": float(largest.std(ddof=1) / math.sqrt(samples)),
            "ref_mean": ref_mean,
            "abs_dev": abs(float(largest.mean()) - ref_mean),
            "ks_stat": ts.ks_statistic,
            "ks_p": ts.ks_pvalue,
        })
    devs = [r["abs_dev"] for r in rows]
    first = rows[0]
    summary = {
        "ref_mean": ref_mean,
        "ref_se": ref_se,
        "mean_within_tolerance": first["abs_dev"] < 0.05,
        "ks_p_first": first["ks_p"],
        "ks_pass": first["ks_p"] > 0.01,
        "trend_nonincreasing": all(devs[i + 1] <= devs[i] for i in range(len(devs) - 1)),
        "pass": first["abs_dev"] < 0.05 and first["ks_p"] > 0.01,
    }
    return rows, summary


# ---------------------------------------------------------------------------
# contact-concentration

def _contact_replica(args):
    seed, m, cprime, a, idx = args
    dims = make_dims(m, cprime)
    dims.require_traversals(2)
    act = activity_from_step(StepParam(a))
    key = derive_key(seed, f"contact/{m}/sample/{idx}")
    occ = kernels.sample_occupation(dims.m, dims.n, act, key)
    psi = kernels.compose_return_map(occ)
    sc = strand_counts_from_psi(psi, dims)
    tid, n_tr = traversal_ids_by_start_row(sc, dims.gamma)
    counts, total = kernels.pair_contact_counts(occ, tid, n_tr)
    iu = np.triu_indices(n_tr, k=1)
    vals = counts[iu].astype(np.float64)
    return len(vals), float(vals.sum()), float(np.square(vals).sum()), total


def run_contact_concentration(cfg: ExperimentConfig):
    m_list = cfg.params.get("m_list", [4096, 8192, 16384])
    samples = cfg.samples or 3
    rows = []
    for m in m_list:
        args = [(cfg.seed, m, cfg.cprime, cfg.a, i) for i in range(samples)]
        parts = _map_indices(_contact_replica, args, cfg.workers)
        n_pairs = sum(p[0] for p in parts)
        s1 = sum(p[1] for p in parts)
        s2 = sum(p[2] for p in parts)
        mean = s1 / n_pairs
        var = (s2 - n_pairs * mean * mean) / (n_pairs - 1)
        rows.append({
            "m": m,
            "samples": samples,
            "pair_count": n_pairs,
            "mean": mean,
            "variance": var,
            "cv": math.sqrt(var) / mean,
        })
    cvs = [r["cv"] for r in rows]
    by_m = {r["m"]: r["mean"] for r in rows}
    ratio = by_m[m_list[-1]] / by_m[m_list[0]] if len(m_list) > 1 else None
    summary = {
        "cv_strictly_decreasing": all(cvs[i + 1] < cvs[i] for i in range(len(cvs) - 1)),
        "mean_ratio_last_over_first": ratio,
        "ratio_in_bracket": (2.0 <= ratio <= 8.0) if ratio is not None else None,
    }
    summary["pass"] = bool(summary["cv_strictly_decreasing"]) and bool(summary["ratio_in_bracket"])
    return rows, summary


# ---------------------------------------------------------------------------
# gapchain-hitting

def run_gapchain_hitting(cfg: ExperimentConfig):
    lam = float(cfg.params.get("lam", 0.25))
    j2 = int(cfg.params.get("j2", 200))
    j1_list = cfg.params.get("j1_list", [2, 5, 10, 20, 50])
    reps = cfg.reps or 50_000
    i_max = int(cfg.params.get("i_max", 64))
    cutoffs = cfg.params.get("i_max_sweep", [i_max // 2, i_max, i_max * 2])
    rows = []
    by_cutoff = {}
    for im in cutoffs:
        chain = build_chain(build_qtable(Activity(lam), im))
        ests = {}
        for j1 in j1_list:
            rng = derive_stream(cfg.seed, f"gap/{j1}/{j2}")
            est = hitting_prob_up(chain, j1, j2, reps, rng)
            ests[j1] = est
            rows.append({
                "i_max": im,
                "lambda": lam,
                "j1": j1,
                "j2": j2,
                "reps": reps,
                "estimate": est.estimate,
                "stderr": est.stderr,
                "scaled": est.estimate * j2 / j1,
            })
        by_cutoff[im] = ests
    scaled = [r["scaled"] for r in rows if r["i_max"] == i_max]
    bracket = max(scaled) / min(scaled)
    shifts = []
    for im in cutoffs:
        if im == i_max:
            continue
        for j1 in j1_list:
            a, b = by_cutoff[i_max][j1], by_cutoff[im][j1]
            se = math.hypot(a.stderr, b.stderr)
            shifts.append(abs(a.estimate - b.estimate) / se if se > 0 else 0.0)
    summary = {
        "bracket_ratio": bracket,
        "bracket_pass": bracket < 10.0,
        "max_cutoff_shift_sigma": max(shifts) if shifts else 0.0,
        "cutoff_insensitive": (max(shifts) if shifts else 0.0) < 1.0,
    }
    summary["pass"] = summary["bracket_pass"] and summary["cutoff_insensitive"]
    return rows, summary


# ---------------------------------------------------------------------------
# strand-separation

def run_strand_separation(cfg: ExperimentConfig):
    from .cycles import check_separation_event
    from .permutation import sample_equilibrium

    m = cfg.m or 4096
    samples = cfg.samples or 50
    d_list = cfg.params.get("d_list", [0.1])
    dims = make_dims(m, cfg.cprime)
    rows = []
    for D in d_list:
        holds = 0
        min_gaps, max_gaps = [], []
        for i in range(samples):
            rng = derive_stream(cfg.seed, f"sep/{D:.12g}/{i}")
            fld = sample_equilibrium(dims, StepParam(cfg.a), rng)
            rep = check_separation_event(fld, dims, D)
            holds += rep.holds
            min_gaps.append(rep.min_gap)
            max_gaps.append(rep.max_gap)
        rows.append({
            "D": D,
            "samples": samples,
            "holds_frequency": holds / samples,
            "mean_min_gap": float(np.mean(min_gaps)),
            "mean_max_gap": float(np.mean(max_gaps)),
            "lower_threshold": D * math.sqrt(m * math.log(m)),
            "upper_threshold": (4 + 1.5 * D) * math.sqrt(m * math.log(m)),
        })
    summary = {"rows": len(rows)}
    return rows, summary


# ---------------------------------------------------------------------------
# registry and runner

_RUNNERS = {
    "oracle-equivalence": run_oracle_equivalence,
    "global-shift-decay": run_global_shift_decay,
    "glauber-stationarity": run_glauber_stationarity,
    "splitmerge-invariant": run_splitmerge_invariant,
    "pd1-convergence": run_pd1_convergence,
    "contact-concentration": run_contact_concentration,
    "gapchain-hitting": run_gapchain_hitting,
    "strand-separation": run_strand_separation,
}


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.experiment not in _RUNNERS:
        raise UnknownExperimentError(
            f"unknown experiment {cfg.experiment!r}; known: {', '.join(EXPERIMENT_NAMES)}"
        )
    if cfg.format not in ("csv", "json"):
        raise InvalidConfigError(f"format must be csv or json, got {cfg.format!r}")
    if not 0.0 < cfg.a < 0.5:
        raise InvalidConfigError(f"a must be in (0, 1/2), got {cfg.a}")
    if cfg.cprime <= 0:
        raise InvalidConfigError(f"cprime must be positive, got {cfg.cprime}")
    if cfg.experiment in ("splitmerge-invariant", "contact-concentration"):
        for m in cfg.params.get("m_list", [cfg.m]) or [cfg.m]:
            if m is None:
                continue
            dims = make_dims(m, cfg.cprime)
            if dims.gamma < 2:
                raise InvalidConfigError(
                    f"experiment {cfg.experiment} needs gamma >= 2; "
                    f"m={m}, cprime={cfg.cprime} gives gamma={dims.gamma}"
                )


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)!r}")


def _write_result(rows, path: Path, fmt: str) -> Path:
    if fmt == "csv":
        out = path / "result.csv"
        with open(out, "w", newline="") as fh:
            if rows:
                w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
                w.writeheader()
                w.writerows(rows)
    else:
        out = path / "result.json"
        with open(out, "w") as fh:
            json.dump(rows, fh, indent=1, sort_keys=True, default=_json_default)
            fh.write("\n")
    return out


def run(cfg: ExperimentConfig) -> RunRecord:
    _validate(cfg)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rows, summary = _RUNNERS[cfg.experiment](cfg)
    wall = time.perf_counter() - t0
    result_path = _write_result(rows, out_dir, cfg.format)
    record = RunRecord(
        experiment=cfg.experiment,
        config=asdict(cfg),
        summary=summary,
        wall_time_s=wall,
        version=__version__,
        rng=RNG_ID,
        backend=kernels.backend_name(),
        result_path=str(result_path),
    )
    with open(out_dir / "run.json", "w") as fh:
        json.dump(asdict(record), fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")
    return record
