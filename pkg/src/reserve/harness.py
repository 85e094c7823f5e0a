"""Experiment orchestration: replicate fan-out, aggregation and the benchmark grids."""
from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .generators import (
    make_hospital_scenario,
    make_ls_tightness_instance,
    make_prop1_instance,
    make_random_setting,
)
from .instance import Instance, load_instance
from .lp import FractionalRouting, solve_for, upper_bound_check
from .policies import POLICY_NAMES, make_policy, mls_max_d
from .sim import (
    ReplicateResult,
    estimate_offline,
    mean_stderr,
    replicate_seeds,
    run_policy,
    sample_path,
)

__all__ = [
    "ExperimentSpec",
    "PolicyReport",
    "RunReport",
    "build_instance",
    "run_experiment",
    "waiting_time_stats",
    "default_policies",
    "TABLE_CONFIGS",
    "TABLE_SCALES",
    "tables_grid",
    "random_settings_grid",
    "run_tables",
    "run_random_settings",
    "bench_workers",
    "format_value",
]

log = logging.getLogger(__name__)

# (session minutes, sessions per day) pairs; every pair offers 480 minutes a day
TABLE_CONFIGS: tuple[tuple[int, int], ...] = ((60, 8), (90, 5), (120, 4), (180, 3), (240, 2))
TABLE_SCALES: tuple[float, ...] = (0.705, 0.823, 0.94, 1.058, 1.175, 1.292)

GENERATORS = {
    "prop1": make_prop1_instance,
    "ls-tight": make_ls_tightness_instance,
    "hospital": make_hospital_scenario,
    "random": make_random_setting,
}


@dataclass(frozen=True)
class ExperimentSpec:
    """What to run: an instance source, policies, replicate count, seed and denominator.

    ``source`` is a generator name (see ``GENERATORS``, with ``params``), a path
    to an instance file, or an :class:`Instance`.
    """

    source: object
    policies: tuple[str, ...] = POLICY_NAMES
    replicates: int = 200
    master_seed: int = 0
    denominator: str = "lp_bound"
    params: dict = field(default_factory=dict)
    policy_params: dict = field(default_factory=dict)
    offline_paths: int = 10_000

    def __post_init__(self):
        if int(self.replicates) < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}")
        bad = [p for p in self.policies if p not in POLICY_NAMES]
        if bad:
            raise ValueError(f"unknown policies {bad}; choose from {', '.join(POLICY_NAMES)}")
        if self.denominator not in ("lp_bound", "prop1_exact", "tightness_exact"):
            raise ValueError(f"unknown denominator {self.denominator!r}")


@dataclass(frozen=True, eq=False)
class PolicyReport:
    policy: str
    mean_reward: float
    stderr: float
    ratio: float
    ratio_stderr: float
    wait_mean: float | None
    utilization: np.ndarray
    accepted_mean: float


@dataclass(frozen=True, eq=False)
class RunReport:
    """Aggregated results; ``policies`` maps a policy name to its :class:`PolicyReport`."""

    instance: Instance
    denominator: str
    denominator_value: float
    denominator_stderr: float
    lp_objective: float
    replicates: int
    policies: dict
    results: dict = field(repr=False, default_factory=dict)

    def ratio(self, policy: str) -> float:
        return self.policies[policy].ratio


def build_instance(source, params: dict | None = None) -> Instance:
    if isinstance(source, Instance):
        return source
    params = dict(params or {})
    if source in GENERATORS:
        return GENERATORS[source](**params)
    return load_instance(source)


def default_policies(instance: Instance) -> tuple[str, ...]:
    """All six policies, minus MLS where no d >= 2 satisfies u <= c/d."""
    if mls_max_d(instance) >= 2:
        return POLICY_NAMES
    return tuple(p for p in POLICY_NAMES if p != "mls")


def waiting_time_stats(results: Iterable[ReplicateResult]) -> tuple[float | None, dict | None]:
    """Mean waiting days over admitted regular patients, pooled across replicates.

    Returns ``(None, None)`` for non-scheduling instances: the metric is
    absent there, not zero.
    """
    waits = []
    for r in results:
        if r.regular_wait_days is None:
            return None, None
        waits.extend(r.regular_wait_days)
    if not waits:
        return None, {"count": 0}
    w = np.asarray(waits, dtype=float)
    summary = {
        "count": int(w.size),
        "mean": float(w.mean()),
        "p50": float(np.percentile(w, 50)),
        "p90": float(np.percentile(w, 90)),
        "max": float(w.max()),
    }
    return summary["mean"], summary


def run_experiment(spec: ExperimentSpec, routing: FractionalRouting | None = None) -> RunReport:
    """Run every (policy, replicate) cell with common random numbers across policies."""
    instance = build_instance(spec.source, spec.params)
    if routing is None:
        routing = solve_for(instance)
    policies = {}
    for name in spec.policies:
        try:
            policies[name] = make_policy(name, instance, routing, **spec.policy_params.get(name, {}))
        except Exception as exc:
            raise type(exc)(f"policy {name}: {exc}") from exc
    results: dict[str, list[ReplicateResult]] = {name: [] for name in policies}
    for rep in range(int(spec.replicates)):
        path_seed, policy_seed = replicate_seeds(spec.master_seed, rep)
        path = sample_path(instance, path_seed)
        digest = path.digest()
        for name, pol in policies.items():
            try:
                res = run_policy(instance, routing, pol, path, policy_seed)
            except Exception as exc:
                raise type(exc)(f"replicate {rep}, policy {name}: {exc}") from exc
            if res.path_digest != digest:
                raise AssertionError(f"replicate {rep}: policy {name} saw a different arrival stream")
            results[name].append(res)

    if spec.denominator == "lp_bound":
        denom, denom_se = float(routing.objective), 0.0
    else:
        denom, denom_se = estimate_offline(
            instance, spec.denominator, spec.offline_paths, np.random.SeedSequence([spec.master_seed, 2**31])
        )

    reports = {}
    for name, rs in results.items():
        rewards = [r.total_reward for r in rs]
        mean, se = mean_stderr(rewards)
        wait, _ = waiting_time_stats(rs)
        used = np.mean([r.per_resource_used for r in rs], axis=0)
        ratio = mean / denom if denom > 0 else float("nan")
        ratio_se = se / denom if denom > 0 else float("nan")
        reports[name] = PolicyReport(
            policy=name,
            mean_reward=mean,
            stderr=se,
            ratio=ratio,
            ratio_stderr=ratio_se,
            wait_mean=wait,
            utilization=used / instance.capacity,
            accepted_mean=float(np.mean([r.accepted for r in rs])),
        )
        if spec.denominator == "lp_bound" and not upper_bound_check(instance, routing, mean, se):
            # an online policy is also an offline-feasible schedule, so this signals a bug
            log.warning("policy %s mean %.6g exceeds V^LP %.6g by more than 3 stderr", name, mean, denom)
    return RunReport(
        instance=instance,
        denominator=spec.denominator,
        denominator_value=denom,
        denominator_stderr=denom_se,
        lp_objective=float(routing.objective),
        replicates=int(spec.replicates),
        policies=reports,
        results=results,
    )


# ---------------------------------------------------------------- grids


def tables_grid(
    configs: Sequence[tuple[int, int]] = TABLE_CONFIGS,
    scales: Sequence[float] = TABLE_SCALES,
    variants: Sequence[str] = ("all-days", "monday-regular"),
    days: int = 50,
    deadline_days: int = 20,
) -> list[dict]:
    """Grid points of the session-length x scale tables, for each arrival variant."""
    points = []
    for variant in variants:
        if variant not in ("all-days", "monday-regular"):
            raise ValueError(f"unknown variant {variant!r}")
        for mins, sessions in configs:
            for scale in scales:
                params = {
                    "days": int(days),
                    "sessions_per_day": int(sessions),
                    "session_minutes": float(mins),
                    "deadline_days": int(deadline_days),
                    "scale": float(scale),
                }
                if variant == "monday-regular":
                    params["regular_weekdays"] = (0,)
                    params["urgent_weekdays"] = (1, 2, 3, 4)
                points.append({"variant": variant, "params": params})
    return points


def random_settings_grid(settings: int = 100, days: int = 50, sessions_per_day: int = 4, first_seed: int = 0) -> list[dict]:
    return [
        {"seed": s, "params": {"seed": s, "days": int(days), "sessions_per_day": int(sessions_per_day)}}
        for s in range(first_seed, first_seed + int(settings))
    ]


def bench_workers() -> int:
    """Worker count from RESERVE_BENCH_THREADS (0 or unset means one per CPU)."""
    raw = os.environ.get("RESERVE_BENCH_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"RESERVE_BENCH_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("RESERVE_BENCH_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _summarize(report: RunReport) -> dict:
    return {
        "lp_bound": report.lp_objective,
        "policies": {
            name: {
                "mean_reward": p.mean_reward,
                "stderr": p.stderr,
                "ratio": p.ratio,
                "ratio_stderr": p.ratio_stderr,
                "wait_mean": p.wait_mean,
            }
            for name, p in report.policies.items()
        },
    }


def _run_cell(args) -> dict:
    source, params, replicates, seed, policies = args
    inst = build_instance(source, params)
    allowed = default_policies(inst)
    pols = tuple(p for p in (policies or allowed) if p in allowed)
    spec = ExperimentSpec(source=inst, policies=pols, replicates=replicates, master_seed=seed)
    return _summarize(run_experiment(spec))


def _map_cells(cells: list, workers: int | None) -> list[dict]:
    workers = bench_workers() if workers is None else workers
    if workers <= 1 or len(cells) <= 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=min(workers, len(cells))) as ex:
        return list(ex.map(_run_cell, cells))


def run_tables(
    points: list[dict],
    replicates: int = 200,
    master_seed: int = 0,
    policies: Sequence[str] | None = None,
    workers: int | None = None,
) -> list[dict]:
    """One row per (grid point, policy) with ratio to V^LP and mean regular wait."""
    cells = [("hospital", p["params"], replicates, master_seed, tuple(policies) if policies else None) for p in points]
    rows = []
    for point, summary in zip(points, _map_cells(cells, workers)):
        prm = point["params"]
        for name in POLICY_NAMES:
            if name not in summary["policies"]:
                continue
            s = summary["policies"][name]
            rows.append({
                "variant": point["variant"],
                "session_minutes": prm["session_minutes"],
                "sessions_per_day": prm["sessions_per_day"],
                "scale": prm["scale"],
                "policy": name,
                "ratio": s["ratio"],
                "ratio_stderr": s["ratio_stderr"],
                "wait_mean": s["wait_mean"],
                "mean_reward": s["mean_reward"],
                "reward_stderr": s["stderr"],
                "lp_bound": summary["lp_bound"],
                "replicates": replicates,
            })
    return rows


def run_random_settings(
    points: list[dict],
    replicates: int = 200,
    master_seed: int = 0,
    policies: Sequence[str] | None = None,
    workers: int | None = None,
) -> tuple[list[dict], list[dict]]:
    """Per-setting rows plus worst/mean summary rows per policy."""
    from .generators import random_setting_params

    cells = [("random", p["params"], replicates, master_seed, tuple(policies) if policies else None) for p in points]
    rows = []
    for point, summary in zip(points, _map_cells(cells, workers)):
        setting = random_setting_params(point["seed"])
        for name in POLICY_NAMES:
            if name not in summary["policies"]:
                continue
            s = summary["policies"][name]
            rows.append({
                "setting": point["seed"],
                "session_minutes": setting["session_minutes"],
                "deadline_days": setting["deadline_days"],
                "scale": setting["scale"],
                "policy": name,
                "ratio": s["ratio"],
                "ratio_stderr": s["ratio_stderr"],
                "wait_mean": s["wait_mean"],
                "mean_reward": s["mean_reward"],
                "lp_bound": summary["lp_bound"],
                "replicates": replicates,
            })
    summary_rows = []
    for stat in ("worst", "mean"):
        for name in POLICY_NAMES:
            mine = [r for r in rows if r["policy"] == name]
            if not mine:
                continue
            ratios = np.array([r["ratio"] for r in mine])
            waits = np.array([r["wait_mean"] for r in mine if r["wait_mean"] is not None], dtype=float)
            if stat == "worst":
                k = int(np.argmin(ratios))
                summary_rows.append({"row": "worst", "policy": name, "ratio": ratios[k],
                                     "wait_mean": mine[k]["wait_mean"], "setting": mine[k]["setting"],
                                     "settings": len(mine)})
            else:
                summary_rows.append({"row": "mean", "policy": name, "ratio": float(ratios.mean()),
                                     "wait_mean": float(waits.mean()) if waits.size else None, "setting": None,
                                     "settings": len(mine)})
    return rows, summary_rows


# ---------------------------------------------------------------- CSV


def format_value(v) -> str:
    """CSV cell: 6 significant digits, '.' decimal, empty for absent values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if np.isnan(v):
            return ""
        return "%.6g" % float(v)
    return str(v)


def write_csv(path: str | Path, rows: list[dict], columns: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format_value(r.get(c)) for c in columns])


TABLE_COLUMNS = ("variant", "session_minutes", "sessions_per_day", "scale", "policy", "ratio", "ratio_stderr",
                 "wait_mean", "mean_reward", "reward_stderr", "lp_bound", "replicates")
RANDOM_COLUMNS = ("setting", "session_minutes", "deadline_days", "scale", "policy", "ratio", "ratio_stderr",
                  "wait_mean", "mean_reward", "lp_bound", "replicates")
SUMMARY_COLUMNS = ("row", "policy", "ratio", "wait_mean", "setting", "settings")
KEY_COLUMNS = ("variant", "session_minutes", "sessions_per_day", "scale")


def wide_rows(rows: list[dict], key_columns: Sequence[str] = KEY_COLUMNS) -> tuple[list[dict], list[str]]:
    """Pivot to one row per grid point with ratio_<policy> / wait_<policy> columns."""
    out: dict = {}
    present = []
    for r in rows:
        key = tuple(r[c] for c in key_columns)
        row = out.setdefault(key, {c: r[c] for c in key_columns})
        row[f"ratio_{r['policy']}"] = r["ratio"]
        row[f"wait_{r['policy']}"] = r["wait_mean"]
        if r["policy"] not in present:
            present.append(r["policy"])
    present = [p for p in POLICY_NAMES if p in present]
    cols = list(key_columns) + [f"{m}_{p}" for p in present for m in ("ratio", "wait")]
    return list(out.values()), cols


def long_rows(rows: list[dict], key_columns: Sequence[str], metrics=("ratio", "ratio_stderr", "wait_mean")) -> list[dict]:
    out = []
    for r in rows:
        for m in metrics:
            d = {c: r[c] for c in key_columns}
            d.update(policy=r["policy"], metric=m, value=r[m])
            out.append(d)
    return out


def write_tables_outputs(out_dir: str | Path, rows: list[dict]) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "tables.csv", out / "tables_wide.csv", out / "tables_long.csv"]
    write_csv(paths[0], rows, TABLE_COLUMNS)
    wide, cols = wide_rows(rows)
    write_csv(paths[1], wide, cols)
    write_csv(paths[2], long_rows(rows, KEY_COLUMNS), list(KEY_COLUMNS) + ["policy", "metric", "value"])
    return paths


def write_random_outputs(out_dir: str | Path, rows: list[dict], summary: list[dict]) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    keys = ("setting", "session_minutes", "deadline_days", "scale")
    paths = [out / "random_settings.csv", out / "random_summary.csv", out / "random_long.csv"]
    write_csv(paths[0], rows, RANDOM_COLUMNS)
    write_csv(paths[1], summary, SUMMARY_COLUMNS)
    write_csv(paths[2], long_rows(rows, keys), list(keys) + ["policy", "metric", "value"])
    return paths
