"""Configuration-driven experiment runners.

Each runner consumes a JSON spec (see the per-function docstrings for the
fields), executes the requested number of replicates (optionally across a
process pool), and emits plot-ready CSV plus JSON summaries into an output
directory, together with an ``index.json`` listing every artifact written.

All randomness is derived from the spec's base seed: replicate i streams
from ``base_seed XOR splitmix64(i)``, so reruns of the same spec are
byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .diagnostics import ensemble_stats, principal_angles, stage_times
from .estimator import bias_probe
from .linalg import SpectralTruth, lyapunov_stationary, sym_eig
from .solver import (
    Frame,
    RunConfig,
    TrajectoryRecord,
    init_at_stationary_point,
    init_random,
    paper_annealing_table,
    run,
)
from .timeseries import (
    StreamHandle,
    VarModel,
    derive_stream_seed,
    model_from_config,
    warm_up,
)

__all__ = [
    "ExperimentSpec",
    "RealDataSpec",
    "truth_for_model",
    "run_trajectory",
    "run_block_sweep",
    "run_ou_ensemble",
    "run_bias_probe",
    "run_realdata",
    "run_experiment",
]

_INIT_SALT = 0x5F3759DF

EXPERIMENT_KINDS = ("trajectory", "block-sweep", "ou-ensemble", "bias-probe", "realdata")


@dataclass
class ExperimentSpec:
    """Parsed simulation spec shared by the trajectory-style runners."""

    kind: str
    model_cfg: dict
    run_cfg: dict
    replicates: int
    seed: int
    record_every: int
    warmup: int
    init_cfg: dict
    extras: dict

    @classmethod
    def from_dict(cls, cfg: dict) -> "ExperimentSpec":
        kind = cfg.get("kind")
        if kind not in EXPERIMENT_KINDS:
            raise ValueError(f"field kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")
        replicates = int(cfg.get("replicates", 1))
        if replicates < 1:
            raise ValueError(f"field replicates must be >= 1, got {replicates}")
        record_every = int(cfg.get("record_every", 100))
        if record_every < 1:
            raise ValueError(f"field record_every must be >= 1, got {record_every}")
        warmup = int(cfg.get("warmup", 0))
        if warmup < 0:
            raise ValueError(f"field warmup must be >= 0, got {warmup}")
        known = {
            "kind", "model", "run", "replicates", "seed", "record_every",
            "warmup", "init", "outputs",
        }
        extras = {k: v for k, v in cfg.items() if k not in known}
        return cls(
            kind=kind,
            model_cfg=cfg.get("model", {}),
            run_cfg=dict(cfg.get("run", {})),
            replicates=replicates,
            seed=int(cfg.get("seed", 0)),
            record_every=record_every,
            warmup=warmup,
            init_cfg=dict(cfg.get("init", {"kind": "random"})),
            extras=extras,
        )


@dataclass
class RealDataSpec:
    """Spec for the measured-series pipeline."""

    csv_path: str
    delimiter: str = ","
    columns: list | None = None
    missing_sentinel: float = -200.0
    normalization: str = "zscore"
    r: int = 2
    h_grid: tuple = (1, 3, 5, 10, 60)
    eta0: float = 0.5
    seed: int = 0

    @classmethod
    def from_dict(cls, cfg: dict) -> "RealDataSpec":
        if "csv" not in cfg:
            raise ValueError("field csv (input path) is required for realdata")
        r = int(cfg.get("r", 2))
        if r < 1:
            raise ValueError(f"field r must be >= 1, got {r}")
        h_grid = tuple(int(h) for h in cfg.get("h_grid", (1, 3, 5, 10, 60)))
        if not h_grid or min(h_grid) < 1:
            raise ValueError("field h_grid must be non-empty with entries >= 1")
        norm = cfg.get("normalization", "zscore")
        if norm != "zscore":
            raise ValueError(f"field normalization must be 'zscore', got {norm!r}")
        return cls(
            csv_path=cfg["csv"],
            delimiter=cfg.get("delimiter", ","),
            columns=cfg.get("columns"),
            missing_sentinel=float(cfg.get("missing_sentinel", -200.0)),
            normalization=norm,
            r=r,
            h_grid=h_grid,
            eta0=float(cfg.get("eta0", 0.5)),
            seed=int(cfg.get("seed", 0)),
        )


def _make_run_config(run_cfg: dict, seed: int) -> RunConfig:
    cfg = dict(run_cfg)
    known = {
        "eta", "h", "r", "max_samples", "schedule", "annealing_table",
        "perturbation_eps", "variant", "zero_mean", "eps_target",
    }
    for key in cfg:
        if key not in known:
            raise ValueError(f"unknown run-config field {key!r}")
    for req in ("eta", "h", "r", "max_samples"):
        if req not in cfg:
            raise ValueError(f"run-config field {req!r} is required")
    schedule = cfg.get("schedule", "constant")
    table = cfg.get("annealing_table")
    if schedule == "table-annealing" and table is None:
        table = paper_annealing_table(int(cfg["h"]))
    return RunConfig(
        eta=float(cfg["eta"]),
        h=int(cfg["h"]),
        r=int(cfg["r"]),
        max_samples=int(cfg["max_samples"]),
        seed=seed,
        schedule=schedule,
        annealing_table=tuple(tuple(row) for row in table) if table else (),
        perturbation_eps=float(cfg.get("perturbation_eps", 0.0)),
        variant=cfg.get("variant", "oja"),
        zero_mean=bool(cfg.get("zero_mean", True)),
        eps_target=cfg.get("eps_target"),
    )


def truth_for_model(model) -> SpectralTruth | None:
    """Ground truth for a VAR model via the stationary Lyapunov solve."""
    if isinstance(model, VarModel):
        return SpectralTruth.from_sigma(lyapunov_stationary(model.a, model.noise_cov))
    return None


def _build_init(init_cfg: dict, truth, m: int, r: int, seed: int) -> Frame | None:
    kind = init_cfg.get("kind", "random")
    if kind == "random":
        return init_random(m, r, seed)
    if kind == "stationary_point":
        if truth is None:
            raise ValueError("stationary_point init requires a model with ground truth")
        return init_at_stationary_point(
            truth,
            init_cfg["indices"],
            jitter=float(init_cfg.get("jitter", 0.0)),
            seed=seed,
        )
    raise ValueError(f"unknown init kind {kind!r}")


def _replicate_task(args) -> TrajectoryRecord:
    model, truth, config, init_cfg, record_every, warmup, rep = args
    stream = StreamHandle(model, config.seed)
    warm_up(stream, warmup)
    init_seed = derive_stream_seed(config.seed ^ _INIT_SALT, rep)
    u0 = _build_init(init_cfg, truth, model.dim, config.r, init_seed)
    return run(stream, truth, config, record_every=record_every, u0=u0)


def _map_tasks(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def run_replicates(spec: ExperimentSpec, model, truth, workers: int = 1):
    """Independent replicates of a run spec; deterministic in spec.seed."""
    base = _make_run_config(spec.run_cfg, seed=spec.seed)
    tasks = [
        (
            model,
            truth,
            replace(base, seed=derive_stream_seed(spec.seed, rep)),
            spec.init_cfg,
            spec.record_every,
            spec.warmup,
            rep,
        )
        for rep in range(spec.replicates)
    ]
    return _map_tasks(_replicate_task, tasks, workers)


def _ensure_outdir(out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise ValueError(f"output directory {out_dir!r} is not writable")
    return out_dir


def _write_index(out_dir: str, kind: str, artifacts: list) -> str:
    path = os.path.join(out_dir, "index.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"kind": kind, "artifacts": sorted(artifacts)}, fh, indent=2)
        fh.write("\n")
    return path


def stages_in_order(stage: np.ndarray) -> bool:
    """True when stages 1, 2, 3 all occur and their first occurrences are
    in increasing order."""
    firsts = []
    for label in (1, 2, 3):
        where = np.nonzero(stage == label)[0]
        if not where.size:
            return False
        firsts.append(int(where[0]))
    return firsts[0] < firsts[1] < firsts[2]


def _feasibility_warning(truth, config: RunConfig) -> None:
    if truth is None:
        return
    eta_final = config.eta
    if config.schedule == "table-annealing":
        eta_final = config.eta * config.annealing_table[-1][1]
    try:
        stage_times(
            truth.eigvals, config.r, eta_final,
            delta=math.sqrt(10.0 * eta_final), nu=0.1, eps=0.05,
            g_rr=1.0, g_m=1.0, h=config.h,
        )
    except ValueError as exc:
        warnings.warn(f"config may be infeasible: {exc}", RuntimeWarning, stacklevel=2)


def run_trajectory(cfg: dict, out_dir: str, workers: int = 1) -> dict:
    """Replicated solver runs with per-replicate trajectory CSVs.

    Spec fields: ``model``, ``run`` (eta/h/r/max_samples/...), ``init``,
    ``replicates``, ``seed``, ``record_every``, ``warmup``. Ground truth is
    computed for VAR models (Lyapunov solve) and enables the alignment
    diagnostics; other models record only the iteration bookkeeping.
    """
    spec = ExperimentSpec.from_dict({**cfg, "kind": cfg.get("kind", "trajectory")})
    out_dir = _ensure_outdir(out_dir)
    model = model_from_config(spec.model_cfg)
    truth = truth_for_model(model)
    base_cfg = _make_run_config(spec.run_cfg, seed=spec.seed)
    if base_cfg.r > model.dim:
        raise ValueError(f"field r must be <= m={model.dim}, got {base_cfg.r}")
    _feasibility_warning(truth, base_cfg)

    records = run_replicates(spec, model, truth, workers=workers)
    artifacts = []
    summary_rows = []
    for rep, rec in enumerate(records):
        name = f"trajectory_{rep:03d}.csv"
        rec.to_csv(os.path.join(out_dir, name))
        artifacts.append(name)
        if rec.has_diagnostics():
            summary_rows.append(
                {
                    "replicate": rep,
                    "final_tail": float(rec.tail_sum[-1]),
                    "stages_in_order": stages_in_order(rec.stage),
                    "final_stage": int(rec.stage[-1]),
                }
            )
    summary = {
        "n_replicates": spec.replicates,
        "has_diagnostics": bool(records and records[0].has_diagnostics()),
        "replicates": summary_rows,
    }
    if summary_rows:
        summary["n_ordered"] = sum(r["stages_in_order"] for r in summary_rows)
        summary["mean_final_tail"] = float(
            np.mean([r["final_tail"] for r in summary_rows])
        )
    spath = os.path.join(out_dir, "summary.json")
    with open(spath, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    artifacts.append("summary.json")
    _write_index(out_dir, "trajectory", artifacts)
    return summary


def _sweep_cell_task(args):
    model, truth, cell_cfg, init_cfg, record_every, rep = args
    stream = StreamHandle(model, cell_cfg.seed)
    init_seed = derive_stream_seed(cell_cfg.seed ^ _INIT_SALT, rep)
    u0 = _build_init(init_cfg, truth, model.dim, cell_cfg.r, init_seed)
    rec = run(stream, truth, cell_cfg, record_every=record_every, u0=u0)
    return float(rec.tail_sum[-1]) if rec.has_diagnostics() else float("nan")


def run_block_sweep(cfg: dict, out_dir: str, workers: int = 1) -> dict:
    """Mean final trailing alignment over an (h, eta0) grid.

    Spec fields: ``model``, ``h_grid``, ``eta0_grid``, ``max_samples``,
    ``r``, ``replicates``, ``seed``, optional ``record_every``/``init``.
    Every cell uses the standard annealing schedule for its h with base
    step eta0. Emits ``sweep.csv`` shaped rows=h, columns=eta0.
    """
    out_dir = _ensure_outdir(out_dir)
    model = model_from_config(cfg["model"])
    truth = truth_for_model(model)
    if truth is None:
        raise ValueError("block sweep requires a VAR model (needs ground truth)")
    h_grid = [int(h) for h in cfg.get("h_grid", ())]
    eta0_grid = [float(e) for e in cfg.get("eta0_grid", ())]
    if not h_grid or not eta0_grid:
        raise ValueError("fields h_grid and eta0_grid must be non-empty")
    replicates = int(cfg.get("replicates", 5))
    if replicates < 1:
        raise ValueError(f"field replicates must be >= 1, got {replicates}")
    max_samples = int(cfg["max_samples"])
    r = int(cfg.get("r", 3))
    seed = int(cfg.get("seed", 0))
    record_every = int(cfg.get("record_every", 1000))
    init_cfg = dict(cfg.get("init", {"kind": "random"}))

    schedule_scale = float(cfg.get("schedule_scale", 1.0))
    if schedule_scale <= 0:
        raise ValueError("field schedule_scale must be positive")

    # Common random numbers: replicate i shares its stream seed and initial
    # frame across every (h, eta0) cell, so cross-cell orderings are paired
    # comparisons rather than independent draws.
    tasks = []
    for h in h_grid:
        table = tuple((k, schedule_scale * mult) for k, mult in paper_annealing_table(h))
        for eta0 in eta0_grid:
            for rep in range(replicates):
                cell_cfg = RunConfig(
                    eta=eta0,
                    h=h,
                    r=r,
                    max_samples=max_samples,
                    seed=derive_stream_seed(seed, rep),
                    schedule="table-annealing",
                    annealing_table=table,
                )
                tasks.append((model, truth, cell_cfg, init_cfg, record_every, rep))
    finals = _map_tasks(_sweep_cell_task, tasks, workers)

    table = np.asarray(finals).reshape(len(h_grid), len(eta0_grid), replicates).mean(axis=2)
    cpath = os.path.join(out_dir, "sweep.csv")
    with open(cpath, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["h"] + [f"eta0={e:g}" for e in eta0_grid])
        for h, row in zip(h_grid, table):
            writer.writerow([h] + [repr(float(v)) for v in row])
    result = {
        "h_grid": h_grid,
        "eta0_grid": eta0_grid,
        "replicates": replicates,
        "mean_final_tail": table.tolist(),
    }
    jpath = os.path.join(out_dir, "sweep.json")
    with open(jpath, "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=2)
        fh.write("\n")
    _write_index(out_dir, "block-sweep", ["sweep.csv", "sweep.json"])
    return result


def run_ou_ensemble(cfg: dict, out_dir: str, workers: int = 1) -> dict:
    """Replicate-ensemble moments of named rescaled coordinates.

    Spec fields: those of ``trajectory`` plus ``zeta``: a list of
    ``[i, j, stage]`` triples (1-based indices, stage 1 or 3). Requires a
    VAR model and at least 30 replicates. Emits ``ensemble.json`` and one
    moment-curve CSV per coordinate.
    """
    spec = ExperimentSpec.from_dict({**cfg, "kind": "ou-ensemble"})
    coords = [tuple(int(v) for v in c) for c in cfg.get("zeta", ())]
    if not coords:
        raise ValueError("field zeta must name at least one (i, j, stage) coordinate")
    if spec.replicates < 30:
        raise ValueError(f"field replicates must be >= 30, got {spec.replicates}")
    out_dir = _ensure_outdir(out_dir)
    model = model_from_config(spec.model_cfg)
    truth = truth_for_model(model)
    if truth is None:
        raise ValueError("ou-ensemble requires a VAR model (needs ground truth)")

    records = run_replicates(spec, model, truth, workers=workers)
    base = _make_run_config(spec.run_cfg, seed=spec.seed)
    if base.schedule != "constant":
        raise ValueError("ou-ensemble requires a constant step-size schedule")
    report = ensemble_stats(records, truth, base.eta, zeta_coords=coords)

    artifacts = ["ensemble.json"]
    report.to_json(os.path.join(out_dir, "ensemble.json"))
    for series in report.series:
        name = f"zeta_{series.i}{series.j}_stage{series.stage}.csv"
        report.series_to_csv(os.path.join(out_dir, name), series)
        artifacts.append(name)
    _write_index(out_dir, "ou-ensemble", artifacts)
    return {
        "n_replicates": report.n_replicates,
        "series": [
            {"i": z.i, "j": z.j, "stage": z.stage, "gaussian_ok": z.gaussian_ok}
            for z in report.series
        ],
    }


def run_bias_probe(cfg: dict, out_dir: str) -> dict:
    """Empirical-vs-closed-form conditional bias for a VAR model.

    Spec fields: ``model`` (must be var), ``h_grid``, ``n_mc``, ``seed``,
    optional ``z0``. Emits ``bias_norm.csv`` (h, bias_norm),
    ``bias_compare.csv`` (h, empirical, closed_form) and ``bias.json``.
    """
    out_dir = _ensure_outdir(out_dir)
    model = model_from_config(cfg["model"])
    if not isinstance(model, VarModel):
        raise ValueError("closed-form probe is VAR-only")
    h_grid = list(cfg.get("h_grid", ()))
    if not h_grid:
        raise ValueError("field h_grid must be non-empty")
    report = bias_probe(
        model,
        h_grid,
        n_mc=int(cfg.get("n_mc", 10_000)),
        seed=int(cfg.get("seed", 0)),
        z0=cfg.get("z0"),
    )
    report.to_csv(os.path.join(out_dir, "bias_norm.csv"))
    report.to_json(os.path.join(out_dir, "bias.json"))
    cpath = os.path.join(out_dir, "bias_compare.csv")
    with open(cpath, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["h", "empirical", "closed_form"])
        for h, emp, cf in zip(report.h_values, report.bias_norm, report.closed_form_norm):
            writer.writerow([int(h), repr(float(emp)), repr(float(cf))])
    _write_index(out_dir, "bias-probe", ["bias_norm.csv", "bias_compare.csv", "bias.json"])
    return {"h_values": report.h_values, "log_slope": report.log_slope}


# --- measured-series pipeline -------------------------------------------------

class _ArrayModel:
    def __init__(self, dim: int):
        self.dim = dim


class ArrayStream:
    """Stream adapter that replays the rows of a data matrix in order."""

    def __init__(self, data: np.ndarray):
        self._data = np.asarray(data, dtype=np.float64)
        self.model = _ArrayModel(self._data.shape[1])
        self.cursor = 0
        self.samples_emitted = 0

    def advance(self, n_steps: int) -> np.ndarray:
        if self.cursor + n_steps > self._data.shape[0]:
            raise ValueError("data stream exhausted")
        self.cursor += n_steps
        self.samples_emitted += n_steps
        return self._data[self.cursor - 1].copy()


def load_series_csv(spec: RealDataSpec) -> np.ndarray:
    """Load, filter and z-score the measured series.

    Rows containing the missing-data sentinel in any selected column are
    dropped before normalization. Errors if every row is dropped or fewer
    than 10 * n_columns rows survive.
    """
    with open(spec.csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=spec.delimiter)
        header = next(reader)
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if spec.columns is None:
        col_idx = list(range(len(header)))
    elif all(isinstance(c, int) for c in spec.columns):
        col_idx = [int(c) for c in spec.columns]
    else:
        name_to_idx = {name.strip(): i for i, name in enumerate(header)}
        missing = [c for c in spec.columns if c not in name_to_idx]
        if missing:
            raise ValueError(f"columns not found in header: {missing}")
        col_idx = [name_to_idx[c] for c in spec.columns]

    data = []
    for row in rows:
        try:
            vals = [float(row[i]) for i in col_idx]
        except (ValueError, IndexError):
            continue
        data.append(vals)
    if not data:
        raise ValueError("no numeric rows found in the input CSV")
    arr = np.asarray(data, dtype=np.float64)
    keep = ~np.any(arr == spec.missing_sentinel, axis=1)
    arr = arr[keep]
    if arr.shape[0] == 0:
        raise ValueError("every row contains the missing-data sentinel")
    m = arr.shape[1]
    if arr.shape[0] < 10 * m:
        raise ValueError(
            f"too few complete rows: {arr.shape[0]} < 10 * {m} columns"
        )
    mean = arr.mean(axis=0)
    std = arr.std(axis=0, ddof=0)
    if np.any(std == 0.0):
        raise ValueError("a selected column is constant; cannot z-score")
    return (arr - mean) / std


def _align_scores(scores: np.ndarray) -> np.ndarray:
    """Rotate a 2-D point cloud so its leading principal axis is horizontal."""
    cov = scores.T @ scores / scores.shape[0]
    _, vecs = sym_eig((cov + cov.T) / 2.0)
    for j in range(vecs.shape[1]):
        lead = np.argmax(np.abs(vecs[:, j]))
        if vecs[lead, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return scores @ vecs


def _write_points_csv(path: str, pts: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for x, y in pts:
            writer.writerow([repr(float(x)), repr(float(y))])


def run_realdata(cfg: dict, out_dir: str) -> dict:
    """Streaming-vs-batch projection pipeline on a measured series.

    Loads the CSV per ``RealDataSpec``, computes the batch baseline (top-r
    eigenvectors of the full sample covariance), runs the streaming solver
    once per block size in the grid (annealed schedule, base step eta0),
    projects all points onto each frame, rotates every projection so its
    leading principal axis is horizontal, and writes one (x, y) CSV per
    block size plus ``batch.csv`` and an angle-to-batch summary.
    """
    spec = RealDataSpec.from_dict(cfg)
    out_dir = _ensure_outdir(out_dir)
    data = load_series_csv(spec)
    n, m = data.shape
    if spec.r > m:
        raise ValueError(f"field r must be <= {m} columns, got {spec.r}")

    cov = data.T @ data / n
    _, vecs = sym_eig((cov + cov.T) / 2.0)
    batch_frame = vecs[:, : spec.r]
    artifacts = ["batch.csv", "angles.csv"]
    _write_points_csv(os.path.join(out_dir, "batch.csv"), _align_scores(data @ batch_frame))

    angles = []
    for h in spec.h_grid:
        usable = (n // h) * h
        config = RunConfig(
            eta=spec.eta0,
            h=h,
            r=spec.r,
            max_samples=usable,
            seed=derive_stream_seed(spec.seed, h),
            schedule="table-annealing",
            annealing_table=paper_annealing_table(h),
        )
        stream = ArrayStream(data)
        u0 = init_random(m, spec.r, derive_stream_seed(spec.seed ^ _INIT_SALT, h))
        rec = run(stream, None, config, record_every=10**9, u0=u0)
        frame = rec.final_u
        name = f"projection_h{h}.csv"
        _write_points_csv(os.path.join(out_dir, name), _align_scores(data @ frame))
        artifacts.append(name)
        angles.append(float(principal_angles(frame, batch_frame).thetas.max()))

    apath = os.path.join(out_dir, "angles.csv")
    with open(apath, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["h", "principal_angle_to_batch"])
        for h, ang in zip(spec.h_grid, angles):
            writer.writerow([int(h), repr(float(ang))])
    _write_index(out_dir, "realdata", artifacts)
    return {"h_grid": list(spec.h_grid), "angles_to_batch": angles, "n_rows": n}


def run_experiment(cfg: dict, out_dir: str, workers: int = 1) -> dict:
    """Dispatch a spec dict to its runner by ``kind``."""
    kind = cfg.get("kind")
    if kind == "trajectory":
        return run_trajectory(cfg, out_dir, workers=workers)
    if kind == "block-sweep":
        return run_block_sweep(cfg, out_dir, workers=workers)
    if kind == "ou-ensemble":
        return run_ou_ensemble(cfg, out_dir, workers=workers)
    if kind == "bias-probe":
        return run_bias_probe(cfg, out_dir)
    if kind == "realdata":
        return run_realdata(cfg, out_dir)
    raise ValueError(f"field kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")
