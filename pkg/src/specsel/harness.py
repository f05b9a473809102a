"""Replication engine for the five simulation studies.

Each study sweeps a grid (effect size, latent dimension, or noise scale)
over several network sizes, runs R independent selection replicates per
cell, and reports correct-classification rates with Wilson 95% bands:

1. GWESP curved family vs a density-only model, theta2 in [0, 0.5].
2. Directed reciprocity vs a density-only directed model, theta2 in [0, 1].
3. Latent Euclidean dimension recovery, k in 1..5 (full selection matrix).
4. Latent Euclidean (true) vs bilinear kernel as sigma2 varies.
5. Study 1 rerun across classifiers.

Replicates are independent jobs seeded by replicate index, optionally
spread over a process pool; results are reduced in index order so output
never depends on worker count.  Desk-scale defaults trade the paper-scale
replicate counts for laptop runtimes; everything is config-reachable.
"""

from __future__ import annotations

import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .classify import FeatureConfig
from .models import (Bernoulli, DirectedDyad, GwespErgm, LpmBilinear,
                     LpmEuclidean, ModelSpec, sample)
from .pipeline import select_model
from .rng import child_seed, make_rng

CSV_COLUMNS = ("study", "setting", "n", "classifier", "successes", "trials",
               "rate", "ci_low", "ci_high")


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054
                    ) -> tuple[float, float]:
    """Wilson score 95% interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in 0..trials")
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials
                         + z2 / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class RateEstimate:
    study: int
    setting: str
    n: int
    classifier: str
    successes: int
    trials: int
    rate: float
    ci_low: float
    ci_high: float
    x: float = 0.0          # grid coordinate for charts
    series: str = ""        # chart series key; empty rows are CSV-only

    def __post_init__(self):
        if not 0.0 <= self.ci_low <= self.rate <= self.ci_high <= 1.0:
            raise ValueError("need 0 <= ci_low <= rate <= ci_high <= 1")


def rate_estimate(study: int, setting: str, n: int, classifier: str,
                  successes: int, trials: int, x: float = 0.0,
                  series: str = "") -> RateEstimate:
    low, high = wilson_interval(successes, trials)
    rate = successes / trials
    # the Wilson interval contains the point estimate mathematically;
    # enforce it against roundoff at the 0/1 endpoints
    return RateEstimate(study, setting, n, classifier, successes, trials,
                        rate, min(low, rate), max(high, rate), x, series)


# ---------------------------------------------------------------------------
# Replication
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _ReplicateJob:
    true_model: ModelSpec
    candidates: tuple[ModelSpec, ...]
    K: int
    algo: str
    cfg: FeatureConfig
    seed: int


def _run_replicate(job: _ReplicateJob) -> int:
    observed = sample(job.true_model, make_rng(child_seed(job.seed, 0)))
    report = select_model(observed, list(job.candidates), K=job.K,
                          cfg=job.cfg, algo=job.algo,
                          seed=child_seed(job.seed, 1))
    return report.predicted


def resolve_threads(threads: int | None = None) -> int:
    if threads is not None:
        if threads < 1:
            raise ValueError("threads must be >= 1")
        return threads
    env = os.environ.get("SPECSEL_THREADS", "")
    if env.strip():
        value = int(env)
        if value < 1:
            raise ValueError("SPECSEL_THREADS must be >= 1")
        return value
    return 1


def replicate_predictions(true_model: ModelSpec, candidates: list[ModelSpec],
                          K: int, R: int, seed: int,
                          algo: str = "random_forest",
                          cfg: FeatureConfig | None = None,
                          threads: int | None = None) -> list[int]:
    """Predicted class index for R independent replicates.

    Replicate r draws an observed network from the true model and runs the
    full selection pipeline, all seeded from ``child_seed(seed, r)``;
    results come back in replicate order regardless of the worker pool.
    """
    if R < 1:
        raise ValueError("need R >= 1 replicates")
    cfg = cfg or FeatureConfig()
    jobs = [_ReplicateJob(true_model, tuple(candidates), K, algo, cfg,
                          child_seed(seed, r)) for r in range(R)]
    workers = resolve_threads(threads)
    if workers == 1 or R == 1:
        return [_run_replicate(job) for job in jobs]
    chunk = max(1, R // (workers * 8))
    # spawn (not fork): forking a process that holds JIT runtime state is
    # unreliable; compiled kernels reload from the on-disk cache instead
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(_run_replicate, jobs, chunksize=chunk))


def run_replications(true_model: ModelSpec, candidates: list[ModelSpec],
                     true_index: int, K: int, R: int, seed: int,
                     algo: str = "random_forest",
                     cfg: FeatureConfig | None = None,
                     threads: int | None = None,
                     study: int = 0, setting: str = "", x: float = 0.0,
                     series: str = "") -> RateEstimate:
    """Correct-selection rate over R replicates with a Wilson 95% band."""
    if not 0 <= true_index < len(candidates):
        raise ValueError("true_index must point into candidates")
    preds = replicate_predictions(true_model, candidates, K, R, seed,
                                  algo, cfg, threads)
    successes = sum(1 for p in preds if p == true_index)
    return rate_estimate(study, setting or "replications", true_model.n,
                         algo, successes, R, x, series)


# ---------------------------------------------------------------------------
# Study configuration and dispatch
# ---------------------------------------------------------------------------

_STUDY_DEFAULTS: dict[int, dict] = {
    1: {"grid": (0.0, 0.1, 0.2, 0.3, 0.4, 0.5), "sizes": (25, 50, 75),
        "R": 200, "K": 100},
    2: {"grid": (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0),
        "sizes": (50, 100), "R": 200, "K": 100},
    3: {"grid": (), "dims": (1, 2, 3), "sizes": (50, 250), "R": 100, "K": 100},
    4: {"grid": (0.1, 0.4, 0.7, 1.0), "dims": (2,), "sizes": (100,),
        "R": 100, "K": 100},
    5: {"grid": (0.0, 0.5), "sizes": (100,), "R": 100, "K": 100,
        "classifiers": ("gbt", "random_forest", "gaussian_nb")},
}


@dataclass(frozen=True)
class StudyConfig:
    study: int
    seed: int
    grid: tuple[float, ...] = ()
    sizes: tuple[int, ...] = ()
    dims: tuple[int, ...] = ()
    R: int | None = None
    K: int | None = None
    classifier: str = "random_forest"
    classifiers: tuple[str, ...] = ()
    features: FeatureConfig = field(default_factory=FeatureConfig)
    threads: int | None = None

    def __post_init__(self):
        if self.study not in _STUDY_DEFAULTS:
            raise ValueError(f"unknown study id {self.study}; expected 1..5")
        if self.R is not None and self.R < 1:
            raise ValueError("need R >= 1 replicates")
        if self.K is not None and self.K < 2:
            raise ValueError("need K >= 2 simulations per model")

    def resolved(self) -> "StudyConfig":
        """Fill in desk-scale defaults for any field left empty."""
        d = _STUDY_DEFAULTS[self.study]
        return replace(
            self,
            grid=self.grid or tuple(d.get("grid", ())),
            sizes=self.sizes or tuple(d["sizes"]),
            dims=self.dims or tuple(d.get("dims", ())),
            R=self.R if self.R is not None else d["R"],
            K=self.K if self.K is not None else d["K"],
            classifiers=self.classifiers or tuple(d.get("classifiers", ())),
        )


def _cell_seed(cfg: StudyConfig, index: int) -> int:
    return child_seed(cfg.seed, index)


def _study_gwesp(cfg: StudyConfig, classifiers: tuple[str, ...],
                 study: int) -> list[RateEstimate]:
    rows = []
    cell = 0
    for algo in classifiers:
        for n in cfg.sizes:
            for th2 in cfg.grid:
                true = GwespErgm(n=n, theta1=-2.5, theta2=float(th2),
                                 theta3=1.0)
                candidates: list[ModelSpec] = [true, Bernoulli(n=n, theta1=-2.5)]
                series = (f"n={n}" if len(classifiers) == 1
                          else f"{algo} n={n}")
                rows.append(run_replications(
                    true, candidates, 0, cfg.K, cfg.R, _cell_seed(cfg, cell),
                    algo=algo, cfg=cfg.features, threads=cfg.threads,
                    study=study, setting=f"theta2={th2:g}", x=float(th2),
                    series=series))
                cell += 1
    return rows


def _study_directed(cfg: StudyConfig) -> list[RateEstimate]:
    rows = []
    cell = 0
    for n in cfg.sizes:
        for th2 in cfg.grid:
            null = DirectedDyad(n=n, theta1=-2.5, theta2=0.0)
            true = DirectedDyad(n=n, theta1=-2.5, theta2=float(th2))
            rows.append(run_replications(
                true, [null, true], 1, cfg.K, cfg.R,
                _cell_seed(cfg, cell), algo=cfg.classifier, cfg=cfg.features,
                threads=cfg.threads, study=2, setting=f"theta2={th2:g}",
                x=float(th2), series=f"n={n}"))
            cell += 1
    return rows


def _study_dimension(cfg: StudyConfig) -> list[RateEstimate]:
    """Full M-by-M selection matrix per (n, true dimension)."""
    rows = []
    cell = 0
    dims = cfg.dims
    for n in cfg.sizes:
        candidates: list[ModelSpec] = [
            LpmEuclidean(n=n, theta=-2.5, dim=k, sigma2=1.0) for k in dims]
        for ti, true_k in enumerate(dims):
            preds = replicate_predictions(
                candidates[ti], candidates, cfg.K, cfg.R,
                _cell_seed(cfg, cell), algo=cfg.classifier,
                cfg=cfg.features, threads=cfg.threads)
            counts = np.bincount(preds, minlength=len(dims))
            for si, sel_k in enumerate(dims):
                diagonal = si == ti
                rows.append(rate_estimate(
                    3, f"true_k={true_k},selected_k={sel_k}", n,
                    cfg.classifier, int(counts[si]), cfg.R, x=float(true_k),
                    series=f"n={n}" if diagonal else ""))
            cell += 1
    return rows


def _study_kernel(cfg: StudyConfig) -> list[RateEstimate]:
    rows = []
    cell = 0
    for n in cfg.sizes:
        for k in cfg.dims:
            for s2 in cfg.grid:
                true = LpmEuclidean(n=n, theta=-2.5, dim=k, sigma2=float(s2))
                alt = LpmBilinear(n=n, theta=-2.5, dim=k, sigma2=float(s2))
                rows.append(run_replications(
                    true, [true, alt], 0, cfg.K, cfg.R, _cell_seed(cfg, cell),
                    algo=cfg.classifier, cfg=cfg.features, threads=cfg.threads,
                    study=4, setting=f"sigma2={s2:g},k={k}", x=float(s2),
                    series=f"n={n},k={k}"))
                cell += 1
    return rows


def run_study(config: StudyConfig) -> list[RateEstimate]:
    """Run one simulation study; one RateEstimate per cell (or matrix cell)."""
    cfg = config.resolved()
    if cfg.study == 1:
        return _study_gwesp(cfg, (cfg.classifier,), study=1)
    if cfg.study == 2:
        return _study_directed(cfg)
    if cfg.study == 3:
        return _study_dimension(cfg)
    if cfg.study == 4:
        return _study_kernel(cfg)
    return _study_gwesp(cfg, cfg.classifiers, study=5)


# ---------------------------------------------------------------------------
# Outputs: CSV and a minimal self-contained SVG chart
# ---------------------------------------------------------------------------

def format_rates_csv(rows: list[RateEstimate]) -> str:
    out = [",".join(CSV_COLUMNS)]
    for r in rows:
        out.append(f"{r.study},{r.setting},{r.n},{r.classifier},"
                   f"{r.successes},{r.trials},{r.rate:.6f},"
                   f"{r.ci_low:.6f},{r.ci_high:.6f}")
    return "\n".join(out) + "\n"


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#e377c2", "#17becf")


def render_rate_chart(rows: list[RateEstimate], title: str,
                      x_label: str) -> str:
    """Self-contained SVG: one polyline per series with a shaded 95% band."""
    plot_rows = [r for r in rows if r.series]
    if not plot_rows:
        raise ValueError("no plottable rows (every series key is empty)")
    series: dict[str, list[RateEstimate]] = {}
    for r in plot_rows:
        series.setdefault(r.series, []).append(r)
    for key in series:
        series[key].sort(key=lambda r: r.x)

    width, height = 640, 440
    ml, mr, mt, mb = 60, 160, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    xs = [r.x for r in plot_rows]
    x_min, x_max = min(xs), max(xs)
    span = (x_max - x_min) or 1.0

    def px(x: float) -> float:
        return ml + (x - x_min) / span * pw

    def py(y: float) -> float:
        return mt + (1.0 - y) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{ml + pw / 2:.1f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]
    # axes and ticks
    parts.append(f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" '
                 f'y2="{mt + ph}" stroke="black"/>')
    parts.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" '
                 f'stroke="black"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = py(frac)
        parts.append(f'<line x1="{ml - 4}" y1="{y:.1f}" x2="{ml}" '
                     f'y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{ml - 8}" y="{y + 4:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{frac:g}</text>')
    x_ticks = sorted({r.x for r in plot_rows})
    if len(x_ticks) > 12:
        step = len(x_ticks) // 10 + 1
        x_ticks = x_ticks[::step]
    for xv in x_ticks:
        x = px(xv)
        parts.append(f'<line x1="{x:.1f}" y1="{mt + ph}" x2="{x:.1f}" '
                     f'y2="{mt + ph + 4}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{mt + ph + 18}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{xv:g}</text>')
    parts.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12">{x_label}</text>')
    parts.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 16 {mt + ph / 2:.1f})">'
                 f'correct classification rate</text>')

    for si, key in enumerate(sorted(series)):
        color = _PALETTE[si % len(_PALETTE)]
        pts = series[key]
        if len(pts) > 1:
            band = " ".join(f"{px(r.x):.2f},{py(r.ci_high):.2f}" for r in pts)
            band += " " + " ".join(f"{px(r.x):.2f},{py(r.ci_low):.2f}"
                                   for r in reversed(pts))
            parts.append(f'<polygon points="{band}" fill="{color}" '
                         f'fill-opacity="0.15" stroke="none"/>')
            line = " ".join(f"{px(r.x):.2f},{py(r.rate):.2f}" for r in pts)
            parts.append(f'<polyline points="{line}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
        for r in pts:
            parts.append(f'<circle cx="{px(r.x):.2f}" cy="{py(r.rate):.2f}" '
                         f'r="2.5" fill="{color}"/>')
        ly = mt + 14 + 16 * si
        parts.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" '
                     f'x2="{ml + pw + 30}" y2="{ly - 4}" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{ml + pw + 36}" y="{ly}" '
                     f'font-family="sans-serif" font-size="11">{key}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


_X_LABELS = {1: "theta2 (transitivity effect)",
             2: "theta2 (reciprocity effect)",
             3: "true latent dimension",
             4: "sigma2 (latent scale)",
             5: "theta2 (transitivity effect)"}


def emit_outputs(rows: list[RateEstimate], out_dir, stem: str | None = None
                 ) -> tuple[str, str]:
    """Write the rate table as CSV plus an SVG chart; returns both paths."""
    if not rows:
        raise ValueError("empty result table; nothing to write")
    study = rows[0].study
    stem = stem or f"study{study}"
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    svg_path = os.path.join(out_dir, f"{stem}.svg")
    _atomic_write(csv_path, format_rates_csv(rows))
    title = f"Simulation study {study}" if study else stem
    _atomic_write(svg_path, render_rate_chart(rows, title,
                                              _X_LABELS.get(study, "setting")))
    return csv_path, svg_path
