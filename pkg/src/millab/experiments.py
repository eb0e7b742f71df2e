"""Experiment drivers: the AP table, heatmaps, theory report, toy benchmark.

Every driver can write its artifacts into an output directory: a JSON
result, human-readable renderings (text table, PNG figures), raw delimited
outputs (CSV, PGM), and a ``manifest.json`` recording the resolved config,
its digest, and library versions, which is sufficient to reproduce the
outputs bit-identically on the same build.
"""

from __future__ import annotations

import hashlib
import json
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import figures
from .errors import TrainingError, ValidationError
from .losses import NoiseRates, analytic_si_rates, bag_cost_soft_nor, si_bag_cost
from .metrics import average_precision, bag_max_score, map_over_labels
from .nets import (
    Arch,
    LinearArch,
    MLPParams,
    MultiHeadArch,
    TrainConfig,
    TrainedModel,
    TwoLayerArch,
    forward,
    params_from_vector,
    train,
    train_bag_objective,
)
from .synth import SynthSpec, densities, generate

LOSS_NAMES = ("si", "uc")
ARCH_NAMES = ("linear", "two_layer")

#: Default heatmap window: covers all of the default synthetic geometry.
DEFAULT_GRID_WINDOW = ((-2.5, 2.5), (-1.0, 5.5))
DEFAULT_GRID_RESOLUTION = (200, 200)

#: Thresholds reported by the theory report.
REPORT_THRESHOLDS = (0.1, 0.25, 0.5)


def make_arch(name: str, in_dim: int = 2) -> Arch:
    if name == "linear":
        return LinearArch(in_dim=in_dim)
    if name == "two_layer":
        return TwoLayerArch(in_dim=in_dim, hidden=2)
    raise ValidationError(f"unknown architecture name {name!r}")


# ---------------------------------------------------------------------------
# config, digests, manifests


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of a table run: data spec, grid, protocol, seeds."""

    spec: SynthSpec
    losses: tuple[str, ...] = ("si", "uc")
    archs: tuple[str, ...] = ("linear", "two_layer")
    train: TrainConfig = TrainConfig()
    seeds: tuple[int, ...] = (0, 1, 2)
    uc_rates: NoiseRates | None = None  # None = analytic SI rates
    n_workers: int = 0  # 0 = one per CPU

    def __post_init__(self) -> None:
        if not self.losses or any(l not in LOSS_NAMES for l in self.losses):
            raise ValidationError(f"losses must be a nonempty subset of {LOSS_NAMES}")
        if not self.archs or any(a not in ARCH_NAMES for a in self.archs):
            raise ValidationError(f"archs must be a nonempty subset of {ARCH_NAMES}")
        if not self.seeds:
            raise ValidationError("at least one seed is required")
        if self.n_workers < 0:
            raise ValidationError("n_workers must be >= 0")

    def resolved_uc_rates(self) -> NoiseRates:
        if self.uc_rates is not None:
            return self.uc_rates
        return analytic_si_rates(self.spec.scaled_config)

    def to_json_dict(self) -> dict:
        return {
            "spec": self.spec.to_json_dict(),
            "losses": list(self.losses),
            "archs": list(self.archs),
            "train": {
                "epochs": self.train.epochs,
                "learning_rates": list(self.train.learning_rates),
                "full_batch": self.train.full_batch,
                "adam_beta1": self.train.adam_beta1,
                "adam_beta2": self.train.adam_beta2,
                "adam_eps": self.train.adam_eps,
                "trace_every": self.train.trace_every,
            },
            "seeds": list(self.seeds),
            "uc_rates": (
                None
                if self.uc_rates is None
                else {
                    "flip_pos": self.uc_rates.flip_pos,
                    "flip_neg": self.uc_rates.flip_neg,
                }
            ),
            "n_workers": self.n_workers,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ExperimentConfig":
        kwargs: dict = {"spec": SynthSpec.from_json_dict(data["spec"])}
        if "losses" in data:
            kwargs["losses"] = tuple(data["losses"])
        if "archs" in data:
            kwargs["archs"] = tuple(data["archs"])
        if "train" in data:
            t = data["train"]
            kwargs["train"] = TrainConfig(
                epochs=t.get("epochs", 100_000),
                learning_rates=tuple(t.get("learning_rates", (1e-4, 1e-5, 1e-6))),
                full_batch=t.get("full_batch", True),
                adam_beta1=t.get("adam_beta1", 0.9),
                adam_beta2=t.get("adam_beta2", 0.999),
                adam_eps=t.get("adam_eps", 1e-8),
                trace_every=t.get("trace_every", 0),
            )
        if "seeds" in data:
            kwargs["seeds"] = tuple(data["seeds"])
        if data.get("uc_rates") is not None:
            kwargs["uc_rates"] = NoiseRates(
                flip_pos=data["uc_rates"]["flip_pos"],
                flip_neg=data["uc_rates"]["flip_neg"],
            )
        if "n_workers" in data:
            kwargs["n_workers"] = data["n_workers"]
        return cls(**kwargs)


def config_digest(config_json: dict) -> str:
    canonical = json.dumps(config_json, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _versions() -> dict:
    import matplotlib
    import scipy

    from . import __version__

    return {
        "millab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
    }


def write_manifest(
    out_dir: Path, command: str, config_json: dict, extra: dict | None = None
) -> None:
    manifest = {
        "command": command,
        "config": config_json,
        "config_digest": config_digest(config_json),
        "versions": _versions(),
    }
    if extra:
        manifest.update(extra)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _ensure_dir(out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


# ---------------------------------------------------------------------------
# dataset persistence (generate subcommand)


def save_dataset(spec: SynthSpec, out_dir: str | Path) -> Path:
    """Generate the dataset and write data.csv, spec.json, a scatter figure,
    and the run manifest. Returns the output directory."""
    out_dir = _ensure_dir(out_dir)
    dataset = generate(spec)
    dataset.to_csv(out_dir / "data.csv")
    spec.save_json(out_dir / "spec.json")
    figures.save_dataset_scatter(dataset, out_dir / "data_scatter.png")
    write_manifest(out_dir, "generate", spec.to_json_dict())
    return out_dir


# ---------------------------------------------------------------------------
# single training runs (worker tasks)

_DATASET_CACHE: dict[str, object] = {}


def _cached_dataset(spec_json: dict):
    key = config_digest(spec_json)
    if key not in _DATASET_CACHE:
        _DATASET_CACHE.clear()  # keep at most one full-size dataset per process
        _DATASET_CACHE[key] = generate(SynthSpec.from_json_dict(spec_json))
    return _DATASET_CACHE[key]


def _run_one(task: dict) -> dict:
    """Train one (loss, arch, lr, seed) run; executed in a worker process."""
    dataset = _cached_dataset(task["spec"])
    arch = make_arch(task["arch"])
    config = TrainConfig(
        epochs=task["epochs"],
        learning_rates=(task["lr"],),
        adam_beta1=task["adam_beta1"],
        adam_beta2=task["adam_beta2"],
        adam_eps=task["adam_eps"],
        trace_every=task["trace_every"],
    )
    rates = None
    if task["rates"] is not None:
        rates = NoiseRates(*task["rates"])
    out = {k: task[k] for k in ("loss", "arch", "lr", "seed")}
    try:
        model = train(
            dataset.training_view(),
            loss=task["loss"],
            arch=arch,
            config=config,
            seed=task["seed"],
            rates=rates,
        )
    except TrainingError as exc:
        out.update(ok=False, error=str(exc))
        return out
    out.update(
        ok=True,
        final_loss=model.final_train_loss,
        theta=[float(v) for v in model.params.to_vector()],
        trace=[(int(e), float(v)) for e, v in model.loss_trace],
        diagnostics=list(model.diagnostics),
    )
    return out


# ---------------------------------------------------------------------------
# table runner


@dataclass
class CellResult:
    """Outcome for one (loss, arch, seed) cell after lr selection."""

    loss: str
    arch: str
    seed: int
    ap: float | None
    chosen_lr: float | None
    final_train_loss: float | None
    model: TrainedModel | None
    failed: bool
    error: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "loss": self.loss,
            "arch": self.arch,
            "seed": self.seed,
            "ap": self.ap,
            "chosen_lr": self.chosen_lr,
            "final_train_loss": self.final_train_loss,
            "failed": self.failed,
            "error": self.error,
        }


@dataclass
class Table1Result:
    config: ExperimentConfig
    cells: list[CellResult]

    def cell(self, loss: str, arch: str, seed: int) -> CellResult:
        for c in self.cells:
            if (c.loss, c.arch, c.seed) == (loss, arch, seed):
                return c
        raise KeyError((loss, arch, seed))

    def aps(self, loss: str, arch: str) -> list[float]:
        return [
            c.ap
            for c in self.cells
            if c.loss == loss and c.arch == arch and c.ap is not None
        ]

    def to_json_dict(self) -> dict:
        summary = {}
        for loss in self.config.losses:
            for arch in self.config.archs:
                aps = self.aps(loss, arch)
                if aps:
                    summary[f"{loss}/{arch}"] = {
                        "min_ap": min(aps),
                        "max_ap": max(aps),
                        "mean_ap": float(np.mean(aps)),
                    }
        return {
            "config": self.config.to_json_dict(),
            "cells": [c.to_json_dict() for c in self.cells],
            "summary": summary,
        }

    def render_text(self) -> str:
        lines = ["AP against ground-truth labels (per seed)", ""]
        header = f"{'loss':<6}{'arch':<12}" + "".join(
            f"seed {s:<8}" for s in self.config.seeds
        )
        lines.append(header)
        lines.append("-" * len(header))
        for loss in self.config.losses:
            for arch in self.config.archs:
                row = f"{loss:<6}{arch:<12}"
                for seed in self.config.seeds:
                    c = self.cell(loss, arch, seed)
                    row += f"{'failed':<13}" if c.failed else f"{c.ap:<13.4f}"
                lines.append(row)
        return "\n".join(lines) + "\n"


def _select_cell(
    loss: str, arch: str, seed: int, runs: list[dict], lr_order: tuple[float, ...]
) -> CellResult:
    ok_runs = [r for r in runs if r["ok"]]
    if not ok_runs:
        errors = "; ".join(r.get("error", "diverged") for r in runs)
        return CellResult(loss, arch, seed, None, None, None, None, True, errors)
    ok_runs.sort(key=lambda r: (r["final_loss"], lr_order.index(r["lr"])))
    best = ok_runs[0]
    params = params_from_vector(
        make_arch(arch), np.asarray(best["theta"], dtype=np.float64), seed
    )
    model = TrainedModel(
        params=params,
        final_train_loss=best["final_loss"],
        chosen_lr=best["lr"],
        loss_trace=tuple((e, v) for e, v in best["trace"]),
        diagnostics=tuple(best.get("diagnostics", ())),
    )
    return CellResult(
        loss, arch, seed, None, best["lr"], best["final_loss"], model, False
    )


def run_table1(
    config: ExperimentConfig, output_dir: str | Path | None = None
) -> Table1Result:
    """Train the full (loss, arch, lr, seed) grid and evaluate AP per cell.

    Learning-rate selection is by lowest final training loss; evaluation is
    against the hidden truth labels. Failed cells (all rates diverged) are
    recorded, not raised. Runs execute in a process pool.
    """
    spec_json = config.spec.to_json_dict()
    rates = config.resolved_uc_rates()
    tasks = [
        {
            "spec": spec_json,
            "loss": loss,
            "arch": arch,
            "lr": lr,
            "seed": seed,
            "epochs": config.train.epochs,
            "adam_beta1": config.train.adam_beta1,
            "adam_beta2": config.train.adam_beta2,
            "adam_eps": config.train.adam_eps,
            "trace_every": config.train.trace_every,
            "rates": (rates.flip_pos, rates.flip_neg) if loss == "uc" else None,
        }
        for loss in config.losses
        for arch in config.archs
        for seed in config.seeds
        for lr in config.train.learning_rates
    ]
    n_workers = config.n_workers or os.cpu_count() or 1
    if n_workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(n_workers, len(tasks))) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]

    dataset = _cached_dataset(spec_json)
    cells = []
    for loss in config.losses:
        for arch in config.archs:
            for seed in config.seeds:
                runs = [
                    r
                    for r in results
                    if (r["loss"], r["arch"], r["seed"]) == (loss, arch, seed)
                ]
                cell = _select_cell(
                    loss, arch, seed, runs, config.train.learning_rates
                )
                if not cell.failed:
                    scores = forward(cell.model.params, dataset.features)
                    cell.ap = average_precision(scores, dataset.truth_labels).ap
                cells.append(cell)
    table = Table1Result(config=config, cells=cells)

    if output_dir is not None:
        out = _ensure_dir(output_dir)
        (out / "table1.json").write_text(
            json.dumps(table.to_json_dict(), indent=2) + "\n"
        )
        (out / "table1.txt").write_text(table.render_text())
        figures.save_dataset_scatter(dataset, out / "data_scatter.png")
        heat_dir = _ensure_dir(out / "heatmaps")
        first_seed = config.seeds[0]
        for loss in config.losses:
            for arch in config.archs:
                cell = table.cell(loss, arch, first_seed)
                if not cell.failed:
                    render_heatmap(
                        cell.model.params,
                        out_basename=heat_dir / f"{loss}_{arch}",
                        title=f"{loss} / {arch} (seed {first_seed})",
                    )
        write_manifest(out, "table1", config.to_json_dict())
    return table


# ---------------------------------------------------------------------------
# heatmaps


@dataclass(frozen=True)
class HeatmapGrid:
    """Model scores evaluated on a rectangular grid (rows indexed by y)."""

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    resolution: tuple[int, int]  # (nx, ny)
    values: np.ndarray  # shape (ny, nx), y ascending

    def __post_init__(self) -> None:
        nx, ny = self.resolution
        if self.values.shape != (ny, nx):
            raise ValidationError(
                f"values shape {self.values.shape} != resolution (ny={ny}, nx={nx})"
            )


def _write_pgm(values: np.ndarray, path: Path) -> None:
    """8-bit binary PGM; 255 = score 1; top image row = largest y."""
    img = np.round(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)[::-1]
    ny, nx = img.shape
    with path.open("wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode())
        fh.write(img.tobytes())


def render_heatmap(
    model: TrainedModel | MLPParams,
    x_range: tuple[float, float] = DEFAULT_GRID_WINDOW[0],
    y_range: tuple[float, float] = DEFAULT_GRID_WINDOW[1],
    resolution: tuple[int, int] = DEFAULT_GRID_RESOLUTION,
    out_basename: str | Path | None = None,
    title: str = "",
) -> HeatmapGrid:
    """Evaluate model scores on a grid; optionally write CSV + PGM + PNG.

    With ``out_basename=prefix`` writes ``prefix.csv`` (x,y,score rows),
    ``prefix.pgm`` (8-bit grayscale) and ``prefix.png`` (rendered figure).
    """
    params = model.params if isinstance(model, TrainedModel) else model
    nx, ny = resolution
    if nx < 2 or ny < 2:
        raise ValidationError("heatmap resolution must be at least 2x2")
    xs = np.linspace(x_range[0], x_range[1], nx)
    ys = np.linspace(y_range[0], y_range[1], ny)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    values = forward(params, pts).reshape(ny, nx)
    grid = HeatmapGrid(
        x_range=x_range, y_range=y_range, resolution=resolution, values=values
    )
    if out_basename is not None:
        base = Path(out_basename)
        base.parent.mkdir(parents=True, exist_ok=True)
        with Path(f"{base}.csv").open("w") as fh:
            fh.write("x,y,score\n")
            for iy in range(ny):
                for ix in range(nx):
                    fh.write(
                        f"{float(xs[ix])!r},{float(ys[iy])!r},{float(values[iy, ix])!r}\n"
                    )
        _write_pgm(values, Path(f"{base}.pgm"))
        figures.save_heatmap_figure(values, x_range, y_range, f"{base}.png", title)
    return grid


# ---------------------------------------------------------------------------
# theory report


def run_theory_report(
    spec: SynthSpec, output_dir: str | Path | None = None
) -> dict:
    """All theorem quantities for a spec: optima, densities, verdicts."""
    from .theory import mixing_optimum, mixing_tolerance, nonmixing_optimum

    cfg = spec.scaled_config
    mu_pbn, mu_nb = densities(spec)
    segments = []
    for seg in mu_nb.segments:
        mid = (seg.abscissa, 0.5 * (seg.y_min + seg.y_max))
        segments.append(
            {
                "abscissa": seg.abscissa,
                "y_min": seg.y_min,
                "y_max": seg.y_max,
                "density_pos_bag_neg": mu_pbn.density_at(mid),
                "density_neg_bag": mu_nb.density_at(mid),
                "nonmixing_optimum": nonmixing_optimum(mid, cfg, mu_pbn, mu_nb),
            }
        )
    verdicts = {}
    for thr in REPORT_THRESHOLDS:
        verdicts[str(thr)] = [
            {
                "abscissa": v.segment.abscissa,
                "optimum": v.optimum,
                "status": v.status,
            }
            for v in mixing_tolerance(cfg, mu_pbn, mu_nb, thr)
        ]
    report = {
        "spec": spec.to_json_dict(),
        "partition_sizes": {
            "pos_bag_pos": cfg.n_pos_bag_pos,
            "pos_bag_neg": cfg.n_pos_bag_neg,
            "neg_bag": cfg.n_neg_bag,
        },
        "mixing_optimum": mixing_optimum(cfg),
        "segments": segments,
        "tolerance_verdicts": verdicts,
    }
    if output_dir is not None:
        out = _ensure_dir(output_dir)
        (out / "theory_report.json").write_text(json.dumps(report, indent=2) + "\n")
        write_manifest(out, "theory", spec.to_json_dict())
    return report


# ---------------------------------------------------------------------------
# toy multi-label benchmark


@dataclass(frozen=True)
class ToyMultiLabelConfig:
    """Desk-scale multi-label bag benchmark: one synthetic geometry per label
    on its own pair of feature dimensions, shared bags across labels."""

    n_labels: int = 5
    bag_size: int = 20
    positives_per_bag: int = 2
    imbalances: tuple[float, ...] = ()  # empty = 20 for every label
    n_bags: int = 210
    skew: float = 0.8
    seed: int = 0
    hidden: int = 0  # 0 = 2 * n_labels
    train: TrainConfig = TrainConfig(epochs=4000, learning_rates=(3e-3, 1e-3))

    def __post_init__(self) -> None:
        if self.n_labels < 1:
            raise ValidationError("n_labels must be >= 1")
        if self.imbalances and len(self.imbalances) != self.n_labels:
            raise ValidationError("need one imbalance per label")
        if not 1 <= self.positives_per_bag <= self.bag_size:
            raise ValidationError("positives_per_bag must be in [1, bag_size]")
        if self.n_bags < 2:
            raise ValidationError("need at least 2 bags")
        if not 0.0 <= self.skew <= 1.0:
            raise ValidationError("skew must be in [0, 1]")

    @property
    def label_imbalances(self) -> tuple[float, ...]:
        return self.imbalances or (20.0,) * self.n_labels

    @property
    def hidden_units(self) -> int:
        return self.hidden or 2 * self.n_labels

    def to_json_dict(self) -> dict:
        return {
            "n_labels": self.n_labels,
            "bag_size": self.bag_size,
            "positives_per_bag": self.positives_per_bag,
            "imbalances": list(self.label_imbalances),
            "n_bags": self.n_bags,
            "skew": self.skew,
            "seed": self.seed,
            "hidden": self.hidden_units,
            "train": {
                "epochs": self.train.epochs,
                "learning_rates": list(self.train.learning_rates),
            },
        }


def make_toy_dataset(cfg: ToyMultiLabelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Build (bag_features, bag_labels) for the toy benchmark.

    Label z lives on feature dimensions (2z, 2z+1) with the standard
    geometry: positives on the low horizontal line, negatives on two
    vertical lines with the positive-bag negatives skewed to the right one.
    Per-label bag positivity and line assignments come from per-label
    Philox streams, so labels are independent.
    """
    n_bags, m, n_labels = cfg.n_bags, cfg.bag_size, cfg.n_labels
    features = np.zeros((n_bags, m, 2 * n_labels))
    labels = np.zeros((n_bags, n_labels))
    for z, imbalance in enumerate(cfg.label_imbalances):
        stream = np.random.Generator(np.random.Philox(key=cfg.seed).jumped(z))
        n_pos_bags = max(1, round(n_bags / (1.0 + imbalance)))
        pos_bags = stream.choice(n_bags, size=n_pos_bags, replace=False)
        labels[pos_bags, z] = 1.0
        is_pos_bag = labels[:, z] == 1.0

        x = np.where(stream.random((n_bags, m)) < 0.5, -1.0, 1.0)
        x[is_pos_bag] = np.where(
            stream.random((n_pos_bags, m)) < cfg.skew, 1.0, -1.0
        )
        y = stream.uniform(0.0, 5.0, (n_bags, m))
        for b in pos_bags:
            slots = stream.choice(m, size=cfg.positives_per_bag, replace=False)
            x[b, slots] = stream.uniform(-2.0, 2.0, cfg.positives_per_bag)
            y[b, slots] = -0.5
        features[:, :, 2 * z] = x
        features[:, :, 2 * z + 1] = y
    return features, labels


@dataclass
class ToyMultiLabelResult:
    config: ToyMultiLabelConfig
    per_label_ap: dict[str, list[float | None]]  # objective -> APs per label
    mean_ap: dict[str, float]
    gap: float
    final_losses: dict[str, float]
    chosen_lrs: dict[str, float]

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "per_label_ap": self.per_label_ap,
            "mean_ap": self.mean_ap,
            "gap": self.gap,
            "final_losses": self.final_losses,
            "chosen_lrs": self.chosen_lrs,
        }


_TOY_OBJECTIVES = {"si": si_bag_cost, "soft_nor": bag_cost_soft_nor}


def run_toy_multilabel(
    cfg: ToyMultiLabelConfig, output_dir: str | Path | None = None
) -> ToyMultiLabelResult:
    """Train SI and soft-NOR heads on shared bags; report bag-level mAP.

    Bags are scored per label by the max instance score and ranked against
    the bag labels, so both objectives are compared on the same footing.
    """
    features, labels = make_toy_dataset(cfg)
    n_bags, m, _ = features.shape
    arch = MultiHeadArch(
        in_dim=2 * cfg.n_labels, hidden=cfg.hidden_units, n_labels=cfg.n_labels
    )
    flat = features.reshape(n_bags * m, -1)

    per_label: dict[str, list[float | None]] = {}
    mean_ap: dict[str, float] = {}
    finals: dict[str, float] = {}
    lrs: dict[str, float] = {}
    for name, objective in _TOY_OBJECTIVES.items():
        model = train_bag_objective(
            features, labels, objective, arch, cfg.train, cfg.seed
        )
        scores = forward(model.params, flat).reshape(n_bags, m, cfg.n_labels)
        bag_scores = np.array(
            [
                [bag_max_score(scores[b, :, z]) for z in range(cfg.n_labels)]
                for b in range(n_bags)
            ]
        )
        curves = []
        for z in range(cfg.n_labels):
            if labels[:, z].sum() == 0:
                curves.append(None)
            else:
                curves.append(average_precision(bag_scores[:, z], labels[:, z]))
        report = map_over_labels(curves)
        per_label[name] = [c.ap if c is not None else None for c in curves]
        mean_ap[name] = report.mean_ap
        finals[name] = model.final_train_loss
        lrs[name] = model.chosen_lr

    result = ToyMultiLabelResult(
        config=cfg,
        per_label_ap=per_label,
        mean_ap=mean_ap,
        gap=abs(mean_ap["si"] - mean_ap["soft_nor"]),
        final_losses=finals,
        chosen_lrs=lrs,
    )
    if output_dir is not None:
        out = _ensure_dir(output_dir)
        (out / "toy_multilabel.json").write_text(
            json.dumps(result.to_json_dict(), indent=2) + "\n"
        )
        figures.save_ap_bars(
            per_label, out / "toy_ap_bars.png", title="bag-level AP per label"
        )
        write_manifest(out, "toy-multilabel", cfg.to_json_dict())
    return result
