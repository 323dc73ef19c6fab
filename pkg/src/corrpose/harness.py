"""Experiment sweeps: config handling, per-trial evaluation, CSV rows and summaries.

A sweep is the product ``noise_grid x corruption_grid`` of grid points, each
run for ``scenes`` seeded scenes under every ablation variant. Trial seeds
come from ``SeedSequence([seed, grid_index, scene_index])``, so ablation
variants of the same grid point see the same scenes.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import itertools
import json
import math
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .camera import CameraIntrinsics
from .correspondence import CorruptionSpec, DescriptorSpec
from .errors import ConfigError, EmptyInputError, PoseError
from .lm import LMSettings
from .metrics import AUC_THRESHOLDS, DIAMETER_FRACTIONS, EvalReport, add_s
from .refine import RefinementConfig, refine
from .scene import ObjectModel, SceneSpec, builtin_model, generate_scene, load_model
from .se3 import rotation_error, translation_error

FLOAT_FORMAT = "{:.9g}"


@dataclass
class NoisePoint:
    rot_deg: float = 10.0
    trans: list = field(default_factory=lambda: [0.03, 0.03, 0.15])


@dataclass
class Ablation:
    weighting: bool = True
    rectification: bool = True


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    model: dict = field(default_factory=lambda: {"builtin": "box-grid", "n": 5})
    camera: dict = field(default_factory=lambda: CameraIntrinsics.linemod().to_dict())
    scenes: int = 10
    seed: int = 0
    depth_range: list = field(default_factory=lambda: [0.7, 1.1])
    center_margin: float = 0.3
    noise_grid: list = field(default_factory=lambda: [NoisePoint()])
    corruption_grid: list = field(default_factory=lambda: [CorruptionSpec()])
    ablations: list = field(default_factory=lambda: [Ablation()])
    iterations: int = 4
    cycles: int = 3
    provider: str = "oracle"
    window: float = 8.0
    lm: LMSettings = field(default_factory=LMSettings)
    descriptors: DescriptorSpec = field(default_factory=DescriptorSpec)
    output: str = "results.csv"

    def __post_init__(self):
        if self.scenes < 1:
            raise ConfigError("scenes must be >= 1")
        for name in ("noise_grid", "corruption_grid", "ablations"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        if not isinstance(self.model, dict) or ("builtin" in self.model) == ("path" in self.model):
            raise ConfigError("model needs exactly one of 'builtin' or 'path'")

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self, indent=None) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=indent, separators=None if indent else (",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "noise_grid" in data:
                data["noise_grid"] = [NoisePoint(**p) for p in data["noise_grid"]]
            if "corruption_grid" in data:
                data["corruption_grid"] = [CorruptionSpec(**c) for c in data["corruption_grid"]]
            if "ablations" in data:
                data["ablations"] = [Ablation(**a) for a in data["ablations"]]
            if "lm" in data:
                data["lm"] = LMSettings(**data["lm"])
            if "descriptors" in data:
                data["descriptors"] = DescriptorSpec(**data["descriptors"])
            cfg = cls(**data)
            cfg.intrinsics()
            cfg.refinement(cfg.ablations[0], cfg.corruption_grid[0])
            for p in cfg.noise_grid:
                cfg.scene_spec(p)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    @classmethod
    def from_json(cls, text: str) -> ExperimentConfig:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_json(text)

    def sha256(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    # -- derived objects ---------------------------------------------------

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(**self.camera)

    def load_model(self) -> ObjectModel:
        m = self.model
        if "builtin" in m:
            return builtin_model(m["builtin"], m.get("n"))
        try:
            return load_model(m["path"], symmetric=bool(m.get("symmetric", False)))
        except OSError as exc:
            raise ConfigError(f"cannot read model {m['path']}: {exc}") from exc

    def scene_spec(self, noise: NoisePoint) -> SceneSpec:
        return SceneSpec(
            rot_noise_deg=noise.rot_deg,
            trans_noise=tuple(noise.trans),
            depth_range=tuple(self.depth_range),
            center_margin=self.center_margin,
        )

    def refinement(self, ablation: Ablation, corruption: CorruptionSpec) -> RefinementConfig:
        return RefinementConfig(
            iterations=self.iterations,
            cycles=self.cycles,
            lm=self.lm,
            corruption=corruption,
            descriptors=self.descriptors,
            weighting=ablation.weighting,
            rectification=ablation.rectification,
            provider=self.provider,
            window=self.window,
        )

    def grid(self):
        """Yield ``(grid_index, noise, corruption)`` in row order."""
        for i, (n, c) in enumerate(itertools.product(self.noise_grid, self.corruption_grid)):
            yield i, n, c


def trial_seed(master: int, grid_index: int, scene_index: int) -> int:
    return int(np.random.SeedSequence([master, grid_index, scene_index]).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# rows

ROW_FIELDS = [
    "experiment", "grid_index", "scene_index", "seed",
    "rot_noise_deg", "trans_noise_x", "trans_noise_y", "trans_noise_z",
    "noise_std", "outlier_fraction", "outlier_radius", "provider",
    "weighting", "rectification", "metric", "add", "diameter",
    "rot_err_deg", "trans_err_m", "recurrent_iterations", "lm_iterations",
    "converged", "failed", "error",
]
TIMING_FIELD = "wall_time_ms"


@dataclass
class ResultRow:
    experiment: str
    grid_index: int
    scene_index: int
    seed: int
    rot_noise_deg: float
    trans_noise_x: float
    trans_noise_y: float
    trans_noise_z: float
    noise_std: float
    outlier_fraction: float
    outlier_radius: float
    provider: str
    weighting: bool
    rectification: bool
    metric: str
    add: float
    diameter: float
    rot_err_deg: float
    trans_err_m: float
    recurrent_iterations: int
    lm_iterations: int
    converged: bool
    failed: bool
    error: str = ""
    wall_time_ms: float = 0.0

    def csv_values(self, timing=False) -> list:
        names = ROW_FIELDS + ([TIMING_FIELD] if timing else [])
        return [_fmt(getattr(self, n)) for n in names]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return FLOAT_FORMAT.format(v)
    return str(v)


def run_trial(config: ExperimentConfig, model: ObjectModel, grid_index, noise, corruption, scene_index) -> list:
    """Generate one scene and refine it under every ablation variant."""
    K = config.intrinsics()
    seed = trial_seed(config.seed, grid_index, scene_index)
    rows = []
    common = dict(
        experiment=config.name, grid_index=grid_index, scene_index=scene_index, seed=seed,
        rot_noise_deg=float(noise.rot_deg), trans_noise_x=float(noise.trans[0]),
        trans_noise_y=float(noise.trans[1]), trans_noise_z=float(noise.trans[2]),
        noise_std=float(corruption.noise_std), outlier_fraction=float(corruption.outlier_fraction),
        outlier_radius=float(corruption.outlier_radius), provider=config.provider,
        metric="ADD-S" if model.symmetric else "ADD", diameter=model.diameter,
    )
    try:
        scene = generate_scene(model, K, config.scene_spec(noise), seed)
    except PoseError as exc:
        for ab in config.ablations:
            rows.append(ResultRow(
                **common, weighting=ab.weighting, rectification=ab.rectification,
                add=math.inf, rot_err_deg=math.inf, trans_err_m=math.inf,
                recurrent_iterations=0, lm_iterations=0, converged=False, failed=True,
                error=f"{type(exc).__name__}: {exc}",
            ))
        return rows
    for ab in config.ablations:
        t0 = time.perf_counter()
        result = refine(scene, None, config.refinement(ab, corruption), seed=seed)
        elapsed = 1e3 * (time.perf_counter() - t0)
        rows.append(ResultRow(
            **common, weighting=ab.weighting, rectification=ab.rectification,
            add=add_s(result.pose, scene.pose_gt, model),
            rot_err_deg=math.degrees(rotation_error(result.pose, scene.pose_gt)),
            trans_err_m=translation_error(result.pose, scene.pose_gt),
            recurrent_iterations=len(result.trace), lm_iterations=result.lm_iterations,
            converged=result.converged, failed=result.failed, error=result.error,
            wall_time_ms=elapsed,
        ))
    return rows


def _run_trial_packed(args):
    return run_trial(*args)


@dataclass
class ExperimentResult:
    rows: list
    summary: list
    report: EvalReport


def run_experiment(config: ExperimentConfig, out=None, threads: int = 1, timing: bool = False) -> ExperimentResult:
    """Run the full sweep and write the rows CSV to ``out`` (default ``config.output``).

    Model loading and the output path are checked before any trial runs.
    Trial failures become rows; they never abort the sweep.
    """
    model = config.load_model()
    out = Path(out if out is not None else config.output)
    if not out.parent.exists():
        raise ConfigError(f"output directory {out.parent} does not exist")
    try:
        fh = out.open("w", newline="")
    except OSError as exc:
        raise ConfigError(f"cannot write {out}: {exc}") from exc
    jobs = [
        (config, model, g, noise, corr, s)
        for g, noise, corr in config.grid()
        for s in range(config.scenes)
    ]
    with fh:
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                chunks = list(pool.map(_run_trial_packed, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
        else:
            chunks = [_run_trial_packed(j) for j in jobs]
        # per grid point, group rows by ablation variant, scenes in order
        rows = []
        n_ab = len(config.ablations)
        for g in range(len(config.noise_grid) * len(config.corruption_grid)):
            block = chunks[g * config.scenes:(g + 1) * config.scenes]
            for a in range(n_ab):
                rows.extend(chunk[a] for chunk in block)
        write_rows(fh, rows, config, timing=timing)
    summary = emit_summary(rows)
    report = EvalReport.from_values([r.add for r in rows], model.diameter)
    return ExperimentResult(rows, summary, report)


def metadata_lines(config: ExperimentConfig) -> list:
    return [
        f"# version={__version__}",
        f"# config_sha256={config.sha256()}",
        f"# seed={config.seed}",
        f"# config={config.to_json()}",
    ]


def write_rows(fh, rows, config: ExperimentConfig, timing=False) -> None:
    for line in metadata_lines(config):
        fh.write(line + "\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ROW_FIELDS + ([TIMING_FIELD] if timing else []))
    for r in rows:
        w.writerow(r.csv_values(timing))


def _parse_bool(s):
    return s in ("1", "True", "true")


def read_rows(path) -> list:
    """Load rows written by ``write_rows``; metadata comment lines are skipped."""
    with Path(path).open(newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = []
    for rec in csv.DictReader(io.StringIO("".join(lines))):
        kwargs = {}
        for f in dataclasses.fields(ResultRow):
            if f.name not in rec:
                continue
            raw = rec[f.name]
            if f.type == "bool":
                kwargs[f.name] = _parse_bool(raw)
            elif f.type == "int":
                kwargs[f.name] = int(raw)
            elif f.type == "float":
                kwargs[f.name] = float(raw)
            else:
                kwargs[f.name] = raw
        rows.append(ResultRow(**kwargs))
    return rows


# ---------------------------------------------------------------------------
# summaries

SUMMARY_FIELDS = [
    "grid_index", "weighting", "rectification", "trials", "failed",
    "acc_0.02d", "acc_0.05d", "acc_0.1d", "auc", "mean_rot_err_deg", "mean_trans_err_m",
]


@dataclass
class SummaryRow:
    grid_index: int
    weighting: bool
    rectification: bool
    trials: int
    failed: int
    accuracy: dict
    auc: float
    mean_rot_err_deg: float
    mean_trans_err_m: float

    def values(self) -> list:
        return [
            _fmt(self.grid_index), _fmt(self.weighting), _fmt(self.rectification),
            _fmt(self.trials), _fmt(self.failed),
            *(_fmt(self.accuracy[f]) for f in DIAMETER_FRACTIONS),
            _fmt(self.auc), _fmt(self.mean_rot_err_deg), _fmt(self.mean_trans_err_m),
        ]


def emit_summary(rows) -> list:
    """Aggregate rows per (grid point, weighting, rectification), keys sorted."""
    if not rows:
        raise EmptyInputError("no rows to summarise")
    groups = defaultdict(list)
    for r in rows:
        groups[(r.grid_index, r.weighting, r.rectification)].append(r)
    out = []
    for key in sorted(groups):
        grp = groups[key]
        values = np.array([r.add for r in grp])
        diameter = grp[0].diameter
        finite = np.isfinite(values)
        acc = {f: 100.0 * np.count_nonzero(values < f * diameter) / values.size for f in DIAMETER_FRACTIONS}
        auc = 100.0 * float(np.mean(values[None, :] < AUC_THRESHOLDS[:, None]))
        out.append(SummaryRow(
            key[0], key[1], key[2], len(grp), sum(r.failed for r in grp), acc, auc,
            float(np.mean([r.rot_err_deg for r in grp])) if finite.all() else math.inf,
            float(np.mean([r.trans_err_m for r in grp])) if finite.all() else math.inf,
        ))
    return out


def summary_csv(summary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for s in summary:
        w.writerow(s.values())
    return buf.getvalue()


def summary_table(summary) -> str:
    header = f"{'grid':>4} {'wt':>2} {'rect':>4} {'n':>5} {'fail':>4} {'0.02d':>7} {'0.05d':>7} {'0.1d':>7} {'AUC':>7} {'rot°':>9} {'trans m':>10}"
    lines = [header]
    for s in summary:
        a = s.accuracy
        lines.append(
            f"{s.grid_index:>4} {int(s.weighting):>2} {int(s.rectification):>4} {s.trials:>5} {s.failed:>4} "
            f"{a[0.02]:>7.2f} {a[0.05]:>7.2f} {a[0.1]:>7.2f} {s.auc:>7.2f} "
            f"{s.mean_rot_err_deg:>9.4f} {s.mean_trans_err_m:>10.6f}"
        )
    return "\n".join(lines)
