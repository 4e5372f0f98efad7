"""Experiment orchestration: configs, scenarios, tables.

A single JSON config drives everything. All run-time seeds are derived
from the one master seed, so a config plus a seed pins the whole
experiment, byte for byte. Input files are never modified; every command
writes fresh artifacts into the output directory.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields as dataclass_fields, replace
from pathlib import Path

from . import audio
from .baselines import METHOD_NAMES, BaselineConfig, run_baseline
from .checkpoint import load_checkpoint, save_checkpoint
from .data import LabeledDataset, train_eval_split
from .eraser import (UnlearnConfig, accuracy_snapshot,
                     run_qp_audio_eraser, superpose_labels)
from .metrics import (TABLE_COLUMNS, EvaluationReport, compare_reports,
                      evaluate, report_csv_row, report_from_json,
                      report_to_json)
from .model import Classifier, CrossEntropyLoss, TrainConfig, train
from .rng import Rng, derive_seed

log = logging.getLogger("qpae")

SCENARIOS = ("single", "multi", "sequential", "ablation")

# CLI method ids -> internal baseline method names ("qp" is the pipeline)
METHOD_IDS = {"qp": "qp", "ga": "gradient_ascent", "ng": "negative_gradient",
              "fisher": "fisher_forgetting", "ssd": "synaptic_dampening"}

METHOD_LABELS = {"qp": "QPAudioEraser", "ga": "Gradient Ascent",
                 "ng": "Negative Gradient", "fisher": "Fisher Forgetting",
                 "ssd": "Synaptic Dampening"}

# stage keys for seed derivation
_SEED_DATA, _SEED_SPLIT, _SEED_INIT, _SEED_TRAIN, _SEED_UNLEARN = 1, 2, 3, 4, 5


class ConfigError(ValueError):
    pass


def _take(raw: dict, section: str, known: dict) -> dict:
    """Shallow-validate a JSON object against known keys with defaults."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{section} must be an object")
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")
    merged = dict(known)
    merged.update(raw)
    return merged


@dataclass
class DatasetSpec:
    kind: str = "synthetic"            # "synthetic" | "manifest"
    num_classes: int = 10
    per_class: int = 200
    n_mels: int = audio.DEFAULT_N_MELS
    n_frames: int = audio.DEFAULT_N_FRAMES
    profile: str = "default"
    path: str | None = None            # manifest directory

    def __post_init__(self):
        if self.kind not in ("synthetic", "manifest"):
            raise ConfigError(f"dataset.kind must be synthetic or manifest, got {self.kind!r}")
        if self.kind == "manifest" and not self.path:
            raise ConfigError("dataset.path is required for manifest datasets")
        if self.kind == "synthetic" and self.profile not in audio.PROFILES:
            raise ConfigError(f"unknown synth profile {self.profile!r}")


@dataclass
class TrainSection:
    learning_rate: float = 0.005
    epochs: int = 3
    batch_size: int = 32
    shuffle: bool = True


@dataclass
class UnlearnSection:
    forget_set: list[int] = field(default_factory=lambda: [0])
    phi: float = math.pi
    entropy_lambda: float = 1.0
    alpha: float = 0.3
    epochs: int = 5
    learning_rate: float = 0.15
    batch_size: int = 32
    skip_weight_transform: bool = False
    skip_uncertainty_max: bool = False
    skip_mixing: bool = False


@dataclass
class ExperimentConfig:
    seed: int = 7
    output_dir: str = "out"
    scenario: str = "single"
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    model_hidden: list[int] = field(default_factory=lambda: [64])
    train: TrainSection = field(default_factory=TrainSection)
    unlearn: UnlearnSection = field(default_factory=UnlearnSection)
    baselines: list[BaselineConfig] = field(
        default_factory=lambda: [BaselineConfig(method=m) for m in METHOD_NAMES])
    sequential_requests: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.scenario == "sequential" and not self.sequential_requests:
            raise ConfigError("sequential scenario requires non-empty sequential_requests")
        if not self.unlearn.forget_set:
            raise ConfigError("unlearn.forget_set must be non-empty")


def config_from_dict(raw: dict) -> ExperimentConfig:
    top = _take(raw, "config", {
        "seed": 7, "output_dir": "out", "scenario": "single", "dataset": {},
        "model": {}, "train": {}, "unlearn": {}, "baselines": None,
        "sequential_requests": []})
    try:
        dataset = DatasetSpec(**_take(top["dataset"], "dataset", {
            k: v for k, v in asdict(DatasetSpec()).items()}))
        model = _take(top["model"], "model", {"hidden": [64]})
        train_sec = TrainSection(**_take(top["train"], "train",
                                         asdict(TrainSection())))
        unlearn_sec = UnlearnSection(**_take(top["unlearn"], "unlearn",
                                             asdict(UnlearnSection())))
        if top["baselines"] is None:
            baselines = [BaselineConfig(method=m) for m in METHOD_NAMES]
        else:
            defaults = asdict(BaselineConfig())
            defaults.pop("seed")  # run-time seeds always derive from the master seed
            baselines = [BaselineConfig(**_take(b, f"baselines[{i}]", defaults))
                         for i, b in enumerate(top["baselines"])]
        return ExperimentConfig(
            seed=int(top["seed"]), output_dir=str(top["output_dir"]),
            scenario=top["scenario"], dataset=dataset,
            model_hidden=[int(h) for h in model["hidden"]],
            train=train_sec, unlearn=unlearn_sec, baselines=baselines,
            sequential_requests=[[int(c) for c in req]
                                 for req in top["sequential_requests"]])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def config_to_dict(cfg: ExperimentConfig) -> dict:
    baselines = []
    for b in cfg.baselines:
        d = asdict(b)
        d.pop("seed")
        baselines.append(d)
    return {
        "seed": cfg.seed, "output_dir": cfg.output_dir, "scenario": cfg.scenario,
        "dataset": asdict(cfg.dataset), "model": {"hidden": list(cfg.model_hidden)},
        "train": asdict(cfg.train), "unlearn": asdict(cfg.unlearn),
        "baselines": baselines,
        "sequential_requests": [list(r) for r in cfg.sequential_requests],
    }


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")


def default_config(scenario: str = "single", **overrides) -> ExperimentConfig:
    """The desk-scale benchmark config, adjusted per scenario."""
    fields: dict = {"scenario": scenario}
    if scenario == "multi":
        fields["unlearn"] = UnlearnSection(forget_set=[0, 4])
        # twice the forget samples doubles the ascent steps; gentler
        # settings keep the ascent baselines finite
        fields["baselines"] = [
            replace(BaselineConfig(method=m), ascent_epochs=2,
                    learning_rate=0.08, batch_size=32) for m in METHOD_NAMES]
    if scenario == "sequential":
        fields["sequential_requests"] = [[0], [1], [2]]
    fields.update(overrides)
    unknown = set(fields) - {f.name for f in dataclass_fields(ExperimentConfig)}
    if unknown:
        raise ConfigError(f"unknown config attributes {sorted(unknown)}")
    return ExperimentConfig(**fields)


# ---------------------------------------------------------------------------
# dataset + model construction


def build_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    spec = cfg.dataset
    if spec.kind == "synthetic":
        return audio.synth_dataset(
            spec.num_classes, spec.per_class, derive_seed(cfg.seed, _SEED_DATA),
            n_mels=spec.n_mels, n_frames=spec.n_frames,
            profile=audio.PROFILES[spec.profile])
    return audio.load_manifest(spec.path, num_classes=spec.num_classes,
                               n_mels=spec.n_mels, n_frames=spec.n_frames)


def prepare_splits(cfg: ExperimentConfig) -> tuple[LabeledDataset, LabeledDataset]:
    data = build_dataset(cfg)
    return train_eval_split(data, 0.8, derive_seed(cfg.seed, _SEED_SPLIT))


def _train_config(cfg: ExperimentConfig) -> TrainConfig:
    return TrainConfig(learning_rate=cfg.train.learning_rate,
                       epochs=cfg.train.epochs, batch_size=cfg.train.batch_size,
                       seed=derive_seed(cfg.seed, _SEED_TRAIN),
                       shuffle=cfg.train.shuffle)


def _unlearn_config(cfg: ExperimentConfig, forget_set: set[int] | None = None,
                    **tweaks) -> UnlearnConfig:
    sec = cfg.unlearn
    phase3 = TrainConfig(learning_rate=sec.learning_rate, epochs=sec.epochs,
                         batch_size=sec.batch_size,
                         seed=derive_seed(cfg.seed, _SEED_UNLEARN))
    ucfg = UnlearnConfig(
        forget_set=frozenset(forget_set if forget_set is not None else sec.forget_set),
        phi=sec.phi, entropy_lambda=sec.entropy_lambda, alpha=sec.alpha,
        epochs=sec.epochs, train=phase3,
        skip_weight_transform=sec.skip_weight_transform,
        skip_uncertainty_max=sec.skip_uncertainty_max,
        skip_mixing=sec.skip_mixing)
    return replace(ucfg, **tweaks) if tweaks else ucfg


def _baseline_config(cfg: ExperimentConfig, method: str) -> BaselineConfig:
    for i, b in enumerate(cfg.baselines):
        if b.method == method:
            return replace(b, seed=derive_seed(cfg.seed, 16 + i))
    return BaselineConfig(method=method, seed=derive_seed(cfg.seed, 16 + 8))


# ---------------------------------------------------------------------------
# commands


@dataclass
class Workspace:
    """One experiment's in-memory state plus its output directory."""

    cfg: ExperimentConfig
    out: Path
    train_data: LabeledDataset
    eval_data: LabeledDataset

    @classmethod
    def create(cls, cfg: ExperimentConfig, out: str | Path | None = None) -> "Workspace":
        out_dir = Path(out if out is not None else cfg.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        train_data, eval_data = prepare_splits(cfg)
        return cls(cfg=cfg, out=out_dir, train_data=train_data, eval_data=eval_data)

    @property
    def forget_set(self) -> set[int]:
        return set(self.cfg.unlearn.forget_set)

    def original_path(self) -> Path:
        return self.out / "original.qpae"

    def report_path(self, name: str) -> Path:
        return self.out / f"report_{name}.json"

    def write_report(self, name: str, report: EvaluationReport) -> Path:
        path = self.report_path(name)
        path.write_text(report_to_json(report) + "\n")
        return path

    def read_report(self, name: str) -> EvaluationReport:
        return report_from_json(self.report_path(name).read_text())


def cmd_train(ws: Workspace) -> tuple[Path, EvaluationReport]:
    """Train from a seeded init; write the checkpoint and original report."""
    cfg = ws.cfg
    model = Classifier.random_init(ws.train_data.feature_dim, cfg.model_hidden,
                                   ws.train_data.num_classes,
                                   Rng(derive_seed(cfg.seed, _SEED_INIT)))
    train(model, ws.train_data, _train_config(cfg), CrossEntropyLoss())
    save_checkpoint(model, ws.original_path())
    save_config(cfg, ws.out / "config.json")
    report = evaluate(model, ws.eval_data, ws.forget_set)
    ws.write_report("original", report)
    return ws.original_path(), report


def cmd_unlearn(ws: Workspace, method_id: str) -> tuple[Path, list[dict]]:
    """Apply one unlearning method to a copy of the original checkpoint."""
    if method_id not in METHOD_IDS:
        raise ConfigError(f"unknown method {method_id!r}; expected one of "
                          f"{sorted(METHOD_IDS)}")
    model = load_checkpoint(ws.original_path())
    forget = ws.forget_set
    if method_id == "qp":
        model, phase_log = run_qp_audio_eraser(model, ws.train_data,
                                               _unlearn_config(ws.cfg))
    else:
        bcfg = _baseline_config(ws.cfg, METHOD_IDS[method_id])
        t0 = time.perf_counter()
        run_baseline(model, ws.train_data, forget, bcfg)
        wall_ms = 1e3 * (time.perf_counter() - t0)
        fa, ra = accuracy_snapshot(model, ws.train_data, frozenset(forget))
        phase_log = [{"phase": METHOD_IDS[method_id], "forget_accuracy": fa,
                      "retain_accuracy": ra, "wall_ms": wall_ms, "skipped": False}]
    path = ws.out / f"unlearned_{method_id}.qpae"
    save_checkpoint(model, path)
    (ws.out / f"phase_log_{method_id}.json").write_text(
        json.dumps(phase_log, indent=2) + "\n")
    return path, phase_log


def cmd_evaluate(ws: Workspace, model_path: str | Path,
                 original_report: EvaluationReport | None = None,
                 name: str | None = None) -> EvaluationReport:
    """Evaluate a checkpoint on the held-out split; write JSON + CSV row."""
    model = load_checkpoint(model_path)
    original_fa = original_report.fa if original_report is not None else None
    report = evaluate(model, ws.eval_data, ws.forget_set, original_fa=original_fa)
    stem = name if name is not None else Path(model_path).stem
    ws.write_report(stem, report)
    csv_path = ws.out / f"report_{stem}.csv"
    csv_path.write_text(",".join(TABLE_COLUMNS) + "\n"
                        + ",".join(report_csv_row(stem, report)) + "\n")
    if original_report is not None:
        deltas = compare_reports(original_report, report)
        (ws.out / f"report_{stem}_deltas.json").write_text(
            json.dumps(deltas, indent=2) + "\n")
    return report


def emit_table(rows: list[tuple[str, EvaluationReport]]) -> tuple[str, str]:
    """Render reports as (markdown, csv) with identical numeric values."""
    if not rows:
        raise ValueError("need at least one report row")
    cells = [report_csv_row(name, rep) for name, rep in rows]
    md_lines = ["| " + " | ".join(TABLE_COLUMNS) + " |",
                "|" + "---|" * len(TABLE_COLUMNS)]
    md_lines += ["| " + " | ".join(row) + " |" for row in cells]
    csv_lines = [",".join(TABLE_COLUMNS)] + [",".join(row) for row in cells]
    return "\n".join(md_lines) + "\n", "\n".join(csv_lines) + "\n"


def write_table(ws: Workspace, rows: list[tuple[str, EvaluationReport]],
                stem: str = "table") -> tuple[Path, Path]:
    markdown, csv_text = emit_table(rows)
    md_path = ws.out / f"{stem}.md"
    csv_path = ws.out / f"{stem}.csv"
    md_path.write_text(markdown)
    csv_path.write_text(csv_text)
    return md_path, csv_path


def run_standard_scenario(ws: Workspace) -> dict[str, EvaluationReport]:
    """train -> unlearn with every method -> evaluate -> emit table."""
    _, original_report = cmd_train(ws)
    reports: dict[str, EvaluationReport] = {"original": original_report}
    rows = [("Original", original_report)]
    method_ids = ["qp"] + [mid for mid, name in METHOD_IDS.items()
                           if name in {b.method for b in ws.cfg.baselines}]
    for mid in method_ids:
        path, _ = cmd_unlearn(ws, mid)
        report = cmd_evaluate(ws, path, original_report=original_report,
                              name=mid)
        reports[mid] = report
        rows.append((METHOD_LABELS[mid], report))
    write_table(ws, rows)
    return reports


def cmd_sequential(ws: Workspace) -> list[dict]:
    """Apply the pipeline per forget request to the evolving model.

    After each step the model is scored with the forget set equal to the
    union of everything forgotten so far. Labels superposed at earlier
    steps persist in the evolving training data, so prior erasure keeps
    being reinforced rather than re-learned.
    """
    cfg = ws.cfg
    if not cfg.sequential_requests:
        raise ConfigError("sequential scenario requires non-empty sequential_requests")
    _, _ = cmd_train(ws)
    original = load_checkpoint(ws.original_path())
    model = load_checkpoint(ws.original_path())
    current = ws.train_data.copy()
    forgotten: set[int] = set()
    series: list[dict] = []
    rows: list[tuple[str, EvaluationReport]] = []
    for step, request in enumerate(cfg.sequential_requests, start=1):
        request = set(request)
        overlap = request & forgotten
        if overlap:
            log.warning("step %d: classes %s already forgotten; using union semantics",
                        step, sorted(overlap))
        new = request - forgotten
        if new:
            run_qp_audio_eraser(model, current, _unlearn_config(cfg, forget_set=new))
            current = superpose_labels(current, new)
            forgotten |= new
        original_union = evaluate(original, ws.eval_data, forgotten)
        report = evaluate(model, ws.eval_data, forgotten,
                          original_fa=original_union.fa)
        name = f"step_{step}"
        ws.write_report(name, report)
        rows.append((name, report))
        series.append({"step": step, "requested": sorted(request),
                       "forgotten_union": sorted(forgotten),
                       "fa": report.fa, "ra": report.ra, "per": report.per,
                       "retained_classes": ws.eval_data.num_classes - len(forgotten)})
    (ws.out / "sequential_series.json").write_text(json.dumps(series, indent=2) + "\n")
    write_table(ws, rows, stem="sequential_table")
    return series


ABLATION_VARIANTS: list[tuple[str, dict]] = [
    ("no_weight_transform", {"skip_weight_transform": True}),
    ("no_uncertainty_maximization", {"skip_uncertainty_max": True}),
    ("no_matrix_m", {"skip_mixing": True}),
    ("lambda_0.5", {"entropy_lambda": 0.5}),
    ("lambda_2.0", {"entropy_lambda": 2.0}),
    ("full", {}),
]


def cmd_ablation(ws: Workspace) -> dict[str, EvaluationReport]:
    """Run the five ablated variants plus the full method from one seed."""
    _, original_report = cmd_train(ws)
    reports: dict[str, EvaluationReport] = {"original": original_report}
    rows = [("Original", original_report)]
    for name, tweaks in ABLATION_VARIANTS:
        model = load_checkpoint(ws.original_path())
        run_qp_audio_eraser(model, ws.train_data,
                            _unlearn_config(ws.cfg, **tweaks))
        save_checkpoint(model, ws.out / f"unlearned_ablation_{name}.qpae")
        report = evaluate(model, ws.eval_data, ws.forget_set,
                          original_fa=original_report.fa)
        ws.write_report(f"ablation_{name}", report)
        reports[name] = report
        rows.append((name, report))
    write_table(ws, rows, stem="ablation_table")
    return reports


def run_scenario(cfg: ExperimentConfig, out: str | Path | None = None) -> Workspace:
    """Dispatch on cfg.scenario; returns the workspace with artifacts written."""
    if cfg.scenario == "single" and len(cfg.unlearn.forget_set) != 1:
        raise ConfigError("single scenario requires exactly one forget class")
    if cfg.scenario == "multi" and len(cfg.unlearn.forget_set) < 2:
        raise ConfigError("multi scenario requires at least two forget classes")
    ws = Workspace.create(cfg, out)
    if cfg.scenario in ("single", "multi"):
        run_standard_scenario(ws)
    elif cfg.scenario == "sequential":
        cmd_sequential(ws)
    else:
        cmd_ablation(ws)
    return ws


def cmd_synth(cfg: ExperimentConfig, out: str | Path) -> Path:
    """Write the synthetic dataset as WAV files plus a labels.csv manifest."""
    spec = cfg.dataset
    if spec.kind != "synthetic":
        raise ConfigError("synth requires a synthetic dataset spec")
    rng = Rng(derive_seed(cfg.seed, _SEED_DATA))
    profile = audio.PROFILES[spec.profile]
    clips = [(audio.synth_clip(c, rng, profile), c)
             for c in range(spec.num_classes) for _ in range(spec.per_class)]
    out_dir = Path(out)
    audio.write_manifest(out_dir, clips)
    return out_dir


def cmd_report(out: str | Path) -> tuple[Path, Path]:
    """Assemble a table from the report JSONs already in a directory."""
    out_dir = Path(out)
    order = [("original", "Original"), ("qp", METHOD_LABELS["qp"]),
             ("ga", METHOD_LABELS["ga"]), ("ng", METHOD_LABELS["ng"]),
             ("fisher", METHOD_LABELS["fisher"]), ("ssd", METHOD_LABELS["ssd"])]
    rows = []
    for stem, label in order:
        path = out_dir / f"report_{stem}.json"
        if path.exists():
            rows.append((label, report_from_json(path.read_text())))
    if not rows:
        raise FileNotFoundError(f"no report_*.json files found in {out_dir}")
    markdown, csv_text = emit_table(rows)
    md_path = out_dir / "table.md"
    csv_path = out_dir / "table.csv"
    md_path.write_text(markdown)
    csv_path.write_text(csv_text)
    return md_path, csv_path
