"""Command line entry point: ``nlosloc <subcommand>``.

Subcommands chain through files on disk::

    nlosloc simulate --scene toy --tracks 6 --samples 200 --out run/ds
    nlosloc train    --dataset run/ds --feature td --combo tof,aoa --out run/snap.nlml
    nlosloc eval     --model run/snap.nlml --dataset run/ds --out run/snap.json
    nlosloc ekf      --dataset run/ds --out run/ekf.json
    nlosloc transfer --model run/snap.nlml --dataset run/moved --fraction 0.1 --out run/tl.nlml
    nlosloc report   run/snap.json run/ekf.json

Every artifact carries the full run configuration and its hash.  Models also
record the hash of the dataset they were fitted on; ``eval`` refuses a
dataset with a different hash unless ``--force`` is given.

Exit codes: 0 success, 1 user error (bad flags, config, files, lineage),
2 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import pipeline as pl
from . import posmodels as pm
from .dataset import DatasetError, config_hash, read_dataset, simulate, write_dataset
from .ekf import EkfParams
from .evaluate import ErrorReport, comparison_table
from .features import FeatureSpec, NormStats, UncertaintyConfig
from .nn import io as wio
from .nn.train import History, TrainSchedule
from .scene import SceneError

log = logging.getLogger("nlosloc")

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2
IMPAIR_SEED_OFFSET = 104729
SEQUENCE_BATCH = 16


class ConfigError(ValueError):
    pass


USER_ERRORS = (ConfigError, DatasetError, SceneError, pm.ArchitectureError, wio.WeightFileError,
               FileNotFoundError, ValueError)


@dataclass
class RunConfig:
    scene: str = "madrid-like"
    seed: int = 0
    tracks: int = 40
    samples: int = 600
    feature: str = "td"
    granularity: str = "rb"
    combo: list = field(default_factory=lambda: ["tof", "aoa"])
    paths: str = "dominant"
    uncertainty: bool = True
    model: str = "snapshot"
    window: int = pm.WINDOW
    stride: int = 5
    fraction: float = 0.1
    schedule: dict = field(default_factory=dict)
    out: str = "runs"

    def __post_init__(self):
        if self.model not in ("snapshot", "sequence"):
            raise ConfigError(f"unknown model kind {self.model!r}")
        if self.tracks < 3 or self.samples < 1:
            raise ConfigError("need at least 3 tracks and 1 sample per track")
        if self.window < 1 or self.stride < 1:
            raise ConfigError("window and stride must be positive")
        self.combo = list(self.combo)
        self.feature_spec()
        self.train_schedule()

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    def feature_spec(self) -> FeatureSpec:
        try:
            return FeatureSpec(self.feature, self.granularity, tuple(self.combo), self.paths)
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def uncertainty_config(self) -> UncertaintyConfig:
        return UncertaintyConfig() if self.uncertainty else UncertaintyConfig.off()

    def train_schedule(self) -> TrainSchedule:
        base = {"batch_size": SEQUENCE_BATCH} if self.model == "sequence" else {}
        known = {f.name for f in fields(TrainSchedule)}
        extra = sorted(set(self.schedule) - known)
        if extra:
            raise ConfigError(f"unknown schedule keys: {', '.join(extra)}")
        try:
            return TrainSchedule.from_dict({**base, **self.schedule})
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad schedule: {e}") from None


def load_config_file(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} not found")
    text = p.read_text()
    d = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    if not isinstance(d, dict):
        raise ConfigError(f"config file {p} must hold a mapping")
    return d


def _overrides(args) -> dict:
    o = {}
    for key in ("scene", "seed", "tracks", "samples", "feature", "granularity", "paths", "model",
                "window", "stride", "fraction"):
        v = getattr(args, key, None)
        if v is not None:
            o[key] = v
    if getattr(args, "combo", None):
        o["combo"] = [c.strip() for c in args.combo.split(",") if c.strip()]
    if getattr(args, "uncertainty", None) is not None:
        o["uncertainty"] = args.uncertainty == "on"
    sched = {}
    for flag, key in (("epochs", "phase1_epochs"), ("stop_epochs", "max_stop_epochs"),
                      ("patience", "patience"), ("batch_size", "batch_size"), ("lr", "phase1_lr")):
        v = getattr(args, flag, None)
        if v is not None:
            sched[key] = v
    if sched:
        o["schedule"] = sched
    return o


def resolve_config(args) -> RunConfig:
    d = load_config_file(args.config) if getattr(args, "config", None) else {}
    o = _overrides(args)
    if "schedule" in o:
        o["schedule"] = {**d.get("schedule", {}), **o["schedule"]}
    return RunConfig.from_dict({**d, **o})


def _provenance(cfg: RunConfig) -> dict:
    return {"config": cfg.to_dict(), "config_hash": cfg.hash}


def _write_text(path, text: str) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    return p


def _impaired(ds, unc: UncertaintyConfig, seed: int):
    return pl.impair(ds, unc, seed + IMPAIR_SEED_OFFSET) if unc != UncertaintyConfig.off() else ds


# subcommands -----------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, args) -> dict:
    ds = simulate(cfg.scene, cfg.tracks, cfg.samples, cfg.seed, extra_header=_provenance(cfg))
    out = args.out or str(Path(cfg.out) / "dataset")
    jl, bn = write_dataset(ds, out)
    log.info("wrote %d samples to %s", len(ds), jl)
    return {"dataset": str(jl), "sidecar": str(bn), "samples": len(ds), "dataset_hash": ds.header["config_hash"]}


def cmd_features(cfg: RunConfig, args) -> dict:
    ds = read_dataset(args.dataset)
    spec, unc = cfg.feature_spec(), cfg.uncertainty_config()
    ds = _impaired(ds, unc, cfg.seed)
    stats = pl.fit_stats(ds)
    X = pl.inputs(ds, spec, stats)
    stem = Path(args.out or Path(cfg.out) / f"features-{spec.variant}")
    stem.parent.mkdir(parents=True, exist_ok=True)
    np.save(stem.with_suffix(".npy"), X)
    meta = {"features": spec.to_dict(), "name": spec.name, "shape": list(X.shape), "stats": stats.to_dict(),
            "uncertainty": unc.to_dict(), "dataset_hash": ds.header["config_hash"],
            "split": ds.header["split"], "track": ds.track.tolist(), **_provenance(cfg)}
    _write_text(stem.with_suffix(".json"), json.dumps(meta, sort_keys=True, indent=1))
    return {"features": str(stem.with_suffix(".npy")), "shape": list(X.shape)}


def _model_meta(cfg, fitted, ds, kind, extra=None) -> dict:
    return {"kind": kind, "features": fitted.spec.to_dict(), "stats": fitted.stats.to_dict(),
            "uncertainty": cfg.uncertainty_config().to_dict(), "impair_seed": cfg.seed,
            "dataset_hash": ds.header["config_hash"], "scene_digest": ds.header["scene_digest"],
            "window": cfg.window, "history": fitted.history.to_dict(), **_provenance(cfg), **(extra or {})}


def _save_model(path, fitted, meta) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    wio.save(p, fitted.model.get_weights(), fitted.model.manifest(), meta)
    return p


def cmd_train(cfg: RunConfig, args) -> dict:
    ds = read_dataset(args.dataset)
    spec, unc, sched = cfg.feature_spec(), cfg.uncertainty_config(), cfg.train_schedule()
    ds = _impaired(ds, unc, cfg.seed)
    if cfg.model == "snapshot":
        fitted = pl.fit_snapshot(ds, spec, sched, cfg.seed, unc.label_std_m)
    else:
        fitted = pl.fit_sequence(ds, spec, sched, cfg.seed, unc.label_std_m, cfg.window, cfg.stride)
    out = _save_model(args.out or Path(cfg.out) / f"{cfg.model}.nlml", fitted, _model_meta(cfg, fitted, ds, cfg.model))
    return {"model": str(out), "epochs": fitted.history.n_epochs, "params": fitted.model.n_params}


def load_fitted(path):
    weights, manifest, meta = wio.load(path)
    model = pm.model_from_manifest(manifest)
    model.set_weights(weights)
    fitted = pl.Fitted(model, History.from_dict(meta.get("history", {})), NormStats.from_dict(meta["stats"]),
                       FeatureSpec.from_dict(meta["features"]))
    return fitted, meta


def _check_lineage(meta, ds, force: bool):
    want, got = meta.get("dataset_hash"), ds.header.get("config_hash")
    if want != got and not force:
        raise ConfigError(f"model was fitted on dataset {want} but this dataset is {got}; pass --force to evaluate anyway")


def cmd_eval(cfg: RunConfig, args) -> dict:
    ds = read_dataset(args.dataset)
    name = args.name
    if args.centroid:
        report = pl.centroid_report(ds, args.split)
        report.meta.update({"dataset_hash": ds.header["config_hash"], **_provenance(cfg)})
    else:
        fitted, meta = load_fitted(args.model_path)
        _check_lineage(meta, ds, args.force)
        ds = _impaired(ds, UncertaintyConfig(**meta["uncertainty"]), meta["impair_seed"])
        score = pl.score_sequence if meta["kind"] == "sequence" else pl.score_snapshot
        report = score(ds, fitted, args.split, name or meta["kind"])
        report.meta.update({"model_config_hash": meta["config_hash"], "dataset_hash": ds.header["config_hash"],
                            "lineage_forced": meta.get("dataset_hash") != ds.header["config_hash"],
                            **_provenance(cfg)})
    if name:
        report.name = name
    out = _write_text(args.out or Path(cfg.out) / f"{report.name}.json", report.to_json())
    return {"report": str(out), "median": report.aggregates()["all"]["position"].get("median")}


def cmd_ekf(cfg: RunConfig, args) -> dict:
    ds = _impaired(read_dataset(args.dataset), cfg.uncertainty_config(), cfg.seed)
    report = pl.run_ekf(ds, EkfParams(), args.split, args.name or "ekf")
    report.meta.update({"dataset_hash": ds.header["config_hash"], **_provenance(cfg)})
    out = _write_text(args.out or Path(cfg.out) / f"{report.name}.json", report.to_json())
    return {"report": str(out), "median": report.aggregates()["all"]["position"].get("median")}


def cmd_transfer(cfg: RunConfig, args) -> dict:
    src, meta = load_fitted(args.model_path)
    ds = read_dataset(args.dataset)
    unc = cfg.uncertainty_config()
    ds = _impaired(ds, unc, cfg.seed)
    seq = meta["kind"] == "sequence"
    tm = pl.fraction_mask(ds, "train", cfg.fraction, contiguous=seq, seed=cfg.seed)
    vm = pl.fraction_mask(ds, "val", cfg.fraction, contiguous=seq, seed=cfg.seed + 1)
    target = pm.model_from_manifest(src.model.manifest())
    target.set_weights(src.model.get_weights())
    target.set_trainable((src.model.first_layer,))
    sched = TrainSchedule.from_dict({**cfg.train_schedule().to_dict(), "early_stop_phase1": True})
    kw = dict(stats=src.stats, train_mask=tm, val_mask=vm, model=target)
    if seq:
        fitted = pl.fit_sequence(ds, src.spec, sched, cfg.seed, unc.label_std_m, meta["window"], cfg.stride, **kw)
    else:
        fitted = pl.fit_snapshot(ds, src.spec, sched, cfg.seed, unc.label_std_m, **kw)
    fitted.model.set_trainable(fitted.model.layers)
    cfg_out = RunConfig.from_dict({**cfg.to_dict(), "model": meta["kind"], "window": meta["window"]})
    extra = {"source_config_hash": meta["config_hash"], "trainable": [src.model.first_layer],
             "fraction": cfg.fraction}
    out = _save_model(args.out or Path(cfg.out) / "transfer.nlml", fitted,
                      _model_meta(cfg_out, fitted, ds, meta["kind"], extra))
    return {"model": str(out), "epochs": fitted.history.n_epochs}


def cmd_report(cfg: RunConfig, args) -> dict:
    reports = []
    for p in args.reports:
        path = Path(p)
        if not path.exists():
            raise FileNotFoundError(f"report {path} not found")
        reports.append(ErrorReport.from_dict(json.loads(path.read_text())))
    table = comparison_table(reports)
    if args.out:
        _write_text(args.out, table)
    else:
        sys.stdout.write(table)
    return {"reports": len(reports)}


COMMANDS = {"simulate": cmd_simulate, "features": cmd_features, "train": cmd_train, "eval": cmd_eval,
            "ekf": cmd_ekf, "transfer": cmd_transfer, "report": cmd_report}


# argument parsing --------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", help="YAML or JSON run config; flags override its keys")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path")


def _feature_flags(p):
    p.add_argument("--feature", help="td, fr-c, fr-pow, fr-ph, fr-pp or fr-pow+ph")
    p.add_argument("--granularity", choices=("rb", "bw"))
    p.add_argument("--combo", help="time-domain fields, e.g. tof,aoa")
    p.add_argument("--paths", choices=("dominant", "top5"))
    p.add_argument("--uncertainty", choices=("on", "off"))


def _schedule_flags(p):
    p.add_argument("--epochs", type=int, help="fixed-rate epochs before early stopping")
    p.add_argument("--stop-epochs", type=int, help="epoch budget shared by the early-stopping phases")
    p.add_argument("--patience", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="nlosloc", description="mmWave NLoS localization lab")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate tracks and CSI into a dataset")
    _common(p)
    p.add_argument("--scene", help="preset name or scene YAML/JSON file")
    p.add_argument("--tracks", type=int)
    p.add_argument("--samples", type=int, help="samples per track")

    p = sub.add_parser("features", help="extract a feature matrix from a dataset")
    _common(p)
    p.add_argument("--dataset", required=True)
    _feature_flags(p)

    p = sub.add_parser("train", help="train a positioning model")
    _common(p)
    p.add_argument("--dataset", required=True)
    _feature_flags(p)
    p.add_argument("--model", choices=("snapshot", "sequence"))
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int, help="stride between training windows")
    _schedule_flags(p)

    p = sub.add_parser("eval", help="score a model (or the centroid baseline) on a dataset split")
    _common(p)
    p.add_argument("--dataset", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--model", dest="model_path", help="model file")
    g.add_argument("--centroid", action="store_true", help="constant train-centroid predictor")
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--name")
    p.add_argument("--force", action="store_true", help="evaluate despite a dataset lineage mismatch")

    p = sub.add_parser("ekf", help="run the EKF benchmark on a dataset split")
    _common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--uncertainty", choices=("on", "off"))
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--name")

    p = sub.add_parser("transfer", help="adapt a trained model to a new deployment")
    _common(p)
    p.add_argument("--model", dest="model_path", required=True, help="source model file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--fraction", type=float, help="share of target training data used")
    p.add_argument("--uncertainty", choices=("on", "off"))
    p.add_argument("--stride", type=int)
    _schedule_flags(p)

    p = sub.add_parser("report", help="tabulate ErrorReport files")
    p.add_argument("reports", nargs="+")
    p.add_argument("--config")
    p.add_argument("--out")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        result = COMMANDS[args.command](cfg, args)
    except USER_ERRORS as e:
        print(f"nlosloc: error: {e}", file=sys.stderr)
        return EXIT_USER
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return EXIT_INTERNAL
    if args.command != "report":
        print(json.dumps(result, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
