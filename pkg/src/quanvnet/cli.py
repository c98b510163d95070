"""Command-line pipeline: prepare -> quanv -> train -> eval -> report.

Progress goes to standard error; artifacts (manifest, feature caches,
model, history, reports, tables) are files.  Every artifact embeds the
resolved configuration hash so runs are self-describing.
"""

from __future__ import annotations

import hashlib
import math
import os
import time
from contextlib import contextmanager
from pathlib import Path

import click
import numpy as np
from click.core import ParameterSource

from . import data as data_mod
from . import metrics as metrics_mod
from . import network
from .cache import load_cache_dataset, quanv_dataset, read_cache_records
from .errors import ConfigurationError, QuanvnetError, ValidationError
from .quanv import QuanvFilterSpec

SPLITS = ("train", "val", "test")


def _parse_config_file(path) -> dict[str, str]:
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {raw!r} is not 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _coerce(text: str, like) -> object:
    if isinstance(like, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text


def resolve_config(ctx, config_file, **values) -> dict:
    """Merge flags over config-file values; flags always win."""
    from_file = _parse_config_file(config_file) if config_file else {}
    resolved = {}
    for key, value in values.items():
        source = ctx.get_parameter_source(key)
        if source is ParameterSource.DEFAULT and key in from_file:
            resolved[key] = _coerce(from_file[key], value)
        else:
            resolved[key] = value
    return resolved


def config_hash(command: str, resolved: dict, keys) -> str:
    """Hash of the computation-affecting parameters.

    File locations are deliberately excluded so that the same run placed in
    a different directory produces byte-identical artifacts.
    """
    lines = [command] + [f"{k}={resolved[k]}" for k in sorted(keys)]
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:12]


def labels_hash(split: str, labels) -> str:
    text = split + ":" + ",".join(str(int(x)) for x in labels)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


@contextmanager
def artifact_lock(path):
    """Guard against concurrent writers of the same artifact path."""
    lock = Path(str(path) + ".lock")
    lock.parent.mkdir(parents=True, exist_ok=True)
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigurationError(
            f"{lock} exists: another run is writing this artifact"
        ) from None
    try:
        yield
    finally:
        os.close(fd)
        lock.unlink(missing_ok=True)


def _log(message: str) -> None:
    click.echo(message, err=True)


def _fail(exc: Exception) -> None:
    raise click.ClickException(str(exc))


@click.group()
def main():
    """Quanvolutional traffic-sign classification pipeline."""


@main.command()
@click.option("--root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out-manifest", required=True, type=click.Path(dir_okay=False))
@click.option("--min-size", default=64, show_default=True,
              help="Keep images strictly larger than this in both dimensions.")
@click.option("--max-samples", default=0, show_default=True,
              help="Stratified subsample cap; 0 keeps everything.")
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def prepare(ctx, root, out_manifest, min_size, max_samples, seed, config_file):
    """Scan a class-per-directory dataset, filter, split 80:10:10."""
    resolved = resolve_config(ctx, config_file, root=root, out_manifest=out_manifest,
                              min_size=min_size, max_samples=max_samples, seed=seed)
    digest = config_hash("prepare", resolved, ("min_size", "max_samples", "seed"))
    try:
        manifest = data_mod.scan_dataset_dir(resolved["root"])
        manifest = data_mod.filter_by_size(manifest, resolved["min_size"])
        if not manifest.records:
            raise ConfigurationError(
                f"no images larger than {resolved['min_size']}x{resolved['min_size']} found"
            )
        if resolved["max_samples"]:
            manifest = data_mod.subsample(manifest, resolved["max_samples"],
                                          resolved["seed"])
        manifest = data_mod.split_dataset(manifest, resolved["seed"])
        out_path = Path(resolved["out_manifest"])
        with artifact_lock(out_path):
            data_mod.write_manifest(manifest, out_path, config_hash=digest)
    except QuanvnetError as exc:
        _fail(exc)
    counts: dict[int, dict[str, int]] = {}
    for record in manifest.records:
        counts.setdefault(record.class_id, {s: 0 for s in SPLITS})
        counts[record.class_id][record.split] += 1
    _log(f"manifest {out_path} ({len(manifest.records)} records, "
         f"{manifest.n_classes} classes, config {digest})")
    for class_id in sorted(counts):
        row = counts[class_id]
        name = manifest.class_names.get(class_id, str(class_id))
        _log(f"  class {class_id} ({name}): train={row['train']} "
             f"val={row['val']} test={row['test']}")


def _build_spec(layers: int, seed: int, embed_scale: float, n_filters: int):
    return QuanvFilterSpec(n_random_layers=layers, seed=seed,
                           embed_scale=embed_scale, n_filters=n_filters)


def _cos_identity_spot_check(manifest, split: str, cache_path, spec) -> int:
    """With zero random layers every channel must equal cos(scale * pixel)."""
    records = manifest.split_records(split)
    checked = 0
    for (label, features), record in zip(read_cache_records(cache_path), records):
        image = data_mod.load_grayscale_image(record.path)[:, :, 0]
        h, w, _ = features.shape
        blocks = image[: h * 2, : w * 2].reshape(h, 2, w, 2).transpose(0, 2, 1, 3)
        expected = np.cos(spec.embed_scale * blocks.reshape(h, w, 4))
        expected = np.tile(expected, (1, 1, spec.n_filters))
        if not np.allclose(features, expected, atol=1e-5):
            raise ValidationError(
                f"cos-identity spot check failed for {record.path}"
            )
        checked += 1
        if checked >= 3:
            break
    return checked


@main.command()
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--cache-dir", required=True, type=click.Path(file_okay=False))
@click.option("--layers", default=2, show_default=True)
@click.option("--n-filters", default=1, show_default=True)
@click.option("--embed-scale", default=math.pi, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def quanv(ctx, manifest_path, cache_dir, layers, n_filters, embed_scale, seed,
          config_file):
    """Quanvolve every manifest image into per-split feature caches."""
    resolved = resolve_config(ctx, config_file, manifest_path=manifest_path,
                              cache_dir=cache_dir, layers=layers,
                              n_filters=n_filters, embed_scale=embed_scale, seed=seed)
    digest = config_hash("quanv", resolved,
                     ("layers", "n_filters", "embed_scale", "seed"))
    try:
        manifest = data_mod.read_manifest(resolved["manifest_path"])
        spec = _build_spec(resolved["layers"], resolved["seed"],
                           resolved["embed_scale"], resolved["n_filters"])
        cache_dir = Path(resolved["cache_dir"])
        cache_dir.mkdir(parents=True, exist_ok=True)
        for split in SPLITS:
            records = manifest.split_records(split)
            items = [(r.path, r.class_id) for r in records]
            cache_path = cache_dir / f"{split}.qnvf"
            started = time.monotonic()
            with artifact_lock(cache_path):
                result = quanv_dataset(items, spec, cache_path,
                                       data_mod.load_grayscale_image)
            elapsed = time.monotonic() - started
            if result.up_to_date:
                _log(f"{cache_path}: cache up to date ({result.written} records)")
            else:
                _log(f"{cache_path}: wrote {result.written} records "
                     f"in {elapsed:.1f}s (config {digest})")
            for path, message in result.skipped:
                _log(f"  skipped {path}: {message}")
            if spec.n_random_layers == 0 and result.written:
                checked = _cos_identity_spot_check(manifest, split, cache_path, spec)
                _log(f"  cos-identity spot check passed ({checked} records)")
    except QuanvnetError as exc:
        _fail(exc)


def _load_training_arrays(kind: str, input_path: str, splits=("train", "val")):
    """Per-split (X, y) pairs plus the class count for either input kind."""
    arrays = {}
    if kind == "classical":
        manifest = data_mod.read_manifest(input_path)
        for split in splits:
            arrays[split] = data_mod.load_split_images(manifest, split)
        n_classes = manifest.n_classes
    else:
        cache_dir = Path(input_path)
        observed = -1
        for split in splits:
            cache_path = cache_dir / f"{split}.qnvf"
            if not cache_path.exists():
                raise ConfigurationError(f"missing feature cache {cache_path}")
            x, y = load_cache_dataset(cache_path)
            arrays[split] = (x, y)
            if y.size:
                observed = max(observed, int(y.max()))
        n_classes = observed + 1
    return arrays, n_classes


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="Manifest CSV for --model classical, cache dir for --model quanv.")
@click.option("--model", "model_kind", required=True,
              type=click.Choice(["classical", "quanv"]))
@click.option("--batch-size", default=32, show_default=True)
@click.option("--epochs", default=10, show_default=True)
@click.option("--lr", default=1e-3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--n-classes", default=0, show_default="inferred")
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def train(ctx, input_path, model_kind, batch_size, epochs, lr, seed, out_path,
          n_classes, config_file):
    """Train the classifier on raw images (classical) or cached features (quanv)."""
    resolved = resolve_config(ctx, config_file, input_path=input_path,
                              model_kind=model_kind, batch_size=batch_size,
                              epochs=epochs, lr=lr, seed=seed, out_path=out_path,
                              n_classes=n_classes)
    digest = config_hash("train", resolved,
                     ("model_kind", "batch_size", "epochs", "lr", "seed",
                      "n_classes"))
    try:
        arrays, inferred_classes = _load_training_arrays(
            resolved["model_kind"], resolved["input_path"]
        )
        n_classes = resolved["n_classes"] or inferred_classes
        train_x, train_y = arrays["train"]
        val_x, val_y = arrays["val"]
        if train_y.size and int(train_y.max()) >= n_classes:
            raise ConfigurationError(
                f"labels reach {int(train_y.max())} but n_classes={n_classes}"
            )
        config = network.TrainConfig(
            batch_size=resolved["batch_size"], epochs=resolved["epochs"],
            learning_rate=resolved["lr"], seed=resolved["seed"],
        )
        metadata = {
            "kind": resolved["model_kind"],
            "batch_size": config.batch_size,
            "epochs": config.epochs,
            "learning_rate": config.learning_rate,
            "seed": config.seed,
            "config_hash": digest,
            "train_labels_hash": labels_hash("train", train_y),
        }
        net = network.Network.build(train_x.shape[1:], n_classes,
                                    seed=config.seed, metadata=metadata)
        _log(f"training {resolved['model_kind']} model on {train_x.shape} "
             f"for {config.epochs} epochs, batch {config.batch_size}")
        history = network.train(
            net, train_x, train_y, val_x, val_y, config,
            log=lambda s: _log(
                f"  epoch {s.epoch}: loss {s.train_loss:.4f} "
                f"acc {s.train_acc:.4f} val_acc {s.val_acc:.4f}"
            ),
        )
        out_path = Path(resolved["out_path"])
        history_path = out_path.with_suffix(".history.csv")
        with artifact_lock(out_path):
            network.save_model(net, out_path)
            network.write_history(history, history_path,
                                  header_comment=f"config={digest} "
                                  f"model={resolved['model_kind']} "
                                  f"batch_size={config.batch_size}")
    except QuanvnetError as exc:
        _fail(exc)
    final = history[-1]
    _log(f"model {out_path} history {history_path}")
    _log(f"final train_acc={final.train_acc:.4f} val_acc={final.val_acc:.4f}")


@main.command(name="eval")
@click.option("--model-file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--split", default="test", show_default=True,
              type=click.Choice(list(SPLITS)))
@click.option("--out-report", required=True, type=click.Path(dir_okay=False))
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def eval_cmd(ctx, model_file, input_path, split, out_report, config_file):
    """Evaluate a trained model on one split; writes JSON and CSV reports."""
    resolved = resolve_config(ctx, config_file, model_file=model_file,
                              input_path=input_path, split=split,
                              out_report=out_report)
    digest = config_hash("eval", resolved, ("split",))
    try:
        net = network.load_model(resolved["model_file"])
        kind = net.metadata.get("kind", "classical")
        if kind == "classical":
            manifest = data_mod.read_manifest(resolved["input_path"])
            x, y = data_mod.load_split_images(manifest, resolved["split"])
        else:
            cache_path = Path(resolved["input_path"]) / f"{resolved['split']}.qnvf"
            if not cache_path.exists():
                raise ConfigurationError(f"missing feature cache {cache_path}")
            x, y = load_cache_dataset(cache_path)
        if x.shape[0] == 0:
            raise ConfigurationError(f"split {resolved['split']} is empty")
        if x.shape[1:] != net.input_shape:
            raise ConfigurationError(
                f"input shape {x.shape[1:]} does not match model "
                f"{net.input_shape}; wrong input kind?"
            )
        if y.size and int(y.max()) >= net.n_classes:
            raise ConfigurationError(
                f"labels reach {int(y.max())} but the model has "
                f"{net.n_classes} classes"
            )
        predictions = network.predict(net, x)
        report = metrics_mod.evaluate_predictions(y, predictions, net.n_classes)
        report.model = kind
        report.batch_size = int(net.metadata.get("batch_size", 0))
        report.extra = {
            "split": resolved["split"],
            "config_hash": digest,
            "train_config_hash": net.metadata.get("config_hash", ""),
            "dataset_hash": labels_hash(resolved["split"], y),
        }
        out_json = Path(resolved["out_report"])
        with artifact_lock(out_json):
            metrics_mod.write_report(report, out_json,
                                     out_json.with_suffix(".csv"))
    except QuanvnetError as exc:
        _fail(exc)
    _log(f"report {out_json} accuracy={report.accuracy:.4f} "
         f"precision={report.macro_precision:.4f} recall={report.macro_recall:.4f} "
         f"fbeta={report.macro_fbeta:.4f}")


_METRICS = ("accuracy", "macro_precision", "macro_recall", "macro_fbeta")
_SHORT = {"accuracy": "accuracy", "macro_precision": "precision",
          "macro_recall": "recall", "macro_fbeta": "fbeta"}
_MODEL_COLUMN = {"classical": "cnn", "quanv": "qnn"}


@main.command()
@click.argument("reports", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def report(ctx, reports, out_path):
    """Consolidate eval reports into one batch-size-by-model table."""
    try:
        cells: dict[tuple[int, str], dict] = {}
        n_classes = None
        dataset_hash = None
        for path in reports:
            payload = metrics_mod.read_report(path)
            key = (int(payload["batch_size"]), payload["model"])
            if key in cells:
                raise ValidationError(
                    f"duplicate report for model={key[1]} batch_size={key[0]}"
                )
            if n_classes is None:
                n_classes = payload["n_classes"]
            elif payload["n_classes"] != n_classes:
                raise ValidationError(
                    f"{path}: n_classes {payload['n_classes']} != {n_classes}"
                )
            if dataset_hash is None:
                dataset_hash = payload.get("dataset_hash", "")
            elif payload.get("dataset_hash", "") != dataset_hash:
                raise ValidationError(
                    f"{path}: dataset hash differs; reports are not comparable"
                )
            cells[key] = payload
        batch_sizes = sorted({bs for bs, _ in cells})
        columns = ["batch_size"]
        for metric in _METRICS:
            for model in ("classical", "quanv"):
                columns.append(f"{_MODEL_COLUMN[model]}_{_SHORT[metric]}")
        rows = []
        for bs in batch_sizes:
            row = [str(bs)]
            for metric in _METRICS:
                for model in ("classical", "quanv"):
                    payload = cells.get((bs, model))
                    row.append(f"{payload[metric]:.4f}" if payload else "-")
            rows.append(row)
        digest = config_hash(
            "report",
            {"dataset": dataset_hash,
             "cells": ";".join(f"{m}@{b}" for b, m in sorted(cells))},
            ("dataset", "cells"),
        )
        out_path = Path(out_path)
        with artifact_lock(out_path):
            lines = [f"# dataset={dataset_hash} config={digest}"]
            lines.append(",".join(columns))
            lines.extend(",".join(row) for row in rows)
            out_path.write_text("\n".join(lines) + "\n")
        widths = [max(len(col), *(len(r[i]) for r in rows)) if rows else len(col)
                  for i, col in enumerate(columns)]
        text = ["  ".join(col.ljust(widths[i]) for i, col in enumerate(columns))]
        for row in rows:
            text.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
        click.echo("\n".join(text))
    except QuanvnetError as exc:
        _fail(exc)
    _log(f"table {out_path} ({len(rows)} batch sizes, {len(cells)} reports)")


if __name__ == "__main__":
    main()
