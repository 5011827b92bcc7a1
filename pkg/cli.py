#!/usr/bin/env python3

"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026
"""

import functools
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table
from sqlalchemy.exc import SQLAlchemyError

from calibrate import apply_temperature, fit_temperature
from config import LEDGER_URL, LOG_LEVEL, dump_run_config, load_run_config
from data import (
    gen_blobs,
    load_predictions_csv,
    save_dataset_csv,
    save_history_csv,
    save_predictions_csv,
    save_reliability_csv,
    split,
    write_table_csv,
)
from database import ledger_tables, list_runs, record_run
from errors import EXIT_CONFIG, EXIT_DATA, EXIT_UNEXPECTED, EXIT_VERIFY, CalibkitError, DataParseError, UsageError
from experiments import (
    SELECTION_MARGINS,
    build_splits,
    compare_losses,
    matched_weight_rows,
    select_margin,
    sweep_margins,
    write_rows_csv,
)
from losses import LossKind, penalty_profile
from metrics import accuracy, aece, distance_summary, ece, metrics_report, nll, reliability_table
from mlp import config_hash, evaluate, save_checkpoint, train
from verification import run_suite

logger = logging.getLogger(__name__)

# Reports go to stdout, logs and errors to stderr
console = Console(stderr=False)
err_console = Console(stderr=True)

SPLIT_NAMES = ("train", "val", "test")
MANIFEST_NAME = "manifest.json"
LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


def configure_logging(level: str):
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )
    # Suppress matplotlib and sqlalchemy logging
    logging.getLogger("matplotlib").setLevel(logging.ERROR)
    logging.getLogger("sqlalchemy.engine").setLevel(logging.ERROR)


def pct(value: Optional[float]) -> str:
    """Fraction as a percentage with 2 decimals."""
    return "-" if value is None else f"{100 * value:.2f}"


class CalibkitCLI:
    def display_response(self, response: dict):
        """Display the response in a formatted way."""
        if not response["success"]:
            err_console.print(f"Error: {response['response']}", style="red")
            return
        console.print(response["response"], style="green")
        data = response.get("data") or {}
        if "report" in data:
            self.display_report(data["report"])
        if "distances" in data:
            self.display_distances(data["distances"])
        if "fit" in data:
            self.display_fit(data["fit"])
        if "properties" in data:
            self.display_properties(data["properties"])
        if "sweep" in data:
            self.display_sweep(data["sweep"], data.get("selected"))
        if "matched" in data:
            self.display_matched(data["matched"])
        if "comparison" in data:
            self.display_comparison(data["comparison"], data.get("summary"))
        if "runs" in data:
            self.display_runs(data["runs"])
        if "tables" in data:
            self.display_ledger_tables(data["tables"])
        if "files" in data:
            for name in data["files"]:
                console.print(f"  wrote {name}", style="blue")

    def display_report(self, report: dict):
        table = Table(caption=f"M = {report['ece_bins']} bins", show_header=True, header_style="bold")
        table.add_column("N", justify="right", style="cyan")
        table.add_column("K", justify="right", style="cyan")
        table.add_column("Acc (%)", justify="right", style="green")
        table.add_column("ECE (%)", justify="right", style="yellow")
        table.add_column("AECE (%)", justify="right", style="yellow")
        table.add_column("NLL", justify="right", style="magenta")
        table.add_column("Conf (%)", justify="right", style="blue")
        table.add_row(
            str(report["n"]),
            str(report["num_classes"]),
            pct(report["accuracy"]),
            pct(report["ece"]),
            pct(report["aece"]),
            f"{report['nll']:.4f}",
            pct(report["mean_confidence"]),
        )
        console.print(table)

    def display_distances(self, summary: dict):
        line = (f"Logit distances: mean {summary['mean_distance']:.3f}, "
                f"mean max {summary['mean_max_distance']:.3f}")
        if summary.get("margin") is not None:
            line += f", {pct(summary['fraction_above_margin'])}% above m={summary['margin']:g}"
        console.print(line, style="blue")

    def display_fit(self, fit: dict):
        console.print(f"T* = {fit['t_star']:.2f}  (grid {fit['grid']})", style="bold")
        table = Table(show_header=True, header_style="bold")
        table.add_column("Split", style="cyan")
        table.add_column("NLL pre", justify="right")
        table.add_column("NLL post", justify="right")
        table.add_column("ECE pre (%)", justify="right", style="yellow")
        table.add_column("ECE post (%)", justify="right", style="yellow")
        table.add_column("AECE pre (%)", justify="right")
        table.add_column("AECE post (%)", justify="right")
        table.add_column("Acc pre (%)", justify="right", style="green")
        table.add_column("Acc post (%)", justify="right", style="green")
        for name in ("val", "test"):
            row = fit[name]
            table.add_row(
                name,
                f"{row['nll_pre']:.4f}",
                f"{row['nll_post']:.4f}",
                pct(row["ece_pre"]),
                pct(row["ece_post"]),
                pct(row["aece_pre"]),
                pct(row["aece_post"]),
                pct(row["acc_pre"]),
                pct(row["acc_post"]),
            )
        console.print(table)

    def display_properties(self, properties: list):
        table = Table(show_header=True, header_style="bold")
        table.add_column("Property", style="white")
        table.add_column("Passed", justify="right", style="green")
        table.add_column("Checked", justify="right")
        table.add_column("Skipped", justify="right", style="yellow")
        table.add_column("Worst", justify="right", style="magenta")
        table.add_column("Status")
        for prop in properties:
            ok = prop["checked"] > 0 and prop["passed"] == prop["checked"]
            table.add_row(
                prop["name"],
                str(prop["passed"]),
                str(prop["checked"]),
                str(prop["skipped"]),
                f"{prop['worst']:.3g}",
                "[green]PASS[/green]" if ok else "[red]FAIL[/red]",
            )
        console.print(table)

    def display_sweep(self, rows: list, selected: Optional[float] = None):
        table = Table(title="Margin sweep", show_header=True, header_style="bold")
        table.add_column("m", justify="right", style="cyan")
        table.add_column("Val Acc (%)", justify="right")
        table.add_column("Val ECE (%)", justify="right")
        table.add_column("Test Acc (%)", justify="right", style="green")
        table.add_column("Test ECE (%)", justify="right", style="yellow")
        table.add_column("Mean distance", justify="right", style="blue")
        table.add_column("> m (%)", justify="right", style="blue")
        for row in rows:
            marker = " *" if selected is not None and row["margin"] == selected else ""
            table.add_row(
                f"{row['margin']:g}{marker}",
                pct(row["val_acc"]),
                pct(row["val_ece"]),
                pct(row["test_acc"]),
                pct(row["test_ece"]),
                f"{row['mean_distance']:.3f}",
                pct(row["fraction_above_margin"]),
            )
        console.print(table)
        if selected is not None:
            console.print(f"Selected on validation ECE: m = {selected:g}", style="bold")

    def display_matched(self, rows: list):
        table = Table(title="LS vs MBLS(m=0) at matched weights", show_header=True, header_style="bold")
        table.add_column("Weight", justify="right", style="cyan")
        table.add_column("Method", style="white")
        table.add_column("alpha / lambda", justify="right")
        table.add_column("Test Acc (%)", justify="right", style="green")
        table.add_column("Test ECE (%)", justify="right", style="yellow")
        table.add_column("Conf (%)", justify="right", style="blue")
        for row in rows:
            table.add_row(f"{row['weight']:g}", row["method"], f"{row['loss_weight']:g}", pct(row["test_acc"]),
                          pct(row["test_ece"]), pct(row["test_confidence"]))
        console.print(table)

    def display_comparison(self, rows: list, summary: Optional[dict] = None):
        table = Table(title="Loss comparison", show_header=True, header_style="bold")
        table.add_column("Seed", justify="right", style="cyan")
        table.add_column("Method", style="white")
        table.add_column("m", justify="right")
        table.add_column("Test Acc (%)", justify="right", style="green")
        table.add_column("Test ECE (%)", justify="right", style="yellow")
        table.add_column("Conf (%)", justify="right", style="blue")
        for row in rows:
            table.add_row(
                str(row["seed"]),
                row["method"],
                "" if row["margin"] is None else f"{row['margin']:g}",
                pct(row["test_acc"]),
                pct(row["test_ece"]),
                pct(row["test_confidence"]),
            )
        console.print(table)
        if summary:
            for key, value in summary.items():
                console.print(f"{key}: {value}", style="blue")

    def display_runs(self, runs: list):
        """Display ledger runs in a formatted table."""
        if not runs:
            console.print("No runs found.", style="yellow")
            return

        table = Table(show_header=True, header_style="bold")
        table.add_column("ID", justify="right", style="cyan", no_wrap=True)
        table.add_column("Command", style="white")
        table.add_column("Loss", style="white")
        table.add_column("Seed", justify="right")
        table.add_column("Acc (%)", justify="right", style="green")
        table.add_column("ECE (%)", justify="right", style="yellow")
        table.add_column("T", justify="right", style="magenta")
        table.add_column("Epochs", justify="right")
        table.add_column("Config", style="blue")
        table.add_column("Created At", style="blue")

        for run in runs:
            table.add_row(
                str(run["run_id"]),
                run["command"],
                run.get("loss") or "",
                "" if run.get("seed") is None else str(run["seed"]),
                pct(run.get("accuracy")),
                pct(run.get("ece")),
                "" if run.get("temperature") is None else f"{run['temperature']:.2f}",
                str(run.get("epochs", 0)),
                (run.get("config_hash") or "")[:12],
                run.get("created_at", ""),
            )

        console.print(table)
        console.print(f"\nTotal runs: {len(runs)}", style="blue")

    def display_ledger_tables(self, tables: list):
        """One table per ledger table: columns, keys and how many rows it holds."""
        if not tables:
            console.print("The ledger has no tables.", style="yellow")
            return

        for info in tables:
            schema_table = Table(
                title=f"Ledger table {info['name']} ({info['rows']} rows)",
                show_header=True,
                header_style="bold cyan"
            )
            schema_table.add_column("Column", style="white")
            schema_table.add_column("Type", style="green")
            schema_table.add_column("Key", style="magenta")
            schema_table.add_column("Nullable", style="yellow")

            for column in info["columns"]:
                key = "PK" if column["primary_key"] else ""
                if column.get("references"):
                    key = f"-> {column['references']}"
                schema_table.add_row(column["name"], column["type"], key,
                                     "yes" if column["nullable"] else "no")

            console.print(schema_table)


display = CalibkitCLI()


def handle_errors(func):
    """Render failures as error envelopes and exit with the documented code."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except CalibkitError as e:
            display.display_response({"success": False, "response": str(e), "data": None})
            raise SystemExit(e.exit_code)
        except ValidationError as e:
            display.display_response({"success": False, "response": f"Invalid configuration: {e}", "data": None})
            raise SystemExit(EXIT_CONFIG)
        except OSError as e:
            display.display_response({"success": False, "response": str(e), "data": None})
            raise SystemExit(EXIT_DATA)
        except (SystemExit, click.exceptions.Exit, click.ClickException):
            raise
        except Exception as e:
            logger.exception("Unexpected failure")
            display.display_response({"success": False, "response": f"Unexpected error: {e}", "data": None})
            raise SystemExit(EXIT_UNEXPECTED)
    return wrapper


def _float_list(ctx, param, value):
    if value is None:
        return None
    try:
        return [float(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}")


def _int_list(ctx, param, value):
    if value is None:
        return None
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")


def _data_overrides(data_dir: Optional[str]) -> Dict[str, Any]:
    """Point the config at DIR/{train,val,test}.csv, taking K from DIR/manifest.json when present."""
    if data_dir is None:
        return {}
    data_dir = Path(data_dir)
    overrides: Dict[str, Any] = {f"data.{name}_path": str(data_dir / f"{name}.csv") for name in SPLIT_NAMES}
    manifest = data_dir / MANIFEST_NAME
    if manifest.exists():
        try:
            with open(manifest, "r", encoding="utf-8") as f:
                overrides["data.num_classes"] = json.load(f).get("num_classes")
        except json.JSONDecodeError as e:
            raise DataParseError(f"Invalid manifest JSON: {e.msg}", path=str(manifest), line=e.lineno)
    return overrides


def _write_json(path: Path, document: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write("\n")


def _record(ctx, command: str, **fields) -> Optional[int]:
    """Write a ledger row unless --no-ledger; ledger failures only warn."""
    url = ctx.obj.get("ledger_url")
    if not url:
        return None
    try:
        return record_run(url, command, **fields)
    except SQLAlchemyError as e:
        logger.warning("Could not record %s run in ledger %s: %s", command, url, e)
        return None


@click.group()
@click.option("--log-level", default=LOG_LEVEL, envvar="CALIBKIT_LOG_LEVEL", show_default=True,
              type=click.Choice(LOG_LEVELS, case_sensitive=False), help="Logging level (logs go to stderr)")
@click.option("--ledger-url", default=LEDGER_URL, envvar="CALIBKIT_LEDGER_URL", show_default=True,
              help="SQLAlchemy URL of the run ledger")
@click.option("--no-ledger", is_flag=True, help="Do not record runs in the ledger")
@click.pass_context
def cli(ctx, log_level, ledger_url, no_ledger):
    """Calibration toolkit: losses, metrics, temperature scaling and margin experiments"""
    configure_logging(log_level)
    ctx.ensure_object(dict)
    ctx.obj["ledger_url"] = None if no_ledger else ledger_url


@cli.command("gen-data")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON run config")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory [default: <output_dir>/data]")
@click.option("--classes", type=int, help="Number of classes K")
@click.option("--dim", type=int, help="Feature dimension d")
@click.option("--n-per-class", type=int, help="Samples per class")
@click.option("--center-scale", type=float, help="Radius of the class means")
@click.option("--noise", type=float, help="Noise standard deviation")
@click.option("--seed", type=int, help="Generator seed")
@click.option("--split-seed", type=int, help="Seed of the train/val/test permutation")
@handle_errors
def gen_data(config_path, out_dir, classes, dim, n_per_class, center_scale, noise, seed, split_seed):
    """Generate blob data as train/val/test CSVs plus a manifest"""
    config = load_run_config(config_path, {
        "data.blobs.K": classes,
        "data.blobs.d": dim,
        "data.blobs.n_per_class": n_per_class,
        "data.blobs.center_scale": center_scale,
        "data.blobs.noise_sigma": noise,
        "data.blobs.seed": seed,
        "data.split_seed": split_seed,
    })
    blobs = config.data.blobs
    if blobs is None:
        raise UsageError("gen-data needs data.blobs in the config")
    out = Path(out_dir) if out_dir else Path(config.output_dir) / "data"
    parts = split(gen_blobs(blobs), config.data.splits, config.data.split_seed)
    files = []
    for name, part in zip(SPLIT_NAMES, parts):
        save_dataset_csv(part, out / f"{name}.csv")
        files.append(str(out / f"{name}.csv"))
    manifest = {
        "blobs": blobs.model_dump(mode="json"),
        "splits": list(config.data.splits),
        "split_seed": config.data.split_seed,
        "num_classes": blobs.K,
        "sizes": {name: len(part) for name, part in zip(SPLIT_NAMES, parts)},
        "files": {name: f"{name}.csv" for name in SPLIT_NAMES},
        "config_hash": config_hash(config.data),
    }
    _write_json(out / MANIFEST_NAME, manifest)
    files.append(str(out / MANIFEST_NAME))
    display.display_response({
        "success": True,
        "response": f"Generated {sum(manifest['sizes'].values())} samples in {out}",
        "data": {"files": files},
    })


@cli.command("train")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON run config")
@click.option("--data", "data_dir", type=click.Path(file_okay=False), help="Directory written by gen-data")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory")
@click.option("--loss", type=click.Choice([k.value for k in LossKind], case_sensitive=False), help="Training loss")
@click.option("--alpha", type=float, help="LS smoothing factor")
@click.option("--gamma", type=float, help="FL focusing parameter")
@click.option("--ecp-weight", type=float, help="ECP entropy weight")
@click.option("--margin", type=float, help="MBLS margin m")
@click.option("--lambda", "lambda_", type=float, help="MBLS penalty weight")
@click.option("--epochs", type=int, help="Training epochs")
@click.option("--batch-size", type=int, help="Mini-batch size")
@click.option("--seed", type=int, help="Initialisation and shuffle seed")
@click.pass_context
@handle_errors
def train_cmd(ctx, config_path, data_dir, out_dir, loss, alpha, gamma, ecp_weight, margin, lambda_,
              epochs, batch_size, seed):
    """Train the MLP and write checkpoint, history and predictions"""
    overrides = {
        "output_dir": out_dir,
        "train.loss.kind": loss,
        "train.loss.alpha": alpha,
        "train.loss.gamma": gamma,
        "train.loss.ecp_weight": ecp_weight,
        "train.loss.margin": margin,
        "train.loss.lambda": lambda_,
        "train.epochs": epochs,
        "train.batch_size": batch_size,
        "train.seed": seed,
    }
    overrides.update(_data_overrides(data_dir))
    config = load_run_config(config_path, overrides)
    splits = build_splits(config.data)
    logger.info("Training %s on %d samples", config.train.loss.describe(), len(splits.train))
    model, history = train(config.train, splits.train, splits.val)

    out = Path(config.output_dir)
    digest = config_hash(config.train)
    val_preds = evaluate(model, splits.val)
    test_preds = evaluate(model, splits.test)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(dump_run_config(config), encoding="utf-8")
    save_checkpoint(model, out / "checkpoint.json", digest)
    save_history_csv(history, out / "history.csv")
    save_predictions_csv(val_preds, out / "val_predictions.csv")
    save_predictions_csv(test_preds, out / "test_predictions.csv")
    report = metrics_report(test_preds, config.metrics.ece_bins)
    _write_json(out / "metrics.json", {
        "config_hash": digest,
        "loss": config.train.loss.describe(),
        "val": metrics_report(val_preds, config.metrics.ece_bins),
        "test": report,
    })

    _record(ctx, "train", config_hash=digest, loss=config.train.loss.describe(), seed=config.train.seed,
            output_dir=str(out), metrics=report, history=history)
    display.display_response({
        "success": True,
        "response": f"Trained {config.train.loss.describe()} for {len(history)} epochs; test metrics:",
        "data": {"report": report, "files": [str(out / name) for name in (
            "config.json", "checkpoint.json", "history.csv", "val_predictions.csv",
            "test_predictions.csv", "metrics.json")]},
    })


@cli.command("eval")
@click.argument("predictions", type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON run config (metrics section)")
@click.option("--bins", type=int, help="Bins for ECE and AECE [default: 15]")
@click.option("--diagram-bins", type=int, help="Bins of the reliability table [default: 25]")
@click.option("--reliability", "reliability_path", type=click.Path(dir_okay=False),
              help="Reliability CSV [default: <predictions>_reliability.csv]")
@click.option("--svg", "svg_path", type=click.Path(dir_okay=False), help="Also draw the reliability diagram as SVG")
@click.option("--margin", type=float, help="Report the share of logit distances above this margin")
@handle_errors
def eval_cmd(predictions, config_path, bins, diagram_bins, reliability_path, svg_path, margin):
    """Report Acc, ECE, AECE and NLL of a predictions CSV and write its reliability table"""
    config = load_run_config(config_path, {"metrics.ece_bins": bins, "metrics.diagram_bins": diagram_bins})
    bins, diagram_bins = config.metrics.ece_bins, config.metrics.diagram_bins
    preds = load_predictions_csv(predictions)
    if len(preds) == 0:
        raise UsageError(f"{predictions}: no predictions to evaluate")
    report = metrics_report(preds, bins)
    table = reliability_table(preds, diagram_bins)
    if reliability_path is None:
        source = Path(predictions)
        reliability_path = source.with_name(f"{source.stem}_reliability.csv")
    save_reliability_csv(table, reliability_path)
    files = [str(reliability_path)]
    if svg_path:
        from plots import render_reliability_svg

        render_reliability_svg(table, svg_path, report["ece"])
        files.append(str(svg_path))
    display.display_response({
        "success": True,
        "response": f"Evaluated {predictions}",
        "data": {
            "report": report,
            "distances": distance_summary(preds, margin).model_dump(),
            "files": files,
        },
    })


@cli.command()
@click.argument("val_predictions", type=click.Path(dir_okay=False))
@click.argument("test_predictions", type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(dir_okay=False),
              help="JSON run config (calibration and metrics sections)")
@click.option("--t-min", type=float, help="Smallest temperature [default: 0.1]")
@click.option("--t-max", type=float, help="Largest temperature [default: 5.0]")
@click.option("--resolution", type=float, help="Grid step [default: 0.1]")
@click.option("--bins", type=int, help="Bins for ECE and AECE [default: 15]")
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              help="Also write calibrated test predictions and the fit to this directory")
@click.pass_context
@handle_errors
def calibrate(ctx, val_predictions, test_predictions, config_path, t_min, t_max, resolution, bins, out_dir):
    """Fit a temperature on validation predictions and apply it to test predictions"""
    config = load_run_config(config_path, {
        "calibration.t_min": t_min,
        "calibration.t_max": t_max,
        "calibration.resolution": resolution,
        "metrics.ece_bins": bins,
    })
    t_min, t_max = config.calibration.t_min, config.calibration.t_max
    resolution, bins = config.calibration.resolution, config.metrics.ece_bins
    val = load_predictions_csv(val_predictions)
    test = load_predictions_csv(test_predictions)
    if val.num_classes != test.num_classes:
        raise UsageError(f"Validation has {val.num_classes} classes, test has {test.num_classes}")
    fit = fit_temperature(val, t_min, t_max, resolution, bins)
    scaled_val = apply_temperature(val, fit.t_star)
    scaled_test = apply_temperature(test, fit.t_star)

    def _row(before, after):
        enough = len(before) >= bins
        return {
            "nll_pre": nll(before),
            "nll_post": nll(after),
            "ece_pre": ece(before, bins),
            "ece_post": ece(after, bins),
            "aece_pre": aece(before, bins) if enough else None,
            "aece_post": aece(after, bins) if enough else None,
            "acc_pre": accuracy(before),
            "acc_post": accuracy(after),
        }

    result = {
        "t_star": fit.t_star,
        "grid": fit.search_grid,
        "t_min": t_min,
        "t_max": t_max,
        "resolution": resolution,
        "val": _row(val, scaled_val),
        "test": _row(test, scaled_test),
    }
    files = []
    if out_dir:
        out = Path(out_dir)
        save_predictions_csv(scaled_test, out / "calibrated_test_predictions.csv")
        _write_json(out / "calibration.json", result)
        files = [str(out / "calibrated_test_predictions.csv"), str(out / "calibration.json")]

    _record(ctx, "calibrate", output_dir=out_dir,
            metrics={"accuracy": result["test"]["acc_post"], "ece": result["test"]["ece_post"],
                     "aece": result["test"]["aece_post"], "nll": result["test"]["nll_post"],
                     "temperature": fit.t_star},
            details={"val": str(val_predictions), "test": str(test_predictions), "grid": fit.search_grid})
    display.display_response({
        "success": True,
        "response": f"Temperature scaling fitted on {val_predictions}",
        "data": {"fit": result, "files": files},
    })


@cli.command()
@click.option("--seed", default=0, show_default=True, type=int, help="Sampling seed")
@click.option("--quick", is_flag=True, help="Use a tenth of the sample counts")
@click.option("--inject-grad-error", default=0.0, type=float, hidden=True)
@handle_errors
def verify(seed, quick, inject_grad_error):
    """Run the randomized bound, identity and gradient checks"""
    with console.status("Running checks..."):
        results = run_suite(seed=seed, quick=quick, grad_perturbation=inject_grad_error)
    failed = [r.name for r in results if not r.ok]
    display.display_response({
        "success": True,
        "response": "All properties hold" if not failed else f"{len(failed)} properties failed",
        "data": {"properties": [r.model_dump() for r in results]},
    })
    if failed:
        raise SystemExit(EXIT_VERIFY)


@cli.command("sweep-margin")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON run config")
@click.option("--data", "data_dir", type=click.Path(file_okay=False), help="Directory written by gen-data")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory")
@click.option("--margins", callback=_float_list, help="Comma-separated margins [default: 0,2,4,6,8,10]")
@click.option("--weights", callback=_float_list, help="Matched LS/MBLS(m=0) weights [default: 0.05,0.1,0.2,0.3]")
@click.option("--lambda", "lambda_", type=float, help="MBLS penalty weight for the margin sweep")
@click.option("--epochs", type=int, help="Training epochs")
@click.option("--seed", type=int, help="Shared training seed")
@click.option("--workers", type=int, help="Parallel training jobs")
@click.pass_context
@handle_errors
def sweep_margin(ctx, config_path, data_dir, out_dir, margins, weights, lambda_, epochs, seed, workers):
    """Train one MBLS model per margin plus the LS vs MBLS(m=0) matched-weight rows"""
    overrides = {
        "output_dir": out_dir,
        "sweep.margins": margins,
        "sweep.matched_weights": weights,
        "sweep.workers": workers,
        "train.loss.lambda": lambda_,
        "train.epochs": epochs,
        "train.seed": seed,
    }
    overrides.update(_data_overrides(data_dir))
    config = load_run_config(config_path, overrides)
    splits = build_splits(config.data)
    bins = config.metrics.ece_bins
    with console.status("Sweeping margins..."):
        rows = sweep_margins(config.train, splits, config.sweep.margins, bins, config.sweep.workers)
        matched = matched_weight_rows(config.train, splits, config.sweep.matched_weights, bins,
                                      config.sweep.workers)
    chosen = select_margin(rows)

    out = Path(config.output_dir)
    write_rows_csv(rows, out / "margin_sweep.csv")
    write_rows_csv(matched, out / "matched_weights.csv")
    (out / "config.json").write_text(dump_run_config(config), encoding="utf-8")

    _record(ctx, "sweep-margin", config_hash=config_hash(config.train), loss="MBLS",
            seed=config.train.seed, output_dir=str(out),
            metrics={"accuracy": chosen.test_acc, "ece": chosen.test_ece},
            details={"selected_margin": chosen.margin, "margins": config.sweep.margins,
                     "matched_weights": config.sweep.matched_weights})
    display.display_response({
        "success": True,
        "response": f"Swept {len(rows)} margins and {len(config.sweep.matched_weights)} matched weights",
        "data": {
            "sweep": [row.model_dump() for row in rows],
            "selected": chosen.margin,
            "matched": [row.model_dump() for row in matched],
            "files": [str(out / "margin_sweep.csv"), str(out / "matched_weights.csv"), str(out / "config.json")],
        },
    })


def comparison_summary(rows) -> Dict[str, str]:
    """Per-seed counts: CE overconfidence, MBLS beating CE, LS and MBLS(m=0) moving ECE the same way."""
    by_seed: Dict[int, Dict[str, Any]] = {}
    for row in rows:
        by_seed.setdefault(row.seed, {})[row.method] = row
    seeds = len(by_seed)
    overconfident = sum(1 for methods in by_seed.values()
                        if methods["CE"].test_confidence > methods["CE"].test_acc)
    improved = sum(1 for methods in by_seed.values()
                   if methods["MBLS"].test_ece < methods["CE"].test_ece)
    summary = {
        "CE overconfident": f"{overconfident}/{seeds} seeds",
        "MBLS ECE below CE": f"{improved}/{seeds} seeds",
    }
    weights = sorted({row.method.split("@", 1)[1] for row in rows if row.method.startswith("LS@")}, key=float)
    for w in weights:
        agree = 0
        for methods in by_seed.values():
            ce_ece = methods["CE"].test_ece
            ls_better = methods[f"LS@{w}"].test_ece < ce_ece
            zero_better = methods[f"MBLS(m=0)@{w}"].test_ece < ce_ece
            agree += int(ls_better == zero_better)
        summary[f"LS / MBLS(m=0) agree vs CE at w={w}"] = f"{agree}/{seeds} seeds"
    return summary


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON run config")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory")
@click.option("--seeds", callback=_int_list, help="Comma-separated seeds [default: 0,1,2,3,4]")
@click.option("--margins", callback=_float_list, help="Candidate margins [default: 2,4,6,8,10]")
@click.option("--weights", callback=_float_list, help="Matched weights [default: 0.05,0.1]")
@click.option("--epochs", type=int, help="Training epochs")
@click.option("--workers", type=int, help="Parallel training jobs")
@click.pass_context
@handle_errors
def compare(ctx, config_path, out_dir, seeds, margins, weights, epochs, workers):
    """Compare CE, MBLS (validation-selected m), LS and MBLS(m=0) over several seeds"""
    config = load_run_config(config_path, {
        "output_dir": out_dir,
        "sweep.seeds": seeds,
        "sweep.workers": workers,
        "train.epochs": epochs,
    })
    margins = margins or list(SELECTION_MARGINS)
    weights = weights or [0.05, 0.1]
    with console.status("Training..."):
        rows = compare_losses(config.train, config.data, config.sweep.seeds, margins, weights,
                              config.metrics.ece_bins, config.sweep.workers)
    summary = comparison_summary(rows)
    out = Path(config.output_dir)
    write_rows_csv(rows, out / "comparison.csv")
    (out / "config.json").write_text(dump_run_config(config), encoding="utf-8")

    _record(ctx, "compare", config_hash=config_hash(config.train), output_dir=str(out),
            details={"seeds": config.sweep.seeds, "margins": margins, "weights": weights, "summary": summary})
    display.display_response({
        "success": True,
        "response": f"Compared losses over {len(config.sweep.seeds)} seeds",
        "data": {
            "comparison": [row.model_dump() for row in rows],
            "summary": summary,
            "files": [str(out / "comparison.csv"), str(out / "config.json")],
        },
    })


@cli.command("penalty-profile")
@click.option("--margin", default=6.0, show_default=True, type=float, help="Margin m of the hinge penalty")
@click.option("--weight", default=1.0, show_default=True, type=float, help="Penalty weight")
@click.option("--max-distance", default=20.0, show_default=True, type=float, help="Largest logit distance")
@click.option("--step", default=0.5, show_default=True, type=float, help="Distance step")
@click.option("--out", "out_path", default="penalty_profile.csv", show_default=True,
              type=click.Path(dir_okay=False), help="CSV to write")
@handle_errors
def penalty_profile_cmd(margin, weight, max_distance, step, out_path):
    """Tabulate the linear and margin penalties of a logit distance and their gradients"""
    if step <= 0 or max_distance < 0:
        raise UsageError("--step must be > 0 and --max-distance >= 0")
    distances = np.round(np.arange(0.0, max_distance + step / 2, step), 12)
    linear, linear_grad, hinge, hinge_grad = penalty_profile(distances, margin, weight)
    write_table_csv(out_path, ["distance", "linear", "linear_grad", "margin", "margin_grad"],
                    list(zip(distances, linear, linear_grad, hinge, hinge_grad)))
    display.display_response({
        "success": True,
        "response": f"Penalty profile for m={margin:g}, weight={weight:g} over {distances.size} distances",
        "data": {"files": [str(out_path)]},
    })


@cli.command()
@click.option("--command", "command_filter",
              type=click.Choice(["train", "calibrate", "sweep-margin", "compare"]), help="Only this command")
@click.option("--limit", default=20, show_default=True, type=int, help="Most recent runs to show")
@click.option("--schema", is_flag=True, help="Show the ledger tables instead")
@click.pass_context
@handle_errors
def runs(ctx, command_filter, limit, schema):
    """List recorded runs from the ledger"""
    url = ctx.obj.get("ledger_url")
    if not url:
        raise UsageError("The ledger is disabled (--no-ledger)")
    data: Dict[str, List[Dict[str, Any]]] = ledger_tables(url) if schema else list_runs(url, command_filter, limit)
    display.display_response({"success": True, "response": f"Ledger: {url}", "data": data})


if __name__ == '__main__':
    cli()
