"""Command-line front door: generate, train, eval, predict, compare.

Every subcommand is driven by one JSON config file (see config.py for the
schema); file-path flags can override the config's ``outputs`` section.
All outputs are deterministic functions of the config's seeds. The
``LACTOSE_LOG`` environment variable (debug/info/warning/error) controls
log verbosity.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .bank import (
    OptimizerState,
    ParameterBank,
    bank_init,
    load_bank,
    load_branch,
    save_bank,
)
from .config import ExperimentConfig, load_config
from .dataio import generate, read_dataset, write_dataset, write_predictions
from .errors import ConfigError, LactoseError
from .net import LayerSpec, MLPModel, build_model, forward, inject_params, random_params
from .router import route
from .trainer import (
    BankEval,
    TrainRecord,
    TrainReport,
    evaluate_bank,
    train,
    train_monolithic,
    write_report_csv,
)

log = logging.getLogger("lactose")

# Seed stream tag for the optional scaled monolithic baseline, so it never
# collides with the per-branch streams (seed, 0..N-1).
_SCALED_SEED_TAG = 104729


@dataclass
class CompareResult:
    lactose: TrainReport
    monolithic: TrainReport
    scaled: TrainReport | None


def _output_path(config: ExperimentConfig, key: str, override: str | None) -> str:
    path = override or config.outputs.get(key)
    if not path:
        raise ConfigError(f"outputs.{key}: missing (set it in the config or pass --out)")
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def _load_records(config: ExperimentConfig) -> list[TrainRecord]:
    if config.dataset_path is not None:
        try:
            records = read_dataset(config.dataset_path)
        except FileNotFoundError:
            raise ConfigError(f"data.path: file not found: {config.dataset_path}") from None
        log.info("read %d records from %s", len(records), config.dataset_path)
        return records
    assert config.piecewise is not None
    records = generate(config.piecewise)
    log.info("generated %d records from the piecewise spec", len(records))
    return records


def _experiment_manifest(config: ExperimentConfig) -> dict:
    return {
        "experiment": {
            "breakpoints": list(config.breakpoints),
            "routing_feature": config.routing_feature,
            "init_mode": config.init_mode,
            "init_seed": config.init_seed,
            "shuffle_seed": config.shuffle_seed,
            "epochs": config.epochs,
        }
    }


def _check_bank_matches(config: ExperimentConfig, bank: ParameterBank, bank_path: str) -> None:
    model_layout = config.model().layout()
    if bank.layout != model_layout:
        raise ConfigError(
            f"bank {bank_path} layout {bank.layout.shapes} does not match "
            f"model.layers layout {model_layout.shapes}"
        )
    if bank.branch_count != config.branch_count:
        raise ConfigError(
            f"bank {bank_path} has {bank.branch_count} branches but "
            f"routing.breakpoints implies {config.branch_count}"
        )


def cmd_generate(config: ExperimentConfig, out: str | None = None) -> str:
    if config.piecewise is None:
        raise ConfigError("data.piecewise: required by the generate command")
    path = _output_path(config, "dataset", out)
    write_dataset(path, generate(config.piecewise))
    print(f"wrote {config.piecewise.sample_count} records to {path}")
    return path


def cmd_train(
    config: ExperimentConfig,
    bank_out: str | None = None,
    report_out: str | None = None,
) -> tuple[str, str, TrainReport]:
    records = _load_records(config)
    model = config.model()
    conditions = config.conditions()
    bank = bank_init(model, config.branch_count, config.init_mode, config.init_seed, config.optimizer)
    report = train(
        model,
        bank,
        conditions,
        records,
        config.epochs,
        shuffle_seed=config.shuffle_seed,
    )
    bank_path = _output_path(config, "bank", bank_out)
    save_bank(bank, bank_path, extra_manifest=_experiment_manifest(config))
    report_path = _output_path(config, "report", report_out)
    write_report_csv(report, report_path)
    print(
        f"trained {len(report.losses)} steps in {report.duration_seconds:.2f}s; "
        f"final train mse {report.final_mse:.6g}"
    )
    print(f"per-branch steps: {report.branch_step_counts}")
    print(f"wrote bank to {bank_path} and report to {report_path}")
    return bank_path, report_path, report


def cmd_eval(config: ExperimentConfig, bank_path: str, out: str | None = None) -> BankEval:
    records = _load_records(config)
    bank = load_bank(bank_path)
    _check_bank_matches(config, bank, bank_path)
    result = evaluate_bank(config.model(), bank, config.conditions(), records)
    print(f"mean mse: {result.mean!r}")
    for i, (mse, count) in enumerate(zip(result.branch_mse, result.branch_counts)):
        print(f"branch {i}: count={count} mse={mse!r}")
    if out or config.outputs.get("eval"):
        path = _output_path(config, "eval", out)
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["branch", "count", "mse"])
            for i, (mse, count) in enumerate(zip(result.branch_mse, result.branch_counts)):
                w.writerow([i, count, repr(float(mse))])
            w.writerow(["all", len(records), repr(float(result.mean))])
        print(f"wrote metrics to {path}")
    return result


def cmd_predict(
    config: ExperimentConfig,
    bank_path: str,
    data_path: str,
    out: str | None = None,
) -> str:
    try:
        records = read_dataset(data_path)
    except FileNotFoundError:
        raise ConfigError(f"--data: file not found: {data_path}") from None
    if not records:
        raise ConfigError(f"--data: {data_path} holds no records")
    bank = load_bank(bank_path)
    _check_bank_matches(config, bank, bank_path)
    model = config.model()
    conditions = config.conditions()
    predictions: list[np.ndarray] = []
    branches: list[int] = []
    for rec in records:
        i = route(conditions, rec.x)
        load_branch(bank, i, model)
        predictions.append(forward(model, rec.x).y_hat)
        branches.append(i)
    path = _output_path(config, "predictions", out)
    write_predictions(path, records, predictions, branches)
    print(f"wrote {len(records)} predictions to {path}")
    return path


def _scaled_specs(layers: tuple[LayerSpec, ...], branch_count: int) -> list[LayerSpec]:
    """Hidden widths scaled by sqrt(N); input/output widths untouched."""
    factor = math.sqrt(branch_count)
    widths = [layers[0].in_width] + [l.out_width for l in layers]
    for k in range(1, len(widths) - 1):
        widths[k] = max(1, math.ceil(widths[k] * factor))
    return [
        LayerSpec(widths[k], widths[k + 1], layers[k].activation) for k in range(len(layers))
    ]


def cmd_compare(config: ExperimentConfig, out: str | None = None) -> CompareResult:
    """Swapped-bank training vs a monolithic model of equal capacity.

    Both arms see the same records for the same number of epochs (equal
    total steps) and draw their initial parameters from the same seed.
    """
    records = _load_records(config)
    conditions = config.conditions()

    model = config.model()
    bank = bank_init(model, config.branch_count, config.init_mode, config.init_seed, config.optimizer)
    lactose_report = train(model, bank, conditions, records, config.epochs, shuffle_seed=config.shuffle_seed)

    mono_model = config.model()
    inject_params(mono_model, random_params(mono_model.layout(), config.init_seed))
    mono_state = OptimizerState.fresh(config.optimizer, mono_model.layout())
    mono_report = train_monolithic(
        mono_model, mono_state, records, config.epochs, shuffle_seed=config.shuffle_seed
    )

    scaled_report = None
    if config.compare_scaled_baseline:
        specs = _scaled_specs(config.layers, config.branch_count)
        scaled_model = build_model(specs)
        inject_params(
            scaled_model, random_params(scaled_model.layout(), (config.init_seed, _SCALED_SEED_TAG))
        )
        scaled_state = OptimizerState.fresh(config.optimizer, scaled_model.layout())
        scaled_report = train_monolithic(
            scaled_model, scaled_state, records, config.epochs, shuffle_seed=config.shuffle_seed
        )

    path = _output_path(config, "compare", out)
    header = ["step", "lactose_branch", "lactose_loss", "monolithic_loss"]
    if scaled_report is not None:
        header.append("scaled_monolithic_loss")
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for s in range(len(lactose_report.losses)):
            row = [
                s,
                lactose_report.branches[s],
                repr(float(lactose_report.losses[s])),
                repr(float(mono_report.losses[s])),
            ]
            if scaled_report is not None:
                row.append(repr(float(scaled_report.losses[s])))
            w.writerow(row)

    print(f"lactose final train mse:    {lactose_report.final_mse!r}")
    print(f"monolithic final train mse: {mono_report.final_mse!r}")
    if scaled_report is not None:
        print(f"scaled monolithic final train mse: {scaled_report.final_mse!r}")
    print(f"wrote per-step comparison to {path}")
    return CompareResult(lactose_report, mono_report, scaled_report)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lactose",
        description="Train neural models with per-branch parameter banks swapped by breakpoint routing.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, *, bank: bool = False, data: bool = False):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", help="output path (overrides the config's outputs section)")
        if bank:
            p.add_argument("--bank", required=True, help="bank file written by `train`")
        if data:
            p.add_argument("--data", required=True, help="input dataset CSV")
        return p

    add("generate", "write a synthetic dataset CSV from the config's piecewise spec")
    p_train = add("train", "train a bank and write it plus a per-step report CSV")
    p_train.add_argument("--report", help="report CSV path (overrides outputs.report)")
    add("eval", "score a trained bank on a dataset", bank=True)
    add("predict", "route and predict every record of a dataset CSV", bank=True, data=True)
    add("compare", "train swapped and monolithic arms side by side")
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("LACTOSE_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.command == "generate":
            cmd_generate(config, args.out)
        elif args.command == "train":
            cmd_train(config, args.out, args.report)
        elif args.command == "eval":
            cmd_eval(config, args.bank, args.out)
        elif args.command == "predict":
            cmd_predict(config, args.bank, args.data, args.out)
        elif args.command == "compare":
            cmd_compare(config, args.out)
    except LactoseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def entrypoint() -> None:
    sys.exit(main())
