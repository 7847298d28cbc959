"""Config parsing and the command-line pipeline, end to end in a temp dir."""

import json

import numpy as np
import pytest

from lactose import (
    ConfigError,
    build_model,
    cmd_compare,
    cmd_eval,
    cmd_generate,
    cmd_predict,
    cmd_train,
    config_from_dict,
    forward,
    inject_params,
    load_bank,
    load_config,
    main,
    manifest_path,
    read_dataset,
    read_manifest,
)


def base_config(tmp_path, **overrides):
    """A small, fast experiment rooted in tmp_path."""
    raw = {
        "model": {
            "layers": [
                {"in": 1, "out": 4, "activation": "tanh"},
                {"in": 4, "out": 1, "activation": "linear"},
            ]
        },
        "routing": {"breakpoints": [0.0], "feature": 0},
        "optimizer": {"kind": "sgd", "learning_rate": 0.05},
        "training": {"epochs": 2, "init_mode": "shared-seed", "init_seed": 7, "shuffle_seed": None},
        "data": {
            "piecewise": {
                "segments": [
                    {"kind": "constant", "lo": -1.0, "hi": 0.0, "value": -1.0},
                    {"kind": "constant", "lo": 0.0, "hi": 1.0, "value": 1.0},
                ],
                "noise_sigma": 0.0,
                "sample_count": 60,
                "x_min": -1.0,
                "x_max": 1.0,
                "seed": 3,
            }
        },
        "outputs": {
            "dataset": str(tmp_path / "out" / "dataset.csv"),
            "bank": str(tmp_path / "out" / "bank.lact"),
            "report": str(tmp_path / "out" / "report.csv"),
            "eval": str(tmp_path / "out" / "eval.csv"),
            "predictions": str(tmp_path / "out" / "predictions.csv"),
            "compare": str(tmp_path / "out" / "compare.csv"),
        },
    }
    raw.update(overrides)
    return raw


def write_config(tmp_path, raw):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return str(path)


# config parsing


def test_config_round_trip(tmp_path):
    config = load_config(write_config(tmp_path, base_config(tmp_path)))
    assert config.branch_count == 2
    assert config.breakpoints == (0.0,)
    assert config.optimizer.learning_rate == 0.05
    assert config.epochs == 2
    assert config.shuffle_seed is None
    assert config.piecewise is not None and config.piecewise.sample_count == 60
    assert config.model().parameter_count == 13


def test_config_allows_empty_breakpoints(tmp_path):
    raw = base_config(tmp_path)
    raw["routing"] = {"breakpoints": []}
    assert config_from_dict(raw).branch_count == 1


def test_config_rejects_unsorted_breakpoints(tmp_path):
    raw = base_config(tmp_path)
    raw["routing"] = {"breakpoints": [1.0, -1.0]}
    with pytest.raises(ConfigError, match=r"routing\.breakpoints\[1\]"):
        config_from_dict(raw)


def test_config_rejects_unknown_activation(tmp_path):
    raw = base_config(tmp_path)
    raw["model"]["layers"][0]["activation"] = "sigmoid"
    with pytest.raises(ConfigError, match=r"model\.layers\[0\]\.activation"):
        config_from_dict(raw)


def test_config_rejects_broken_layer_chain(tmp_path):
    raw = base_config(tmp_path)
    raw["model"]["layers"][1]["in"] = 5
    with pytest.raises(ConfigError, match=r"model\.layers\[1\]\.in"):
        config_from_dict(raw)


def test_config_requires_exactly_one_data_source(tmp_path):
    raw = base_config(tmp_path)
    raw["data"]["path"] = "somewhere.csv"
    with pytest.raises(ConfigError, match="exactly one"):
        config_from_dict(raw)
    raw["data"] = {}
    with pytest.raises(ConfigError, match="exactly one"):
        config_from_dict(raw)


def test_config_rejects_routing_feature_beyond_input(tmp_path):
    raw = base_config(tmp_path)
    raw["routing"]["feature"] = 1
    with pytest.raises(ConfigError, match=r"routing\.feature"):
        config_from_dict(raw)


def test_config_missing_field_names_its_path(tmp_path):
    raw = base_config(tmp_path)
    del raw["training"]["epochs"]
    with pytest.raises(ConfigError, match=r"training\.epochs"):
        config_from_dict(raw)


def test_missing_config_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config("no/such/config.json")


# pipeline commands


def test_generate_then_train_then_eval_then_predict(tmp_path):
    config = load_config(write_config(tmp_path, base_config(tmp_path)))

    dataset_path = cmd_generate(config)
    records = read_dataset(dataset_path)
    assert len(records) == 60

    bank_path, report_path, report = cmd_train(config)
    assert len(report.losses) == 60 * 2
    assert sum(report.branch_step_counts) == 60 * 2
    manifest = read_manifest(bank_path)
    assert manifest["experiment"]["init_seed"] == 7
    assert manifest["branch_count"] == 2

    result = cmd_eval(config, bank_path)
    assert sum(result.branch_counts) == 60
    assert result.mean == report.final_mse
    eval_lines = (tmp_path / "out" / "eval.csv").read_text().splitlines()
    assert eval_lines[0] == "branch,count,mse"
    assert len(eval_lines) == 1 + 2 + 1  # per-branch rows plus the "all" row

    pred_path = cmd_predict(config, bank_path, dataset_path)
    pred_lines = (tmp_path / "out" / "predictions.csv").read_text().splitlines()
    assert pred_path == str(tmp_path / "out" / "predictions.csv")
    assert pred_lines[0] == "x0,y_true0,y_pred0,branch"
    assert len(pred_lines) == 1 + 60
    report_lines = (tmp_path / "out" / "report.csv").read_text().splitlines()
    assert report_lines[0] == "step,branch,loss"
    assert report_path == str(tmp_path / "out" / "report.csv")


def test_predict_branch_column_follows_breakpoints(tmp_path):
    config = load_config(write_config(tmp_path, base_config(tmp_path)))
    dataset_path = cmd_generate(config)
    bank_path, _, _ = cmd_train(config)
    cmd_predict(config, bank_path, dataset_path)
    rows = (tmp_path / "out" / "predictions.csv").read_text().splitlines()[1:]
    for row in rows:
        x, _, _, branch = row.split(",")
        assert int(branch) == (0 if float(x) < 0.0 else 1)


def test_predict_single_branch_equals_plain_inference(tmp_path):
    raw = base_config(tmp_path)
    raw["routing"] = {"breakpoints": []}
    config = load_config(write_config(tmp_path, raw))
    dataset_path = cmd_generate(config)
    bank_path, _, _ = cmd_train(config)
    cmd_predict(config, bank_path, dataset_path)

    bank = load_bank(bank_path)
    model = config.model()
    inject_params(model, bank.params[0])
    rows = (tmp_path / "out" / "predictions.csv").read_text().splitlines()[1:]
    for row in rows:
        x, _, y_pred, branch = row.split(",")
        assert int(branch) == 0
        assert float(y_pred) == forward(model, [float(x)]).y_hat[0]


def test_train_is_byte_deterministic(tmp_path):
    raw = base_config(tmp_path)
    raw["training"]["shuffle_seed"] = 5
    config = load_config(write_config(tmp_path, raw))

    def run(tag):
        bank_path, report_path, _ = cmd_train(
            config,
            bank_out=str(tmp_path / f"bank_{tag}.lact"),
            report_out=str(tmp_path / f"report_{tag}.csv"),
        )
        blob = open(bank_path, "rb").read()
        manifest = open(manifest_path(bank_path), "rb").read()
        report = open(report_path, "rb").read()
        return blob, manifest, report

    assert run("a") == run("b")


def test_compare_trains_both_arms(tmp_path):
    config = load_config(write_config(tmp_path, base_config(tmp_path)))
    result = cmd_compare(config)
    assert result.scaled is None
    assert len(result.lactose.losses) == len(result.monolithic.losses)
    lines = (tmp_path / "out" / "compare.csv").read_text().splitlines()
    assert lines[0] == "step,lactose_branch,lactose_loss,monolithic_loss"
    assert len(lines) == 1 + len(result.lactose.losses)


def test_compare_scaled_baseline_widens_hidden_layers(tmp_path):
    raw = base_config(tmp_path)
    raw["compare"] = {"scaled_baseline": True}
    config = load_config(write_config(tmp_path, raw))
    result = cmd_compare(config)
    assert result.scaled is not None
    header = (tmp_path / "out" / "compare.csv").read_text().splitlines()[0]
    assert header.endswith(",scaled_monolithic_loss")


def test_eval_rejects_bank_not_matching_config(tmp_path):
    config = load_config(write_config(tmp_path, base_config(tmp_path)))
    bank_path, _, _ = cmd_train(config)
    raw = base_config(tmp_path)
    raw["routing"] = {"breakpoints": [-0.5, 0.0, 0.5]}
    mismatched = load_config(write_config(tmp_path, raw))
    with pytest.raises(ConfigError, match="branches"):
        cmd_eval(mismatched, bank_path)


# exit codes and diagnostics


def test_main_happy_path_returns_zero(tmp_path, capsys):
    config_path = write_config(tmp_path, base_config(tmp_path))
    assert main(["generate", "--config", config_path]) == 0
    assert main(["train", "--config", config_path]) == 0
    out = capsys.readouterr().out
    assert "final train mse" in out


def test_main_invalid_breakpoints_exit_two(tmp_path, capsys):
    raw = base_config(tmp_path)
    raw["routing"] = {"breakpoints": [1.0, 1.0]}
    config_path = write_config(tmp_path, raw)
    assert main(["train", "--config", config_path]) == 2
    assert "breakpoints" in capsys.readouterr().err


def test_main_missing_data_file_exit_two(tmp_path, capsys):
    raw = base_config(tmp_path)
    raw["data"] = {"path": str(tmp_path / "absent.csv")}
    config_path = write_config(tmp_path, raw)
    assert main(["train", "--config", config_path]) == 2
    err = capsys.readouterr().err
    assert "absent.csv" in err


def test_main_missing_config_exit_two(capsys):
    assert main(["eval", "--config", "nope.json", "--bank", "nope.lact"]) == 2
    assert "nope.json" in capsys.readouterr().err


def test_main_requires_a_subcommand():
    with pytest.raises(SystemExit):
        main([])


def test_reference_config_parses():
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "configs" / "reference.json"
    config = load_config(str(path))
    assert config.branch_count == 3
    assert config.epochs == 20
    assert config.piecewise is not None and config.piecewise.sample_count == 3000
