import json

from scaresnet.cli import build_parser, parse_args, run_cli


def _run(capsys, *argv):
    status = run_cli(list(argv))
    out = capsys.readouterr().out.strip()
    return status, json.loads(out.splitlines()[-1]) if out else None


def test_parse_args_subcommands():
    args = parse_args(["pool-params", "--h", "256", "--l", "9"])
    assert (args.command, args.h, args.l, args.sweep) == ("pool-params", 256, 9, False)
    args = parse_args(["grad-check", "--module", "all", "--seed", "3"])
    assert (args.module, args.seed) == ("all", 3)
    args = parse_args(["-v", "shape-trace", "--preset", "mini", "--h", "96"])
    assert args.verbose and args.w is None


def test_help_lists_every_command():
    text = build_parser().format_help()
    for command in (
        "solve-levels", "pool-params", "shape-trace", "param-count",
        "grad-check", "gen-data", "train-demo",
    ):
        assert command in text


def test_pool_params(capsys):
    status, doc = _run(capsys, "pool-params", "--h", "256", "--l", "9")
    assert status == 0
    assert doc == {"kernel": 32, "stride": 28, "padding": 0, "branch": "eq5", "t": 5}


def test_pool_params_swapped(capsys):
    status, doc = _run(capsys, "pool-params", "--h", "80", "--l", "9", "--interpretation", "swapped")
    assert status == 0
    assert doc["branch"] == "eq4"
    assert (doc["kernel"], doc["stride"], doc["padding"]) == (9, 9, 1)


def test_pool_params_sweep(capsys):
    status, doc = _run(capsys, "pool-params", "--h", "300", "--sweep")
    assert status == 0
    assert doc["failures"] == 0
    assert [run["interpretation"] for run in doc["runs"]] == ["literal", "swapped"]


def test_pool_params_below_level_is_an_error(capsys):
    status, doc = _run(capsys, "pool-params", "--h", "8", "--l", "9")
    assert status == 1
    assert "below the pooled level" in doc["error"]


def test_solve_levels(capsys):
    status, doc = _run(capsys, "solve-levels", "--max", "10")
    assert status == 0
    assert {"x": 9, "y": 6, "z": 2, "w": 11} in doc["solutions"]
    assert len(doc["solutions"]) == len(doc["witnesses"])
    for q in doc["solutions"]:
        assert q["x"] ** 2 + q["y"] ** 2 + q["z"] ** 2 == q["w"] ** 2


def test_unknown_flag_exits_with_usage_error(capsys):
    assert run_cli(["pool-params", "--h", "10", "--bogus"]) == 2
    assert run_cli([]) == 2


def test_shape_trace(capsys):
    status, doc = _run(capsys, "shape-trace", "--preset", "mini", "--h", "96")
    assert status == 0
    assert doc["minimum_input"] == 72
    assert doc["rows"][-1]["layer"] == "total"
    assert doc["rows"][-2]["output_shape"] == [64, 11, 11]


def test_shape_trace_rejects_small_input(capsys):
    status, doc = _run(capsys, "shape-trace", "--h", "64")
    assert status == 1
    assert "72" in doc["error"]


def test_config_document_overrides_preset(capsys, tmp_path):
    path = tmp_path / "net.json"
    path.write_text(json.dumps({"c_out": 32, "heads": 2}))
    status, doc = _run(capsys, "shape-trace", "--h", "96", "--config", str(path))
    assert status == 0
    assert doc["rows"][-2]["output_shape"] == [32, 11, 11]


def test_config_document_with_unknown_key(capsys, tmp_path):
    path = tmp_path / "net.json"
    path.write_text(json.dumps({"neck": "fpn"}))
    status, doc = _run(capsys, "param-count", "--h", "96", "--config", str(path))
    assert status == 1
    assert "unknown config keys" in doc["error"]


def test_param_count_compare_plain(capsys):
    status, doc = _run(capsys, "param-count", "--h", "96", "--compare-plain")
    assert status == 0
    assert doc["compare_plain"]["ratio"] < 1
    assert doc["total_params"] == sum(layer["params"] for layer in doc["layers"])


def test_grad_check_single_module(capsys):
    status, doc = _run(capsys, "grad-check", "--module", "sppr", "--seed", "0")
    assert status == 0
    assert doc["module"] == "sppr"
    assert doc["passed"] is True
    assert doc["seed"] == 0


def test_gen_data_and_train_demo(capsys, tmp_path):
    data = tmp_path / "data"
    status, doc = _run(
        capsys, "gen-data", "--n", "4", "--size-min", "72", "--size-max", "76",
        "--seed", "2", "--out", str(data),
    )
    assert status == 0
    assert doc["positives"] == 2
    assert (data / "dataset.json").exists()

    report = tmp_path / "report.json"
    status, doc = _run(
        capsys, "train-demo", "--data", str(data), "--steps", "1", "--lr", "0",
        "--report", str(report),
    )
    assert status == 0
    assert doc["final_loss"] == doc["initial_loss"]
    assert len(doc["losses"]) == 1
    assert doc["config"]["dtype"] == "float32"
    assert json.loads(report.read_text())["seed"] == 0

    status, doc = _run(
        capsys, "train-demo", "--data", str(data), "--steps", "1", "--lr", "0",
        "--ablation", "--dtype", "float64", "--checkpoint", str(tmp_path / "ckpt"),
    )
    assert status == 0
    assert [row["variant"] for row in doc["variants"]] == ["baseline", "cca", "spprcsp", "full"]
    assert doc["reports"]["full"]["config"]["dtype"] == "float64"
    for row in doc["variants"]:
        assert row["final_loss"] == row["initial_loss"]
        assert (tmp_path / "ckpt" / row["variant"]).is_dir()


def test_gen_data_rejects_size_below_minimum(capsys, tmp_path):
    status, doc = _run(
        capsys, "gen-data", "--n", "4", "--size-min", "64", "--out", str(tmp_path / "d")
    )
    assert status == 1
    assert "minimum" in doc["error"]
