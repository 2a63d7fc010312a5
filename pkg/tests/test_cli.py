import json

import pytest
from typer.testing import CliRunner

from causalcpd.cli.typer_main import app, main

QUIET = ["--log-level", "ERROR"]


def run_json(capsys, *args):
    capsys.readouterr()
    code = main([*QUIET, "--json", *args])
    return code, capsys.readouterr().out


@pytest.fixture
def generated(tmp_path):
    out = tmp_path / "gen"
    code = main([*QUIET, "generate", "--n", "2", "--t", "1200", "--tau-max", "2", "--spa", "2", "--seed", "3", "--out", str(out)])
    assert code == 0
    return out


def test_no_subcommand_is_a_usage_error(capsys):
    assert main([]) == 1
    assert "Commands:" in capsys.readouterr().err


def test_unknown_option_is_a_usage_error():
    assert main(["--no-such-flag"]) == 1
    assert main(["detect", "--no-such-flag"]) == 1


def test_generate_writes_data_spec_truth_and_manifest(generated):
    for name in ("data.csv", "data.csv.meta.json", "spec.json", "truth.json", "generate-manifest.json"):
        assert (generated / name).is_file(), name
    truth = json.loads((generated / "truth.json").read_text(encoding="utf-8"))
    assert len(truth["change_points"]) == 2
    manifest = json.loads((generated / "generate-manifest.json").read_text(encoding="utf-8"))
    assert manifest["seeds"] == {"seed": 3}
    assert manifest["config"]["t"] == 1200
    assert manifest["sources"]["t"] == "flag"


@pytest.mark.parametrize(
    "args",
    [
        ["generate", "--kind", "sideways"],
        ["generate", "--kind", "hard", "--spa", "1"],
        ["generate", "--t", "50", "--spa", "3"],
    ],
)
def test_generate_rejects_bad_arguments(tmp_path, args):
    assert main([*QUIET, *args, "--out", str(tmp_path / "x")]) == 1


def test_detect_with_known_parents(capsys, generated, tmp_path):
    report_path = tmp_path / "run" / "report.json"
    code, out = run_json(
        capsys,
        "detect",
        "--in", str(generated / "data.csv"),
        "--spa-file", str(generated / "spec.json"),
        "--nw", "20",
        "--out", str(report_path),
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["oracle_spa"] is True
    assert [c["component"] for c in payload["components"]] == ["X1", "X2"]
    assert json.loads(report_path.read_text(encoding="utf-8")) == payload
    manifest = json.loads((report_path.parent / "detect-manifest.json").read_text(encoding="utf-8"))
    assert manifest["config"]["nw"] == 20
    assert str(generated / "data.csv") in manifest["inputs"]


def test_detect_rerun_from_manifest_is_identical(generated, tmp_path):
    first = tmp_path / "a" / "report.json"
    args = ["--in", str(generated / "data.csv"), "--spa-file", str(generated / "truth.json"), "--nw", "20"]
    assert main([*QUIET, "detect", *args, "--out", str(first)]) == 2  # truth.json is not a parent graph

    args[3] = str(generated / "spec.json")
    assert main([*QUIET, "detect", *args, "--refine", "--out", str(first)]) == 0
    manifest = first.parent / "detect-manifest.json"

    second = tmp_path / "b" / "report.json"
    assert main([*QUIET, "--config", str(manifest), "detect", "--out", str(second)]) == 0
    third = tmp_path / "c" / "report.json"
    assert main([*QUIET, "--threads", "2", "--config", str(manifest), "detect", "--out", str(third)]) == 0

    reference = first.read_bytes()
    assert second.read_bytes() == reference
    assert third.read_bytes() == reference


def test_detect_on_missing_input_is_a_data_error(tmp_path):
    assert main([*QUIET, "detect", "--in", str(tmp_path / "absent.csv")]) == 2


def test_detect_on_short_data_without_parents_is_a_data_error(tmp_path):
    out = tmp_path / "short"
    assert main([*QUIET, "generate", "--n", "2", "--t", "300", "--tau-max", "2", "--spa", "2", "--out", str(out)]) == 0
    assert main([*QUIET, "detect", "--in", str(out / "data.csv")]) == 2


def test_discover_then_detect(capsys, generated, tmp_path):
    graph_path = tmp_path / "graph.json"
    code, out = run_json(
        capsys, "discover", "--in", str(generated / "data.csv"), "--pc-max-conds", "1", "--out", str(graph_path)
    )
    assert code == 0
    assert set(json.loads(out)) == {"X1", "X2"}
    assert (tmp_path / "discover-manifest.json").is_file()

    code, _ = run_json(
        capsys, "detect", "--in", str(generated / "data.csv"), "--spa-file", str(graph_path), "--nw", "20"
    )
    assert code == 0


def test_segment_dump_feeds_pe(capsys, generated, tmp_path):
    dump = tmp_path / "segments"
    plots = tmp_path / "plots"
    assert (
        main(
            [
                *QUIET,
                "detect",
                "--in", str(generated / "data.csv"),
                "--spa-file", str(generated / "spec.json"),
                "--nw", "20",
                "--dump-segments", str(dump),
                "--plot-dir", str(plots),
            ]
        )
        == 0
    )
    assert (dump / "segments.json").is_file()
    assert list(plots.glob("pe_X1_l*.svg"))

    code, out = run_json(capsys, "pe", "--segment-dump", str(dump), "--nw", "20")
    assert code == 0
    rows = json.loads(out)
    index = json.loads((dump / "segments.json").read_text(encoding="utf-8"))
    assert len(rows) == len(index["segments"])
    assert (dump / "pe" / "pe_summary.json").is_file()
    for row in rows:
        if row["windows"]:
            assert (dump / "pe" / f"pe_c{index['components'].index(row['component'])}_l{row['config_index']}.svg").is_file()


def test_evaluate_writes_metrics(capsys, tmp_path):
    out = tmp_path / "results"
    code, stdout = run_json(
        capsys,
        "evaluate",
        "--trials", "2",
        "--n", "2",
        "--t", "400",
        "--tau-max", "2",
        "--spa", "2",
        "--nw", "20",
        "--methods", "oracle,mean-change",
        "--oracle-spa",
        "--q", "10,50",
        "--out", str(out),
    )
    assert code == 0
    payload = json.loads(stdout)
    assert len(payload["metrics"]) == 4
    assert payload["failures"] == []
    for name in ("metrics.csv", "records.jsonl", "accuracy.svg", "evaluate-manifest.json"):
        assert (out / name).is_file(), name


def test_evaluate_rejects_unknown_method(tmp_path):
    assert main([*QUIET, "evaluate", "--methods", "magic", "--out", str(tmp_path)]) == 1


def test_json_output_through_the_cli_runner(generated, tmp_path):
    result = CliRunner().invoke(
        app,
        [
            *QUIET,
            "--json",
            "detect",
            "--in", str(generated / "data.csv"),
            "--spa-file", str(generated / "spec.json"),
            "--nw", "20",
            "--table", str(tmp_path / "report.txt"),
        ],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(result.stdout)
    assert payload["T"] == 1200
    table = (tmp_path / "report.txt").read_text(encoding="utf-8")
    for component in payload["components"]:
        assert component["component"] in table
