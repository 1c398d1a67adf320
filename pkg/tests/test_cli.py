import json
import subprocess
import sys

import pytest

from edgekd.cli import build_parser, main, parse_arch
from edgekd.evaluation import reports_from_csv
from edgekd.workload import load_dataset

SUBCOMMANDS = ("gen", "train", "distill", "eval", "bench", "repro")


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("gen", "--spec", "cloud", "--n", 120, "--seed", 7, "--out", d / "train.jsonl") == 0
    assert run("gen", "--spec", "cloud", "--n", 60, "--seed", 8, "--out", d / "test.jsonl") == 0
    assert run("gen", "--spec", "edge", "--n", 40, "--seed", 9, "--out", d / "edge.jsonl") == 0
    quick = ("--epochs", 3, "--seed", 1)
    assert run("train", "--data", d / "train.jsonl", "--arch", "16x2", *quick, "--out", d / "teacher.model") == 0
    assert run(
        "distill", "--teacher", d / "teacher.model", "--reqs", d / "edge.jsonl", "--temp", 5,
        "--arch", "8x2", *quick, "--soft-out", d / "soft.jsonl", "--out", d / "student.model",
    ) == 0
    return d


def test_parse_arch():
    assert parse_arch("256x5") == (256,) * 5
    assert parse_arch("32X2") == (32, 32)
    with pytest.raises(Exception):
        parse_arch("wide")


def test_gen_reports_and_is_reproducible(files, tmp_path, capsys):
    assert run("gen", "--spec", "cloud", "--n", 120, "--seed", 7, "--out", tmp_path / "again.jsonl") == 0
    out = capsys.readouterr().out
    assert "120 samples" in out and "device=" in out
    assert (tmp_path / "again.jsonl").read_bytes() == (files / "train.jsonl").read_bytes()


def test_gen_alternate_labeler(tmp_path):
    assert run("gen", "--spec", "edge", "--n", 5, "--seed", 1, "--labeler", "greedy", "--out", tmp_path / "g.jsonl") == 0
    assert len(load_dataset(tmp_path / "g.jsonl")) == 5


def test_gen_unknown_spec(tmp_path, capsys):
    assert run("gen", "--spec", "moon", "--n", 5, "--seed", 1, "--out", tmp_path / "x.jsonl") != 0
    err = capsys.readouterr().err
    assert "cloud_scale" in err and "edge_scale" in err
    assert not (tmp_path / "x.jsonl").exists()


def test_gen_spec_file(tmp_path):
    spec = {"num_subtasks": 2, "eps_range": [1e8, 2e8], "d_range": [1e5, 2e5],
            "p1_range": [1e8, 1e9], "p2_range": [1e9, 2e9], "b1_range": [1e5, 1e6], "b2_range": [1e5, 1e6]}
    (tmp_path / "s.json").write_text(json.dumps(spec))
    assert run("gen", "--spec", tmp_path / "s.json", "--n", 4, "--seed", 1, "--out", tmp_path / "o.jsonl") == 0
    assert load_dataset(tmp_path / "o.jsonl").spec.num_subtasks == 2


def test_train_rerun_is_byte_identical(files, tmp_path):
    assert run("train", "--data", files / "train.jsonl", "--arch", "16x2", "--epochs", 3, "--seed", 1,
               "--out", tmp_path / "t.model") == 0
    assert (tmp_path / "t.model").read_bytes() == (files / "teacher.model").read_bytes()


def test_distill_outputs(files):
    soft = load_dataset(files / "soft.jsonl")
    assert soft.kind == "soft" and len(soft) == 40
    assert json.loads((files / "student.model").read_text())["meta"]["temperature"] == 5.0


def test_eval_mixes_models_and_builtins(files, tmp_path, capsys):
    code = run("eval", "--test", files / "test.jsonl", "--policy", "optimal", "--policy", "greedy",
               "--policy", files / "teacher.model", "--policy", files / "student.model",
               "--policy", "random", "--seed", 3, "--out", tmp_path / "report.csv")
    assert code == 0
    reports = reports_from_csv((tmp_path / "report.csv").read_text())
    assert capsys.readouterr().out == (tmp_path / "report.csv").read_text()
    names = [r.name for r in reports]
    assert names == ["Optimal", "Greedy", "teacher", "student", "Random"]
    assert reports[0].normalized_latency == 1.0
    assert all(r.normalized_latency >= 1.0 - 1e-12 for r in reports)


def test_eval_random_needs_seed(files, capsys):
    assert run("eval", "--test", files / "test.jsonl", "--policy", "random") != 0
    assert "--seed" in capsys.readouterr().err


def test_eval_unknown_policy(files, capsys):
    assert run("eval", "--test", files / "test.jsonl", "--policy", "oracle9000") != 0
    assert "neither a built-in" in capsys.readouterr().err


def test_bench(files, tmp_path):
    assert run("bench", "--reqs", files / "test.jsonl", "--policy", files / "student.model",
               "--decisions", 100, "--out", tmp_path / "d.csv") == 0
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "name,mean_inference_delay_s,delay_normalized_to_greedy"
    assert lines[-1].startswith("Greedy,") and lines[-1].endswith(",1.0")


def test_missing_file(tmp_path, capsys):
    assert run("train", "--data", tmp_path / "nope.jsonl", "--seed", 1, "--out", tmp_path / "m") != 0
    assert "nope.jsonl" in capsys.readouterr().err


def test_corrupt_model(files, tmp_path, capsys):
    (tmp_path / "bad.model").write_text("{")
    assert run("eval", "--test", files / "test.jsonl", "--policy", tmp_path / "bad.model") != 0
    assert capsys.readouterr().err


def test_schema_version_mismatch_refused(files, tmp_path, capsys):
    lines = (files / "test.jsonl").read_text().splitlines()
    header = json.loads(lines[0])
    header["version"] = 99
    (tmp_path / "future.jsonl").write_text("\n".join([json.dumps(header), *lines[1:]]) + "\n")
    assert run("eval", "--test", tmp_path / "future.jsonl", "--policy", "greedy") != 0
    assert "version" in capsys.readouterr().err


def test_unknown_flag_rejected(files):
    with pytest.raises(SystemExit) as exc:
        run("eval", "--test", files / "test.jsonl", "--policy", "greedy", "--bogus")
    assert exc.value.code != 0


def test_abbreviations_rejected(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("gen", "--sp", "cloud", "--n", 1, "--seed", 1, "--out", tmp_path / "a")
    assert exc.value.code != 0


def test_seed_is_mandatory(files, tmp_path):
    with pytest.raises(SystemExit):
        run("gen", "--spec", "cloud", "--n", 1, "--out", tmp_path / "a")
    with pytest.raises(SystemExit):
        run("train", "--data", files / "train.jsonl", "--out", tmp_path / "m")


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_documents_every_flag(sub, capsys):
    with pytest.raises(SystemExit) as exc:
        run(sub, "--help")
    assert exc.value.code == 0
    text = capsys.readouterr().out
    subparser = build_parser()._subparsers._group_actions[0].choices[sub]
    for action in subparser._actions:
        for opt in action.option_strings:
            assert opt in text
        if action.help is None and action.option_strings != ["-h", "--help"]:
            pytest.fail(f"{sub} {action.option_strings} lacks help text")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "edgekd", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "distill" in res.stdout


def test_repro_table1_prints_checks(files, tmp_path, capsys):
    code = run("repro", "table1", "--seed", 1, "--teacher", files / "teacher.model",
               "--decisions", 200, "--out", tmp_path / "t1.csv")
    out = capsys.readouterr().out
    assert code in (0, 3)
    assert "[PASS] Greedy normalized to 1.00" in out
    assert out.count("[PASS]") + out.count("[FAIL]") == 4
    assert (tmp_path / "t1.csv").read_text().startswith("name,mean_inference_delay_s")


def test_repro_fig5_refuses_external_teacher(files, capsys):
    assert run("repro", "fig5", "--seed", 1, "--teacher", files / "teacher.model") != 0
