"""Exit codes, artifact determinism, and flag surface of the CLI."""

import json

import pytest

from safetrace.cli import main
from safetrace.rollouts import build_corpus

from test_automata import check_dot_well_formed


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture()
def scenario_files(tmp_path):
    rollout = tmp_path / "rollout.json"
    spec = tmp_path / "spec.json"
    assert (
        run_cli(
            "generate",
            "grasp_drop",
            "--seed",
            "7",
            "--out",
            str(rollout),
            "--spec-out",
            str(spec),
            "-q",
        )
        == 0
    )
    return rollout, spec


# ---------------------------------------------------------------------------
# compile
# ---------------------------------------------------------------------------


def test_compile_formula_reports_two_states(tmp_path, capsys):
    out = tmp_path / "dfa.json"
    assert run_cli("compile", "--formula", "G !collision", "--out", str(out)) == 0
    assert "states: 2" in capsys.readouterr().err
    doc = json.loads(out.read_text())
    assert doc["states"] == 2


def test_compile_template_to_dot(tmp_path):
    out = tmp_path / "phi4.dot"
    code = run_cli(
        "compile",
        "--template",
        "phi4",
        "--bind",
        "Contaminated=dirty",
        "--bind",
        "CleanContact=touch_clean",
        "--bind",
        "Sanitized=washed",
        "--format",
        "dot",
        "--out",
        str(out),
        "-q",
    )
    assert code == 0
    check_dot_well_formed(out.read_text())


def test_compile_alphabet_too_large_exits_one(capsys):
    wide = " & ".join(f"F p{i}" for i in range(9))
    assert run_cli("compile", "--formula", wide) == 1
    assert "error" in capsys.readouterr().err


def test_compile_parse_error_exits_one(capsys):
    assert run_cli("compile", "--formula", "G (p &") == 1
    err = capsys.readouterr().err
    assert "error" in err


# ---------------------------------------------------------------------------
# monitor
# ---------------------------------------------------------------------------


def test_monitor_violating_pair_exits_two(scenario_files, tmp_path, capsys):
    rollout, spec = scenario_files
    out = tmp_path / "monitor.json"
    code = run_cli("monitor", str(rollout), str(spec), "--out", str(out))
    assert code == 2
    err = capsys.readouterr().err
    assert "violation: phi2" in err
    doc = json.loads(out.read_text())
    assert doc["instances"][0]["violated"] is True


def test_monitor_clean_pair_exits_zero(tmp_path):
    rollout = tmp_path / "r.json"
    spec = tmp_path / "s.json"
    run_cli(
        "generate", "clean_pick_place", "--out", str(rollout), "--spec-out", str(spec), "-q"
    )
    assert run_cli("monitor", str(rollout), str(spec), "-q") == 0


def test_monitor_missing_file_exits_one(tmp_path, capsys):
    assert run_cli("monitor", str(tmp_path / "nope.json"), str(tmp_path / "also.json")) == 1
    assert "error" in capsys.readouterr().err


def test_monitor_strict_end_flag(tmp_path):
    rollout = tmp_path / "r.json"
    spec = tmp_path / "s.json"
    run_cli(
        "generate", "release_unsettled", "--out", str(rollout), "--spec-out", str(spec), "-q"
    )
    assert run_cli("monitor", str(rollout), str(spec), "-q") == 2
    assert (
        run_cli("monitor", str(rollout), str(spec), "--no-strict-end-of-trace", "-q") == 0
    )


# ---------------------------------------------------------------------------
# generate / validate
# ---------------------------------------------------------------------------


def test_generate_is_deterministic(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    run_cli("generate", "grasp_drop", "--seed", "7", "--out", str(a), "-q")
    run_cli("generate", "grasp_drop", "--seed", "7", "--out", str(b), "-q")
    assert a.read_bytes() == b.read_bytes()


def test_generate_unknown_scenario_exits_two_argparse(capsys):
    with pytest.raises(SystemExit) as excinfo:
        run_cli("generate", "not_a_scenario", "-q")
    assert excinfo.value.code == 2  # argparse rejects bad choices


def test_generate_without_scenario_or_corpus_errors(capsys):
    assert run_cli("generate", "-q") == 1


def test_validate_consistent_pair(scenario_files, capsys):
    rollout, spec = scenario_files
    assert run_cli("validate", str(rollout), str(spec), "-q") == 0


def test_validate_mismatched_pair_warns_but_exits_zero(tmp_path, capsys):
    rollout = tmp_path / "r.json"
    spec_other = tmp_path / "s.json"
    run_cli("generate", "clean_pick_place", "--out", str(rollout), "-q")
    run_cli("generate", "grasp_drop", "--spec-out", str(spec_other), "--out", str(tmp_path / "x.json"), "-q")
    assert run_cli("validate", str(rollout), str(spec_other)) == 0
    assert "task_mismatch" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("corpus")
    build_corpus(directory)
    return directory


def test_evaluate_corpus_and_rerun_byte_identical(corpus_dir, tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    manifest = str(corpus_dir / "manifest.json")
    assert run_cli("evaluate", manifest, "--out", str(out_a), "-q") == 0
    assert run_cli("evaluate", manifest, "--out", str(out_b), "-q") == 0
    names = sorted(p.name for p in out_a.iterdir())
    assert "report.json" in names and "per_category.csv" in names
    for name in names:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_evaluate_empty_manifest_exits_one(tmp_path, capsys):
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"pairs": []}))
    assert run_cli("evaluate", str(manifest), "--out", str(tmp_path / "out")) == 1
    assert "nonempty" in capsys.readouterr().err


def test_evaluate_jsonl_stream(tmp_path):
    rollouts = []
    spec_path = tmp_path / "spec.json"
    for seed in range(4):
        path = tmp_path / f"r{seed}.json"
        run_cli(
            "generate",
            "grasp_drop",
            "--seed",
            str(seed),
            "--out",
            str(path),
            "--spec-out",
            str(spec_path),
            "-q",
        )
        rollouts.append(json.loads(path.read_text()))
    stream = tmp_path / "stream.jsonl"
    stream.write_text("\n".join(json.dumps(r) for r in rollouts) + "\n")
    out = tmp_path / "out"
    code = run_cli(
        "evaluate",
        "--jsonl",
        str(stream),
        "--task-spec",
        str(spec_path),
        "--out",
        str(out),
        "-q",
    )
    assert code == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["n_rollouts"] == 4
    assert doc["overall_violation_rate"]["exact"] == "1/1"


def test_help_enumerates_flags_with_defaults(capsys):
    for argv, expected_flags in [
        (["evaluate", "--help"], ["--out", "--format", "--workers", "--denominator", "--strict-end-of-trace"]),
        (["generate", "--help"], ["--length", "--seed", "--flip-rate", "--corpus", "--out-dir"]),
        (["compile", "--help"], ["--formula", "--template", "--bind", "--format"]),
        (["monitor", "--help"], ["--out", "--stdout", "--strict-end-of-trace"]),
    ]:
        with pytest.raises(SystemExit) as excinfo:
            run_cli(*argv)
        assert excinfo.value.code == 0
        text = capsys.readouterr().out
        for flag in expected_flags:
            assert flag in text, (argv, flag)
        assert "default:" in text
