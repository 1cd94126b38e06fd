import json

import pytest

from cli import build_parser, parse_law_file, report_rows, run
from api.v1.exceptions.cli import LawFileIoException, LawFileParseException
from api.v1.exceptions.offspring import MassSumMismatchException
from api.v1.schemas.offspring import LawKind
from api.v1.schemas.reports import LedgerEntry, VerifyLedger
from core.utils import dumps_json


def test_parse_law_file(write_law, lf_law_file):
    law = parse_law_file(write_law(lf_law_file))
    assert law.kind == LawKind.linear_fractional
    assert law.lf_b == 0.2


def test_parse_law_file_missing(tmp_path):
    with pytest.raises(LawFileIoException):
        parse_law_file(tmp_path / "absent.json")


def test_parse_law_file_malformed_json(write_law):
    with pytest.raises(LawFileParseException) as exc_info:
        parse_law_file(write_law('{"type": "pmf", "p": [0.5, 0.5'))
    assert "line 1" in str(exc_info.value)


def test_parse_law_file_rejects_nan(write_law):
    with pytest.raises(LawFileParseException):
        parse_law_file(write_law('{"type": "pmf", "p": [NaN, 0.5]}'))


def test_parse_law_file_reports_field(write_law):
    with pytest.raises(LawFileParseException) as exc_info:
        parse_law_file(write_law({"type": "linear_fractional", "b": 0.2}))
    assert "Field required" in str(exc_info.value)


def test_parse_law_file_validates_masses(write_law):
    with pytest.raises(MassSumMismatchException):
        parse_law_file(write_law({"type": "pmf", "p": [1.0, 0.0, 3.0]}))
    law = parse_law_file(write_law({"type": "pmf", "p": [1.0, 0.0, 3.0]}), renormalize=True)
    assert law.probs == pytest.approx((0.25, 0.0, 0.75))


def test_parser_defaults():
    args = build_parser().parse_args(["qprocess", "law.json"])
    assert args.steps == 10
    assert args.start == 1
    assert args.format == "json"
    args = build_parser().parse_args(["invariant", "law.json", "--mode", "empirical", "--s", "0,0.25"])
    assert args.mode == "empirical"
    assert args.s_points == [0.0, 0.25]


def test_limit_json(capsys, write_law, lf_law_file):
    assert run(["limit", write_law(lf_law_file)]) == 0
    body = json.loads(capsys.readouterr().out)
    assert body["K_hat"] == pytest.approx(1.0 / 6.0, rel=1e-8)


def test_json_output_is_stable(capsys, write_law, supercritical_law_file):
    path = write_law(supercritical_law_file)
    assert run(["bounds", path, "--n-max", "30"]) == 0
    first = capsys.readouterr().out
    assert run(["bounds", path, "--n-max", "30"]) == 0
    assert capsys.readouterr().out == first


@pytest.mark.parametrize(
    "command, options",
    [
        ("analyze", ["--n-max", "30"]),
        ("bounds", ["--n-max", "30"]),
        ("simulate", ["--n", "4", "--reps", "3000", "--seed", "5"]),
    ],
)
def test_json_output_round_trips_byte_for_byte(capsys, write_law, supercritical_law_file, command, options):
    run([command, write_law(supercritical_law_file), *options])
    out = capsys.readouterr().out
    assert dumps_json(json.loads(out)) == out


@pytest.mark.parametrize(
    "body",
    [
        {"type": "pmf", "p": ["0.5", True, 0.25]},
        {"type": "pmf", "p": [0.25, False, 0.75]},
        {"type": "linear_fractional", "b": "0.2", "c": 0.5},
    ],
)
def test_parse_law_file_rejects_non_numbers(write_law, body):
    with pytest.raises(LawFileParseException):
        parse_law_file(write_law(body))


def test_parse_law_file_accepts_integer_masses(write_law):
    law = parse_law_file(write_law({"type": "pmf", "p": [1, 0, 3]}), renormalize=True)
    assert law.probs == pytest.approx((0.25, 0.0, 0.75))


def test_non_numeric_mass_exit_code(capsys, write_law):
    assert run(["limit", write_law({"type": "pmf", "p": ["0.5", True, 0.25]})]) == 1


def test_limit_csv_on_non_convergence(capsys, write_law, dual_law_file):
    assert run(["limit", write_law(dual_law_file), "--format", "csv", "--s", "0", "--n-max", "4"]) == 2
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "s,n,f_n,R_n,beta_n_over_R_n"
    assert len(lines) == 6


def test_invariant_table(capsys, write_law, supercritical_law_file):
    assert run(["invariant", write_law(supercritical_law_file), "--format", "table", "--j-max", "40"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["j", "nu", "pi"]
    assert len(lines) == 42


def test_out_writes_file(capsys, tmp_path, write_law, lf_law_file):
    target = tmp_path / "report.json"
    assert run(["limit", write_law(lf_law_file), "--out", str(target)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(target.read_text())["converged"] is True


def test_invalid_law_exit_code(capsys, write_law):
    assert run(["limit", write_law({"type": "pmf", "p": [0.5, -0.1, 0.7]})]) == 1
    assert "negative" in capsys.readouterr().err


def test_missing_file_exit_code(capsys, tmp_path):
    assert run(["limit", str(tmp_path / "absent.json")]) == 1


def test_critical_law_exit_code(capsys, write_law):
    assert run(["limit", write_law({"type": "pmf", "p": [0.5, 0.0, 0.5]})]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate", "law.json"],
        ["limit"],
        ["limit", "law.json", "--format", "xml"],
        ["limit", "law.json", "--seed", "-3"],
        ["invariant", "law.json", "--mode", "sometimes"],
    ],
)
def test_usage_errors(capsys, argv):
    assert run(argv) == 3


def test_qprocess_start_must_be_positive(capsys, write_law, supercritical_law_file):
    assert run(["qprocess", write_law(supercritical_law_file), "--i", "0"]) == 3


def test_simulate_reps_must_be_positive(capsys, write_law, supercritical_law_file):
    assert run(["simulate", write_law(supercritical_law_file), "--reps", "0"]) == 3


def test_simulate_is_reproducible(capsys, write_law, supercritical_law_file):
    argv = ["simulate", write_law(supercritical_law_file), "--n", "4", "--reps", "3000", "--seed", "21"]
    assert run(argv) == 0
    first = capsys.readouterr().out
    assert run(argv) == 0
    assert capsys.readouterr().out == first


def test_verify_exit_code(capsys, write_law, dual_law_file):
    assert run(["verify", write_law(dual_law_file), "--format", "csv"]) == 0
    header = capsys.readouterr().out.splitlines()[0]
    assert header.startswith("name,residual,threshold,passed")


def test_report_rows_fallback():
    rows = report_rows("simulate", {"a": {"b": 1.5}})
    assert rows == [{"key": "a.b", "value": 1.5}]


def test_failed_ledger_exit_code(mocker, capsys, write_law, dual_law_file):
    entry = LedgerEntry(name="q_row_sums", residual=1e-3, threshold=1e-9, passed=False)
    mocker.patch(
        "cli.ReportService.verify", return_value=VerifyLedger(law_echo={}, entries=[entry], passed=False)
    )
    assert run(["verify", write_law(dual_law_file)]) == 2
    assert json.loads(capsys.readouterr().out)["entries"][0]["passed"] is False
