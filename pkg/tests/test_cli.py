# tests/test_cli.py
import json

import numpy as np
import pytest

from cli import (
    EXIT_BREAKDOWN,
    EXIT_CERTIFICATE,
    EXIT_ERROR,
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_UNBOUNDED,
    EXIT_USAGE,
    SdpCLI,
    exit_code_for,
    load_instance,
)
from core.errors import (
    CertificateFailure,
    Infeasible,
    InvalidInput,
    NumericalBreakdown,
    ParseError,
    Unbounded,
)
from db.documents import InstanceDoc, load_document
from instances.instance import Instance
from sdp.model import StandardFormSDP


@pytest.fixture
def cli(engine):
    return SdpCLI(engine=engine)


def test_exit_code_mapping():
    assert exit_code_for(Infeasible("x")) == EXIT_INFEASIBLE
    assert exit_code_for(Unbounded("x")) == EXIT_UNBOUNDED
    assert exit_code_for(NumericalBreakdown("x")) == EXIT_BREAKDOWN
    assert exit_code_for(InvalidInput("x")) == EXIT_USAGE
    assert exit_code_for(ParseError("x")) == EXIT_USAGE
    assert exit_code_for(CertificateFailure("x")) == EXIT_CERTIFICATE
    assert exit_code_for(RuntimeError("x")) == EXIT_ERROR


def test_usage_errors(cli, capsys):
    assert cli.run([]) == EXIT_USAGE
    with pytest.raises(SystemExit) as excinfo:
        cli.run(["frobnicate"])
    assert excinfo.value.code == EXIT_USAGE
    assert cli.run(["--no-ledger", "gen", "maxcut"]) == EXIT_USAGE


def test_gen_writes_a_reproducible_instance(cli, tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.run(["gen", "z2sync", "--n", "10", "--seed", "3", "--out", str(first)]) == EXIT_OK
    assert cli.run(["gen", "z2sync", "--n", "10", "--seed", "3", "--out", str(second)]) == EXIT_OK

    doc = load_document(first, InstanceDoc)
    assert doc.family == "z2sync"
    assert doc.n == 10

    a, b = json.loads(first.read_text()), json.loads(second.read_text())
    a.pop("created_at")
    b.pop("created_at")
    assert a == b


def test_gen_solve_certify_pipeline(cli, tmp_path, capsys):
    """
    Test the full command pipeline:
    1. Generate a planted instance
    2. Solve it
    3. Certify the stored solution
    4. Check the ledger
    """
    instance = tmp_path / "instance.json"
    solution = tmp_path / "solution.json"
    report = tmp_path / "report.json"

    # Step 1: Generate
    args = ["gen", "simple-from-psd", "--n", "5", "--rank", "2", "--seed", "3", "--out", str(instance)]
    assert cli.run(args) == EXIT_OK

    # Step 2: Solve
    assert cli.run(["solve", str(instance), "--out", str(solution)]) == EXIT_OK
    assert json.loads(solution.read_text())["converged"]

    # Step 3: Certify
    capsys.readouterr()
    assert cli.run(["certify", str(instance), str(solution), "--out", str(report)]) == EXIT_OK
    assert json.loads(report.read_text())["flags"]["simple"]
    assert "rank_p" in capsys.readouterr().out

    # Step 4: History lists both runs
    assert cli.run(["history"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "solve" in out
    assert "certify" in out


def test_certify_rejects_a_foreign_solution(cli, tmp_path):
    first, second, solution = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "sol.json"
    cli.run(["gen", "simple-from-psd", "--n", "5", "--seed", "0", "--out", str(first)])
    cli.run(["gen", "simple-from-psd", "--n", "5", "--seed", "1", "--out", str(second)])
    assert cli.run(["--no-ledger", "solve", str(first), "--out", str(solution)]) == EXIT_OK
    assert cli.run(["--no-ledger", "certify", str(second), str(solution)]) == EXIT_USAGE


def test_infeasible_instance_exit_code(cli, tmp_path):
    sdp = StandardFormSDP.from_triplets(
        np.eye(2), [(0, 0, 0, 1.0), (1, 0, 0, 1.0)], [1.0, 2.0], label="inconsistent"
    )
    path = tmp_path / "infeasible.json"
    path.write_text(Instance(sdp, "simple-from-psd").to_document().model_dump_json(by_alias=True))

    assert load_instance(path).sdp.m == 2
    assert cli.run(["--no-ledger", "solve", str(path)]) == EXIT_INFEASIBLE


def test_malformed_instance_exit_code(cli, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{ not json")
    assert cli.run(["--no-ledger", "solve", str(path)]) == EXIT_USAGE


def test_bm_rejects_rank_below_block_size(cli, tmp_path):
    path = tmp_path / "ocut.json"
    assert cli.run(["gen", "ocut", "--S", "3", "--d", "2", "--out", str(path)]) == EXIT_OK
    assert cli.run(["--no-ledger", "bm", str(path), "--r", "1"]) == EXIT_USAGE


def test_mc_cert_with_full_observation(cli, capsys):
    code = cli.run(["--no-ledger", "mc-cert", "--n", "20", "--rank", "1", "--p", "1.0"])
    assert code == EXIT_OK

    doc = json.loads(capsys.readouterr().out)
    assert doc["kind"] == "golfing"
    assert doc["pass_rate"] == 1.0
    assert doc["trials"][0]["strict_gap_ok"]


def test_table1_labels_gset_files_by_stem(cli, tmp_path, capsys):
    gset = tmp_path / "gset"
    gset.mkdir()
    (gset / "G1.txt").write_text("4 4\n1 2 1\n2 3 1\n3 4 1\n4 1 1\n")

    code = cli.run(["--no-ledger", "table1", "--gset-dir", str(gset), "--graphs", "G1.txt"])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    checks = json.loads(out[out.index("[") :])
    assert [check["graph"] for check in checks] == ["G1"]
