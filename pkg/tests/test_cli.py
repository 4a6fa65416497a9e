import csv
import io
import json

import numpy as np
import pytest

from ebindex import zoo
from ebindex.channels import LinearMap, save_map
from ebindex.cli import EXIT_OK, EXIT_UNDECIDED, EXIT_USAGE, EXIT_VERIFY, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_index_gad(capsys):
    code, rep = run_json(capsys, "index", "--family", "gad", "--p", "0.5", "--gamma", "0.5",
                         "--restarts", "1", "--max-evals", "100")
    assert code == EXIT_OK
    assert rep["n_value"] == 3 and rep["n"]["n"] == 3
    assert rep["closed_form"]["n"] == 3


def test_index_depolarizing(capsys):
    code, rep = run_json(capsys, "index", "--family", "depolarizing", "--lambda", "0.6", "--d", "2",
                         "--restarts", "1", "--max-evals", "200")
    assert code == EXIT_OK
    assert rep["n_value"] == 3
    assert rep["N_U"]["value"] == 3 and rep["N_U"]["exact"]
    assert rep["N_evidence"]["value"] == 3
    assert rep["N_evidence"]["lower_bound_only"] is True


def test_index_gad_pure_image(capsys):
    code, rep = run_json(capsys, "index", "--family", "gad", "--p", "0.5", "--gamma", "1")
    assert code == EXIT_OK
    assert rep["n_value"] == -1 and rep["n"]["value"] == "infinite"
    assert rep["n"]["certificate"]["kind"] == "PURE_STATE_IN_IMAGE"
    assert rep["N_U"]["value"] == "infinite"


def test_index_undecided_exit(capsys):
    # lambda close to one needs more than the cap allows
    code, rep = run_json(capsys, "index", "--family", "depolarizing", "--lambda", "0.99", "--d", "2",
                         "--cap", "4", "--restarts", "1", "--max-evals", "20")
    assert code == EXIT_UNDECIDED
    assert rep["n"]["value"] == "undecided" and rep["n_value"] == -2


def test_index_from_channel_file(tmp_path, capsys):
    path = tmp_path / "c.json"
    save_map(zoo.gad(0.5, 0.5), path)
    code, rep = run_json(capsys, "index", "--channel", str(path), "--restarts", "1", "--max-evals", "50")
    assert code == EXIT_OK and rep["n_value"] == 3


def test_index_malformed_channel_file(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"dim_in": 2}')
    code, _, err = run(capsys, "index", "--channel", str(path))
    assert code == EXIT_USAGE and err.strip()


def test_index_needs_family_or_channel(capsys):
    code, _, err = run(capsys, "index")
    assert code == EXIT_USAGE and err.strip()


def test_index_rejects_out_of_range(capsys):
    code, _, _ = run(capsys, "index", "--family", "gad", "--p", "1.5", "--gamma", "0.5")
    assert code == EXIT_USAGE


def test_unknown_subcommand(capsys):
    code, _, _ = run(capsys, "frobnicate")
    assert code == EXIT_USAGE


def test_scan_gad_points(capsys):
    code, out, _ = run(capsys, "scan-gad")
    assert code == EXIT_OK
    table = rows(out)
    assert table[0] == ["gamma", "p", "n"]
    assert len(table) - 1 == 101 * 101
    vals = {(float(g), float(p)): int(n) for g, p, n in table[1:]}
    assert vals[0.5, 0.1] == 1
    assert vals[0.5, 0.5] == 3
    assert vals[1.0, 0.5] == -1


def test_scan_gad_row_count(capsys):
    code, out, _ = run(capsys, "scan-gad", "--gamma-steps", "7", "--p-steps", "5")
    assert code == EXIT_OK and len(rows(out)) - 1 == 35


def test_scan_gad_grid_bounds(capsys):
    code, _, _ = run(capsys, "scan-gad", "--p-max", "1.5")
    assert code == EXIT_USAGE


def test_scan_depolarizing_steps(capsys):
    code, out, _ = run(capsys, "scan-depolarizing", "--d", "2", "--lambda-min", "0", "--lambda-max", "1",
                       "--lambda-steps", "401")
    assert code == EXIT_OK
    table = rows(out)
    assert table[0] == ["lambda", "n"]
    pts = [(float(a), int(b)) for a, b in table[1:]]
    for lam, n in pts:
        if lam <= 1 / 3:
            assert n == 1
        elif lam <= 3 ** -0.5:
            assert n == 2
    assert pts[-1] == (1.0, -1)
    assert any(n == 3 for _, n in pts)


def test_scan_depolarizing_jump_points(capsys):
    code, out, _ = run(capsys, "scan-depolarizing", "--lambda-min", str(1 / 3), "--lambda-max", str(1 / 3 + 1e-9),
                       "--lambda-steps", "2")
    assert [int(r[1]) for r in rows(out)[1:]] == [1, 2]


def test_scan_output_file(tmp_path, capsys):
    path = tmp_path / "scan.csv"
    code, out, _ = run(capsys, "scan-depolarizing", "--lambda-steps", "5", "--out", str(path))
    assert code == EXIT_OK
    assert rows(path.read_text())[0] == ["lambda", "n"]


@pytest.mark.parametrize("k, expected", [(1, -1 / 24), (0, -1 / 6)])
def test_counterexample_d3(capsys, k, expected):
    code, rep = run_json(capsys, "counterexample", "--d", "3", "--k", str(k), "--samples", "5")
    assert code == EXIT_OK
    assert rep["minor"]["entry0011"][0] == pytest.approx(expected, abs=1e-12)
    assert rep["chain_verdict"] == "NOT_EB"
    assert rep["N_U"] == 2 and rep["noise_applications"] == 2 * k + 1
    assert rep["unitary_futility"]["holds"]


def test_counterexample_d4_k2(capsys):
    code, rep = run_json(capsys, "counterexample", "--d", "4", "--k", "2", "--samples", "5")
    assert code == EXIT_OK
    assert rep["minor"]["entry0011"][0] == pytest.approx(-1 / 972, abs=1e-12)


def test_counterexample_needs_d3(capsys):
    code, _, err = run(capsys, "counterexample", "--d", "2")
    assert code == EXIT_USAGE
    assert "counterexample requires d ≥ 3" in err


def test_filter_search_report(capsys):
    code, rep = run_json(capsys, "filter-search", "--family", "werner", "--eta", "0.5", "--d", "3",
                         "--length", "2", "--restarts", "1", "--max-evals", "50")
    assert code == EXIT_OK
    assert rep["report"]["kind"] == "unitary" and rep["report"]["lower_bound_only"] is True


def test_verify_algebra(capsys):
    code, rep = run_json(capsys, "verify", "--suite", "algebra", "--seed", "7")
    assert code == EXIT_OK and rep["passed"] and rep["failures"] == []


def test_verify_protocols(capsys):
    code, rep = run_json(capsys, "verify", "--suite", "protocols")
    assert code == EXIT_OK and rep["passed"]


def test_verify_unknown_suite(capsys):
    code, _, _ = run(capsys, "verify", "--suite", "nope")
    assert code == EXIT_USAGE


def test_verify_perturbed_channel(tmp_path, capsys):
    choi = np.array(zoo.gad(0.5, 0.3).choi)
    choi[0, 0] += 1e-3
    choi[3, 3] -= 1e-3  # keeps unit trace, breaks trace preservation
    path = tmp_path / "perturbed.json"
    save_map(LinearMap(choi, 2, 2), path)
    code, rep = run_json(capsys, "verify", "--channel", str(path))
    assert code == EXIT_VERIFY
    assert not rep["passed"]
    assert any(f["name"] == "channel.trace_preserving" for f in rep["failures"])


def test_verify_valid_channel(tmp_path, capsys):
    path = tmp_path / "ok.json"
    save_map(zoo.random_channel(2, seed=1), path)
    code, rep = run_json(capsys, "verify", "--channel", str(path))
    assert code == EXIT_OK and rep["passed"]


def test_reports_byte_identical(capsys):
    argv = ("index", "--family", "gad", "--p", "0.6", "--gamma", "0.3", "--restarts", "1", "--max-evals", "80")
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b


def test_scan_thread_count_invariant(capsys, monkeypatch):
    argv = ("scan-gad", "--gamma-steps", "9", "--p-steps", "9")
    monkeypatch.setenv("EBINDEX_THREADS", "1")
    _, one, _ = run(capsys, *argv)
    monkeypatch.setenv("EBINDEX_THREADS", "4")
    _, four, _ = run(capsys, *argv)
    assert one == four


def test_bad_thread_variable(capsys, monkeypatch):
    monkeypatch.setenv("EBINDEX_THREADS", "zero")
    code, _, _ = run(capsys, "scan-gad", "--gamma-steps", "2", "--p-steps", "2")
    assert code == EXIT_USAGE
