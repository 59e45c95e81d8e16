"""End-to-end CLI behavior through main(); exit codes, schemas, determinism."""

import json
import math

import numpy as np
import pytest

from dpme.cli import load_csv, main
from dpme.errors import DataError


def write_csv(path, rows, header=None):
    lines = ([header] if header else []) + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture()
def small_csv(tmp_path):
    rng = np.random.default_rng(0)
    pts = np.concatenate([rng.normal(-3, 1, 60), rng.normal(3, 1, 30)])
    return write_csv(tmp_path / "data.csv", [[float(v)] for v in pts])


# ---------------------------------------------------------------- load_csv


def test_load_csv_with_header(tmp_path):
    path = write_csv(tmp_path / "d.csv", [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], header="x,y")
    data = load_csv(path, has_header=True)
    assert data.m == 3 and data.d == 2
    assert data.points[1, 1] == 4.0


def test_load_csv_ragged_row_named(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("1,2\n3\n", encoding="utf-8")
    with pytest.raises(DataError) as err:
        load_csv(p)
    assert "row 2" in str(err.value)


def test_load_csv_non_numeric_cell_named(tmp_path):
    p = tmp_path / "n.csv"
    p.write_text("1,2\n3,oops\n", encoding="utf-8")
    with pytest.raises(DataError) as err:
        load_csv(p)
    msg = str(err.value)
    assert "row 2" in msg and "column 2" in msg and "oops" in msg


def test_load_csv_empty_file(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("", encoding="utf-8")
    with pytest.raises(DataError):
        load_csv(p)


def test_load_csv_header_only(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("x,y\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_csv(p, has_header=True)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_csv(tmp_path / "nope.csv")


def test_load_csv_crlf_and_whitespace(tmp_path):
    p = tmp_path / "w.csv"
    p.write_bytes(b"1, 2\r\n3,4\r\n")
    data = load_csv(p)
    assert data.points.tolist() == [[1.0, 2.0], [3.0, 4.0]]


# --------------------------------------------------------------------- fit


FIT_KEYS = [
    "manifest",
    "weights",
    "atoms",
    "mmd2",
    "objective",
    "kkt_residual",
    "converged",
    "effective_T",
    "truncation_bound",
]


def test_fit_writes_schema_stable_json(small_csv, tmp_path):
    out = tmp_path / "fit.json"
    code = main(
        ["fit", "--data", small_csv, "--alpha", "1.0", "--trunc", "3",
         "--atoms", "kmeans", "--seed", "0", "--out", str(out)]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert list(doc) == FIT_KEYS
    assert doc["manifest"]["command"] == "fit"
    assert doc["manifest"]["seed"] == 0
    assert len(doc["manifest"]["input_digest"]) == 64
    assert len(doc["weights"]) == 3
    assert sum(doc["weights"]) == pytest.approx(1.0, abs=1e-9)
    assert len(doc["atoms"]["means"]) == 3
    assert doc["mmd2"] >= 0.0


def test_fit_assign_flag_appends_keys(small_csv, tmp_path):
    out = tmp_path / "fit.json"
    code = main(
        ["fit", "--data", small_csv, "--alpha", "1.0", "--trunc", "2",
         "--seed", "0", "--out", str(out), "--assign"]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert list(doc) == FIT_KEYS + ["assignments", "flagged_rows"]
    assert len(doc["assignments"]) == 90
    assert doc["flagged_rows"] == []


def test_fit_trunc_one_unit_weight(small_csv, tmp_path):
    out = tmp_path / "fit.json"
    assert main(["fit", "--data", small_csv, "--alpha", "1.0", "--trunc", "1",
                 "--seed", "0", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["weights"] == [1.0]


def test_fit_byte_identical_reruns(small_csv, tmp_path):
    args = ["fit", "--data", small_csv, "--alpha", "0.8", "--delta", "0.05",
            "--atoms", "subsample", "--seed", "7"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_fit_header_flag(tmp_path):
    path = write_csv(tmp_path / "h.csv", [[float(i)] for i in range(20)], header="x")
    out = tmp_path / "fit.json"
    assert main(["fit", "--data", path, "--alpha", "1.0", "--trunc", "2",
                 "--header", "--seed", "0", "--out", str(out)]) == 0


def test_fit_missing_data_file_exits_3(tmp_path):
    code = main(["fit", "--data", str(tmp_path / "gone.csv"), "--alpha", "1.0",
                 "--trunc", "2", "--seed", "0", "--out", str(tmp_path / "o.json")])
    assert code == 3


def test_fit_ragged_data_exits_3(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("1,2\n3\n", encoding="utf-8")
    code = main(["fit", "--data", str(p), "--alpha", "1.0", "--trunc", "2",
                 "--seed", "0", "--out", str(tmp_path / "o.json")])
    assert code == 3


def test_fit_bad_alpha_exits_2(small_csv, tmp_path):
    code = main(["fit", "--data", small_csv, "--alpha", "-1.0", "--trunc", "2",
                 "--seed", "0", "--out", str(tmp_path / "o.json")])
    assert code == 2


def test_fit_trunc_and_delta_conflict(small_csv, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--data", small_csv, "--alpha", "1.0", "--trunc", "2",
              "--delta", "0.1", "--seed", "0", "--out", str(tmp_path / "o.json")])
    assert exc.value.code == 2


def test_fit_missing_required_flag_exits_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--alpha", "1.0", "--out", str(tmp_path / "o.json")])
    assert exc.value.code == 2


def test_unwritable_output_exits_1(small_csv, tmp_path):
    code = main(["fit", "--data", small_csv, "--alpha", "1.0", "--trunc", "2",
                 "--seed", "0", "--out", str(tmp_path / "no_dir" / "o.json")])
    assert code == 1


# ------------------------------------------------------------------ sample


def test_sample_zero_points_valid_sidecar(tmp_path):
    out = tmp_path / "pts.csv"
    assert main(["sample", "--alpha", "1.0", "--trunc", "4", "--n", "0",
                 "--dim", "2", "--seed", "0", "--out", str(out)]) == 0
    assert out.read_bytes() == b""
    side = json.loads((tmp_path / "pts.csv.json").read_text())
    assert list(side) == ["manifest", "weights", "tail_mass", "atoms"]
    assert len(side["weights"]) == 4
    assert 0.0 <= side["tail_mass"] <= 1.0
    assert sum(side["weights"]) + side["tail_mass"] == pytest.approx(1.0, abs=1e-12)


def test_sample_trunc_one_clt(tmp_path):
    out = tmp_path / "pts.csv"
    n = 4000
    assert main(["sample", "--alpha", "1.0", "--trunc", "1", "--n", str(n),
                 "--dim", "1", "--seed", "3", "--out", str(out)]) == 0
    side = json.loads((tmp_path / "pts.csv.json").read_text())
    atom_mean = side["atoms"]["means"][0][0]
    pts = np.loadtxt(out, delimiter=",").reshape(-1)
    assert pts.shape == (n,)
    # all points from one unit-variance Gaussian around the drawn atom
    assert abs(pts.mean() - atom_mean) <= 4.0 / math.sqrt(n)


def test_sample_deterministic_files(tmp_path):
    args = ["sample", "--alpha", "2.0", "--trunc", "5", "--n", "50",
            "--dim", "3", "--seed", "11"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.csv.json").read_bytes() == (tmp_path / "b.csv.json").read_bytes()


def test_sample_base_measure_flags(tmp_path):
    out = tmp_path / "pts.csv"
    assert main(["sample", "--alpha", "1.0", "--trunc", "1", "--n", "2000",
                 "--dim", "2", "--mean0", "100", "--tau2", "0.01",
                 "--comp-cov", "0.5,2.0", "--seed", "0", "--out", str(out)]) == 0
    side = json.loads((tmp_path / "pts.csv.json").read_text())
    assert side["manifest"]["config"]["mean0"] == [100.0, 100.0]
    assert side["manifest"]["config"]["comp_cov"] == [0.5, 2.0]
    pts = np.loadtxt(out, delimiter=",")
    assert abs(pts[:, 0].mean() - 100.0) < 1.0  # atoms sit near mean0
    assert pts[:, 1].var() == pytest.approx(2.0, rel=0.2)


def test_sample_bad_comp_cov_exits_2(tmp_path):
    code = main(["sample", "--alpha", "1.0", "--trunc", "1", "--n", "5",
                 "--dim", "3", "--comp-cov", "0.5,2.0", "--seed", "0",
                 "--out", str(tmp_path / "p.csv")])
    assert code == 2  # 2 entries for dim 3


def test_sample_negative_n_exits_2(tmp_path):
    assert main(["sample", "--alpha", "1.0", "--trunc", "1", "--n", "-1",
                 "--dim", "1", "--seed", "0", "--out", str(tmp_path / "p.csv")]) == 2


# -------------------------------------------------------- check-truncation


def test_check_truncation_table(capsys):
    assert main(["check-truncation", "--alpha", "1.0", "--delta", "1e-4"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["trunc", "10"]
    assert float(lines[1].split()[1]) == pytest.approx(math.exp(-10.0))
    assert float(lines[2].split()[1]) == pytest.approx(0.5**10)


def test_check_truncation_json_keys(capsys):
    assert main(["check-truncation", "--alpha", "1.0", "--delta", "1e-4", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert list(doc) == ["trunc", "bound", "exact_tail"]
    assert doc["trunc"] == 10


def test_check_truncation_custom_c(capsys):
    assert main(["check-truncation", "--alpha", "1.0", "--delta", "0.5",
                 "--c", "0.25", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["trunc"] == 1


def test_check_truncation_bad_delta_exits_2(capsys):
    assert main(["check-truncation", "--alpha", "1.0", "--delta", "0"]) == 2


# ---------------------------------------------------------------- validate


def test_validate_qp_suite_passes(tmp_path):
    out = tmp_path / "report.json"
    assert main(["validate", "--suite", "qp", "--seed", "0", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert list(doc) == ["manifest", "suites", "passed"]
    assert doc["passed"] is True
    assert doc["suites"][0]["suite"] == "qp"
    assert all(c["passed"] for c in doc["suites"][0]["checks"])


def test_validate_stdout_when_no_out_flag(capsys):
    assert main(["validate", "--suite", "qp", "--seed", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["manifest"]["config"]["suite"] == "qp"


def test_validate_unknown_suite_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["validate", "--suite", "bogus"])
    assert exc.value.code == 2
