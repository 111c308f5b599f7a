import json
import subprocess
import sys

import numpy as np
import pytest

from fracbump.cli import main
from fracbump.dyadic import SparseFamily
from fracbump.grid import Domain, GridFunction


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_young_eval(capsys):
    code, out, _ = run(capsys, "young", "eval", "powerlog(p=2, r=1)", "0", "1", "2")
    data = json.loads(out)
    assert code == 0
    assert data["value"][0] == 0.0
    assert data["value"][1] == pytest.approx(np.log(np.e + 1))
    assert data["value"][2] == pytest.approx(4 * np.log(np.e + 2))


def test_young_inverse_round_trip(capsys):
    _, out, _ = run(capsys, "young", "inverse", "power(p=3)", "8", "27")
    assert json.loads(out)["inverse"] == pytest.approx([2.0, 3.0], rel=1e-12)


def test_young_complement(capsys):
    _, out, _ = run(capsys, "young", "complement", "power(p=2)", "2")
    data = json.loads(out)
    assert data["complement"].startswith("power")
    assert data["value"][0] == pytest.approx(1.0)


def test_young_bp(capsys):
    code, out, _ = run(capsys, "young", "bp", "powerlog(p=2, r=1)", "--p", "3")
    assert code == 0 and json.loads(out)["verdict"] == "InBp"
    _, out, _ = run(capsys, "young", "bp", "powerlog(p=2, r=1)", "--p", "2")
    assert json.loads(out)["verdict"] == "NotInBp"
    assert run(capsys, "young", "bp", "power(p=2)")[0] == 2


def test_sparse_build_and_verify(tmp_path, capsys):
    d = Domain(1, 1.0, 64)
    x = d.axis()
    f = GridFunction(d, 1.0 / (np.abs(x - 0.3) + 1e-3))
    f.to_csv(tmp_path / "f.csv")
    fam = tmp_path / "fam.txt"
    assert run(capsys, "sparse", "build", str(tmp_path / "f.csv"), "--out", str(fam))[0] == 0
    S = SparseFamily.load(fam)
    assert len(S) > 1
    code, out, _ = run(capsys, "sparse", "verify", str(fam))
    data = json.loads(out)
    assert code == 0 and data["cubes"] == len(S) and data["eta"] >= 0.5 and data["sparse_half"]


def test_sparse_verify_docs_example(tmp_path, capsys):
    text = "\n".join([
        "# sparse family", "dim 1", "n_cells 64", "half_width 1.0", "eta 0.625", "cubes 3",
        "0:0", "2:1", "3:5", "certificate",
        "E 0:0 0-15,32-39,48-63", "E 2:1 16-31", "E 3:5 40-47",
    ])
    (tmp_path / "s.txt").write_text(text + "\n")
    code, out, _ = run(capsys, "sparse", "verify", str(tmp_path / "s.txt"))
    assert code == 0 and json.loads(out)["eta"] == pytest.approx(0.625)


def test_bump_json_and_csv(tmp_path, capsys):
    code, out, _ = run(capsys, "bump", "--grid", "32")
    data = json.loads(out)
    assert code == 0 and data["scenario"]["grid"] == 32
    assert set(data["reports"]) == {
        "term_left", "term_right", "thm17", "necessity_left", "necessity_right",
        "log_bump_1", "log_bump_2", "older_condition",
    }
    assert all(np.isfinite(r["sup"]) for r in data["reports"].values())
    code, out, _ = run(capsys, "bump", "--grid", "16", "--format", "csv")
    lines = out.splitlines()
    assert lines[0] == "functional,cube,value" and len(lines) > 8


def test_kernel_writes_out(tmp_path, capsys):
    out = tmp_path / "k.json"
    code, stdout, _ = run(capsys, "kernel", "--q", "4", "--out", str(out))
    assert code == 0 and stdout == ""
    data = json.loads(out.read_text())
    assert data["kind"] == "kernel_sep" and data["passed"]


def test_necessity_and_opnorm(tmp_path, capsys):
    code, out, _ = run(capsys, "necessity", "sparse", "--grid", "64", "--trials", "3")
    assert code == 0 and json.loads(out)["kind"] == "sparse_necessity"
    code, out, _ = run(capsys, "opnorm", "--grid", "32", "--trials", "3", "--format", "csv")
    assert code == 0 and out.startswith("record,field,value")


def test_overrides_apply_over_config(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("kind = kernel_sep\nq = 4\nalpha = 0.5\n")
    _, out, _ = run(capsys, "kernel", str(cfg), "--alpha", "0.25")
    echo = json.loads(out)["scenario"]
    assert echo["alpha"] == 0.25 and echo["q_value"] == 4.0


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("grid = 100\n")
    code, _, err = run(capsys, "opnorm", str(cfg))
    assert code == 2 and "error" in err
    cfg.write_text("nonsense line\n")
    assert run(capsys, "opnorm", str(cfg))[0] == 2
    assert run(capsys, "sparse", "verify", str(tmp_path / "missing.txt"))[0] == 2


def test_bloom_refusal_exit_code(capsys):
    assert run(capsys, "bloom", "--m", "0")[0] == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fracbump", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "0.1.0"


def test_verify_all_exit_code(monkeypatch, capsys):
    from fracbump import cli
    from fracbump.verify import CheckResult

    def fake(echo=None):
        results = [CheckResult("a", True), CheckResult("b", False)]
        for r in results:
            echo(r.line())
        return False, results, "{}"

    monkeypatch.setattr(cli, "verify_all", fake)
    code, out, err = run(capsys, "verify-all")
    assert code == 1 and "FAIL  b" in err and out.strip() == "{}"
    code, out, _ = run(capsys, "verify-all", "--format", "csv")
    assert out.splitlines() == ["check,passed", "a,True", "b,False"]
