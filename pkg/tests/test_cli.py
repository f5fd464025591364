import shutil
from pathlib import Path

import pytest

from dpia.cli import main

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"


@pytest.fixture
def workdir(tmp_path):
    for f in ("dot.dpia", "dottiled.dpia", "dotvec.dpia", "dot.inputs"):
        shutil.copy(PROGRAMS / f, tmp_path / f)
    return tmp_path


def test_compile_pseudo_c(workdir, capsys):
    rc = main(["compile", str(workdir / "dot.dpia"), "--int"])
    assert rc == 0
    out = (workdir / "dot.pseudo.c").read_text()
    assert "parfor" in out
    assert "long" in out


def test_compile_openmp(workdir):
    rc = main(["compile", str(workdir / "dottiled.dpia"),
               "--target", "c-openmp"])
    assert rc == 0
    out = (workdir / "dottiled.c").read_text()
    assert "#pragma omp parallel for" in out


def test_compile_opencl(workdir):
    rc = main(["compile", str(workdir / "dotvec.dpia"),
               "--target", "opencl"])
    assert rc == 0
    out = (workdir / "dotvec.cl").read_text()
    assert "kernel void" in out and "vload4" in out


def test_dump_stages(workdir):
    rc = main(["compile", str(workdir / "dot.dpia"), "--dump-stages"])
    assert rc == 0
    s1 = (workdir / "dot.stage1.dpia").read_text()
    s2 = (workdir / "dot.stage2.dpia").read_text()
    assert "mapI" in s1 and "reduceI" in s1
    assert "parfor" in s2 and "reduceI" not in s2


def test_check_only(workdir, capsys):
    rc = main(["compile", str(workdir / "dot.dpia"), "--check-only"])
    assert rc == 0
    assert "OK" in capsys.readouterr().out
    assert not (workdir / "dot.pseudo.c").exists()


def test_simplify_indices_off(workdir):
    rc = main(["compile", str(workdir / "dottiled.dpia"),
               "--simplify-indices", "off"])
    assert rc == 0
    raw = (workdir / "dottiled.pseudo.c").read_text()
    rc = main(["compile", str(workdir / "dottiled.dpia"),
               "--simplify-indices", "on"])
    cooked = (workdir / "dottiled.pseudo.c").read_text()
    assert len(raw) > len(cooked)  # unsimplified indices are longer


def test_run_with_inputs(workdir, capsys):
    rc = main(["run", str(workdir / "dot.dpia"),
               "--inputs", str(workdir / "dot.inputs"), "--int"])
    assert rc == 0
    assert "out = 120" in capsys.readouterr().out


def test_run_launch_simulation(workdir, capsys, tmp_path):
    data = tmp_path / "vec.inputs"
    xs = list(range(256))
    ys = [1] * 256
    data.write_text(f"xs = {xs}\nys = {ys}\n")
    rc = main(["run", str(workdir / "dotvec.dpia"),
               "--inputs", str(data), "--launch", "2,4", "--int"])
    assert rc == 0
    assert "out = [" in capsys.readouterr().out


def test_run_missing_input(workdir, tmp_path, capsys):
    data = tmp_path / "partial.inputs"
    data.write_text("xs = [1, 2, 3, 4, 5, 6, 7, 8]\n")
    rc = main(["run", str(workdir / "dot.dpia"), "--inputs", str(data)])
    assert rc == 2
    assert "missing input" in capsys.readouterr().err


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.dpia"
    bad.write_text("(param xs (exp (array 8 num))\nxs")
    assert main(["compile", str(bad)]) == 2


def test_type_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.dpia"
    bad.write_text("(param xs (exp (array 8 num)))\n(+ xs 1)")
    assert main(["compile", str(bad)]) == 3
    assert "type error" in capsys.readouterr().err


def test_racy_parfor_file_rejected(tmp_path, capsys):
    src = ("(param out (acc (array 4 num)))\n"
           "(param b (acc num))\n"
           "(parfor out (lam (i (exp (idx 4)))"
           " (lam (o (acc num)) (:= b 1))))")
    bad = tmp_path / "racy.dpia"
    bad.write_text(src)
    assert main(["compile", str(bad)]) == 3
    err = capsys.readouterr().err
    assert "'b'" in err and "passive" in err


def test_missing_file(capsys):
    assert main(["compile", "no-such-file.dpia"]) == 2


def test_fuzz_subcommand(capsys):
    rc = main(["fuzz", "--seeds", "10"])
    assert rc == 0
    assert "10/10 passed" in capsys.readouterr().out
