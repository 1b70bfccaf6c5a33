import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from symtensor.bipart import Bipartition
from symtensor.cli import main
from symtensor.layer import EquivariantLayer
from symtensor.maplabel import Kernel, evaluate_compressed
from symtensor.symidx import SymmetricTensor


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestCount:
    def test_table_entry(self, capsys):
        code, out, err = run(capsys, "count", "--k", "5", "--l", "5")
        assert code == 0 and out == "339\n"
        assert err.startswith("# symtensor") and "seed=0" in err and '"count"' in err

    def test_bounded(self, capsys):
        assert run(capsys, "count", "--k", "2", "--l", "1", "--n", "3")[1] == "4\n"

    def test_32_at_three_blocks(self, capsys):
        assert run(capsys, "count", "--k", "3", "--l", "2", "--n", "3")[1] == "12\n"


class TestUsage:
    @pytest.mark.parametrize(
        "argv",
        [[], ["frobnicate"], ["count", "--k", "1"], ["count", "--k", "1", "--l", "1", "--bogus"], ["matrix", "--k", "1", "--l", "1"]],
    )
    def test_usage_errors(self, argv, capsys):
        assert main(argv) == 2

    def test_runtime_error(self, capsys, tmp_path):
        code, _, err = run(capsys, "apply", "--kernel", str(tmp_path / "none.json"), "--tensor", str(tmp_path / "t.json"))
        assert code == 1 and "error:" in err

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "symtensor", "count", "--k", "1", "--l", "1"], capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stdout == "2\n"


class TestMatrix:
    def test_deep_sets(self, capsys):
        code, out, _ = run(capsys, "matrix", "--k", "1", "--l", "1", "--n", "4", "--basis", "diagram", "--format", "json")
        mats = [np.array(m["matrix"]) for m in json.loads(out)]
        np.testing.assert_array_equal(mats[0], np.eye(4))
        np.testing.assert_array_equal(mats[1], np.ones((4, 4)))

    def test_orbit_csv(self, capsys):
        _, out, _ = run(capsys, "matrix", "--k", "2", "--l", "1", "--n", "3", "--basis", "orbit")
        rows = [r for r in csv.reader(io.StringIO(out)) if not r[0].startswith("#")]
        assert len(rows) == 12 and rows[3] == ["0", "0", "0", "1", "0", "1"]

    def test_unroll_and_weights(self, capsys, tmp_path):
        ckpt = tmp_path / "w.json"
        ckpt.write_text(EquivariantLayer(2, 1, [1.0, 2.0, 3.0, 4.0]).to_json())
        _, out, _ = run(capsys, "matrix", "--k", "2", "--l", "1", "--n", "3", "--weights", str(ckpt), "--unroll", "--format", "json")
        (m,) = json.loads(out)
        assert np.array(m["matrix"]).shape == (3, 9)
        assert m["matrix"][0][0] == 10.0


class TestCompileApply:
    def test_roundtrip_bit_exact(self, capsys, tmp_path, rng):
        kpath, tpath = tmp_path / "k.json", tmp_path / "t.json"
        code, _, _ = run(capsys, "compile", "--k", "3", "--l", "1", "--diagram", "0,1;2,0;1,0", "--simplify", "--out", str(kpath))
        assert code == 0
        T = SymmetricTensor.random(5, 3, rng)
        tpath.write_text(T.to_json())
        _, out, _ = run(capsys, "apply", "--kernel", str(kpath), "--tensor", str(tpath))
        got = SymmetricTensor.from_json(out)
        ker = Kernel.from_json(kpath.read_text())
        expect = evaluate_compressed(ker, T.values[None], 5)[0]
        assert got.values.tobytes() == expect.tobytes()
        assert ker.simplified and ker.diagram == Bipartition([(0, 1), (2, 0), (1, 0)])

    def test_all_kernels(self, capsys, tmp_path, rng):
        kpath, tpath = tmp_path / "k.json", tmp_path / "t.json"
        run(capsys, "compile", "--k", "2", "--l", "1", "--out", str(kpath))
        assert len(json.loads(kpath.read_text())) == 4
        tpath.write_text(SymmetricTensor.random(3, 2, rng).to_json())
        _, out, _ = run(capsys, "apply", "--kernel", str(kpath), "--tensor", str(tpath))
        assert len(json.loads(out)) == 4

    def test_mismatched_order(self, capsys, tmp_path, rng):
        kpath, tpath = tmp_path / "k.json", tmp_path / "t.json"
        run(capsys, "compile", "--k", "2", "--l", "1", "--diagram", "2,1", "--out", str(kpath))
        tpath.write_text(SymmetricTensor.random(3, 3, rng).to_json())
        assert run(capsys, "apply", "--kernel", str(kpath), "--tensor", str(tpath))[0] == 1

    def test_wrong_diagram_shape(self, capsys):
        assert run(capsys, "compile", "--k", "2", "--l", "2", "--diagram", "2,1")[0] == 1

    def test_enumerate(self, capsys):
        _, out, _ = run(capsys, "enumerate", "--k", "2", "--l", "1", "--n", "3")
        lines = out.splitlines()
        assert len(lines) == 4 and json.loads(lines[0]) == {"blocks": [[2, 1]]}


class TestTrainAndEval:
    def test_train_outputs_byte_stable(self, capsys, tmp_path):
        argv = ["train", "--task", "equivariant", "--n", "4", "--count", "200", "--epochs", "2", "--lr", "1e-3", "--seed", "3"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(capsys, *argv, "--out", str(a))[0] == 0
        assert run(capsys, *argv, "--out", str(b))[0] == 0
        names = sorted(p.name for p in a.iterdir())
        assert names == sorted(p.name for p in b.iterdir())
        assert "summary.json" in names and "checkpoint_equivariant_f1.json" in names
        for name in names:
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_generalise(self, capsys, tmp_path):
        layer = EquivariantLayer(3, 1)
        layer.lambdas[layer.diagrams.index(Bipartition([(3, 1)]))] = 1.0
        ckpt = tmp_path / "c.json"
        ckpt.write_text(layer.to_json())
        _, out, _ = run(capsys, "generalise", "--ckpt", str(ckpt), "--n-list", "5,6", "--count", "20")
        assert out == "n,test_mse\n5,0.0\n6,0.0\n"

    def test_bench(self, capsys):
        code, out, _ = run(capsys, "bench", "--k", "1", "--l", "1", "--n", "4", "--reps", "2", "--threads", "1")
        assert code == 0 and out.startswith("k,l,n")

    def test_threads_env(self, capsys, monkeypatch):
        monkeypatch.setenv("SYMTENSOR_THREADS", "1")
        assert run(capsys, "count", "--k", "1", "--l", "0")[1] == "1\n"


def test_selfcheck(capsys):
    code, out, _ = run(capsys, "selfcheck")
    assert code == 0
    assert out.count("PASS") == 5 and "FAIL" not in out
