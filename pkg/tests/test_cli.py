import json

import numpy as np
import pytest

from refractorlens import IntensityImage, write_pgm
from refractorlens.cli import main, read_coefficients


def run(args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    out = tmp_path_factory.mktemp("solved")
    code = run(["solve", "--uniform", "--n", 1, "--M", 20, "--kappa", 0.5,
                "--eps", 0.025, "--out", out])
    assert code == 0
    return out


class TestSolve:
    def test_outputs_exist(self, solved):
        for name in ("coefficients.csv", "trace.csv", "report.txt",
                     "manifest.json"):
            assert (solved / name).exists()

    def test_coefficient_csv_layout(self, solved):
        lines = (solved / "coefficients.csv").read_text().splitlines()
        assert lines[0] == "index,r,rp,b_i"
        assert len(lines) == 5  # header + 4 targets
        b = read_coefficients(solved / "coefficients.csv")
        assert b[0] == 1.0

    def test_manifest_records_run(self, solved):
        manifest = json.loads((solved / "manifest.json").read_text())
        assert manifest["command"] == "solve"
        assert manifest["epsilon"] == 0.025
        assert manifest["n"] == 1 and manifest["M"] == 20

    def test_missing_image_is_usage_error(self, tmp_path):
        code = run(["solve", "--image", tmp_path / "absent.pgm",
                    "--n", 1, "--M", 10, "--out", tmp_path / "o"])
        assert code == 2

    def test_delta_out_of_range_is_usage_error(self, tmp_path):
        code = run(["solve", "--uniform", "--n", 1, "--M", 10,
                    "--delta", 0.5, "--out", tmp_path / "o"])
        assert code == 2

    def test_determinism(self, solved, tmp_path):
        out2 = tmp_path / "again"
        code = run(["solve", "--uniform", "--n", 1, "--M", 20,
                    "--kappa", 0.5, "--eps", 0.025, "--out", out2])
        assert code == 0
        assert (out2 / "coefficients.csv").read_bytes() == \
            (solved / "coefficients.csv").read_bytes()


class TestRenderExport:
    def test_render(self, solved, tmp_path):
        out = tmp_path / "render"
        code = run(["render", "--n", 1, "--M", 20, "--kappa", 0.5,
                    "--coeffs", solved / "coefficients.csv", "--out", out])
        assert code == 0
        assert (out / "render.pgm").exists()
        lines = (out / "errors.csv").read_text().splitlines()
        assert lines[0] == "index,prescribed,achieved,relative_error"
        assert len(lines) == 5

    def test_render_unsolved_vector_emits_table(self, solved, tmp_path):
        # arbitrary coefficients still render; no certificate is claimed
        path = tmp_path / "raw.csv"
        path.write_text("index,r,rp,b_i\n0,-1,-1,1\n1,-1,1,1.4\n"
                        "2,1,-1,0.9\n3,1,1,1.1\n")
        out = tmp_path / "render_raw"
        code = run(["render", "--n", 1, "--M", 20, "--kappa", 0.5,
                    "--coeffs", path, "--out", out])
        assert code == 0
        assert (out / "errors.csv").exists()

    def test_render_size_mismatch(self, solved, tmp_path):
        code = run(["render", "--n", 2, "--M", 20, "--kappa", 0.5,
                    "--coeffs", solved / "coefficients.csv",
                    "--out", tmp_path / "o"])
        assert code == 2

    def test_export_obj(self, solved, tmp_path):
        out = tmp_path / "mesh"
        code = run(["export", "--n", 1, "--M", 20, "--kappa", 0.5,
                    "--coeffs", solved / "coefficients.csv",
                    "--format", "obj", "--out", out])
        assert code == 0
        text = (out / "lens.obj").read_text().splitlines()
        assert sum(l.startswith("v ") for l in text) == 41 ** 2
        assert sum(l.startswith("f ") for l in text) == 2 * 40 ** 2


class TestRefine:
    def test_schedule(self, tmp_path):
        out = tmp_path / "refine"
        code = run(["refine", "--schedule", "1,2", "--M", 20,
                    "--kappa", 0.5, "--out", out])
        assert code == 0
        assert (out / "residuals.csv").exists()
        lines = (out / "coefficients.csv").read_text().splitlines()
        assert len(lines) == 10  # header + 9 coefficients at n=2

    def test_image_targets(self, tmp_path):
        img_path = tmp_path / "target.pgm"
        rng = np.random.default_rng(0)
        write_pgm(img_path,
                  IntensityImage(0.3 + 0.7 * rng.random((8, 8))))
        out = tmp_path / "img_refine"
        code = run(["refine", "--image", img_path, "--schedule", "1,2",
                    "--M", 20, "--kappa", 0.5, "--out", out])
        assert code == 0


class TestVerify:
    def test_single_suite_passes(self, capsys):
        code = run(["verify", "--suite", "lemma31", "--trials", 10,
                    "--seed", 7])
        assert code == 0
        assert "lemma31: pass" in capsys.readouterr().out

    def test_deterministic_under_seed(self, capsys):
        run(["verify", "--suite", "cache", "--trials", 5, "--seed", 3])
        first = capsys.readouterr().out
        run(["verify", "--suite", "cache", "--trials", 5, "--seed", 3])
        assert capsys.readouterr().out == first


class TestScaling:
    def test_csv_layout_and_fit(self, tmp_path):
        out = tmp_path / "scaling"
        code = run(["scaling", "--n-min", 1, "--n-max", 2, "--M", 15,
                    "--out", out])
        assert code == 0
        lines = (out / "scaling.csv").read_text().splitlines()
        assert lines[0] == "N,nu,tau_seconds"
        assert len(lines) == 3
        assert (out / "fit.txt").read_text().startswith("exponent=")
