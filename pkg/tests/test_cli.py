import numpy as np
import pytest

from jointsparse.cli import ERROR_COLUMNS, TELEMETRY_COLUMNS, main, read_telemetry
from jointsparse.imageio import read_pnm, rgb_to_yiq, synthetic_color_image, write_pnm

DEMO_PARAMS = """
q = inf
omega = 0.05
theta = 10
rho_base = 20
rho_exponent = 1
n_max = 15
inner_iters = 7
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def files_bytes(folder):
    return {p.name: p.read_bytes() for p in sorted(folder.iterdir())}


@pytest.fixture
def problem_cfg(tmp_path):
    """Generate a small problem and return a config text pointing at it."""
    def make(extra="", sparsity=4):
        gen = write_cfg(tmp_path, f"n_indices = 24\nn_channels = 2\nn_blocks = 2\nrows = 12\n"
                                  f"sparsity = {sparsity}\n", "gen.cfg")
        assert main(["gen", "--config", gen, "--out", str(tmp_path / "p"), "--seed", "4"]) == 0
        return f"problem = p/problem.npz\n{extra}"
    return make


# --- gen / solve ---------------------------------------------------------------------

def test_gen_is_byte_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["gen", "--seed", "7", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a/problem.npz").read_bytes() == (tmp_path / "b/problem.npz").read_bytes()
    main(["gen", "--seed", "8", "--out", str(tmp_path / "c")])
    assert (tmp_path / "a/problem.npz").read_bytes() != (tmp_path / "c/problem.npz").read_bytes()


def test_gen_infeasible_is_usage_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "n_indices = 4\nsparsity = 9\n")
    assert main(["gen", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "infeasible" in capsys.readouterr().err


def test_solve_zero_data(tmp_path, problem_cfg):
    cfg = write_cfg(tmp_path, problem_cfg("q = 2\ntheta = 20\nrho_base = 0.3\ninner_iters = 5\n", 0))
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    _, header, rows = read_telemetry(tmp_path / "s/telemetry.csv")
    assert tuple(header) == TELEMETRY_COLUMNS
    assert all(abs(r[2]) < 1e-12 for r in rows)
    u = np.loadtxt(tmp_path / "s/u.csv", delimiter=",", skiprows=1)
    v = np.loadtxt(tmp_path / "s/v.csv", delimiter=",", skiprows=1)
    assert np.all(u[:, 1:] == 0) and np.all(v[:, 1] == 0.3)


def test_solve_echoes_demo_parameters(tmp_path, problem_cfg):
    cfg = write_cfg(tmp_path, problem_cfg(DEMO_PARAMS))
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    meta, _, _ = read_telemetry(tmp_path / "s/telemetry.csv")
    expected = dict(q="inf", omega="0.05", theta="10.0", rho_base="20.0", rho_exponent="1.0",
                    n_max="15", inner_iters="7", L="7")
    assert {k: meta[k] for k in expected} == expected


def test_telemetry_format(tmp_path, problem_cfg):
    cfg = write_cfg(tmp_path, problem_cfg("q = 2\ntheta = 20\nrho_base = 0.1\ninner_iters = 10\n"))
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    raw = (tmp_path / "s/telemetry.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    body = [ln for ln in raw.decode().splitlines() if not ln.startswith("#")]
    assert body[0] == ",".join(TELEMETRY_COLUMNS)
    for line in body[1:]:
        cells = line.split(",")
        assert len(cells) == 6
        [float(c) for c in cells]
    meta, _, rows = read_telemetry(tmp_path / "s/telemetry.csv")
    assert [(int(r[0]), int(r[1])) for r in rows[:3]] == [(0, 1), (0, 2), (0, 3)]
    assert float(meta["alpha"]) < 1 and float(meta["beta"]) < 1


def test_solve_rerun_is_identical(tmp_path, problem_cfg):
    cfg = write_cfg(tmp_path, problem_cfg("q = 2\ntheta = 20\nrho_base = 0.1\ninner_iters = 10\n"))
    for d in ("r1", "r2"):
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / d)]) == 0
    assert files_bytes(tmp_path / "r1") == files_bytes(tmp_path / "r2")


def test_solve_rejects_non_convex_parameters(tmp_path, problem_cfg, capsys):
    cfg = write_cfg(tmp_path, problem_cfg("q = 1\ntheta = 10\nomega = 0.05\ninner_iters = 3\n"))
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "s")]) == 3
    assert "index" in capsys.readouterr().err


def test_solve_without_problem(tmp_path):
    assert main(["solve", "--out", str(tmp_path)]) == 2


def test_unknown_key_is_usage_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "colour = x.ppm\n")
    assert main(["demo-color", "--config", cfg]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_tv_key_is_refused(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "tv = 0.5\n")
    assert main(["demo-color", "--config", cfg]) == 2
    assert "not implemented" in capsys.readouterr().err


# --- demo-color ----------------------------------------------------------------------

def demo_cfg(tmp_path, extra=""):
    return write_cfg(tmp_path, DEMO_PARAMS + "side = 32\nlevels = 2\n" + extra, "demo.cfg")


def test_demo_outputs_and_determinism(tmp_path):
    cfg = demo_cfg(tmp_path)
    for d in ("a", "b"):
        assert main(["demo-color", "--config", cfg, "--out", str(tmp_path / d)]) == 0
    assert files_bytes(tmp_path / "a") == files_bytes(tmp_path / "b")
    assert read_pnm(tmp_path / "a/reconstruction.ppm").shape == (32, 32, 3)
    _, header, rows = read_telemetry(tmp_path / "a/errors.csv")
    assert tuple(header) == ERROR_COLUMNS and len(rows) == 16 * 7


def test_demo_q1_with_demo_parameters_is_refused(tmp_path, capsys):
    assert main(["demo-color", "--config", demo_cfg(tmp_path), "--q", "1",
                 "--out", str(tmp_path / "o")]) == 3
    assert "kappa/4" in capsys.readouterr().err


def test_demo_q2_runs(tmp_path):
    assert main(["demo-color", "--config", demo_cfg(tmp_path), "--q", "2",
                 "--out", str(tmp_path / "o")]) == 0


def test_demo_full_resolution_is_near_exact(tmp_path):
    cfg = write_cfg(tmp_path, "q = 2\nomega = 0.0001\ntheta = 10000\nrho_base = 0\n"
                              "n_max = 0\ninner_iters = 60\nside = 32\nlevels = 2\n"
                              "blur_sigma = 0\n", "exact.cfg")
    assert main(["demo-color", "--config", cfg, "--downsample", "1",
                 "--out", str(tmp_path / "o")]) == 0
    _, _, rows = read_telemetry(tmp_path / "o/errors.csv")
    yiq = rgb_to_yiq(synthetic_color_image(32, 0))
    assert rows[-1][2] / np.linalg.norm(yiq[..., 1]) <= 1e-3
    assert rows[-1][3] / np.linalg.norm(yiq[..., 2]) <= 1e-3


def test_demo_from_image_files(tmp_path):
    rgb = synthetic_color_image(32, 2)
    write_pnm(tmp_path / "c.ppm", rgb)
    write_pnm(tmp_path / "g.pgm", rgb_to_yiq(rgb)[..., 0])
    cfg = demo_cfg(tmp_path, "color = c.ppm\ngray = g.pgm\n")
    assert main(["demo-color", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o/errors.csv").exists()


def test_demo_low_resolution_colour_input(tmp_path):
    rgb = synthetic_color_image(32, 2)
    write_pnm(tmp_path / "c.ppm", rgb[::4, ::4])
    write_pnm(tmp_path / "g.pgm", rgb_to_yiq(rgb)[..., 0])
    cfg = demo_cfg(tmp_path, "color = c.ppm\ngray = g.pgm\n")
    assert main(["demo-color", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert not (tmp_path / "o/errors.csv").exists()
    assert main(["demo-color", "--config", cfg, "--downsample", "2",
                 "--out", str(tmp_path / "o2")]) == 2


def test_demo_dimension_errors(tmp_path, capsys):
    assert main(["demo-color", "--config", demo_cfg(tmp_path), "--downsample", "3"]) == 2
    assert "divisible" in capsys.readouterr().err


# --- verify / rates ------------------------------------------------------------------

def test_verify_empty_scope_is_usage_error(capsys):
    assert main(["verify"]) == 2
    assert "scope" in capsys.readouterr().err


def test_verify_unknown_scope():
    assert main(["verify", "everything"]) == 2


def test_verify_prox(capsys):
    assert main(["verify", "prox"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") >= 3 and "FAIL" not in out


def test_rates_for_demo_model(tmp_path, capsys):
    assert main(["rates", "--config", demo_cfg(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "alpha = " in out and "beta = 0.866025" in out and "L = 7 (configured)" in out


def test_rates_reports_missing_beta(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "q = inf\nomega = 0.05\ntheta = 6\nside = 16\nlevels = 1\n")
    assert main(["rates", "--config", cfg]) == 3
    assert "beta unavailable" in capsys.readouterr().out
