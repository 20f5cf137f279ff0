import json
import os

import numpy as np
import pandas as pd
import pytest
import yaml

from hvfwi.cli import cli
from hvfwi.utils.io import GridFile, read_gathers, read_grid, write_grid, write_signal

SMALL_SURVEY = dict(
    seed=0,
    model="constant_model",
    model_kwargs=dict(n_z=16, n_x=16, spacing=10.0, velocity=1500.0),
    initial_model="constant_model",
    initial_model_kwargs=dict(n_z=16, n_x=16, spacing=10.0, velocity=1450.0),
    geometry="line_geometry",
    geometry_kwargs=dict(n_sources=2, n_receivers=16, depth=40.0),
    pml_kwargs=dict(width_cells=8),
    frequencies=[10.0],
    inversion_kwargs=dict(velocity_bounds=[1300.0, 1700.0]),
)


def run(capsys, *argv):
    code = cli(list(argv))
    out = capsys.readouterr().out.strip()
    return code, (json.loads(out) if out else None)


def write_config(tmp_path, name, config):
    path = str(tmp_path / name)
    with open(path, "w") as f:
        yaml.safe_dump(config, f)
    return path


@pytest.fixture
def signals(tmp_path, make_signal):
    a, b = str(tmp_path / "a.bin"), str(tmp_path / "b.bin")
    write_signal(a, make_signal(33))
    write_signal(b, make_signal(33))
    return a, b


def test_hv_distance_of_identical_signals(tmp_path, capsys, signals):
    a, _ = signals
    code, summary = run(capsys, "hv-dist", "--override", "paths.signal_a=" + a, "paths.signal_b=" + a)
    assert code == 0
    assert summary["distance"] == 0.0
    assert summary["converged"]


def test_unconverged_hv_distance_exits_3(tmp_path, capsys, signals):
    a, b = signals
    code, summary = run(
        capsys, "hv-dist", "--override", "paths.signal_a=" + a, "paths.signal_b=" + b, "metric_kwargs.max_iters=1"
    )
    assert code == 3
    assert summary["flags"] == ["hv_not_converged"]
    assert summary["distance"] > 0


def test_w2_distance(capsys, signals):
    a, b = signals
    code, summary = run(capsys, "w2-dist", "--override", "paths.signal_a=" + a, "paths.signal_b=" + a)
    assert code == 0 and summary["distance"] == 0.0
    code, summary = run(capsys, "w2-dist", "--override", "paths.signal_a=" + a, "paths.signal_b=" + b)
    assert code == 0 and summary["w2_squared"] == pytest.approx(summary["distance"] ** 2)


def test_malformed_header_exits_2(tmp_path, capsys, signals):
    a, b = signals
    with open(a + ".yaml") as f:
        header = yaml.safe_load(f)
    header.pop("dx_m")
    with open(a + ".yaml", "w") as f:
        yaml.safe_dump(header, f)
    code = cli(["hv-dist", "--override", "paths.signal_a=" + a, "paths.signal_b=" + b])
    captured = capsys.readouterr()
    assert code == 2
    assert captured.out == ""
    assert "dx_m" in captured.err


def test_config_errors(tmp_path, capsys):
    bad = write_config(tmp_path, "bad.yaml", dict(seed=0, bogus=1))
    assert run(capsys, "forward", "--config", bad)[0] == 2
    assert run(capsys, "forward", "--config", str(tmp_path / "missing.yaml"))[0] == 1
    assert run(capsys, "noise", "--override", "paths.data=x.bin")[0] == 2


def test_forward_then_invert_without_iterations(tmp_path, capsys):
    config = write_config(tmp_path, "survey.yaml", SMALL_SURVEY)
    data, output = str(tmp_path / "data.bin"), str(tmp_path / "inverted.bin")

    code, summary = run(capsys, "forward", "--config", config, "--out", data)
    assert code == 0
    assert (summary["n_sources"], summary["n_receivers"], summary["freqs_hz"]) == (2, 16, [10.0])
    gathers, geometry = read_gathers(data)
    assert len(gathers) == 2 and geometry.n_receivers == 16

    code, summary = run(
        capsys, "invert", "--config", config, "--max-iters", "0", "--out", output, "--override", "paths.data=" + data
    )
    assert code == 0
    assert summary["iterations"] == 0
    np.testing.assert_array_equal(read_grid(output).values, np.full((16, 16), 1450.0))


def test_invert_writes_logs_and_scores(tmp_path, capsys):
    config = write_config(tmp_path, "survey.yaml", SMALL_SURVEY)
    data, truth = str(tmp_path / "data.bin"), str(tmp_path / "true.bin")
    assert run(capsys, "forward", "--config", config, "--out", data, "--override", "paths.model=" + truth)[0] == 0
    logs, output = str(tmp_path / "logs"), str(tmp_path / "inverted.bin")
    code, summary = run(
        capsys,
        "invert",
        "--config",
        config,
        "--metric",
        "l2",
        "--max-iters",
        "2",
        "--out",
        output,
        "--override",
        "paths.data=" + data,
        "paths.logs=" + logs,
        "paths.reference=" + truth,
    )
    assert code == 0 or len(summary["flags"]) > 0
    assert summary["metric"] == "L2"
    assert summary["rmse"] > 0
    # A constant reference has no PSNR peak.
    assert summary["psnr"] == "inf"
    assert os.path.exists(os.path.join(logs, "config.yaml"))
    assert read_grid(output).values.shape == (16, 16)


def test_noise_command(tmp_path, capsys):
    config = write_config(tmp_path, "survey.yaml", SMALL_SURVEY)
    data, noisy = str(tmp_path / "data.bin"), str(tmp_path / "noisy.bin")
    assert run(capsys, "forward", "--config", config, "--out", data)[0] == 0
    code, summary = run(
        capsys, "noise", "--snr-db", "10", "--seed", "4", "--out", noisy, "--override", "paths.data=" + data
    )
    assert code == 0
    assert summary["measured_snr_db"] == pytest.approx(10.0, abs=1e-9)
    assert len(read_gathers(noisy)[0]) == 2


def test_score_and_export(tmp_path, capsys):
    model, reference = str(tmp_path / "model.bin"), str(tmp_path / "reference.bin")
    c_ref = np.linspace(1500.0, 1600.0, 12).reshape(3, 4)
    write_grid(reference, GridFile(values=c_ref, dx=1.0, dz=1.0))
    write_grid(model, GridFile(values=c_ref + 2.0, dx=1.0, dz=1.0))
    code, summary = run(capsys, "score", "--override", "paths.model=" + model, "paths.reference=" + reference)
    assert code == 0
    assert summary["rmse"] == pytest.approx(2.0)
    assert summary["psnr"] == pytest.approx(20 * np.log10(100.0 / 2.0))

    code, summary = run(capsys, "score", "--override", "paths.model=" + model, "paths.reference=" + model)
    assert code == 0 and summary["psnr"] == "inf"

    image = str(tmp_path / "model.pgm")
    code, summary = run(capsys, "export-image", "--out", image, "--override", "paths.model=" + model)
    assert code == 0
    assert (summary["min"], summary["max"]) == (1502.0, 1602.0)
    with open(image, "rb") as f:
        assert f.read(2) == b"P5"


def test_ricker_scan_command(tmp_path, capsys):
    config = write_config(
        tmp_path,
        "scan.yaml",
        dict(
            scan_kwargs=dict(
                shift_values=[-0.1, 0.0, 0.1],
                hv_param_sets=[dict(kappa=1.0, lam=1.0, epsilon=0.001, max_iters=20)],
            )
        ),
    )
    output = str(tmp_path / "scan.csv")
    code, summary = run(capsys, "scan-ricker", "--config", config, "--out", output)
    assert code == 0
    df = pd.read_csv(output)
    assert list(df.columns) == ["s", "l2", "hv(kappa=1,lam=1,epsilon=0.001)"]
    assert df["l2"][1] == 0.0
    assert summary["local_minima"]["l2"] == 1


def test_repeated_runs_write_identical_files(tmp_path, capsys):
    config = write_config(tmp_path, "survey.yaml", SMALL_SURVEY)
    outputs = []
    for name in ("first", "second"):
        data = str(tmp_path / (name + ".bin"))
        noisy = str(tmp_path / (name + "_noisy.bin"))
        assert run(capsys, "forward", "--config", config, "--out", data)[0] == 0
        assert run(capsys, "noise", "--snr-db", "5", "--out", noisy, "--override", "paths.data=" + data)[0] == 0
        outputs.append([data, data + ".yaml", noisy])
    for first, second in zip(*outputs):
        with open(first, "rb") as f, open(second, "rb") as g:
            assert f.read() == g.read()


@pytest.mark.slow
def test_layered_line_survey_runs_end_to_end(tmp_path, capsys):
    config = os.path.join(os.path.dirname(__file__), os.pardir, "configs", "layered.yaml")
    data, truth = str(tmp_path / "data.bin"), str(tmp_path / "true.bin")
    overrides = ["paths.data=" + data, "paths.model=" + truth]
    code, summary = run(capsys, "forward", "--config", config, "--override", *overrides)
    assert code == 0
    assert (summary["n_sources"], summary["n_receivers"], summary["freqs_hz"]) == (5, 101, [3.0, 5.0, 7.0])

    output = str(tmp_path / "inverted.bin")
    code, summary = run(
        capsys,
        "invert",
        "--config",
        config,
        "--metric",
        "l2",
        "--max-iters",
        "1",
        "--out",
        output,
        "--override",
        "paths.data=" + data,
        "paths.reference=" + truth,
        "paths.logs=" + str(tmp_path / "logs"),
    )
    assert code == 0 or len(summary["flags"]) > 0
    assert summary["iterations"] <= 3
    assert summary["rmse"] > 0
    assert read_grid(output).values.shape == (51, 151)
