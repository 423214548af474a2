import json
import xml.etree.ElementTree as ET

import pytest
from click.testing import CliRunner

from excount.cli import main
from excount.units import CM1_TO_PS1

FMO2_JSON = {
    "energies": [200.0, 320.0],
    "couplings": [[0.0, -87.7], [-87.7, 0.0]],
    "labels": ["site1", "site2"],
    "bath": {"reorg_energy_cm1": 35.0, "cutoff_cm1": 150.0, "temperature_K": 300.0},
}


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, args):
    return runner.invoke(main, args, catch_exceptions=False)


def read_rows(path):
    rows = []
    for line in path.read_text().splitlines():
        if line.startswith("#") or line.startswith("s,"):
            continue
        rows.append([float(x) for x in line.split(",")])
    return rows


def test_presets_listing(runner):
    result = invoke(runner, ["presets"])
    assert result.exit_code == 0
    for name in ("fmo2", "fmo3", "fmo4"):
        assert name in result.output
    assert "-87.7" in result.output


def test_theta_scan_files(runner, tmp_path):
    result = invoke(
        runner,
        [
            "theta-scan", "--preset", "fmo3", "--temps", "77,150,300",
            "--channel", "pair:a1<->a2", "--out", str(tmp_path), "--format", "csv",
        ],
    )
    assert result.exit_code == 0
    files = sorted(tmp_path.glob("theta_scan__fmo3__T*K__pair_a1_a2.csv"))
    assert len(files) == 3
    for path in files:
        text = path.read_text()
        assert "s,theta_cm1,activity_cm1,activity_ps1,mandel" in text
        assert "nan" not in text.lower() and "inf" not in text.lower()
        rows = read_rows(path)
        assert len(rows) == 281
        s0_row = min(rows, key=lambda r: abs(r[0]))
        assert abs(s0_row[1]) < 1e-10


def test_theta_scan_fmo2_mandel_all_negative(runner, tmp_path):
    result = invoke(
        runner,
        [
            "theta-scan", "--preset", "fmo2", "--temps", "300",
            "--channel", "down:a2->a1", "--out", str(tmp_path),
        ],
    )
    assert result.exit_code == 0
    rows = read_rows(next(tmp_path.glob("*.csv")))
    assert all(row[4] < 0.0 for row in rows)


def test_theta_scan_svg(runner, tmp_path):
    result = invoke(
        runner,
        [
            "theta-scan", "--preset", "fmo2", "--temps", "300",
            "--channel", "down:a2->a1", "--out", str(tmp_path),
            "--format", "csv,svg", "--s-points", "81",
        ],
    )
    assert result.exit_code == 0
    svg = next(tmp_path.glob("*.svg"))
    root = ET.parse(svg).getroot()
    assert root.tag.endswith("svg")
    assert any(el.tag.endswith("polyline") for el in root.iter())


def test_model_file_matches_preset(runner, tmp_path):
    model_path = tmp_path / "dimer.json"
    model_path.write_text(json.dumps(FMO2_JSON))
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    # temperature comes from the model file's bath section in run B
    invoke(runner, ["theta-scan", "--preset", "fmo2", "--temps", "300",
                    "--channel", "down:a2->a1", "--out", str(out_a)])
    invoke(runner, ["theta-scan", "--model", str(model_path),
                    "--channel", "down:a2->a1", "--out", str(out_b)])
    csv_a = next(out_a.glob("*.csv")).read_text()
    csv_b = next(out_b.glob("*.csv")).read_text()
    # identical numbers; only the model tag in the comment differs
    strip = lambda text: "\n".join(text.splitlines()[1:])
    assert strip(csv_a) == strip(csv_b)


def test_config_file_with_flag_override(runner, tmp_path):
    cfg = {
        "preset": "fmo2",
        "temps": [150.0],
        "channels": ["down:a2->a1"],
        "s_points": 41,
        "out": str(tmp_path / "from_config"),
    }
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(cfg))
    result = invoke(runner, ["theta-scan", "--config", str(cfg_path)])
    assert result.exit_code == 0
    assert len(read_rows(next((tmp_path / "from_config").glob("*.csv")))) == 41
    # flag overrides the file value
    result = invoke(
        runner,
        ["theta-scan", "--config", str(cfg_path), "--s-points", "61",
         "--out", str(tmp_path / "override")],
    )
    assert result.exit_code == 0
    assert len(read_rows(next((tmp_path / "override").glob("*.csv")))) == 61


def test_unknown_config_key_rejected(runner, tmp_path):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text('{"preset": "fmo2", "channels": ["down:a2->a1"], "speed": 9}')
    result = runner.invoke(main, ["theta-scan", "--config", str(cfg_path)])
    assert result.exit_code == 2
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert "speed" in err["error"]


def test_byte_identical_reruns(runner, tmp_path):
    args = [
        "theta-scan", "--preset", "fmo2", "--temps", "150,300",
        "--channel", "down:a2->a1", "--format", "csv,svg", "--s-points", "61",
    ]
    invoke(runner, args + ["--out", str(tmp_path / "one")])
    invoke(runner, args + ["--out", str(tmp_path / "two")])
    ones = sorted((tmp_path / "one").iterdir())
    twos = sorted((tmp_path / "two").iterdir())
    assert [p.name for p in ones] == [p.name for p in twos]
    for a, b in zip(ones, twos):
        assert a.read_bytes() == b.read_bytes()


def test_worker_count_does_not_change_output(runner, tmp_path):
    args = [
        "theta-scan", "--preset", "fmo3", "--temps", "77,150,300",
        "--channel", "down:a3->a2", "--channel", "pair:a1<->a2",
        "--s-points", "41",
    ]
    invoke(runner, args + ["--workers", "1", "--out", str(tmp_path / "serial")])
    invoke(runner, args + ["--workers", "6", "--out", str(tmp_path / "pooled")])
    serial = sorted((tmp_path / "serial").iterdir())
    pooled = sorted((tmp_path / "pooled").iterdir())
    assert [p.name for p in serial] == [p.name for p in pooled]
    for a, b in zip(serial, pooled):
        assert a.read_bytes() == b.read_bytes()


def test_crossover_map(runner, tmp_path):
    result = invoke(
        runner,
        [
            "crossover-map", "--preset", "fmo3", "--temps", "150,300",
            "--channel", "down:a3->a2", "--out", str(tmp_path),
        ],
    )
    assert result.exit_code == 0
    doc = json.loads((tmp_path / "crossover_map.json").read_text())
    by_temp = {entry["temperature_K"]: entry for entry in doc["results"]}
    assert by_temp[150.0]["s_star"] is not None
    assert by_temp[300.0]["s_star"] is not None
    assert abs(by_temp[300.0]["s_star"]) < abs(by_temp[150.0]["s_star"])
    assert by_temp[300.0]["counted"][0]["intensity_factor"] > 0.3
    assert by_temp[300.0]["local_max"]["q"] > by_temp[300.0]["q_at_zero"]


def test_crossover_map_fmo2_null(runner, tmp_path):
    invoke(
        runner,
        [
            "crossover-map", "--preset", "fmo2", "--temps", "150,300",
            "--channel", "down:a2->a1", "--out", str(tmp_path),
        ],
    )
    doc = json.loads((tmp_path / "crossover_map.json").read_text())
    assert all(entry["s_star"] is None for entry in doc["results"])
    assert all(entry["q_at_zero"] < 0.0 for entry in doc["results"])


def test_crossover_map_needs_two_temps(runner, tmp_path):
    result = runner.invoke(
        main,
        ["crossover-map", "--preset", "fmo3", "--temps", "300",
         "--channel", "down:a3->a2", "--out", str(tmp_path)],
    )
    assert result.exit_code == 2
    assert "two temperatures" in result.stderr


def test_fmo4_q_zero_sign_change_with_temperature(runner, tmp_path):
    invoke(
        runner,
        [
            "crossover-map", "--preset", "fmo4", "--temps", "77,300",
            "--channel", "down:a4->a2", "--out", str(tmp_path),
        ],
    )
    doc = json.loads((tmp_path / "crossover_map.json").read_text())
    by_temp = {entry["temperature_K"]: entry for entry in doc["results"]}
    assert by_temp[77.0]["q_at_zero"] > 0.0
    assert by_temp[300.0]["q_at_zero"] < 0.0


def test_rate_function_output(runner, tmp_path):
    result = invoke(
        runner,
        [
            "rate-function", "--preset", "fmo2", "--temps", "300",
            "--channel", "down:a2->a1", "--out", str(tmp_path), "--s-points", "141",
        ],
    )
    assert result.exit_code == 0
    path = next(tmp_path.glob("rate_function__*.csv"))
    text = path.read_text()
    assert "k_cm1,k_ps1,phi_cm1" in text
    rows = [
        [float(x) for x in line.split(",")]
        for line in text.splitlines()
        if line and not line.startswith(("#", "k_cm1"))
    ]
    assert all(row[2] >= 0.0 for row in rows)
    assert min(row[2] for row in rows) < 1e-8


def test_oracle_check_pass(runner, tmp_path):
    result = invoke(
        runner,
        [
            "oracle-check", "--preset", "fmo2", "--temps", "300",
            "--channel", "down:a2->a1", "--traj", "2000", "--seed", "7",
            "--out", str(tmp_path),
        ],
    )
    assert result.exit_code == 0
    doc = json.loads((tmp_path / "oracle_check.json").read_text())
    assert doc["pass"] is True
    entry = doc["results"][0]
    assert abs(entry["z_rate"]) < 3.0 and abs(entry["z_mandel"]) < 3.0
    assert entry["spectral"]["activity_cm1"] > 0.0
    assert sum(entry["trajectories"]["histogram"].values()) == 2000


def test_oracle_check_zero_coupling_trivial_pass(runner, tmp_path):
    model_path = tmp_path / "flat.json"
    model_path.write_text(
        json.dumps(
            {
                "energies": [0.0, 200.0],
                "couplings": [[0.0, 0.0], [0.0, 0.0]],
                "bath": FMO2_JSON["bath"],
            }
        )
    )
    result = invoke(
        runner,
        ["oracle-check", "--model", str(model_path), "--channel", "down:a2->a1",
         "--traj", "64", "--out", str(tmp_path)],
    )
    assert result.exit_code == 0
    doc = json.loads((tmp_path / "oracle_check.json").read_text())
    assert doc["pass"] is True
    entry = doc["results"][0]
    assert entry["spectral"]["activity_cm1"] == 0.0
    assert entry["trajectories"]["mean_rate"] == 0.0
    assert entry["spectral"]["mandel"] is None


def test_oracle_check_mismatched_channel_sets(runner, tmp_path):
    result = runner.invoke(
        main,
        [
            "oracle-check", "--preset", "fmo2", "--channel", "down:a2->a1",
            "--traj-channel", "up:a1->a2", "--out", str(tmp_path),
        ],
    )
    assert result.exit_code == 2
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert "counted set" in err["error"]
    assert not (tmp_path / "oracle_check.json").exists()


def test_oracle_check_explicit_window(runner, tmp_path):
    result = invoke(
        runner,
        [
            "oracle-check", "--preset", "fmo2", "--temps", "300",
            "--channel", "down:a2->a1", "--traj", "500", "--seed", "3",
            "--t-max-ps", "120", "--out", str(tmp_path),
        ],
    )
    assert result.exit_code == 0
    doc = json.loads((tmp_path / "oracle_check.json").read_text())
    # 120 ps converted to internal 1/cm^-1 units
    assert doc["results"][0]["t_max_cm"] == pytest.approx(120.0 * CM1_TO_PS1, rel=1e-14)


def test_unknown_format_rejected(runner, tmp_path):
    result = runner.invoke(
        main,
        ["theta-scan", "--preset", "fmo2", "--channel", "down:a2->a1",
         "--format", "csv,pdf", "--out", str(tmp_path)],
    )
    assert result.exit_code == 2
    assert "pdf" in result.stderr


def test_invalid_config_machine_readable_error(runner, tmp_path):
    result = runner.invoke(
        main,
        ["theta-scan", "--preset", "fmo9", "--channel", "down:a2->a1",
         "--out", str(tmp_path)],
    )
    assert result.exit_code == 2
    lines = [l for l in result.stderr.splitlines() if l.strip()]
    assert len(lines) == 1
    err = json.loads(lines[0])
    assert "fmo9" in err["error"]


def test_preset_and_model_mutually_exclusive(runner, tmp_path):
    model_path = tmp_path / "m.json"
    model_path.write_text(json.dumps(FMO2_JSON))
    result = runner.invoke(
        main,
        ["theta-scan", "--preset", "fmo2", "--model", str(model_path),
         "--channel", "down:a2->a1", "--out", str(tmp_path)],
    )
    assert result.exit_code == 2
    assert "mutually exclusive" in result.stderr


def test_five_site_user_model_end_to_end(runner, tmp_path):
    # larger aggregates enter as user files; nothing in the pipeline is
    # preset-specific
    import numpy as np

    rng = np.random.default_rng(12345)
    j = rng.normal(scale=45.0, size=(5, 5))
    j = np.triu(j, 1)
    j = j + j.T
    model = {
        "energies": rng.uniform(0.0, 900.0, size=5).tolist(),
        "couplings": j.tolist(),
    }
    path = tmp_path / "penta.json"
    path.write_text(json.dumps(model))
    result = invoke(
        runner,
        ["theta-scan", "--model", str(path), "--temps", "300",
         "--channel", "all-down", "--s-points", "57", "--out", str(tmp_path)],
    )
    assert result.exit_code == 0
    rows = read_rows(next(tmp_path.glob("theta_scan__penta*.csv")))
    assert len(rows) == 57
    assert abs(min(rows, key=lambda r: abs(r[0]))[1]) < 1e-10


def test_zero_coupling_scan_omits_undefined_mandel(runner, tmp_path):
    model_path = tmp_path / "flat.json"
    model_path.write_text(
        json.dumps({"energies": [0.0, 200.0], "couplings": [[0.0, 0.0], [0.0, 0.0]]})
    )
    result = invoke(
        runner,
        ["theta-scan", "--model", str(model_path), "--temps", "300",
         "--channel", "down:a2->a1", "--out", str(tmp_path), "--s-points", "41"],
    )
    assert result.exit_code == 0
    text = next(tmp_path.glob("theta_scan__flat*.csv")).read_text()
    assert "omitted_rows_undefined_mandel=41" in text
    assert "nan" not in text.lower()
