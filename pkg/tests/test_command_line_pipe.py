from pathlib import Path

import pytest

from cracktrack.command_line_pipe import EXIT_CONFIG, main, parse_pipeline
from cracktrack.run_pipeline import PipelineContext, run_stage
from cracktrack.utils.config_utils import load_config
from cracktrack.utils.data_utils import read_json

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SPECTRUM_ONLY = """\
crack:
    family: flat
potential:
    mode: a1
    delta: 3
mesh:
    r: 0.5
    h: 0.125
    levels: 2
radii: [0.125, 0.25, 0.5]
spectrum:
    h_sphere: 0.2
    count: 4
"""


@pytest.fixture
def spectrum_config(tmp_path):
    path = tmp_path / "spectrum.yaml"
    path.write_text(SPECTRUM_ONLY)
    return str(path)


def test_parse_pipeline():
    args = parse_pipeline(["audit", "--config", "run.yaml", "--set", "mesh.h=0.1", "--set", "seed=2", "--threads", "4"])
    assert args.subcommand == "audit"
    assert args.set == ["mesh.h=0.1", "seed=2"]
    assert args.threads == 4
    assert args.tolerance_scale is None
    with pytest.raises(SystemExit):
        parse_pipeline(["train"])


def test_invalid_config_exit_code(spectrum_config, tmp_path):
    code = main(["spectrum", "--config", spectrum_config, "--set", "mesh.h=0.3", "--output", str(tmp_path / "out")])
    assert code == EXIT_CONFIG
    assert not (tmp_path / "out").exists()
    assert main(["spectrum", "--config", str(tmp_path / "nothing.yaml")]) == EXIT_CONFIG


def test_spectrum_run_writes_manifest(spectrum_config, tmp_path):
    output = tmp_path / "spectrum_run"
    code = main(["spectrum", "--config", spectrum_config, "--output", str(output)])
    assert code in (0, 1)
    manifest = read_json(output / "manifest.json")
    assert manifest["subcommand"] == "spectrum"
    assert {"first_eigenvalue", "multiplicities", "first_mode_shape"} <= {c["name"] for c in manifest["checks"]}
    assert manifest["passed"] == (code == 0)
    assert "spectrum.json" in manifest["files"]
    assert (output / "run.log").exists()
    assert not Path(str(output) + ".lock").exists()


def test_run_stage_sweep(tmp_path):
    path = tmp_path / "sweep.yaml"
    path.write_text(SPECTRUM_ONLY + "sweep:\n    potential.amplitude: [0.0, 1.0]\n")
    manifests = run_stage(subcommand="solve", config=str(path), output=str(tmp_path / "sweep"), threads=2)
    assert len(manifests) == 2
    assert (tmp_path / "sweep" / "sweep_001" / "manifest.json").exists()
    for manifest in manifests:
        assert [check["name"] for check in manifest.checks] == ["galerkin_residual"]
        assert manifest.passed


@pytest.mark.slow
def test_smoke_verify(tmp_path):
    output = tmp_path / "smoke"
    code = main(["verify", "--config", str(CONFIGS / "smoke.yaml"), "--output", str(output)])
    assert code in (0, 1)
    manifest = read_json(output / "manifest.json")
    assert manifest["subcommand"] == "verify"
    assert manifest["constants"]["first_eigenvalue"] > 0
    assert "audits.json" in manifest["files"]


def test_radius_beyond_coercivity_radius(spectrum_config, tmp_path, caplog):
    [(_, config)] = load_config(spectrum_config)
    ctx = PipelineContext(config, str(tmp_path))
    assert not ctx.beyond_r0(0.5, "Mesh radius")
    ctx.constants["r0"] = 0.25
    with caplog.at_level("WARNING"):
        assert ctx.beyond_r0(config.mesh["r"], "Mesh radius")
    assert "exceeds the coercivity radius r0 = 0.25" in caplog.text
    assert not ctx.beyond_r0(0.25, "Blow-up scale")
