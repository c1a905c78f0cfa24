import json
import hashlib

import pytest
import yaml
from click.testing import CliRunner

from toomdtc.cli import main
from toomdtc.config import ConfigError, load_config, parse_config

BASE = {
    "lattice": {"kind": "square_periodic", "rows": 2, "cols": 2},
    "p_flip": 0.95,
    "p_nec": 0.8,
    "p_unit": 0.02,
    "p_reset": 0.02,
    "p_me": 0.01,
    "rule": "nec",
    "steps": 6,
    "trajectories": 50,
    "master_seed": 77,
    "init": "all_plus",
}


def write_cfg(tmp_path, name="cfg.yaml", **overrides):
    raw = {**BASE, **overrides}
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return path


def test_parse_config_defaults():
    raw = {k: v for k, v in BASE.items() if k not in ("p_unit", "p_reset",
                                                      "p_me", "rule", "init")}
    cfg = parse_config(raw)
    assert cfg.p_unit == 0.0 and cfg.rule == "nec" and cfg.init == "all_plus"


@pytest.mark.parametrize("overrides,needle", [
    ({"p_flip": 1.5}, "p_flip"),
    ({"p_me": -0.2}, "p_me"),
    ({"steps": 2.5}, "steps"),
    ({"rule": "swirl"}, "rule"),
    ({"init": "hot"}, "init"),
    ({"init": "random:2.0"}, "init"),
    ({"lattice": {"kind": "cubic", "rows": 2, "cols": 2}}, "lattice.kind"),
    ({"lattice": {"kind": "square_periodic", "rows": 2}}, "lattice.cols"),
    ({"extra_knob": 1}, "extra_knob"),
    ({"sweep": {"key": "rule", "values": ["nec"]}}, "sweep.key"),
    ({"sweep": {"key": "p_nec"}}, "sweep"),
])
def test_validation_names_offending_key(tmp_path, overrides, needle):
    path = write_cfg(tmp_path, **overrides)
    with pytest.raises(ConfigError, match=needle.replace(".", r"\.")):
        load_config(str(path))
    result = CliRunner().invoke(main, ["validate", str(path)])
    assert result.exit_code == 1
    assert needle in result.output


def test_validate_ok(tmp_path):
    path = write_cfg(tmp_path)
    result = CliRunner().invoke(main, ["validate", str(path)])
    assert result.exit_code == 0
    assert "OK" in result.output


def test_run_byte_reproducible(tmp_path):
    path = write_cfg(tmp_path)
    runner = CliRunner()
    for d in ("a", "b"):
        r = runner.invoke(main, ["run", str(path), "-o", str(tmp_path / d)])
        assert r.exit_code == 0, r.output
    csv_a = (tmp_path / "a" / "timeseries.csv").read_bytes()
    csv_b = (tmp_path / "b" / "timeseries.csv").read_bytes()
    assert csv_a == csv_b
    header, first = csv_a.decode().splitlines()[:2]
    assert header == "t,mean_M,stderr_M,mean_M_even_parity_tag"
    assert first.startswith("0,1.0,0.0,")


def test_run_worker_invariance(tmp_path):
    path = write_cfg(tmp_path, trajectories=12)
    runner = CliRunner()
    runner.invoke(main, ["run", str(path), "-o", str(tmp_path / "w1"),
                         "--workers", "1"], catch_exceptions=False)
    runner.invoke(main, ["run", str(path), "-o", str(tmp_path / "w2"),
                         "--workers", "2"], catch_exceptions=False)
    assert (tmp_path / "w1" / "timeseries.csv").read_bytes() == \
        (tmp_path / "w2" / "timeseries.csv").read_bytes()


def test_manifest_checksums(tmp_path):
    path = write_cfg(tmp_path)
    CliRunner().invoke(main, ["run", str(path), "-o", str(tmp_path / "out"),
                              "--plot"], catch_exceptions=False)
    manifest = json.loads((tmp_path / "out" / "run_manifest.json").read_text())
    assert manifest["master_seed"] == 77
    assert set(manifest["outputs"]) == {"timeseries.csv", "magnetization.svg"}
    for name, digest in manifest["outputs"].items():
        data = (tmp_path / "out" / name).read_bytes()
        assert hashlib.sha256(data).hexdigest() == digest
    cfg_digest = hashlib.sha256(path.read_bytes()).hexdigest()
    assert manifest["config_sha256"] == cfg_digest


def test_run_rejects_sweep_config(tmp_path):
    path = write_cfg(tmp_path, sweep={"key": "p_nec", "values": [0.5, 0.8]})
    r = CliRunner().invoke(main, ["run", str(path), "-o", str(tmp_path / "x")])
    assert r.exit_code == 1


def test_sweep_combined_csv(tmp_path):
    path = write_cfg(tmp_path,
                     sweep={"key": "p_unit", "values": [0.0, 0.05]})
    r = CliRunner().invoke(main, ["sweep", str(path), "-o",
                                  str(tmp_path / "sw")])
    assert r.exit_code == 0, r.output
    lines = (tmp_path / "sw" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "p_unit,t,mean_M,stderr_M,mean_M_even_parity_tag"
    assert len(lines) == 1 + 2 * (BASE["steps"] + 1)
    assert {ln.split(",")[0] for ln in lines[1:]} == {"0.0", "0.05"}


def test_sweep_single_point_matches_run(tmp_path):
    plain = write_cfg(tmp_path, name="plain.yaml")
    swept = write_cfg(tmp_path, name="swept.yaml",
                      sweep={"key": "p_unit", "values": [BASE["p_unit"]]})
    runner = CliRunner()
    runner.invoke(main, ["run", str(plain), "-o", str(tmp_path / "r")],
                  catch_exceptions=False)
    runner.invoke(main, ["sweep", str(swept), "-o", str(tmp_path / "s")],
                  catch_exceptions=False)
    run_rows = (tmp_path / "r" / "timeseries.csv").read_text().splitlines()[1:]
    sweep_rows = (tmp_path / "s" / "sweep.csv").read_text().splitlines()[1:]
    stripped = [",".join(ln.split(",")[1:]) for ln in sweep_rows]
    assert stripped == run_rows


def test_sweep_requires_block(tmp_path):
    path = write_cfg(tmp_path)
    r = CliRunner().invoke(main, ["sweep", str(path), "-o", str(tmp_path)])
    assert r.exit_code == 1


def test_oracle_check_passes(tmp_path):
    path = write_cfg(tmp_path, trajectories=400)
    r = CliRunner().invoke(main, ["oracle-check", str(path)])
    assert r.exit_code == 0, r.output
    assert "passed" in r.output


def test_oracle_check_rejects_large_lattice(tmp_path):
    path = write_cfg(tmp_path,
                     lattice={"kind": "square_periodic", "rows": 4, "cols": 4})
    r = CliRunner().invoke(main, ["oracle-check", str(path)])
    assert r.exit_code == 1


def test_missing_config_file_is_validation_error(tmp_path):
    r = CliRunner().invoke(main, ["validate", str(tmp_path / "nope.yaml")])
    assert r.exit_code == 1
