import subprocess
import sys

import numpy as np
import pytest

from mfc.cli import main
from mfc.config import build_config, emit_defaults, load_config, parse_pairs
from mfc.errors import ConfigError
from mfc.pipeline import RunConfig
from mfc.raster import Label, MaskLayer, read_mask, write_mask, write_scene
from mfc.synthetic import TEXTURE_CLASSES, make_scene, texture_patch


@pytest.fixture(scope="module")
def scene_path(tmp_path_factory):
    syn = make_scene(2, shape=(120, 120), n_clouds=2, radius=(8, 12))
    return write_scene(syn.scene, tmp_path_factory.mktemp("scene") / "s")


def test_emit_defaults_round_trips(tmp_path, capsys):
    assert main(["--emit-defaults"]) == 0
    text = capsys.readouterr().out
    assert "t1 = 0.13" in text and "guided_radius = 60" in text
    p = tmp_path / "d.cfg"
    p.write_text(text)
    assert load_config(p) == RunConfig()


def test_build_config_overrides_and_aliases():
    cfg = build_config({"t1": "0.2", "segment": "0.3", "h_step": "500", "mode": "fast", "subsample": "none"})
    assert cfg.thresholds.t1 == 0.2 and cfg.thresholds.t8 == 0.3
    assert cfg.match.h_step == 500 and cfg.mode == "fast" and cfg.subsample is None
    with pytest.raises(ConfigError, match="unknown"):
        build_config({"t99": "1"})
    with pytest.raises(ConfigError):
        build_config({"t2": "abc"})
    with pytest.raises(ConfigError):
        build_config({"t2": "2.0"})
    with pytest.raises(ConfigError):
        parse_pairs(["no equals sign"])


def test_run_writes_valid_mask(scene_path, tmp_path, capsys):
    out = tmp_path / "m.raw"
    assert main(["run", str(scene_path), "--out", str(out)]) == 0
    assert "cloud_fraction" in capsys.readouterr().out
    data = set(out.read_bytes())
    assert data <= {0, 1, 128, 255} and 255 in data
    assert read_mask(out).shape == (120, 120)


def test_run_fast_png_and_debug_stages(scene_path, tmp_path):
    out = tmp_path / "m.png"
    dbg = tmp_path / "stages"
    assert main(["run", str(scene_path), "--mode", "fast", "--out", str(out), "--debug-stages", str(dbg)]) == 0
    m = read_mask(out)
    assert m.count(Label.SHADOW) == 0
    names = sorted(p.name for p in dbg.glob("*.raw"))
    assert names[0] == "00_rough_cloud.raw" and len(names) == 5


def test_fraction_command(scene_path, capsys):
    assert main(["fraction", str(scene_path), "--set", "t1=0.13"]) == 0
    v = float(capsys.readouterr().out.strip())
    assert 0 < v < 1


def test_exit_codes(scene_path, tmp_path):
    assert main(["run", str(tmp_path / "missing.hdr")]) == 2
    assert main(["run", str(scene_path), "--set", "nonsense=1"]) == 3
    assert main(["run", str(scene_path), "--config", str(tmp_path / "none.cfg")]) == 3
    bad = tmp_path / "b.hdr"
    bad.write_text(scene_path.read_text().replace("bands = 4", "bands = 3"))
    (tmp_path / "b.bin").write_bytes(b"")
    assert main(["run", str(bad)]) == 2
    assert main([]) == 2


def test_eval_command(tmp_path, capsys):
    pred, ref = tmp_path / "pred", tmp_path / "ref"
    pred.mkdir()
    ref.mkdir()
    write_mask(MaskLayer(np.array([[255, 255], [1, 1]], np.uint8)), pred / "s1.raw")
    write_mask(MaskLayer(np.array([[255, 1], [1, 1]], np.uint8)), ref / "s1.raw")
    write_mask(MaskLayer(np.array([[1, 128]], np.uint8)), pred / "s2.png")
    write_mask(MaskLayer(np.array([[1, 128]], np.uint8)), ref / "s2.png")
    report = tmp_path / "r.tsv"
    assert main(["eval", str(pred), str(ref), "--report", str(report)]) == 0
    rows = [ln.split("\t") for ln in report.read_text().splitlines()]
    assert [r[0] for r in rows[1:3]] == ["s1", "s2"]
    assert float(rows[1][1]) == 0.75
    assert main(["eval", str(pred), str(tmp_path / "nope")]) == 2


def test_train_textures_command(tmp_path, capsys):
    rng = np.random.default_rng(0)
    for lab in TEXTURE_CLASSES:
        d = tmp_path / "patches" / lab.replace(":", "_")
        d.mkdir(parents=True)
        for k in range(2):
            np.save(d / f"p{k}.npy", texture_patch(rng, lab, 40))
    out = tmp_path / "t.txt"
    assert main(["train-textures", str(tmp_path / "patches"), "--out", str(out)]) == 0
    assert len([ln for ln in out.read_text().splitlines() if not ln.startswith("#")]) == 4
    (tmp_path / "patches" / "rocks").mkdir()
    assert main(["train-textures", str(tmp_path / "patches"), "--out", str(out)]) == 2


def test_module_entry_point(scene_path, tmp_path):
    out = tmp_path / "m.raw"
    proc = subprocess.run(
        [sys.executable, "-m", "mfc", "run", str(scene_path), "--mode", "fast", "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
