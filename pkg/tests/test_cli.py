from __future__ import annotations

import json

import numpy as np
import pytest

from statecast import cli, fixtures
from statecast.codec import CorruptionMask, Packet, decode_with_mask, read_bitstream
from statecast.gamestate import read_state
from statecast.netsim import Status, constant_trace, read_report_csv, read_trace_csv, write_trace_csv
from statecast.pnm import read_ppm
from statecast.scene import load_scene, render_ground_truth


@pytest.fixture(scope="module")
def pan_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("scene") / "pan.scene"
    assert cli.main(["scene-gen", "--kind", "pan", "--frames", "12", "--out", str(path)]) == 0
    return path


def run_sim(scene, out, *extra):
    argv = ["simulate", "--scene", str(scene), "--out", str(out), "--no-ssim", *extra]
    assert cli.main(argv) == 0
    return json.loads((out / "report.json").read_text())


def test_help_lists_flags(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    top = capsys.readouterr().out
    for sub in ("scene-gen", "render", "extract", "encode", "simulate", "report", "recover"):
        assert sub in top
    with pytest.raises(SystemExit):
        cli.main(["simulate", "--help"])
    text = capsys.readouterr().out
    for flag in ("--scene", "--out", "--profile", "--seed", "--scheme", "--budget-ms", "--timeout-ms",
                 "--state-res", "--downsample", "--gop", "--q", "--mtu", "--trace", "fec:<pct>"):
        assert flag in text
    with pytest.raises(SystemExit):
        cli.main(["scene-gen", "--help"])
    text = capsys.readouterr().out
    for kind in ("pan", "orbit", "two-motion", "village_toy"):
        assert kind in text


def test_scene_gen_is_deterministic(tmp_path):
    for name in ("a", "b"):
        cli.main(["scene-gen", "--kind", "two-motion", "--frames", "5", "--seed", "3",
                  "--out", str(tmp_path / f"{name}.scene")])
    assert (tmp_path / "a.scene").read_bytes() == (tmp_path / "b.scene").read_bytes()


def test_village_has_forty_objects(tmp_path):
    cli.main(["scene-gen", "--kind", "village_toy", "--frames", "3", "--out", str(tmp_path / "v.scene")])
    assert len(load_scene(tmp_path / "v.scene").objects) == 40


def test_pan_poses_translate_uniformly(pan_file):
    scene = load_scene(pan_file)
    eyes = np.array([np.linalg.inv(p.view)[:3, 3] for p in scene.camera_path])
    steps = np.diff(eyes, axis=0)
    assert len(eyes) == 12 and np.allclose(steps, steps[0], atol=1e-9) and np.linalg.norm(steps[0]) > 0


def test_lossless_run(pan_file, tmp_path):
    s = run_sim(pan_file, tmp_path / "run", "--profile", "lossless", "--frames", "6")
    assert s["status_counts"]["DELIVERED"] == 6 and s["frames"] == 6


def test_leo_runs_are_byte_identical(pan_file, tmp_path):
    for name in ("a", "b"):
        run_sim(pan_file, tmp_path / name, "--scheme", "recover", "--profile", "LEO", "--seed", "7")
    for art in ("report.csv", "report.json", "trace.csv", "bitstream.scv", "shown/shown_0011.ppm"):
        assert (tmp_path / "a" / art).read_bytes() == (tmp_path / "b" / art).read_bytes()


def test_recover_beats_reuse_on_pan(pan_file, tmp_path):
    write_trace_csv(tmp_path / "lossy.csv", constant_trace(10, throughput_mbps=50, loss_rate=0.15))
    res = {s: run_sim(pan_file, tmp_path / s, "--scheme", s, "--trace", str(tmp_path / "lossy.csv"),
                      "--seed", "1")
           for s in ("reuse", "recover")}
    assert res["reuse"]["status_counts"]["DELIVERED"] < 12
    assert res["recover"]["mean_psnr_db"] > res["reuse"]["mean_psnr_db"]


def test_artifacts_round_trip(pan_file, tmp_path):
    out = tmp_path / "run"
    run_sim(pan_file, out, "--profile", "LEO", "--seed", "2", "--frames", "4")
    scene = load_scene(pan_file)
    assert np.array_equal(read_ppm(out / "frames" / "frame_0002.ppm"), render_ground_truth(scene, 2))
    st_ = read_state(out / "states" / "state_0001.pgm")
    assert st_.color_index.shape == (scene.state_resolution[1], scene.state_resolution[0])
    m = CorruptionMask.from_pgm(out / "masks" / "mask_0003.pgm")
    assert m.valid.shape == (272 // 4, 480 // 4)
    frames, cfg, size = read_bitstream(out / "bitstream.scv")
    assert len(frames) == 4 and size == (480, 272) and cfg.q == 8
    outcomes, _ = read_report_csv(out / "report.csv")
    assert [o.frame_index for o in outcomes] == [0, 1, 2, 3]
    assert len(read_trace_csv(out / "trace.csv")) == 100
    assert read_ppm(out / "shown" / "shown_0003.ppm").shape == (272, 480, 3)


def test_stagewise_commands(pan_file, tmp_path):
    assert cli.main(["render", "--scene", str(pan_file), "--frames", "2", "--out", str(tmp_path)]) == 0
    assert cli.main(["extract", "--scene", str(pan_file), "--frames", "2", "--out", str(tmp_path)]) == 0
    assert cli.main(["encode", "--frames-dir", str(tmp_path / "frames"), "--q", "1", "--gop", "1",
                     "--out", str(tmp_path / "s.scv")]) == 0
    frames, _, _ = read_bitstream(tmp_path / "s.scv")
    ref = None
    for ef in frames:
        ref = decode_with_mask(ef, [Packet(i, ef.frame_index, 0, a, b, False) for i, a, b in ef.packet_map], ref)
    assert np.array_equal(ref[0], read_ppm(tmp_path / "frames" / "frame_0001.ppm"))
    rec = tmp_path / "rec.jsonl"
    argv = ["recover", "--scene", str(pan_file), "--prev-frame", str(tmp_path / "frames" / "frame_0000.ppm"),
            "--prev-state", str(tmp_path / "states" / "state_0000.pgm"),
            "--curr-state", str(tmp_path / "states" / "state_0001.pgm"),
            "--truth", str(tmp_path / "frames" / "frame_0001.ppm"), "--frame-index", "1",
            "--record", str(rec), "--out", str(tmp_path / "r.ppm")]
    assert cli.main(argv) == 0
    row = json.loads(rec.read_text().splitlines()[-1])
    assert row["frame_index"] == 1 and row["psnr"] > 20
    assert read_ppm(tmp_path / "r.ppm").shape == (272, 480, 3)


def test_report_subcommand(pan_file, tmp_path, capsys):
    write_trace_csv(tmp_path / "lossy.csv", constant_trace(10, loss_rate=0.3))
    run_sim(pan_file, tmp_path / "run", "--scheme", "reuse", "--trace", str(tmp_path / "lossy.csv"))
    capsys.readouterr()
    assert cli.main(["report", "--report", str(tmp_path / "run" / "report.csv"),
                     "--out", str(tmp_path / "burst.csv")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["mean_run_length"] > 0
    assert (tmp_path / "burst.csv").read_text().startswith("run_length,runs,mean_psnr_reduction_db")


def test_stage_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.scene"
    bad.write_text("this is not a scene\n")
    assert cli.main(["render", "--scene", str(bad), "--out", str(tmp_path)]) == 1
    assert "stage 'load-scene' failed" in capsys.readouterr().err
    assert cli.main(["render", "--scene", str(tmp_path / "missing.scene"), "--out", str(tmp_path)]) == 1
    assert "stage 'load-scene' failed" in capsys.readouterr().err


def test_invalid_config_exits_2(pan_file, tmp_path):
    for argv in (["simulate", "--scene", str(pan_file), "--out", str(tmp_path), "--scheme", "magic"],
                 ["simulate", "--scene", str(pan_file), "--out", str(tmp_path), "--timeout-ms", "90"],
                 ["simulate", "--scene", str(pan_file), "--out", str(tmp_path), "--q", "0"],
                 ["extract", "--scene", str(pan_file), "--out", str(tmp_path), "--state-res", "4x4"]):
        with pytest.raises(SystemExit) as e:
            cli.main(argv)
        assert e.value.code == 2


def test_seed_env_fallback(monkeypatch):
    monkeypatch.setenv("STATECAST_SEED", "42")
    assert cli.resolve_seed(None) == 42
    assert cli.resolve_seed(3) == 3
    monkeypatch.delenv("STATECAST_SEED")
    assert cli.resolve_seed(None) == 0


def test_env_seed_drives_scene_gen(tmp_path, monkeypatch):
    monkeypatch.setenv("STATECAST_SEED", "5")
    cli.main(["scene-gen", "--kind", "orbit", "--frames", "2", "--out", str(tmp_path / "a.scene")])
    cli.main(["scene-gen", "--kind", "orbit", "--frames", "2", "--seed", "5", "--out", str(tmp_path / "b.scene")])
    assert (tmp_path / "a.scene").read_bytes() == (tmp_path / "b.scene").read_bytes()
    assert load_scene(tmp_path / "a.scene").camera_path[0].frame_index == 0
    assert fixtures.make_scene("orbit", 2, 5).objects[0].color_index == load_scene(
        tmp_path / "a.scene").objects[0].color_index


def test_lossless_profile_trace_has_no_losses(pan_file, tmp_path):
    run_sim(pan_file, tmp_path / "run", "--profile", "lossless", "--frames", "2")
    outcomes, _ = read_report_csv(tmp_path / "run" / "report.csv")
    assert all(o.status is Status.DELIVERED and o.packets_lost == 0 for o in outcomes)
