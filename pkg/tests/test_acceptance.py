"""Acceptance criteria 1-11, one PASS/FAIL line each."""

from __future__ import annotations

import time

import numpy as np
import pytest
from conftest import PALETTE, random_scene
from oracles import contested_cells, dependency_mask, truly_visible
from test_codec import decode_stream, random_stream, textured
from test_recovery import as_state, blocks_state

from statecast import cli, fixtures
from statecast.codec import CodecConfig, CorruptionMask, encode
from statecast.gamestate import GameStateFrame, extract_state, frustum_cull, project_vertices
from statecast.metrics import charbonnier_grad
from statecast.netsim import (PROFILES, SchedulerConfig, generate_trace, prepare_session,
                              simulate_session)
from statecast.recovery import RecoveryInput, estimate_flow, fit_enhance, recover
from statecast.scene import CameraPose, SceneModel, render_ground_truth

SEEDS = range(5)
SESSION_FRAMES = 150


def verdict(capsys, n: int, ok: bool, detail: str, seconds: float) -> None:
    with capsys.disabled():
        print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}  [{seconds:.1f} s]")
    assert ok, detail


# --- 1 ------------------------------------------------------------------------------

def test_criterion_01_projection_suite(capsys):
    t0 = time.perf_counter()
    failures = []
    scenes = 24
    for seed in range(scenes):
        scene = random_scene(np.random.default_rng(1000 + seed), n_objects=5, frames=1,
                             rgb=(64, 48), state=(64, 48))
        pose = scene.camera_path[0]
        twice = SceneModel(scene.objects, scene.palette,
                           [pose, CameraPose(pose.view.copy(), pose.proj.copy(), 1)],
                           scene.rgb_resolution, scene.state_resolution)
        if extract_state(twice, 1) != extract_state(twice, 0):
            failures.append(f"identity@{seed}")
        for k in (1, 5):
            s = extract_state(scene, 0, k=k)
            cells = contested_cells(scene, 0, k, scene.state_resolution)
            if set(zip(*np.nonzero(s.occupied))) != set(cells) or any(
                    not np.isclose(s.depth[y, x], min(d), rtol=1e-12) for (y, x), d in cells.items()):
                failures.append(f"nearer-wins@{seed},k={k}")
        if not truly_visible(scene, 0) <= frustum_cull(scene, 0).visible_object_ids:
            failures.append(f"culling@{seed}")
    dt = time.perf_counter() - t0
    verdict(capsys, 1, not failures and dt < 30, f"{scenes} scenes, failures={failures}", dt)


# --- 2 ------------------------------------------------------------------------------

def test_criterion_02_codec_oracle(capsys):
    t0 = time.perf_counter()
    instances, mismatches = 200, 0
    for seed in range(instances):
        frames, rng = random_stream(50_000 + seed)
        assert frames[0].width <= 128 and frames[0].height <= 128
        p = rng.uniform(0.05, 0.5)
        losses = [{pid for pid, _, _ in ef.packet_map if rng.random() < p} for ef in frames]
        decoded, _ = decode_stream(frames, losses)
        for (_, mask), exp in zip(decoded, dependency_mask(frames, losses)):
            mismatches += int(not np.array_equal(~mask.valid, exp))
    dt = time.perf_counter() - t0
    verdict(capsys, 2, mismatches == 0 and dt < 120, f"{instances} instances, {mismatches} mismatches", dt)


# --- 3 ------------------------------------------------------------------------------

def test_criterion_03_lossless_round_trip(capsys):
    t0 = time.perf_counter()
    scene = fixtures.village_toy(frames=3)
    rng = np.random.default_rng(3)
    seqs = [[render_ground_truth(scene, f) for f in range(3)], [textured(rng, 128, 128) for _ in range(3)]]
    bad = 0
    for imgs in seqs:
        frames = encode(imgs, CodecConfig(gop=1, q=1))
        decoded, _ = decode_stream(frames, [set()] * len(frames))
        bad += sum(not (np.array_equal(img, src) and mask.is_clean)
                   for (img, mask), src in zip(decoded, imgs))
    dt = time.perf_counter() - t0
    verdict(capsys, 3, bad == 0, f"{sum(map(len, seqs))} I-frames, {bad} not bit-exact", dt)


# --- 4 ------------------------------------------------------------------------------

def test_criterion_04_recovery_identity(capsys):
    t0 = time.perf_counter()
    scene = fixtures.pan_scene(frames=2)
    prev, cur = render_ground_truth(scene, 0), render_ground_truth(scene, 1)
    s0, s1 = extract_state(scene, 0), extract_state(scene, 1)
    static = recover(RecoveryInput(s0, s0, prev), scene.palette)
    full = recover(RecoveryInput(s0, s1, prev, cur, CorruptionMask.all_valid(480, 272, 1)), scene.palette)
    ok = np.array_equal(static, prev) and np.array_equal(full, cur)
    verdict(capsys, 4, ok, f"static==prev {np.array_equal(static, prev)}, "
                           f"all-valid partial==partial {np.array_equal(full, cur)}", time.perf_counter() - t0)


# --- 5 ------------------------------------------------------------------------------

def test_criterion_05_charbonnier_and_enhance(capsys):
    t0 = time.perf_counter()
    rho = lambda t: np.sqrt(t * t + 1e-24)  # noqa: E731
    worst = 0.0
    for x in (0.0, 1e-6, -1e-6, 0.5, -0.5, 100.0, -100.0):
        h = max(abs(x) * 1e-4, 1e-9) if x else 1e-6
        fd = (rho(x + h) - rho(x - h)) / (2 * h)
        an = float(charbonnier_grad(x))
        if an or fd:
            worst = max(worst, abs(an - fd) / max(abs(an), abs(fd)))
    rng = np.random.default_rng(5)
    w = rng.uniform(0, 230, size=(48, 48, 3))
    p = fit_enhance(w, w + 10.0, np.ones((48, 48), bool))
    gain_ok = bool(np.all(np.abs(p.gain - 1) <= 0.1))
    bias_ok = bool(np.all(np.abs(p.bias - 10) <= 0.5))
    verdict(capsys, 5, worst <= 1e-5 and gain_ok and bias_ok,
            f"max rel grad error {worst:.1e}, gain {np.round(p.gain, 4).tolist()}, "
            f"bias {np.round(p.bias, 3).tolist()}", time.perf_counter() - t0)


# --- 6 ------------------------------------------------------------------------------

def projected_motion(scene, f0, f1, ids, k=5):
    """Median ground-truth state-space displacement of ``ids``' vertices and the cells they land on."""
    W, H = scene.state_resolution
    disp, cells = [], np.zeros((H, W), bool)
    for o in scene.objects:
        if o.id not in ids:
            continue
        a, _, on_a = project_vertices(scene, f0, o, k)
        b, _, on_b = project_vertices(scene, f1, o, k)
        ok = on_a & on_b
        pa = np.c_[(a[ok, 0] + 1) / 2 * W, (1 - a[ok, 1]) / 2 * H]
        pb = np.c_[(b[ok, 0] + 1) / 2 * W, (1 - b[ok, 1]) / 2 * H]
        disp.append(pb - pa)
        cells[np.clip(pb[:, 1].astype(int), 0, H - 1), np.clip(pb[:, 0].astype(int), 0, W - 1)] = True
    return np.median(np.concatenate(disp), axis=0), cells


def flow_errors(scene, groups, pairs):
    errs = []
    for f0, f1 in pairs:
        s0, s1 = extract_state(scene, f0), extract_state(scene, f1)
        flow = estimate_flow(s0, s1, scene.palette)
        for ids in groups:
            truth, cells = projected_motion(scene, f0, f1, ids)
            sel = cells & s1.occupied
            est = np.array([np.median(flow.u[sel]), np.median(flow.v[sel])])
            errs.append(float(np.abs(est - truth).max()))
    return errs


def test_criterion_06_flow_accuracy(capsys):
    t0 = time.perf_counter()
    pairs = [(0, 1), (4, 5), (8, 11), (12, 15)]
    pan = fixtures.pan_scene(frames=16)
    pan_err = flow_errors(pan, [{o.id for o in pan.objects}], pairs)
    tm = fixtures.two_motion_scene(frames=16)
    tm_err = flow_errors(tm, [{o.id for o in tm.objects[:4]}, {o.id for o in tm.objects[4:]}], pairs)

    # constructed motions: an exact 2 px translation and two regions moving 3 px apart
    s = extract_state(pan, 0)
    moved = GameStateFrame(np.roll(s.color_index, 2, axis=1), np.roll(s.depth, 2, axis=1), 1)
    flow = estimate_flow(s, moved, pan.palette)
    occ = moved.occupied
    pan_err.append(float(max(abs(np.median(flow.u[occ]) - 2), abs(np.median(flow.v[occ])))))
    rng = np.random.default_rng(3)
    left, right = blocks_state(rng, region=(4, 56)), blocks_state(rng, region=(72, 124))
    cl, cr = np.roll(left, 3, axis=1), np.roll(right, 3, axis=0)
    flow = estimate_flow(as_state(np.where(left >= 0, left, right)),
                         as_state(np.where(cl >= 0, cl, cr), 1), PALETTE)
    ol, orr = cl >= 0, (cr >= 0) & ~(cl >= 0)
    tm_err.append(float(max(abs(np.median(flow.u[ol]) - 3), abs(np.median(flow.v[ol])))))
    tm_err.append(float(max(abs(np.median(flow.u[orr])), abs(np.median(flow.v[orr]) - 3))))

    ok = max(pan_err) <= 0.5 and max(tm_err) <= 1.0
    verdict(capsys, 6, ok, f"translation max median error {max(pan_err):.3f} px (<=0.5), "
                           f"two-motion {max(tm_err):.3f} px (<=1)", time.perf_counter() - t0)


# --- 7, 8, 9: shared LEO sessions on village_toy ------------------------------------

@pytest.fixture(scope="module")
def leo_sessions():
    t0 = time.perf_counter()
    inputs = prepare_session(fixtures.village_toy(frames=SESSION_FRAMES))
    sched = SchedulerConfig()
    runs: dict[str, list] = {s: [] for s in ("recover", "no-states", "reuse", "fec:70")}
    for seed in SEEDS:
        trace = generate_trace("LEO", 10, seed=seed)
        for scheme in runs:
            runs[scheme].append(simulate_session(inputs, trace, sched, scheme, seed, score_ssim=False))
    return runs, sched, time.perf_counter() - t0


def test_criterion_07_direction_of_effect(capsys, leo_sessions):
    runs, _, dt = leo_sessions
    m = {k: float(np.mean([r.mean_psnr for r in v])) for k, v in runs.items()}
    ok = m["recover"] > m["no-states"] > m["reuse"] and dt < 300
    verdict(capsys, 7, ok, f"mean PSNR over {len(SEEDS)} seeds: with states {m['recover']:.3f} dB, "
                           f"without states {m['no-states']:.3f} dB, reuse {m['reuse']:.3f} dB", dt)


def test_criterion_08_fec_comparison(capsys, leo_sessions):
    t0 = time.perf_counter()
    runs, _, _ = leo_sessions
    rec = float(np.mean([r.mean_psnr for r in runs["recover"]]))
    fec = float(np.mean([r.mean_psnr for r in runs["fec:70"]]))
    rec_over = sum(r.overhead_bytes for r in runs["recover"])
    fec_over = sum(r.overhead_bytes for r in runs["fec:70"])
    ok = rec >= fec and fec_over > rec_over == 0
    verdict(capsys, 8, ok, f"recover {rec:.3f} dB vs FEC 70% {fec:.3f} dB; "
                           f"overhead bytes {rec_over} vs {fec_over}", time.perf_counter() - t0)


def test_criterion_09_timing_algebra(capsys, leo_sessions):
    t0 = time.perf_counter()
    runs, sched, _ = leo_sessions
    recovered = [o for scheme in ("recover", "no-states") for r in runs[scheme] for o in r.outcomes
                 if o.shown == "recovered"]
    worst = max(o.display_ms for o in recovered)
    ok = bool(recovered) and worst <= sched.deadline_ms and SchedulerConfig().timeout_ms == 58.0
    verdict(capsys, 9, ok, f"{len(recovered)} recovered frames, max display {worst:.2f} ms "
                           f"<= {sched.deadline_ms:.2f} ms, default timeout {SchedulerConfig().timeout_ms} ms",
            time.perf_counter() - t0)


# --- 10 -----------------------------------------------------------------------------

def test_criterion_10_determinism(capsys, tmp_path):
    t0 = time.perf_counter()
    scene = tmp_path / "pan.scene"
    cli.main(["scene-gen", "--kind", "pan", "--frames", "10", "--out", str(scene)])
    for name in ("a", "b"):
        assert cli.main(["simulate", "--scene", str(scene), "--profile", "LEO", "--seed", "7",
                         "--scheme", "recover", "--out", str(tmp_path / name)]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    differ = [str(p) for p in files if (tmp_path / "a" / p).read_bytes() != (tmp_path / "b" / p).read_bytes()]
    verdict(capsys, 10, not differ and len(files) > 40,
            f"{len(files)} artifacts compared, {len(differ)} differ", time.perf_counter() - t0)


# --- 11 -----------------------------------------------------------------------------

def test_criterion_11_trace_statistics(capsys):
    t0 = time.perf_counter()
    lines, ok = [], True
    for name, prof in PROFILES.items():
        t = generate_trace(name, 300, seed=0)
        tp_err = t.mean_throughput() / prof.throughput_mbps - 1
        loss_err = (t.mean_loss() - prof.loss_rate) * 100
        ok &= abs(tp_err) <= 0.15 and abs(loss_err) <= 0.3
        lines.append(f"{name} {t.mean_throughput():.1f} Mbps ({tp_err:+.1%}), "
                     f"{t.mean_loss() * 100:.2f}% loss ({loss_err:+.2f} pp)")
    verdict(capsys, 11, ok, "; ".join(lines), time.perf_counter() - t0)
