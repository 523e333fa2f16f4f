"""Command-line entry point: ``statecast <subcommand> ...``.

Subcommands
-----------
scene-gen   write a fixture scene file
render      render ground-truth frames to PPM
extract     extract game states to PGM (+ float depth sidecar)
encode      encode PPM frames into a bitstream
recover     recover one frame from PPM/PGM artifacts
simulate    full pipeline: render, extract, encode, replay a trace, score
report      summarize a report CSV and emit burst statistics as CSV
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import fixtures, netsim
from .codec import CodecConfig, CorruptionMask, encode, write_bitstream
from .gamestate import extract_state, read_state, write_state
from .metrics import psnr, ssim
from .pnm import read_ppm, write_ppm
from .recovery import RecoveryConfig, RecoveryInput, recover_with_details
from .scene import load_scene, render_ground_truth, save_scene

SEED_ENV = "STATECAST_SEED"
PROFILE_CHOICES = (*netsim.PROFILES, "lossless")


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001  every failure is reported with its stage
        raise StageError(name, exc) from exc


def parse_resolution(text: str) -> tuple[int, int]:
    try:
        w, h = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    if w <= 0 or h <= 0:
        raise argparse.ArgumentTypeError(f"resolution must be positive, got {text!r}")
    return w, h


def resolve_seed(seed: int | None) -> int:
    """Explicit seed, else ``$STATECAST_SEED``, else 0."""
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"{SEED_ENV} must be an integer, got {env!r}") from None


@dataclass
class RunConfig:
    """All knobs of one invocation, checked by :meth:`validate` before any work starts."""

    subcommand: str
    scene: Path | None = None
    out: Path | None = None
    kind: str | None = None
    frames: int | None = None
    seed: int = 0
    state_res: tuple[int, int] | None = None
    downsample: int = 5
    gop: int = 30
    q: int = 8
    mtu: int = 1200
    profile: str = "LEO"
    trace: Path | None = None
    scheme: str = "recover"
    budget_ms: float = 80.0
    timeout_ms: float | None = None
    fec_overhead: float | None = None
    ssim: bool = True
    extras: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.frames is not None and self.frames < 1:
            raise ValueError("--frames must be >= 1")
        if self.downsample < 1:
            raise ValueError("--downsample must be >= 1")
        if self.state_res is not None and min(self.state_res) < 8:
            raise ValueError("--state-res must be at least 8x8")
        self.codec_config()
        if self.subcommand == "recover" and (self.extras.get("partial") is None) != (
                self.extras.get("mask") is None):
            raise ValueError("--partial and --mask must be given together")
        if self.subcommand == "simulate":
            self.scheduler()
            netsim.parse_scheme(self.scheme)
            if self.trace is None and self.profile not in PROFILE_CHOICES:
                raise ValueError(f"unknown profile {self.profile!r}")

    def codec_config(self) -> CodecConfig:
        return CodecConfig(gop=self.gop, q=self.q, mtu=self.mtu)

    def scheduler(self) -> netsim.SchedulerConfig:
        return netsim.SchedulerConfig(budget_ms=self.budget_ms, timeout_ms=self.timeout_ms,
                                      fec_overhead=self.fec_overhead)

    def check_scene(self, scene) -> None:
        """Checks that need the loaded scene."""
        if self.frames is not None and self.frames > scene.num_frames:
            raise ValueError(f"--frames {self.frames} exceeds the scene's {scene.num_frames} frames")
        if self.state_res is not None:
            W, H = scene.rgb_resolution
            if self.state_res[0] > W or self.state_res[1] > H:
                raise ValueError("--state-res exceeds the scene's RGB resolution")


# --- parser -------------------------------------------------------------------------

def _add_scene(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scene", type=Path, required=True, help="scene file")
    p.add_argument("--frames", type=int, help="number of frames to process (default: all)")


def _add_state(p: argparse.ArgumentParser) -> None:
    p.add_argument("--state-res", type=parse_resolution, metavar="WxH",
                   help="game state resolution (default: the scene's)")
    p.add_argument("--downsample", type=int, default=5, metavar="K",
                   help="vertex stride for state extraction (default: 5)")


def _add_codec(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gop", type=int, default=30, help="I-frame interval (default: 30)")
    p.add_argument("--q", type=int, default=8, help="quantizer step (default: 8)")
    p.add_argument("--mtu", type=int, default=1200, help="packet payload limit in bytes (default: 1200)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statecast",
        description="Game-state guided recovery of lossy cloud-gaming video (simulator).",
        epilog=f"Seeds default to ${SEED_ENV} when --seed is omitted, else 0.")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("scene-gen", help="write a fixture scene")
    p.add_argument("--kind", choices=fixtures.SCENE_KINDS, required=True)
    p.add_argument("--frames", type=int, help="camera path length (default depends on kind)")
    p.add_argument("--seed", type=int, help=f"fixture seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--out", type=Path, required=True, help="scene file to write")

    p = sub.add_parser("render", help="render ground-truth frames to PPM")
    _add_scene(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("extract", help="extract game states to PGM")
    _add_scene(p)
    _add_state(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("encode", help="encode PPM frames into a bitstream")
    p.add_argument("--frames-dir", type=Path, required=True, help="directory of frame_*.ppm")
    _add_codec(p)
    p.add_argument("--out", type=Path, required=True, help="bitstream file to write")

    p = sub.add_parser("recover", help="recover one frame from PPM/PGM artifacts")
    p.add_argument("--scene", type=Path, required=True, help="scene file (supplies the palette)")
    p.add_argument("--prev-frame", type=Path, required=True, help="previous shown frame (PPM)")
    p.add_argument("--prev-state", type=Path, required=True, help="previous game state (PGM)")
    p.add_argument("--curr-state", type=Path, required=True, help="current game state (PGM)")
    p.add_argument("--partial", type=Path, help="partially decoded current frame (PPM)")
    p.add_argument("--mask", type=Path, help="corruption mask of --partial (PGM)")
    p.add_argument("--truth", type=Path, help="ground truth (PPM) for PSNR/SSIM in the record")
    p.add_argument("--frame-index", type=int, default=0, help="frame index for the record")
    p.add_argument("--record", type=Path, help="append a JSON-lines record here")
    p.add_argument("--out", type=Path, required=True, help="recovered frame to write (PPM)")

    p = sub.add_parser("simulate", help="run the full pipeline over a network trace")
    _add_scene(p)
    _add_state(p)
    _add_codec(p)
    p.add_argument("--profile", choices=PROFILE_CHOICES, default="LEO",
                   help="network profile for a generated trace (default: LEO)")
    p.add_argument("--trace", type=Path, help="replay this trace CSV instead of generating one")
    p.add_argument("--seed", type=int, help=f"trace and loss seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--scheme", default="recover",
                   help="recover, no-states, reuse or fec:<pct> (default: recover)")
    p.add_argument("--budget-ms", type=float, default=80.0, help="latency budget (default: 80)")
    p.add_argument("--timeout-ms", type=float,
                   help="recovery timeout (default: budget minus inference time)")
    p.add_argument("--no-ssim", dest="ssim", action="store_false", help="skip SSIM scoring")
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("report", help="summarize a report CSV")
    p.add_argument("--report", type=Path, required=True, help="report CSV from simulate")
    p.add_argument("--baseline", type=Path, help="lossless report CSV for PSNR reductions")
    p.add_argument("--out", type=Path, help="write burst statistics CSV here")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    known = set(RunConfig.__dataclass_fields__)
    values = {k: v for k, v in vars(args).items() if k in known and v is not None}
    extras = {k: v for k, v in vars(args).items() if k not in known}
    if args.subcommand in ("scene-gen", "simulate"):
        values["seed"] = resolve_seed(args.seed)
    cfg = RunConfig(**values, extras=extras)
    cfg.validate()
    return cfg


# --- subcommands ----------------------------------------------------------------------

def _frame_count(cfg: RunConfig, scene) -> int:
    return cfg.frames if cfg.frames is not None else scene.num_frames


def _load(cfg: RunConfig):
    with stage("load-scene"):
        scene = load_scene(cfg.scene)
        cfg.check_scene(scene)
    return scene


def cmd_scene_gen(cfg: RunConfig) -> int:
    with stage("scene-gen"):
        scene = fixtures.make_scene(cfg.kind, cfg.frames, cfg.seed)
        cfg.out.parent.mkdir(parents=True, exist_ok=True)
        save_scene(scene, cfg.out)
    print(f"wrote {cfg.out}: {len(scene.objects)} objects, {scene.num_frames} frames")
    return 0


def cmd_render(cfg: RunConfig) -> int:
    scene = _load(cfg)
    with stage("render"):
        d = cfg.out / "frames"
        d.mkdir(parents=True, exist_ok=True)
        for f in range(_frame_count(cfg, scene)):
            write_ppm(d / f"frame_{f:04d}.ppm", render_ground_truth(scene, f))
    return 0


def cmd_extract(cfg: RunConfig) -> int:
    scene = _load(cfg)
    with stage("extract"):
        d = cfg.out / "states"
        d.mkdir(parents=True, exist_ok=True)
        for f in range(_frame_count(cfg, scene)):
            write_state(extract_state(scene, f, cfg.downsample, cfg.state_res), d / f"state_{f:04d}.pgm")
    return 0


def cmd_encode(cfg: RunConfig) -> int:
    with stage("encode"):
        paths = sorted(Path(cfg.extras["frames_dir"]).glob("frame_*.ppm"))
        if not paths:
            raise FileNotFoundError(f"no frame_*.ppm in {cfg.extras['frames_dir']}")
        codec = cfg.codec_config()
        encoded = encode((read_ppm(p) for p in paths), codec)
        cfg.out.parent.mkdir(parents=True, exist_ok=True)
        write_bitstream(cfg.out, encoded, codec)
    print(f"wrote {cfg.out}: {len(encoded)} frames")
    return 0


def _trace_for(cfg: RunConfig, frames: int) -> netsim.NetworkTrace:
    duration = max(10.0, math.ceil(frames / 30.0) + 1.0)
    if cfg.trace is not None:
        return netsim.read_trace_csv(cfg.trace, seed=cfg.seed)
    if cfg.profile == "lossless":
        return netsim.constant_trace(duration, name="lossless")
    return netsim.generate_trace(cfg.profile, duration, cfg.seed)


def cmd_simulate(cfg: RunConfig) -> int:
    scene = _load(cfg)
    n = _frame_count(cfg, scene)
    out = cfg.out
    with stage("prepare"):
        for sub in ("frames", "states", "masks", "shown"):
            (out / sub).mkdir(parents=True, exist_ok=True)
    with stage("render+extract+encode"):
        inputs = netsim.prepare_session(scene, cfg.codec_config(), n, cfg.downsample, cfg.state_res)
    with stage("write-artifacts"):
        for f in range(n):
            write_ppm(out / "frames" / f"frame_{f:04d}.ppm", inputs.truth[f])
            write_state(inputs.states[f], out / "states" / f"state_{f:04d}.pgm")
        write_bitstream(out / "bitstream.scv", inputs.encoded, inputs.codec)
    with stage("trace"):
        trace = _trace_for(cfg, n)
        netsim.write_trace_csv(out / "trace.csv", trace)
    with stage("simulate"):
        report = netsim.simulate_session(inputs, trace, cfg.scheduler(), cfg.scheme, cfg.seed,
                                         recovery=RecoveryConfig(), score_ssim=cfg.ssim,
                                         keep_frames=True)
    with stage("write-report"):
        for f, (frame, mask) in enumerate(zip(report.frames, report.masks)):
            write_ppm(out / "shown" / f"shown_{f:04d}.ppm", frame)
            mask.to_pgm(out / "masks" / f"mask_{f:04d}.pgm")
        netsim.write_report_csv(out / "report.csv", report)
        netsim.write_report_json(out / "report.json", report)
    s = report.summary()
    print(f"{s['scheme']} on {s['profile']}: mean PSNR {s['mean_psnr_db']:.2f} dB, "
          f"pixel loss {s['pixel_loss_rate']:.3f}, statuses {s['status_counts']}")
    return 0


def cmd_recover(cfg: RunConfig) -> int:
    x = cfg.extras
    scene = _load(cfg)
    with stage("read-inputs"):
        prev = read_ppm(x["prev_frame"])
        prev_state = read_state(x["prev_state"], frame_index=x["frame_index"] - 1)
        curr_state = read_state(x["curr_state"], frame_index=x["frame_index"])
        partial = read_ppm(x["partial"]) if x.get("partial") else None
        mask = CorruptionMask.from_pgm(x["mask"], x["frame_index"]) if x.get("mask") else None
        truth = read_ppm(x["truth"]) if x.get("truth") else None
    with stage("recover"):
        res = recover_with_details(RecoveryInput(prev_state, curr_state, prev, partial, mask),
                                   scene.palette, RecoveryConfig())
    with stage("write-output"):
        cfg.out.parent.mkdir(parents=True, exist_ok=True)
        write_ppm(cfg.out, res.frame)
        record = {
            "frame_index": x["frame_index"],
            "psnr": None if truth is None else round(psnr(res.frame, truth), 6),
            "ssim": None if truth is None else round(ssim(res.frame, truth), 6),
            "coverage_fraction": round(res.coverage_fraction, 6),
            "enhance_gain": [round(float(g), 6) for g in res.enhance.gain],
            "enhance_bias": [round(float(b), 6) + 0.0 for b in res.enhance.bias],
        }
        line = json.dumps(record, sort_keys=True)
        if x.get("record") is not None:
            with open(x["record"], "a") as fh:
                fh.write(line + "\n")
    print(line)
    return 0


def _read_psnr(path: Path) -> tuple[str, list[float]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} holds no frames")
    return rows[0]["scheme"], [float(r["psnr_db"]) for r in rows]


def cmd_report(cfg: RunConfig) -> int:
    path = Path(cfg.extras["report"])
    with stage("report"):
        outcomes, scores = netsim.read_report_csv(path)
        scheme, _ = _read_psnr(path)
        rep = netsim.SessionReport(scheme, "replay", 0, outcomes, scores)
        base = None
        if cfg.extras.get("baseline") is not None:
            _, base = _read_psnr(Path(cfg.extras["baseline"]))
            if len(base) != len(scores):
                raise ValueError("baseline and report cover different frame counts")
        bursts = netsim.burst_report(rep, base)
        summary = rep.summary()
        for key in ("profile", "seed", "payload_bytes", "overhead_bytes", "fec_overhead"):
            summary.pop(key)
        summary["mean_run_length"] = round(bursts.mean_run_length, 6)
        print(json.dumps(summary, indent=2, sort_keys=True))
        if cfg.out is not None:
            with open(cfg.out, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(("run_length", "runs", "mean_psnr_reduction_db", "position",
                            "mean_psnr_reduction_at_position_db"))
                lengths = sorted(set(bursts.histogram) | set(bursts.reduction_by_position))
                for k in lengths:
                    w.writerow((k, bursts.histogram.get(k, 0),
                                f"{bursts.reduction_by_length[k]:.6f}" if k in bursts.reduction_by_length else "",
                                k,
                                f"{bursts.reduction_by_position[k]:.6f}" if k in bursts.reduction_by_position else ""))
    return 0


COMMANDS = {"scene-gen": cmd_scene_gen, "render": cmd_render, "extract": cmd_extract,
            "encode": cmd_encode, "recover": cmd_recover, "simulate": cmd_simulate, "report": cmd_report}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ValueError as exc:
        parser.error(str(exc))
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except StageError as exc:
        print(f"statecast: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
