"""Trace-driven session simulation.

A session replays one encoded game video over a synthetic network trace.
Each frame's packets are dropped according to the trace row covering its
send time, the arrival time follows the latency model, and the timeout
scheduler decides whether the frame is shown as decoded, recovered from a
partial frame, predicted from scratch, or replaced by the last shown frame.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .codec import CodecConfig, CorruptionMask, EncodedFrame, Packet, decode_with_mask, encode, packetize
from .gamestate import GameStateFrame, extract_state
from .metrics import FrameScore, psnr, ssim
from .recovery import (FlowField, RecoveryConfig, RecoveryInput, estimate_flow_from_frames,
                       recover_with_details)
from .scene import SceneModel, render_ground_truth

ROW_MS = 100.0


# --- traces ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Profile:
    throughput_mbps: float
    loss_rate: float
    rtt_ms: float


PROFILES = {
    "4G": Profile(32.5, 0.032, 36.0),
    "5G": Profile(61.7, 0.023, 30.0),
    "WiFi": Profile(72.8, 0.009, 15.0),
    "LEO": Profile(28.9, 0.094, 42.0),
}


@dataclass(frozen=True)
class GilbertConfig:
    """Two-state burst loss process over trace rows.

    Rows in the bad state carry ``bad_loss`` packet loss, rows in the good
    state ``good_loss``. The good-to-bad transition probability is derived
    so that the stationary mean equals the profile's loss rate.
    """

    bad_loss: float = 0.5
    good_loss: float = 0.0
    mean_burst_rows: float = 5.0

    def transitions(self, mean_loss: float) -> tuple[float, float]:
        if not self.good_loss <= mean_loss <= self.bad_loss:
            raise ValueError(f"loss rate {mean_loss} outside [{self.good_loss}, {self.bad_loss}]")
        p_bg = 1.0 / self.mean_burst_rows
        pi_bad = (mean_loss - self.good_loss) / (self.bad_loss - self.good_loss)
        if pi_bad >= 1.0:
            return 1.0, 0.0
        return pi_bad / (1.0 - pi_bad) * p_bg, p_bg


@dataclass
class NetworkTrace:
    t_ms: np.ndarray
    throughput_mbps: np.ndarray
    loss_rate: np.ndarray
    rtt_ms: np.ndarray
    name: str = "custom"
    seed: int = 0

    def __post_init__(self):
        self.t_ms = np.asarray(self.t_ms, dtype=np.float64)
        self.throughput_mbps = np.asarray(self.throughput_mbps, dtype=np.float64)
        self.loss_rate = np.asarray(self.loss_rate, dtype=np.float64)
        self.rtt_ms = np.asarray(self.rtt_ms, dtype=np.float64)
        n = len(self.t_ms)
        if n == 0 or not all(len(a) == n for a in (self.throughput_mbps, self.loss_rate, self.rtt_ms)):
            raise ValueError("trace columns must be non-empty and of equal length")
        if np.any(np.diff(self.t_ms) <= 0):
            raise ValueError("trace timestamps must be strictly increasing")
        if np.any((self.loss_rate < 0) | (self.loss_rate > 1)):
            raise ValueError("loss rates must lie in [0, 1]")
        if np.any(self.throughput_mbps <= 0):
            raise ValueError("throughput must be positive")
        if np.any(self.rtt_ms < 0):
            raise ValueError("rtt must be non-negative")

    def __len__(self) -> int:
        return len(self.t_ms)

    @property
    def end_ms(self) -> float:
        step = self.t_ms[-1] - self.t_ms[-2] if len(self) > 1 else ROW_MS
        return float(self.t_ms[-1] + step)

    def row_at(self, t_ms: float) -> int:
        if t_ms < self.t_ms[0] or t_ms >= self.end_ms:
            raise ValueError(f"time {t_ms:.1f} ms is outside the trace")
        return int(np.searchsorted(self.t_ms, t_ms, side="right") - 1)

    def mean_loss(self) -> float:
        return float(self.loss_rate.mean())

    def mean_throughput(self) -> float:
        return float(self.throughput_mbps.mean())


def _ar1_normal(rng: np.random.Generator, n: int, rho: float) -> np.ndarray:
    """Unit-variance AR(1) Gaussian sequence."""
    z = rng.standard_normal(n)
    out = np.empty(n)
    out[0] = z[0]
    s = math.sqrt(1.0 - rho * rho)
    for i in range(1, n):
        out[i] = rho * out[i - 1] + s * z[i]
    return out


def generate_trace(profile: str, duration_s: float = 300.0, seed: int = 0,
                   gilbert: GilbertConfig | None = None, bursty: bool = True,
                   throughput_cv: float = 0.3, rho: float = 0.8) -> NetworkTrace:
    """Synthetic trace with 100 ms rows matching a profile's means.

    Throughput is lognormal around the profile mean with an AR(1) log
    process. Loss follows a Gilbert process; its row values are rescaled so
    the trace mean equals the profile rate exactly. ``bursty=False`` gives
    every row the mean rate instead, for i.i.d. packet losses.
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {', '.join(PROFILES)}")
    if duration_s < 10:
        raise ValueError("trace duration must be at least 10 s")
    prof = PROFILES[profile]
    g = gilbert or GilbertConfig()
    n = int(round(duration_s * 1000.0 / ROW_MS))
    rng = np.random.default_rng(np.random.SeedSequence([seed, sorted(PROFILES).index(profile)]))

    sigma = math.sqrt(math.log1p(throughput_cv ** 2))
    log_tp = math.log(prof.throughput_mbps) - 0.5 * sigma ** 2 + sigma * _ar1_normal(rng, n, rho)
    throughput = np.exp(log_tp)

    if bursty:
        p_gb, p_bg = g.transitions(prof.loss_rate)
        u = rng.random(n)
        bad = np.empty(n, dtype=bool)
        state = u[0] < p_gb / (p_gb + p_bg) if p_gb + p_bg > 0 else False
        for i in range(n):
            if i:
                state = (u[i] >= p_bg) if state else (u[i] < p_gb)
            bad[i] = state
        loss = np.where(bad, g.bad_loss, g.good_loss)
        if loss.mean() > 0:
            loss = np.clip(loss * (prof.loss_rate / loss.mean()), 0.0, 1.0)
    else:
        rng.random(n)
        loss = np.full(n, prof.loss_rate)

    rtt = np.maximum(1.0, prof.rtt_ms * (1.0 + 0.1 * _ar1_normal(rng, n, rho)))
    return NetworkTrace(np.arange(n) * ROW_MS, throughput, loss, rtt, profile, seed)


def constant_trace(duration_s: float, throughput_mbps: float = 1000.0, loss_rate: float = 0.0,
                   rtt_ms: float = 20.0, name: str = "constant") -> NetworkTrace:
    n = int(round(duration_s * 1000.0 / ROW_MS))
    return NetworkTrace(np.arange(n) * ROW_MS, np.full(n, throughput_mbps), np.full(n, loss_rate),
                        np.full(n, rtt_ms), name)


TRACE_COLUMNS = ("t_ms", "throughput_mbps", "loss_rate", "rtt_ms")


def write_trace_csv(path: str | Path, trace: NetworkTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in zip(trace.t_ms, trace.throughput_mbps, trace.loss_rate, trace.rtt_ms):
            w.writerow([repr(float(x)) for x in row])


def read_trace_csv(path: str | Path, name: str | None = None, seed: int = 0) -> NetworkTrace:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"trace header must be {','.join(TRACE_COLUMNS)}")
        rows = [[float(r[c]) for c in TRACE_COLUMNS] for r in reader]
    if not rows:
        raise ValueError("trace has no rows")
    cols = np.array(rows).T
    return NetworkTrace(*cols, name=name or Path(path).stem, seed=seed)


# --- latency and scheduling -----------------------------------------------------------

@dataclass(frozen=True)
class LatencyModel:
    t_server_render_ms: float = 3.6
    t_server_encode_ms: float = 4.5
    t_client_decode_ms: float = 7.2
    t_inference_ms: float = 22.0
    t_gs_ms: float = 7.0

    def __post_init__(self):
        if min(asdict(self).values()) < 0:
            raise ValueError("latencies must be non-negative")

    @staticmethod
    def tx_ms(nbytes: float, throughput_mbps: float) -> float:
        return nbytes * 8.0 / (throughput_mbps * 1000.0)

    def arrival_ms(self, rtt_ms: float, nbytes: float, throughput_mbps: float,
                   fec_overhead: float = 0.0) -> float:
        """Input-to-decoded time of a frame that is not lost."""
        return (rtt_ms / 2.0 + self.t_server_render_ms + self.t_server_encode_ms
                + self.tx_ms(nbytes * (1.0 + fec_overhead), throughput_mbps) + self.t_client_decode_ms)

    def recovery_display_ms(self, arrival_ms: float, timeout_ms: float) -> float:
        """Display time of a recovered frame: inference starts at min(timeout, arrival)."""
        return max(min(timeout_ms, arrival_ms), self.t_gs_ms) + self.t_inference_ms


@dataclass(frozen=True)
class SchedulerConfig:
    budget_ms: float = 80.0
    frame_interval_ms: float = 1000.0 / 30.0
    timeout_ms: float | None = None
    fec_overhead: float | None = None
    t_inference_ms: float = 22.0

    def __post_init__(self):
        if self.timeout_ms is None:
            object.__setattr__(self, "timeout_ms", self.budget_ms - self.t_inference_ms)
        if not 0 < self.timeout_ms < self.budget_ms:
            raise ValueError(f"timeout {self.timeout_ms} ms must lie in (0, budget={self.budget_ms} ms)")
        if self.frame_interval_ms <= 0:
            raise ValueError("frame interval must be positive")
        if self.fec_overhead is not None and not 0.0 <= self.fec_overhead <= 1.0:
            raise ValueError("FEC overhead must lie in [0, 1]")

    @property
    def deadline_ms(self) -> float:
        return self.budget_ms + self.frame_interval_ms


class Status(str, Enum):
    DELIVERED = "DELIVERED"
    PARTIAL_RECOVERED = "PARTIAL_RECOVERED"
    PREDICTED = "PREDICTED"
    DELIVERED_LATE_DISCARDED = "DELIVERED_LATE_DISCARDED"


@dataclass
class FrameOutcome:
    frame_index: int
    status: Status
    arrival_ms: float             # inf when no packet arrives
    display_ms: float
    pixel_loss: float
    extraction_triggered: bool
    packets: int = 0
    packets_lost: int = 0
    bytes_sent: int = 0
    shown: str = "decoded"        # decoded | recovered | reused
    transport_lost: bool = False  # any packet lost, or the frame missed its deadline


# --- session inputs and loss draws ----------------------------------------------------

@dataclass
class SessionInputs:
    """Everything a session needs that does not depend on the network."""

    scene: SceneModel
    codec: CodecConfig
    truth: list[np.ndarray]
    encoded: list[EncodedFrame]
    packets: list[list[Packet]]
    states: list[GameStateFrame]

    @property
    def num_frames(self) -> int:
        return len(self.encoded)

    def reconstruction(self, f: int) -> np.ndarray:
        return self.encoded[f].recon


def prepare_session(scene: SceneModel, codec: CodecConfig | None = None, frames: int | None = None,
                    k: int = 5, state_resolution: tuple[int, int] | None = None) -> SessionInputs:
    """Render, extract states, encode and packetize ``frames`` frames of ``scene``."""
    codec = codec or CodecConfig()
    n = len(scene.camera_path) if frames is None else frames
    if not 1 <= n <= len(scene.camera_path):
        raise ValueError(f"frame count {n} outside 1..{len(scene.camera_path)}")
    truth = [render_ground_truth(scene, f) for f in range(n)]
    states = [extract_state(scene, f, k, state_resolution) for f in range(n)]
    encoded = encode(truth, codec)
    packets = [packetize(ef, codec.mtu) for ef in encoded]
    return SessionInputs(scene, codec, truth, encoded, packets, states)


def _draws(seed: int, frame: int, stream: int, n: int) -> np.ndarray:
    return np.random.default_rng(np.random.SeedSequence([seed, frame, stream])).random(n)


@dataclass
class _Transport:
    lost: np.ndarray              # per data packet
    arrival_ms: float
    bytes_sent: int
    fec_ok: bool = False


def _transport(inputs: SessionInputs, trace: NetworkTrace, sched: SchedulerConfig,
               latency: LatencyModel, seed: int, fec: float) -> list[_Transport]:
    out = []
    for f, pkts in enumerate(inputs.packets):
        send = f * sched.frame_interval_ms
        row = trace.row_at(send)
        p = trace.loss_rate[row]
        lost = _draws(seed, f, 0, len(pkts)) < p
        nbytes = sum(pk.payload_bytes for pk in pkts)
        arrival = latency.arrival_ms(trace.rtt_ms[row], nbytes, trace.throughput_mbps[row], fec)
        t = _Transport(lost, arrival, int(round(nbytes * (1.0 + fec))))
        parity = int(math.floor(fec * len(pkts)))
        parity_lost = int((_draws(seed, f, 1, parity) < p).sum()) if parity else 0
        t.fec_ok = int(lost.sum()) + parity_lost <= parity
        out.append(t)
    return out


# --- reports --------------------------------------------------------------------------

def run_lengths(flags: Sequence[bool]) -> list[int]:
    runs, cur = [], 0
    for x in flags:
        if x:
            cur += 1
        elif cur:
            runs.append(cur)
            cur = 0
    if cur:
        runs.append(cur)
    return runs


def conditional_loss_probability(lost: Sequence[bool]) -> float:
    """P(frame f lost | frame f-1 lost); NaN when no frame before the last is lost."""
    lost = list(lost)
    prev = [i for i in range(1, len(lost)) if lost[i - 1]]
    if not prev:
        return float("nan")
    return sum(lost[i] for i in prev) / len(prev)


@dataclass
class SessionReport:
    scheme: str
    profile: str
    seed: int
    outcomes: list[FrameOutcome]
    scores: list[FrameScore]
    fec_overhead: float = 0.0
    payload_bytes: int = 0
    frames: list[np.ndarray] | None = field(default=None, repr=False, compare=False)
    masks: list[CorruptionMask] | None = field(default=None, repr=False, compare=False)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([s.psnr for s in self.scores]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([s.ssim for s in self.scores]))

    @property
    def pixel_loss_rate(self) -> float:
        return float(np.mean([o.pixel_loss for o in self.outcomes]))

    @property
    def bytes_sent(self) -> int:
        return int(sum(o.bytes_sent for o in self.outcomes))

    @property
    def overhead_bytes(self) -> int:
        return self.bytes_sent - self.payload_bytes

    @property
    def corrupt_runs(self) -> list[int]:
        return run_lengths([o.status is not Status.DELIVERED for o in self.outcomes])

    @property
    def conditional_loss(self) -> float:
        return conditional_loss_probability([o.transport_lost for o in self.outcomes])

    def status_counts(self) -> dict[str, int]:
        counts = {s.value: 0 for s in Status}
        for o in self.outcomes:
            counts[o.status.value] += 1
        return counts

    def summary(self) -> dict:
        runs = self.corrupt_runs
        cond = self.conditional_loss
        return {
            "scheme": self.scheme,
            "profile": self.profile,
            "seed": self.seed,
            "frames": len(self.outcomes),
            "mean_psnr_db": round(self.mean_psnr, 6),
            "mean_ssim": None if math.isnan(self.mean_ssim) else round(self.mean_ssim, 6),
            "pixel_loss_rate": round(self.pixel_loss_rate, 6),
            "status_counts": self.status_counts(),
            "mean_corrupt_run": round(float(np.mean(runs)), 6) if runs else 0.0,
            "max_corrupt_run": max(runs, default=0),
            "conditional_loss_probability": None if math.isnan(cond) else round(cond, 6),
            "payload_bytes": self.payload_bytes,
            "bytes_sent": self.bytes_sent,
            "overhead_bytes": self.overhead_bytes,
            "fec_overhead": self.fec_overhead,
        }


REPORT_COLUMNS = ("frame_index", "scheme", "status", "shown", "arrival_ms", "display_ms",
                  "packets", "packets_lost", "bytes_sent", "transport_lost", "extraction_triggered",
                  "pixel_loss", "psnr_db", "ssim")


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.6f}"


def write_report_csv(path: str | Path, report: SessionReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for o, s in zip(report.outcomes, report.scores):
            w.writerow([o.frame_index, report.scheme, o.status.value, o.shown, _fmt(o.arrival_ms),
                        _fmt(o.display_ms), o.packets, o.packets_lost, o.bytes_sent,
                        int(o.transport_lost), int(o.extraction_triggered), _fmt(o.pixel_loss),
                        _fmt(s.psnr), _fmt(s.ssim)])


def read_report_csv(path: str | Path) -> tuple[list[FrameOutcome], list[FrameScore]]:
    outcomes, scores = [], []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            f = int(r["frame_index"])
            outcomes.append(FrameOutcome(f, Status(r["status"]), float(r["arrival_ms"]),
                                         float(r["display_ms"]), float(r["pixel_loss"]),
                                         bool(int(r["extraction_triggered"])), int(r["packets"]),
                                         int(r["packets_lost"]), int(r["bytes_sent"]), r["shown"],
                                         bool(int(r["transport_lost"]))))
            scores.append(FrameScore(f, float(r["psnr_db"]), float(r["ssim"]), float(r["pixel_loss"])))
    return outcomes, scores


def write_report_json(path: str | Path, report: SessionReport) -> None:
    with open(path, "w") as fh:
        json.dump(report.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- simulation -----------------------------------------------------------------------

SCHEMES = ("recover", "no-states", "reuse")


def parse_scheme(text: str) -> tuple[str, float]:
    """``recover`` | ``no-states`` | ``reuse`` | ``fec:<pct>`` -> (name, fec fraction).

    A bare ``fec`` parses with overhead 0; the session then takes the
    overhead from its scheduler config.
    """
    if text in SCHEMES:
        return text, 0.0
    if text == "fec":
        return "fec", 0.0
    if text.startswith("fec:"):
        try:
            pct = float(text[4:])
        except ValueError:
            raise ValueError(f"bad FEC percentage in {text!r}") from None
        if not 0.0 <= pct <= 100.0:
            raise ValueError("FEC percentage must lie in [0, 100]")
        return "fec", pct / 100.0
    raise ValueError(f"unknown scheme {text!r}; choose recover, no-states, reuse or fec:<pct>")


def simulate_session(inputs: SessionInputs, trace: NetworkTrace, sched: SchedulerConfig | None = None,
                     scheme: str = "recover", seed: int = 0, latency: LatencyModel | None = None,
                     recovery: RecoveryConfig | None = None, psnr_reference: str = "source",
                     score_ssim: bool = True, keep_frames: bool = False) -> SessionReport:
    """Replay ``inputs`` over ``trace`` under one display scheme.

    Schemes: ``recover`` (state-guided recovery), ``no-states`` (the same
    pipeline with flow from the last two shown frames), ``reuse`` (repeat
    the last shown frame) and ``fec:<pct>`` (erasure-coded transport, reuse
    on failure). Packet losses depend only on ``seed``, so schemes run with
    the same seed see the same losses.
    """
    sched = sched or SchedulerConfig()
    latency = latency or LatencyModel(t_inference_ms=sched.t_inference_ms)
    name, fec = parse_scheme(scheme)
    if scheme == "fec":
        if sched.fec_overhead is None:
            raise ValueError("scheme 'fec' needs SchedulerConfig.fec_overhead")
        fec = sched.fec_overhead
    if psnr_reference not in ("source", "reconstruction"):
        raise ValueError("psnr_reference must be 'source' or 'reconstruction'")
    n = inputs.num_frames
    if (n - 1) * sched.frame_interval_ms >= trace.end_ms:
        raise ValueError(f"trace covers {trace.end_ms:.0f} ms but the session needs "
                         f"{n * sched.frame_interval_ms:.0f} ms")
    recovering = name in ("recover", "no-states")
    cfg = recovery or RecoveryConfig()
    palette = inputs.scene.palette
    W, H = inputs.scene.rgb_resolution
    state_res = (inputs.states[0].width, inputs.states[0].height)
    timeout = sched.timeout_ms if recovering else sched.deadline_ms
    transport = _transport(inputs, trace, sched, latency, seed, fec)

    outcomes: list[FrameOutcome] = []
    scores: list[FrameScore] = []
    kept: list[np.ndarray] = []
    kept_masks: list[CorruptionMask] = []
    shown_prev: np.ndarray | None = None
    shown_prev2: np.ndarray | None = None
    dec_ref: tuple[np.ndarray, CorruptionMask] | None = None
    prev_lost = False
    for f in range(n):
        ef, pkts, tr = inputs.encoded[f], inputs.packets[f], transport[f]
        all_lost = bool(tr.lost.all())
        late = tr.arrival_ms > sched.deadline_ms
        lost = tr.lost
        if name == "fec" and tr.fec_ok:
            # parity repairs the frame; otherwise the arrived data packets are used as-is
            lost, all_lost = np.zeros_like(lost), False
        late_fail = late
        if late_fail:
            lost = np.ones_like(lost)
        marked = [Packet(p.packet_id, p.frame_index, p.payload_bytes, p.mb_start, p.mb_stop, bool(x))
                  for p, x in zip(pkts, lost)]
        decoded, mask = decode_with_mask(ef, marked, dec_ref)
        dec_ref = (decoded, mask)
        transport_lost = bool(lost.any())
        arrival = math.inf if all_lost else tr.arrival_ms

        if late_fail:
            status = Status.DELIVERED_LATE_DISCARDED
        elif arrival <= timeout and mask.is_clean:
            status = Status.DELIVERED
        elif arrival <= timeout:
            status = Status.PARTIAL_RECOVERED
        else:
            status = Status.PREDICTED
        if status is Status.DELIVERED:
            shown, how, display = decoded, "decoded", arrival
            pixel_loss = 0.0
        elif shown_prev is None:
            # nothing to fall back on yet
            shown, how, display = decoded, "decoded", min(arrival, sched.deadline_ms)
            pixel_loss = 1.0 - float(mask.valid.mean())
        elif not recovering:
            shown, how, display = shown_prev, "reused", min(arrival, sched.deadline_ms)
            pixel_loss = 1.0 - float(mask.valid.mean()) if not late_fail else 1.0
        else:
            partial = status is Status.PARTIAL_RECOVERED and not all_lost
            flow = None
            if name == "no-states":
                flow = (estimate_flow_from_frames(shown_prev2, shown_prev, state_res, config=cfg)
                        if shown_prev2 is not None else FlowField.zeros(*state_res))
            inp = RecoveryInput(inputs.states[f - 1] if f else None, inputs.states[f], shown_prev,
                                decoded if partial else None, mask if partial else None)
            shown = recover_with_details(inp, palette, cfg, flow).frame
            if status is Status.PREDICTED and not late_fail and not all_lost:
                # late pixels that beat the deadline replace recovered ones
                valid = mask.pixel_valid()
                shown = np.where(valid[..., None], decoded, shown)
            how = "recovered"
            display = latency.recovery_display_ms(arrival, sched.timeout_ms)
            # the recovered frame is complete, so the decoder predicts from it
            dec_ref = (shown, CorruptionMask.all_valid(W, H, f))
            pixel_loss = 1.0 - float(mask.valid.mean()) if not late_fail else 1.0

        ref = inputs.truth[f] if psnr_reference == "source" else inputs.encoded[f].recon
        q = psnr(shown, ref)
        s = ssim(shown, ref) if score_ssim else float("nan")
        scores.append(FrameScore(f, q, s, pixel_loss))
        outcomes.append(FrameOutcome(f, status, arrival, display, pixel_loss, prev_lost, len(pkts),
                                     int(tr.lost.sum()), tr.bytes_sent, how, transport_lost))
        if keep_frames:
            kept.append(shown)
            kept_masks.append(mask)
        shown_prev2, shown_prev = shown_prev, shown
        prev_lost = transport_lost

    payload = int(sum(sum(p.payload_bytes for p in pk) for pk in inputs.packets))
    return SessionReport(scheme, trace.name, seed, outcomes, scores, fec, payload,
                         kept if keep_frames else None, kept_masks if keep_frames else None)


def fec_baseline(inputs: SessionInputs, trace: NetworkTrace, overhead: float,
                 sched: SchedulerConfig | None = None, seed: int = 0, **kwargs) -> SessionReport:
    """Oracle FEC: ``overhead`` parity fraction, last good frame reused when decoding fails."""
    if not 0.0 <= overhead <= 1.0:
        raise ValueError("FEC overhead must lie in [0, 1]")
    return simulate_session(inputs, trace, sched, f"fec:{overhead * 100.0:g}", seed, **kwargs)


# --- burst analysis -------------------------------------------------------------------

@dataclass
class BurstReport:
    histogram: dict[int, int]                 # run length -> number of runs
    reduction_by_length: dict[int, float]     # run length -> mean PSNR drop over its frames
    reduction_by_position: dict[int, float]   # k-th consecutive corrupt frame -> mean PSNR drop

    @property
    def mean_run_length(self) -> float:
        total = sum(self.histogram.values())
        return sum(k * v for k, v in self.histogram.items()) / total if total else 0.0


def burst_report(report: SessionReport, baseline_psnr: Sequence[float] | None = None,
                 flags: Sequence[bool] | None = None) -> BurstReport:
    """Run lengths of consecutive non-delivered frames and their PSNR cost.

    ``baseline_psnr`` is the per-frame PSNR of a lossless session (99 dB
    when omitted). ``flags`` overrides which frames count as corrupt.
    """
    bad = list(flags) if flags is not None else [o.status is not Status.DELIVERED for o in report.outcomes]
    base = list(baseline_psnr) if baseline_psnr is not None else [99.0] * len(bad)
    drops = [b - s.psnr for b, s in zip(base, report.scores)]
    hist: dict[int, int] = {}
    by_len: dict[int, list[float]] = {}
    by_pos: dict[int, list[float]] = {}
    i = 0
    while i < len(bad):
        if not bad[i]:
            i += 1
            continue
        j = i
        while j < len(bad) and bad[j]:
            by_pos.setdefault(j - i + 1, []).append(drops[j])
            j += 1
        L = j - i
        hist[L] = hist.get(L, 0) + 1
        by_len.setdefault(L, []).append(float(np.mean(drops[i:j])))
        i = j
    return BurstReport(dict(sorted(hist.items())),
                       {k: float(np.mean(v)) for k, v in sorted(by_len.items())},
                       {k: float(np.mean(v)) for k, v in sorted(by_pos.items())})
