"""Monte Carlo BER evaluation, scenario sweeps, robustness grid, and
reporting.

Results are appended to a CSV whose first line records a hash of the
generating configuration; re-running a sweep skips rows that already exist,
so interrupted runs resume cleanly. Frame randomness is keyed by
(seed, "eval", SNR, frame index) only, so every detector sees the same
frames at a given SNR and a point is reproducible from its CSV row alone.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, MissingResourceError
from .estimators import (
    CorrelationStats,
    PilotPattern,
    equalize_and_detect,
    interpolate_linear,
    ls_estimate,
    mmse_estimate,
)
from .channel import ChannelConfig
from .receiver import DnnReceiver, detect_bits, scenario_to_dict
from .simulate import (
    CHUNK_FRAMES,
    FrameBatch,
    ScenarioConfig,
    frame_rng,
    iter_chunks,
    simulate_frames,
    snr_tag,
)

logger = logging.getLogger(__name__)

RESULTS_CSV_HEADER = "scenario_id,detector,snr_db,n_bits,n_errors,ber,seed"

DETECTORS = ("ls", "mmse", "dnn", "perfect_csi")

#: Extra control detector accepted by evaluate_ber: uniformly random bit
#: guesses, used to sanity-check the Monte Carlo machinery.
CONTROL_DETECTORS = ("random",)

#: Channel variations evaluated by the robustness grid, symmetric around the
#: default training configuration (24 paths, max delay 16).
ROBUSTNESS_PATHS = (12, 24, 36)
ROBUSTNESS_DELAYS = (8, 12, 16)


@dataclass(frozen=True)
class BerPoint:
    scenario_id: str
    detector: str
    snr_db: float
    n_bits: int
    n_errors: int
    seed: int

    def __post_init__(self):
        if not 0 <= self.n_errors <= self.n_bits:
            raise ValueError("error count must lie in [0, n_bits]")

    @property
    def ber(self) -> float:
        return self.n_errors / self.n_bits


@dataclass(frozen=True)
class SweepSpec:
    scenario: ScenarioConfig
    snr_grid: tuple[float, ...] = (5.0, 10.0, 15.0, 20.0, 25.0)
    detectors: tuple[str, ...] = ("ls", "mmse", "dnn")
    min_bits: int = 1_000_000
    max_frames: int | None = None
    seed: int = 0

    def __post_init__(self):
        if len(self.snr_grid) == 0:
            raise ValueError("snr_grid must be nonempty")
        if self.min_bits < 10_000:
            raise ValueError("min_bits must be at least 10^4")
        for det in self.detectors:
            if det not in DETECTORS:
                raise ValueError(f"unknown detector {det!r}")


def _detect_chunk(
    detector: str,
    batch: FrameBatch,
    scenario: ScenarioConfig,
    snr_db: float,
    stats: CorrelationStats | None,
    receiver: DnnReceiver | None,
    seed: int,
    start: int,
) -> np.ndarray:
    pattern = PilotPattern.from_frame_config(scenario.frame)
    if detector == "perfect_csi":
        return equalize_and_detect(batch.y_data, batch.h_freq)
    if detector == "ls":
        h_sparse = ls_estimate(batch.y_pilot, pattern)
        h_full = interpolate_linear(h_sparse, pattern.indices,
                                    scenario.frame.n_subcarriers)
        return equalize_and_detect(batch.y_data, h_full)
    if detector == "mmse":
        h_full = mmse_estimate(batch.y_pilot, pattern, stats, snr_db)
        return equalize_and_detect(batch.y_data, h_full)
    if detector == "dnn":
        return detect_bits(receiver, batch.y_pilot, batch.y_data)
    if detector == "random":
        rng = frame_rng(seed, ("random-detector", snr_tag(snr_db)), start)
        return rng.integers(0, 2, size=batch.bits.shape).astype(np.int8)
    raise ValueError(f"unknown detector {detector!r}")


def check_resources(detector: str, stats, receiver) -> None:
    if detector not in DETECTORS + CONTROL_DETECTORS:
        raise ValueError(f"unknown detector {detector!r}")
    if detector == "mmse" and stats is None:
        raise MissingResourceError("mmse detector needs correlation stats")
    if detector == "dnn" and receiver is None:
        raise MissingResourceError("dnn detector needs a trained receiver")


def evaluate_ber(
    detector: str,
    scenario: ScenarioConfig,
    snr_db: float,
    min_bits: int,
    seed: int,
    stats: CorrelationStats | None = None,
    receiver: DnnReceiver | None = None,
    max_frames: int | None = None,
    jobs: int = 1,
) -> BerPoint:
    """Stream fresh frames through channel and detector until at least
    ``min_bits`` data bits are counted.

    Chunks are embarrassingly parallel; the error/bit reduction is an exact
    integer sum, so the result is identical for any ``jobs``.
    """
    check_resources(detector, stats, receiver)
    bits_per_frame = scenario.frame.n_data_bits
    n_frames = -(-min_bits // bits_per_frame)
    if max_frames is not None:
        n_frames = min(n_frames, max_frames)
    tags = ("eval", snr_tag(snr_db))

    def run_chunk(span):
        start, count = span
        batch = simulate_frames(scenario, snr_db, seed, tags, start, count)
        pred = _detect_chunk(detector, batch, scenario, snr_db, stats, receiver,
                             seed, start)
        return int(np.count_nonzero(pred != batch.bits))

    spans = list(iter_chunks(n_frames))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            errors = sum(pool.map(run_chunk, spans))
    else:
        errors = sum(run_chunk(s) for s in spans)
    return BerPoint(
        scenario_id=scenario.scenario_id,
        detector=detector,
        snr_db=float(snr_db),
        n_bits=n_frames * bits_per_frame,
        n_errors=errors,
        seed=seed,
    )


def config_hash(scenario: ScenarioConfig, min_bits: int, seed: int) -> str:
    doc = {"scenario": scenario_to_dict(scenario), "min_bits": min_bits, "seed": seed}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def _format_row(point: BerPoint) -> str:
    return (
        f"{point.scenario_id},{point.detector},{point.snr_db!r},"
        f"{point.n_bits},{point.n_errors},{point.ber!r},{point.seed}"
    )


def read_results(path) -> list[BerPoint]:
    """Parse a results CSV, verifying the count/BER consistency invariant."""
    points = []
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#") or line == RESULTS_CSV_HEADER:
            continue
        sid, det, snr, n_bits, n_errors, ber, seed = line.split(",")
        point = BerPoint(
            scenario_id=sid,
            detector=det,
            snr_db=float(snr),
            n_bits=int(n_bits),
            n_errors=int(n_errors),
            seed=int(seed),
        )
        if abs(point.ber - float(ber)) > 1e-12:
            raise ValueError(f"inconsistent BER column in row: {line}")
        points.append(point)
    return points


def _prepare_csv(path: Path, hash_line: str) -> set[tuple]:
    """Create the CSV if needed, verify its config hash, and return the keys
    of rows already present."""
    if not path.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(f"# ofdmdnn-results v1 config={hash_line}\n{RESULTS_CSV_HEADER}\n")
        return set()
    first = path.read_text().splitlines()[0] if path.read_text() else ""
    if hash_line not in first:
        raise ConfigError(
            f"results file {path} was generated from a different configuration"
        )
    return {
        (p.scenario_id, p.detector, p.snr_db, p.seed) for p in read_results(path)
    }


def _append_row(path: Path, point: BerPoint) -> None:
    with path.open("a") as fh:
        fh.write(_format_row(point) + "\n")
        fh.flush()


def run_sweep(
    spec: SweepSpec,
    stats: CorrelationStats | None = None,
    receiver: DnnReceiver | None = None,
    out_csv=None,
    jobs: int = 1,
) -> list[BerPoint]:
    """Evaluate the Cartesian product of detectors and SNRs.

    With ``out_csv`` each finished point is appended immediately; points
    whose (scenario, detector, SNR, seed) key already exists in the file are
    skipped, so re-running a completed spec is a no-op.
    """
    for det in spec.detectors:
        check_resources(det, stats, receiver)

    done: set[tuple] = set()
    path = None
    existing: list[BerPoint] = []
    if out_csv is not None:
        path = Path(out_csv)
        done = _prepare_csv(path, config_hash(spec.scenario, spec.min_bits, spec.seed))
        existing = read_results(path) if done else []

    points = []
    for det in spec.detectors:
        for snr in spec.snr_grid:
            key = (spec.scenario.scenario_id, det, float(snr), spec.seed)
            if key in done:
                points.extend(
                    p for p in existing
                    if (p.scenario_id, p.detector, p.snr_db, p.seed) == key
                )
                logger.info("skipping existing point %s", key)
                continue
            point = evaluate_ber(
                det, spec.scenario, snr, spec.min_bits, spec.seed,
                stats=stats, receiver=receiver, max_frames=spec.max_frames,
                jobs=jobs,
            )
            logger.info(
                "%s %s @ %g dB: BER %.3e (%d/%d)",
                point.scenario_id, det, snr, point.ber, point.n_errors, point.n_bits,
            )
            if path is not None:
                _append_row(path, point)
            points.append(point)
    return points


def default_robustness_variations(base: ChannelConfig) -> list[ChannelConfig]:
    return [
        ChannelConfig(n_paths=p, max_delay=d, decay_const=base.decay_const)
        for p in ROBUSTNESS_PATHS
        for d in ROBUSTNESS_DELAYS
    ]


def run_robustness_grid(
    base: ScenarioConfig,
    variations: list[ChannelConfig],
    receiver: DnnReceiver,
    snr_grid,
    seed: int,
    min_bits: int = 1_000_000,
    out_csv=None,
    jobs: int = 1,
) -> list[BerPoint]:
    """Evaluate one fixed trained receiver against mismatched channel
    statistics: the deployment channel comes from each variation config
    while the receiver stays trained on ``base``."""
    check_resources("dnn", None, receiver)
    path = None
    done: set[tuple] = set()
    existing: list[BerPoint] = []
    if out_csv is not None:
        path = Path(out_csv)
        done = _prepare_csv(path, config_hash(base, min_bits, seed))
        existing = read_results(path) if done else []

    points = []
    for var in variations:
        if var.max_delay > base.frame.cp_len:
            logger.warning(
                "variation max_delay %d exceeds cp_len %d: genuine ISI at test time",
                var.max_delay, base.frame.cp_len,
            )
        scenario = base.with_channel(
            var, f"+paths{var.n_paths}+delay{var.max_delay}"
        )
        for snr in snr_grid:
            key = (scenario.scenario_id, "dnn", float(snr), seed)
            if key in done:
                points.extend(
                    p for p in existing
                    if (p.scenario_id, p.detector, p.snr_db, p.seed) == key
                )
                continue
            point = evaluate_ber(
                "dnn", scenario, snr, min_bits, seed, receiver=receiver, jobs=jobs
            )
            logger.info(
                "robustness %s @ %g dB: BER %.3e", scenario.scenario_id, snr, point.ber
            )
            if path is not None:
                _append_row(path, point)
            points.append(point)
    return points


def emit_report(points: list[BerPoint], out_dir) -> list[Path]:
    """Render one log-scale BER-vs-SNR chart (SVG) per scenario plus a plain
    text summary table.

    Zero-error points are drawn at the one-sided floor 1/(2*n_bits) with a
    distinct open marker; the y-axis floor is min(1e-5, smallest nonzero
    BER / 2).
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not points:
        raise ValueError("no BER points to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    scenarios: dict[str, list[BerPoint]] = {}
    for p in points:
        scenarios.setdefault(p.scenario_id, []).append(p)

    written = []
    for sid, group in scenarios.items():
        fig, ax = plt.subplots(figsize=(6.4, 4.8))
        detectors = sorted({p.detector for p in group})
        floors = []
        nonzero = [p.ber for p in group if p.n_errors > 0]
        for det in detectors:
            curve = sorted((p for p in group if p.detector == det),
                           key=lambda p: p.snr_db)
            snrs = [p.snr_db for p in curve]
            bers = []
            zero_x, zero_y = [], []
            for p in curve:
                if p.n_errors == 0:
                    floor = 1.0 / (2.0 * p.n_bits)
                    bers.append(floor)
                    zero_x.append(p.snr_db)
                    zero_y.append(floor)
                    floors.append(floor)
                else:
                    bers.append(p.ber)
            line, = ax.semilogy(snrs, bers, marker="o", label=det)
            if zero_x:
                ax.semilogy(zero_x, zero_y, linestyle="none", marker="v",
                            markerfacecolor="none", color=line.get_color())
        bottom = min(1e-5, min(nonzero) / 2.0) if nonzero else min(floors) / 2.0
        ax.set_ylim(bottom=bottom)
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("BER")
        ax.set_title(f"{sid} (open markers: zero errors, plotted at 1/(2 n_bits))")
        ax.grid(True, which="both", alpha=0.4)
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"ber_{sid}.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    lines = [f"{'scenario':<34} {'detector':<12} {'snr_db':>7} {'n_bits':>9} "
             f"{'n_errors':>9} {'ber':>12}"]
    for p in sorted(points, key=lambda p: (p.scenario_id, p.detector, p.snr_db)):
        lines.append(
            f"{p.scenario_id:<34} {p.detector:<12} {p.snr_db:>7g} {p.n_bits:>9} "
            f"{p.n_errors:>9} {p.ber:>12.4e}"
        )
    summary = out_dir / "summary.txt"
    summary.write_text("\n".join(lines) + "\n")
    written.append(summary)
    return written
