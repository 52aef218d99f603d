"""Monte Carlo model of the counting experiment.

Count rates derive from the joint projection probabilities of the entangled
state; finite fringe contrast is modeled as a convex blend of the ideal
rate toward its scan average (the mean over the scanned phase for
interferograms, over the analyzer angle for beam-block runs), so visibility
V = 1 reproduces the exact quantum prediction and V = 0 a flat line.  The
peak normalization is chosen so that the ideal gamma = 0 fringe maximum at
analyzer angle delta = pi/2 detects max_rate counts per second.

Counting statistics are Poissonian, one draw per scan point.  Every run
draws from its own PCG64 stream seeded by SeedSequence([seed, kind, *index])
so that scans of distinct settings are reproducible independent of
evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quantum import (
    JointSetting,
    PureState,
    bell_state,
    joint_probability,
    path_direction,
    spin_direction,
)

_SQRT_HALF = 1.0 / math.sqrt(2.0)

# Stream kind tags; each simulated run type owns one so that runs sharing a
# master seed never reuse a Poisson stream.
STREAM_INTERFEROGRAM = 1
STREAM_BEAM_BLOCK = 2
STREAM_REFERENCE = 3


class EstimationError(ValueError):
    """Raised when counts cannot support an expectation-value estimate."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Counting-experiment parameters.

    max_rate: peak detection rate in counts/second.
    measure_time: seconds spent on each scan point.
    visibility: fringe contrast in [0, 1].
    theta: spin-flip imperfection angle (0 = perfect flip).
    dyn_offset: constant dynamical phase folded into the path phase.
    seed: master seed for all Poisson streams.
    """

    max_rate: float = 25.0
    measure_time: float = 1600.0
    visibility: float = 1.0
    theta: float = 0.0
    dyn_offset: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.max_rate <= 0.0:
            raise ValueError(f"max_rate must be positive, got {self.max_rate!r}")
        if self.measure_time <= 0.0:
            raise ValueError(
                f"measure_time must be positive, got {self.measure_time!r}"
            )
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(
                f"visibility must lie in [0, 1], got {self.visibility!r}"
            )


@dataclass(frozen=True)
class Interferogram:
    """Counts versus path phase chi for one (delta, gamma) setting."""

    chi_values: np.ndarray
    counts: np.ndarray
    delta: float
    gamma: float
    flipper_on: bool = True

    def __post_init__(self):
        chi = np.asarray(self.chi_values, dtype=float)
        counts = np.asarray(self.counts)
        if chi.shape != counts.shape:
            raise ValueError("chi_values and counts must have equal length")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "chi_values", chi)
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class BeamBlockScan:
    """Counts versus spin-analysis angle delta with one beam stopped."""

    delta_values: np.ndarray
    counts: np.ndarray
    blocked_path: str
    gamma: float

    def __post_init__(self):
        deltas = np.asarray(self.delta_values, dtype=float)
        counts = np.asarray(self.counts)
        if deltas.shape != counts.shape:
            raise ValueError("delta_values and counts must have equal length")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if self.blocked_path not in ("I", "II"):
            raise ValueError(
                f"blocked_path must be 'I' or 'II', got {self.blocked_path!r}"
            )
        object.__setattr__(self, "delta_values", deltas)
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class CountQuadruple:
    """Counts (N++, N+-, N-+, N--) for one joint setting."""

    n_pp: int
    n_pm: int
    n_mp: int
    n_mm: int
    setting: object = None

    def __post_init__(self):
        for name in ("n_pp", "n_pm", "n_mp", "n_mm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def total(self) -> int:
        return self.n_pp + self.n_pm + self.n_mp + self.n_mm


def stream_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent PCG64 generator for stream (seed, *key)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    entropy.extend(int(k) for k in key)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _stream_key(stream) -> tuple:
    if isinstance(stream, (tuple, list)):
        return tuple(int(s) for s in stream)
    return (int(stream),)


def default_chi_grid(points: int = 32, periods: int = 2) -> np.ndarray:
    """Phase-shifter scan positions: two fringe periods, 32 points."""
    return np.linspace(0.0, periods * 2.0 * math.pi, points, endpoint=False)


def _x_plus_probability(state: PureState, delta: float) -> float:
    """Joint probability for path +x and spin analyzer angle delta."""
    setting = JointSetting(path_direction(math.pi / 2.0), spin_direction(delta))
    return joint_probability(state, setting)


def _blended_rate(config: ExperimentConfig, p: float, p_scan_mean: float) -> float:
    blended = p_scan_mean + config.visibility * (p - p_scan_mean)
    return 2.0 * config.max_rate * blended


def detection_rate(config: ExperimentConfig, chi: float, delta: float,
                   gamma: float) -> float:
    """Expected O-beam rate at phase-shifter position chi, analyzer angle
    delta and geometric phase gamma.

    The ideal probability is the joint projection onto path +x and spin
    +delta of the prepared state; the fringe is a single harmonic in chi, so
    its scan mean equals (p(chi) + p(chi + pi)) / 2 exactly, which anchors
    the contrast blend.
    """
    def prob(c):
        state = bell_state(gamma, config.theta, c, dyn_offset=config.dyn_offset)
        return _x_plus_probability(state, delta)

    p = prob(chi)
    mean = 0.5 * (p + prob(chi + math.pi))
    return _blended_rate(config, p, mean)


def beam_block_rate(config: ExperimentConfig, delta: float, gamma: float,
                    blocked_path: str) -> float:
    """Expected rate with one beam stopped and the spin analyzed at delta.

    With a single surviving branch the overall branch phase (chi, gamma,
    dynamical offsets) is unobservable and drops before squaring, so the
    curve is built from the gamma = 0, chi = 0 state; only the flip
    imperfection theta survives.  Blocking II measures path +z (beam I,
    spin up); blocking I measures path -z.
    """
    if blocked_path not in ("I", "II"):
        raise ValueError(f"blocked_path must be 'I' or 'II', got {blocked_path!r}")
    polar = 0.0 if blocked_path == "II" else math.pi
    state = bell_state(0.0, config.theta, 0.0)

    def prob(d):
        setting = JointSetting(path_direction(polar), spin_direction(d))
        return joint_probability(state, setting)

    p = prob(delta)
    mean = 0.5 * (p + prob(delta + math.pi))
    return _blended_rate(config, p, mean)


def _reference_state(chi: float, dyn_offset: float) -> PureState:
    """Flipper-off state: both beams carry spin up, (|I> + e^{i chi'}|II>)
    tensor |up>, chi' = chi + dyn_offset."""
    phase = complex(math.cos(chi + dyn_offset), math.sin(chi + dyn_offset))
    return PureState(
        (_SQRT_HALF, 0.0, phase * _SQRT_HALF, 0.0),
        gamma=0.0, theta=math.pi, path_phase=chi, dyn_offset=dyn_offset,
    )


def reference_rate(config: ExperimentConfig, chi: float, delta: float) -> float:
    """Expected rate with the interferometer flipper switched off; fringes
    follow 1 + V cos(chi + dyn_offset) regardless of gamma."""
    def prob(c):
        return _x_plus_probability(_reference_state(c, config.dyn_offset), delta)

    p = prob(chi)
    mean = 0.5 * (p + prob(chi + math.pi))
    return _blended_rate(config, p, mean)


def _draw_counts(expected: np.ndarray, rng, exact: bool) -> np.ndarray:
    if exact:
        return expected
    return rng.poisson(expected)


def simulate_interferogram(config: ExperimentConfig, delta: float, gamma: float,
                           chi_grid=None, rng=None, stream=0,
                           exact: bool = False) -> Interferogram:
    """Simulate one phase-shifter scan.

    counts[i] ~ Poisson(detection_rate * measure_time); with exact=True the
    expected counts are returned unsampled (floats), which is the
    infinite-statistics mode used by the analysis pipeline checks.
    """
    chi = default_chi_grid() if chi_grid is None else np.asarray(chi_grid, dtype=float)
    if chi.size == 0:
        raise ValueError("chi_grid must not be empty")
    rates = np.array([detection_rate(config, c, delta, gamma) for c in chi])
    if rng is None:
        rng = stream_rng(config.seed, STREAM_INTERFEROGRAM, *_stream_key(stream))
    counts = _draw_counts(rates * config.measure_time, rng, exact)
    return Interferogram(chi, counts, delta=float(delta), gamma=float(gamma),
                         flipper_on=True)


def simulate_beam_block(config: ExperimentConfig, delta_grid, gamma: float,
                        blocked_path: str, rng=None, stream=0,
                        exact: bool = False) -> BeamBlockScan:
    """Simulate a spin-analysis scan with one beam stopped."""
    deltas = np.asarray(delta_grid, dtype=float)
    if deltas.size == 0:
        raise ValueError("delta_grid must not be empty")
    rates = np.array(
        [beam_block_rate(config, d, gamma, blocked_path) for d in deltas]
    )
    if rng is None:
        rng = stream_rng(config.seed, STREAM_BEAM_BLOCK, *_stream_key(stream))
    counts = _draw_counts(rates * config.measure_time, rng, exact)
    return BeamBlockScan(deltas, counts, blocked_path=blocked_path,
                         gamma=float(gamma))


def reference_run(config: ExperimentConfig, delta: float, chi_grid=None,
                  rng=None, stream=0, exact: bool = False) -> Interferogram:
    """Simulate a flipper-off reference scan used to calibrate the fringe
    phase zero and contrast."""
    chi = default_chi_grid() if chi_grid is None else np.asarray(chi_grid, dtype=float)
    if chi.size == 0:
        raise ValueError("chi_grid must not be empty")
    rates = np.array([reference_rate(config, c, delta) for c in chi])
    if rng is None:
        rng = stream_rng(config.seed, STREAM_REFERENCE, *_stream_key(stream))
    counts = _draw_counts(rates * config.measure_time, rng, exact)
    return Interferogram(chi, counts, delta=float(delta), gamma=0.0,
                         flipper_on=False)


def expectation_from_values(values, cov) -> tuple:
    """Expectation value and error from four signed quantities.

    values are ordered (v++, v+-, v-+, v--); cov is their 4x4 covariance (a
    diagonal for independent counts).  E = (v1 - v2 - v3 + v4) / sum, and
    the error follows from linear propagation through that ratio.
    """
    v = np.asarray(values, dtype=float)
    if v.shape != (4,):
        raise ValueError("values must contain exactly 4 entries")
    total = float(v.sum())
    if total <= 0.0:
        raise EstimationError("total counts must be positive for estimation")
    signs = np.array([1.0, -1.0, -1.0, 1.0])
    e = float(signs @ v) / total
    jac = (signs - e) / total
    var = float(jac @ np.asarray(cov, dtype=float) @ jac)
    return e, math.sqrt(max(var, 0.0))


def counts_to_expectation(quadruple: CountQuadruple) -> tuple:
    """E = (N++ - N+- - N-+ + N--) / N_total with Poisson error propagation.

    Zero observed counts contribute unit variance (the same floor the
    fringe fits use for Poisson weights).
    """
    if quadruple.total <= 0:
        raise EstimationError("count quadruple is empty; nothing to estimate")
    values = np.array(
        [quadruple.n_pp, quadruple.n_pm, quadruple.n_mp, quadruple.n_mm],
        dtype=float,
    )
    return expectation_from_values(values, np.diag(np.maximum(values, 1.0)))


def s_from_expectations(e1: float, e2: float, e3: float, e4: float,
                        sigmas) -> tuple:
    """S = |e1 - e2 + e3 + e4| with errors added in quadrature."""
    sig = np.asarray(sigmas, dtype=float)
    if sig.shape != (4,):
        raise ValueError("sigmas must contain exactly 4 entries")
    s = abs(e1 - e2 + e3 + e4)
    return float(s), float(math.sqrt(float(np.sum(sig ** 2))))


# ---------------------------------------------------------------------------
# serialization: CSV scan files with key = value sidecar metadata
# ---------------------------------------------------------------------------

def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def format_kv(mapping: dict) -> str:
    """Render a flat mapping as 'key = value' lines (UTF-8, LF)."""
    return "".join(f"{k} = {_format_value(v)}\n" for k, v in mapping.items())


def _parse_value(text: str):
    text = text.strip()
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_kv(text: str) -> dict:
    """Inverse of format_kv; unknown value shapes stay strings."""
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        if not _:
            raise ValueError(f"malformed key = value line: {line!r}")
        out[key.strip()] = _parse_value(value)
    return out


def config_echo(config: ExperimentConfig) -> dict:
    return {
        "max_rate": config.max_rate,
        "measure_time": config.measure_time,
        "visibility": config.visibility,
        "theta": config.theta,
        "dyn_offset": config.dyn_offset,
        "seed": config.seed,
    }


def _format_count(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_scan_csv(path, header: str, x_values, counts) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for x, c in zip(x_values, counts):
            fh.write(f"{repr(float(x))},{_format_count(c)}\n")


def _read_scan_csv(path, header: str) -> tuple:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines or lines[0] != header:
        raise ValueError(f"{path}: expected header {header!r}")
    xs, counts, integral = [], [], True
    for line in lines[1:]:
        x_text, _, c_text = line.partition(",")
        xs.append(float(x_text))
        counts.append(c_text)
        if "." in c_text or "e" in c_text or "E" in c_text:
            integral = False
    if integral:
        count_array = np.array([int(c) for c in counts], dtype=np.int64)
    else:
        count_array = np.array([float(c) for c in counts], dtype=np.float64)
    return np.array(xs, dtype=float), count_array


def _meta_path(csv_path):
    from pathlib import Path

    return Path(csv_path).with_suffix(".meta")


def write_interferogram(gram: Interferogram, csv_path,
                        config: ExperimentConfig | None = None) -> None:
    """Write 'chi_rad,counts' rows plus the sidecar metadata record.

    Values round-trip bit exactly: floats are rendered with repr (shortest
    round-trip form) and integers verbatim.
    """
    _write_scan_csv(csv_path, "chi_rad,counts", gram.chi_values, gram.counts)
    meta = {
        "kind": "interferogram",
        "delta": gram.delta,
        "gamma": gram.gamma,
        "flipper_on": gram.flipper_on,
    }
    if config is not None:
        meta.update(config_echo(config))
    _meta_path(csv_path).write_text(format_kv(meta), encoding="utf-8")


def read_interferogram(csv_path) -> tuple:
    """Read back an interferogram CSV and its sidecar; returns (gram, meta)."""
    chi, counts = _read_scan_csv(csv_path, "chi_rad,counts")
    meta = parse_kv(_meta_path(csv_path).read_text(encoding="utf-8"))
    gram = Interferogram(chi, counts, delta=float(meta["delta"]),
                         gamma=float(meta["gamma"]),
                         flipper_on=bool(meta["flipper_on"]))
    return gram, meta


def write_beam_block(scan: BeamBlockScan, csv_path,
                     config: ExperimentConfig | None = None) -> None:
    """Write 'delta_rad,counts' rows plus the sidecar metadata record."""
    _write_scan_csv(csv_path, "delta_rad,counts", scan.delta_values, scan.counts)
    meta = {
        "kind": "beam-block",
        "blocked_path": scan.blocked_path,
        "gamma": scan.gamma,
    }
    if config is not None:
        meta.update(config_echo(config))
    _meta_path(csv_path).write_text(format_kv(meta), encoding="utf-8")


def read_beam_block(csv_path) -> tuple:
    """Read back a beam-block CSV and its sidecar; returns (scan, meta)."""
    deltas, counts = _read_scan_csv(csv_path, "delta_rad,counts")
    meta = parse_kv(_meta_path(csv_path).read_text(encoding="utf-8"))
    scan = BeamBlockScan(deltas, counts, blocked_path=str(meta["blocked_path"]),
                         gamma=float(meta["gamma"]))
    return scan, meta
