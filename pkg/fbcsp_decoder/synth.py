"""
Synthetic EEG trials with a planted band-power class difference.

Every source is Gaussian noise band-limited to the planted band with unit
variance; the discriminative source (index 0) has variance r in class 1.
Sensors are mixing @ sources scaled to microvolts plus white sensor noise.
Random streams: trials SeedSequence([seed, 0, i]), mixing [seed, 1],
label order [seed, 3], artifacts [seed, 4], oracle [seed, 5|6, chunk].
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed
from scipy import signal

from .data_loader import TrialSet, n_samples_for
from .errors import ConfigError
from .filters import BANDPASS_ORDER, BandSpec, apply_filter, design_bandpass

SYNTH_FS_HZ = 500.0
SYNTH_INTERVAL_MS = (-1000.0, 7600.0)
PLANTED_BAND = (10.0, 12.0)
VARIANCE_RATIO = 4.0
SOURCE_SCALE_UV = 10.0
SENSOR_NOISE_UV = 50.0
ARTIFACT_AMPLITUDE_UV = 1000.0
ARTIFACT_DURATION_MS = 100.0
WARMUP_S = 2.0
ORACLE_TRIALS = 10000
ORACLE_CHUNK = 2000
MIXING_MODES = ('random-orthonormal',)

STREAM_TRIALS = 0
STREAM_MIXING = 1
STREAM_LABELS = 3
STREAM_ARTIFACTS = 4
STREAM_CALIBRATION = 5
STREAM_EVALUATION = 6


@dataclass(frozen=True, eq=False)
class SynthConfig:
    """Generator settings; validate() runs on construction."""

    n_channels: int = 16
    n_trials_per_class: tuple = (200, 200)
    fs_hz: float = SYNTH_FS_HZ
    interval_ms: tuple = SYNTH_INTERVAL_MS
    planted_band: tuple = PLANTED_BAND
    variance_ratio: float = VARIANCE_RATIO
    n_sources: int = None
    mixing: object = 'random-orthonormal'
    source_scale_uv: float = SOURCE_SCALE_UV
    sensor_noise_uv: float = SENSOR_NOISE_UV
    artifact_fraction: float = 0.0
    artifact_amplitude_uv: float = ARTIFACT_AMPLITUDE_UV
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_trials_per_class", tuple(int(n) for n in self.n_trials_per_class))
        object.__setattr__(self, "interval_ms", (float(self.interval_ms[0]), float(self.interval_ms[1])))
        if not isinstance(self.planted_band, BandSpec):
            object.__setattr__(self, "planted_band", BandSpec(*self.planted_band))
        if self.n_sources is None:
            object.__setattr__(self, "n_sources", int(self.n_channels))
        self.validate()

    def validate(self):
        if self.variance_ratio < 1:
            raise ConfigError(f"Variance ratio must be >= 1, got {self.variance_ratio}")
        if self.n_channels < 2:
            raise ConfigError(f"At least 2 channels are needed, got {self.n_channels}")
        if not 1 <= self.n_sources <= self.n_channels:
            raise ConfigError(f"Number of sources must lie in [1, {self.n_channels}], got {self.n_sources}")
        if len(self.n_trials_per_class) != 2 or min(self.n_trials_per_class) < 1:
            raise ConfigError(f"Need a positive trial count for both classes, got {self.n_trials_per_class}")
        if not self.fs_hz > 0:
            raise ConfigError(f"Sampling rate must be positive, got {self.fs_hz}")
        if self.interval_ms[0] >= self.interval_ms[1]:
            raise ConfigError(f"Interval start must precede its end, got {self.interval_ms}")
        self.planted_band.validate(self.fs_hz)
        if self.source_scale_uv <= 0 or self.sensor_noise_uv < 0:
            raise ConfigError("Source scale must be positive and sensor noise non-negative")
        if not 0.0 <= self.artifact_fraction <= 1.0:
            raise ConfigError(f"Artifact fraction must lie in [0, 1], got {self.artifact_fraction}")
        if self.seed < 0:
            raise ConfigError(f"Seed must be non-negative, got {self.seed}")
        if isinstance(self.mixing, str):
            if self.mixing not in MIXING_MODES:
                raise ConfigError(f"Unknown mixing '{self.mixing}', expected one of {', '.join(MIXING_MODES)}")
        else:
            matrix = np.asarray(self.mixing, dtype=np.float64)
            if matrix.shape != (self.n_channels, self.n_sources):
                raise ConfigError(
                    f"Mixing matrix must be {self.n_channels} x {self.n_sources}, got {matrix.shape}"
                )
            if np.linalg.matrix_rank(matrix) < self.n_sources:
                raise ConfigError("Mixing matrix must have full column rank")

    @property
    def n_trials(self):
        return sum(self.n_trials_per_class)

    @property
    def n_samples(self):
        return n_samples_for(self.interval_ms, self.fs_hz)

    def covers(self, interval_ms, pre_ms=0.0):
        """True when a decoding interval plus its pre-window fits in the trials."""
        return self.interval_ms[0] <= interval_ms[0] - pre_ms and interval_ms[1] <= self.interval_ms[1]

    def to_dict(self):
        return {
            "n_channels": self.n_channels,
            "n_trials_per_class": list(self.n_trials_per_class),
            "fs_hz": self.fs_hz,
            "interval_ms": list(self.interval_ms),
            "planted_band": self.planted_band.to_dict(),
            "variance_ratio": self.variance_ratio,
            "n_sources": self.n_sources,
            "mixing": self.mixing if isinstance(self.mixing, str) else "explicit",
            "source_scale_uv": self.source_scale_uv,
            "sensor_noise_uv": self.sensor_noise_uv,
            "artifact_fraction": self.artifact_fraction,
            "artifact_amplitude_uv": self.artifact_amplitude_uv,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class OracleEstimate:
    """Monte-Carlo balanced accuracy of the likelihood-ratio rule."""

    accuracy: float
    stderr: float
    n_mc: int
    threshold: float = None
    class_power: tuple = None

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "stderr": self.stderr,
            "n_mc": self.n_mc,
            "threshold": self.threshold,
            "class_power": None if self.class_power is None else list(self.class_power),
        }


@dataclass(frozen=True, eq=False)
class GroundTruth:
    mixing: np.ndarray
    unmixing: np.ndarray
    discriminative_source: int = 0
    oracle: OracleEstimate = None
    artifact_trial_ids: tuple = field(default_factory=tuple)
    config: SynthConfig = None

    def to_dict(self):
        return {
            "mixing": self.mixing.tolist(),
            "unmixing": self.unmixing.tolist(),
            "discriminative_source": self.discriminative_source,
            "oracle": None if self.oracle is None else self.oracle.to_dict(),
            "artifact_trial_ids": list(self.artifact_trial_ids),
            "config": None if self.config is None else self.config.to_dict(),
        }


def mixing_matrix(config):
    """Explicit matrix, or orthonormal columns from the QR of a Gaussian draw."""
    if not isinstance(config.mixing, str):
        return np.asarray(config.mixing, dtype=np.float64)
    rng = np.random.default_rng([config.seed, STREAM_MIXING])
    q, r = np.linalg.qr(rng.standard_normal((config.n_channels, config.n_sources)))
    return q * np.sign(np.diag(r))


def true_unmixing(mixing, source=0):
    """Unit-norm spatial filter that isolates one source from the mixture."""
    row = np.linalg.pinv(mixing)[source]
    return row / np.linalg.norm(row)


def _source_filter(config):
    filt = design_bandpass(config.planted_band, config.fs_hz, BANDPASS_ORDER)
    impulse = np.zeros(int(config.fs_hz * 20))
    impulse[0] = 1.0
    gain = math.sqrt(np.sum(signal.sosfilt(filt.sos, impulse) ** 2))
    return filt, gain


def _band_limited(rng, filt, gain, n_rows, n_samples, warmup):
    white = rng.standard_normal((n_rows, n_samples + warmup))
    return apply_filter(filt, white)[:, warmup:] / gain


def _trial(config, mixing, filt, gain, label, index, stream):
    rng = np.random.default_rng([config.seed, stream, index])
    warmup = int(WARMUP_S * config.fs_hz)
    sources = _band_limited(rng, filt, gain, config.n_sources, config.n_samples, warmup)
    if label == 1:
        sources[0] *= math.sqrt(config.variance_ratio)
    noise = rng.standard_normal((config.n_channels, config.n_samples)) * config.sensor_noise_uv
    return mixing @ sources * config.source_scale_uv + noise


def _labels(config):
    n0, n1 = config.n_trials_per_class
    labels = np.repeat([0, 1], [n0, n1])
    return np.random.default_rng([config.seed, STREAM_LABELS]).permutation(labels)


def _inject_artifacts(config, trials):
    n_hit = int(round(config.artifact_fraction * len(trials)))
    if n_hit == 0:
        return ()
    rng = np.random.default_rng([config.seed, STREAM_ARTIFACTS])
    hit = np.sort(rng.choice(len(trials), size=n_hit, replace=False))
    width = max(1, int(round(ARTIFACT_DURATION_MS / 1000.0 * config.fs_hz)))
    for t in hit:
        channel = rng.integers(config.n_channels)
        start = rng.integers(0, max(1, config.n_samples - width))
        trials[t, channel, start:start + width] += config.artifact_amplitude_uv
    return tuple(int(t) for t in hit)


def generate(config, n_mc=0, n_jobs=1):
    """
    Draw a labelled trial set from the generative model.

    Args:
        config: SynthConfig.
        n_mc: Monte-Carlo trials for the oracle stored in GroundTruth; 0 skips it.
        n_jobs: joblib workers; output does not depend on it.

    Returns:
        Tuple of (TrialSet, GroundTruth).
    """
    mixing = mixing_matrix(config)
    filt, gain = _source_filter(config)
    labels = _labels(config)

    trials = Parallel(n_jobs=n_jobs)(
        delayed(_trial)(config, mixing, filt, gain, label, i, STREAM_TRIALS)
        for i, label in enumerate(labels)
    )
    trials = np.stack(trials)
    artifact_ids = _inject_artifacts(config, trials)

    trialset = TrialSet(
        fs_hz=config.fs_hz,
        channel_names=[f"Ch{i + 1:02d}" for i in range(config.n_channels)],
        trials=trials,
        labels=labels,
        interval_ms=config.interval_ms,
    )
    truth = GroundTruth(
        mixing=mixing,
        unmixing=true_unmixing(mixing),
        oracle=oracle_accuracy(config, n_mc, n_jobs) if n_mc else None,
        artifact_trial_ids=artifact_ids,
        config=config,
    )
    return trialset, truth


def band_power(config, projected):
    """Variance of the planted-band component of spatially filtered trials."""
    filt = design_bandpass(config.planted_band, config.fs_hz, BANDPASS_ORDER)
    return apply_filter(filt, projected).var(axis=-1)


def _projected_chunk(config, mixing, labels, stream, index):
    """Discriminative-source channel seen through the true unmixing."""
    rng = np.random.default_rng([config.seed, stream, index])
    filt, gain = _source_filter(config)
    warmup = int(WARMUP_S * config.fs_hz)
    source = _band_limited(rng, filt, gain, len(labels), config.n_samples, warmup)
    source *= np.sqrt(np.where(labels == 1, config.variance_ratio, 1.0))[:, None]
    unmixing = np.linalg.pinv(mixing)[0]
    noise_sd = config.sensor_noise_uv * np.linalg.norm(unmixing)
    noise = rng.standard_normal((len(labels), config.n_samples)) * noise_sd
    return band_power(config, source * config.source_scale_uv + noise)


def _simulate_power(config, mixing, n_per_class, stream, n_jobs):
    labels = np.repeat([0, 1], n_per_class)
    chunks = [labels[i:i + ORACLE_CHUNK] for i in range(0, len(labels), ORACLE_CHUNK)]
    powers = Parallel(n_jobs=n_jobs)(
        delayed(_projected_chunk)(config, mixing, chunk, stream, i) for i, chunk in enumerate(chunks)
    )
    return np.concatenate(powers), labels


def likelihood_ratio_threshold(v0, v1):
    """
    Equal-prior decision point between v0 * chi2_k / k and v1 * chi2_k / k.

    The degrees of freedom cancel: class 1 iff power > ln(v1/v0) / (1/v0 - 1/v1).
    """
    if v1 <= v0:
        return math.inf
    return math.log(v1 / v0) / (1.0 / v0 - 1.0 / v1)


def oracle_accuracy(config, n_mc=ORACLE_TRIALS, n_jobs=1):
    """
    Balanced accuracy of the likelihood-ratio test on the discriminative
    source's band power, with binomial standard error.

    Class powers are estimated on a calibration draw and the rule is scored
    on an independent draw of n_mc trials (half per class).
    """
    if n_mc < 1000:
        raise ConfigError(f"Oracle needs at least 1000 Monte-Carlo trials, got {n_mc}")
    if config.variance_ratio == 1:
        return OracleEstimate(accuracy=0.5, stderr=0.0, n_mc=int(n_mc))

    mixing = mixing_matrix(config)
    half = n_mc // 2
    calibration, cal_labels = _simulate_power(config, mixing, half, STREAM_CALIBRATION, n_jobs)
    v0 = float(calibration[cal_labels == 0].mean())
    v1 = float(calibration[cal_labels == 1].mean())
    threshold = likelihood_ratio_threshold(v0, v1)

    power, labels = _simulate_power(config, mixing, half, STREAM_EVALUATION, n_jobs)
    acc = [float(np.mean((power[labels == c] > threshold) == c)) for c in (0, 1)]
    accuracy = max(0.5, (acc[0] + acc[1]) / 2.0)
    stderr = math.sqrt(sum(a * (1.0 - a) / half for a in acc)) / 2.0
    return OracleEstimate(
        accuracy=accuracy,
        stderr=stderr,
        n_mc=2 * half,
        threshold=threshold,
        class_power=(v0, v1),
    )


def with_ratio(config, ratio):
    """Copy of a config with another variance ratio."""
    return replace(config, variance_ratio=ratio)
