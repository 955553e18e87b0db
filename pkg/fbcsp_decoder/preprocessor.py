"""
Signal preprocessing: noisy-channel detection, trial rejection and
common-average re-referencing, chained by SignalPreprocessor.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import median_abs_deviation

from .errors import ConfigError, DatasetError
from .filters import (HIGHPASS_HZ, HIGHPASS_ORDER, TARGET_FS_HZ,
                      downsample_trials, highpass_trials)

NOISY_K = 5.0
THRESHOLD_UV = 600.0
PRE_MS = 500.0
CRITERIA = ('any_channel', 'global')


@dataclass
class CleaningReport:
    """What cleaning removed and why."""

    removed_channels: list = field(default_factory=list)
    rejected_trials: list = field(default_factory=list)
    threshold_uv: float = THRESHOLD_UV
    inspection_ms: tuple = None
    criterion: str = 'any_channel'

    def to_dict(self):
        return {
            "removed_channels": [
                {"name": name, "score": None if score is None else float(score)}
                for name, score in self.removed_channels
            ],
            "rejected_trials": [
                {"trial_id": int(trial_id), "peak_to_peak_uv": float(p2p)}
                for trial_id, p2p in self.rejected_trials
            ],
            "threshold_uv": self.threshold_uv,
            "inspection_ms": None if self.inspection_ms is None else list(self.inspection_ms),
            "criterion": self.criterion,
        }


def _require_channels(trialset, minimum=2):
    if trialset.n_channels < minimum:
        raise DatasetError(f"Operation needs at least {minimum} channels, got {trialset.n_channels}")


def channel_scores(trialset):
    """
    Robust z-score of each channel's log-variance.

    Returns:
        Array of scores in channel order, or None when the median absolute
        deviation is zero (no channel can be singled out).
    """
    _require_channels(trialset)
    per_channel = np.moveaxis(np.asarray(trialset.trials, dtype=np.float64), 1, 0).reshape(trialset.n_channels, -1)
    log_var = np.log(np.maximum(per_channel.var(axis=1), np.finfo(np.float64).tiny))
    spread = median_abs_deviation(log_var, scale='normal')
    if spread == 0 or not np.isfinite(spread):
        return None
    return (log_var - np.median(log_var)) / spread


def detect_noisy_channels(trialset, k=NOISY_K):
    """Channels whose |robust z| of log-variance exceeds k, in channel order."""
    scores = channel_scores(trialset)
    if scores is None:
        return []
    return [name for name, z in zip(trialset.channel_names, scores) if abs(z) > k]


def remove_channels(trialset, names):
    """Drop channels by name; trials and flags are untouched."""
    names = list(names)
    if not names:
        return trialset
    unknown = [name for name in names if name not in trialset.channel_names]
    if unknown:
        raise DatasetError(f"Unknown channels: {', '.join(unknown)}")
    keep = [i for i, name in enumerate(trialset.channel_names) if name not in set(names)]
    if not keep:
        raise DatasetError("Removing these channels would leave an empty montage")
    return trialset.replace(
        channel_names=[trialset.channel_names[i] for i in keep],
        trials=trialset.trials[:, keep, :],
    )


def inspection_window(trialset, pre_ms=PRE_MS, decode_interval_ms=None):
    """
    Time window inspected for artifacts: the decoding interval plus the
    preceding pre_ms. Without a decoding interval the whole epoch is
    inspected.
    """
    start, end = trialset.interval_ms
    if decode_interval_ms is None:
        return start, end
    window = (float(decode_interval_ms[0]) - pre_ms, float(decode_interval_ms[1]))
    if window[0] < start - 1e-9 or window[1] > end + 1e-9:
        raise DatasetError(
            f"Inspection window {window} ms is not covered by the trial interval {trialset.interval_ms} ms"
        )
    return window


def peak_to_peak(trialset, pre_ms=PRE_MS, decode_interval_ms=None, criterion='any_channel'):
    """Per-trial max - min inside the inspection window."""
    if criterion not in CRITERIA:
        raise ConfigError(f"Unknown rejection criterion '{criterion}', expected one of {', '.join(CRITERIA)}")
    start, end = inspection_window(trialset, pre_ms, decode_interval_ms)
    first = int(round((start - trialset.interval_ms[0]) / 1000.0 * trialset.fs_hz))
    last = first + int(round((end - start) / 1000.0 * trialset.fs_hz))
    window = np.asarray(trialset.trials[:, :, first:last], dtype=np.float64)
    if criterion == 'any_channel':
        return np.ptp(window, axis=2).max(axis=1)
    return window.reshape(trialset.n_trials, -1).max(axis=1) - window.reshape(trialset.n_trials, -1).min(axis=1)


def mark_rejected_trials(trialset, threshold_uv=THRESHOLD_UV, pre_ms=PRE_MS,
                         decode_interval_ms=None, criterion='any_channel'):
    """Flag trials whose peak-to-peak strictly exceeds threshold_uv."""
    if threshold_uv < 0:
        raise ConfigError(f"Rejection threshold must be non-negative, got {threshold_uv}")
    if pre_ms < 0:
        raise ConfigError(f"Pre-window must be non-negative, got {pre_ms}")
    p2p = peak_to_peak(trialset, pre_ms, decode_interval_ms, criterion)
    return trialset.replace(rejected=p2p > threshold_uv)


def common_average_reference(trialset):
    """Subtract the instantaneous mean across channels from every channel."""
    _require_channels(trialset)
    trials = np.asarray(trialset.trials, dtype=np.float64)
    return trialset.replace(trials=trials - trials.mean(axis=1, keepdims=True))


class SignalPreprocessor:
    """
    Preprocessing chain: downsample, high-pass, remove noisy channels,
    flag artifact trials, re-reference to the common average.
    """

    def __init__(self, target_fs_hz=TARGET_FS_HZ, highpass_hz=HIGHPASS_HZ, highpass_order=HIGHPASS_ORDER,
                 zero_phase=False, noisy_k=NOISY_K, detect_noisy=True, exclude_channels=(),
                 threshold_uv=THRESHOLD_UV, pre_ms=PRE_MS, criterion='any_channel'):
        """
        Initialize the preprocessor.

        Args:
            target_fs_hz: Sampling rate to downsample to (integer ratios only).
            highpass_hz: High-pass cut-off; None skips the high-pass.
            highpass_order: Butterworth order of the high-pass.
            zero_phase: Forward-backward filtering instead of causal.
            noisy_k: Robust z threshold for noisy channels.
            detect_noisy: Run automatic noisy-channel detection.
            exclude_channels: Channels removed unconditionally.
            threshold_uv: Peak-to-peak rejection threshold.
            pre_ms: Context before the decoding interval inspected for artifacts.
            criterion: 'any_channel' or 'global' peak-to-peak.
        """
        if criterion not in CRITERIA:
            raise ConfigError(f"Unknown rejection criterion '{criterion}'")
        self.target_fs_hz = target_fs_hz
        self.highpass_hz = highpass_hz
        self.highpass_order = highpass_order
        self.zero_phase = zero_phase
        self.noisy_k = noisy_k
        self.detect_noisy = detect_noisy
        self.exclude_channels = list(exclude_channels)
        self.threshold_uv = threshold_uv
        self.pre_ms = pre_ms
        self.criterion = criterion

    def resample(self, trialset):
        """Downsample to the target rate when the data is faster."""
        if self.target_fs_hz is None or trialset.fs_hz <= self.target_fs_hz:
            return trialset
        ratio = trialset.fs_hz / self.target_fs_hz
        factor = int(round(ratio))
        if not math.isclose(ratio, factor):
            raise ConfigError(
                f"Cannot downsample {trialset.fs_hz:g} Hz to {self.target_fs_hz:g} Hz by an integer factor"
            )
        return downsample_trials(trialset, factor)

    def effective_pre_ms(self, trialset, decode_interval_ms):
        """Pre-window shortened to the context the epoch actually holds."""
        if decode_interval_ms is None:
            return self.pre_ms
        available = float(decode_interval_ms[0]) - trialset.interval_ms[0]
        return max(0.0, min(self.pre_ms, available))

    def clean(self, trialset, decode_interval_ms=None):
        """
        Channel removal, trial rejection and CAR on an already filtered set.

        Returns:
            Tuple of (TrialSet, CleaningReport).
        """
        report = CleaningReport(threshold_uv=self.threshold_uv, criterion=self.criterion)

        to_remove = [name for name in self.exclude_channels if name in trialset.channel_names]
        missing = [name for name in self.exclude_channels if name not in trialset.channel_names]
        if missing:
            raise DatasetError(f"Unknown channels to exclude: {', '.join(missing)}")
        report.removed_channels.extend((name, None) for name in to_remove)
        trialset = remove_channels(trialset, to_remove)

        if self.detect_noisy:
            scores = channel_scores(trialset)
            noisy = detect_noisy_channels(trialset, self.noisy_k)
            if noisy:
                by_name = dict(zip(trialset.channel_names, scores))
                report.removed_channels.extend((name, by_name[name]) for name in noisy)
                trialset = remove_channels(trialset, noisy)

        pre_ms = self.effective_pre_ms(trialset, decode_interval_ms)
        report.inspection_ms = inspection_window(trialset, pre_ms, decode_interval_ms)
        p2p = peak_to_peak(trialset, pre_ms, decode_interval_ms, self.criterion)
        trialset = mark_rejected_trials(trialset, self.threshold_uv, pre_ms, decode_interval_ms, self.criterion)
        report.rejected_trials = [
            (trial_id, value) for trial_id, value, flag in zip(trialset.trial_ids, p2p, trialset.rejected) if flag
        ]

        return common_average_reference(trialset), report

    def filter(self, trialset):
        """Downsample and high-pass; independent of the decoding interval."""
        trialset = self.resample(trialset)
        if self.highpass_hz:
            trialset = highpass_trials(trialset, self.highpass_hz, self.highpass_order, self.zero_phase)
        return trialset

    def preprocess(self, trialset, decode_interval_ms=None):
        """Full chain on a raw trial set."""
        return self.clean(self.filter(trialset), decode_interval_ms)
