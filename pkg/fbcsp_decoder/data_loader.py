"""
Dataset containers, the on-disk dataset format, and epoching.

A dataset is a UTF-8 JSON manifest next to a raw float32 little-endian
binary holding the trials in trial-major [trial][channel][sample] order.
"""

import json
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DatasetError

MANIFEST_FILE = "manifest.json"
DATA_FILE = "trials.f32"
UNITS = "microvolt"
DTYPE = "float32, little-endian"
LAYOUT = "trial-major [trial][channel][sample]"

MANIFEST_KEYS = (
    "fs_hz", "channel_names", "n_trials", "n_samples", "labels",
    "interval_ms", "units", "data_file", "dtype", "layout",
)


def n_samples_for(interval_ms, fs_hz):
    """Number of samples covering an interval given in milliseconds."""
    start, end = interval_ms
    return int(round((end - start) / 1000.0 * fs_hz))


def binary_labels(values):
    """Labels as int64; every raw value must equal 0 or 1 before the cast."""
    raw = np.asarray(values).ravel()
    if raw.dtype != bool and not (np.issubdtype(raw.dtype, np.integer) or np.issubdtype(raw.dtype, np.floating)):
        raise DatasetError(f"Labels must be binary (0/1), got values of type {raw.dtype}")
    if not np.isin(raw, (0, 1)).all():
        raise DatasetError(f"Labels must be binary (0/1), got {sorted(set(raw.tolist()))}")
    return raw.astype(np.int64)


def _frozen(array):
    view = array.view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True, eq=False)
class Recording:
    """Continuous multichannel signal in microvolts, shape [channel][time]."""

    fs_hz: float
    channel_names: tuple
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if not np.issubdtype(samples.dtype, np.floating):
            samples = samples.astype(np.float64)
        names = tuple(str(name) for name in self.channel_names)

        if not self.fs_hz > 0:
            raise ConfigError(f"Sampling rate must be positive, got {self.fs_hz}")
        if samples.ndim != 2:
            raise DatasetError(f"Recording samples must be 2-D [channel][time], got shape {samples.shape}")
        if len(names) != samples.shape[0]:
            raise DatasetError(f"{len(names)} channel names for {samples.shape[0]} channel rows")
        if len(set(names)) != len(names):
            raise DatasetError("Channel names must be unique")

        object.__setattr__(self, "fs_hz", float(self.fs_hz))
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "samples", _frozen(samples))

    @property
    def n_channels(self):
        return self.samples.shape[0]

    @property
    def n_times(self):
        return self.samples.shape[1]


@dataclass(frozen=True, eq=False)
class TrialSet:
    """
    Epoched trials with binary labels.

    trials has shape [trial][channel][sample] and covers interval_ms
    relative to each event onset. Arrays are read-only after construction.
    """

    fs_hz: float
    channel_names: tuple
    trials: np.ndarray
    labels: np.ndarray
    interval_ms: tuple
    trial_ids: np.ndarray = None
    rejected: np.ndarray = None

    def __post_init__(self):
        trials = np.asarray(self.trials)
        if not np.issubdtype(trials.dtype, np.floating):
            trials = trials.astype(np.float64)
        labels = np.asarray(self.labels).ravel()
        names = tuple(str(name) for name in self.channel_names)
        interval = (float(self.interval_ms[0]), float(self.interval_ms[1]))

        if not self.fs_hz > 0:
            raise ConfigError(f"Sampling rate must be positive, got {self.fs_hz}")
        if trials.ndim != 3:
            raise DatasetError(f"Trials must be 3-D [trial][channel][sample], got shape {trials.shape}")
        n_trials, n_channels, n_samples = trials.shape
        if n_trials == 0:
            raise DatasetError("A trial set must contain at least one trial")
        if len(names) != n_channels:
            raise DatasetError(f"{len(names)} channel names for {n_channels} channels")
        if len(set(names)) != len(names):
            raise DatasetError("Channel names must be unique")
        if interval[0] >= interval[1]:
            raise ConfigError(f"Interval start must precede its end, got {interval}")
        expected = n_samples_for(interval, self.fs_hz)
        if n_samples != expected:
            raise DatasetError(
                f"Interval {interval} ms at {self.fs_hz} Hz needs {expected} samples, trials have {n_samples}"
            )
        if len(labels) != n_trials:
            raise DatasetError(f"{len(labels)} labels for {n_trials} trials")
        labels = binary_labels(labels)

        trial_ids = np.arange(n_trials) if self.trial_ids is None else np.asarray(self.trial_ids).astype(np.int64).ravel()
        if len(trial_ids) != n_trials:
            raise DatasetError(f"{len(trial_ids)} trial ids for {n_trials} trials")
        if len(np.unique(trial_ids)) != n_trials:
            raise DatasetError("Trial ids must be unique")

        rejected = np.zeros(n_trials, dtype=bool) if self.rejected is None else np.asarray(self.rejected, dtype=bool).ravel()
        if len(rejected) != n_trials:
            raise DatasetError(f"{len(rejected)} rejection flags for {n_trials} trials")

        object.__setattr__(self, "fs_hz", float(self.fs_hz))
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "interval_ms", interval)
        object.__setattr__(self, "trials", _frozen(trials))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "trial_ids", _frozen(trial_ids))
        object.__setattr__(self, "rejected", _frozen(rejected))

    @property
    def n_trials(self):
        return self.trials.shape[0]

    @property
    def n_channels(self):
        return self.trials.shape[1]

    @property
    def n_samples(self):
        return self.trials.shape[2]

    @property
    def times_ms(self):
        """Time of every sample relative to event onset."""
        return self.interval_ms[0] + np.arange(self.n_samples) * 1000.0 / self.fs_hz

    def replace(self, **changes):
        """Copy with some fields changed; validation runs again."""
        return replace(self, **changes)

    def select(self, indices):
        """Subset of trials by position."""
        indices = np.asarray(indices, dtype=np.int64)
        return self.replace(
            trials=self.trials[indices],
            labels=self.labels[indices],
            trial_ids=self.trial_ids[indices],
            rejected=self.rejected[indices],
        )

    def class_counts(self):
        counts = np.bincount(self.labels, minlength=2)
        return int(counts[0]), int(counts[1])


@dataclass(frozen=True)
class DatasetManifest:
    """The JSON half of an on-disk dataset."""

    fs_hz: float
    channel_names: list
    n_trials: int
    n_samples: int
    labels: list
    interval_ms: list
    data_file: str = DATA_FILE
    units: str = UNITS
    dtype: str = DTYPE
    layout: str = LAYOUT

    @property
    def n_channels(self):
        return len(self.channel_names)

    @property
    def expected_bytes(self):
        return self.n_trials * self.n_channels * self.n_samples * 4

    def to_dict(self):
        return {
            "fs_hz": self.fs_hz,
            "channel_names": list(self.channel_names),
            "n_trials": self.n_trials,
            "n_samples": self.n_samples,
            "labels": [int(label) for label in self.labels],
            "interval_ms": [self.interval_ms[0], self.interval_ms[1]],
            "units": self.units,
            "data_file": self.data_file,
            "dtype": self.dtype,
            "layout": self.layout,
        }

    @classmethod
    def from_dict(cls, data):
        """
        Build a manifest from parsed JSON.

        An optional n_channels key is accepted when it agrees with
        channel_names.
        """
        if not isinstance(data, dict):
            raise DatasetError("Manifest must be a JSON object")
        missing = [key for key in MANIFEST_KEYS if key not in data]
        if missing:
            raise DatasetError(f"Manifest is missing keys: {', '.join(missing)}")
        unknown = set(data) - set(MANIFEST_KEYS) - {"n_channels"}
        if unknown:
            raise DatasetError(f"Manifest has unknown keys: {', '.join(sorted(unknown))}")

        fixed = {"units": UNITS, "dtype": DTYPE, "layout": LAYOUT}
        for key, value in fixed.items():
            if data[key] != value:
                raise DatasetError(f"Manifest {key} must be '{value}', got '{data[key]}'")

        try:
            manifest = cls(
                fs_hz=float(data["fs_hz"]),
                channel_names=[str(name) for name in data["channel_names"]],
                n_trials=int(data["n_trials"]),
                n_samples=int(data["n_samples"]),
                labels=binary_labels(data["labels"]).tolist(),
                interval_ms=[float(data["interval_ms"][0]), float(data["interval_ms"][1])],
                data_file=str(data["data_file"]),
            )
        except (TypeError, ValueError, IndexError) as e:
            raise DatasetError(f"Malformed manifest: {e}") from e

        if "n_channels" in data and int(data["n_channels"]) != manifest.n_channels:
            raise DatasetError(
                f"Manifest n_channels={data['n_channels']} disagrees with {manifest.n_channels} channel names"
            )
        if len(manifest.labels) != manifest.n_trials:
            raise DatasetError(f"Manifest lists {len(manifest.labels)} labels for {manifest.n_trials} trials")
        return manifest


def _manifest_path(path):
    path = Path(path)
    return path / MANIFEST_FILE if path.is_dir() else path


def load_dataset(manifest_path):
    """
    Load a dataset from its manifest (or the directory holding it).

    Returns:
        TrialSet with float32 trials and every rejection flag cleared.
    """
    manifest_path = _manifest_path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFoundError(f"Manifest not found: {manifest_path}")

    try:
        with open(manifest_path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise DatasetError(f"Invalid JSON in manifest {manifest_path}: {e}") from e

    manifest = DatasetManifest.from_dict(data)

    data_path = manifest_path.parent / manifest.data_file
    if not data_path.exists():
        raise FileNotFoundError(f"Data file not found: {data_path}")
    size = data_path.stat().st_size
    if size != manifest.expected_bytes:
        raise DatasetError(
            f"Data file {data_path.name} has {size} bytes, manifest implies {manifest.expected_bytes}"
        )

    payload = np.fromfile(data_path, dtype='<f4')
    trials = payload.reshape(manifest.n_trials, manifest.n_channels, manifest.n_samples)

    return TrialSet(
        fs_hz=manifest.fs_hz,
        channel_names=manifest.channel_names,
        trials=trials,
        labels=manifest.labels,
        interval_ms=manifest.interval_ms,
    )


def save_dataset(trialset, directory):
    """
    Write a trial set as manifest + float32 binary.

    Returns:
        Path to the written manifest.
    """
    if trialset is None or trialset.n_trials == 0:
        raise DatasetError("Cannot save an empty dataset")

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    manifest = DatasetManifest(
        fs_hz=trialset.fs_hz,
        channel_names=list(trialset.channel_names),
        n_trials=trialset.n_trials,
        n_samples=trialset.n_samples,
        labels=trialset.labels.tolist(),
        interval_ms=list(trialset.interval_ms),
    )

    np.ascontiguousarray(trialset.trials, dtype='<f4').tofile(directory / manifest.data_file)

    manifest_path = directory / MANIFEST_FILE
    with open(manifest_path, 'w', encoding='utf-8') as f:
        json.dump(manifest.to_dict(), f, indent=2)

    return manifest_path


def epoch(recording, events, interval_ms):
    """
    Cut a continuous recording into trials.

    Args:
        recording: Recording to cut.
        events: Sequence of (onset_ms, label) pairs.
        interval_ms: (start, end) window relative to each onset; start may
            be negative.

    Returns:
        TrialSet whose trial t covers [onset_t + start, onset_t + end).
    """
    start, end = float(interval_ms[0]), float(interval_ms[1])
    if start >= end:
        raise ConfigError(f"Interval start must precede its end, got ({start}, {end})")
    if len(events) == 0:
        raise DatasetError("No events to epoch")

    fs = recording.fs_hz
    n_samples = n_samples_for((start, end), fs)
    offset = int(round(start / 1000.0 * fs))

    trials = np.empty((len(events), recording.n_channels, n_samples), dtype=recording.samples.dtype)
    labels = []
    for i, (onset_ms, label) in enumerate(events):
        first = int(round(onset_ms / 1000.0 * fs)) + offset
        last = first + n_samples
        if first < 0 or last > recording.n_times:
            raise DatasetError(
                f"Event {i} at {onset_ms} ms: window [{onset_ms + start}, {onset_ms + end}) ms "
                f"exceeds the recording ({recording.n_times / fs * 1000.0:.1f} ms)"
            )
        trials[i] = recording.samples[:, first:last]
        labels.append(label)

    return TrialSet(
        fs_hz=fs,
        channel_names=recording.channel_names,
        trials=trials,
        labels=labels,
        interval_ms=(start, end),
    )


def crop(trialset, interval_ms):
    """Cut every trial down to a sub-interval of its current interval."""
    start, end = float(interval_ms[0]), float(interval_ms[1])
    if start >= end:
        raise ConfigError(f"Interval start must precede its end, got ({start}, {end})")
    if (start, end) == trialset.interval_ms:
        return trialset

    first = int(round((start - trialset.interval_ms[0]) / 1000.0 * trialset.fs_hz))
    last = first + n_samples_for((start, end), trialset.fs_hz)
    if first < 0 or last > trialset.n_samples:
        raise DatasetError(
            f"Interval ({start}, {end}) ms lies outside the trial interval {trialset.interval_ms} ms"
        )
    return trialset.replace(trials=trialset.trials[:, :, first:last], interval_ms=(start, end))


def get_dataset_stats(trialset):
    """Summary statistics about a trial set."""
    label_counts = Counter(trialset.labels.tolist())
    return {
        'total_trials': trialset.n_trials,
        'n_channels': trialset.n_channels,
        'n_samples': trialset.n_samples,
        'fs_hz': trialset.fs_hz,
        'interval_ms': list(trialset.interval_ms),
        'trials_per_class': {int(k): int(v) for k, v in sorted(label_counts.items())},
        'rejected_trials': int(trialset.rejected.sum()),
    }
