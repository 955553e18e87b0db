"""
IIR filter design and application, decimation, and the filter bank.

Filters are Butterworth designs realized as second-order sections. They are
applied causally (forward only, zero initial conditions) unless zero_phase
is requested.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .data_loader import Recording, n_samples_for
from .errors import ConfigError, DatasetError

TARGET_FS_HZ = 500.0
HIGHPASS_HZ = 0.5
HIGHPASS_ORDER = 4
BANDPASS_ORDER = 4
ANTI_ALIAS_ORDER = 8
ANTI_ALIAS_FRACTION = 0.4
ANTI_ALIAS_PAD_PERIODS = 10

LOW_EDGE_HZ = 0.5
SPLIT_HZ = 30.0
HIGH_EDGE_HZ = 144.0
LOW_BANDWIDTH_HZ = 2.0
HIGH_BANDWIDTH_HZ = 6.0

SUBSETS = ('all', 'below20', 'above60')

STABILITY_MARGIN = 1e-9


@dataclass(frozen=True, eq=False)
class IirFilter:
    """Cascade of second-order sections in scipy layout [b0, b1, b2, 1, a1, a2]."""

    sos: np.ndarray
    fs_hz: float
    description: str = ""

    def __post_init__(self):
        sos = np.atleast_2d(np.asarray(self.sos, dtype=np.float64))
        if sos.shape[1] != 6:
            raise ConfigError(f"Second-order sections need 6 coefficients, got shape {sos.shape}")
        if not self.fs_hz > 0:
            raise ConfigError(f"Sampling rate must be positive, got {self.fs_hz}")
        object.__setattr__(self, "sos", sos)
        object.__setattr__(self, "fs_hz", float(self.fs_hz))
        if self.max_pole_modulus() >= 1.0 - STABILITY_MARGIN:
            raise ConfigError(f"Unstable filter ({self.description}): pole modulus {self.max_pole_modulus():.12f}")

    @property
    def sections(self):
        """Sections as (b0, b1, b2, a1, a2) tuples."""
        return [(s[0], s[1], s[2], s[4], s[5]) for s in self.sos]

    def max_pole_modulus(self):
        poles = np.concatenate([np.roots([1.0, s[4], s[5]]) for s in self.sos])
        return float(np.max(np.abs(poles))) if len(poles) else 0.0

    def frequency_response(self, freqs_hz):
        """Complex response at the given frequencies."""
        _, h = signal.sosfreqz(self.sos, worN=np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64)), fs=self.fs_hz)
        return h

    def gain(self, freqs_hz):
        return np.abs(self.frequency_response(freqs_hz))

    def to_dict(self):
        return {
            "description": self.description,
            "fs_hz": self.fs_hz,
            "sections": [list(map(float, s)) for s in self.sections],
        }


@dataclass(frozen=True)
class BandSpec:
    """Frequency band [lo_hz, hi_hz]."""

    lo_hz: float
    hi_hz: float

    def __post_init__(self):
        object.__setattr__(self, "lo_hz", float(self.lo_hz))
        object.__setattr__(self, "hi_hz", float(self.hi_hz))
        if not 0 < self.lo_hz < self.hi_hz:
            raise ConfigError(f"Band edges must satisfy 0 < lo < hi, got ({self.lo_hz}, {self.hi_hz})")

    @property
    def bandwidth(self):
        return self.hi_hz - self.lo_hz

    @property
    def label(self):
        return f"{self.lo_hz:g}-{self.hi_hz:g} Hz"

    def validate(self, fs_hz):
        nyquist = fs_hz / 2.0
        if self.hi_hz >= nyquist:
            raise ConfigError(f"Band {self.label} reaches the Nyquist frequency {nyquist:g} Hz")
        return self

    def overlaps(self, other):
        """True when the two bands share an interval of positive length."""
        return min(self.hi_hz, other.hi_hz) > max(self.lo_hz, other.lo_hz)

    def to_dict(self):
        return {"lo_hz": self.lo_hz, "hi_hz": self.hi_hz}


@dataclass(frozen=True)
class FilterBank:
    """Sorted, non-overlapping bands at one sampling rate."""

    bands: tuple
    fs_hz: float

    def __post_init__(self):
        bands = tuple(b if isinstance(b, BandSpec) else BandSpec(*b) for b in self.bands)
        for band in bands:
            band.validate(self.fs_hz)
        for prev, nxt in zip(bands, bands[1:]):
            if nxt.lo_hz < prev.hi_hz:
                raise ConfigError(f"Bands {prev.label} and {nxt.label} overlap or are unsorted")
        object.__setattr__(self, "bands", bands)
        object.__setattr__(self, "fs_hz", float(self.fs_hz))

    def __len__(self):
        return len(self.bands)

    def __iter__(self):
        return iter(self.bands)

    def subset(self, tag):
        """
        Bands of a named subset.

        'all' keeps every band, 'below20' keeps bands with hi <= 20 Hz,
        'above60' keeps bands with lo >= 60 Hz.
        """
        if tag == 'all':
            selected = self.bands
        elif tag == 'below20':
            selected = tuple(b for b in self.bands if b.hi_hz <= 20.0)
        elif tag == 'above60':
            selected = tuple(b for b in self.bands if b.lo_hz >= 60.0)
        else:
            raise ConfigError(f"Unknown band subset '{tag}', expected one of {', '.join(SUBSETS)}")
        if not selected:
            raise ConfigError(f"Band subset '{tag}' is empty for this filter bank")
        return FilterBank(bands=selected, fs_hz=self.fs_hz)

    def total_bandwidth(self):
        return float(sum(b.bandwidth for b in self.bands))

    def to_dict(self):
        return {"fs_hz": self.fs_hz, "bands": [b.to_dict() for b in self.bands]}


def _check_cutoff(fc_hz, fs_hz):
    if not 0 < fc_hz < fs_hz / 2.0:
        raise ConfigError(f"Cut-off {fc_hz} Hz must lie in (0, {fs_hz / 2.0:g}) Hz")


def design_highpass(fs_hz, fc_hz=HIGHPASS_HZ, order=HIGHPASS_ORDER):
    """Butterworth high-pass; |H(fc)| = 1/sqrt(2)."""
    _check_cutoff(fc_hz, fs_hz)
    sos = signal.butter(order, fc_hz, btype='highpass', fs=fs_hz, output='sos')
    return IirFilter(sos=sos, fs_hz=fs_hz, description=f"highpass {fc_hz:g} Hz order {order}")


def design_lowpass(fs_hz, fc_hz, order=ANTI_ALIAS_ORDER):
    """Butterworth low-pass."""
    _check_cutoff(fc_hz, fs_hz)
    sos = signal.butter(order, fc_hz, btype='lowpass', fs=fs_hz, output='sos')
    return IirFilter(sos=sos, fs_hz=fs_hz, description=f"lowpass {fc_hz:g} Hz order {order}")


def design_bandpass(band, fs_hz, order=BANDPASS_ORDER):
    """Butterworth band-pass over a BandSpec (order per edge)."""
    if not isinstance(band, BandSpec):
        band = BandSpec(*band)
    band.validate(fs_hz)
    sos = signal.butter(order, [band.lo_hz, band.hi_hz], btype='bandpass', fs=fs_hz, output='sos')
    return IirFilter(sos=sos, fs_hz=fs_hz, description=f"bandpass {band.label} order {order}")


def apply_filter(filt, x, fs_hz=None, zero_phase=False, axis=-1, padlen=None):
    """
    Filter a signal along one axis.

    Args:
        filt: IirFilter to apply.
        x: Signal array; filtered along axis.
        fs_hz: Sampling rate of x; must match the filter when given.
        zero_phase: Forward-backward filtering instead of a causal pass.
        padlen: Edge padding for the forward-backward pass; scipy's default when None.
        axis: Time axis.

    Returns:
        Filtered array with the shape of x.
    """
    if fs_hz is not None and not math.isclose(fs_hz, filt.fs_hz):
        raise ConfigError(f"Filter designed for {filt.fs_hz:g} Hz applied to a {fs_hz:g} Hz signal")
    x = np.asarray(x, dtype=np.float64)
    if zero_phase:
        return signal.sosfiltfilt(filt.sos, x, axis=axis, padlen=padlen)
    return signal.sosfilt(filt.sos, x, axis=axis)


def _decimate(samples, fs_hz, factor):
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ConfigError(f"Decimation factor must be a positive integer, got {factor}")
    samples = np.asarray(samples, dtype=np.float64)
    if factor == 1:
        return samples
    n_out = samples.shape[-1] // factor
    if n_out == 0:
        raise DatasetError(f"Signal of {samples.shape[-1]} samples is too short to decimate by {factor}")
    # Zero-phase anti-alias pass, padded by several cutoff periods so no edge transient survives.
    cutoff_hz = ANTI_ALIAS_FRACTION * fs_hz / factor
    lowpass = design_lowpass(fs_hz, cutoff_hz)
    padlen = min(samples.shape[-1] - 1, ANTI_ALIAS_PAD_PERIODS * math.ceil(fs_hz / cutoff_hz))
    smoothed = apply_filter(lowpass, samples, zero_phase=True, padlen=padlen)
    return smoothed[..., :n_out * factor:factor]


def downsample(recording, factor):
    """Anti-alias and keep every factor-th sample; length floor(N / factor)."""
    samples = _decimate(recording.samples, recording.fs_hz, factor)
    return Recording(
        fs_hz=recording.fs_hz / factor,
        channel_names=recording.channel_names,
        samples=samples,
    )


def downsample_trials(trialset, factor):
    """Downsample every trial of a TrialSet."""
    fs_out = trialset.fs_hz / factor
    needed = n_samples_for(trialset.interval_ms, fs_out)
    samples = _decimate(trialset.trials, trialset.fs_hz, factor)
    if samples.shape[-1] < needed:
        raise DatasetError(
            f"Downsampling by {factor} leaves {samples.shape[-1]} samples, interval needs {needed}"
        )
    return trialset.replace(fs_hz=fs_out, trials=samples[..., :needed])


def highpass_trials(trialset, fc_hz=HIGHPASS_HZ, order=HIGHPASS_ORDER, zero_phase=False):
    """High-pass every trial of a TrialSet."""
    filt = design_highpass(trialset.fs_hz, fc_hz, order)
    return trialset.replace(trials=apply_filter(filt, trialset.trials, trialset.fs_hz, zero_phase))


def bandpass_trials(trials, band, fs_hz, order=BANDPASS_ORDER, zero_phase=False):
    """Band-pass a [trial][channel][sample] array."""
    return apply_filter(design_bandpass(band, fs_hz, order), trials, fs_hz, zero_phase)


def _grid(start, stop, step):
    """Edges start, first multiple of step above start, ..., stop."""
    edges = [start]
    k = math.floor(start / step + 1e-9) + 1
    while k * step < stop - 1e-9:
        edges.append(round(k * step, 9))
        k += 1
    edges.append(stop)
    return edges


def build_filter_bank(fs_hz, low_edge=LOW_EDGE_HZ, split=SPLIT_HZ, high_edge=HIGH_EDGE_HZ,
                      low_bw=LOW_BANDWIDTH_HZ, high_bw=HIGH_BANDWIDTH_HZ):
    """
    Contiguous bands of width low_bw from low_edge to split and of width
    high_bw from split to high_edge.

    With the defaults the bands are [0.5, 2], [2, 4], ..., [28, 30],
    [30, 36], ..., [138, 144]: 34 bands.
    """
    if not 0 < low_edge < split < high_edge:
        raise ConfigError(f"Band grid edges must satisfy 0 < {low_edge} < {split} < {high_edge}")
    if low_bw <= 0 or high_bw <= 0:
        raise ConfigError("Bandwidths must be positive")
    if high_edge >= fs_hz / 2.0:
        raise ConfigError(f"High edge {high_edge} Hz must lie below the Nyquist frequency {fs_hz / 2.0:g} Hz")

    edges = _grid(low_edge, split, low_bw)
    high = [split + k * high_bw for k in range(1, int(math.floor((high_edge - split) / high_bw + 1e-9)) + 1)]
    edges += [round(e, 9) for e in high if e < high_edge - 1e-9] + [high_edge]

    bands = [BandSpec(lo, hi) for lo, hi in zip(edges, edges[1:])]
    return FilterBank(bands=tuple(bands), fs_hz=fs_hz)
