"""
Result tables: "mean (sd)" cells, per-band rows and aggregation across
runs or subjects.
"""

import numpy as np
import pandas as pd

from .errors import DatasetError
from .pipeline import BandResult, FbcspResult
from .stats import significance_stars

SD_DDOF = 1

FBCSP_COLUMNS = [
    'subset', 'interval', 'interval_start_ms', 'interval_end_ms', 'n_bands', 'n_features',
    'mean_accuracy', 'sd_accuracy', 'pooled_accuracy', 'class0_accuracy', 'class1_accuracy',
    'p_value', 'stars', 'cell',
]
SWEEP_COLUMNS = ['band_lo', 'band_hi', 'accuracy', 'sd_accuracy', 'pooled_accuracy']


def mean_sd(values, ddof=SD_DDOF):
    """Mean and standard deviation; a single value has SD 0."""
    values = np.asarray(list(values), dtype=np.float64)
    if len(values) == 0:
        raise DatasetError("No values to summarize")
    sd = float(values.std(ddof=ddof)) if len(values) > ddof else 0.0
    return float(values.mean()), sd


def format_mean_sd(values, ddof=SD_DDOF):
    """'0.620 (0.020)' for the values 0.6, 0.64, 0.62."""
    mean, sd = mean_sd(values, ddof)
    return f"{mean:.3f} ({sd:.3f})"


def fbcsp_rows(results, ddof=SD_DDOF):
    """One row per FbcspResult; the SD runs over its folds."""
    rows = []
    for result in results:
        class0, class1 = result.class_accuracies
        mean, sd = mean_sd(result.fold_accuracies, ddof)
        rows.append({
            'subset': result.subset,
            'interval': result.interval,
            'interval_start_ms': result.interval_ms[0],
            'interval_end_ms': result.interval_ms[1],
            'n_bands': len(result.bands),
            'n_features': result.n_features,
            'mean_accuracy': mean,
            'sd_accuracy': sd,
            'pooled_accuracy': result.pooled_accuracy,
            'class0_accuracy': class0,
            'class1_accuracy': class1,
            'p_value': result.p_value,
            'stars': significance_stars(result.p_value),
            'cell': format_mean_sd(result.fold_accuracies, ddof) + significance_stars(result.p_value),
        })
    return pd.DataFrame(rows, columns=FBCSP_COLUMNS)


def sweep_rows(results, ddof=SD_DDOF):
    """(band_lo, band_hi, accuracy) rows of a frequency-resolved sweep."""
    rows = []
    for result in results:
        mean, sd = mean_sd(result.fold_accuracies, ddof)
        rows.append({
            'band_lo': result.band.lo_hz,
            'band_hi': result.band.hi_hz,
            'accuracy': mean,
            'sd_accuracy': sd,
            'pooled_accuracy': result.pooled_accuracy,
        })
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def report(results, ddof=SD_DDOF):
    """
    Tables for a list of BandResult and FbcspResult objects.

    Returns:
        Dictionary with 'fbcsp' and 'sweep' DataFrames.
    """
    results = list(results)
    return {
        'fbcsp': fbcsp_rows([r for r in results if isinstance(r, FbcspResult)], ddof),
        'sweep': sweep_rows([r for r in results if isinstance(r, BandResult)], ddof),
    }


def best_interval(table):
    """Interval with the highest mean accuracy per subset."""
    if table.empty:
        return {}
    best = table.loc[table.groupby('subset', sort=False)['mean_accuracy'].idxmax()]
    return dict(zip(best['subset'], best['interval']))


def aggregate_runs(tables, ddof=SD_DDOF):
    """
    Aggregate per-run FBCSP tables into one row per (subset, interval).

    Args:
        tables: FBCSP DataFrames, one per run or subject.

    Returns:
        DataFrame with n_runs, mean, sd, 'mean (sd)' cell and a best flag
        marking the best interval of each subset.
    """
    tables = [t for t in tables if not t.empty]
    if not tables:
        raise DatasetError("No FBCSP rows to aggregate")
    combined = pd.concat(tables, ignore_index=True)

    rows = []
    for (subset, interval), group in combined.groupby(['subset', 'interval'], sort=False):
        mean, sd = mean_sd(group['mean_accuracy'], ddof)
        rows.append({
            'subset': subset,
            'interval': interval,
            'n_runs': len(group),
            'mean_accuracy': mean,
            'sd_accuracy': sd,
            'cell': format_mean_sd(group['mean_accuracy'], ddof),
        })
    table = pd.DataFrame(rows)
    best = best_interval(table)
    table['best'] = [best.get(s) == i for s, i in zip(table['subset'], table['interval'])]
    return table


def aggregate_sweeps(tables):
    """Mean accuracy per band across runs."""
    tables = [t for t in tables if not t.empty]
    if not tables:
        return pd.DataFrame(columns=['band_lo', 'band_hi', 'n_runs', 'accuracy', 'sd_accuracy'])
    combined = pd.concat(tables, ignore_index=True)
    grouped = combined.groupby(['band_lo', 'band_hi'])['accuracy']
    table = grouped.agg(n_runs='count', accuracy='mean', sd_accuracy='std').reset_index()
    table['sd_accuracy'] = table['sd_accuracy'].fillna(0.0)
    return table


def tables_from_payload(payload):
    """Rebuild the per-run tables from a written results document."""
    if not isinstance(payload, dict) or 'fbcsp' not in payload:
        raise DatasetError("Results document has no 'fbcsp' section")
    fbcsp = pd.DataFrame(
        [{
            'subset': entry['subset'],
            'interval': entry['interval'],
            'mean_accuracy': entry['mean_accuracy'],
            'pooled_accuracy': entry.get('pooled_accuracy'),
            'p_value': entry.get('p_value'),
        } for entry in payload['fbcsp']],
        columns=['subset', 'interval', 'mean_accuracy', 'pooled_accuracy', 'p_value'],
    )
    sweep = pd.DataFrame(
        [{
            'band_lo': entry['band']['lo_hz'],
            'band_hi': entry['band']['hi_hz'],
            'accuracy': entry['mean_accuracy'],
        } for entry in payload.get('sweep', [])],
        columns=['band_lo', 'band_hi', 'accuracy'],
    )
    return {'fbcsp': fbcsp, 'sweep': sweep}
