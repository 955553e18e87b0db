"""
Command-line entry point for the FBCSP decoder.

Subcommands:
    synth   generate a synthetic dataset with a planted band-power effect
    decode  preprocess, cross-validate per-band CSP and FBCSP, test significance
    report  aggregate decode results of several runs or subjects

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from fbcsp_decoder import __version__
from fbcsp_decoder.data_loader import get_dataset_stats, load_dataset, save_dataset
from fbcsp_decoder.errors import ConfigError, DatasetError, DecoderError, NumericalError
from fbcsp_decoder.filters import SUBSETS, build_filter_bank
from fbcsp_decoder.pipeline import (INTERVAL_PRESETS, band_covariances, fit_band_patterns, make_folds,
                                    resolve_interval, run_band_sweep, run_fbcsp)
from fbcsp_decoder.preprocessor import CRITERIA, SignalPreprocessor
from fbcsp_decoder.report import aggregate_runs, aggregate_sweeps, report, tables_from_payload
from fbcsp_decoder.synth import ORACLE_TRIALS, SynthConfig, generate
from output_generator import generate_csv_output, generate_excel_output, generate_json_output, generate_outputs
from utils import DEFAULT_CONFIG, load_config, log_error, log_success, setup_logging

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

RESULTS_FILE = "results.json"
GROUND_TRUTH_FILE = "ground_truth.json"
PATTERNS_FILE = "patterns.json"


class CliArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as JSON with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(json.dumps({"error": message}), file=sys.stderr)
        sys.exit(EXIT_USAGE)


def parse_pair(text, cast=float):
    """'10,12' -> (10.0, 12.0)."""
    parts = [p.strip() for p in str(text).split(',')]
    if len(parts) != 2 or not all(parts):
        raise ConfigError(f"Expected two comma-separated values, got '{text}'")
    try:
        return cast(parts[0]), cast(parts[1])
    except ValueError as e:
        raise ConfigError(f"Invalid value in '{text}': {e}") from e


def parse_list(text):
    return [item.strip() for item in str(text).split(',') if item.strip()]


def parse_shrinkage(value):
    if value in (None, 'auto'):
        return 'auto'
    try:
        return float(value)
    except ValueError as e:
        raise ConfigError(f"Shrinkage must be 'auto' or a number in [0, 1], got '{value}'") from e


def _pick(flag, default):
    """Command-line value when given, configuration value otherwise."""
    return default if flag is None else flag


@dataclass
class RunConfig:
    """Resolved settings of one decode run (flags over config file over defaults)."""

    subcommand: str
    dataset: str
    experiment: str
    intervals: dict
    subsets: list
    k_folds: int
    m_filters: int
    fold_scheme: str
    shrinkage: object
    n_permutations: int
    replace: bool
    raw_fraction: bool
    target_fs_hz: float
    highpass_hz: float
    highpass_order: int
    zero_phase: bool
    noisy_k: float
    detect_noisy: bool
    exclude_channels: list
    threshold_uv: float
    pre_ms: float
    criterion: str
    filter_bank: dict
    bands_sweep: bool
    patterns: bool
    sd_ddof: int
    seed: int
    output: str
    jobs: int = field(default=-1, repr=False)

    def to_dict(self):
        data = asdict(self)
        # Worker count and destination do not change results.
        data.pop('jobs')
        data.pop('output')
        data['intervals'] = {name: list(ms) for name, ms in self.intervals.items()}
        return data


def build_parser():
    defaults = DEFAULT_CONFIG
    parser = CliArgumentParser(description='Offline FBCSP + rLDA EEG decoding')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None,
                        help='INI configuration file (default: config.ini)')
    common.add_argument('--seed', type=int, default=None,
                        help=f"Master seed (default: {defaults['runtime']['seed']})")
    common.add_argument('--jobs', type=int, default=None,
                        help='Parallel workers, -1 for all cores (default: -1)')
    common.add_argument('--output', type=str, default=None,
                        help='Output directory')

    subparsers = parser.add_subparsers(dest='command', required=True)

    synth = subparsers.add_parser('synth', parents=[common], help='Generate a synthetic dataset')
    synth.add_argument('--channels', type=int, default=16, help='Number of channels (default: 16)')
    synth.add_argument('--trials', type=str, default='200,200',
                       help='Trials of class 0 and class 1, e.g. 432,288 (default: 200,200)')
    synth.add_argument('--band', type=str, default='10,12', help='Planted band in Hz (default: 10,12)')
    synth.add_argument('--ratio', type=float, default=4.0,
                       help='Class-1 / class-0 source variance in the planted band, >= 1 (default: 4)')
    synth.add_argument('--fs', type=float, default=500.0, help='Sampling rate in Hz; 5000 exercises downsampling (default: 500)')
    synth.add_argument('--interval-ms', type=str, default='-1000,7600',
                       help='Trial interval relative to onset, e.g. --interval-ms=-1000,7600 (default: -1000,7600)')
    synth.add_argument('--sources', type=int, default=None, help='Number of sources (default: channels)')
    synth.add_argument('--noise-uv', type=float, default=50.0, help='White sensor noise SD in uV (default: 50)')
    synth.add_argument('--source-uv', type=float, default=10.0, help='Source amplitude in uV (default: 10)')
    synth.add_argument('--artifact-fraction', type=float, default=0.0,
                       help='Fraction of trials with a square-pulse artifact (default: 0)')
    synth.add_argument('--artifact-uv', type=float, default=1000.0, help='Artifact amplitude in uV (default: 1000)')
    synth.add_argument('--oracle-trials', type=int, default=ORACLE_TRIALS,
                       help=f'Monte-Carlo trials for the oracle accuracy, 0 to skip (default: {ORACLE_TRIALS})')

    decode = subparsers.add_parser('decode', parents=[common], help='Decode a dataset')
    decode.add_argument('dataset', type=str, help='Dataset directory or manifest.json')
    decode.add_argument('--subset', action='append', choices=list(SUBSETS), default=None,
                        help='FBCSP band subset, repeatable (default: all three)')
    decode.add_argument('--interval', type=str, default='full',
                        choices=['full', 'late', 'intermediate', 'all'],
                        help="Named decoding interval, or 'all' for every interval of the experiment (default: full)")
    decode.add_argument('--interval-ms', type=str, default=None,
                        help='Explicit decoding interval in ms, e.g. --interval-ms=0,3000; overrides --interval')
    decode.add_argument('--experiment', type=str, default=None, choices=list(INTERVAL_PRESETS),
                        help=f"Interval presets (default: {defaults['decoding']['experiment']})")
    decode.add_argument('--k', type=int, default=None,
                        help=f"Cross-validation folds (default: {defaults['decoding']['k_folds']})")
    decode.add_argument('--m', type=int, default=None,
                        help=f"CSP filter pairs per band (default: {defaults['decoding']['m_filters']})")
    decode.add_argument('--fold-scheme', type=str, default=None, choices=['stratified', 'blocked'],
                        help=f"Fold assignment (default: {defaults['decoding']['fold_scheme']})")
    decode.add_argument('--shrinkage', type=str, default=None,
                        help="rLDA shrinkage, 'auto' or a number in [0, 1] (default: auto)")
    decode.add_argument('--perms', type=int, default=None,
                        help=f"Randomization-test resamples, 0 to skip (default: {defaults['stats']['n_permutations']})")
    decode.add_argument('--without-replacement', action='store_true',
                        help='Permute predictions instead of resampling with replacement')
    decode.add_argument('--raw-fraction', action='store_true',
                        help='Report the raw exceedance fraction instead of (r+1)/(n+1)')
    decode.add_argument('--bands-sweep', action='store_true', help='Also decode every band on its own')
    decode.add_argument('--patterns', action='store_true',
                        help='Export CSP filters and patterns of the best band below 20 Hz')
    decode.add_argument('--target-fs', type=float, default=None,
                        help=f"Downsampling target in Hz (default: {defaults['preprocessing']['target_fs_hz']:g})")
    decode.add_argument('--highpass-hz', type=float, default=None,
                        help=f"High-pass cut-off in Hz (default: {defaults['preprocessing']['highpass_hz']})")
    decode.add_argument('--highpass-order', type=int, default=None,
                        help=f"High-pass Butterworth order (default: {defaults['preprocessing']['highpass_order']})")
    decode.add_argument('--zero-phase', action='store_true', help='Forward-backward filtering')
    decode.add_argument('--threshold-uv', type=float, default=None,
                        help=f"Peak-to-peak rejection threshold (default: {defaults['cleaning']['threshold_uv']:g} uV)")
    decode.add_argument('--pre-ms', type=float, default=None,
                        help=f"Context before the interval inspected for artifacts (default: {defaults['cleaning']['pre_ms']:g} ms)")
    decode.add_argument('--criterion', type=str, default=None, choices=list(CRITERIA),
                        help='Peak-to-peak per channel or over all channels (default: any_channel)')
    decode.add_argument('--noisy-k', type=float, default=None,
                        help=f"Robust z threshold for noisy channels (default: {defaults['cleaning']['noisy_k']:g})")
    decode.add_argument('--no-noisy-detection', action='store_true', help='Skip automatic noisy-channel removal')
    decode.add_argument('--exclude', type=str, default=None, help='Comma-separated channels to drop')
    decode.add_argument('--population-sd', action='store_true', help='Population instead of sample SD in tables')
    decode.add_argument('--excel', action='store_true', help='Also write an Excel workbook')

    rep = subparsers.add_parser('report', parents=[common], help='Aggregate decode results')
    rep.add_argument('inputs', nargs='+', help='results.json files or directories containing them')
    rep.add_argument('--population-sd', action='store_true', help='Population instead of sample SD')
    rep.add_argument('--excel', action='store_true', help='Also write an Excel workbook')

    return parser


def _decode_intervals(args, experiment):
    if args.interval_ms is not None:
        return {'custom': parse_pair(args.interval_ms)}
    if args.interval == 'all':
        return dict(INTERVAL_PRESETS[experiment])
    return {args.interval: resolve_interval(args.interval, experiment)}


def resolve_run_config(args, config):
    """Merge flags over the configuration file for a decode run."""
    pre, clean, bank = config['preprocessing'], config['cleaning'], config['filter_bank']
    dec, stats = config['decoding'], config['stats']
    experiment = _pick(args.experiment, dec['experiment'])
    if experiment not in INTERVAL_PRESETS:
        raise ConfigError(f"Unknown experiment '{experiment}'")
    exclude = parse_list(args.exclude) if args.exclude is not None else list(clean['exclude_channels'])
    return RunConfig(
        subcommand='decode',
        dataset=str(args.dataset),
        experiment=experiment,
        intervals=_decode_intervals(args, experiment),
        subsets=list(args.subset) if args.subset else list(SUBSETS),
        k_folds=_pick(args.k, dec['k_folds']),
        m_filters=_pick(args.m, dec['m_filters']),
        fold_scheme=_pick(args.fold_scheme, dec['fold_scheme']),
        shrinkage=parse_shrinkage(_pick(args.shrinkage, dec['shrinkage'])),
        n_permutations=_pick(args.perms, stats['n_permutations']),
        replace=False if args.without_replacement else stats['replace'],
        raw_fraction=args.raw_fraction or stats['raw_fraction'],
        target_fs_hz=_pick(args.target_fs, pre['target_fs_hz']),
        highpass_hz=_pick(args.highpass_hz, pre['highpass_hz']),
        highpass_order=_pick(args.highpass_order, pre['highpass_order']),
        zero_phase=args.zero_phase or pre['zero_phase'],
        noisy_k=_pick(args.noisy_k, clean['noisy_k']),
        detect_noisy=not args.no_noisy_detection,
        exclude_channels=exclude,
        threshold_uv=_pick(args.threshold_uv, clean['threshold_uv']),
        pre_ms=_pick(args.pre_ms, clean['pre_ms']),
        criterion=_pick(args.criterion, clean['criterion']),
        filter_bank=dict(bank),
        bands_sweep=args.bands_sweep,
        patterns=args.patterns,
        sd_ddof=0 if args.population_sd else 1,
        seed=_pick(args.seed, config['runtime']['seed']),
        output=_pick(args.output, config['output']['path']),
        jobs=_pick(args.jobs, config['runtime']['jobs']),
    )


def cmd_synth(args, config):
    """Generate a synthetic dataset plus its ground truth."""
    seed = _pick(args.seed, config['runtime']['seed'])
    jobs = _pick(args.jobs, config['runtime']['jobs'])
    output = _pick(args.output, 'synthetic_data')

    synth_config = SynthConfig(
        n_channels=args.channels,
        n_trials_per_class=parse_pair(args.trials, int),
        fs_hz=args.fs,
        interval_ms=parse_pair(args.interval_ms),
        planted_band=parse_pair(args.band),
        variance_ratio=args.ratio,
        n_sources=args.sources,
        source_scale_uv=args.source_uv,
        sensor_noise_uv=args.noise_uv,
        artifact_fraction=args.artifact_fraction,
        artifact_amplitude_uv=args.artifact_uv,
        seed=seed,
    )
    log_success("Generating synthetic dataset", channels=synth_config.n_channels,
                trials=synth_config.n_trials_per_class, ratio=synth_config.variance_ratio, seed=seed)

    trialset, truth = generate(synth_config, n_mc=args.oracle_trials, n_jobs=jobs)
    manifest_path = save_dataset(trialset, output)
    truth_path = generate_json_output(truth.to_dict(), output, GROUND_TRUTH_FILE)

    log_success("Synthetic dataset written", manifest=str(manifest_path), trials=trialset.n_trials,
                artifacts=len(truth.artifact_trial_ids))
    summary = {"manifest": str(manifest_path), "ground_truth": truth_path}
    if truth.oracle is not None:
        summary["oracle_accuracy"] = round(truth.oracle.accuracy, 4)
        summary["oracle_stderr"] = round(truth.oracle.stderr, 4)
    print(json.dumps(summary))
    return EXIT_OK


def _best_band_below20(trialset, bank, foldplan, run, interval_ms, sweep):
    candidates = [r for r in sweep if r.band.hi_hz <= 20.0]
    if not candidates:
        candidates = run_band_sweep(trialset, bank.subset('below20'), foldplan, run.m_filters, interval_ms,
                                    run.shrinkage, run.filter_bank['order'], run.zero_phase, n_jobs=run.jobs)
    return max(candidates, key=lambda r: r.mean_accuracy).band


def _decode_interval(trialset, bank, foldplan, run, name, interval_ms, preprocessor):
    cleaned, cleaning = preprocessor.clean(trialset, interval_ms)
    n_rejected = int(cleaned.rejected.sum())
    log_success("Trials cleaned", interval=name, removed_channels=len(cleaning.removed_channels),
                rejected=n_rejected)

    covariances = band_covariances(cleaned, bank.bands, interval_ms, run.filter_bank['order'],
                                   run.zero_phase, run.jobs)
    index = {band: i for i, band in enumerate(bank.bands)}

    sweep = []
    if run.bands_sweep:
        sweep = run_band_sweep(cleaned, bank.bands, foldplan, run.m_filters, interval_ms, run.shrinkage,
                               run.filter_bank['order'], run.zero_phase, covariances=covariances,
                               n_jobs=run.jobs)
        best = max(sweep, key=lambda r: r.mean_accuracy)
        log_success("Band sweep complete", interval=name, bands=len(sweep), best_band=best.band.label,
                    best_accuracy=f"{best.mean_accuracy:.3f}")

    fbcsp = []
    for subset in run.subsets:
        bands = bank.subset(subset)
        result = run_fbcsp(
            cleaned, bands, foldplan, run.m_filters, subset=subset, interval=name,
            decode_interval_ms=interval_ms, gamma=run.shrinkage, order=run.filter_bank['order'],
            zero_phase=run.zero_phase, n_permutations=run.n_permutations, seed=run.seed,
            replace=run.replace, raw_fraction=run.raw_fraction,
            covariances=[covariances[index[b]] for b in bands], n_jobs=run.jobs,
        )
        log_success("FBCSP decoded", subset=subset, interval=name, accuracy=f"{result.mean_accuracy:.3f}",
                    p_value=result.p_value)
        fbcsp.append(result)

    patterns = None
    if run.patterns:
        band = _best_band_below20(cleaned, bank, foldplan, run, interval_ms, sweep)
        model = fit_band_patterns(cleaned, band, run.m_filters, interval_ms, run.filter_bank['order'],
                                  run.zero_phase)
        patterns = {"interval": name, "band": band.to_dict(),
                    "channel_names": list(cleaned.channel_names), **model.to_dict()}

    return cleaning, sweep, fbcsp, patterns


def cmd_decode(args, config):
    """Run the full decoding pipeline on one dataset and write its reports."""
    run = resolve_run_config(args, config)

    trialset = load_dataset(run.dataset)
    log_success("Dataset loaded", dataset=run.dataset, trials=trialset.n_trials,
                channels=trialset.n_channels, fs_hz=trialset.fs_hz)

    preprocessor = SignalPreprocessor(
        target_fs_hz=run.target_fs_hz, highpass_hz=run.highpass_hz, highpass_order=run.highpass_order,
        zero_phase=run.zero_phase, noisy_k=run.noisy_k, detect_noisy=run.detect_noisy,
        exclude_channels=run.exclude_channels, threshold_uv=run.threshold_uv, pre_ms=run.pre_ms,
        criterion=run.criterion,
    )
    filtered = preprocessor.filter(trialset)

    fb = run.filter_bank
    bank = build_filter_bank(filtered.fs_hz, fb['low_edge'], fb['split'], fb['high_edge'], fb['low_bw'], fb['high_bw'])
    foldplan = make_folds(filtered, run.k_folds, run.seed, run.fold_scheme)

    cleaning, sweeps, results, patterns = {}, [], [], []
    for name, interval_ms in run.intervals.items():
        cleaning_report, sweep, fbcsp, pattern = _decode_interval(filtered, bank, foldplan, run, name,
                                                                  interval_ms, preprocessor)
        cleaning[name] = cleaning_report.to_dict()
        sweeps.append((name, sweep))
        results.extend(fbcsp)
        if pattern is not None:
            patterns.append(pattern)

    all_sweep = [r for _, sweep in sweeps for r in sweep]
    tables = report(results + all_sweep, run.sd_ddof)
    payload = {
        "version": __version__,
        "run": run.to_dict(),
        "dataset": get_dataset_stats(trialset),
        "filter_bank": bank.to_dict(),
        "folds": foldplan.to_dict(),
        "cleaning": cleaning,
        "fbcsp": [r.to_dict() for r in results],
        "sweep": [{"interval": name, **r.to_dict()} for name, sweep in sweeps for r in sweep],
    }
    output_files = generate_outputs(payload, tables, run.output, excel=args.excel)
    if patterns:
        output_files["patterns"] = generate_json_output(patterns, run.output, PATTERNS_FILE)
    log_success("Decoding complete", output=run.output, files=len(output_files))

    for row in tables['fbcsp'].itertuples(index=False):
        print(f"{row.subset:<8} {row.interval:<13} {row.cell}")
    return EXIT_OK


def _collect_result_files(inputs):
    files = []
    for item in inputs:
        path = Path(item)
        if path.is_dir():
            files.extend(sorted(path.rglob(RESULTS_FILE)))
        elif path.is_file():
            files.append(path)
        else:
            raise FileNotFoundError(f"Input not found: {path}")
    if not files:
        raise DatasetError(f"No {RESULTS_FILE} files found in {', '.join(map(str, inputs))}")
    return files


def cmd_report(args, config):
    """Aggregate several decode results into "mean (sd)" tables."""
    ddof = 0 if args.population_sd else 1
    output = _pick(args.output, config['output']['path'])

    fbcsp_tables, sweep_tables = [], []
    for path in _collect_result_files(args.inputs):
        try:
            with open(path, 'r', encoding='utf-8') as f:
                payload = json.load(f)
        except json.JSONDecodeError as e:
            raise DatasetError(f"Invalid JSON in {path}: {e}") from e
        tables = tables_from_payload(payload)
        fbcsp_tables.append(tables['fbcsp'])
        sweep_tables.append(tables['sweep'])
    log_success("Result files read", files=len(fbcsp_tables))

    aggregate = aggregate_runs(fbcsp_tables, ddof)
    sweep = aggregate_sweeps(sweep_tables)
    generate_csv_output(aggregate, output, "aggregate.csv")
    if not sweep.empty:
        generate_csv_output(sweep, output, "aggregate_sweep.csv")
    if args.excel:
        generate_excel_output({"Aggregate": aggregate, "Sweep": sweep}, output, "aggregate.xlsx")

    for row in aggregate.itertuples(index=False):
        marker = " <" if row.best else ""
        print(f"{row.subset:<8} {row.interval:<13} {row.cell}  n={row.n_runs}{marker}")
    return EXIT_OK


COMMANDS = {'synth': cmd_synth, 'decode': cmd_decode, 'report': cmd_report}


def _fail(code, message, **kwargs):
    log_error(message, **kwargs)
    print(json.dumps({"error": message}), file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
    except ValueError as e:
        return _fail(EXIT_USAGE, str(e), config_file=args.config)
    setup_logging(config['logging'])

    try:
        return COMMANDS[args.command](args, config)
    except (DatasetError, FileNotFoundError) as e:
        return _fail(EXIT_DATA, str(e), command=args.command)
    except (NumericalError, linalg.LinAlgError, np.linalg.LinAlgError) as e:
        return _fail(EXIT_NUMERICAL, str(e), command=args.command)
    except (ConfigError, DecoderError, ValueError) as e:
        return _fail(EXIT_USAGE, str(e), command=args.command)


if __name__ == '__main__':
    sys.exit(main())
