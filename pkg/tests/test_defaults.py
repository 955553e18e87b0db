"""
Published parameter values must stay the defaults.
"""

from pathlib import Path

from fbcsp_decoder import csp, filters, pipeline, preprocessor, stats
from fbcsp_decoder.classifier import RldaClassifier
from fbcsp_decoder.filters import build_filter_bank
from fbcsp_decoder.preprocessor import SignalPreprocessor
from utils import DEFAULT_CONFIG, load_config

ROOT = Path(__file__).resolve().parent.parent


def test_preprocessing_defaults():
    assert filters.TARGET_FS_HZ == 500.0
    assert filters.HIGHPASS_HZ == 0.5
    assert filters.HIGHPASS_ORDER == 4
    assert preprocessor.THRESHOLD_UV == 600.0
    assert preprocessor.PRE_MS == 500.0

    chain = SignalPreprocessor()
    assert (chain.target_fs_hz, chain.highpass_hz, chain.highpass_order) == (500.0, 0.5, 4)
    assert (chain.threshold_uv, chain.pre_ms) == (600.0, 500.0)
    assert chain.zero_phase is False


def test_band_grid():
    bank = build_filter_bank(500.0)
    edges = [(b.lo_hz, b.hi_hz) for b in bank]

    assert edges[0] == (0.5, 2.0)
    assert edges[1] == (2.0, 4.0)
    assert edges[14] == (28.0, 30.0)
    assert edges[15] == (30.0, 36.0)
    assert edges[-1] == (138.0, 144.0)
    assert len(bank) == 34
    assert all(b.bandwidth == 2.0 for b in bank.bands[1:15])
    assert all(b.bandwidth == 6.0 for b in bank.bands[15:])
    assert len(bank.subset('below20')) == 10
    assert len(bank.subset('above60')) == 14


def test_decoding_defaults():
    assert csp.N_FILTER_PAIRS == 3
    assert pipeline.K_FOLDS == 10
    assert stats.N_PERMUTATIONS == 100000
    assert RldaClassifier().gamma == 'auto'


def test_shipped_config_matches_the_defaults():
    assert load_config(ROOT / 'config.ini') == DEFAULT_CONFIG


def test_missing_config_falls_back_to_defaults(tmp_path):
    assert load_config(tmp_path / 'absent.ini') == DEFAULT_CONFIG


def test_config_overrides_are_typed(tmp_path):
    path = tmp_path / 'custom.ini'
    path.write_text("[decoding]\nk_folds = 5\n\n[cleaning]\nexclude_channels = Fp1, Fp2\n\n"
                    "[preprocessing]\nzero_phase = yes\n", encoding='utf-8')

    config = load_config(path)

    assert config['decoding']['k_folds'] == 5
    assert config['cleaning']['exclude_channels'] == ['Fp1', 'Fp2']
    assert config['preprocessing']['zero_phase'] is True
    assert config['decoding']['m_filters'] == 3
