import json

import pytest

from core.config_manager import ConfigManager


@pytest.fixture
def manager():
    return ConfigManager()


def test_defaults(manager):
    config = manager.load_config(None)
    assert config['engine']['warn_ulps'] == 45
    assert config['engine']['cond_threshold'] == 2.0 ** 40
    assert config['engine']['absorb_ulps'] == 4.0
    assert config['orchestrator']['max_reexec'] == 20
    assert config['oracle']['precision'] == 512
    assert config['reporting']['score_margin'] is None
    config['engine']['warn_ulps'] = 1
    assert manager.defaults()['engine']['warn_ulps'] == 45


def test_missing_file_is_created(manager, tmp_path):
    path = tmp_path / 'conf' / 'residue.json'
    config = manager.load_config(str(path))
    assert config == manager.defaults()
    saved = json.loads(path.read_text(encoding='utf-8'))
    assert '_metadata' in saved


def test_partial_file_is_merged(manager, tmp_path):
    path = tmp_path / 'residue.json'
    path.write_text(json.dumps({'engine': {'warn_ulps': 30}, '_metadata': {'version': 'x'}}),
                    encoding='utf-8')
    config = manager.load_config(str(path))
    assert config['engine']['warn_ulps'] == 30
    assert config['engine']['absorb_ulps'] == 4.0
    assert '_metadata' not in config


def test_invalid_json_falls_back(manager, tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"engine": ', encoding='utf-8')
    assert manager.load_config(str(path)) == manager.defaults()


def test_values_are_clamped_and_typed(manager, tmp_path):
    path = tmp_path / 'residue.json'
    path.write_text(json.dumps({
        'engine': {'warn_ulps': 5000, 'absorb_ulps': 0, 'inherit_absorbed': 'yes'},
        'orchestrator': {'max_reexec': 7.9, 'state_dir': '  '},
        'oracle': {'precision': 'high'},
        'reporting': {'score_margin': 100, 'zero_ulp_policy': 'weird'},
        'corpus': 'not a section',
    }), encoding='utf-8')
    config = manager.load_config(str(path))
    assert config['engine']['warn_ulps'] == 1074
    assert config['engine']['absorb_ulps'] == 1.0
    assert config['engine']['inherit_absorbed'] is True
    assert config['orchestrator']['max_reexec'] == 7
    assert config['orchestrator']['state_dir'] == '.residue_state'
    assert config['oracle']['precision'] == 512
    assert config['reporting']['score_margin'] == 45.0
    assert config['reporting']['zero_ulp_policy'] == 'infinite'
    assert config['corpus'] == manager.defaults()['corpus']


def test_overrides(manager):
    config = manager.defaults()
    updated = manager.apply_overrides(config, {'engine.warn_ulps': 40,
                                               'orchestrator.max_reexec': None,
                                               'reporting.zero_ulp_policy': 'denormal'})
    assert updated['engine']['warn_ulps'] == 40
    assert updated['orchestrator']['max_reexec'] == 20
    assert updated['reporting']['zero_ulp_policy'] == 'denormal'
    assert config['engine']['warn_ulps'] == 45


def test_save_and_summary(manager, tmp_path):
    config = manager.apply_overrides(manager.defaults(), {'oracle.precision': 1024})
    path = tmp_path / 'saved.json'
    assert manager.save_config(str(path), config)
    assert manager.load_config(str(path))['oracle']['precision'] == 1024
    summary = manager.get_config_summary(config)
    assert summary['oracle_precision'] == 1024
    assert summary['warn_ulps'] == 45
    assert manager.get_config_summary({}) == {}
