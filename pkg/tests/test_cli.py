import os

import pytest
import yaml

from logic import config
from logic.cli_analysis import build_parser, main
from logic.exceptions import InputError
from logic.lie_engine import TheoryCache


def scenario_file(tmp_path, **elements):
    content = {
        'name': 'cli_run',
        'elements': dict({'a_km': 9500.0, 'e': 0.2, 'i_deg': 20.0, 'argp_deg': 30.0, 'M_deg': 45.0},
                         **elements),
        'theory': {'theory': 2, 'order': 1},
        'duration_s': 7200.0,
        'sample_dt_s': 600.0,
    }
    path = tmp_path / 'scenario.yaml'
    path.write_text(yaml.safe_dump(content), encoding='utf-8')
    return str(path)


def read_tree(root):
    files = {}
    for folder, _, names in os.walk(root):
        for name in names:
            path = os.path.join(folder, name)
            with open(path, 'rb') as stream:
                files[os.path.relpath(path, root)] = stream.read()
    return files


class TestParser:

    def test_defaults(self):
        args = build_parser().parse_args(['verify'])
        assert args.order == 2
        assert args.theory is None
        assert args.cache is None

    def test_cache_after_command(self):
        args = build_parser().parse_args(['derive', '--cache', 'elsewhere'])
        assert args.cache == 'elsewhere'

    def test_repeated_scenarios(self):
        args = build_parser().parse_args(['propagate', '--scenario', 'x.yaml', '--scenario', 'y.yaml'])
        assert args.scenario == ['x.yaml', 'y.yaml']

    def test_unknown_theory(self):
        with pytest.raises(InputError):
            build_parser().parse_args(['derive', '--theory', '3'])

    @pytest.mark.parametrize('argv', [
        ['derive', '--theory', '3'],
        ['verify', '--order', 'two'],
        ['simulate'],
        [],
    ])
    def test_usage_errors_exit_as_bad_input(self, argv, capsys):
        assert main(argv) == config.EXIT_BAD_INPUT
        assert 'usage: meanelem' in capsys.readouterr().err


class TestDerive:

    def test_cache_is_deterministic(self, tmp_path):
        cache = str(tmp_path / 'cache')
        assert main(['--cache', cache, 'derive', '--theory', '2', '--order', '1']) == config.EXIT_OK
        first = read_tree(cache)
        assert main(['--cache', cache, 'derive', '--theory', '2', '--order', '1']) == config.EXIT_OK
        assert read_tree(cache) == first
        assert TheoryCache(cache).covers(2, 1)

    def test_order_out_of_range(self, tmp_path):
        assert main(['--cache', str(tmp_path), 'derive', '--order', '9']) == config.EXIT_BAD_INPUT

    def test_patched_at_maximum_order(self, tmp_path):
        args = ['--cache', str(tmp_path), 'derive', '--theory', '1', '--order', '4', '--patched']
        assert main(args) == config.EXIT_BAD_INPUT


class TestVerify:

    def test_first_order_passes(self, tmp_path):
        out = str(tmp_path / 'out')
        args = ['--cache', str(tmp_path / 'cache'), 'verify', '--theory', '2', '--order', '1', '--out', out]
        assert main(args) == config.EXIT_OK
        assert os.path.exists(os.path.join(out, 'verification_theory2_order1.xlsx'))
        assert os.path.exists(os.path.join(out, 'verification_theory2_order1.txt'))

    def test_corrupted_fixture_fails(self, tmp_path):
        with open(config.FIXTURES_FILE, encoding='utf-8') as stream:
            content = yaml.safe_load(stream)
        content['fixtures']['generator_e']['expression'] += ' + cos(3*M)'
        corrupted = tmp_path / 'corrupted.yaml'
        corrupted.write_text(yaml.safe_dump(content), encoding='utf-8')
        args = ['--cache', str(tmp_path / 'cache'), 'verify', '--theory', '2', '--order', '1',
                '--fixtures', str(corrupted), '--out', str(tmp_path / 'out')]
        assert main(args) == config.EXIT_MISMATCH

    def test_missing_fixture_file(self, tmp_path):
        args = ['--cache', str(tmp_path), 'verify', '--fixtures', str(tmp_path / 'absent.yaml')]
        assert main(args) == config.EXIT_BAD_INPUT

    def test_malformed_fixture_file(self, tmp_path):
        broken = tmp_path / 'broken.yaml'
        broken.write_text('fixtures: [unclosed\n', encoding='utf-8')
        args = ['--cache', str(tmp_path), 'verify', '--fixtures', str(broken)]
        assert main(args) == config.EXIT_BAD_INPUT


class TestPropagate:

    def test_short_run_from_cache(self, theory2, tmp_path):
        cache = str(tmp_path / 'cache')
        TheoryCache(cache).save(theory2)
        out = str(tmp_path / 'out')
        args = ['--cache', cache, 'propagate', '--scenario', scenario_file(tmp_path), '--out', out]
        assert main(args) == config.EXIT_OK
        assert sorted(os.listdir(out)) == ['cli_run_errors.csv', 'cli_run_reference.csv',
                                           'cli_run_semianalytic.csv']

    def test_bad_elements(self, tmp_path):
        args = ['--cache', str(tmp_path), 'propagate', '--scenario', scenario_file(tmp_path, e=0.0)]
        assert main(args) == config.EXIT_BAD_INPUT

    def test_missing_scenario(self, tmp_path):
        args = ['--cache', str(tmp_path), 'propagate', '--scenario', str(tmp_path / 'absent.yaml')]
        assert main(args) == config.EXIT_BAD_INPUT

    def test_unknown_bundled_name(self, tmp_path):
        args = ['--cache', str(tmp_path), 'propagate', '--scenario', 'fig9']
        assert main(args) == config.EXIT_BAD_INPUT
