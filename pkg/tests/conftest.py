# -*- coding: utf-8 -*-


###########
# IMPORTS #
###########

# Standard

from json import (
    load
)

from pathlib import (
    Path
)


#############
# CONSTANTS #
#############

_fixtures_directory = Path(__file__).resolve().parent / 'fixtures'

_reserved_fixtures = (
    'caplog',
    'capsys',
    'monkeypatch',
    'request',
    'tmp_path',
    'tmp_path_factory'
)

_special_floats = {
    'NaN': float('nan'),
    'Infinity': float('inf'),
    '-Infinity': float('-inf')
}


###########
# CACHING #
###########

_fixtures = {}


#############
# FUNCTIONS #
#############

def _load_fixture(module_name):

    if module_name not in _fixtures:

        fixture_file = _fixtures_directory / f'fixtures_{module_name}.json'

        if fixture_file.is_file():
            with fixture_file.open('r', encoding='utf-8') as file:
                _fixtures[module_name] = _sanitize(load(file))
        else:
            _fixtures[module_name] = None

    return _fixtures[module_name]


def _parametrization(fixture, names, test_name):

    # Fixture keys are test names without the "test_" prefix plus a "_data" suffix.
    key = f'{test_name[5:]}_data'
    data = fixture.get(key)

    if isinstance(data, dict):
        if all(name in data for name in names):
            return [tuple(data[name] for name in names)], [test_name]
        return [], []

    if isinstance(data, list):

        values = []
        ids = []

        for index, case in enumerate(data, 1):

            # A partially matching case disables the whole parametrization.
            if not all(name in case for name in names):
                return [], []

            values.append(tuple(case[name] for name in names))
            ids.append(f'{test_name}_{case["id"]}' if 'id' in case else f'{test_name} #{index}')

        return values, ids

    return [], []


def _sanitize(element):

    if isinstance(element, dict):
        return {key: _sanitize(value) for key, value in element.items()}

    if isinstance(element, list):
        return [_sanitize(item) for item in element]

    if isinstance(element, str) and element in _special_floats:
        return _special_floats[element]

    return element


#########
# SETUP #
#########

def pytest_configure(config):

    config.addinivalue_line('filterwarnings', 'ignore::DeprecationWarning')
    config.addinivalue_line('filterwarnings', 'ignore::PendingDeprecationWarning')
    config.addinivalue_line('filterwarnings', 'ignore::matplotlib.MatplotlibDeprecationWarning')

    config.addinivalue_line('markers', 'slow: mark tests as slow (exclude them with \'-m "not slow"\').')


def pytest_generate_tests(metafunc):

    names = [name for name in metafunc.fixturenames if name not in _reserved_fixtures]

    if len(names) == 0 or metafunc.definition.get_closest_marker('parametrize') is not None:
        return

    module_name = metafunc.module.__name__.split('.')[-1]
    module_name = module_name[module_name.find('_') + 1:]

    fixture = _load_fixture(module_name)
    values, ids = [], []

    if isinstance(fixture, dict) and len(fixture) > 0:
        values, ids = _parametrization(fixture, names, metafunc.definition.name)

    metafunc.parametrize(names, values, ids=ids)
