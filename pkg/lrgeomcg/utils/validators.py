"""
Validators for lrgeomcg
Parsing and schema validation of flat key = value experiment spec files
"""

import logging
from typing import Any, Callable, Dict

from jsonschema import Draft7Validator

from lrgeomcg.exceptions import SpecError

# Configure logging
logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = ['single', 'size-sweep', 'rank-sweep', 'os-sweep', 'noise-sweep', 'hybrid', 'homotopy']
SOLVER_PREFIX = 'solver.'


def _int_list(text: str):
    return [int(x) for x in _split(text)]


def _float_list(text: str):
    return [float(x) for x in _split(text)]


def _split(text: str):
    return [x.strip() for x in text.split(',') if x.strip()]


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f'not a boolean: {text!r}')


KEY_TYPES: Dict[str, Callable[[str], Any]] = {
    'kind': str.strip,
    'name': str.strip,
    'sizes': _int_list,
    'ranks': _int_list,
    'os': _float_list,
    'noise': _float_list,
    'sweeps': _int_list,
    'seeds': _int_list,
    'sigma': float,
    'reference_rank': int,
    'reference_os': float,
    'output': str.strip,
    'traces': _bool,
    'record_timing': _bool,
    'workers': int,
}

EXPERIMENT_SCHEMA = {
    'type': 'object',
    'required': ['kind', 'seeds'],
    'additionalProperties': False,
    'properties': {
        'kind': {'enum': EXPERIMENT_KINDS},
        'name': {'type': 'string', 'pattern': '^[A-Za-z0-9_.-]+$'},
        'sizes': {'type': 'array', 'minItems': 1, 'items': {'type': 'integer', 'minimum': 2}},
        'ranks': {'type': 'array', 'minItems': 1, 'items': {'type': 'integer', 'minimum': 1}},
        'os': {'type': 'array', 'minItems': 1, 'items': {'type': 'number', 'minimum': 1}},
        'noise': {'type': 'array', 'minItems': 1, 'items': {'type': 'number', 'minimum': 0}},
        'sweeps': {'type': 'array', 'minItems': 1, 'items': {'type': 'integer', 'minimum': 0}},
        'seeds': {'type': 'array', 'minItems': 1, 'uniqueItems': True,
                  'items': {'type': 'integer', 'minimum': 0}},
        'sigma': {'type': 'number', 'exclusiveMinimum': 0},
        'reference_rank': {'type': 'integer', 'minimum': 1},
        'reference_os': {'type': 'number', 'minimum': 1},
        'output': {'type': 'string', 'minLength': 1},
        'traces': {'type': 'boolean'},
        'record_timing': {'type': 'boolean'},
        'workers': {'type': 'integer', 'minimum': 1},
        'solver': {'type': 'object', 'additionalProperties': {'type': 'string'}},
    },
}


def parse_spec_text(text: str) -> Dict[str, Any]:
    """
    Parse ``key = value`` lines into a typed mapping. '#' starts a comment,
    list values are comma separated and ``solver.<option>`` keys are collected
    under 'solver' as raw strings.
    """
    spec: Dict[str, Any] = {}
    solver: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise SpecError(f'line {lineno}: expected key = value')
        key, value = (part.strip() for part in line.split('=', 1))
        if key.startswith(SOLVER_PREFIX):
            solver[key[len(SOLVER_PREFIX):]] = value
            continue
        if key in spec:
            raise SpecError(f'line {lineno}: duplicate key {key!r}')
        parse = KEY_TYPES.get(key)
        if parse is None:
            raise SpecError(f'line {lineno}: unknown key {key!r}')
        try:
            spec[key] = parse(value)
        except ValueError as e:
            raise SpecError(f'line {lineno}: invalid value for {key!r}: {e}') from e
    if solver:
        spec['solver'] = solver
    return spec


def validate_spec(spec: Dict[str, Any]) -> Dict[str, Any]:
    """Validate a parsed spec against the experiment schema"""
    errors = sorted(Draft7Validator(EXPERIMENT_SCHEMA).iter_errors(spec), key=lambda e: [str(p) for p in e.path])
    if errors:
        messages = '; '.join(
            f"{'.'.join(str(p) for p in error.path) or 'spec'}: {error.message}" for error in errors
        )
        logger.error(f"Invalid experiment spec: {messages}")
        raise SpecError(messages)
    return spec
