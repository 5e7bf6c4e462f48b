"""
Command-line interface for lrgeomcg
Command registry and the error envelope shared by all subcommands
"""

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from lrgeomcg.exceptions import ArgumentError

# Configure logging
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


@dataclass
class Command:
    """A subcommand: argument setup plus a handler returning a result mapping"""
    name: str
    help: str
    configure: Optional[Callable[[argparse.ArgumentParser], None]] = None
    handler: Optional[Callable[[argparse.Namespace], Dict[str, Any]]] = None

    def arguments(self, func: Callable[[argparse.ArgumentParser], None]):
        self.configure = func
        return func

    def action(self, func: Callable[[argparse.Namespace], Dict[str, Any]]):
        self.handler = func
        return func


@dataclass
class CLI:
    """Registry of subcommands; ``run`` returns the process exit code"""
    prog: str = 'lrgeomcg'
    commands: Dict[str, Command] = field(default_factory=dict)

    def register(self, command: Command):
        if command.name in self.commands:
            raise ValueError(f'Command {command.name} registered twice')
        self.commands[command.name] = command

    def build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog=self.prog,
            description='Low-rank matrix completion by Riemannian conjugate gradients',
        )
        subparsers = parser.add_subparsers(dest='command', required=True)
        for command in self.commands.values():
            sub = subparsers.add_parser(command.name, help=command.help)
            if command.configure is not None:
                command.configure(sub)
        return parser

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        parser = self.build_parser()
        args = parser.parse_args(argv)
        command = self.commands[args.command]
        try:
            result = command.handler(args)
        except ArgumentError as e:
            return self._fail(command, e, EXIT_USAGE)
        except Exception as e:
            return self._fail(command, e, EXIT_FAILURE)
        print(json.dumps(_jsonable({'success': True, **result}), sort_keys=True))
        return EXIT_OK

    @staticmethod
    def _fail(command: Command, error: Exception, code: int) -> int:
        logger.error(f"{command.name} failed: {error}")
        print(json.dumps({'success': False, 'error': str(error), 'type': type(error).__name__}),
              file=sys.stderr)
        return code


def parse_assignments(items: List[str]) -> Dict[str, str]:
    """``key=value`` strings from repeated --set flags"""
    overrides = {}
    for item in items or []:
        if '=' not in item:
            raise ArgumentError(f'Expected key=value, got {item!r}')
        key, value = item.split('=', 1)
        overrides[key.strip()] = value.strip()
    return overrides
