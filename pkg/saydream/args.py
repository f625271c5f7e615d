from __future__ import annotations
import argparse
from argparse import ArgumentTypeError
import argcomplete
from os import path as osp
from typing import Any, Dict, List, Tuple
from collections.abc import Callable
from recordclass import RecordClass

Option = Tuple[Tuple[str, ...], Dict[str, Any]]


class Command(RecordClass):
    name: str
    help: str
    fn: Callable
    options: List[Option]


commands: Dict[str, Command] = {}


def option(*flags: str, **kwargs: Any) -> Option:
    """An extra argument of one subcommand, as for `add_argument`."""
    return flags, kwargs


def command(name: str, help: str, *options: Option) -> Callable:
    """
    A decorator for functions implementing a pipeline stage, making them
    available as a subcommand. The function takes the parsed arguments and
    the loaded `ExperimentConfig` and returns the one-line summary printed
    on success.

    Args:
      name: The subcommand name.
      help: A brief description shown in the help messages.
      options: Extra arguments of this subcommand (see `option`).
    """
    def register_command(fn: Callable) -> Callable:
        commands[name] = Command(name, help, fn, list(options))
        return fn
    return register_command


def check_file(filename: str) -> str:
    """ Check file exists function """
    if (osp.exists(filename)):
        return filename
    else:
        raise ArgumentTypeError('Could not find input file: '
                                f'\"{filename}\"')


def step_list(text: str) -> Tuple[int, ...]:
    """ Parse a comma separated list of positive step counts """
    try:
        steps = tuple(int(s) for s in text.split(',') if s.strip())
    except ValueError:
        raise ArgumentTypeError(f'Invalid step list: \"{text}\"')
    if (len(steps) == 0 or min(steps) < 1):
        raise ArgumentTypeError(f'Invalid step list: \"{text}\"')
    return steps


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=check_file, default=None,
                        help='The JSON experiment config; missing keys take '
                        'their defaults (default: all defaults)')
    parser.add_argument('--out', default='.', metavar='DIR',
                        help='The artifact directory: inputs of the stage are '
                        'read from it and outputs written to it (default: '
                        '%(default)s)')
    parser.add_argument('--seed', type=int, default=None,
                        help='Override the global seed of the config')
    parser.add_argument('-v', '--verbose', action='store_true',
                        help='Log debug messages')


def get_parser() -> argparse.ArgumentParser:
    """
    Generate the argument parser: one subparser per registered command, each
    with the common options and its own.

    Returns:
        The argparse ArgumentParser that was generated.
    """
    parser = argparse.ArgumentParser(prog='saydream', description='A '
                                     'desk-scale lab for world-model '
                                     'imagination conditioned manipulation.')
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    subparsers.required = True
    for name in commands:
        cmd = commands[name]
        sub = subparsers.add_parser(name, help=cmd.help,
                                    description=cmd.help)
        _common(sub)
        for flags, kwargs in cmd.options:
            sub.add_argument(*flags, **kwargs)
    argcomplete.autocomplete(parser)
    return parser
