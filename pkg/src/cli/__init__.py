"""
Command-line interface.
"""
from src.cli.main import run, main, build_parser

__all__ = ['run', 'main', 'build_parser']
