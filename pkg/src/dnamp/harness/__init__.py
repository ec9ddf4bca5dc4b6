"""Verification suites, reports and the command line tool."""

from .report import CheckItem, CheckReport
from .suites import (
    cached_amplitude,
    suite_annihilation,
    suite_commutators,
    suite_derivations,
    suite_golden,
    suite_residues,
    suite_structure,
    suite_vanishing_instance,
)


def cli_main(argv=None) -> int:
    from .cli import main

    return main(argv)
