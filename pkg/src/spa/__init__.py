"""Symbolic protocol analysis with communicable assertions.

The library decides Dolev-Yao and assertion derivability, normalizes equality
proofs and searches for bounded-session secrecy attacks.  ``spa.cli`` wraps it
as a command-line tool.
"""

from .derive import assert_derives, find_witness, replay_certificate
from .dy import derivable
from .eqproof import check_eq_proof, is_normal, normalize
from .insecurity import find_attack, verify_zap_preservation
from .protocol import validate_run
from .saturation import eq_derives
from .speclang import load, parse, pretty_print

__version__ = "0.1.0"

__all__ = [
    "assert_derives",
    "check_eq_proof",
    "derivable",
    "eq_derives",
    "find_attack",
    "find_witness",
    "is_normal",
    "load",
    "normalize",
    "parse",
    "pretty_print",
    "replay_certificate",
    "validate_run",
    "verify_zap_preservation",
]
