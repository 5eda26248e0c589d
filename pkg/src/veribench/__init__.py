"""Verification competition harness.

Parsing for specs and networks, a baseline verifier/falsifier, competition
scoring, and a subprocess harness with a small CLI.
"""

__version__ = "0.1.0"
