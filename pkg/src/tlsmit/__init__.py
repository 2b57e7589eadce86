"""Pauli-noise learning and error mitigation under drifting TLS defects."""

from __future__ import annotations

__version__ = "0.1.0"
