"""Numerical machinery for derivative towers, stabilizer chains, adapted
connections, homogeneity criteria, and connection metrics on trivialized
principal bundles."""

from __future__ import annotations

__version__ = "0.1.0"
