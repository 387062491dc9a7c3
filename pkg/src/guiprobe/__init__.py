"""Probe GUI agents for memorized versus reasoned behaviour.

The harness perturbs recorded screens and instructions, asks agents for the
next action under each perturbation, and measures how their accuracy and
click behaviour shift.
"""

from __future__ import annotations

__version__ = "0.1.0"
