"""Incremental verification that publishes ever smaller safe scheduling prefixes.

Submodules: ``program`` (model and interpreter), ``trace`` and
``constraints`` (symbolic trace graphs), ``explore`` (class enumeration),
``verifier``, ``runtime`` (gated real-thread execution), ``bench`` and ``cli``.
"""

__version__ = "0.1.0"
