"""Sim-to-real unsupervised domain adaptation for multi-modal gesture sequences.

Thin wrapper around the compiled `_kvda` extension: motion-direction
kinematic preprocessing, a synthetic two-domain benchmark generator, the
adversarial training pipeline and classification metrics.
"""

try:
    from ._kvda import *  # noqa: F401,F403
    from ._kvda import __version__  # noqa: F401
except ImportError:  # build-tree layout: extension next to the sources
    from _kvda import *  # noqa: F401,F403
    from _kvda import __version__  # noqa: F401
