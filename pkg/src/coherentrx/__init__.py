"""Adaptive photon-counting receivers for coherent-state discrimination.

The package designs, optimizes and evaluates adaptive displacement /
photon-counting receivers that discriminate weak coherent-state codewords:

* :mod:`coherentrx.constellation` -- codeword alphabets and priors;
* :mod:`coherentrx.photonics` -- single-round displacement physics and noise;
* :mod:`coherentrx.tree` -- decision trees, decision tables, receiver files;
* :mod:`coherentrx.simulator` -- exact and Monte Carlo receiver evaluation;
* :mod:`coherentrx.formulator` -- the adaptive learning loop;
* :mod:`coherentrx.baselines` -- Helstrom/SQL bounds, Kennedy, CN, Dolinar;
* :mod:`coherentrx.metrics` -- posterior evolution, prefix KL, bits/photon;
* :mod:`coherentrx.cli` -- batch command-line front end.
"""

__version__ = "0.1.0"

from . import baselines, constellation, formulator, metrics, photonics, simulator, tree

__all__ = [
    "__version__",
    "baselines",
    "constellation",
    "formulator",
    "metrics",
    "photonics",
    "simulator",
    "tree",
]
