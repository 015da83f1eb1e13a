"""Privacy-constrained guessing: how well can ``Y`` be guessed from a filtered
release ``Z`` when guessing a correlated secret ``X`` must stay hard?

Submodules:

* :mod:`privguess.core`: joint pmfs, filters, guessing probabilities;
* :mod:`privguess.scalar`: closed forms for scalar sources;
* :mod:`privguess.vector`: i.i.d., Markov and parametric bit vectors;
* :mod:`privguess.oracle`: LP and search ground truth for small alphabets;
* :mod:`privguess.gaussian`: estimation privacy with Gaussian noise;
* :mod:`privguess.io` and :mod:`privguess.cli`: files and the command line.
"""

__version__ = "0.1.0"

from privguess.core import (  # noqa: E402
    Channel,
    JointPmf,
    LeakagePair,
    arimoto_infty,
    compose_filter,
    evaluate_filter,
    make_channel,
    pc_conditional,
    pc_marginal,
)
from privguess.errors import (  # noqa: E402
    CertificateError,
    DomainError,
    PrivGuessError,
    RegimeError,
    ValidationError,
)
from privguess.scalar import BinaryScalarModel, Regime, TradeoffCurve, TradeoffPoint, h_binary  # noqa: E402

__all__ = [
    "BinaryScalarModel",
    "CertificateError",
    "Channel",
    "DomainError",
    "JointPmf",
    "LeakagePair",
    "PrivGuessError",
    "Regime",
    "RegimeError",
    "TradeoffCurve",
    "TradeoffPoint",
    "ValidationError",
    "arimoto_infty",
    "compose_filter",
    "evaluate_filter",
    "h_binary",
    "make_channel",
    "pc_conditional",
    "pc_marginal",
]
