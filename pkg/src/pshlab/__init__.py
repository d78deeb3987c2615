"""Numerical checks of subharmonicity properties of weighted Bergman kernels,
Green potentials and Robin functions on families of domains.

Submodules: :mod:`~pshlab.expr` (expression language), :mod:`~pshlab.quadrature`
(grid domains and integration), :mod:`~pshlab.bergman` (kernels),
:mod:`~pshlab.fibration` (variation scans), :mod:`~pshlab.prekopa` (real
marginals), :mod:`~pshlab.lelong` (singularities and attenuation),
:mod:`~pshlab.potential` (Green and Robin functions) and :mod:`~pshlab.cli`.
"""

__version__ = "0.1.0"

from .bergman import LOG_FLOOR  # noqa: E402

__all__ = ["LOG_FLOOR", "__version__"]
