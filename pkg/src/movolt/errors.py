"""Exception types shared across the package.

ValueError marks usage problems (bad arguments, malformed files) and maps
to CLI exit code 1; NumericalError marks failures of the numerics
themselves (quadrature mass loss, solver singularities, divergence) and
maps to exit code 2.
"""


class NumericalError(RuntimeError):
    pass
