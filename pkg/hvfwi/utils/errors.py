"""Exception hierarchy shared by the solvers, the codecs and the CLI.

The CLI maps these onto exit codes: ConfigError -> 2, NumericalError -> 3.
"""


class HVFWIError(Exception):
    pass


class ConfigError(HVFWIError, ValueError):
    """Invalid configuration, schema violation or malformed file header."""


class MismatchedGeometry(ConfigError):
    pass


class NumericalError(HVFWIError, ArithmeticError):
    pass


class MonotonicityLoss(NumericalError):
    """The discrete characteristic map stopped being strictly increasing."""


class DegenerateFlow(NumericalError):
    """The Jacobian integral along a characteristic collapsed to zero."""


class SingularSystem(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class ZeroMass(NumericalError):
    pass


class FactorizationFailure(NumericalError):
    pass


class LineSearchFailure(NumericalError):
    pass
