"""Exception hierarchy.

Every error carries a ``category`` string used by the command line front end to
pick an exit code and to tag machine-readable failure reports.
"""


class HartreeIopError(Exception):
    category = "solver"


class ConfigError(HartreeIopError):
    category = "config"


class ConfigParse(ConfigError):
    pass


class InvalidGrid(ConfigError):
    pass


class InvalidMu(InvalidGrid):
    pass


class FloorViolated(ConfigError):
    pass


class ConfinementSuspect(ConfigError):
    pass


class GridMismatch(HartreeIopError):
    category = "grid"


class NoConvergence(HartreeIopError):
    def __init__(self, message, max_iters=None):
        super().__init__(message)
        self.max_iters = max_iters


class EigensolveFailed(HartreeIopError):
    pass


class ZeroVector(HartreeIopError):
    category = "input"


class Infeasible(HartreeIopError):
    category = "infeasible"


class LambdaBelowThreshold(Infeasible):
    def __init__(self, lam, lambda1):
        super().__init__(
            f"lambda = {lam!r} does not exceed the threshold lambda1(rho_bar) = {lambda1!r}"
        )
        self.lam = lam
        self.lambda1 = lambda1


class KappaNonpositive(Infeasible):
    pass


class LineSearchFailed(HartreeIopError):
    pass


class MaxIters(HartreeIopError):
    pass


class ScfStagnation(HartreeIopError):
    pass


class BracketFailure(HartreeIopError):
    pass


class NegativeDiagonal(HartreeIopError):
    pass
