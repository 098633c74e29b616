"""Exception hierarchy shared by all modules."""


class EOTrackError(Exception):
    """Base class for errors raised by this package."""


class DomainError(EOTrackError, ValueError):
    """An input lies outside the domain of the operation (e.g. not SPD)."""


class ParameterError(EOTrackError, ValueError):
    """Distribution or model parameters violate their invariants."""


class UndefinedMomentError(EOTrackError, ValueError):
    """A requested moment does not exist for the given parameters."""


class NetworkError(EOTrackError):
    """Graph construction failed or the graph is not connected."""


class ConfigError(EOTrackError, ValueError):
    """Experiment configuration is invalid.

    ``path`` names the offending field, e.g. ``"scenario.rate"``.
    """

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
