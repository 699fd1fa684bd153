"""Exception types used across the package."""


class StadiumlabError(Exception):
    """Base class for all package errors."""


class GeometryError(StadiumlabError):
    """Invalid domain description (bad parameter, open boundary, ...)."""


class BoundaryPointError(GeometryError):
    """A point that was required to lie on the boundary does not."""


class GridResolutionError(StadiumlabError):
    """Grid spacing too coarse for the requested domain or mode."""


class UnsupportedBCError(StadiumlabError):
    """Boundary condition not supported by the requested discretization."""


class CertificationError(StadiumlabError):
    """A spectral completeness certificate could not be established."""


class CutoffSupportError(StadiumlabError):
    """A position-space cutoff leaks outside the open rectangle."""


class ConfigError(StadiumlabError):
    """Aggregated run-configuration validation failure.

    ``problems`` lists every violation found, so a bad config fails once
    with the full picture instead of one field at a time.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
