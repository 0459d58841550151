"""Exception types shared across the package."""


class ScatterlabError(Exception):
    """Base class for all library-specific failures."""


class ConfigError(ScatterlabError):
    """Invalid or inconsistent run configuration."""


class NonConvergenceError(ScatterlabError):
    """An iterative solver (two-point geodesic search, step control) stalled."""


class ConjugatePointError(ScatterlabError):
    """A Jacobi field vanished before the far endpoint, or the endpoint
    configuration is too close to the conjugate locus to trust uniqueness."""


class WorkingRegionError(ScatterlabError):
    """A point or trajectory left the declared chart working region."""


class HypothesisError(ScatterlabError):
    """A geometric hypothesis required by an inequality check fails
    (for example the diameter bound on positively curved surfaces)."""


class DomainShapeError(ScatterlabError):
    """The boundary curve is unusable: self-intersecting, or not
    star-shaped with respect to the requested quadrature center."""
