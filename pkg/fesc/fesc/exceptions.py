class FescException(Exception):
    ...


class GeometryError(FescException):
    ...


class DegenerateSimplex(GeometryError):
    """A simplex has zero volume where a full-dimensional one is required."""


class InpointError(GeometryError):
    """An inpoint does not lie in the open interior of its simplex."""


class SplitError(GeometryError):
    """A named split cannot be realized on the given mesh."""


class MeshFormatError(FescException):
    ...


class NotAdmissible(FescException):
    ...


class MultiValuedTrace(FescException):
    """The one-sided traces of a piecewise form disagree on a face."""


class NotConeShaped(FescException):
    """The carrier is not a cone with respect to the Poincaré center."""


class FESystemError(FescException):
    """A finite element system axiom fails."""


class NoExtension(FescException):
    ...


class UnisolvenceFailure(FescException):
    ...


class InconsistentMesh(FescException):
    """Neighboring cells induce different spaces on a shared face."""


class SolverFailure(FescException):
    ...


class ElementSpecError(FescException):
    ...


class VerificationFailed(FescException):
    ...
