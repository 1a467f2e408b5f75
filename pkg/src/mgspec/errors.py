"""Exception hierarchy.

Every exception carries a ``category`` (its class name) which the CLI
prints as the machine-readable failure reason.
"""


class MgspecError(Exception):
    @property
    def category(self):
        return type(self).__name__


# graph construction
class GraphError(MgspecError):
    pass


class NonPositiveLength(GraphError):
    pass


class DanglingIncidence(GraphError):
    pass


class IsolatedVertex(GraphError):
    pass


class Disconnected(GraphError):
    pass


class MissingEndpointOnFiniteEdge(GraphError):
    pass


class EndpointOnInfiniteEdge(GraphError):
    pass


class DuplicateId(GraphError):
    pass


class UnknownVertex(GraphError):
    pass


# vertex conditions
class ConditionError(MgspecError):
    pass


class InvalidCondition(ConditionError):
    """A (P, L) pair violates one of its algebraic invariants."""


class NonFiniteDegree(ConditionError):
    pass


class ZeroAlpha(ConditionError):
    pass


class RankDeficient(ConditionError):
    pass


class NonHermitianABstar(ConditionError):
    pass


class SingularConversion(ConditionError):
    pass


class DependentColumns(ConditionError):
    pass


class NotLagrangian(ConditionError):
    pass


class DecompositionMismatch(ConditionError):
    pass


# discretization
class DiscretizationError(MgspecError):
    pass


class MissingCondition(DiscretizationError):
    pass


class DimensionMismatch(DiscretizationError):
    pass


class MeshTooCoarse(DiscretizationError):
    pass


# spectral solver
class SolverBreakdown(MgspecError):
    pass


class KTooLarge(MgspecError):
    pass


# input files
class ParseError(MgspecError):
    pass


class SchemaError(MgspecError):
    pass
