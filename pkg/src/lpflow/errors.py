"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """A caller-supplied value violates a documented precondition."""


class ConvexityLost(ArithmeticError):
    """The matrix field ``b = nabla^2 u + u I`` is not positive definite."""

    def __init__(self, node: int, min_eig: float):
        super().__init__(
            f"b is not positive definite at node {node} (min eigenvalue {min_eig:.3e})"
        )
        self.node = node
        self.min_eig = min_eig


class DegenerateInput(ValueError):
    """Point set does not affinely span the ambient space."""


class IterationLimit(RuntimeError):
    """An iterative method hit its iteration cap before converging."""


class InvalidComplex(ValueError):
    """Simplicial complex is not closed under taking faces."""
