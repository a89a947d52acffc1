"""Exception types shared across the package."""


class ContractError(ValueError):
    """An input violates a documented precondition."""


class HypothesisError(ContractError):
    """A model does not satisfy a hypothesis an inequality or equivalence relies on."""


class EvaluationError(ValueError):
    """A payoff produced a non-finite value."""


class ConfigError(ValueError):
    """A configuration file or literal could not be parsed."""


class ResourceError(RuntimeError):
    """An exact computation would exceed its state budget.

    ``required`` is the number of states the computation needs (or a lower
    bound on it when enumeration was abandoned early); ``budget`` is the limit
    that was in force.
    """

    def __init__(self, message, required, budget):
        super().__init__(message)
        self.required = required
        self.budget = budget
