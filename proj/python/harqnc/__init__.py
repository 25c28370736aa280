"""Python bindings for the harqnc simulator."""

from ._harqnc import (
    NumericalError,
    ParseError,
    ProtocolError,
    Scenario,
    ValidationError,
    __version__,
    analytic_perfect_channel_loss,
    covariances,
    dp_grid,
    gains,
    load_scenario,
    monte_carlo,
    scenario_from_json,
    simulate,
    validate,
)

__all__ = [
    "NumericalError",
    "ParseError",
    "ProtocolError",
    "Scenario",
    "ValidationError",
    "__version__",
    "analytic_perfect_channel_loss",
    "covariances",
    "dp_grid",
    "gains",
    "load_scenario",
    "monte_carlo",
    "scenario_from_json",
    "simulate",
    "validate",
]
