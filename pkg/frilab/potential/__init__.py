"""Green's function, capacities and equilibrium measures."""

from .dirichlet import DirichletSolution, green_constant, solve_ball
from .estimators import (
    EpsilonEstimate,
    EquilibriumMeasure,
    Estimate,
    GreenTable,
    capacity,
    equilibrium_measure,
    estimate_epsilon,
    green,
    green_table,
    hitting_probability,
    kappa_rho,
    normalized_equilibrium,
    phi_from_measures,
    phi_rho,
    rho_capacity,
    rho_capacity_upper_bound,
    rho_equilibrium,
    truncated_capacity,
)
from .walks import escape_indicators, escape_probabilities, first_entry_times, visit_counts

__all__ = [
    'DirichletSolution', 'green_constant', 'solve_ball',
    'EpsilonEstimate', 'EquilibriumMeasure', 'Estimate', 'GreenTable',
    'capacity', 'equilibrium_measure', 'estimate_epsilon', 'green', 'green_table',
    'hitting_probability', 'kappa_rho', 'normalized_equilibrium', 'phi_from_measures', 'phi_rho',
    'rho_capacity', 'rho_capacity_upper_bound', 'rho_equilibrium', 'truncated_capacity',
    'escape_indicators', 'escape_probabilities', 'first_entry_times', 'visit_counts',
]
