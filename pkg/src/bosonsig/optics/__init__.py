"""Linear-optics core: unitary ensembles and exact output distributions."""
from .distributions import (
    BetaMixture,
    ConfigTable,
    DeltaMixture,
    Distinguishable,
    DistinguishabilityModel,
    Grouping,
    Indistinguishable,
    OutputDistribution,
    bosonic_distribution,
    configurations,
    convolve,
    distinguishable_distribution,
    distribution,
    grouping_distribution,
    mixture_distribution,
    occupation_key,
    parse_occupation_key,
    permanent,
    total_variation_distance,
)
from .unitaries import (
    COUPLER,
    check_unitary,
    default_layout,
    haar_random_unitary,
    mesh_unitary,
    structured_random_unitary,
    unitarity_error,
    validate_layout,
)

__all__ = [
    "BetaMixture",
    "COUPLER",
    "ConfigTable",
    "DeltaMixture",
    "Distinguishable",
    "DistinguishabilityModel",
    "Grouping",
    "Indistinguishable",
    "OutputDistribution",
    "bosonic_distribution",
    "check_unitary",
    "configurations",
    "convolve",
    "default_layout",
    "distinguishable_distribution",
    "distribution",
    "grouping_distribution",
    "haar_random_unitary",
    "mesh_unitary",
    "mixture_distribution",
    "occupation_key",
    "parse_occupation_key",
    "permanent",
    "structured_random_unitary",
    "total_variation_distance",
    "unitarity_error",
    "validate_layout",
]
