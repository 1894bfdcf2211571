"""Random Euclidean TSP over dense cities.

Instance generation on a tiling of city squares, spanning-cycle
constructions (strips, exact Held-Karp, cycle merging), pmf utilities for
binomial/Poisson comparisons, and seeded Monte Carlo studies.
"""

__version__ = "0.1.0"

from .errors import (
    CapabilityError,
    ConnectivityError,
    ContainmentError,
    DegenerateInputError,
    DenseTSPError,
    InapplicableError,
    InvariantViolation,
    ParameterError,
    PolicyError,
    PreconditionError,
    RegimeError,
)
from .geometry import (
    CityGrid,
    CitySelection,
    DensityField,
    Instance,
    build_city_grid,
    sample_binomial,
    sample_poisson,
    sample_unit_square,
    select_well_connected,
    snap_parameters,
)
from .probability import (
    PmfComparison,
    binomial_pmf,
    compare_binomial_poisson,
    depoissonization_check,
    multinomial_two_cell_pmf,
    paley_zygmund_bound,
    poisson_pmf,
)
from .rng import child_seed, stream
from .tours import (
    Tour,
    city_cycle_lower_bound,
    city_cycles,
    exact_tsp,
    insert_node,
    merge_cycles,
    nn_lower_bound,
    strips_tour,
    tour_length,
)
