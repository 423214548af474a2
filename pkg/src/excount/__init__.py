"""Counting statistics of quantum-jump trajectories for Markovian exciton transport."""

from .bath import BathSpec, gamma, load_bath, spectral_density
from .generator import (
    ClassicalTwoState,
    DegenerateGapError,
    JumpChannel,
    SelectorError,
    TiltedGenerator,
    build_tilted,
    classical_two_state,
    enumerate_channels,
    population_block,
    resolve_counted,
    tilted_generator,
)
from .lds import (
    CrossoverReport,
    RateFunctionPoint,
    ScanPoint,
    SpectralError,
    UndefinedMandelError,
    default_s_grid,
    find_crossover,
    mandel,
    rate_function,
    scan,
    scan_mandel_vs_parameter,
    theta,
    theta_derivatives,
)
from .model import (
    ExcitonBasis,
    ModelError,
    SiteModel,
    diagonalize,
    dominant_exciton,
    intensity_factor,
    load_model,
    preset,
    preset_names,
    site_hamiltonian,
)
from .trajectories import (
    CountStatistics,
    TrajectoryConfig,
    empirical_rate_function,
    simulate,
)

__version__ = "0.1.0"
