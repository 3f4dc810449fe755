"""Lattice engine for nonlocal perimeters, nonlocal mean curvatures and calibrations.

Set ``NLCALIB_PURE_NUMPY=1`` before import to bypass numba.
"""

__version__ = "0.1.0"

from ._accel import backend_name
from .calibration import (
    FAIL,
    ONE_SIDED_INSIDE,
    ONE_SIDED_OUTSIDE,
    TWO_SIDED,
    Calibration,
    FoliationCertificate,
    VerificationError,
    assemble_ordered_foliation,
    calibration_curvform,
    calibration_pairform,
    certify,
    check_uniqueness_hypotheses,
    one_sided_deficit,
    ordered_identity,
)
from .errors import (
    BudgetExceededError,
    ConfigError,
    ExteriorFrozenError,
    FoliationMismatchError,
    KernelDomainError,
    NlcalibError,
    PreconditionError,
    SeparationError,
)
from .functionals import (
    PrincipalValueResult,
    interaction,
    nmc_level,
    nmc_level_many,
    nmc_principal_value,
    nmc_set,
    nmc_set_many,
    perimeter,
    perimeter_pairform,
)
from .kernels import (
    CompactSupport,
    CustomRadial,
    Exponential,
    FractionalPower,
    Kernel,
    evaluate,
    evaluate_truncated,
    kernel_from_dict,
    tail_integral,
)
from .lattice import (
    CELL_AVERAGED,
    MIDPOINT,
    IndicatorField,
    Lattice,
    LevelField,
    WeightTable,
    build_weights,
    freeze_exterior,
    sign_diff,
)
from .oracle import (
    EnumerationResult,
    all_energies,
    enumerate_minimizers,
    single_flip_stationarity,
    verify_certificate_against_oracle,
)
