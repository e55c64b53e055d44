"""Charging protocols for finite-dimensional quantum batteries.

Subpackages cover the energy-level structure (`spectrum`), thermal states
and energy statistics (`states`), recorded unitary traces with TPM work
statistics (`trace`), the optimal-precision and near-optimal-fluctuation
charging protocols (`precision`, `fluctuation`), local charging baselines
(`local`), brute-force reference optimizers (`oracle`), and the sweep /
comparison command line (`cli`).
"""

from .errors import (
    InternalError,
    ProtocolStuckError,
    QBattError,
    RangeError,
    SizeError,
    ValidationError,
)
from .fluctuation import charge_min_fluct
from .local import optimal_local_search, slcp_charge
from .oracle import OracleConfig, brute_min_asd, oracle_min_fluct, oracle_min_variance
from .precision import charge_min_variance
from .report import CSV_HEADER, ChargeReport
from .spectrum import Spectrum, build_spectrum, flatten, unflatten
from .states import (
    Distribution,
    asd,
    charge_range,
    mean_energy,
    pure_state_variance_bound,
    thermal_distribution,
    variance,
)

__all__ = [
    "CSV_HEADER",
    "ChargeReport",
    "Distribution",
    "InternalError",
    "OracleConfig",
    "ProtocolStuckError",
    "QBattError",
    "RangeError",
    "SizeError",
    "Spectrum",
    "ValidationError",
    "asd",
    "brute_min_asd",
    "build_spectrum",
    "charge_min_fluct",
    "charge_min_variance",
    "charge_range",
    "flatten",
    "mean_energy",
    "optimal_local_search",
    "oracle_min_fluct",
    "oracle_min_variance",
    "pure_state_variance_bound",
    "slcp_charge",
    "thermal_distribution",
    "unflatten",
    "variance",
]
