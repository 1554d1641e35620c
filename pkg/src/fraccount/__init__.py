"""Counting processes on inverse stable and tempered stable clocks.

Modules
-------
specialfn      gamma family and (multivariate) Mittag-Leffler functions
laplace        forward/inverse Laplace transforms, discrete Caputo operators
subordinators  stable and tempered stable subordinators and their inverses
processes      pmfs and pgfs of the (time-changed) counting processes
montecarlo     pathwise simulation and goodness-of-fit
risk           non-ruin probability of the associated surplus process
"""

from __future__ import annotations

__version__ = "0.1.0"

from .specialfn import (
    ConvergenceWarning,
    MLSpec,
    SeriesControl,
    gamma_fn,
    ml,
    mittag_leffler,
    multivariate_ml,
    pochhammer,
    upper_incomplete_gamma,
)
from .laplace import caputo_l1, forward_laplace, invert_laplace, tempered_caputo
from .subordinators import (
    CompositeSubordinator,
    HorizonTooShort,
    SubordinatorSpec,
    general_stable,
    stable_pair,
    tempered_pair,
)
from .processes import (
    FactoredPolynomial,
    GcpParams,
    PmfTable,
    RegimeError,
    TimeChangeParams,
    factor_rate_polynomial,
    frac_gcp_pmf,
    frac_poisson_pmf,
    gcp_pmf,
    general_tc_pmf,
    pgf,
    pmf_table,
    tc_gcp_pmf,
    tc_pmf_via_inversion,
    tc_poisson_pmf,
    tempered_tc_pmf,
)
from .montecarlo import EmpiricalPmf, McConfig, compare_pmf, simulate_tc_gcp
from .risk import RiskModel, phi0, phi_curve, safety_loading, simulate_ruin
