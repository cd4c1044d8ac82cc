"""Supersaturated screening designs ranked by lasso sign-recovery probability.

Library layout:

* :mod:`ssdlasso.mvn` -- multivariate normal box probabilities (QMC engine).
* :mod:`ssdlasso.design` -- +-1 designs, standardization, heuristic criteria.
* :mod:`ssdlasso.recovery` -- sign-recovery criteria and lambda summaries.
* :mod:`ssdlasso.symmetric` -- completely symmetric (single-c) theory.
* :mod:`ssdlasso.construct` -- exchanges, block construction, NBIBD, HILS.
* :mod:`ssdlasso.lasso` -- coordinate-descent solver and simulation oracle.
* :mod:`ssdlasso.cli` -- reproducible command-line runs.
"""

from .design import (
    Design,
    HeuristicSummary,
    StandardizedDesign,
    heuristics,
    load_design_csv,
    random_design,
    save_design_csv,
    standardize,
    submatrix_views,
    ue2_efficiency,
)
from .mvn import (
    GaussianRegion,
    ProbabilityEstimate,
    QmcConfig,
    box_probability,
    factorize_psd,
    norm_cdf,
    norm_pdf,
)
from .recovery import (
    CriterionValue,
    Phi_Lambda,
    Phi_lambda,
    Phi_max,
    Scenario,
    SignVectorSet,
    SupportSet,
    criterion_curve,
    phi_Lambda,
    phi_lambda,
    phi_lambda_pm,
    phi_max,
    prob_I,
    prob_S,
    support_recovery_prob,
)
from .symmetric import (
    ConditionReport,
    SymScenario,
    contour_grid,
    derivative_check,
    lemma3_boundary,
    lemma3_condition,
    optimize_c,
    psi_Lambda,
    psi_lambda,
    psi_lambda_pm,
    psi_max,
    sym_prob_I,
    sym_prob_S,
    theorem3_condition,
    theorem3_regions,
)
from .construct import (
    ExchangeConfig,
    HilsConfig,
    HilsReport,
    block_construction,
    exchange_ue2,
    exchange_vars_plus,
    hils,
    nbibd_supports,
    proposition1_pad,
    sbound_constant,
    xi_values,
)
from .lasso import (
    LassoFit,
    SimConfig,
    SimulationResult,
    kkt_check,
    lasso_solve,
    simulate_sign_recovery,
)

__version__ = "0.1.0"
