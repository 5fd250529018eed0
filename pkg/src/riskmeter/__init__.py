"""riskmeter: capital requirements with multiple eligible assets on finite
scenario spaces.

Core objects: acceptance sets with support-function machinery, eligible
spaces with positive pricing extensions, and the risk measure computed by
three independent routes (primal program, single-asset reduction, dual
representation), plus solvency-cone scalarizations, shortfall
superhedging, and infimal-convolution risk sharing.
"""

from .core import (LinearFunctional, Position, RiskValue, ScenarioSpace,
                   is_order_unit, is_strictly_positive_element, pair)
from .acceptance import (AcceptanceSet, ConeShifted, HalfSpace, MinkowskiSum,
                         NonConvexSetError, Polyhedral, PositiveCone,
                         Preimage, ShortfallSet, TVaRSet, VaRSet,
                         minkowski_sum, tail_value_at_risk, value_at_risk)
from .losses import ExponentialLoss, LinearCappedLoss, LossFunction, PowerLoss
from .market import (EligibleSpace, ExtensionPolytope, MarketError,
                     check_extension_exists, check_good_deal,
                     check_no_arbitrage, extension_polytope)
from .riskmeasure import (Diagnosis, DualOutcome, InvalidRegimeError,
                          RiskRegime, diagnose, properties_suite, risk_dual,
                          risk_primal, risk_reduced)
from .setvalued import (BidAskMatrix, DualPair, SolvencyCone,
                        consistent_pricing_systems, embed_multi_as_setvalued,
                        embedding_agrees, kt_augment, scalarize,
                        scalarized_dual, solvency_generators, solvency_member)
from .shortfall import (HedgedShortfallSet, OnePeriodMarket, conjugate,
                        shortfall_acceptance, shortfall_dual, shortfall_primal)
from .sharing import (BusinessLine, SharingProblem, infconv_direct,
                      infconv_dual, infconv_fold, infconv_via_sum)
from .solver import (LinearProgram, LPOutcome, bisect_feasibility,
                     cutting_plane_max, lp_solve, minimize_1d)

__version__ = "0.1.0"
