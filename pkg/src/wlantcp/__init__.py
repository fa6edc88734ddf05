"""TCP long-file download throughput through a multirate 802.11 AP with round-trip delay."""
from .attempt import attempt_curve, attempt_probability
from .bcmp import build_network, solve_mva, solve_mva_approx, solve_product_form, visit_ratios
from .chain import (ap_throughput, check_detailed_balance, mean_sojourn, slot_event_probs,
                    sta_throughput, stationary_pi, wlan_throughputs)
from .errors import InvalidParameterError, LatticeBudgetError, NumericalFailureError
from .params import PhyMacParams, RateClassConfig, event_durations, frame_duration
from .sim import SimConfig, run, run_batch

__version__ = "0.1.0"
