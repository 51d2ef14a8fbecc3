"""Network coding to index coding reductions, code transfer in both directions,
and exact feasibility checks by exhaustive enumeration."""

from .codes import (
    BudgetExceeded,
    CodeError,
    IndexCode,
    NetworkCode,
    TruthTable,
    check_feasible,
    eval_global,
    index_satisfied,
    index_success_probability,
    network_satisfied,
    network_success_probability,
)
from .model import (
    IndexInstance,
    InstanceError,
    MessageSpace,
    NetworkInstance,
    ValidationReport,
    in_set,
    topological_order,
    validate_index,
    validate_network,
)
from .oracle import SearchBudget, min_broadcast_bits, search_index_code, search_network_code
from .reduction import ReductionMap, reduce_instance, reduce_rates
from .transform import (
    check_claim1,
    collocated_two_phase_check,
    find_cover,
    good_sets,
    index_to_network_code,
    network_to_index_code,
    select_sigma,
    transfer_report,
)

__version__ = "0.1.0"
