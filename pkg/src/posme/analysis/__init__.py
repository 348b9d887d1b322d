"""Security-bound evaluators, mixing statistics and adversary simulations."""

from .bounds import (
    CascadeRow,
    CascadeTable,
    StrengthenedRow,
    cascade_monte_carlo,
    cascade_samples,
    cascade_table,
    cascade_w,
    chernoff_tail,
    regime,
    st_product,
    st_product_strengthened,
    staleness_w,
    tmto_bound,
    tmto_penalty,
)
from .mixing import MixingReport, mixing_stats, report_from_counts, tally_run, vertex_counts
from .simulate import (
    POLICIES,
    AdaptiveReport,
    TmtoReport,
    adaptive_simulate,
    staleness_profile,
    tmto_simulate,
    two_proportion_z,
    writes_before,
)
from .tables import format_cascade_table, format_mixing, format_strengthened_table, format_tmto, to_jsonable

__all__ = [name for name in dir() if not name.startswith("_")]
