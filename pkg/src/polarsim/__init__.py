"""polarsim: exact event-driven simulation of a stochastic cell-polarity
model, with an analytics harness that checks every closed-form prediction of
its infinite-population limit at desk scale."""

from .params import Params, Derived, validate_params, derive, hitting_time_bound
from .engine import (
    Association,
    Dissociation,
    EventCounts,
    HittingResult,
    MembraneState,
    Molecule,
    Recruitment,
    apply_event,
    draw_event,
    empty_state,
    simulate,
    simulate_counts,
    total_rate,
)
from .genealogy import (
    OccupancyStats,
    PolarityResult,
    SnapshotStats,
    SpreadAccumulator,
    accumulate_spread,
    clan_spectrum,
    distinct_clans,
    occupancy,
    polarity_check,
)
from .neutral import (
    GemSample,
    LookdownSample,
    gem_sample,
    ks_critical,
    ks_statistic,
    lookdown_many,
    lookdown_pair,
    pd_largest,
)
from .sphere import (
    HemisphereResult,
    advance,
    brownian_step,
    chord_sq,
    max_hemisphere,
    sample_uniform,
)
from .config import RunConfig, parse_config, load_config, config_hash

__version__ = "0.1.0"
