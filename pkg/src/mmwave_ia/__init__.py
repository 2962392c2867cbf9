"""Monte Carlo simulator for directional initial access in mmWave cells."""

from .arrays import ArrayGeometry, BeamWeights, Codebook, LinkBudget, bf_gain_db, make_codebook, snr_db, steering_vector
from .channel import ChannelParams, Cluster, LinkRealization, PathlossState, Subpath, realize_link
from .config import ConfigError, RunConfig, default_run_config, load_config, parse_config, serialize_config
from .protocols import (
    BsTableEntry,
    ScanOutcome,
    SchemeConfig,
    SearchKind,
    assign_rnti,
    paper_schemes,
    run_exhaustive,
    run_iterative,
    slots_required,
)
from .sim import (
    DelayReport,
    DistanceBin,
    PmdEstimate,
    SimParams,
    deploy_ue,
    discovery_delay,
    equivalent_threshold,
    min_tsig_for_pmd,
    pmd_sweep,
    total_delay,
)

__version__ = "0.1.0"
