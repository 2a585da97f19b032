"""Deterministic trace-driven simulator of a CDN cluster serving
push-recommended short videos: synthetic Pareto workloads, a lookahead-aware
cache engine with classical baselines, online manifest reordering, and the
metrics needed to compare them."""

from .catalog import (
    Catalog,
    CatalogConfig,
    EmulatedUser,
    ManifestFile,
    ParticipantHistory,
    VideoRecord,
    Workload,
    build_manifests,
    build_workload,
    generate_catalog,
    generate_participants,
    generate_users,
    pareto_pdf,
    sample_video,
)
from .cluster import (
    ClusterConfig,
    RequestEvent,
    SimulationResult,
    compulsory_floor,
    run_simulation,
    shard,
)
from .errors import (
    CacheError,
    ConfigError,
    InvariantViolation,
    MetricsError,
    WorkloadError,
)
from .metrics import (
    OverlapStats,
    ParetoFit,
    RunReport,
    expected_overlap_study,
    overlap_stats,
    pareto_fit,
    summarize,
)
from .policies import (
    POLICY_NAMES,
    AccessOutcome,
    CacheConfig,
    FurthestInFutureCache,
    LookaheadFrequencyCache,
    create_cache,
)
from .reorder import ReorderDecision, displacement_histogram, reorder_manifest

__version__ = "0.1.0"
