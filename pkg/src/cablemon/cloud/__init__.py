"""Cloud analytics: event ingestion, circuit KPIs, load recommendations and the query API."""

from .api import Api, ApiServer, http_api
from .kpi import (
    ConditionSample,
    KpiConfig,
    KpiSnapshot,
    Recommendation,
    RecommendationKind,
    compute_health_index,
    compute_load_factor,
    compute_thermal_margin,
    estimate_failure_probability,
    estimate_rul,
    kpi_snapshot,
    recommend_load_action,
)
from .service import CloudService, StoredEvent, ingest_events

__all__ = [
    "Api",
    "ApiServer",
    "CloudService",
    "ConditionSample",
    "KpiConfig",
    "KpiSnapshot",
    "Recommendation",
    "RecommendationKind",
    "StoredEvent",
    "compute_health_index",
    "compute_load_factor",
    "compute_thermal_margin",
    "estimate_failure_probability",
    "estimate_rul",
    "http_api",
    "ingest_events",
    "kpi_snapshot",
    "recommend_load_action",
]
