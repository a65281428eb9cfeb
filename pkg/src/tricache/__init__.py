"""Three-server coded caching: MN placement, effective-pair delivery, and
exact rate analysis at desk scale."""

from .system import (
    Demand,
    GF2Combination,
    PacketId,
    SystemConfig,
    build_config,
    place_caches,
    random_demand,
    worst_demand,
)
from .mn import Broadcast, mn_delivery, mn_rate, user_can_decode, verify_full_recovery
from .pairing import (
    Depth,
    Layer,
    PairGraph,
    build_graphs,
    build_layers,
    count_unpaired,
    is_effective_pair,
    max_matching,
    partition_classes,
    vertex_degree,
)
from .delivery import (
    DeliveryPlan,
    RateReport,
    assemble_plan,
    build_plan,
    measure_rate,
    verify_plan,
)
from . import analysis

__version__ = "0.1.0"

__all__ = [
    "Broadcast",
    "DeliveryPlan",
    "Demand",
    "Depth",
    "GF2Combination",
    "Layer",
    "PacketId",
    "PairGraph",
    "RateReport",
    "SystemConfig",
    "analysis",
    "assemble_plan",
    "build_config",
    "build_graphs",
    "build_layers",
    "build_plan",
    "count_unpaired",
    "is_effective_pair",
    "max_matching",
    "measure_rate",
    "mn_delivery",
    "mn_rate",
    "partition_classes",
    "place_caches",
    "random_demand",
    "user_can_decode",
    "verify_full_recovery",
    "verify_plan",
    "vertex_degree",
    "worst_demand",
]
