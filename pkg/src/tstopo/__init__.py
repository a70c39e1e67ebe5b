"""Topology-aligned contrastive representation learning for time series."""

from .autograd import Tensor, concat, grad_check, logsumexp, maximum
from .estimator import TopoContrastiveEncoder
from .tda import (PersistenceDiagram, PersistencePair, PointCloud, TopoPointSet,
                  betti_at, build_rips_filtration, delay_embed,
                  diagram_for_instance, diagram_to_point_set,
                  pairwise_distances, persistent_betti, reduce_boundary)
from .training import RunConfig

__all__ = [
    "Tensor", "concat", "grad_check", "logsumexp", "maximum",
    "TopoContrastiveEncoder", "RunConfig",
    "PersistenceDiagram", "PersistencePair", "PointCloud", "TopoPointSet",
    "betti_at", "build_rips_filtration", "delay_embed", "diagram_for_instance",
    "diagram_to_point_set", "pairwise_distances", "persistent_betti",
    "reduce_boundary",
]

__version__ = "0.1.0"
