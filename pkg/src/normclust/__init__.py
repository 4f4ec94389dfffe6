"""normclust: FPT-time approximation algorithms for minimum-norm k-clustering.

The package bundles

* a metric/instance layer with exact rational distances (:mod:`normclust.metric`),
* monotone symmetric norms and the occurrence-vector calculus
  (:mod:`normclust.norms`, :mod:`normclust.occurrence`),
* an exact brute-force oracle (:mod:`normclust.oracle`),
* the LP seed / pseudo-approximation (:mod:`normclust.lp_seed`),
* the capacitated (3+eps) algorithm (:mod:`normclust.mnckc`),
* the top-cn algorithm (:mod:`normclust.topcn`) and its bi-criteria variant
  (:mod:`normclust.bicriteria`),
* the fixed-open-set assignment finder (:mod:`normclust.find_assignment`),
* a CLI and experiment harness (:mod:`normclust.cli`, :mod:`normclust.harness`).
"""

from normclust.metric import INF, Instance, MetricSpace, generate_instance
from normclust.norms import NormSpec, eval_norm
from normclust.solution import Solution

__all__ = [
    "INF",
    "Instance",
    "MetricSpace",
    "NormSpec",
    "Solution",
    "eval_norm",
    "generate_instance",
]

__version__ = "0.1.0"
