from __future__ import annotations

from dataclasses import dataclass, field

from .core import Clustering, DensityProfile


@dataclass
class DpcResult:
    profile: DensityProfile
    clustering: Clustering
    timings: dict
    stats: dict = field(default_factory=dict)

    def __iter__(self):
        # allows ``profile, clustering = run(...)``
        return iter((self.profile, self.clustering))
