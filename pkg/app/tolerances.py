from dataclasses import asdict, dataclass, fields, replace
from typing import Dict, Mapping

from app.env import (
    BND_TOL,
    BOUND_SLACK,
    DERIV_XCHECK_TOL,
    HERMITICITY_TOL,
    PROJ_TOL,
    RANK_TOL,
    TRANSPORT_TOL,
    UNIT_TOL,
)
from app.errors import InputError


@dataclass(frozen=True)
class Tolerances:
    hermiticity: float = HERMITICITY_TOL
    proj: float = PROJ_TOL
    bnd: float = BND_TOL
    rank: float = RANK_TOL
    deriv_xcheck: float = DERIV_XCHECK_TOL
    unit: float = UNIT_TOL
    transport: float = TRANSPORT_TOL
    bound_slack: float = BOUND_SLACK

    @property
    def path(self) -> float:
        return 10.0 * self.transport

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)

    def override(self, values: Mapping[str, float]) -> "Tolerances":
        known = {f.name for f in fields(self)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise InputError(f"Unknown tolerance names: {', '.join(unknown)}")
        return replace(self, **{k: float(v) for k, v in values.items()})

    def tightened(self, factor: float = 1e-3) -> "Tolerances":
        return replace(
            self,
            bnd=self.bnd * factor,
            rank=self.rank * factor,
            proj=self.proj * factor,
        )


DEFAULT_TOLERANCES = Tolerances()
