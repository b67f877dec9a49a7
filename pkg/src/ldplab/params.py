"""Protocol definitions and privacy-parameter derivation.

Implements the four categorical frequency oracles used throughout:

* GRR   -- generalized randomized response over the raw item domain
* OUE   -- optimized unary encoding (bit vectors)
* OLH   -- local hashing into a domain of size g = floor(e^eps + 1)
* HST   -- explicit histogram with public +/-1 vectors

OLH and HST come in a user setting (client picks the hash / vector) and a
server setting (server assigns it per user).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

__all__ = ["Protocol", "ProtocolParams", "derive_params"]


class Protocol(str, enum.Enum):
    GRR = "GRR"
    OUE = "OUE"
    OLH_USER = "OLH-User"
    OLH_SERVER = "OLH-Server"
    HST_USER = "HST-User"
    HST_SERVER = "HST-Server"

    @property
    def family(self) -> str:
        """Base oracle name without the user/server qualifier."""
        return self.value.split("-")[0]

    @property
    def server_assigned(self) -> bool:
        return self.value.endswith("Server")

    @classmethod
    def parse(cls, name: str) -> "Protocol":
        for proto in cls:
            if proto.value.lower() == name.lower():
                return proto
        raise ValueError(f"unknown protocol {name!r}")


@dataclass(frozen=True)
class ProtocolParams:
    """Derived perturbation constants for one (protocol, epsilon, d, n).

    p and q are the keep/flip probabilities of the perturbation. For OLH
    they act on the hashed domain of size g; estimation uses the support
    probability pair (p, 1/g). hst_coeff is the magnitude of an HST
    report, (e^eps + 1) / (e^eps - 1).
    """

    protocol: Protocol
    epsilon: float
    d: int
    n: int
    p: float
    q: float
    g: int | None = None
    hst_coeff: float | None = None

    @property
    def support_q(self) -> float:
        """Probability that a report supports a fixed non-held item."""
        if self.protocol.family == "OLH":
            return 1.0 / self.g
        if self.protocol.family == "HST":
            return 0.5
        return self.q

    @property
    def support_p(self) -> float:
        """Probability that a report supports the holder's item."""
        if self.protocol.family == "HST":
            return 0.5
        return self.p

    @property
    def support_mean(self) -> float:
        """Expected support-set size of a genuine report."""
        if self.protocol == Protocol.GRR:
            return 1.0
        return self.support_p + (self.d - 1) * self.support_q

    @property
    def est_denominator(self) -> float:
        """p* - q* used by the frequency estimator (e.g. p - 1/g for OLH)."""
        return self.support_p - self.support_q

    def sigma0(self) -> float:
        """Std of the de-biased count of a zero-frequency item.

        For GRR/OUE/OLH this is sqrt(n q*(1-q*)) / (p* - q*) on the support
        probabilities. HST's estimator is a signed average, whose count
        variance at f=0 is n * hst_coeff^2.
        """
        if self.protocol.family == "HST":
            return self.hst_coeff * math.sqrt(self.n)
        qs = self.support_q
        return math.sqrt(self.n * qs * (1.0 - qs)) / self.est_denominator

    def count_variance(self, f: float) -> float:
        """Variance of the de-biased count of an item with true frequency f."""
        if self.protocol.family == "HST":
            # per-user term y*s[v] has second moment hst_coeff^2 and mean f-linked
            return self.n * max(self.hst_coeff**2 - f * f, 0.0)
        ps, qs = self.support_p, self.support_q
        var_support = self.n * (f * ps * (1 - ps) + (1 - f) * qs * (1 - qs))
        return var_support / self.est_denominator**2


def derive_params(protocol: Protocol | str, epsilon: float, d: int, n: int) -> ProtocolParams:
    """Compute p, q and protocol-specific constants from the privacy budget.

    Raises ValueError for epsilon <= 0 or d < 2.
    """
    if isinstance(protocol, str):
        protocol = Protocol.parse(protocol)
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise ValueError(f"epsilon must be positive and finite, got {epsilon}")
    if d < 2:
        raise ValueError(f"domain size d must be >= 2, got {d}")
    if n < 1:
        raise ValueError(f"user count n must be >= 1, got {n}")

    ee = math.exp(epsilon)
    family = protocol.family
    if family == "GRR":
        p = ee / (ee + d - 1)
        q = 1.0 / (ee + d - 1)
        return ProtocolParams(protocol, epsilon, d, n, p, q)
    if family == "OUE":
        p = 0.5
        q = 1.0 / (ee + 1.0)
        return ProtocolParams(protocol, epsilon, d, n, p, q)
    if family == "OLH":
        g = int(math.floor(ee + 1.0))
        if g < 2:
            g = 2
        p = ee / (ee + g - 1)
        q = 1.0 / (ee + g - 1)
        return ProtocolParams(protocol, epsilon, d, n, p, q, g=g)
    if family == "HST":
        p = ee / (ee + 1.0)
        q = 1.0 / (ee + 1.0)
        coeff = (ee + 1.0) / (ee - 1.0)
        return ProtocolParams(protocol, epsilon, d, n, p, q, hst_coeff=coeff)
    raise ValueError(f"unhandled protocol {protocol}")
