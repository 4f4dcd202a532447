"""
Binomial estimates with confidence intervals for experiment reports.
"""

import math
from dataclasses import dataclass

from scipy import stats


@dataclass(frozen=True)
class Estimate:
    """Point estimate of a success probability with its binomial error bar."""

    successes: int
    trials: int
    z: float = 3.0

    @property
    def rate(self):
        return self.successes / self.trials if self.trials else 0.0

    @property
    def sigma(self):
        if not self.trials:
            return 0.0
        p = self.rate
        return math.sqrt(p * (1.0 - p) / self.trials)

    def sigma_at(self, p):
        """Binomial standard deviation of the rate under a hypothesised p."""
        return math.sqrt(p * (1.0 - p) / self.trials) if self.trials else 0.0

    def confidence_level(self):
        """Two-sided coverage of ±z standard deviations."""
        return float(2.0 * stats.norm.cdf(self.z) - 1.0)

    def wilson_interval(self):
        """Wilson score interval at ``z`` standard deviations."""
        if not self.trials:
            return (0.0, 1.0)
        ci = stats.binomtest(self.successes, self.trials).proportion_ci(
            confidence_level=self.confidence_level(), method='wilson')
        return (float(ci.low), float(ci.high))

    def consistent_with(self, p):
        """True when |rate − p| ≤ z·σ(p)."""
        return abs(self.rate - p) <= self.z * self.sigma_at(p) + 1e-12

    def to_dict(self):
        low, high = self.wilson_interval()
        return {
            'successes': self.successes,
            'trials': self.trials,
            'rate': self.rate,
            'sigma': self.sigma,
            'z': self.z,
            'interval': [low, high],
        }


def chernoff_confidence(tau, n_estimation):
    """1 − 2·exp(−τ²N/3)."""
    return 1.0 - 2.0 * math.exp(-tau * tau * n_estimation / 3.0)
