"""
Protocol Parameter Configuration

ProtocolConfig carries every scalar parameter of the OT stack:

    n                     rounds
    l                     output string length ℓ
    gamma                 storage fraction γ
    lambda                λ (uncertainty-relation slack)
    lambda_prime          λ′ (min-entropy splitting slack, ε′ = 2^{−λ′n})
    kappa                 κ (privacy-amplification slack)
    epsilon, epsilon_prime  smoothing budgets ε, ε′ used by the diagnostics
    tau                   estimation slack τ
    n_estimation          estimation rounds N
    domain_bits           m, the ENTCF domain size (stands in for η)
    r                     exponent of the reported bound (δ′−τ)^r
    threshold             abort threshold δ′−τ
    seed                  RNG seed
    override_probability  receiver override probability on CT=b rounds

JSON documents use these names as keys; ``lambda`` maps to ``lambda_``.

Author: DIOT Lab Development Team
"""

import json
import logging
import math
from dataclasses import dataclass, fields, asdict

from middleware.error_handlers import ConfigurationError
from utils.validators import validate_int_range, validate_probability

logger = logging.getLogger(__name__)

RELATION_STORAGE = "γn ≤ n/4 − 2ℓ − kn"
RELATION_SPLIT = "γn ≤ (1/4 − λ − 2λ′ − κ)n − 2ℓ − 1"

_KEY_ALIASES = {'lambda': 'lambda_'}


@dataclass(frozen=True)
class ProtocolConfig:
    """Resolved protocol parameters; every field is echoed into reports."""

    n: int = 64
    l: int = 4
    gamma: float = 0.0
    lambda_: float = 0.01
    lambda_prime: float = 0.01
    kappa: float = 0.01
    epsilon: float = 0.01
    epsilon_prime: float = 0.01
    tau: float = 0.05
    n_estimation: int = 2000
    domain_bits: int = 4
    r: float = 1.0
    threshold: float = 0.05
    seed: int = 0
    override_probability: float = 0.5
    require_security_relations: bool = False

    def __post_init__(self):
        validate_int_range(self.n, 'n', low=1)
        validate_int_range(self.l, 'l', low=1)
        validate_int_range(self.n_estimation, 'n_estimation', low=1)
        validate_int_range(self.domain_bits, 'domain_bits', low=2, high=10)
        validate_int_range(self.seed, 'seed', low=0)
        validate_probability(self.gamma, 'gamma')
        validate_probability(self.lambda_, 'lambda', open_low=True, open_high=True)
        validate_probability(self.lambda_prime, 'lambda_prime', open_low=True)
        validate_probability(self.kappa, 'kappa', open_low=True)
        validate_probability(self.epsilon, 'epsilon', open_high=True)
        validate_probability(self.epsilon_prime, 'epsilon_prime', open_low=True, open_high=True)
        validate_probability(self.tau, 'tau', open_low=True)
        validate_probability(self.threshold, 'threshold')
        validate_probability(self.override_probability, 'override_probability')
        if self.r <= 0:
            raise ConfigurationError(f"r must be positive, got {self.r}")
        if self.require_security_relations:
            self.check_relations(self.n)

    @classmethod
    def from_dict(cls, document):
        """
        Build a config from a JSON-style mapping.

        Args:
            document: dict keyed by parameter names

        Returns:
            ProtocolConfig
        """
        if not isinstance(document, dict):
            raise ConfigurationError("protocol section must be a JSON object")
        known = {f.name for f in fields(cls)}
        values = {}
        for key, value in document.items():
            name = _KEY_ALIASES.get(key, key)
            if name not in known:
                raise ConfigurationError(f"unknown protocol parameter '{key}'")
            values[name] = value
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigurationError(str(e)) from e

    @classmethod
    def from_json_file(cls, path):
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                document = json.load(handle)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"cannot read config {path}: {e}") from e
        return cls.from_dict(document.get('protocol', {}))

    def to_dict(self):
        document = asdict(self)
        document['lambda'] = document.pop('lambda_')
        return dict(sorted(document.items()))

    def replace(self, **changes):
        values = asdict(self)
        values.update({_KEY_ALIASES.get(k, k): v for k, v in changes.items()})
        return ProtocolConfig(**values)

    def relations(self, n_effective=None):
        """
        Evaluate the parameter relations for a given round count.

        Args:
            n_effective: Round count the relations are evaluated at (default n)

        Returns:
            dict with the largest admissible k, both relation flags, the
            reporting bound and the sender-security tail
        """
        n = self.n if n_effective is None else n_effective
        k_max = (n / 4.0 - 2 * self.l - self.gamma * n) / n
        split_rhs = (0.25 - self.lambda_ - 2 * self.lambda_prime - self.kappa) * n - 2 * self.l - 1
        eps_uncertainty = uncertainty_epsilon(self.lambda_, n)
        eps_split = 2.0 ** (-self.lambda_prime * n)
        return {
            'n': n,
            'storage_relation': RELATION_STORAGE,
            'storage_k_max': k_max,
            'storage_satisfied': k_max > 0,
            'split_relation': RELATION_SPLIT,
            'split_rhs': split_rhs,
            'split_satisfied': self.gamma * n <= split_rhs,
            'reporting_bound': self.threshold ** self.r if self.threshold > 0 else None,
            'uncertainty_epsilon': eps_uncertainty,
            'sender_security_tail': 0.5 * 2.0 ** (-self.kappa * n / 2.0) + 2 * eps_uncertainty + 4 * eps_split,
        }

    def check_relations(self, n_effective=None):
        """Raise ConfigurationError naming the first violated relation."""
        report = self.relations(n_effective)
        if not report['storage_satisfied']:
            raise ConfigurationError(
                f"parameter relation violated: {RELATION_STORAGE} "
                f"(n={report['n']}, ℓ={self.l}, γ={self.gamma}; largest k={report['storage_k_max']:.4f})")
        if not report['split_satisfied']:
            raise ConfigurationError(
                f"parameter relation violated: {RELATION_SPLIT} "
                f"(right side {report['split_rhs']:.4f} < γn={self.gamma * report['n']:.4f})")
        return report

    def log_relations(self, n_effective=None):
        report = self.relations(n_effective)
        status = 'satisfied' if report['storage_satisfied'] else 'violated'
        logger.info(f"{RELATION_STORAGE}: {status} at n={report['n']} (largest k={report['storage_k_max']:.4f})")
        return report


def uncertainty_epsilon(lam, n):
    """ε = exp(−λ²n / (32(2 − log λ)²)) with log base 2."""
    return math.exp(-lam * lam * n / (32.0 * (2.0 - math.log2(lam)) ** 2))
