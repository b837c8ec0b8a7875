"""Integer pair (p, q) approximating a target balance from below.

Fairlet-based tools take the balance as a ratio of two small integers. The
search below walks denominators 1..1000 and keeps the best ratio not
exceeding the target, preferring the smallest denominator on ties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import ConfigurationError
from .metrics import as_fraction

MAX_DENOMINATOR = 1000


@dataclass(frozen=True)
class FairletIntegers:
    p: int
    q: int
    achieved: Fraction

    @property
    def reduced(self) -> tuple[int, int]:
        return self.achieved.numerator, self.achieved.denominator


def get_fairlet_integers(target, max_denominator: int = MAX_DENOMINATOR) -> FairletIntegers:
    """Largest p/q <= target with q <= ``max_denominator``.

    >>> get_fairlet_integers(0.9)
    FairletIntegers(p=9, q=10, achieved=Fraction(9, 10))
    """
    t = as_fraction(target)
    if not 0 <= t <= 1:
        raise ConfigurationError(f"target must lie in [0, 1], got {target}")
    best_p, best_q, best = 0, 1, Fraction(-1)
    for q in range(1, max_denominator + 1):
        p = math.floor(q * t)
        r = Fraction(p, q)
        if r > best:
            best_p, best_q, best = p, q, r
    return FairletIntegers(best_p, best_q, best)
