"""Binomial and Poisson mass functions and the binomial-vs-Poisson comparisons.

The pmfs use Loader's saddle-point decomposition (Stirling remainder plus a
deviance term) so that they stay accurate to a few ulps for counts in the
millions, where differences of log-gamma values would lose ~7 digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError

_LN_2PI = math.log(2.0 * math.pi)
_S0, _S1, _S2, _S3, _S4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188


def _stirlerr_small(k: int) -> float:
    return math.lgamma(k + 1.0) - (k + 0.5) * math.log(k) + k - 0.5 * _LN_2PI


_STIRLERR_TABLE = [0.0] + [_stirlerr_small(k) for k in range(1, 16)]


def stirlerr(n: int) -> float:
    """``log(n!) - log(sqrt(2 pi n) (n/e)^n)`` for integer ``n >= 0``."""
    if n <= 15:
        return _STIRLERR_TABLE[n]
    nn = float(n) * n
    if n > 500:
        return (_S0 - _S1 / nn) / n
    if n > 80:
        return (_S0 - (_S1 - _S2 / nn) / nn) / n
    if n > 35:
        return (_S0 - (_S1 - (_S2 - _S3 / nn) / nn) / nn) / n
    return (_S0 - (_S1 - (_S2 - (_S3 - _S4 / nn) / nn) / nn) / nn) / n


def bd0(x: float, mu: float) -> float:
    """Deviance term ``x log(x/mu) + mu - x``, evaluated without cancellation."""
    if abs(x - mu) < 0.1 * (x + mu):
        v = (x - mu) / (x + mu)
        s = (x - mu) * v
        ej = 2.0 * x * v
        v2 = v * v
        j = 1
        while True:
            ej *= v2
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
            j += 1
    return x * math.log(x / mu) + mu - x


def _check_int(name, v):
    if int(v) != v:
        raise ParameterError(f"{name} must be an integer, got {v}")
    return int(v)


def binomial_logpmf(k: int, n: int, p: float) -> float:
    k, n = _check_int("k", k), _check_int("n", n)
    if not (0 <= k <= n) or not (0.0 <= p <= 1.0):
        raise ParameterError(f"binomial pmf needs 0 <= k <= n and 0 <= p <= 1, got k={k}, n={n}, p={p}")
    q = 1.0 - p
    if p == 0.0:
        return 0.0 if k == 0 else -math.inf
    if q == 0.0:
        return 0.0 if k == n else -math.inf
    if k == 0:
        return -bd0(n, n * q) - n * p if p < 0.1 else n * math.log1p(-p)
    if k == n:
        return -bd0(n, n * p) - n * q if q < 0.1 else n * math.log(p)
    lc = stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(k, n * p) - bd0(n - k, n * q)
    lf = _LN_2PI + math.log(k) + math.log1p(-k / n)
    return lc - 0.5 * lf


def binomial_pmf(k: int, n: int, p: float) -> float:
    """``C(n, k) p^k (1-p)^(n-k)``; values below the double range come back as 0."""
    return math.exp(binomial_logpmf(k, n, p))


def poisson_logpmf(k: int, lam: float) -> float:
    k = _check_int("k", k)
    if k < 0 or not lam > 0:
        raise ParameterError(f"Poisson pmf needs k >= 0 and lambda > 0, got k={k}, lambda={lam}")
    if k == 0:
        return -lam
    return -stirlerr(k) - bd0(k, lam) - 0.5 * (_LN_2PI + math.log(k))


def poisson_pmf(k: int, lam: float) -> float:
    return math.exp(poisson_logpmf(k, lam))


def multinomial_two_cell_logpmf(k1: int, k2: int, n: int, p1: float, p2: float) -> float:
    k1, k2, n = _check_int("k1", k1), _check_int("k2", k2), _check_int("n", n)
    if min(k1, k2, n) < 0 or k1 + k2 > n or p1 < 0 or p2 < 0 or p1 + p2 > 1 + 1e-15:
        raise ParameterError(
            f"need k1, k2 >= 0, k1 + k2 <= n, p1, p2 >= 0, p1 + p2 <= 1; got {(k1, k2, n, p1, p2)}"
        )
    # split into "lands in either cell" and "which of the two cells"
    pp = min(1.0, p1 + p2)
    outer = binomial_logpmf(k1 + k2, n, pp)
    if k1 + k2 == 0:
        return outer
    return outer + binomial_logpmf(k1, k1 + k2, p1 / (p1 + p2))


def multinomial_two_cell_pmf(k1: int, k2: int, n: int, p1: float, p2: float) -> float:
    """``n!/(k1! k2! (n-k1-k2)!) p1^k1 p2^k2 (1-p1-p2)^(n-k1-k2)``."""
    return math.exp(multinomial_two_cell_logpmf(k1, k2, n, p1, p2))


@dataclass(frozen=True)
class PmfComparison:
    k_lo: int
    k_hi: int
    max_rel_dev: float
    argmax_k: int
    ratio_scale: float  # n / N^2

    @property
    def k_range(self) -> tuple[int, int]:
        return self.k_lo, self.k_hi

    @property
    def normalized(self) -> float:
        """``max_rel_dev / (n / N^2)``."""
        return self.max_rel_dev / self.ratio_scale


def typical_count_range(n: int, N: int, eta1: float, eta2: float) -> tuple[int, int]:
    """Integer counts in ``[eta1 n / (2N), 2 eta2 n / N]``."""
    return math.ceil(eta1 * n / (2 * N) - 1e-12), math.floor(2 * eta2 * n / N + 1e-12)


def compare_binomial_poisson(n: int, N: int, p: float, eta1: float, eta2: float) -> PmfComparison:
    """Largest ``|B(k; n, p) / Poi(k; n p) - 1|`` over the typical count range."""
    if not (eta1 / N * (1 - 1e-12) <= p <= eta2 / N * (1 + 1e-12)):
        raise ParameterError(f"p={p} must lie in [eta1/N, eta2/N] = [{eta1 / N}, {eta2 / N}]")
    lo, hi = typical_count_range(n, N, eta1, eta2)
    lo = max(lo, 0)
    hi = min(hi, n)
    if lo > hi:
        raise ParameterError(f"typical count range [{lo}, {hi}] is empty; need n/N >= 2/eta1")
    lam = n * p
    worst, arg = -1.0, lo
    for k in range(lo, hi + 1):
        dev = abs(math.expm1(binomial_logpmf(k, n, p) - poisson_logpmf(k, lam)))
        if dev > worst:
            worst, arg = dev, k
    return PmfComparison(lo, hi, worst, arg, n / (N * N))


def poisson_total_at_mean(n: int) -> float:
    """``P(Poisson(n) = n) = e^-n n^n / n!``."""
    return poisson_pmf(n, float(n))


def depoissonization_check(event_prob_binomial, event_prob_poisson_complement: float, n: int) -> float:
    """Lower bound ``1 - D sqrt(n) q`` on a binomial-process event probability.

    ``q`` is the probability that the matching Poisson-process event fails.
    With ``D1 = sqrt(n) e^-n n^n / n!`` and ``D = 1/D1`` the product
    ``D sqrt(n)`` equals ``1 / P(Poisson(n) = n)``.  The result is clipped
    to ``[0, 1]``.  ``event_prob_binomial`` is only range-checked; callers
    compare it to the returned bound.
    """
    q = float(event_prob_poisson_complement)
    if not 0.0 <= q <= 1.0:
        raise ParameterError(f"probability must lie in [0, 1], got {q}")
    if event_prob_binomial is not None and not 0.0 <= float(event_prob_binomial) <= 1.0:
        raise ParameterError(f"probability must lie in [0, 1], got {event_prob_binomial}")
    n = _check_int("n", n)
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    return min(1.0, max(0.0, 1.0 - q / poisson_total_at_mean(n)))


def paley_zygmund_bound(mean: float, second_moment: float, lam: float) -> float:
    """Lower bound ``(1-lam)^2 mean^2 / E X^2`` on ``P(X >= lam * mean)``."""
    if not 0.0 < lam < 1.0:
        raise ParameterError(f"lambda must lie in (0, 1), got {lam}")
    if not mean > 0 or second_moment < mean * mean * (1 - 1e-12):
        raise ParameterError(f"need mean > 0 and E X^2 >= mean^2, got {mean}, {second_moment}")
    return (1.0 - lam) ** 2 * mean * mean / second_moment
