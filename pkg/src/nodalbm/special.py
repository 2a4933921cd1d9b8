"""Bessel functions, Bessel zeros, the upper incomplete Gamma function and the
Kent first-passage series for the radial part of Brownian motion.

The Bessel and Gamma evaluations are thin, domain-checked wrappers around
:mod:`scipy.special`.  The zero finder and the Kent series (with its
certified tail bound) are implemented here.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special as sp

__all__ = [
    "DiffusionConvention",
    "ZeroTable",
    "ConvergenceError",
    "BracketError",
    "bessel_j",
    "bessel_i",
    "bessel_i_scaled",
    "bessel_zeros",
    "upper_incomplete_gamma",
    "kent_hitting_probability",
    "kent_tail_bound",
    "kent_terms",
]

SAFE_INDEX = 10
KENT_MAX_TERMS = 100_000
# Envelope slack for |j^(nu-1) / J_{nu+1}(j)| <= ENVELOPE_SLACK * sqrt(pi/2) j^(nu-1/2).
ENVELOPE_SLACK = 1.05


class DiffusionConvention(str, enum.Enum):
    """Normalisation of the Brownian generator.

    ``STANDARD`` is the probabilist's motion with generator Δ/2 (per-coordinate
    variance ``t``); ``ANALYST`` matches the semigroup ``exp(tΔ)`` (variance
    ``2t``).  An ANALYST time ``t`` corresponds to the STANDARD time ``2t``.
    """

    STANDARD = "standard"
    ANALYST = "analyst"

    @property
    def variance_rate(self) -> float:
        return 1.0 if self is DiffusionConvention.STANDARD else 2.0

    def to_standard_time(self, t):
        return t * self.variance_rate


class ConvergenceError(RuntimeError):
    """A series or iteration did not reach its target accuracy."""


class BracketError(RuntimeError):
    """A Bessel zero could not be bracketed."""

    def __init__(self, nu, k, msg=""):
        self.nu = nu
        self.k = k
        super().__init__(f"failed to bracket zero k={k} of J_{nu}: {msg}")


def _check_order(nu):
    if not nu >= -0.5:
        raise ValueError(f"Bessel order must satisfy nu >= -1/2, got {nu}")


def _check_arg(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError("Bessel argument must be nonnegative")
    return x


def _scalar_or_array(out, x):
    return float(out) if np.ndim(x) == 0 else out


def bessel_j(nu: float, x):
    """Bessel function of the first kind ``J_nu(x)`` for ``x >= 0``."""
    _check_order(nu)
    xa = _check_arg(x)
    return _scalar_or_array(sp.jv(nu, xa), x)


def bessel_i(nu: float, x):
    """Modified Bessel function ``I_nu(x)`` for ``x >= 0``."""
    _check_order(nu)
    xa = _check_arg(x)
    return _scalar_or_array(sp.iv(nu, xa), x)


def bessel_i_scaled(nu: float, x):
    """Overflow-safe ``exp(-x) I_nu(x)``."""
    _check_order(nu)
    xa = _check_arg(x)
    return _scalar_or_array(sp.ive(nu, xa), x)


@dataclass(frozen=True)
class ZeroTable:
    """The first ``len(zeros)`` positive zeros of ``J_nu``, increasing."""

    nu: float
    zeros: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.zeros, dtype=float)
        if z.ndim != 1 or z.size == 0:
            raise ValueError("zero table must be a nonempty 1-d sequence")
        if np.any(z <= 0) or np.any(np.diff(z) <= 0):
            raise ValueError("zeros must be positive and strictly increasing")
        z.setflags(write=False)
        object.__setattr__(self, "zeros", z)

    def __len__(self):
        return self.zeros.size

    def __getitem__(self, k):
        """1-based access: ``table[1]`` is the first zero."""
        if k < 1:
            raise IndexError("zeros are indexed from 1")
        return float(self.zeros[k - 1])

    def residuals(self):
        """``|J_nu(j)| / (|J_nu'(j)| j)`` for every zero (relative root error)."""
        z = self.zeros
        return np.abs(sp.jv(self.nu, z)) / (np.abs(sp.jvp(self.nu, z)) * z)


def mcmahon_guess(nu, k):
    """Leading McMahon approximation ``(k + nu/2 - 1/4) pi`` with first correction."""
    k = np.asarray(k, dtype=float)
    beta = (k + 0.5 * nu - 0.25) * np.pi
    mu = 4.0 * nu * nu
    return beta - (mu - 1.0) / (8.0 * beta)


def _refine(nu, a, b, x0, tol=1e-15, maxiter=100):
    """Safeguarded Newton on ``[a, b]`` where ``J_nu`` changes sign."""
    fa = sp.jv(nu, a)
    x = x0 if a < x0 < b else 0.5 * (a + b)
    for _ in range(maxiter):
        fx = sp.jv(nu, x)
        if fx == 0.0:
            return x
        if np.sign(fx) == np.sign(fa):
            a, fa = x, fx
        else:
            b = x
        dfx = sp.jvp(nu, x)
        step = fx / dfx if dfx != 0 else np.inf
        xn = x - step
        if not (a < xn < b):
            xn = 0.5 * (a + b)
        if abs(xn - x) <= tol * max(1.0, abs(x)):
            return xn
        x = xn
    return x


def _scan_zeros(nu, count):
    """Locate the first ``count`` zeros by sign-change scanning.

    Consecutive zeros of ``J_nu`` (nu >= -1/2) are more than 2.4 apart, so a
    step of pi/16 cannot skip a sign change.
    """
    h = np.pi / 16.0
    lo = max(nu, 0.0) * 0.5 + 1e-3
    out = []
    xmax = (count + 0.5 * nu + 2.0) * np.pi + 2.0 * nu + 10.0
    while len(out) < count:
        grid = np.arange(lo, lo + 64 * h + h / 2, h)
        vals = sp.jv(nu, grid)
        idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]
        for i in idx:
            if vals[i] == 0.0:
                continue
            k = len(out) + 1
            a, b = grid[i], grid[i + 1]
            out.append(_refine(nu, a, b, float(mcmahon_guess(nu, k))))
            if len(out) == count:
                break
        lo = grid[-1]
        if lo > xmax:
            raise BracketError(nu, len(out) + 1, "scan passed the expected location")
    return out


@lru_cache(maxsize=64)
def _zeros_cached(nu, count):
    n_scan = min(count, SAFE_INDEX + int(math.ceil(2 * nu)))
    zeros = _scan_zeros(nu, n_scan)
    if count > n_scan:
        k = np.arange(n_scan + 1, count + 1, dtype=float)
        x = mcmahon_guess(nu, k)
        for _ in range(8):
            x = x - sp.jv(nu, x) / sp.jvp(nu, x)
        # each Newton result must sit in its own quarter-period bracket
        lo = (k + 0.5 * nu - 0.25) * np.pi - np.pi / 4
        hi = lo + np.pi / 2
        fa, fb = sp.jv(nu, lo), sp.jv(nu, hi)
        bad = np.nonzero(~((x > lo) & (x < hi)) | (np.sign(fa) == np.sign(fb)))[0]
        if bad.size:
            kk = int(k[bad[0]])
            raise BracketError(nu, kk, "McMahon bracket does not contain a sign change")
        zeros = np.concatenate([zeros, x])
    return np.asarray(zeros, dtype=float)


def bessel_zeros(nu: float, count: int) -> ZeroTable:
    """First ``count`` positive zeros of ``J_nu``.

    Small indices are located by sign-change scanning (this also pins the
    indexing), larger ones from McMahon's asymptotic guess.  Every zero is
    polished by a safeguarded Newton iteration inside its bracket.
    """
    _check_order(nu)
    count = int(count)
    if count < 1:
        raise ValueError("count must be >= 1")
    return ZeroTable(float(nu), _zeros_cached(float(nu), count))


def upper_incomplete_gamma(s: float, x: float) -> float:
    """Upper incomplete Gamma function ``Γ(s, x) = ∫_x^∞ u^(s-1) e^(-u) du``.

    Defined for ``s > 0, x >= 0`` and for ``s <= 0, x > 0``.
    """
    s = float(s)
    x = float(x)
    if x < 0 or math.isnan(x):
        raise ValueError("x must be nonnegative")
    if s <= 0 and x == 0:
        raise ValueError("Γ(s, 0) diverges for s <= 0")
    if s > 0:
        if x == 0:
            return math.gamma(s) if s < 171 else math.inf
        q = sp.gammaincc(s, x)
        if q > 0:
            return float(math.exp(math.log(q) + sp.gammaln(s)))
        return _gamma_cf(s, x)
    if s == 0:
        return float(sp.exp1(x))
    if x >= 1.0:
        return _gamma_cf(s, x)
    # upward recurrence Γ(s, x) = (Γ(s+1, x) - x^s e^-x) / s from s0 in (0, 1] or 0
    n = int(math.ceil(-s))
    s0 = s + n
    if s0 == 0:
        g = float(sp.exp1(x))
    else:
        g = float(sp.gammaincc(s0, x) * math.gamma(s0))
    for j in range(n):
        a = s0 - 1 - j
        g = (g - x**a * math.exp(-x)) / a
    return g


def _gamma_cf(s, x, eps=1e-16, maxiter=10_000):
    """Legendre continued fraction for Γ(s, x), modified Lentz; x >~ 1."""
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, maxiter):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    else:
        raise ConvergenceError(f"continued fraction for Γ({s}, {x}) did not converge")
    return math.exp(-x + s * math.log(x)) * h


# ---------------------------------------------------------------------------
# Kent series


def _kent_prefactor(nu):
    return 1.0 / (2.0 ** (nu - 1.0) * math.gamma(nu + 1.0))


def kent_terms(nu, count):
    """Zeros ``j_k`` and coefficients ``j_k^(nu-1) / J_{nu+1}(j_k)``, k = 1..count."""
    z = bessel_zeros(nu, count).zeros
    return z, z ** (nu - 1.0) / sp.jv(nu + 1.0, z)


@lru_cache(maxsize=32)
def _envelope_certified(nu, k_from, k_to):
    """Check the tail envelope against computed zeros on ``[k_from, k_to]``."""
    z, a = kent_terms(nu, k_to)
    k = np.arange(1, k_to + 1)
    sel = k >= k_from
    beta = (k[sel] + 0.5 * nu - 0.25) * np.pi
    in_bracket = np.all(np.abs(z[sel] - beta) <= np.pi / 4)
    env = ENVELOPE_SLACK * math.sqrt(np.pi / 2) * z[sel] ** (nu - 0.5)
    return bool(in_bracket and np.all(np.abs(a[sel]) <= env))


def _envelope_terms(nu, k, tau):
    k = np.asarray(k, dtype=float)
    beta = (k + 0.5 * nu - 0.25) * np.pi
    lo = beta - np.pi / 4
    hi = beta + np.pi / 4
    power = hi ** (nu - 0.5) if nu >= 0.5 else lo ** (nu - 0.5)
    return ENVELOPE_SLACK * math.sqrt(np.pi / 2) * power * np.exp(-0.5 * lo * lo * tau)


def kent_tail_bound(nu: float, first_omitted: int, t: float, r: float) -> float:
    """Upper bound on ``Σ_{k>=K} |j^(nu-1)/J_{nu+1}(j) exp(-j² t / 2r²)|``.

    ``K = first_omitted``.  The envelope uses ``|J_{nu+1}(j_{nu,k})| ~
    sqrt(2 / (pi j))`` and ``|j_{nu,k} - (k + nu/2 - 1/4) pi| <= pi/4``; both
    are verified on computed zeros from the safe index onward.  Times are in
    the STANDARD convention and the bound does not include the prefactor.
    """
    _check_order(nu)
    K = int(first_omitted)
    if K < SAFE_INDEX:
        raise ValueError(f"tail bound is certified only from k = {SAFE_INDEX}")
    if not _envelope_certified(float(nu), SAFE_INDEX, 4 * SAFE_INDEX + 40):
        raise ConvergenceError(f"tail envelope failed certification for nu={nu}")
    tau = t / (r * r)
    if tau <= 0:
        return math.inf
    total = 0.0
    start = K
    block = 256
    while True:
        k = np.arange(start, start + block)
        e = _envelope_terms(nu, k, tau)
        total += float(e.sum())
        # The successive-term ratio q_k of the envelope is nonincreasing in k
        # (Gaussian factor times a power ratio bounded by its value at k).
        # Once q < 1/2 the rest of the tail is at most the last term.
        kl = float(k[-1])
        lo0 = (kl + 0.5 * nu - 0.25) * np.pi - np.pi / 4
        lo1 = lo0 + np.pi
        q = math.exp(-0.5 * tau * (lo1 * lo1 - lo0 * lo0))
        if nu >= 0.5:
            q *= ((lo1 + np.pi / 2) / (lo0 + np.pi / 2)) ** (nu - 0.5)
        if q < 0.5:
            total += float(e[-1])
            break
        start += block
        if start > 10 * KENT_MAX_TERMS:
            return math.inf
    return total


def _short_time_bound(m, r, t_std):
    """Union bound P(sup |B| >= r) <= m * 4 * Φc(r / sqrt(m t)) for small t."""
    z = r / math.sqrt(m * t_std)
    return m * 2.0 * math.erfc(z / math.sqrt(2.0))


def kent_hitting_probability(
    dim: int,
    radius: float,
    time: float,
    convention: DiffusionConvention = DiffusionConvention.STANDARD,
    tol: float = 1e-8,
    return_info: bool = False,
):
    """Probability that Brownian motion from the origin of R^dim reaches the
    sphere of radius ``radius`` by ``time``.

    Evaluates the Bessel series with order ``nu = (dim - 2)/2`` and as many
    terms as needed for the certified tail bound to fall below ``tol``.  With
    ``return_info`` a dict with the term count and tail bound is returned too.
    """
    m = int(dim)
    if m < 1:
        raise ValueError("dimension must be >= 1")
    if radius <= 0 or time < 0:
        raise ValueError("radius must be positive and time nonnegative")
    if not (0 < tol <= 1e-3):
        raise ValueError("tol must lie in (0, 1e-3]")
    convention = DiffusionConvention(convention)
    t_std = convention.to_standard_time(float(time))
    info = {"terms": 0, "tail_bound": 0.0, "raw": 0.0}
    if t_std == 0 or _short_time_bound(m, radius, t_std) < 0.5 * tol:
        p = 0.0
        info["tail_bound"] = _short_time_bound(m, radius, t_std) if t_std > 0 else 0.0
        return (p, info) if return_info else p
    nu = 0.5 * (m - 2)
    pref = _kent_prefactor(nu)
    tau = t_std / radius**2
    n = SAFE_INDEX
    while True:
        tail = pref * kent_tail_bound(nu, n + 1, t_std, radius)
        if tail < 0.5 * tol:
            break
        if n >= KENT_MAX_TERMS:
            raise ConvergenceError(
                f"Kent series needs more than {KENT_MAX_TERMS} terms (tau={tau:g})"
            )
        # the envelope is Gaussian in k: jump close to where it becomes small
        n_guess = int(math.sqrt(2 * max(math.log(8.0 * pref / tol), 1.0) / tau) / np.pi) + 2
        n = min(KENT_MAX_TERMS, max(2 * n, n_guess))
    z, a = kent_terms(nu, n)
    terms = a * np.exp(-0.5 * z * z * tau)
    raw = 1.0 - pref * math.fsum(terms)
    info.update(terms=n, tail_bound=tail, raw=raw)
    p = min(1.0, max(0.0, raw))
    return (p, info) if return_info else p
