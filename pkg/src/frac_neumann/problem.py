"""Model parameters and the (truncated) power nonlinearity."""

import math
from dataclasses import dataclass, field, replace

import numpy as np


def critical_exponent(n, s):
    """Fractional Sobolev exponent 2n/(n - 2s), or +inf when s >= n/2."""
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be an integer >= 1, got {n!r}")
    if not 0.0 < s < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {s!r}")
    if s >= n / 2:
        return math.inf
    return 2.0 * n / (n - 2.0 * s)


def default_ell(n, s, q):
    """Midpoint of (2, min(2*_n, q)), the default growth exponent above t0."""
    top = min(critical_exponent(n, s), q)
    return 0.5 * (2.0 + top)


@dataclass(frozen=True)
class ProblemParams:
    """Parameters of d (-Delta)^s u + u = g(u) on the unit ball.

    ``t0 = inf`` gives the pure power g(t) = t^(q-1). For finite t0 the power
    is continued above t0 with growth t^(ell-1), which keeps g C^1.
    ``hypothesis_flags`` records which theorem hypotheses hold; the spectral
    condition q > 2 + d*lambda is None until `with_spectrum` is called.
    """

    n: int
    s: float
    d: float
    q: float
    ell: float = None
    t0: float = math.inf
    lambda2_r_plus: float = None
    hypothesis_flags: dict = field(default=None, compare=False)

    def __post_init__(self):
        two_n = critical_exponent(self.n, self.s)
        if not self.d > 0:
            raise ValueError(f"d must be positive, got {self.d!r}")
        if not self.q > 2:
            raise ValueError(f"q must exceed 2, got {self.q!r}")
        if self.ell is None:
            object.__setattr__(self, "ell", default_ell(self.n, self.s, self.q))
        if not self.t0 > 1:
            raise ValueError(f"t0 must exceed 1, got {self.t0!r}")
        if math.isfinite(self.t0) and not 2 < self.ell < min(two_n, self.q):
            raise ValueError("ell must lie in (2, min(2*_n, q)) when t0 is finite")
        two_1 = critical_exponent(1, self.s)
        flags = {
            "q_below_n_bound": bool(self.q < (two_n + 2) / 2),
            "q_below_radial_bound": bool(self.q < (two_1 + 2) / 2),
            "q_above_spectral_threshold": (
                None if self.lambda2_r_plus is None
                else bool(self.q > 2 + self.d * self.lambda2_r_plus)
            ),
        }
        object.__setattr__(self, "hypothesis_flags", flags)

    @property
    def two_star_n(self):
        return critical_exponent(self.n, self.s)

    @property
    def two_star_1(self):
        return critical_exponent(1, self.s)

    def with_spectrum(self, lambda2_r_plus):
        """Copy with the monotone eigenvalue recorded (fills the spectral flag)."""
        return replace(self, lambda2_r_plus=float(lambda2_r_plus))

    def with_truncation(self, t0, ell=None):
        return replace(self, t0=float(t0), ell=self.ell if ell is None else ell)


def _branches(params, t):
    t = np.asarray(t, dtype=float)
    neg = t < 0
    hi = np.isfinite(params.t0) & (t > params.t0)
    return t, neg, hi


def g_trunc(params, t, extend=False):
    """Nonlinearity g_{q,t0}(t).

    Negative arguments raise unless ``extend`` is set, in which case
    g(t) = -t there (derivative of the quadratic penalty G(t) = -t^2/2).
    """
    t, neg, hi = _branches(params, t)
    if np.any(neg) and not extend:
        raise ValueError("g is defined for t >= 0 only")
    q, ell, t0 = params.q, params.ell, params.t0
    tp = np.where(neg | hi, 1.0, t)
    out = tp ** (q - 1)
    if np.any(hi):
        th = np.where(hi, t, t0 if math.isfinite(t0) else 1.0)
        trunc = t0 ** (q - 1) + (q - 1) / (ell - 1) * t0 ** (q - ell) * (th ** (ell - 1) - t0 ** (ell - 1))
        out = np.where(hi, trunc, out)
    out = np.where(neg, -t, out)
    return out if out.ndim else float(out)


def g_trunc_prime(params, t, extend=False):
    t, neg, hi = _branches(params, t)
    if np.any(neg) and not extend:
        raise ValueError("g is defined for t >= 0 only")
    q, ell, t0 = params.q, params.ell, params.t0
    tp = np.where(neg | hi, 1.0, t)
    out = (q - 1) * tp ** (q - 2)
    if np.any(hi):
        th = np.where(hi, t, 1.0)
        out = np.where(hi, (q - 1) * t0 ** (q - ell) * th ** (ell - 2), out)
    out = np.where(neg, -1.0, out)
    return out if out.ndim else float(out)


def G_antiderivative(params, t, extend=False):
    """G(t) = int_0^t g."""
    t, neg, hi = _branches(params, t)
    if np.any(neg) and not extend:
        raise ValueError("g is defined for t >= 0 only")
    q, ell, t0 = params.q, params.ell, params.t0
    tp = np.where(neg | hi, 1.0, t)
    out = tp**q / q
    if np.any(hi):
        th = np.where(hi, t, t0 if math.isfinite(t0) else 1.0)
        slope = (q - 1) / (ell - 1) * t0 ** (q - ell)
        trunc = (
            t0**q / q
            + t0 ** (q - 1) * (th - t0)
            + slope * ((th**ell - t0**ell) / ell - t0 ** (ell - 1) * (th - t0))
        )
        out = np.where(hi, trunc, out)
    out = np.where(neg, -0.5 * t * t, out)
    return out if out.ndim else float(out)
