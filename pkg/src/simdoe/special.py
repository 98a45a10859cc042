"""Scalar distribution functions needed by the analysis layer.

The regularized incomplete beta uses the modified Lentz continued fraction
with the usual symmetry switch at x = (a+1)/(a+b+2); this keeps the fraction
in its fast-converging region on both sides.  Convergence target 1e-15,
hard cap 300 iterations.
"""

from __future__ import annotations

import math

from .errors import InvalidDf, ValidationError

_FPMIN = 1e-300
_EPS = 1e-15
_MAX_ITER = 300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    return h


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValidationError("betainc_reg: a and b must be positive")
    if x < 0 or x > 1:
        raise ValidationError("betainc_reg: x must lie in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_upper_tail(f: float, df1: int, df2: int) -> float:
    """P(F(df1, df2) > f), the ANOVA p-value."""
    if not (isinstance(df1, int) and isinstance(df2, int)) or df1 < 1 or df2 < 1:
        raise InvalidDf(f"degrees of freedom must be integers >= 1, "
                        f"got ({df1}, {df2})")
    if f < 0:
        raise ValidationError("F statistic must be nonnegative")
    if f == 0.0:
        return 1.0
    if math.isinf(f):
        return 0.0
    x = df2 / (df2 + df1 * f)
    return betainc_reg(df2 / 2.0, df1 / 2.0, x)


# Acklam's rational approximation coefficients for the normal quantile.
_PPF_A = (-3.969683028665376e+01, 2.209460984245205e+02,
          -2.759285104469687e+02, 1.383577518672690e+02,
          -3.066479806614716e+01, 2.506628277459239e+00)
_PPF_B = (-5.447609879822406e+01, 1.615858368580409e+02,
          -1.556989798598866e+02, 6.680131188771972e+01,
          -1.328068155288572e+01)
_PPF_C = (-7.784894002430293e-03, -3.223964580411365e-01,
          -2.400758277161838e+00, -2.549732539343734e+00,
          4.374664141464968e+00, 2.938163982698783e+00)
_PPF_D = (7.784695709041462e-03, 3.224671290700398e-01,
          2.445134137142996e+00, 3.754408661907416e+00)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF, refined to near machine precision.

    The upper half reflects to the lower (1-p is exact in IEEE for
    p >= 0.5), so the erfc used in the refinement never cancels.
    """
    if not 0.0 < p < 1.0:
        raise ValidationError("normal_quantile: p must lie strictly in (0, 1)")
    if p > 0.5:
        return -normal_quantile(1.0 - p)
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_PPF_C[0] * q + _PPF_C[1]) * q + _PPF_C[2]) * q + _PPF_C[3])
              * q + _PPF_C[4]) * q + _PPF_C[5])
             / ((((_PPF_D[0] * q + _PPF_D[1]) * q + _PPF_D[2]) * q
                 + _PPF_D[3]) * q + 1.0))
    else:
        q = p - 0.5
        r = q * q
        x = ((((((_PPF_A[0] * r + _PPF_A[1]) * r + _PPF_A[2]) * r + _PPF_A[3])
              * r + _PPF_A[4]) * r + _PPF_A[5]) * q
             / (((((_PPF_B[0] * r + _PPF_B[1]) * r + _PPF_B[2]) * r
                  + _PPF_B[3]) * r + _PPF_B[4]) * r + 1.0))
    # One Halley step against the exact CDF; x <= 0 here so erfc(-x/sqrt 2)
    # has no cancellation.
    err = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = err * _SQRT_2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))
