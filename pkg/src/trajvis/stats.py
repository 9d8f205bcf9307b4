"""Two-sample tests, special functions, and multiple-testing adjustment.

The p-value machinery is self-contained: Student-t tails go through the
regularized incomplete beta function and chi-square tails through the
regularized incomplete gamma function, both evaluated by the classic
series / continued-fraction pair with the conventional switchover points
(series while the expansion converges fastest, continued fraction beyond).
Target accuracy is 1e-10 over the df ranges used here.
"""

from __future__ import annotations

import math

from trajvis.errors import ValidationError

_MAX_ITER = 500
_EPS = 1e-16
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
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
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b).

    Continued fraction applied directly while x < (a+1)/(a+b+2) (its fast
    region); beyond that, evaluated through the symmetry
    I_x(a,b) = 1 - I_{1-x}(b,a).
    """
    if a <= 0 or b <= 0:
        raise ValidationError(f"incomplete beta requires a, b > 0 (got a={a}, b={b})")
    if x < 0.0 or x > 1.0:
        raise ValidationError(f"incomplete beta requires x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_bt = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    bt = math.exp(log_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def reg_inc_gamma_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0:
        raise ValidationError(f"incomplete gamma requires a > 0, got {a}")
    if x < 0:
        raise ValidationError(f"incomplete gamma requires x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def reg_inc_gamma_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if a <= 0:
        raise ValidationError(f"incomplete gamma requires a > 0, got {a}")
    if x < 0:
        raise ValidationError(f"incomplete gamma requires x >= 0, got {x}")
    if x == 0.0:
        return 1.0
    # series below x = a+1, continued fraction above (the conventional split)
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def _gamma_series(a: float, x: float) -> float:
    ap = a
    total = 1.0 / a
    term = total
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gamma_cf(a: float, x: float) -> float:
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def student_t_two_sided_p(t: float, df: float) -> float:
    """Two-sided tail probability of Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValidationError(f"degrees of freedom must be positive, got {df}")
    if math.isinf(t):
        return 0.0
    return reg_inc_beta(df / 2.0, 0.5, df / (df + t * t))


def chi2_sf(x: float, df: float) -> float:
    """Upper tail P(X >= x) of the chi-square distribution."""
    if df <= 0:
        raise ValidationError(f"degrees of freedom must be positive, got {df}")
    if x <= 0:
        return 1.0
    return reg_inc_gamma_upper(df / 2.0, x / 2.0)


def welch_t_test(sample_a, sample_b) -> tuple[float, float, float]:
    """Welch's unequal-variance t-test, two-sided.

    Returns (t, df, p) with the Welch-Satterthwaite df. Degenerate samples
    (both variances zero) use the documented convention: equal means give
    p = 1, unequal means give p = 0 with an infinite statistic.
    """
    a = [float(v) for v in sample_a]
    b = [float(v) for v in sample_b]
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValidationError(f"welch_t_test needs >= 2 values per sample (got {na}, {nb})")
    mean_a = sum(a) / na
    mean_b = sum(b) / nb
    var_a = sum((v - mean_a) ** 2 for v in a) / (na - 1)
    var_b = sum((v - mean_b) ** 2 for v in b) / (nb - 1)
    if var_a == 0.0 and var_b == 0.0:
        if mean_a == mean_b:
            return 0.0, float(na + nb - 2), 1.0
        return math.copysign(math.inf, mean_a - mean_b), float(na + nb - 2), 0.0
    sa, sb = var_a / na, var_b / nb
    se = math.sqrt(sa + sb)
    t = (mean_a - mean_b) / se
    df = (sa + sb) ** 2 / (sa**2 / (na - 1) + sb**2 / (nb - 1))
    return t, df, student_t_two_sided_p(abs(t), df)


def chi_square_test(table) -> tuple[float, float, float]:
    """Pearson chi-square test of independence on an r x c count table."""
    rows = [[float(v) for v in row] for row in table]
    if not rows or not rows[0]:
        raise ValidationError("contingency table must be non-empty")
    n_cols = len(rows[0])
    if any(len(r) != n_cols for r in rows):
        raise ValidationError("contingency table rows must have equal length")
    if any(v < 0 for r in rows for v in r):
        raise ValidationError("contingency table entries must be nonnegative")
    row_sums = [sum(r) for r in rows]
    col_sums = [sum(r[j] for r in rows) for j in range(n_cols)]
    total = sum(row_sums)
    if total <= 0:
        raise ValidationError("contingency table total must be positive")
    if any(s == 0 for s in row_sums):
        raise ValidationError("contingency table has an all-zero row")
    if any(s == 0 for s in col_sums):
        raise ValidationError("contingency table has an all-zero column")
    stat = 0.0
    for i, r in enumerate(rows):
        for j, obs in enumerate(r):
            expected = row_sums[i] * col_sums[j] / total
            stat += (obs - expected) ** 2 / expected
    df = float((len(rows) - 1) * (n_cols - 1))
    if df == 0:
        raise ValidationError("contingency table needs >= 2 rows and >= 2 columns")
    return stat, df, chi2_sf(stat, df)


def bh_fdr(p_values) -> list[float]:
    """Benjamini-Hochberg step-up adjusted p-values (q-values).

    q for the i-th smallest p is min over j >= i of m * p_(j) / j, clipped
    to 1, returned in the original order.
    """
    ps = [float(p) for p in p_values]
    if any(p < 0.0 or p > 1.0 for p in ps):
        raise ValidationError("p-values must lie in [0, 1]")
    m = len(ps)
    if m == 0:
        return []
    order = sorted(range(m), key=lambda i: ps[i])
    qs = [0.0] * m
    running_min = 1.0
    for rank_from_top in range(m, 0, -1):
        i = order[rank_from_top - 1]
        running_min = min(running_min, m * ps[i] / rank_from_top)
        qs[i] = running_min
    return qs


def pearson_r(x, y) -> float:
    """Pearson correlation coefficient; raises on zero variance."""
    xs = [float(v) for v in x]
    ys = [float(v) for v in y]
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValidationError("pearson_r needs two equal-length samples of size >= 2")
    mx = sum(xs) / len(xs)
    my = sum(ys) / len(ys)
    sxy = sum((a - mx) * (b - my) for a, b in zip(xs, ys))
    sxx = sum((a - mx) ** 2 for a in xs)
    syy = sum((b - my) ** 2 for b in ys)
    if sxx == 0.0 or syy == 0.0:
        raise ValidationError("pearson_r undefined for zero-variance input")
    return sxy / math.sqrt(sxx * syy)
