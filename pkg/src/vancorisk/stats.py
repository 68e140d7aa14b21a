"""Tail probabilities through the regularized incomplete beta function.

scipy.special.betainc is accurate to ~1e-15 relative over the parameter
ranges used here, well inside the 1e-10 tolerance the tests pin.
"""

import math

from scipy.special import betainc


def t_two_sided_p(t, df):
    """P(|T| >= |t|) for Student t with ``df`` degrees of freedom."""
    if math.isnan(t):
        return float("nan")
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def f_upper_p(f, d1, d2):
    """P(F >= f) for the F(d1, d2) distribution."""
    if math.isinf(f):
        return 0.0
    if f <= 0:
        return 1.0
    return float(betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)))
