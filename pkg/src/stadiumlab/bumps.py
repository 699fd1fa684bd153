"""Compactly supported profile families shared by the stretch flow, quasimode
envelopes and phase-space cutoffs.

Everything here is closed form: values together with first and second
derivatives, plus exact antiderivatives where the flow map needs them.
"""

from __future__ import annotations

import numpy as np


def quartic_bump(x, radius):
    """Evaluate ``(1 - (x/r)^2)^4`` on ``|x| <= r`` (zero outside).

    Returns ``(f, f', f'')``.  The profile is C^3 across the support edge,
    which is enough regularity for the second-derivative quadratic forms.
    """
    x = np.asarray(x, dtype=float)
    s = x / radius
    inside = np.abs(s) < 1.0
    s = np.where(inside, s, 1.0)
    s2 = s * s
    one = 1.0 - s2
    f = np.where(inside, one**4, 0.0)
    d1 = np.where(inside, -8.0 * s * one**3 / radius, 0.0)
    d2 = np.where(inside, -8.0 * one**2 * (1.0 - 7.0 * s2) / radius**2, 0.0)
    return f, d1, d2


def quartic_bump_integral(radius):
    """Exact integral of the unnormalized quartic bump over its support."""
    return 256.0 * radius / 315.0


def quartic_bump_antiderivative(x, radius):
    """Odd antiderivative of the unnormalized quartic bump.

    Saturates at +-quartic_bump_integral(radius)/2 outside the support.
    """
    x = np.asarray(x, dtype=float)
    u = np.clip(x / radius, -1.0, 1.0)
    u2 = u * u
    poly = u * (1.0 - u2 * (4.0 / 3.0 - u2 * (6.0 / 5.0 - u2 * (4.0 / 7.0 - u2 / 9.0))))
    return radius * poly


def smoothstep(s):
    """C^4 monotone step from 0 at s<=-1 to 1 at s>=1 (quartic-bump CDF)."""
    s = np.asarray(s, dtype=float)
    total = quartic_bump_integral(1.0)
    return (quartic_bump_antiderivative(s, 1.0) + total / 2.0) / total


def plateau(y, inner, outer):
    """Even cutoff equal to 1 on ``|y| <= inner``, 0 for ``|y| >= outer``.

    The shoulder is the smoothstep above, so the cutoff is C^3 and its
    values stay in [0, 1].
    """
    if not outer > inner > 0.0:
        raise ValueError("plateau requires 0 < inner < outer")
    y = np.asarray(y, dtype=float)
    s = (np.abs(y) - inner) / (outer - inner) * 2.0 - 1.0
    return 1.0 - smoothstep(s)


def exp_bump(x, radius):
    """C-infinity bump ``exp(1 - 1/(1-(x/r)^2))`` on ``|x| < r``, peak value 1.

    Returns ``(f, f', f'')``; used as the smooth alternative quasimode
    envelope for sensitivity runs.
    """
    x = np.asarray(x, dtype=float)
    s = x / radius
    inside = np.abs(s) < 1.0 - 1e-14
    s = np.where(inside, s, 0.0)
    one = 1.0 - s * s
    g = -1.0 / one
    f = np.where(inside, np.exp(g + 1.0), 0.0)
    g1 = -2.0 * s / one**2
    g2 = -(2.0 + 6.0 * s * s) / one**3
    d1 = np.where(inside, g1 * f / radius, 0.0)
    d2 = np.where(inside, (g2 + g1 * g1) * f / radius**2, 0.0)
    return f, d1, d2
