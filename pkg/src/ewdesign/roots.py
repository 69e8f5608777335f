"""Real roots of polynomials of degree at most four by radicals.

Coefficients are passed highest degree first, as in :func:`numpy.roots`.
A vanishing leading coefficient drops to the next lower degree.  Every
candidate root is refined by a few Newton steps on the original
polynomial, which recovers accuracy lost in the radical expressions.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

_LEAD_RTOL = 1e-13
_IMAG_TOL = 1e-7
_OMEGA = complex(-0.5, math.sqrt(3) / 2)


def _trim(coeffs) -> list[float]:
    c = [float(v) for v in coeffs]
    scale = max((abs(v) for v in c), default=0.0)
    while c and abs(c[0]) <= _LEAD_RTOL * scale:
        c.pop(0)
    return c


def _polish(coeffs, z: float, steps: int = 3) -> float:
    p = np.poly1d(coeffs)
    dp = p.deriv()
    for _ in range(steps):
        fz, dz = p(z), dp(z)
        if dz == 0 or not np.isfinite(fz):
            break
        step = fz / dz
        znew = z - step
        if abs(p(znew)) >= abs(fz):
            break
        z = znew
    return float(z)


def _finish(coeffs, candidates) -> list[float]:
    out = []
    for r in candidates:
        r = complex(r)
        if abs(r.imag) <= _IMAG_TOL * (1.0 + abs(r.real)):
            out.append(_polish(coeffs, r.real))
    return sorted(out)


def solve_linear(a1: float, a0: float) -> list[float]:
    return [] if a1 == 0 else [-a0 / a1]


def solve_quadratic(a2: float, a1: float, a0: float) -> list[float]:
    """Real roots of ``a2 z^2 + a1 z + a0``."""
    c = _trim([a2, a1, a0])
    if len(c) < 3:
        return solve_linear(*c) if len(c) == 2 else []
    a, b, cc = c
    disc = b * b - 4 * a * cc
    if disc < 0:
        if disc >= -1e-14 * max(b * b, abs(4 * a * cc)):
            disc = 0.0
        else:
            return []
    # cancellation-free pair of roots
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if q == 0:
        return [0.0, 0.0]
    return _finish(c, [q / a, cc / q])


def solve_cubic(a3: float, a2: float, a1: float, a0: float) -> list[float]:
    """Real roots of ``a3 z^3 + a2 z^2 + a1 z + a0`` by Cardano's formulas."""
    c = _trim([a3, a2, a1, a0])
    if len(c) < 4:
        return solve_quadratic(*([0.0] * (3 - len(c)) + c))
    b2, b1, b0 = c[1] / c[0], c[2] / c[0], c[3] / c[0]
    q = b1 / 3 - b2 * b2 / 9
    r = (b1 * b2 - 3 * b0) / 6 - b2 ** 3 / 27
    disc = q ** 3 + r * r
    if disc > 0:
        # one real root (two complex): real cube roots suffice
        sq = math.sqrt(disc)
        s1, s2 = np.cbrt(r + sq), np.cbrt(r - sq)
        roots = [s1 + s2 - b2 / 3]
        imag = math.sqrt(3) / 2 * (s1 - s2)
        if abs(imag) <= _IMAG_TOL * (1 + abs(-(s1 + s2) / 2 - b2 / 3)):
            roots += [-(s1 + s2) / 2 - b2 / 3] * 2
        return _finish(c, roots)
    # three real roots: the cube roots are complex conjugates
    s1 = (r + cmath.sqrt(disc)) ** (1 / 3) if (r, disc) != (0, 0) else 0j
    s2 = -q / s1 if s1 != 0 else 0j
    roots = [s1 + s2, _OMEGA * s1 + _OMEGA.conjugate() * s2, _OMEGA.conjugate() * s1 + _OMEGA * s2]
    return _finish(c, [complex(z.real - b2 / 3, 0.0) for z in roots])


def solve_quartic(a4: float, a3: float, a2: float, a1: float, a0: float) -> list[float]:
    """Real roots of a quartic via Ferrari's radicals.

    With the monic form ``z^4 + a3 z^3 + a2 z^2 + a1 z + a0``::

        E = 12 a0 + a2^2 - 3 a1 a3
        F = 27 a1^2 - 72 a0 a2 + 2 a2^3 - 9 a1 a2 a3 + 27 a0 a3^2
        D = (F + sqrt(F^2 - 4 E^3))^(1/3),  G = D + 2^(2/3) E / D
        A = -2 a2/3 + a3^2/4 + G / (3 2^(1/3))
        B, C = -4 a2/3 + a3^2/2 - G / (3 2^(1/3)) -/+ (-8 a1 + 4 a2 a3 - a3^3) / (4 sqrt(A))

    and roots ``-a3/4 - sqrt(A)/2 +- sqrt(B)/2``, ``-a3/4 + sqrt(A)/2 +- sqrt(C)/2``.
    Among the three cube-root branches of ``D`` the one giving the largest
    ``|A|`` is used, which avoids dividing by a vanishing ``sqrt(A)``.
    """
    c = _trim([a4, a3, a2, a1, a0])
    if len(c) < 5:
        return solve_cubic(*([0.0] * (4 - len(c)) + c))
    b3, b2, b1, b0 = (v / c[0] for v in c[1:])
    E = 12 * b0 + b2 * b2 - 3 * b1 * b3
    F = 27 * b1 * b1 - 72 * b0 * b2 + 2 * b2 ** 3 - 9 * b1 * b2 * b3 + 27 * b0 * b3 * b3
    root = cmath.sqrt(F * F - 4 * E ** 3)
    inner = F + root if abs(F + root) >= abs(F - root) else F - root
    base = -2 * b2 / 3 + b3 * b3 / 4
    k = 3 * 2 ** (1 / 3)
    if inner == 0:
        options = [base + 0j]
    else:
        D0 = inner ** (1 / 3)
        options = []
        for D in (D0, D0 * _OMEGA, D0 * _OMEGA.conjugate()):
            G = D + 2 ** (2 / 3) * E / D
            options.append(base + G / k)
    A = max(options, key=abs)
    G_over_k = A - base
    rest = -4 * b2 / 3 + b3 * b3 / 2 - G_over_k
    sA = cmath.sqrt(A)
    if abs(sA) <= 1e-150:
        # biquadratic in (z + a3/4): y^4 + P y^2 + R with no linear term
        P = b2 - 3 * b3 * b3 / 8
        R = b0 - b1 * b3 / 4 + b2 * b3 * b3 / 16 - 3 * b3 ** 4 / 256
        ys = []
        for y2 in np.roots([1.0, P, R]):
            s = cmath.sqrt(y2)
            ys += [s, -s]
        return _finish(c, [y - b3 / 4 for y in ys])
    T = (-8 * b1 + 4 * b2 * b3 - b3 ** 3) / (4 * sA)
    B, C = rest - T, rest + T
    sB, sC = cmath.sqrt(B), cmath.sqrt(C)
    shift = -b3 / 4
    roots = [shift - sA / 2 + sB / 2, shift - sA / 2 - sB / 2,
             shift + sA / 2 + sC / 2, shift + sA / 2 - sC / 2]
    return _finish(c, roots)


def real_roots(coeffs) -> list[float]:
    """Dispatch on degree; degree above four uses companion-matrix eigenvalues."""
    c = _trim(coeffs)
    n = len(c) - 1
    if n <= 0:
        return []
    if n == 1:
        return solve_linear(*c)
    if n == 2:
        return solve_quadratic(*c)
    if n == 3:
        return solve_cubic(*c)
    if n == 4:
        return solve_quartic(*c)
    return _finish(c, np.roots(c))
