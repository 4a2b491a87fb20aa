"""Exact rational polynomial algebra in the (x, r) variables.

Polynomials are stored as sparse maps from (multi-index, r-power) to
``Fraction`` coefficients.  The module provides the closed-form Laplacian
table for products of the square-root edge profile with such monomials,
its extension to curved interfaces through geometry jets, and the
triangular solve for approximating polynomials.

Everything here is exact: these results serve as oracles for the grid
solvers, so no floats are allowed to enter the coefficient arithmetic.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

from .errors import SingularSystem

MultiIndex = tuple[int, ...]
Key = tuple[MultiIndex, int]


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    raise TypeError(f"coefficient {v!r} is not exact (int, Fraction or 'p/q' string)")


def _bump(mu: MultiIndex, i: int, amount: int) -> MultiIndex:
    out = list(mu)
    out[i] += amount
    return tuple(out)


class XRPolynomial:
    """Polynomial in (x_1..x_n, r) with exact rational coefficients.

    Instances are immutable; arithmetic returns new objects.  Zero
    coefficients are never stored.
    """

    __slots__ = ("n", "_c")

    def __init__(self, n: int, coeffs: Mapping[Key, object] | None = None):
        if n < 1:
            raise ValueError("dimension must be >= 1")
        self.n = n
        clean: dict[Key, Fraction] = {}
        for (mu, m), v in (coeffs or {}).items():
            mu = tuple(int(e) for e in mu)
            if len(mu) != n:
                raise ValueError(f"multi-index {mu} has wrong length for n={n}")
            if any(e < 0 for e in mu) or m < 0:
                raise ValueError(f"negative exponent in key ({mu}, {m})")
            f = _frac(v)
            if f != 0:
                key = (mu, int(m))
                clean[key] = clean.get(key, Fraction(0)) + f
        self._c = {k: v for k, v in clean.items() if v != 0}

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "XRPolynomial":
        return cls(n)

    @classmethod
    def constant(cls, n: int, c) -> "XRPolynomial":
        return cls(n, {((0,) * n, 0): c})

    @classmethod
    def monomial(cls, n: int, mu: Iterable[int], m: int, c=1) -> "XRPolynomial":
        return cls(n, {(tuple(mu), m): c})

    @classmethod
    def x_var(cls, n: int, i: int) -> "XRPolynomial":
        mu = [0] * n
        mu[i] = 1
        return cls(n, {(tuple(mu), 0): 1})

    @classmethod
    def r_var(cls, n: int) -> "XRPolynomial":
        return cls(n, {((0,) * n, 1): 1})

    @classmethod
    def from_x_coeffs(cls, n: int, coeffs: Mapping[MultiIndex, object]) -> "XRPolynomial":
        """Lift a polynomial in x alone (no r dependence)."""
        return cls(n, {(tuple(mu), 0): v for mu, v in coeffs.items()})

    # -- views --------------------------------------------------------

    def items(self) -> Iterator[tuple[Key, Fraction]]:
        return iter(sorted(self._c.items()))

    def coeff(self, mu: Iterable[int], m: int) -> Fraction:
        return self._c.get((tuple(mu), int(m)), Fraction(0))

    @property
    def degree(self) -> int:
        """Max of |mu| + m over stored keys; -1 for the zero polynomial."""
        if not self._c:
            return -1
        return max(sum(mu) + m for mu, m in self._c)

    def norm(self) -> Fraction:
        """Max absolute coefficient."""
        if not self._c:
            return Fraction(0)
        return max(abs(v) for v in self._c.values())

    def is_zero(self) -> bool:
        return not self._c

    def __eq__(self, other) -> bool:
        if not isinstance(other, XRPolynomial):
            return NotImplemented
        return self.n == other.n and self._c == other._c

    def __hash__(self):
        return hash((self.n, frozenset(self._c.items())))

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other) -> "XRPolynomial":
        if isinstance(other, (int, Fraction)):
            other = XRPolynomial.constant(self.n, other)
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        c = dict(self._c)
        for k, v in other._c.items():
            c[k] = c.get(k, Fraction(0)) + v
        return XRPolynomial(self.n, c)

    __radd__ = __add__

    def __neg__(self) -> "XRPolynomial":
        return XRPolynomial(self.n, {k: -v for k, v in self._c.items()})

    def __sub__(self, other) -> "XRPolynomial":
        return self + (-other if isinstance(other, XRPolynomial) else -_frac(other))

    def __rsub__(self, other) -> "XRPolynomial":
        return (-self) + other

    def __mul__(self, other) -> "XRPolynomial":
        if isinstance(other, (int, Fraction, str)):
            f = _frac(other)
            return XRPolynomial(self.n, {k: v * f for k, v in self._c.items()})
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        c: dict[Key, Fraction] = {}
        for (mu1, m1), v1 in self._c.items():
            for (mu2, m2), v2 in other._c.items():
                key = (tuple(a + b for a, b in zip(mu1, mu2)), m1 + m2)
                c[key] = c.get(key, Fraction(0)) + v1 * v2
        return XRPolynomial(self.n, c)

    __rmul__ = __mul__

    # -- calculus -----------------------------------------------------

    def diff_x(self, i: int) -> "XRPolynomial":
        c = {}
        for (mu, m), v in self._c.items():
            if mu[i] > 0:
                c[(_bump(mu, i, -1), m)] = v * mu[i]
        return XRPolynomial(self.n, c)

    def diff_r(self) -> "XRPolynomial":
        c = {}
        for (mu, m), v in self._c.items():
            if m > 0:
                c[(mu, m - 1)] = v * m
        return XRPolynomial(self.n, c)

    def truncate(self, k: int) -> "XRPolynomial":
        """Drop all monomials of total degree > k."""
        return XRPolynomial(self.n, {km: v for km, v in self._c.items() if sum(km[0]) + km[1] <= k})

    def homogeneous_part(self, deg: int) -> "XRPolynomial":
        return XRPolynomial(self.n, {km: v for km, v in self._c.items() if sum(km[0]) + km[1] == deg})

    def mul_r_power(self, p: int) -> "XRPolynomial":
        """Multiply by r**p (p may be negative if all r-powers allow it)."""
        c = {}
        for (mu, m), v in self._c.items():
            if m + p < 0:
                raise ValueError("negative r-power produced")
            c[(mu, m + p)] = v
        return XRPolynomial(self.n, c)

    # -- evaluation ---------------------------------------------------

    def evaluate(self, x: Iterable, r):
        """Evaluate at (x, r); exact when inputs are Fractions/ints."""
        x = list(x)
        if len(x) != self.n:
            raise ValueError("point has wrong dimension")
        total = 0
        for (mu, m), v in self._c.items():
            term = v
            for xi, e in zip(x, mu):
                if e:
                    term = term * xi**e
            if m:
                term = term * r**m
            total = total + term
        return total

    def evaluate_frame(self, frame) -> float:
        """Evaluate at the (x, r) data carried by a geometry Frame."""
        return float(self.evaluate([float(c) for c in frame.x], float(frame.r)))

    def __str__(self) -> str:
        if not self._c:
            return "0"
        parts = []
        for (mu, m), v in sorted(self._c.items(), key=lambda kv: (sum(kv[0][0]) + kv[0][1], kv[0])):
            factors = []
            for i, e in enumerate(mu):
                if e == 1:
                    factors.append(f"x{i + 1}")
                elif e > 1:
                    factors.append(f"x{i + 1}^{e}")
            if m == 1:
                factors.append("r")
            elif m > 1:
                factors.append(f"r^{m}")
            body = "*".join(factors)
            parts.append(f"{v}" + (f"*{body}" if body else ""))
        return " + ".join(parts)

    __repr__ = __str__


def evaluate_u0p(P: XRPolynomial, frame) -> float:
    """Value of U0 * P at a geometry frame."""
    return float(frame.u0) * P.evaluate_frame(frame)


# ----------------------------------------------------------------------
# Laplacian table
# ----------------------------------------------------------------------

class LaplacianResult:
    """Bracket polynomial of Delta(U0 * p) = (U0/r) * [principal + curved + O(...)].

    ``principal`` is the flat-interface table; ``curved_terms`` collects
    the jet-induced contributions up to total degree k.  For flat
    geometry the identity is exact and ``remainder_order`` is inf.
    """

    __slots__ = ("principal", "curved_terms", "remainder_order")

    def __init__(self, principal: XRPolynomial, curved_terms: XRPolynomial, remainder_order):
        self.principal = principal
        self.curved_terms = curved_terms
        self.remainder_order = remainder_order

    @property
    def total(self) -> XRPolynomial:
        return self.principal + self.curved_terms

    def coefficient(self, sigma: Iterable[int], l: int) -> Fraction:
        """A_{sigma,l}: coefficient of x^sigma r^l in the bracket."""
        return self.total.coeff(sigma, l)

    def table(self) -> dict[Key, Fraction]:
        return dict(self.total.items())


def flat_principal(n: int, mu: MultiIndex, m: int) -> XRPolynomial:
    """Flat-interface bracket of Delta(U0 x^mu r^m), valid for any integer m.

    The closed form m(m+1+2*mu_n) persists for m = -1 because the
    2D radial identity only involves m(m+1).
    """
    mu = tuple(mu)
    c: dict[Key, Fraction] = {}

    def add(mmu, mm, val):
        if val == 0:
            return
        if mm < 0 or any(e < 0 for e in mmu):
            raise ValueError(f"flat table produced negative power for mu={mu}, m={m}")
        key = (mmu, mm)
        c[key] = c.get(key, Fraction(0)) + Fraction(val)

    add(mu, m - 1, m * (m + 1 + 2 * mu[n - 1]))
    if mu[n - 1] > 0:
        add(_bump(mu, n - 1, -1), m, mu[n - 1])
    for i in range(n):
        if mu[i] > 1:
            add(_bump(mu, i, -2), m + 1, mu[i] * (mu[i] - 1))
    return XRPolynomial(n, c)


def _exact_bracket(mu: MultiIndex, m: int, jet) -> XRPolynomial:
    """Bracket of Delta(U0 x^mu r^m) with the jet polynomials substituted.

    Uses the pointwise identity (exact once d, nu, Delta d are exact):

      Delta(x^mu r^m U0) = (U0/r) [ sum_i mu_i(mu_i-1) x^(mu-2i) r^(m+1)
          + m(m+1) x^mu r^(m-1)
          + x^mu (r^m/2 + m d r^(m-1)) * (Delta d)
          + (r^m + 2 m d r^(m-1)) * sum_i mu_i nu^i x^(mu-i) ]

    Note the curvature enters through Delta d = -kappa: the parallel
    surfaces of a convex slit edge make U0 strictly superharmonic above
    it, which fixes the sign (checked against finite differences).
    """
    n = jet.n
    mu = tuple(mu)
    out = XRPolynomial.zero(n)
    for i in range(n):
        if mu[i] > 1:
            out = out + XRPolynomial.monomial(n, _bump(mu, i, -2), m + 1, mu[i] * (mu[i] - 1))
    if m * (m + 1) != 0:
        out = out + XRPolynomial.monomial(n, mu, m - 1, m * (m + 1))

    x_mu = XRPolynomial.monomial(n, mu, 0)
    r_m = XRPolynomial.monomial(n, (0,) * n, m)
    delta_d = -jet.kappa  # Delta d = -kappa exactly
    kap_weight = x_mu * Fraction(1, 2) * r_m
    if m != 0:
        kap_weight = kap_weight + x_mu * jet.d * XRPolynomial.monomial(n, (0,) * n, m - 1, m)
    out = out + kap_weight * delta_d

    grad_weight = r_m
    if m != 0:
        grad_weight = grad_weight + jet.d * XRPolynomial.monomial(n, (0,) * n, m - 1, 2 * m)
    for i in range(n):
        if mu[i] > 0:
            out = out + grad_weight * jet.nu[i] * XRPolynomial.monomial(n, _bump(mu, i, -1), 0, mu[i])
    return out


def laplacian_monomial(mu: Iterable[int], m: int, jet, k: int) -> LaplacianResult:
    """Table entry for Delta(U0 x^mu r^m) truncated at bracket degree k."""
    mu = tuple(mu)
    if m < 0:
        raise ValueError("m must be nonnegative here; shifted tables handle m=-1")
    principal = flat_principal(jet.n, mu, m)
    if jet.is_flat:
        return LaplacianResult(principal, XRPolynomial.zero(jet.n), math.inf)
    curved_full = _exact_bracket(mu, m, jet) - principal
    curved = curved_full.truncate(k)
    return LaplacianResult(principal, curved, k + 1)


def laplacian_of_product(P: XRPolynomial, jet, k: int) -> LaplacianResult:
    """Bracket of Delta(U0 * P) by linearity over the monomial table."""
    principal = XRPolynomial.zero(P.n)
    curved = XRPolynomial.zero(P.n)
    rem = math.inf
    for (mu, m), a in P.items():
        res = laplacian_monomial(mu, m, jet, k)
        principal = principal + a * res.principal
        curved = curved + a * res.curved_terms
        rem = min(rem, res.remainder_order)
    return LaplacianResult(principal, curved, rem)


def _indices_upto(n: int, deg: int) -> list[MultiIndex]:
    if n == 1:
        return [(d,) for d in range(deg + 1)]
    out = []
    for d in range(deg + 1):
        for a in range(d + 1):
            out.append((a, d - a))
    return out


def solve_approximating(jet, R: XRPolynomial, k: int,
                        free: Mapping[MultiIndex, object] | None = None) -> XRPolynomial:
    """Degree-(k+1) polynomial P with Delta(U0 P) bracket matching R up to degree k.

    The coefficients a_{mu,0} are free data; unspecified ones default to
    zero.  The remaining coefficients are obtained by sweeping total
    degree upward and, within a degree, the r-power upward: each bracket
    coefficient A_{sigma,l} pins down a_{sigma,l+1} with the strictly
    positive pivot (l+1)(l+2+2 sigma_n).
    """
    n = jet.n
    if R.degree > k:
        raise ValueError("right-hand side degree exceeds k")
    if R.norm() > 1:
        raise ValueError("right-hand side exceeds the unit normalization")
    coeffs: dict[Key, Fraction] = {}
    for mu, v in (free or {}).items():
        mu = tuple(mu)
        f = _frac(v)
        if sum(mu) > k + 1:
            raise ValueError(f"free coefficient {mu} beyond degree k+1")
        if abs(f) > 1:
            raise ValueError("free coefficient exceeds the unit normalization")
        if f != 0:
            coeffs[(mu, 0)] = f

    for deg in range(1, k + 2):
        for l1 in range(1, deg + 1):  # r-power of the coefficient being determined
            l = l1 - 1
            for sigma in _indices_upto(n, deg - l1):
                if sum(sigma) != deg - l1:
                    continue
                partial = XRPolynomial(n, coeffs)
                A = laplacian_of_product(partial, jet, k).coefficient(sigma, l)
                pivot = Fraction((l + 1) * (l + 2 + 2 * sigma[n - 1]))
                if pivot == 0:
                    raise SingularSystem(f"zero pivot at sigma={sigma}, l={l}")
                a = (R.coeff(sigma, l) - A) / pivot
                if a != 0:
                    coeffs[(sigma, l1)] = a
    return XRPolynomial(n, coeffs)
