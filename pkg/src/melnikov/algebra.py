"""Exact weighted-polynomial arithmetic tied to four planar Hamiltonians.

Polynomials live in Q[x, y, H] where H is a formal symbol standing for the
Hamiltonian; x and y carry weight one, H weight two.  For the quartic family
the rewrite of x^4 through H puts any polynomial into a normal form whose
x-exponents do not exceed three.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

Mono = tuple  # (i, j, k): exponents of x, y, H


def _frac(c) -> Fraction:
    return c if isinstance(c, Fraction) else Fraction(c)


class WeightedPoly:
    """Polynomial in x, y and the formal symbol H with exact coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        t = {}
        if terms:
            for mono, c in terms.items():
                c = _frac(c)
                if c != 0:
                    t[tuple(mono)] = c
        self.terms = t

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls) -> "WeightedPoly":
        return cls()

    @classmethod
    def const(cls, c) -> "WeightedPoly":
        return cls({(0, 0, 0): c})

    @classmethod
    def mono(cls, c, i=0, j=0, k=0) -> "WeightedPoly":
        return cls({(i, j, k): c})

    @classmethod
    def var_x(cls):
        return cls.mono(1, i=1)

    @classmethod
    def var_y(cls):
        return cls.mono(1, j=1)

    @classmethod
    def var_h(cls):
        return cls.mono(1, k=1)

    # -- ring operations ---------------------------------------------------
    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = WeightedPoly.const(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, Fraction(0)) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        r = WeightedPoly.__new__(WeightedPoly)
        r.terms = out
        return r

    __radd__ = __add__

    def __neg__(self):
        r = WeightedPoly.__new__(WeightedPoly)
        r.terms = {m: -c for m, c in self.terms.items()}
        return r

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = WeightedPoly.const(other)
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = _frac(other)
            if c == 0:
                return WeightedPoly.zero()
            r = WeightedPoly.__new__(WeightedPoly)
            r.terms = {m: a * c for m, a in self.terms.items()}
            return r
        out = {}
        for (i1, j1, k1), c1 in self.terms.items():
            for (i2, j2, k2), c2 in other.terms.items():
                m = (i1 + i2, j1 + j2, k1 + k2)
                s = out.get(m, Fraction(0)) + c1 * c2
                if s:
                    out[m] = s
                else:
                    out.pop(m, None)
        r = WeightedPoly.__new__(WeightedPoly)
        r.terms = out
        return r

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = WeightedPoly.const(1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = WeightedPoly.const(other)
        return isinstance(other, WeightedPoly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    # -- structure ---------------------------------------------------------
    def weighted_degree(self) -> int:
        """max(i + j + 2k); -1 for the zero polynomial."""
        if not self.terms:
            return -1
        return max(i + j + 2 * k for (i, j, k) in self.terms)

    def max_x_exponent(self) -> int:
        return max((i for (i, _, _) in self.terms), default=0)

    def coefficient(self, i, j, k) -> Fraction:
        return self.terms.get((i, j, k), Fraction(0))

    def dx(self) -> "WeightedPoly":
        """Partial derivative in x, H treated as an independent symbol."""
        return WeightedPoly({(i - 1, j, k): c * i
                             for (i, j, k), c in self.terms.items() if i})

    def dy(self) -> "WeightedPoly":
        return WeightedPoly({(i, j - 1, k): c * j
                             for (i, j, k), c in self.terms.items() if j})

    def dh(self) -> "WeightedPoly":
        return WeightedPoly({(i, j, k - 1): c * k
                             for (i, j, k), c in self.terms.items() if k})

    def y_antiderivative(self) -> "WeightedPoly":
        return WeightedPoly({(i, j + 1, k): c / (j + 1)
                             for (i, j, k), c in self.terms.items()})

    def subst_h(self, h_poly: "WeightedPoly") -> "WeightedPoly":
        """Replace the symbol H by a concrete polynomial in x, y."""
        out = WeightedPoly.zero()
        powers = {0: WeightedPoly.const(1)}
        for (i, j, k), c in sorted(self.terms.items()):
            if k not in powers:
                kk = max(powers)
                p = powers[kk]
                while kk < k:
                    p = p * h_poly
                    kk += 1
                    powers[kk] = p
            out = out + powers[k] * WeightedPoly.mono(c, i, j)
        return out

    def eval_exact(self, x: Fraction, y: Fraction, h: Fraction) -> Fraction:
        acc = Fraction(0)
        for (i, j, k), c in self.terms.items():
            acc += c * x**i * y**j * h**k
        return acc

    def eval_float(self, x: float, y: float, h: float = None) -> float:
        acc = 0.0
        for (i, j, k), c in self.terms.items():
            acc += float(c) * x**i * y**j * (h**k if k else 1.0)
        return acc

    def as_h_poly(self):
        """Coefficients in H for a polynomial free of x and y, low order first."""
        from .upoly import Poly
        ks = [k for (i, j, k) in self.terms]
        if any(i or j for (i, j, k) in self.terms):
            raise ValueError("polynomial depends on x or y")
        coeffs = [Fraction(0)] * ((max(ks) + 1) if ks else 0)
        for (_, _, k), c in self.terms.items():
            coeffs[k] = c
        return Poly(coeffs)

    # -- printing ----------------------------------------------------------
    def sorted_terms(self):
        """Lexicographic in (k, i, j) descending; the canonical print order."""
        return sorted(self.terms.items(), key=lambda t: (t[0][2], t[0][0], t[0][1]),
                      reverse=True)

    def canonical(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (i, j, k), c in self.sorted_terms():
            body = "".join((f"x^{i} " if i > 1 else "x " if i == 1 else "",
                            f"y^{j} " if j > 1 else "y " if j == 1 else "",
                            f"H^{k} " if k > 1 else "H " if k == 1 else "")).strip()
            cs = f"{c.numerator}/{c.denominator}" if c.denominator != 1 else str(c.numerator)
            parts.append(f"{cs} {body}".strip() if body else cs)
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self):
        return f"WeightedPoly({self.canonical()})"


@dataclass(frozen=True)
class OneForm:
    """A dx + B dy with WeightedPoly coefficients."""

    a: WeightedPoly
    b: WeightedPoly

    @classmethod
    def zero(cls):
        return cls(WeightedPoly.zero(), WeightedPoly.zero())

    def __add__(self, other):
        return OneForm(self.a + other.a, self.b + other.b)

    def __sub__(self, other):
        return OneForm(self.a - other.a, self.b - other.b)

    def __neg__(self):
        return OneForm(-self.a, -self.b)

    def scale(self, c):
        return OneForm(self.a * c, self.b * c)

    def mul_poly(self, p: WeightedPoly):
        return OneForm(p * self.a, p * self.b)

    def is_zero(self):
        return self.a.is_zero() and self.b.is_zero()

    def weighted_degree(self) -> int:
        return max(self.a.weighted_degree(), self.b.weighted_degree())

    def canonical(self) -> str:
        return f"({self.a.canonical()}) dx + ({self.b.canonical()}) dy"

    def __repr__(self):
        return f"OneForm({self.canonical()})"


def sigma(k: int) -> OneForm:
    """The moment one-form x^k y dx."""
    return OneForm(WeightedPoly.mono(1, i=k, j=1), WeightedPoly.zero())


# ---------------------------------------------------------------------------
# Hamiltonian data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HamiltonianSpec:
    """One of the four concrete Hamiltonians with its reduction data.

    For the quartic family the defining polynomial is
    H = y^2/2 + s (x^2 - e)^2 / 4 and the induced rewrite reads
    x^4 = 2 e x^2 - e^2 + (4 H - 2 y^2)/s.  The cubic triangle Hamiltonian
    carries no x^4 rewrite.
    """

    name: str
    kind: str                     # "quartic" or "cubic"
    h_poly: WeightedPoly          # expanded H(x, y), no H symbol
    s: int | None                 # sign of the quartic term
    e: int | None                 # well offset of the quartic
    critical_values: tuple
    annuli: tuple                 # mapping name -> (lo, hi) handled below
    sigma_intervals: dict

    def x4_rewrite(self) -> WeightedPoly:
        if self.kind != "quartic":
            raise ValueError(f"{self.name} has no x^4 normal-form rewrite")
        s, e = self.s, self.e
        return (WeightedPoly.mono(2 * e, i=2) + WeightedPoly.const(-e * e)
                + WeightedPoly.mono(Fraction(4, s), k=1)
                + WeightedPoly.mono(Fraction(-2, s), j=2))

    def g0(self) -> WeightedPoly:
        """The polynomial (x^2 - e) y / 4 closing x y dx = dG0 + H dphi."""
        if self.kind != "quartic":
            raise ValueError(f"{self.name} has no phi closure")
        return WeightedPoly({(2, 1, 0): Fraction(1, 4), (0, 1, 0): Fraction(-self.e, 4)})

    def grad(self):
        return self.h_poly.dx(), self.h_poly.dy()

    def is_exterior(self, annulus: str) -> bool:
        return self.sigma_intervals[annulus][2] == "exterior"

    def sigma_range(self, annulus: str):
        lo, hi, _ = self.sigma_intervals[annulus]
        return lo, hi


def _build_quartic(name, s, e):
    # H = y^2/2 + s (x^2 - e)^2 / 4
    u = WeightedPoly.mono(1, i=2) + WeightedPoly.const(-e)
    h = WeightedPoly.mono(Fraction(1, 2), j=2) + u * u * Fraction(s, 4)
    return h


_INF = math.inf

EIGHT_LOOP = HamiltonianSpec(
    name="eight-loop", kind="quartic",
    h_poly=_build_quartic("eight-loop", 1, 1), s=1, e=1,
    critical_values=(Fraction(0), Fraction(1, 4)),
    annuli=("interior_left", "interior_right", "exterior"),
    sigma_intervals={
        "interior_left": (0.0, 0.25, "interior"),
        "interior_right": (0.0, 0.25, "interior"),
        "exterior": (0.25, _INF, "exterior"),
    },
)

DOUBLE_HETEROCLINIC = HamiltonianSpec(
    name="double-heteroclinic", kind="quartic",
    h_poly=_build_quartic("double-heteroclinic", -1, 1), s=-1, e=1,
    critical_values=(Fraction(-1, 4), Fraction(0)),
    annuli=("main",),
    sigma_intervals={"main": (-0.25, 0.0, "exterior")},
)

GLOBAL_CENTER = HamiltonianSpec(
    name="global-center", kind="quartic",
    h_poly=_build_quartic("global-center", 1, -1), s=1, e=-1,
    critical_values=(Fraction(1, 4),),
    annuli=("main",),
    sigma_intervals={"main": (0.25, _INF, "exterior")},
)

# f = x (y^2 - (x-3)^2) = x y^2 - x^3 + 6 x^2 - 9 x
D4_TRIANGLE = HamiltonianSpec(
    name="d4-triangle", kind="cubic",
    h_poly=WeightedPoly({(1, 2, 0): 1, (3, 0, 0): -1, (2, 0, 0): 6, (1, 0, 0): -9}),
    s=None, e=None,
    critical_values=(Fraction(-4), Fraction(0)),
    annuli=("main",),
    sigma_intervals={"main": (-4.0, 0.0, "interior")},
)

SPECS = {s.name: s for s in (EIGHT_LOOP, DOUBLE_HETEROCLINIC, GLOBAL_CENTER, D4_TRIANGLE)}


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def normal_form(p: WeightedPoly, spec: HamiltonianSpec) -> WeightedPoly:
    """Rewrite x-powers above three through H; idempotent.

    Preserves the polynomial as a function on the plane once H is expanded.
    """
    rw = spec.x4_rewrite()  # raises for the cubic Hamiltonian
    out = WeightedPoly.zero()
    work = dict(p.terms)
    while work:
        (i, j, k), c = work.popitem()
        if i <= 3:
            out = out + WeightedPoly.mono(c, i, j, k)
            continue
        rest = WeightedPoly.mono(c, i - 4, j, k) * rw
        for m, cc in rest.terms.items():
            s = work.get(m, Fraction(0)) + cc
            if s:
                work[m] = s
            else:
                work.pop(m, None)
    return out


def normal_form_form(w: OneForm, spec: HamiltonianSpec) -> OneForm:
    return OneForm(normal_form(w.a, spec), normal_form(w.b, spec))


def d(g: WeightedPoly, spec: HamiltonianSpec) -> OneForm:
    """Exterior derivative of g with H expanded to the concrete Hamiltonian."""
    ge = g.subst_h(spec.h_poly)
    return OneForm(ge.dx(), ge.dy())


def wedge_with_dh(w: OneForm, spec: HamiltonianSpec) -> WeightedPoly:
    """Coefficient c in dH wedge w = c dx wedge dy."""
    hx, hy = spec.grad()
    a = w.a.subst_h(spec.h_poly)
    b = w.b.subst_h(spec.h_poly)
    return hx * b - hy * a
