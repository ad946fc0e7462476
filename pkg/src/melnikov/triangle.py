"""The cubic triangle Hamiltonian: log-extended chain, moments, Fuchsian ODE.

Everything here is specialized to f = x(y^2 - (x-3)^2) and its bounded oval
family.  The extension ring is generated over Laurent polynomials in x and f
by two logarithms: L = ln((3-x-y)/(3-x+y)), whose differential satisfies
f dL = 2xy dx + (6x - 2x^2) dy, and X = ln x.  On the level set f = t the
periods of x^m y dx (written I_m) obey a four-term recursion, the two lowest
log moments combine into the single new period int y (x-1) ln x dx, and the
generating functions of quadratic perturbations with two vanishing orders
land in the span of I_-1, I_0 and that log period.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .algebra import OneForm
from .reduction import ShapeError
from .upoly import Poly, RatFn, normalize_coeff_vector, poly_gcd, ratfn_nullvector

# df = FX dx + FY dy for f = x y^2 - x^3 + 6 x^2 - 9 x
_FX = {(0, 2): Fraction(1), (2, 0): Fraction(-3), (1, 0): Fraction(12), (0, 0): Fraction(-9)}
_FY = {(1, 1): Fraction(2)}
# f dL = WL_X dx + WL_Y dy
_WLX = {(1, 1): Fraction(2)}
_WLY = {(1, 0): Fraction(6), (2, 0): Fraction(-2)}
# f itself as an x,y-polynomial dict
_F = {(1, 2): Fraction(1), (3, 0): Fraction(-1), (2, 0): Fraction(6), (1, 0): Fraction(-9)}


def _xy_add(dst, m, j, c):
    if c == 0:
        return
    key = (m, j)
    s = dst.get(key, Fraction(0)) + c
    if s:
        dst[key] = s
    else:
        dst.pop(key, None)


def _xy_mul(a, b):
    out = {}
    for (m1, j1), c1 in a.items():
        for (m2, j2), c2 in b.items():
            _xy_add(out, m1 + m2, j1 + j2, c1 * c2)
    return out


def _f_power(p: int):
    out = {(0, 0): Fraction(1)}
    for _ in range(p):
        out = _xy_mul(out, _F)
    return out


def _divide_by_f(poly):
    """Exact division by f in Q[x, 1/x][y]; returns quotient or None."""
    rem = dict(poly)
    quot = {}
    # f = x y^2 + c(x) with c = -x^3 + 6x^2 - 9x; leading y-term x y^2
    while rem:
        (m, j) = max(rem, key=lambda k: (k[1], k[0]))
        if j < 2:
            return None
        c = rem[(m, j)]
        qm, qj = m - 1, j - 2
        quot[(qm, qj)] = c
        for (fm, fj), fc in _F.items():
            _xy_add(rem, qm + fm, qj + fj, -c * fc)
    return quot


class D4Elem:
    """Element of the extension ring: sum L^a X^b f^p * (x-Laurent, y >= 0)."""

    __slots__ = ("parts",)

    def __init__(self, parts=None):
        self.parts = {}
        if parts:
            for key, xy in parts.items():
                for (m, j), c in xy.items():
                    self.add_term(*key, m, j, c)

    def add_term(self, a, b, p, m, j, c):
        if c == 0:
            return
        d = self.parts.setdefault((a, b, p), {})
        _xy_add(d, m, j, c)
        if not d:
            self.parts.pop((a, b, p), None)

    @classmethod
    def zero(cls):
        return cls()

    def is_zero(self):
        return not self.parts

    def normalized(self) -> "D4Elem":
        """Expand positive f-prefactors; cancel f against negative ones."""
        out = D4Elem()
        for (a, b, p), xy in self.parts.items():
            if p > 0:
                expanded = _xy_mul(xy, _f_power(p))
                for (m, j), c in expanded.items():
                    out.add_term(a, b, 0, m, j, c)
            elif p < 0:
                cur = dict(xy)
                while p < 0:
                    q = _divide_by_f(cur)
                    if q is None:
                        break
                    cur = q
                    p += 1
                for (m, j), c in cur.items():
                    out.add_term(a, b, p, m, j, c)
            else:
                for (m, j), c in xy.items():
                    out.add_term(a, b, 0, m, j, c)
        return out

    def __eq__(self, other):
        return isinstance(other, D4Elem) and self.normalized().parts == other.normalized().parts

    def __add__(self, other):
        out = D4Elem()
        for src in (self, other):
            for (a, b, p), xy in src.parts.items():
                for (m, j), c in xy.items():
                    out.add_term(a, b, p, m, j, c)
        return out

    def __neg__(self):
        out = D4Elem()
        for (a, b, p), xy in self.parts.items():
            for (m, j), c in xy.items():
                out.add_term(a, b, p, m, j, -c)
        return out

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        out = D4Elem()
        for (a1, b1, p1), xy1 in self.parts.items():
            for (a2, b2, p2), xy2 in other.parts.items():
                prod = _xy_mul(xy1, xy2)
                for (m, j), c in prod.items():
                    out.add_term(a1 + a2, b1 + b2, p1 + p2, m, j, c)
        return out

    def max_l(self):
        return max((a for (a, _, _) in self.parts), default=0)

    def max_f_pole(self):
        return max((-p for (_, _, p) in self.parts), default=0)

    def subst_l_shift(self, c: Fraction) -> "D4Elem":
        """Replace the log generator L by L + c (an exact rational shift)."""
        from math import comb
        out = D4Elem()
        for (a, b, p), xy in self.parts.items():
            for r in range(a + 1):
                coef = comb(a, r) * c ** (a - r)
                for (m, j), cc in xy.items():
                    out.add_term(r, b, p, m, j, cc * coef)
        return out

    def canonical(self) -> str:
        if not self.parts:
            return "0"
        chunks = []
        for (a, b, p) in sorted(self.parts, reverse=True):
            xy = self.parts[(a, b, p)]
            head = ""
            if a:
                head += f"L^{a} " if a > 1 else "L "
            if b:
                head += f"lnx^{b} " if b > 1 else "lnx "
            if p:
                head += f"f^{p} " if p != 1 else "f "
            terms = []
            for (m, j) in sorted(xy, reverse=True):
                c = xy[(m, j)]
                body = ""
                if m:
                    body += f"x^{m} " if m != 1 else "x "
                if j:
                    body += f"y^{j} " if j != 1 else "y "
                cs = f"{c.numerator}/{c.denominator}" if c.denominator != 1 else str(c.numerator)
                terms.append(f"{cs} {body}".strip())
            chunks.append((head + "(" + " + ".join(terms).replace("+ -", "- ") + ")").strip())
        return " + ".join(chunks)

    def __repr__(self):
        return f"D4Elem({self.canonical()})"


def d4elem_from_poly(poly_xy) -> D4Elem:
    e = D4Elem()
    for (m, j), c in poly_xy.items():
        e.add_term(0, 0, 0, m, j, c)
    return e


# ---------------------------------------------------------------------------
# The reducer
# ---------------------------------------------------------------------------

@dataclass
class D4Reduction:
    exact: D4Elem
    df_coeff: D4Elem
    residue: dict       # (a, b, p, m) -> coeff, with m in {-1, 0, 1}, of x^m y dx


class D4Reducer:
    """Rewrites extension-ring one-forms into d(exact) + q df + residue.

    The residue is canonical: only x^m y dx with m in {-1, 0, 1}, possibly
    multiplied by prefactors L^a X^b f^p.  Everything else is absorbed by
    the y-peel x y^2 = f + x (x-3)^2, the moment rewrite derived from
    d(x^k y^3) together with the df route for y^2 dy, and the logarithmic
    primitives of 1/x.
    """

    MAX_ROUNDS = 200_000

    def run(self, items) -> D4Reduction:
        """items: {(a, b, p): (xy_dx, xy_dy)} with xy dicts {(m, j): c}."""
        self.dx = {}
        self.dy = {}
        self.Q = D4Elem()
        self.q = D4Elem()
        self.res = {}
        for (key, (adx, ady)) in items.items():
            for (m, j), c in adx.items():
                self._push(self.dx, key, m, j, c)
            for (m, j), c in ady.items():
                self._push(self.dy, key, m, j, c)
        rounds = 0
        while self.dx or self.dy:
            key = max(list(self.dx) + list(self.dy))
            xy = self.dy.pop(key, None)
            if xy:
                self._move_dy(key, xy)
            xy = self.dx.pop(key, None)
            if xy:
                self._move_dx(key, xy)
            rounds += 1
            if rounds > self.MAX_ROUNDS:
                raise ShapeError("triangle reducer failed to terminate")
        return D4Reduction(exact=self.Q, df_coeff=self.q, residue=dict(self.res))

    @staticmethod
    def _push(buckets, key, m, j, c):
        if c == 0:
            return
        d = buckets.setdefault(key, {})
        _xy_add(d, m, j, c)
        if not d:
            buckets.pop(key, None)

    def _push_dict(self, buckets, key, xy, scale=Fraction(1)):
        for (m, j), c in xy.items():
            self._push(buckets, key, m, j, c * scale)

    def _emit_d(self, key, u_xy, scale=Fraction(1)):
        """pi dU = d(pi U) - U d(pi) with pi = L^a X^b f^p."""
        a, b, p = key
        for (m, j), c in u_xy.items():
            self.Q.add_term(a, b, p, m, j, c * scale)
        if a:
            # dL = f^{-1} (2xy dx + (6x - 2x^2) dy)
            k2 = (a - 1, b, p - 1)
            self._push_dict(self.dx, k2, _xy_mul(u_xy, _WLX), -a * scale)
            self._push_dict(self.dy, k2, _xy_mul(u_xy, _WLY), -a * scale)
        if b:
            k2 = (a, b - 1, p)
            self._push_dict(self.dx, k2, {(m - 1, j): c for (m, j), c in u_xy.items()},
                            -b * scale)
        if p:
            for (m, j), c in u_xy.items():
                self.q.add_term(a, b, p - 1, m, j, -p * c * scale)

    def _move_dy(self, key, xy):
        prim = {}
        px = {}
        for (m, j), c in xy.items():
            _xy_add(prim, m, j + 1, c / (j + 1))
            if m:
                _xy_add(px, m - 1, j + 1, c * Fraction(m, j + 1))
        self._emit_d(key, prim)
        self._push_dict(self.dx, key, px, Fraction(-1))

    def _move_dx(self, key, xy):
        a, b, p = key
        for (m, j), c in xy.items():
            if j >= 2:
                # x^m y^j = f x^(m-1) y^(j-2) + x^m (x-3)^2 y^(j-2)
                self._push(self.dx, (a, b, p + 1), m - 1, j - 2, c)
                self._push(self.dx, key, m + 2, j - 2, c)
                self._push(self.dx, key, m + 1, j - 2, -6 * c)
                self._push(self.dx, key, m, j - 2, 9 * c)
            elif j == 0:
                if m != -1:
                    self._emit_d(key, {(m + 1, 0): c / (m + 1)})
                else:
                    # primitive is the logarithm of x
                    denom = 1 + b
                    self.Q.add_term(a, b + 1, p, 0, 0, c / denom)
                    if a:
                        k2 = (a - 1, b + 1, p - 1)
                        self._push_dict(self.dx, k2, _WLX, -Fraction(a, denom) * c)
                        self._push_dict(self.dy, k2, _WLY, -Fraction(a, denom) * c)
                    if p:
                        self.q.add_term(a, b + 1, p - 1, 0, 0, -Fraction(p, denom) * c)
            else:  # j == 1
                if -1 <= m <= 1:
                    keyr = (a, b, p, m)
                    cur = self.res.get(keyr, Fraction(0)) + c
                    if cur:
                        self.res[keyr] = cur
                    else:
                        self.res.pop(keyr, None)
                elif m >= 2:
                    # moment rewrite at k = m - 1 (division by 2k + 6)
                    k = m - 1
                    den = Fraction(2 * k + 6)
                    self._push(self.dx, key, k, 1, c * Fraction(12 * k + 18) / den)
                    self._push(self.dx, key, k - 1, 1, -c * Fraction(18 * k) / den)
                    self._push(self.dx, (a, b, p + 1), k - 2, 1, -c * Fraction(2 * k - 3) / den)
                    self._emit_d(key, {(k, 3): 2 * c / den})
                    self.q.add_term(a, b, p, k - 1, 1, -3 * c / den)
                else:
                    # m <= -2: same rewrite solved for the f-weighted term,
                    # k = m + 2, so the division is by 2k - 3 (never zero)
                    k = m + 2
                    den = Fraction(2 * k - 3)
                    k2 = (a, b, p - 1)
                    self._push(self.dx, k2, k + 1, 1, -c * Fraction(2 * k + 6) / den)
                    self._push(self.dx, k2, k, 1, c * Fraction(12 * k + 18) / den)
                    self._push(self.dx, k2, k - 1, 1, -c * Fraction(18 * k) / den)
                    self._emit_d((a, b, p - 1), {(k, 3): 2 * c / den})
                    self.q.add_term(a, b, p - 1, k - 1, 1, -3 * c / den)

    # -- residue conversion ---------------------------------------------------

    def _queue_conversion(self, a, p, r1):
        """Queue the identity (x-1) y dx = d(x^2 y/3 - x y) + (1/6) f dL
        multiplied by the prefactor L^a f^p with coefficient r1."""
        w = {(2, 1): Fraction(1, 3), (1, 1): Fraction(-1)}
        self._emit_d((a, 0, p), w, r1)
        # (1/6) L^a f^(p+1) dL
        den = Fraction(6 * (a + 1))
        self.Q.add_term(a + 1, 0, p + 1, 0, 0, r1 / den)
        self.q.add_term(a + 1, 0, p, 0, 0, -(p + 1) * r1 / den)

    def convert_balanced(self):
        """Repeatedly absorb balanced log-free residue slots into d() + q df.

        A slot (a, 0, p) is balanced when it has no x^{-1} y term and
        opposite coefficients on y dx and x y dx; the combination
        (x-1) y dx has identically vanishing periods (the two lowest
        moments agree) and converts exactly.  Slots carrying ln x are left
        alone: the same combination against ln x IS the new period and is
        not relatively exact.  Conversions spawn new work, so reduce and
        rescan until no balanced slot remains.
        """
        for _ in range(64):
            slots = sorted({(a, b, p) for (a, b, p, m) in self.res if b == 0})
            queued = False
            for (a, b, p) in slots:
                rm1 = self.res.get((a, b, p, -1), Fraction(0))
                r0 = self.res.get((a, b, p, 0), Fraction(0))
                r1 = self.res.get((a, b, p, 1), Fraction(0))
                if rm1 == 0 and r1 != 0 and r0 + r1 == 0:
                    self.res.pop((a, b, p, 0), None)
                    self.res.pop((a, b, p, 1), None)
                    self._queue_conversion(a, p, r1)
                    queued = True
            if not queued:
                return
            rounds = 0
            while self.dx or self.dy:
                key = max(list(self.dx) + list(self.dy))
                xy = self.dy.pop(key, None)
                if xy:
                    self._move_dy(key, xy)
                xy = self.dx.pop(key, None)
                if xy:
                    self._move_dx(key, xy)
                rounds += 1
                if rounds > self.MAX_ROUNDS:
                    raise ShapeError("triangle conversion failed to terminate")
        raise ShapeError("balanced-residue conversion did not stabilize")


def reduce_full(items) -> D4Reduction:
    """Reduce and then absorb every balanced residue combination."""
    red = D4Reducer()
    out = red.run(items)
    red.convert_balanced()
    return D4Reduction(exact=red.Q, df_coeff=red.q, residue=dict(red.res))


# ---------------------------------------------------------------------------
# Period values: I_m, K_m and the log period
# ---------------------------------------------------------------------------

@dataclass
class D4Periods:
    """Value of a cycle integral as Laurent data over the basis periods.

    Each field maps an integer f-power p to the rational coefficient of
    t^p multiplying the basis period: i_m1 ~ int y dx / x, i0 ~ int y dx,
    istar ~ int y (x-1) ln x dx.
    """
    i_m1: dict
    i0: dict
    istar: dict

    def is_zero(self):
        return not (self.i_m1 or self.i0 or self.istar)

    def eval(self, t, I_m1, I0, Istar):
        out = 0.0
        for p, c in self.i_m1.items():
            out += float(c) * t**p * I_m1
        for p, c in self.i0.items():
            out += float(c) * t**p * I0
        for p, c in self.istar.items():
            out += float(c) * t**p * Istar
        return out


def _lau_add(d, p, c):
    if c == 0:
        return
    s = d.get(p, Fraction(0)) + c
    if s:
        d[p] = s
    else:
        d.pop(p, None)


def periods_of_residue(residue) -> D4Periods:
    """Integrate a canonical residue over the oval family.

    The reflection y -> -y maps the oval onto itself reversing orientation
    and sends L to -L while fixing ln x, so a form L^a (...) y dx with odd
    a is even under the reflection and its period vanishes.  Even positive
    powers of L carry no such argument and must have been converted away
    before calling this.  Pure log-x moments must combine into the single
    basis period, which is asserted here.
    """
    i_m1, i0, istar = {}, {}, {}
    k_lau = {}
    for (a, b, p, m), c in residue.items():
        if a >= 1:
            if a % 2 == 1:
                continue  # odd L power: zero by the symmetry of the oval
            raise ShapeError("even positive power of L in a period residue")
        if b == 0:
            if m == -1:
                _lau_add(i_m1, p, c)
            else:
                _lau_add(i0, p, c)  # both I_0 and I_1 integrate to I_0
        elif b == 1:
            _lau_add(k_lau, (p, m), c)
        else:
            raise ShapeError("log-x power above one in a period residue")
    # the log moments must enter through (x - 1) y ln x dx
    ps = {p for (p, _) in k_lau}
    for p in ps:
        s_m1 = k_lau.get((p, -1), Fraction(0))
        s0 = k_lau.get((p, 0), Fraction(0))
        s1 = k_lau.get((p, 1), Fraction(0))
        if s_m1 != 0 or s0 + s1 != 0:
            raise ShapeError("log moments outside the basis combination")
        _lau_add(istar, p, s1)
    return D4Periods(i_m1=i_m1, i0=i0, istar=istar)


# ---------------------------------------------------------------------------
# Moment reduction (public symbolic operation)
# ---------------------------------------------------------------------------

def d4_reduce_moments(expr: dict) -> dict:
    """Reduce {('I', m) | ('Istar',): RatFn} to the basis I_-1, I_0, I_2, I_*.

    Uses the equality of the two lowest moments and the four-term recursion
    (2k+6) I_(k+1) = (12k+18) I_k - 18k I_(k-1) - (2k-3) t I_(k-2).
    """
    t = RatFn(Poly([0, 1]))
    work = {}
    for key, val in expr.items():
        if not isinstance(val, RatFn):
            val = RatFn(val) if isinstance(val, Poly) else RatFn.const(val)
        work[key] = work.get(key, RatFn.const(0)) + val
    out = {}

    def add(key, val):
        out[key] = out.get(key, RatFn.const(0)) + val

    guard = 0
    while work:
        key, val = work.popitem()
        if val.is_zero():
            continue
        guard += 1
        if guard > 10_000:
            raise ShapeError("moment reduction failed to terminate")
        if key == ("Istar",):
            add(key, val)
            continue
        m = key[1]
        if m in (-1, 0, 2):
            add(key, val)
        elif m == 1:
            work[("I", 0)] = work.get(("I", 0), RatFn.const(0)) + val
        elif m >= 3:
            k = m - 1
            den = Fraction(2 * k + 6)
            for mm, coef in (((k), RatFn.const(Fraction(12 * k + 18) / den)),
                             ((k - 1), RatFn.const(Fraction(-18 * k) / den)),
                             ((k - 2), t * RatFn.const(Fraction(-(2 * k - 3)) / den))):
                work[("I", mm)] = work.get(("I", mm), RatFn.const(0)) + val * coef
        else:  # m <= -2
            k = m + 2
            den = RatFn.const(Fraction(2 * k - 3)) * t
            for mm, coef in (((k + 1), RatFn.const(Fraction(-(2 * k + 6)))),
                             ((k), RatFn.const(Fraction(12 * k + 18))),
                             ((k - 1), RatFn.const(Fraction(-18 * k)))):
                work[("I", mm)] = work.get(("I", mm), RatFn.const(0)) + val * coef / den
    return {k: v for k, v in out.items() if not v.is_zero()}


# ---------------------------------------------------------------------------
# The chain for quadratic perturbations
# ---------------------------------------------------------------------------

class D4ChainError(RuntimeError):
    def __init__(self, message, periods=None):
        super().__init__(message)
        self.periods = periods


@dataclass
class D4GenFn:
    """Third-order generating function of a quadratic triangle perturbation.

    M_3(t) = c_m1 * int y dx/x + (c0 + c1/t) * int y dx
             + (cstar / t) * int y (x-1) ln x dx.
    """
    c_m1: Fraction
    c0: Fraction
    c1: Fraction
    cstar: Fraction

    def abgd(self):
        """(alpha, beta, gamma, delta) with t M3 = (alpha + beta t) I0 + gamma I2 + delta I*.

        The translation eliminates the lowest moment through
        t I_-1 = 8 I_2 - 12 I_0.
        """
        return (self.c1 - 12 * self.c_m1, self.c0, 8 * self.c_m1, self.cstar)

    @classmethod
    def from_abgd(cls, alpha, beta, gamma, delta):
        c_m1 = Fraction(gamma) / 8
        return cls(c_m1=c_m1, c0=Fraction(beta), c1=Fraction(alpha) + 12 * c_m1,
                   cstar=Fraction(delta))

    def is_zero(self):
        return not (self.c_m1 or self.c0 or self.c1 or self.cstar)

    def to_json(self):
        return {"c_m1": str(self.c_m1), "c0": str(self.c0),
                "c1": str(self.c1), "cstar": str(self.cstar)}


@dataclass
class D4ChainResult:
    q1: D4Elem
    q2: D4Elem
    Q1: D4Elem
    Q2: D4Elem
    m3: D4GenFn
    integrable: bool
    omega3_residue: dict


def _form_to_items(w: OneForm):
    adx, ady = {}, {}
    for (i, j, k), c in w.a.terms.items():
        if k:
            raise ValueError("triangle perturbations must be polynomial in x, y")
        _xy_add(adx, i, j, c)
    for (i, j, k), c in w.b.terms.items():
        if k:
            raise ValueError("triangle perturbations must be polynomial in x, y")
        _xy_add(ady, i, j, c)
    return {(0, 0, 0): (adx, ady)}


def _elem_times_form(q: D4Elem, w_items) -> dict:
    items = {}
    (adx, ady) = w_items[(0, 0, 0)]
    for (a, b, p), xy in q.parts.items():
        key = (a, b, p)
        slot = items.setdefault(key, ({}, {}))
        for (m, j), c in _xy_mul(xy, adx).items():
            _xy_add(slot[0], m, j, c)
        for (m, j), c in _xy_mul(xy, ady).items():
            _xy_add(slot[1], m, j, c)
    return {k: v for k, v in items.items() if v[0] or v[1]}


def _genfn_from_periods(per: D4Periods) -> D4GenFn:
    def pick(lau, allowed):
        bad = {p for p in lau if p not in allowed}
        if bad:
            raise ShapeError(f"t-powers {sorted(bad)} outside the expected shape")
        return {p: lau[p] for p in lau}

    a = pick(per.i_m1, {0})
    b = pick(per.i0, {0, -1})
    s = pick(per.istar, {-1})
    return D4GenFn(c_m1=a.get(0, Fraction(0)),
                   c0=b.get(0, Fraction(0)),
                   c1=b.get(-1, Fraction(0)),
                   cstar=s.get(-1, Fraction(0)))


def d4_chain(w: OneForm, check: bool = True) -> D4ChainResult:
    """Run the three-step chain for a quadratic perturbation of the triangle.

    Requires the first two generating functions to vanish identically; the
    call verifies this and raises D4ChainError with the offending residue
    otherwise.  For an exact perturbation every step vanishes and the
    result is flagged integrable.
    """
    if w.weighted_degree() > 2:
        raise ValueError("the triangle engine is specialized to quadratic one-forms")
    items1 = _form_to_items(w)
    red1 = reduce_full(items1)
    if check:
        _check_d4_reconstruction(items1, red1)
    per1 = periods_of_residue(red1.residue)
    if not per1.is_zero():
        raise D4ChainError("M1 nonzero", periods=per1)
    if red1.residue:
        raise ShapeError("vanishing first step left an unconvertible residue")
    q1, Q1 = red1.df_coeff.normalized(), red1.exact.normalized()
    if check and (q1.max_l() > 1 or q1.max_f_pole() > 0):
        raise ShapeError("q1 outside the expected log/pole pattern")

    items2 = _elem_times_form(q1, items1)
    red2 = reduce_full(items2)
    if check:
        _check_d4_reconstruction(items2, red2)
    per2 = periods_of_residue(red2.residue)
    if not per2.is_zero():
        raise D4ChainError("M2 nonzero", periods=per2)
    if red2.residue:
        raise ShapeError("vanishing second step left an unconvertible residue")
    q2, Q2 = red2.df_coeff.normalized(), red2.exact.normalized()
    if check:
        if q2.max_l() > 2 or q2.max_f_pole() > 1:
            raise ShapeError("q2 outside the expected log/pole pattern")

    items3 = _elem_times_form(q2, items1)
    red3 = reduce_full(items3)
    if check:
        _check_d4_reconstruction(items3, red3)
    per3 = periods_of_residue(red3.residue)
    m3 = _genfn_from_periods(per3)
    return D4ChainResult(q1=q1, q2=q2, Q1=Q1, Q2=Q2, m3=m3,
                         integrable=m3.is_zero(), omega3_residue=red3.residue)


# ---------------------------------------------------------------------------
# Exact reconstruction oracle for the triangle reducer
# ---------------------------------------------------------------------------

def _check_d4_reconstruction(items, red: D4Reduction):
    """d(exact) + q df + residue must reproduce the input exactly."""
    contrib = {}  # (a, b) -> (dx xy-laurent, dy xy-laurent) pending f-clearing

    def emit(a, b, p, xy_dx, xy_dy, scale=Fraction(1)):
        slot = contrib.setdefault((a, b), {})
        for (m, j), c in xy_dx.items():
            key = ("dx", p, m, j)
            s = slot.get(key, Fraction(0)) + c * scale
            if s:
                slot[key] = s
            else:
                slot.pop(key, None)
        for (m, j), c in xy_dy.items():
            key = ("dy", p, m, j)
            s = slot.get(key, Fraction(0)) + c * scale
            if s:
                slot[key] = s
            else:
                slot.pop(key, None)

    for (a, b, p), xy in red.exact.parts.items():
        du_dx, du_dy = {}, {}
        for (m, j), c in xy.items():
            if m:
                _xy_add(du_dx, m - 1, j, c * m)
            if j:
                _xy_add(du_dy, m, j - 1, c * j)
        emit(a, b, p, du_dx, du_dy)
        if a:
            emit(a - 1, b, p - 1, _xy_mul(xy, _WLX), _xy_mul(xy, _WLY), Fraction(a))
        if b:
            emit(a, b - 1, p, {(m - 1, j): c * b for (m, j), c in xy.items()}, {})
        if p:
            emit(a, b, p - 1, _xy_mul(xy, _FX), _xy_mul(xy, _FY), Fraction(p))
    for (a, b, p), xy in red.df_coeff.parts.items():
        emit(a, b, p, _xy_mul(xy, _FX), _xy_mul(xy, _FY))
    for (a, b, p, m), c in red.residue.items():
        emit(a, b, p, {(m, 1): c}, {})
    for (a, b, p), (adx, ady) in items.items():
        emit(a, b, p, adx, ady, Fraction(-1))

    for (a, b), slot in contrib.items():
        if not slot:
            continue
        # clear f- and x-poles and compare as honest polynomials
        min_p = min(k[1] for k in slot)
        acc_dx, acc_dy = {}, {}
        for (kind, p, m, j), c in slot.items():
            lifted = _xy_mul({(m, j): c}, _f_power(p - min_p))
            tgt = acc_dx if kind == "dx" else acc_dy
            for key, cc in lifted.items():
                _xy_add(tgt, key[0], key[1], cc)
        if acc_dx or acc_dy:
            raise ShapeError(
                f"triangle reduction does not reconstruct its input at level L^{a} lnx^{b}")


# ---------------------------------------------------------------------------
# Fuchsian equation machinery
# ---------------------------------------------------------------------------

def pf_matrix():
    """Matrix A with (I*, I2, I0)^T = A d/dt (I*, I2, I0)^T."""
    t = Poly([0, 1])
    return [
        [RatFn(t), RatFn.const(-2), RatFn(t + Poly.const(6))],
        [RatFn.const(0), RatFn(Fraction(3, 4) * (t - Poly.const(6))),
         RatFn(Fraction(3, 2) * (t + Poly.const(9)))],
        [RatFn.const(0), RatFn.const(-3), RatFn(Fraction(3, 2) * (t + Poly.const(6)))],
    ]


def _mat_inv3(A):
    def det2(a, b, c, d):
        return a * d - b * c
    cof = [[None] * 3 for _ in range(3)]
    idx = [0, 1, 2]
    for i in range(3):
        for j in range(3):
            rows = [r for r in idx if r != i]
            cols = [c for c in idx if c != j]
            m = det2(A[rows[0]][cols[0]], A[rows[0]][cols[1]],
                     A[rows[1]][cols[0]], A[rows[1]][cols[1]])
            cof[i][j] = m if (i + j) % 2 == 0 else -m
    det = A[0][0] * cof[0][0] + A[0][1] * cof[0][1] + A[0][2] * cof[0][2]
    return [[cof[j][i] / det for j in range(3)] for i in range(3)]


def _row_step(v, Ainv):
    """v -> v' + v A^{-1} (the derivative of v . I using I' = A^{-1} I)."""
    out = []
    for j in range(3):
        acc = v[j].derivative()
        for i in range(3):
            acc = acc + v[i] * Ainv[i][j]
        out.append(acc)
    return out


@dataclass
class FuchsOde:
    """Linear ODE sum a_i(t) y^(i) = 0 with exact polynomial coefficients."""
    order: int
    coeffs: list       # [a_0, ..., a_n] as Poly
    singular_points: list

    def normalized(self) -> "FuchsOde":
        polys = list(self.coeffs)
        g = None
        for p in polys:
            if p.is_zero():
                continue
            g = p if g is None else poly_gcd(g, p)
        if g is not None and g.degree > 0:
            polys = [p // g if not p.is_zero() else p for p in polys]
        polys = normalize_coeff_vector(polys)
        return FuchsOde(order=self.order, coeffs=polys,
                        singular_points=_singular_points(polys))

    def to_json(self):
        return {
            "order": self.order,
            "coeffs": [p.to_strings() for p in self.coeffs],
            "singular_points": [str(s) for s in self.singular_points],
        }

    def render(self, fn="M3") -> str:
        """Human-readable equation text, highest derivative first."""
        primes = {0: "", 1: "'", 2: "''", 3: "'''", 4: "''''"}
        parts = []
        for i in range(self.order, -1, -1):
            p = self.coeffs[i]
            if p.is_zero():
                continue
            parts.append(f"({p!r}) {fn}{primes.get(i, '^(%d)' % i)}")
        return " + ".join(parts) + " = 0"

    def proportional_to(self, other: "FuchsOde") -> bool:
        if self.order != other.order:
            return False
        for i in range(self.order + 1):
            for j in range(self.order + 1):
                if not (self.coeffs[i] * other.coeffs[j]
                        == self.coeffs[j] * other.coeffs[i]):
                    return False
        return True


def _singular_points(coeffs):
    lead = coeffs[-1]
    roots, rem = lead.rational_roots()
    pts = sorted(set(roots))
    out = list(pts)
    out.append("inf")
    return out


def d4_fuchs_ode(gf: D4GenFn) -> FuchsOde:
    """Third-order equation for M3 via the degree-three coefficient data.

    Expands D P u'' + (t P - D P') u' + Q u = 0 with u = t^2 M3' and
    D = t (t + 4); P and Q are the recorded quadratic forms in the
    (alpha, beta, gamma, delta) parameters.
    """
    alpha, beta, gamma, delta = gf.abgd()
    if not any((alpha, beta, gamma, delta)):
        raise ValueError("degenerate generating function")
    a, b, g, dl = alpha, beta, gamma, delta
    P = Poly([
        96 * a * dl + 144 * g * dl + 64 * dl * dl,
        8 * a * a - 288 * a * b + 12 * a * g - 432 * b * g + 24 * a * dl
        - 192 * b * dl + 28 * g * dl + 16 * dl * dl,
        -(56 * a * b + a * g + 96 * b * g + 2 * g * g + 48 * b * dl + 2 * g * dl),
        8 * b * b - b * g,
    ])
    Q = Poly([
        32 * dl * dl,
        4 * a * a - 144 * a * b + 12 * a * g - 432 * b * g + 12 * a * dl
        - 240 * b * dl - 4 * g * dl + 8 * dl * dl,
        -(64 * a * b + 2 * a * g - 288 * b * b + 144 * b * g + 4 * g * dl
          + 48 * b * dl + 4 * g * g),
        40 * b * b - 5 * b * g,
    ]) * Fraction(4, 9)
    D = Poly([0, 4, 1])
    t = Poly([0, 1])
    p2 = D * P
    p1 = t * P - D * P.derivative()
    p0 = Q
    return _expand_u_equation(p2, p1, p0)


def _expand_u_equation(p2: Poly, p1: Poly, p0: Poly) -> FuchsOde:
    t = Poly([0, 1])
    t2 = t * t
    a3 = t2 * p2
    a2 = 4 * t * p2 + t2 * p1
    a1 = 2 * p2 + 2 * t * p1 + t2 * p0
    a0 = Poly()
    return FuchsOde(order=3, coeffs=[a0, a1, a2, a3], singular_points=[]).normalized()


def derive_fuchs_ode(gf: D4GenFn) -> FuchsOde:
    """Independent derivation of the same equation from the period system."""
    alpha, beta, gamma, delta = gf.abgd()
    if not any((alpha, beta, gamma, delta)):
        raise ValueError("degenerate generating function")
    A = pf_matrix()
    Ainv = _mat_inv3(A)
    t = Poly([0, 1])
    v = [RatFn.const(delta), RatFn.const(gamma), RatFn(Poly([alpha, beta]))]
    # t^2 M3' = [t (v' + v A^{-1}) - v] . I
    vp = _row_step(v, Ainv)
    w = [RatFn(t) * vp[j] - v[j] for j in range(3)]
    w1 = _row_step(w, Ainv)
    w2 = _row_step(w1, Ainv)
    p0, p1, p2 = ratfn_nullvector([w, w1, w2])
    return _expand_u_equation(p2, p1, p0)


def d4_local_exponents(ode: FuchsOde, t0):
    """Exponents of the indicial equation at a singular point (or 'inf')."""
    if t0 == "inf":
        coeffs = _transform_to_infinity(ode)
        return _indicial_roots(coeffs, Fraction(0), at_infinity=True)
    t0 = Fraction(t0)
    lead = ode.coeffs[-1]
    if lead.eval_exact(t0) != 0:
        raise ValueError(f"t = {t0} is an ordinary point")
    return _indicial_roots(ode.coeffs, t0)


def _indicial_roots(coeffs, t0, at_infinity=False):
    n = len(coeffs) - 1
    shifted = [p.shift(t0) for p in coeffs]
    orders = []
    for i, p in enumerate(shifted):
        if p.is_zero():
            orders.append(None)
        else:
            o = next(k for k, c in enumerate(p.coeffs) if c != 0)
            orders.append(o)
    lead_level = min(o - i for i, o in enumerate(orders) if o is not None)
    ind = Poly()
    for i, p in enumerate(shifted):
        if orders[i] is None or orders[i] - i != lead_level:
            continue
        c = p.coeffs[orders[i]]
        fall = Poly.const(1)
        for r in range(i):
            fall = fall * Poly([-r, 1])
        ind = ind + fall * c
    roots, rem = ind.rational_roots()
    if not rem.is_zero() and rem.degree > 0:
        return sorted(roots), rem
    return sorted(roots), None


def _transform_to_infinity(ode: FuchsOde):
    """Coefficients of the equation in s = 1/t for z(s) = y(1/s)."""
    n = ode.order
    # y^(i)(t) = sum_k c_(i,k)(s) z^(k)(s) with the substitution t = 1/s:
    # d/dt = -s^2 d/ds.  Build the operator images iteratively.
    images = [{0: Poly.const(1)}]
    for _ in range(n):
        prev = images[-1]
        cur = {}
        for k, coef in prev.items():
            dc = coef.derivative()
            cur[k] = cur.get(k, Poly()) + Poly([0, 0, -1]) * dc
            cur[k + 1] = cur.get(k + 1, Poly()) + Poly([0, 0, -1]) * coef
        images.append(cur)
    # a_i(1/s): clear powers of s by the maximal degree
    maxdeg = max(p.degree for p in ode.coeffs if not p.is_zero())
    out = {}
    for i, p in enumerate(ode.coeffs):
        if p.is_zero():
            continue
        # a_i(1/s) * s^maxdeg = s^(maxdeg - deg) * reversed(a_i)
        rev = Poly([0] * (maxdeg - p.degree) + list(reversed(p.coeffs)))
        for k, coef in images[i].items():
            out[k] = out.get(k, Poly()) + rev * coef
    coeffs = [out.get(k, Poly()) for k in range(n + 1)]
    return coeffs
