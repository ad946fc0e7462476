"""Reduction engine for one-forms over the quartic Hamiltonian family.

Every polynomial one-form splits into an exact part, a multiple of dH and a
residue spanned by the moment forms sigma_k = x^k y dx with coefficients
polynomial in H.  On the annuli where the odd moment integral vanishes
identically the residue at sigma_1 folds into the multivalued primitive phi
(d phi = (2 x y dx - (x^2 - e) dy) / 4H), which opens the log-extended ring:
finite sums  phi^j H^m P(x, y)  with integer m of either sign.

The iteration that produces the first nonvanishing generating function
multiplies the dH-coefficient of the previous step back onto the original
perturbation and reduces again, so a single work-queue reducer over
(phi-power, H-power) buckets serves every stage.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .algebra import (HamiltonianSpec, OneForm, WeightedPoly, normal_form, sigma)
from .upoly import Poly


class ShapeError(RuntimeError):
    """An intermediate object violated the structural bounds of the theory."""


# ---------------------------------------------------------------------------
# x,y-polynomials as flat dicts {(i, j): Fraction}, plus helpers
# ---------------------------------------------------------------------------

def _xy_add(dst, i, j, c):
    if c == 0:
        return
    key = (i, j)
    s = dst.get(key, Fraction(0)) + c
    if s:
        dst[key] = s
    else:
        dst.pop(key, None)


_MONO_SPLIT_CACHE = {}


def _mono_split(spec, i, j):
    """Normal form of the monomial x^i y^j as {h_power: {(i', j'): coeff}}."""
    key = (spec.name, i, j)
    hit = _MONO_SPLIT_CACHE.get(key)
    if hit is not None:
        return hit
    s, e = spec.s, spec.e
    out = {}
    work = [((i, j, 0), Fraction(1))]
    while work:
        (ii, jj, kk), c = work.pop()
        if ii <= 3:
            _xy_add(out.setdefault(kk, {}), ii, jj, c)
            continue
        # x^4 = 2e x^2 - e^2 + 4H/s - 2y^2/s applied to x^(ii-4)
        work.append(((ii - 2, jj, kk), c * 2 * e))
        work.append(((ii - 4, jj, kk), -c * e * e))
        work.append(((ii - 4, jj + 2, kk), -c * Fraction(2, s)))
        work.append(((ii - 4, jj, kk + 1), c * Fraction(4, s)))
    out = {k: v for k, v in out.items() if v}
    _MONO_SPLIT_CACHE[key] = out
    return out


def _nf_split(spec, poly_xy):
    """Normal-form an x,y-monomial dict; return {h_power: xy_dict}."""
    out = {}
    for (i, j), c in poly_xy.items():
        if c == 0:
            continue
        if i <= 3:
            _xy_add(out.setdefault(0, {}), i, j, c)
            continue
        for dk, d in _mono_split(spec, i, j).items():
            tgt = out.setdefault(dk, {})
            for key, cc in d.items():
                _xy_add(tgt, key[0], key[1], cc * c)
    return {k: v for k, v in out.items() if v}


def _wp_to_levels(spec, p: WeightedPoly):
    """WeightedPoly -> {h_power m: xy_dict} with x-exponents <= 3."""
    buckets = {}
    for (i, j, k), c in p.terms.items():
        for dk, d in _nf_split(spec, {(i, j): c}).items():
            tgt = buckets.setdefault(k + dk, {})
            for key, cc in d.items():
                _xy_add(tgt, key[0], key[1], cc)
    return {m: v for m, v in buckets.items() if v}


def _levels_to_wp(levels) -> WeightedPoly:
    terms = {}
    for m, d in levels.items():
        for (i, j), c in d.items():
            terms[(i, j, m)] = terms.get((i, j, m), Fraction(0)) + c
    return WeightedPoly(terms)


# ---------------------------------------------------------------------------
# Log-extended ring elements
# ---------------------------------------------------------------------------

class ExtElem:
    """Finite sum of phi^j H^(-p) * WeightedPoly terms.

    Entries are keyed by (j, p) with j, p >= 0; when p > 0 the stored
    polynomial contains no positive power of H, so the representation is
    canonical and equality is decidable by direct comparison.
    """

    __slots__ = ("entries",)

    def __init__(self, entries=None):
        self.entries = {}
        if entries:
            for (j, p), poly in entries.items():
                self._accumulate(j, p, poly)

    def _accumulate(self, j, p, poly: WeightedPoly):
        for (i, jy, k), c in poly.terms.items():
            net = k - p
            self.add_term(j, net, i, jy, c)

    def add_term(self, j, net_h, i, jy, c):
        p = max(0, -net_h)
        k = max(0, net_h)
        key = (j, p)
        cur = self.entries.get(key, WeightedPoly.zero())
        cur = cur + WeightedPoly.mono(c, i, jy, k)
        if cur.is_zero():
            self.entries.pop(key, None)
        else:
            self.entries[key] = cur

    @classmethod
    def from_poly(cls, p: WeightedPoly) -> "ExtElem":
        e = cls()
        e._accumulate(0, 0, p)
        return e

    @classmethod
    def zero(cls) -> "ExtElem":
        return cls()

    def is_zero(self) -> bool:
        return not self.entries

    def __eq__(self, other):
        return isinstance(other, ExtElem) and self.entries == other.entries

    def __add__(self, other: "ExtElem") -> "ExtElem":
        out = ExtElem()
        for (j, p), poly in list(self.entries.items()) + list(other.entries.items()):
            out._accumulate(j, p, poly)
        return out

    def __neg__(self):
        out = ExtElem()
        for (j, p), poly in self.entries.items():
            out._accumulate(j, p, -poly)
        return out

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, WeightedPoly)):
            other = ExtElem.from_poly(other if isinstance(other, WeightedPoly)
                                      else WeightedPoly.const(other))
        out = ExtElem()
        for (j1, p1), q1 in self.entries.items():
            for (j2, p2), q2 in other.entries.items():
                out._accumulate(j1 + j2, p1 + p2, q1 * q2)
        return out

    __rmul__ = __mul__

    def phi_degree(self) -> int:
        return max((j for (j, _) in self.entries), default=0)

    def max_pole(self) -> int:
        return max((p for (_, p) in self.entries), default=0)

    def subst_phi_shift(self, c: Fraction) -> "ExtElem":
        """Replace phi by phi + c (c an exact rational)."""
        from math import comb
        out = ExtElem()
        for (j, p), poly in self.entries.items():
            for r in range(j + 1):
                out._accumulate(r, p, poly * (comb(j, r) * c ** (j - r)))
        return out

    def normalized(self, spec) -> "ExtElem":
        out = ExtElem()
        for (j, p), poly in self.entries.items():
            out._accumulate(j, p, normal_form(poly, spec))
        return out

    def canonical(self) -> str:
        if not self.entries:
            return "0"
        parts = []
        for (j, p) in sorted(self.entries, reverse=True):
            poly = self.entries[(j, p)]
            head = ""
            if j:
                head += f"phi^{j} " if j > 1 else "phi "
            if p:
                head += f"H^-{p} " if p > 1 else "H^-1 "
            parts.append(f"{head}({poly.canonical()})".strip())
        return " + ".join(parts)

    def __repr__(self):
        return f"ExtElem({self.canonical()})"


# ---------------------------------------------------------------------------
# The reducer
# ---------------------------------------------------------------------------

class _Buckets:
    """Work queue keyed by (phi_level, h_power) holding xy-monomial dicts."""

    def __init__(self):
        self.data = {}

    def add(self, l, m, i, j, c):
        if c == 0:
            return
        d = self.data.setdefault((l, m), {})
        _xy_add(d, i, j, c)
        if not d:
            self.data.pop((l, m), None)

    def add_dict(self, l, m, xy, scale=Fraction(1)):
        for (i, j), c in xy.items():
            self.add(l, m, i, j, c * scale)

    def pop_level(self, l):
        keys = [k for k in self.data if k[0] == l]
        out = [(k[1], self.data.pop(k)) for k in keys]
        return out

    def max_level(self):
        return max((k[0] for k in self.data), default=None)

    def __bool__(self):
        return bool(self.data)


@dataclass
class Reduction:
    """Outcome of reducing an extended one-form.

    exact and dh_coeff are the accumulated primitive and dH-coefficient;
    residue maps (phi_level, h_power, sigma_index) to a rational coefficient.
    """
    exact: ExtElem
    dh_coeff: ExtElem
    residue: dict


class Reducer:
    """Single-pass rewriting of extended one-forms over a quartic Hamiltonian.

    mode "refined" keeps H-poles in the dH-coefficient as shallow as the
    structure theory predicts; mode "plain" replaces every W dphi by
    H^{-1} W (x y/2 dx - (x^2-e)/4 dy), which is simpler but deepens poles
    by one at each phi-step (useful to exhibit the raw expansion shape).
    """

    MAX_MOVES = 2_000_000

    def __init__(self, spec: HamiltonianSpec, fold_sigma1: bool, mode: str = "refined"):
        if spec.kind != "quartic":
            raise ValueError("reducer requires a quartic-family Hamiltonian")
        self.spec = spec
        self.fold = fold_sigma1
        self.mode = mode
        self.s, self.e = spec.s, spec.e

    def run(self, items) -> Reduction:
        """items: {(l, m): (xy_dict_A, xy_dict_B)} meaning phi^l H^m (A dx + B dy)."""
        self.dx = _Buckets()
        self.dy = _Buckets()
        self.dphi = _Buckets()
        self.Q = _Buckets()
        self.q = _Buckets()
        self.res = {}
        for (l, m), (a, b) in items.items():
            for dk, dct in _nf_split(self.spec, a).items():
                self.dx.add_dict(l, m + dk, dct)
            for dk, dct in _nf_split(self.spec, b).items():
                self.dy.add_dict(l, m + dk, dct)
        moves = 0
        while self.dx or self.dy or self.dphi:
            lvl = max(x for x in (self.dx.max_level(), self.dy.max_level(),
                                  self.dphi.max_level()) if x is not None)
            while True:
                progressed = False
                for m, xy in self.dy.pop_level(lvl):
                    progressed = True
                    self._move_dy(lvl, m, xy)
                for m, xy in self.dx.pop_level(lvl):
                    progressed = True
                    self._move_dx(lvl, m, xy)
                for m, xy in self.dphi.pop_level(lvl):
                    progressed = True
                    self._move_dphi(lvl, m, xy)
                moves += 1
                if moves > self.MAX_MOVES:
                    raise ShapeError("reducer failed to terminate")
                if not progressed:
                    break
        exact = ExtElem()
        for (l, m), xy in self.Q.data.items():
            for (i, j), c in xy.items():
                exact.add_term(l, m, i, j, c)
        dh = ExtElem()
        for (l, m), xy in self.q.data.items():
            for (i, j), c in xy.items():
                dh.add_term(l, m, i, j, c)
        return Reduction(exact=exact, dh_coeff=dh, residue=dict(self.res))

    # -- individual moves --------------------------------------------------

    def _emit_d(self, l, m, u_xy, scale):
        """Bookkeeping for the term phi^l H^m dU with U an x,y-polynomial.

        U is normal-formed first; with U = sum_dk H^dk u_dk the concrete
        differential satisfies
        phi^l H^m dU = sum_dk [ d(phi^l H^(m+dk) u_dk)
                                - m phi^l H^(m-1+dk) u_dk dH
                                - l phi^(l-1) H^(m+dk) u_dk dphi ].
        """
        for dk, u in _nf_split(self.spec, u_xy).items():
            self.Q.add_dict(l, m + dk, u, scale)
            if l:
                self.dphi.add_dict(l - 1, m + dk, u, -l * scale)
            if m:
                self.q.add_dict(l, m - 1 + dk, u, -m * scale)

    def _move_dy(self, l, m, xy):
        # phi^l H^m B dy with B = sum c x^i y^j: integrate in y
        prim = {}
        px = {}
        for (i, j), c in xy.items():
            _xy_add(prim, i, j + 1, c / (j + 1))
            if i:
                _xy_add(px, i - 1, j + 1, c * Fraction(i, j + 1))
        self._emit_d(l, m, prim, Fraction(1))
        for dk, d in _nf_split(self.spec, px).items():
            self.dx.add_dict(l, m + dk, d, Fraction(-1))

    def _move_dx(self, l, m, xy):
        s, e = self.s, self.e
        for (i, j), c in xy.items():
            if j >= 2:
                lam = Fraction(1, i + 1 + 2 * j)
                self._emit_d(l, m, {(i + 1, j): c * lam}, Fraction(1))
                for dk, d in _nf_split(self.spec, {(i + 1, j - 2): c * lam * j}).items():
                    self.q.add_dict(l, m + dk, d, Fraction(-1))
                kids = {}
                _xy_add(kids, i + 2, j - 2, c * lam * s * e * j)
                _xy_add(kids, i, j - 2, -c * lam * s * e * e * j)
                for dk, d in _nf_split(self.spec, kids).items():
                    self.dx.add_dict(l, m + dk, d)
                self.dx.add(l, m + 1, i, j - 2, c * lam * 4 * j)
            elif j == 0:
                self._emit_d(l, m, {(i + 1, 0): c / (i + 1)}, Fraction(1))
            else:  # j == 1
                if i == 3:
                    # x^3 y dx = e sigma_1 + (1/s)(y dH - d(y^3/3))
                    self.dx.add(l, m, 1, 1, c * e)
                    self.q.add(l, m, 0, 1, c * Fraction(1, s))
                    self._emit_d(l, m, {(0, 3): Fraction(-1, 3 * s)}, c)
                elif i == 1 and self.fold:
                    g0 = {(2, 1): Fraction(1, 4), (0, 1): Fraction(-e, 4)}
                    self._emit_d(l, m, g0, c)
                    self.dphi.add(l, m + 1, 0, 0, c)
                else:
                    key = (l, m, i)
                    cur = self.res.get(key, Fraction(0)) + c
                    if cur:
                        self.res[key] = cur
                    else:
                        self.res.pop(key, None)

    def _move_dphi(self, l, m, xy):
        s, e = self.s, self.e
        if self.mode == "plain":
            dxp, dyp = {}, {}
            for (i, j), c in xy.items():
                if i == 0 and j == 0:
                    # the pure-H part always folds; routing it through the
                    # moment form would cycle forever
                    self.Q.add(l + 1, m, 0, 0, c / (l + 1))
                    if m:
                        self.q.add(l + 1, m - 1, 0, 0, -c * Fraction(m, l + 1))
                    continue
                _xy_add(dxp, i + 1, j + 1, c / 2)
                _xy_add(dyp, i + 2, j, -c / 4)
                _xy_add(dyp, i, j, c * Fraction(e, 4))
            for dk, d in _nf_split(self.spec, dxp).items():
                self.dx.add_dict(l, m - 1 + dk, d)
            for dk, d in _nf_split(self.spec, dyp).items():
                self.dy.add_dict(l, m - 1 + dk, d)
            return
        for (i, j), c in xy.items():
            if i == 0 and j == 0:
                # pure function of H: fold into the next phi power
                self.Q.add(l + 1, m, 0, 0, c / (l + 1))
                if m:
                    self.q.add(l + 1, m - 1, 0, 0, -c * Fraction(m, l + 1))
            elif j >= 1:
                # divide by y and use y dphi = x dx - (x^2 - e)/(4H) dH
                for dk, d in _nf_split(self.spec, {(i + 1, j - 1): c}).items():
                    self.dx.add_dict(l, m + dk, d)
                qc = {}
                _xy_add(qc, i + 2, j - 1, -c / 4)
                _xy_add(qc, i, j - 1, c * Fraction(e, 4))
                for dk, d in _nf_split(self.spec, qc).items():
                    self.q.add_dict(l, m - 1 + dk, d)
            elif i >= 2:
                # x^i = e x^(i-2) + x^(i-2)(x^2 - e);
                # (x^2-e) dphi = y/(2sH) dH - dy/s
                self.dphi.add(l, m, i - 2, 0, c * e)
                self.q.add(l, m - 1, i - 2, 1, c * Fraction(1, 2 * s))
                self.dy.add(l, m, i - 2, 0, -c * Fraction(1, s))
            else:
                # x dphi = H^{-1} (x^2 y / 2 dx - (x^3 - e x)/4 dy)
                self.dx.add(l, m - 1, 2, 1, c / 2)
                self.dy.add(l, m - 1, 3, 0, -c / 4)
                self.dy.add(l, m - 1, 1, 0, c * Fraction(e, 4))


# ---------------------------------------------------------------------------
# Public decompositions
# ---------------------------------------------------------------------------

@dataclass
class Decomposition:
    """w = dG + g dH + alpha(H) sigma_0 + beta(H) sigma_1 + gamma(H) sigma_2."""
    G: WeightedPoly
    g: WeightedPoly
    alpha: Poly
    beta: Poly
    gamma: Poly
    spec: HamiltonianSpec

    def reconstruct(self) -> OneForm:
        from .algebra import d as _d
        w = _d(self.G, self.spec)
        hx, hy = self.spec.grad()
        ge = self.g.subst_h(self.spec.h_poly)
        w = w + OneForm(ge * hx, ge * hy)
        h = self.spec.h_poly
        for poly, k in ((self.alpha, 0), (self.beta, 1), (self.gamma, 2)):
            acc = WeightedPoly.zero()
            for n, c in enumerate(poly.coeffs):
                acc = acc + WeightedPoly.const(c) * h**n
            w = w + sigma(k).mul_poly(acc)
        return w

    def to_json(self):
        return {
            "G": self.G.canonical(),
            "g": self.g.canonical(),
            "alpha": self.alpha.to_strings(),
            "beta": self.beta.to_strings(),
            "gamma": self.gamma.to_strings(),
        }


@dataclass
class ExtDecomposition:
    """w = d(exact) + g dH + alpha(H) sigma_0 + gamma(H) sigma_2 over the phi-ring."""
    exact: ExtElem
    g: ExtElem
    alpha: Poly
    gamma: Poly
    spec: HamiltonianSpec

    def to_json(self):
        return {
            "exact": self.exact.canonical(),
            "g": self.g.canonical(),
            "alpha": self.alpha.to_strings(),
            "gamma": self.gamma.to_strings(),
        }


def _form_items(w: OneForm, spec):
    a_levels = _wp_to_levels(spec, w.a)
    b_levels = _wp_to_levels(spec, w.b)
    items = {}
    for m, d in a_levels.items():
        items.setdefault((0, m), ({}, {}))
        for (i, j), c in d.items():
            _xy_add(items[(0, m)][0], i, j, c)
    for m, d in b_levels.items():
        items.setdefault((0, m), ({}, {}))
        for (i, j), c in d.items():
            _xy_add(items[(0, m)][1], i, j, c)
    return items


def _residue_h_poly(residue, idx) -> Poly:
    coeffs = {}
    for (l, m, i), c in residue.items():
        if i == idx and l == 0:
            coeffs[m] = coeffs.get(m, Fraction(0)) + c
    if not coeffs:
        return Poly()
    if min(coeffs) < 0:
        raise ShapeError("negative H power in a polynomial residue")
    out = [Fraction(0)] * (max(coeffs) + 1)
    for m, c in coeffs.items():
        out[m] = c
    return Poly(out)


def decompose(w: OneForm, spec: HamiltonianSpec, check: bool = True) -> Decomposition:
    """Full moment decomposition of a polynomial one-form (no phi, no poles)."""
    red = Reducer(spec, fold_sigma1=False).run(_form_items(w, spec))
    if red.exact.phi_degree() or red.exact.max_pole() or red.dh_coeff.phi_degree() \
            or red.dh_coeff.max_pole():
        raise ShapeError("polynomial input produced extended-ring output")
    G = red.exact.entries.get((0, 0), WeightedPoly.zero())
    g = red.dh_coeff.entries.get((0, 0), WeightedPoly.zero())
    dec = Decomposition(G=G, g=g,
                        alpha=_residue_h_poly(red.residue, 0),
                        beta=_residue_h_poly(red.residue, 1),
                        gamma=_residue_h_poly(red.residue, 2),
                        spec=spec)
    if check:
        diff = dec.reconstruct() - OneForm(w.a.subst_h(spec.h_poly), w.b.subst_h(spec.h_poly))
        if not (diff.a.is_zero() and diff.b.is_zero()):
            raise ShapeError("decomposition failed to reconstruct its input")
    m = w.weighted_degree()
    if (not dec.G.is_zero() and dec.G.weighted_degree() > m + 1) \
            or (not dec.g.is_zero() and dec.g.weighted_degree() > m - 1):
        raise ShapeError("decomposition degree bounds violated")
    return dec


def decompose_ext(w: OneForm, spec: HamiltonianSpec, check: bool = True) -> ExtDecomposition:
    """Decomposition with the sigma_1 residue folded into phi (exterior annuli)."""
    red = Reducer(spec, fold_sigma1=True).run(_form_items(w, spec))
    alpha = _residue_h_poly(red.residue, 0)
    gamma = _residue_h_poly(red.residue, 2)
    if any(i == 1 for (_, _, i) in red.residue):
        raise ShapeError("sigma_1 residue survived the fold")
    dec = ExtDecomposition(exact=red.exact, g=red.dh_coeff, alpha=alpha, gamma=gamma,
                           spec=spec)
    if check:
        _check_ext_reconstruction(_form_items(w, spec), red, spec)
    if dec.g.phi_degree() > 1:
        raise ShapeError("first fold produced phi-degree above one")
    return dec


# ---------------------------------------------------------------------------
# Exact reconstruction of reducer output (the main internal oracle)
# ---------------------------------------------------------------------------

_H_POWER_CACHE = {}


def _h_power(spec, n: int) -> WeightedPoly:
    key = (spec.name, n)
    hit = _H_POWER_CACHE.get(key)
    if hit is None:
        hit = spec.h_poly ** n
        _H_POWER_CACHE[key] = hit
    return hit


def _ext_to_forms(red: Reduction, spec) -> dict:
    """Expand d(exact) + q dH + residue into {(l): (A(x,y,Hconc), B)} forms.

    Returns per phi-level pairs of WeightedPoly in x, y only, after clearing
    H-poles by the global maximal pole and substituting the concrete H.
    """
    hx, hy = spec.grad()
    pole = 0
    grouped = {}  # (l, m) -> [A_xy, B_xy]

    def emit(l, m, a: WeightedPoly, b: WeightedPoly):
        nonlocal pole
        slot = grouped.setdefault((l, m), [WeightedPoly.zero(), WeightedPoly.zero()])
        slot[0] = slot[0] + a
        slot[1] = slot[1] + b
        pole = max(pole, -m if m < 0 else 0)

    for (j, p), poly in red.exact.entries.items():
        # d(phi^j H^{-p} poly) with H concrete inside poly handled via levels
        for (i, jy, k), c in poly.terms.items():
            m = k - p
            u = WeightedPoly.mono(c, i, jy)
            emit(j, m, u.dx(), u.dy())
            if m:
                emit(j, m - 1, u * hx * m, u * hy * m)
            if j:
                # j phi^(j-1) H^(m-1) u (2xy dx - (x^2-e) dy)/4
                tw = WeightedPoly.mono(Fraction(j, 2), 1, 1)
                uv = (WeightedPoly.mono(1, i=2) + WeightedPoly.const(-spec.e))
                emit(j - 1, m - 1, u * tw, u * uv * Fraction(-j, 4))
    for (j, p), poly in red.dh_coeff.entries.items():
        for (i, jy, k), c in poly.terms.items():
            m = k - p
            u = WeightedPoly.mono(c, i, jy)
            emit(j, m, u * hx, u * hy)
    for (l, m, i), c in red.residue.items():
        emit(l, m, WeightedPoly.mono(c, i, 1), WeightedPoly.zero())

    out = {}
    for (l, m), (a, b) in grouped.items():
        ca, cb = out.setdefault(l, [WeightedPoly.zero(), WeightedPoly.zero()])
        hp = _h_power(spec, m + pole)
        out[l] = [ca + a * hp, cb + b * hp]
    return out, pole


def _check_ext_reconstruction(items, red: Reduction, spec):
    got, pole = _ext_to_forms(red, spec)
    h = spec.h_poly
    want = {}
    for (l, m), (a, b) in items.items():
        wa = WeightedPoly({(i, j, 0): c for (i, j), c in a.items()})
        wb = WeightedPoly({(i, j, 0): c for (i, j), c in b.items()})
        hp = _h_power(spec, m + pole)
        ca, cb = want.setdefault(l, [WeightedPoly.zero(), WeightedPoly.zero()])
        want[l] = [ca + wa * hp, cb + wb * hp]
    levels = set(got) | set(want)
    for l in levels:
        ga, gb = got.get(l, [WeightedPoly.zero(), WeightedPoly.zero()])
        wa, wb = want.get(l, [WeightedPoly.zero(), WeightedPoly.zero()])
        if not (ga - wa).is_zero() or not (gb - wb).is_zero():
            raise ShapeError(f"reduction does not reconstruct its input at phi-level {l}")


# ---------------------------------------------------------------------------
# Generating functions and the chain
# ---------------------------------------------------------------------------

@dataclass
class GeneratingFn:
    """First nonvanishing generating function of a chain.

    Represents M_k(t) = t^{-pole_order} [alpha(t) I0 + beta(t) I1 + gamma(t) I2]
    with exact polynomial coefficients; beta vanishes identically on the
    symmetric (exterior-type) annuli.
    """
    k: int
    annulus: str
    hamiltonian: str
    n: int
    pole_order: int
    alpha: Poly
    beta: Poly
    gamma: Poly

    def is_zero(self) -> bool:
        return self.alpha.is_zero() and self.beta.is_zero() and self.gamma.is_zero()

    def to_json(self):
        return {
            "k": self.k,
            "annulus": self.annulus,
            "hamiltonian": self.hamiltonian,
            "n": self.n,
            "pole_order": self.pole_order,
            "alpha": self.alpha.to_strings(),
            "beta": self.beta.to_strings(),
            "gamma": self.gamma.to_strings(),
        }

    def shape_bounds(self):
        """(max pole, max deg alpha, max deg gamma) structural bounds."""
        n, k = self.n, self.k
        odd = n % 2 == 1
        if k == 1:
            return 0, (n - 1) // 2, (n - 3) // 2
        if k == 2:
            return 1, (n - 1 if odd else n), n - 1
        top = k * (n + 1) // 2
        if odd:
            return k - 2, top - 3, top - 4
        return k - 2, top - 2, top - 3

    def check_shape(self):
        pole, da, dg = self.shape_bounds()
        if self.pole_order > pole:
            raise ShapeError(f"pole order {self.pole_order} exceeds bound {pole}")
        # degrees measured in the normal form with the stated pole
        shift = pole - self.pole_order
        if not self.alpha.is_zero() and self.alpha.degree + shift > da:
            raise ShapeError(f"deg alpha {self.alpha.degree + shift} exceeds bound {da}")
        if not self.gamma.is_zero() and self.gamma.degree + shift > dg:
            raise ShapeError(f"deg gamma {self.gamma.degree + shift} exceeds bound {dg}")
        if not self.beta.is_zero():
            db = (self.k * (self.n - 1) - 1) // 2
            if self.beta.degree > db:
                raise ShapeError(f"deg beta {self.beta.degree} exceeds bound {db}")


def _interior_genfn(dec: Decomposition, k, annulus, ham, n) -> GeneratingFn:
    return GeneratingFn(k=k, annulus=annulus, hamiltonian=ham, n=n, pole_order=0,
                        alpha=dec.alpha, beta=dec.beta, gamma=dec.gamma)


def _residue_laurent(residue, level, idx):
    """{h_power: coeff} of the sigma_idx residue at the given phi level."""
    out = {}
    for (l, m, i), c in residue.items():
        if l == level and i == idx:
            out[m] = out.get(m, Fraction(0)) + c
    return {m: c for m, c in out.items() if c}


def _laurent_to_pole_poly(laurents):
    """[{m: c}, ...] -> (pole, [Poly, ...]) sharing one pole order."""
    pole = 0
    for lau in laurents:
        if lau:
            pole = max(pole, -min(lau))
    polys = []
    for lau in laurents:
        if not lau:
            polys.append(Poly())
            continue
        coeffs = [Fraction(0)] * (max(lau) + pole + 1)
        for m, c in lau.items():
            coeffs[m + pole] = c
        polys.append(Poly(coeffs))
    return pole, polys


def check_q_shape(q: ExtElem, k: int, n: int):
    """Structural bounds on the dH-coefficient after k steps.

    At phi-level j the H-pole may not exceed k-1-j (no pole at level k)
    and the net weighted degree counting H with weight two and its inverse
    with weight minus two may not exceed k(n-1) - j.
    """
    if q.phi_degree() > k:
        raise ShapeError(f"q_{k} has phi-degree {q.phi_degree()} > {k}")
    for (j, p), poly in q.entries.items():
        cap = k - 1 - j if j < k else 0
        if p > max(cap, 0):
            raise ShapeError(f"q_{k} phi-level {j} has H-pole {p} > {max(cap, 0)}")
        for (i, jy, kk), c in poly.terms.items():
            net = i + jy + 2 * (kk - p)
            if net > k * (n - 1) - j:
                raise ShapeError(
                    f"q_{k} phi-level {j} weighted degree {net} > {k*(n-1)-j}")


@dataclass
class ChainStep:
    k: int
    omega: dict          # {(l, m): (xy A, xy B)} as fed to the reducer
    exact: ExtElem
    q: ExtElem
    residue: dict


@dataclass
class ChainResult:
    k: int | None        # first index with nonzero generating function
    genfn: GeneratingFn | None
    steps: list
    all_zero_up_to: int | None = None


def _ext_items_from_q(q: ExtElem, w: OneForm, spec):
    """Bucket form of q * w for the next reduction stage."""
    a_lv = _wp_to_levels(spec, w.a)
    b_lv = _wp_to_levels(spec, w.b)
    items = {}
    for (j, p), poly in q.entries.items():
        for (i, jy, kk), c in poly.terms.items():
            base_m = kk - p
            for (src, tgt_idx) in ((a_lv, 0), (b_lv, 1)):
                for m2, d2 in src.items():
                    for (i2, j2), c2 in d2.items():
                        prod = _nf_split(spec, {(i + i2, jy + j2): c * c2})
                        for dk, dd in prod.items():
                            key = (j, base_m + m2 + dk)
                            items.setdefault(key, ({}, {}))
                            for (ii, jj), cc in dd.items():
                                _xy_add(items[key][tgt_idx], ii, jj, cc)
    return {k: v for k, v in items.items() if v[0] or v[1]}


def francoise_chain(w: OneForm, spec: HamiltonianSpec, annulus: str,
                    k_max: int = 6, check: bool = True) -> ChainResult:
    """Iterate the reduction until the first nonvanishing generating function.

    Interior annuli stay polynomial; the symmetric annuli carry the phi-fold
    and the vanishing of every positive phi-level of the residue is asserted
    (it is forced by the independence of the generating function from the
    additive constant in the primitive).
    """
    if annulus not in spec.annuli:
        raise ValueError(f"unknown annulus {annulus!r} for {spec.name}")
    n = max(w.weighted_degree(), 1)
    exterior = spec.is_exterior(annulus)
    steps = []
    if not exterior:
        omega = w
        q_prev = None
        for k in range(1, k_max + 1):
            dec = decompose(omega, spec, check=check)
            steps.append(ChainStep(k=k, omega=_form_items(omega, spec),
                                   exact=ExtElem.from_poly(dec.G),
                                   q=ExtElem.from_poly(dec.g), residue={}))
            if not (dec.alpha.is_zero() and dec.beta.is_zero() and dec.gamma.is_zero()):
                gf = _interior_genfn(dec, k, annulus, spec.name, n)
                if check:
                    gf_shape_interior(gf)
                return ChainResult(k=k, genfn=gf, steps=steps)
            q_prev = dec.g
            if check and q_prev.weighted_degree() > k * (n - 1):
                raise ShapeError("interior q degree bound violated")
            omega = OneForm(normal_form(q_prev * w.a, spec), normal_form(q_prev * w.b, spec))
            if check and omega.weighted_degree() > k * (n - 1) + n:
                raise ShapeError("interior chain degree bound violated")
        return ChainResult(k=None, genfn=None, steps=steps, all_zero_up_to=k_max)

    items = _form_items(w, spec)
    for k in range(1, k_max + 1):
        red = Reducer(spec, fold_sigma1=True).run(items)
        if check:
            _check_ext_reconstruction(items, red, spec)
        steps.append(ChainStep(k=k, omega=items, exact=red.exact, q=red.dh_coeff,
                               residue=red.residue))
        max_level = max((l for (l, _, _) in red.residue), default=0)
        for l in range(1, max_level + 1):
            for idx in (0, 2):
                lau = _residue_laurent(red.residue, l, idx)
                if lau:
                    raise ShapeError(
                        f"phi-level {l} residue did not cancel at step {k}")
        if any(i == 1 for (_, _, i) in red.residue):
            raise ShapeError("sigma_1 residue on a symmetric annulus")
        a_lau = _residue_laurent(red.residue, 0, 0)
        g_lau = _residue_laurent(red.residue, 0, 2)
        if a_lau or g_lau:
            pole, (alpha, gamma) = _laurent_to_pole_poly([a_lau, g_lau])
            gf = GeneratingFn(k=k, annulus=annulus, hamiltonian=spec.name, n=n,
                              pole_order=pole, alpha=alpha, beta=Poly(), gamma=gamma)
            if check:
                gf.check_shape()
            return ChainResult(k=k, genfn=gf, steps=steps)
        q = red.dh_coeff
        if check:
            check_q_shape(q, k, n)
            if q.max_pole() > k:
                raise ShapeError("H-pole exceeded the recursion depth cap")
        items = _ext_items_from_q(q, w, spec)
    return ChainResult(k=None, genfn=None, steps=steps, all_zero_up_to=k_max)


def gf_shape_interior(gf: GeneratingFn):
    """Degree bounds for interior annuli: all three coefficients."""
    n, k = gf.n, gf.k
    da = (k * (n - 1)) // 2
    db = (k * (n - 1) - 1) // 2
    dg = (k * (n - 1) - 2) // 2
    if not gf.alpha.is_zero() and gf.alpha.degree > da:
        raise ShapeError("interior alpha degree bound violated")
    if not gf.beta.is_zero() and gf.beta.degree > db:
        raise ShapeError("interior beta degree bound violated")
    if not gf.gamma.is_zero() and gf.gamma.degree > dg:
        raise ShapeError("interior gamma degree bound violated")
