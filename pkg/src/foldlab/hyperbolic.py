"""Boxes and hyperbolic transformations in implicit cross-coordinates.

A hyperbolic transformation F on a box is stored as the pair of cross
functions (x_of, y_of) solving

    F(x_of(x1, y0), y0) = (x1, y_of(x1, y0)),

i.e. the first coordinate is parameterized by its *image* and the second by
its *preimage*.  Compositions ("star products") are solved per evaluation
point by a contraction iteration whose rate is at most theta^2 = 1/4; the
derivatives of composites come from the implicit-function formulas, not from
finite differences.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

from .numerics import LogReal

THETA_DEFAULT = 0.5
LAMBDA_DEFAULT = 2.0


class NumericalError(RuntimeError):
    pass


class DomainError(ValueError):
    pass


class ConeError(ValueError):
    pass


@dataclass(frozen=True)
class ConeParams:
    theta: float = THETA_DEFAULT
    lam: float = LAMBDA_DEFAULT

    def __post_init__(self):
        if not (0 < self.theta < 1):
            raise ValueError("cone aperture must be in (0,1)")
        if self.lam <= 1:
            raise ValueError("expansion factor must exceed 1")


class BoxRegion:
    """A vertical strip {phi_minus(y) <= x <= phi_plus(y)} over a y-interval."""

    def __init__(self, phi_minus, phi_plus, y_lo=-1.0, y_hi=1.0):
        self.phi_minus = phi_minus
        self.phi_plus = phi_plus
        self.y_lo = y_lo
        self.y_hi = y_hi

    @classmethod
    def rectangle(cls, x_lo, x_hi, y_lo=-1.0, y_hi=1.0) -> "BoxRegion":
        return cls(lambda y: x_lo, lambda y: x_hi, y_lo, y_hi)

    def contains(self, x, y, tol=1e-12) -> bool:
        if not (self.y_lo - tol <= y <= self.y_hi + tol):
            return False
        return self.phi_minus(y) - tol <= x <= self.phi_plus(y) + tol

    def x_interval(self, y=0.0):
        return (self.phi_minus(y), self.phi_plus(y))


FULL_SQUARE = BoxRegion.rectangle(-1.0, 1.0)


@dataclass
class PlaneMap:
    """A C^2 plane map with analytic first derivative and optional second."""

    f: Callable  # (x, y) -> (x', y')
    deriv: Callable  # (x, y) -> ((fxx, fxy), (fyx, fyy))
    box: BoxRegion
    second: Optional[Callable] = None
    label: str = ""
    is_identity: bool = False

    def det(self, x, y):
        (a, b), (c, d) = self.deriv(x, y)
        return a * d - b * c

    def check_derivative(self, samples=5, step=1e-7, rtol=1e-6) -> bool:
        """Central finite differences agree with `deriv` on a sample grid."""
        lo, hi = self.box.x_interval(0.0)
        worst = 0.0
        for i in range(samples):
            for j in range(samples):
                x = lo + (hi - lo) * (i + 0.5) / samples
                y = self.box.y_lo + (self.box.y_hi - self.box.y_lo) * (j + 0.5) / samples
                (a, b), (c, d) = self.deriv(x, y)
                fx1 = self.f(x + step, y)
                fx0 = self.f(x - step, y)
                fy1 = self.f(x, y + step)
                fy0 = self.f(x, y - step)
                fd = (
                    (fx1[0] - fx0[0]) / (2 * step),
                    (fy1[0] - fy0[0]) / (2 * step),
                    (fx1[1] - fx0[1]) / (2 * step),
                    (fy1[1] - fy0[1]) / (2 * step),
                )
                for got, want in zip(fd, (a, b, c, d)):
                    scale = max(1.0, abs(want))
                    worst = max(worst, abs(got - want) / scale)
        return worst <= rtol


# ---------------------------------------------------------------------------
# implicit representations
# ---------------------------------------------------------------------------


class ImplicitRep:
    """Interface: cross evaluators and their partial derivatives."""

    word = None  # optional provenance
    tol = 0.0

    def x_of(self, x1, y0):
        raise NotImplementedError

    def y_of(self, x1, y0):
        raise NotImplementedError

    def dx_dx1(self, x1, y0):
        raise NotImplementedError

    def dx_dy0(self, x1, y0):
        raise NotImplementedError

    def dy_dx1(self, x1, y0):
        raise NotImplementedError

    def dy_dy0(self, x1, y0):
        raise NotImplementedError

    # second derivatives default to central differences of the first ones
    _FD_STEP = 1e-6

    def d2x_dy0dy0(self, x1, y0):
        h = self._FD_STEP
        return (self.dx_dy0(x1, y0 + h) - self.dx_dy0(x1, y0 - h)) / (2 * h)

    def d2y_dx1dx1(self, x1, y0):
        h = self._FD_STEP
        return (self.dy_dx1(x1 + h, y0) - self.dy_dx1(x1 - h, y0)) / (2 * h)

    def cone_ok(self, theta=THETA_DEFAULT, grid=9) -> bool:
        for i in range(grid):
            for j in range(grid):
                x1 = -1 + 2 * (i + 0.5) / grid
                y0 = -1 + 2 * (j + 0.5) / grid
                if abs(self.dx_dx1(x1, y0)) + abs(self.dx_dy0(x1, y0)) >= theta:
                    return False
                if abs(self.dy_dx1(x1, y0)) + abs(self.dy_dy0(x1, y0)) >= theta:
                    return False
        return True


class AffineRep(ImplicitRep):
    """Exact representation x_of = ax*x1 + cx, y_of = dy*y0 + ey.

    Coefficients may be floats or Fractions; composition is exact, making the
    rational backend possible for arbitrarily long words.
    """

    __slots__ = ("ax", "cx", "dy", "ey", "word", "tol")

    def __init__(self, ax, cx, dy, ey, word=None):
        self.ax = ax
        self.cx = cx
        self.dy = dy
        self.ey = ey
        self.word = word
        self.tol = 0.0

    def x_of(self, x1, y0=None):
        return self.ax * x1 + self.cx

    def y_of(self, x1, y0=None):
        if y0 is None:
            y0 = x1
        return self.dy * y0 + self.ey

    def dx_dx1(self, x1=None, y0=None):
        return self.ax

    def dx_dy0(self, x1=None, y0=None):
        return 0 * self.ax

    def dy_dx1(self, x1=None, y0=None):
        return 0 * self.dy

    def dy_dy0(self, x1=None, y0=None):
        return self.dy

    def d2x_dy0dy0(self, x1=None, y0=None):
        return 0 * self.ax

    def d2y_dx1dx1(self, x1=None, y0=None):
        return 0 * self.dy

    def compose(self, other: "AffineRep") -> "AffineRep":
        """self (applied first) composed with `other` (applied second)."""
        return AffineRep(
            self.ax * other.ax,
            self.ax * other.cx + self.cx,
            other.dy * self.dy,
            other.dy * self.ey + other.ey,
        )

    def __repr__(self):
        return f"AffineRep(ax={self.ax!r}, dy={self.dy!r})"


def identity_rep() -> AffineRep:
    return AffineRep(1, 0, 1, 0)


class NumericRep(ImplicitRep):
    """Implicit rep of a PlaneMap obtained by per-point 1-D solves."""

    def __init__(self, F: PlaneMap, box: BoxRegion, tol: float = 1e-12):
        self.F = F
        self.box = box
        self.tol = tol
        self.word = None
        self._cache = {}

    def _solve_x0(self, x1, y0):
        key = (x1, y0)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        lo, hi = self.box.phi_minus(y0), self.box.phi_plus(y0)
        f = lambda x: self.F.f(x, y0)[0] - x1
        flo, fhi = f(lo), f(hi)
        edge_tol = max(self.tol, 1e-12)
        if abs(flo) <= edge_tol:
            x = lo
        elif abs(fhi) <= edge_tol:
            x = hi
        else:
            if flo * fhi > 0:
                raise DomainError(
                    f"target x1={x1} not attained on the box section at y0={y0}"
                )
            increasing = fhi > flo
            x = 0.5 * (lo + hi)
            for _ in range(100):
                fx = f(x)
                if abs(fx) <= self.tol * 0.5:
                    break
                dfx = self.F.deriv(x, y0)[0][0]
                if dfx == 0:
                    raise ConeError("vanishing horizontal expansion in 1-D solve")
                step = fx / dfx
                if (fx > 0) == increasing:
                    hi = x
                else:
                    lo = x
                xn = x - step
                if not (lo <= xn <= hi):
                    xn = 0.5 * (lo + hi)  # bisection fallback keeps the bracket
                x = xn
            else:
                raise NumericalError("1-D solve did not converge")
        if len(self._cache) > 20000:
            self._cache.clear()
        self._cache[key] = x
        return x

    def x_of(self, x1, y0):
        return self._solve_x0(x1, y0)

    def y_of(self, x1, y0):
        return self.F.f(self._solve_x0(x1, y0), y0)[1]

    def _dF(self, x1, y0):
        x0 = self._solve_x0(x1, y0)
        return x0, self.F.deriv(x0, y0)

    def dx_dx1(self, x1, y0):
        _, ((a, _b), _) = self._dF(x1, y0)
        return 1.0 / a

    def dx_dy0(self, x1, y0):
        _, ((a, b), _) = self._dF(x1, y0)
        return -b / a

    def dy_dx1(self, x1, y0):
        _, ((a, _b), (c, _d)) = self._dF(x1, y0)
        return c / a

    def dy_dy0(self, x1, y0):
        _, ((a, b), (c, d)) = self._dF(x1, y0)
        return c * (-b / a) + d

    def residual(self, x1, y0):
        """||F(x_of, y0) - (x1, y_of)|| — the defining-relation residual."""
        x0 = self._solve_x0(x1, y0)
        fx, fy = self.F.f(x0, y0)
        return math.hypot(fx - x1, fy - self.y_of(x1, y0))


def implicit_from_map(F: PlaneMap, box: BoxRegion, tol: float = 1e-12) -> ImplicitRep:
    """Build the cross-coordinate rep of F on `box` by 1-D solves."""
    return NumericRep(F, box, tol)


class ComposedRep(ImplicitRep):
    """Star product of two reps, solved per point by contraction iteration."""

    def __init__(self, first: ImplicitRep, second: ImplicitRep, tol=1e-12, budget=200):
        self.first = first
        self.second = second
        self.tol = tol
        self.budget = budget
        self.word = None
        self._cache = {}

    def solve_inner(self, x2, y0):
        """Fixed point (x1, w1): x1 = second.x_of(x2, w1), w1 = first.y_of(x1, y0)."""
        key = (x2, y0)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        w1 = 0.0
        x1 = self.second.x_of(x2, w1)
        inner_tol = max(self.tol * 1e-2, 1e-15)
        for _ in range(self.budget):
            x1n = self.second.x_of(x2, w1)
            w1n = self.first.y_of(x1n, y0)
            delta = abs(x1n - x1) + abs(w1n - w1)
            x1, w1 = x1n, w1n
            if delta <= inner_tol:
                break
        else:
            raise NumericalError(
                f"composition iteration did not contract within {self.budget} "
                f"steps (last delta {delta:.3e})"
            )
        if len(self._cache) > 20000:
            self._cache.clear()
        self._cache[key] = (x1, w1)
        return x1, w1

    def x_of(self, x2, y0):
        x1, _ = self.solve_inner(x2, y0)
        return self.first.x_of(x1, y0)

    def y_of(self, x2, y0):
        _, w1 = self.solve_inner(x2, y0)
        return self.second.y_of(x2, w1)

    def _pieces(self, x2, y0):
        x1, w1 = self.solve_inner(x2, y0)
        a2 = self.second.dx_dx1(x2, w1)  # d x1 / d x2 at fixed w1
        b2 = self.second.dx_dy0(x2, w1)  # d x1 / d w1
        c1 = self.first.dy_dx1(x1, y0)  # d w1 / d x1
        d1 = self.first.dy_dy0(x1, y0)  # d w1 / d y0
        delta = 1 - b2 * c1
        return x1, w1, a2, b2, c1, d1, delta

    def dx_dx1(self, x2, y0):
        x1, w1, a2, b2, c1, d1, delta = self._pieces(x2, y0)
        return self.first.dx_dx1(x1, y0) * a2 / delta

    def dx_dy0(self, x2, y0):
        x1, w1, a2, b2, c1, d1, delta = self._pieces(x2, y0)
        return self.first.dx_dx1(x1, y0) * (b2 * d1) / delta + self.first.dx_dy0(
            x1, y0
        )

    def dy_dx1(self, x2, y0):
        x1, w1, a2, b2, c1, d1, delta = self._pieces(x2, y0)
        return self.second.dy_dx1(x2, w1) + self.second.dy_dy0(x2, w1) * (
            c1 * a2
        ) / delta

    def dy_dy0(self, x2, y0):
        x1, w1, a2, b2, c1, d1, delta = self._pieces(x2, y0)
        return self.second.dy_dy0(x2, w1) * d1 / delta


def star_product(r1: ImplicitRep, r2: ImplicitRep, tol: float = 1e-12, budget=200):
    """Composite rep of (r1 then r2) on the intersected domain.

    Affine factors compose exactly; anything else goes through the
    contraction solver.
    """
    if isinstance(r1, AffineRep) and isinstance(r2, AffineRep):
        return r1.compose(r2)
    return ComposedRep(r1, r2, tol=tol, budget=budget)


def word_rep(word, system, tol: float = 1e-12) -> ImplicitRep:
    """Rep of a hyperbolic word, composed by balanced binary folding."""
    kinds = word.kinds() if hasattr(word, "kinds") else []
    for k in kinds:
        if k != "hyperbolic":
            raise DomainError("word_rep needs a purely hyperbolic word")
    letters = list(word)
    if not letters:
        return identity_rep()

    def build(seg):
        if len(seg) == 1:
            return system.generator_rep(seg[0])
        mid = len(seg) // 2
        return star_product(build(seg[:mid]), build(seg[mid:]), tol=tol)

    rep = build(letters)
    rep.word = word
    return rep


# ---------------------------------------------------------------------------
# widths, distortion, manifolds
# ---------------------------------------------------------------------------

Widths = namedtuple("Widths", "w_min w_max h_min h_max")

DistortionRecord = namedtuple(
    "DistortionRecord",
    "dlogdx_dx dlogdx_dy dlogdy_dx dlogdy_dy d2x_dyy d2y_dxx",
)


def _grid_extrema(fn, grid=33, refine=3):
    """Min/max of |fn(x1,y0)| over I^2 with local refinement passes."""

    def scan(cx, cy, half, n):
        lo_v = hi_v = None
        lo_pt = hi_pt = (cx, cy)
        for i in range(n):
            for j in range(n):
                x = cx - half + 2 * half * i / (n - 1)
                y = cy - half + 2 * half * j / (n - 1)
                x = min(1.0, max(-1.0, x))
                y = min(1.0, max(-1.0, y))
                v = abs(fn(x, y))
                if lo_v is None or v < lo_v:
                    lo_v, lo_pt = v, (x, y)
                if hi_v is None or v > hi_v:
                    hi_v, hi_pt = v, (x, y)
        return lo_v, lo_pt, hi_v, hi_pt

    lo_v, lo_pt, hi_v, hi_pt = scan(0.0, 0.0, 1.0, grid)
    half = 2.0 / (grid - 1)
    for _ in range(refine):
        v, p, _, _ = scan(lo_pt[0], lo_pt[1], half, 9)
        if v < lo_v:
            lo_v, lo_pt = v, p
        _, _, v, p = scan(hi_pt[0], hi_pt[1], half, 9)
        if v > hi_v:
            hi_v, hi_pt = v, p
        half /= 4
    return lo_v, hi_v


def extremal_widths(rep: ImplicitRep, grid=33, refine=3) -> Widths:
    """Extremes of |d x_of/d x1| (widths) and |d y_of/d y0| (heights), log-space."""
    if isinstance(rep, AffineRep):
        w = abs(LogReal.from_value(rep.ax))
        h = abs(LogReal.from_value(rep.dy))
        return Widths(w, w, h, h)
    w_lo, w_hi = _grid_extrema(rep.dx_dx1, grid, refine)
    h_lo, h_hi = _grid_extrema(rep.dy_dy0, grid, refine)
    return Widths(
        LogReal.from_value(w_lo),
        LogReal.from_value(w_hi),
        LogReal.from_value(h_lo),
        LogReal.from_value(h_hi),
    )


def box_width(rep: ImplicitRep, grid=17) -> LogReal:
    """Width of the word box, measured by horizontal slicing: the largest
    x-extent |x_of(1, y) - x_of(-1, y)| over y."""
    if isinstance(rep, AffineRep):
        return abs(LogReal.from_value(2 * rep.ax))
    best = 0.0
    for j in range(grid):
        y = -1 + 2 * j / (grid - 1)
        best = max(best, abs(rep.x_of(1.0, y) - rep.x_of(-1.0, y)))
    return LogReal.from_value(best)


def distortion(rep: ImplicitRep, grid=17, step=1e-6) -> DistortionRecord:
    """The six log-derivative suprema controlling nonlinearity on I^2."""
    if isinstance(rep, AffineRep):
        z = 0.0
        return DistortionRecord(z, z, z, z, z, z)

    def sup(fn):
        best = 0.0
        for i in range(grid):
            for j in range(grid):
                x = -0.98 + 1.96 * i / (grid - 1)
                y = -0.98 + 1.96 * j / (grid - 1)
                best = max(best, abs(fn(x, y)))
        return best

    def dlog(fn, wrt):
        def g(x, y):
            if wrt == "x":
                a, b = fn(x + step, y), fn(x - step, y)
            else:
                a, b = fn(x, y + step), fn(x, y - step)
            mid = fn(x, y)
            if mid == 0:
                raise NumericalError("degenerate rep: vanishing derivative")
            return (a - b) / (2 * step) / mid

        return g

    return DistortionRecord(
        sup(dlog(rep.dx_dx1, "x")),
        sup(dlog(rep.dx_dx1, "y")),
        sup(dlog(rep.dy_dy0, "x")),
        sup(dlog(rep.dy_dy0, "y")),
        sup(rep.d2x_dy0dy0),
        sup(rep.d2y_dx1dx1),
    )


def distortion_bound(record: DistortionRecord) -> float:
    """B = 2 exp(2 sqrt(2) D) relating |dx_of/dx1| to the box width."""
    d = max(record)
    return 2.0 * math.exp(2.0 * math.sqrt(2.0) * d)


class ManifoldCurve:
    """A local invariant curve with its reported C0 error."""

    def __init__(self, evaluate, error: LogReal, side: str, depth: int):
        self._evaluate = evaluate
        self.error = error
        self.side = side
        self.depth = depth

    def __call__(self, t):
        return self._evaluate(t)


def invariant_manifold(seq, depth: int, system, tol: float = 1e-12) -> ManifoldCurve:
    """Finite-depth local stable/unstable manifold of a one-sided sequence.

    Right sequences give a near-vertical curve y -> x; left sequences give a
    near-horizontal curve x -> y.  The error bound is twice the extremal
    width/height of the truncation.
    """
    if depth < 1:
        raise DomainError("depth must be >= 1")
    word = seq.truncate(depth)
    rep = word_rep(word, system, tol)
    widths = extremal_widths(rep)
    if seq.direction == "right":
        return ManifoldCurve(
            lambda y: rep.x_of(0.0, y), 2 * widths.w_max, "stable", depth
        )
    return ManifoldCurve(
        lambda x: rep.y_of(x, 0.0), 2 * widths.h_max, "unstable", depth
    )


# ---------------------------------------------------------------------------
# cone diagnostics
# ---------------------------------------------------------------------------


def check_hyperbolic(F: PlaneMap, box: BoxRegion, cones: ConeParams = None, grid=15):
    """Sampled verification of the hyperbolic-transformation conditions.

    Items: (1) the box maps into the unit square with its vertical boundaries
    sent to the square's vertical boundary; (2) the horizontal cone is
    DF-invariant with lambda-expansion of the first coordinate; (3) the
    vertical cone is DF^{-1}-invariant with lambda-expansion of the second.
    The identity on the full square passes by the explicit exception.
    """
    cones = cones or ConeParams()
    report = {
        "boundary": {"ok": True, "worst": 0.0, "witness": None},
        "cone_forward": {"ok": True, "worst": 0.0, "witness": None},
        "cone_backward": {"ok": True, "worst": 0.0, "witness": None},
        "identity_exception": False,
    }
    if F.is_identity:
        report["identity_exception"] = True
        report["ok"] = True
        return report
    th, lam = cones.theta, cones.lam
    tol = 1e-9
    for j in range(grid):
        y = box.y_lo + (box.y_hi - box.y_lo) * j / (grid - 1)
        for side in (box.phi_minus, box.phi_plus):
            xb, yb = F.f(side(y), y)
            err = abs(abs(xb) - 1.0)
            if err > report["boundary"]["worst"]:
                report["boundary"]["worst"] = err
                report["boundary"]["witness"] = (side(y), y)
            if err > tol or abs(yb) > 1 + tol:
                report["boundary"]["ok"] = False
    for i in range(grid):
        for j in range(grid):
            y = box.y_lo + (box.y_hi - box.y_lo) * (j + 0.5) / grid
            lo, hi = box.phi_minus(y), box.phi_plus(y)
            x = lo + (hi - lo) * (i + 0.5) / grid
            fx, fy = F.f(x, y)
            if abs(fx) > 1 + tol or abs(fy) > 1 + tol:
                report["boundary"]["ok"] = False
                report["boundary"]["worst"] = max(
                    report["boundary"]["worst"], abs(fx) - 1, abs(fy) - 1
                )
            (a, b), (c, d) = F.deriv(x, y)
            # forward: horizontal cone |v_y| <= theta |v_x|
            for vy in (-th, 0.0, th):
                wx = a + b * vy
                wy = c + d * vy
                bad = max(
                    abs(wy) - th * abs(wx), (lam * 1.0 - abs(wx))
                )  # violation amounts
                if bad > report["cone_forward"]["worst"]:
                    report["cone_forward"]["worst"] = bad
                    report["cone_forward"]["witness"] = (x, y, vy)
                if abs(wy) > th * abs(wx) + tol or abs(wx) < lam - tol:
                    report["cone_forward"]["ok"] = False
            # backward: vertical cone |v_x| <= theta |v_y| under DF^{-1}
            det = a * d - b * c
            if det == 0:
                report["cone_backward"]["ok"] = False
                continue
            ia, ib, ic, id_ = d / det, -b / det, -c / det, a / det
            for vx in (-th, 0.0, th):
                wx = ia * vx + ib
                wy = ic * vx + id_
                bad = max(abs(wx) - th * abs(wy), lam - abs(wy))
                if bad > report["cone_backward"]["worst"]:
                    report["cone_backward"]["worst"] = bad
                    report["cone_backward"]["witness"] = (x, y, vx)
                if abs(wx) > th * abs(wy) + tol or abs(wy) < lam - tol:
                    report["cone_backward"]["ok"] = False
    report["ok"] = all(
        report[k]["ok"] for k in ("boundary", "cone_forward", "cone_backward")
    )
    return report
