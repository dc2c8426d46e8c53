"""The explicit model family: an affine N-branch horseshoe with quadratic folds.

Generators (one per branch) are the affine maps

    F_aj(x, y) = (Cj^{-1}(x), s * Cj(y)),      Cj: [-1,1] -> Ij affine,

with s = sqrt(delta); folds (one per consecutive branch pair) are

    F_fj(x, y) = (x^2 + y + p_j, -s * x)

on a small box around the critical line x = 0.  The module also builds the
stable/unstable Cantor set approximations with their thickness, the
gap-overlap verdicts, the dissipation diagnostic, and the degree-6 polynomial
map family used for sanity scans.
"""

from __future__ import annotations

import math
import random
from collections import namedtuple
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from .numerics import (
    FLOAT_BACKEND,
    RATIONAL_BACKEND,
    as_fraction,
    log_of,
    rational_sqrt,
)
from .hyperbolic import (
    AffineRep,
    BoxRegion,
    PlaneMap,
    identity_rep,
)
from .symbolic import FOLD, HYPERBOLIC, Arrow, TransitionGraph, Word

VERTEX = "v"


class ModelError(ValueError):
    pass


class PrecisionError(ModelError):
    pass


def generator_label(j: int) -> str:
    return f"a{j}"


def fold_label(j: int) -> str:
    return f"f{j}"


@dataclass(frozen=True)
class ModelParams:
    """Branch count N, root scale s = sqrt(delta), fold offsets p."""

    N: int
    sqrt_delta: object  # float or Fraction
    p: Tuple[object, ...]
    backend: str = FLOAT_BACKEND
    strict: bool = True

    @classmethod
    def create(cls, N, delta, p=None, backend=FLOAT_BACKEND, sqrt_digits=30,
               strict=True):
        """Build parameters from an exact delta (string/Fraction accepted).

        `strict` enforces the smallness rule delta^(1/3) < 1/(2N), under which
        the cube-root admissibility margin for the fold offsets is meaningful.
        Relaxing it allows exploratory larger-delta systems (offsets are then
        only required to sit in the middle half of their interval).
        """
        if N < 2 or N % 2 != 0:
            raise ModelError("branch count must be even and >= 2")
        if backend == RATIONAL_BACKEND:
            d = as_fraction(delta)
            s = rational_sqrt(d, sqrt_digits)
        elif backend == FLOAT_BACKEND:
            d = float(as_fraction(delta))
            s = math.sqrt(d)
        else:
            raise ModelError(f"unknown backend {backend!r}")
        params = cls(N, s, (), backend, strict)
        # smallness: delta^(1/3) < 1/(2N), compared via cubes to stay exact
        if strict and not (params.delta * (2 * N) ** 3 < 1):
            raise ModelError(
                f"delta too large for N={N}: need delta < 1/(8N^3) "
                "(pass strict=False to relax)"
            )
        if p is None:
            p = params.centered_p()
        else:
            p = tuple(params.cast(v) for v in p)
        params = cls(N, s, p, backend, strict)
        params.validate_p()
        return params

    # -- backend helpers ---------------------------------------------------
    def cast(self, v):
        if self.backend == RATIONAL_BACKEND:
            return as_fraction(v)
        return float(as_fraction(v)) if not isinstance(v, float) else v

    def ratio(self, num, den):
        if self.backend == RATIONAL_BACKEND:
            return Fraction(num, den)
        return num / den

    @property
    def delta(self):
        return self.sqrt_delta * self.sqrt_delta

    @property
    def slope(self):
        """Contraction rate of each branch: 1/N - delta^2."""
        return self.ratio(1, self.N) - self.delta * self.delta

    def center(self, j: int):
        """Midpoint of the j-th branch interval (1-based)."""
        return self.ratio(2 * j - 1, self.N) - 1

    def interval(self, j: int):
        d2 = self.delta * self.delta
        lo = self.ratio(2 * (j - 1), self.N) - 1 + d2
        hi = self.ratio(2 * j, self.N) - 1 - d2
        return lo, hi

    def branch(self, j: int):
        """The affine contraction of branch j as (slope, offset)."""
        return self.slope, self.center(j)

    def fold_box_halfwidth(self):
        return self.delta * self.delta / 4

    def centered_p(self):
        """Fold offsets at the midpoints of the next branch interval."""
        return tuple(self.center(j + 1) for j in range(1, self.N))

    def p_margin(self):
        """Required distance of each p_j from its interval boundary: delta^(1/3)."""
        return float(self.delta) ** (1.0 / 3.0)

    def validate_p(self):
        if len(self.p) != self.N - 1:
            raise ModelError(f"need {self.N - 1} fold offsets, got {len(self.p)}")
        for j, pj in enumerate(self.p, start=1):
            lo, hi = self.interval(j + 1)
            if not (lo < pj < hi):
                raise ModelError(f"fold offset p{j} outside its branch interval")
            for d in (pj - lo, hi - pj):
                if self.strict:
                    # distance >= delta^(1/3), via cubes (exact for rationals)
                    ok = d * d * d >= self.delta
                else:
                    ok = 4 * d >= hi - lo  # middle half of the interval
                if not ok:
                    raise ModelError(
                        f"fold offset p{j} too close to the interval boundary"
                    )

    def with_p(self, p) -> "ModelParams":
        params = ModelParams(
            self.N, self.sqrt_delta, tuple(p), self.backend, self.strict
        )
        params.validate_p()
        return params

    def random_p(self, rng: random.Random):
        """A uniform admissible offset vector (float positions)."""
        out = []
        for j in range(1, self.N):
            lo, hi = self.interval(j + 1)
            m = self.p_margin() if self.strict else (float(hi) - float(lo)) / 4
            lo_f, hi_f = float(lo) + m, float(hi) - m
            out.append(self.cast(rng.uniform(lo_f, hi_f)))
        return tuple(out)


# ---------------------------------------------------------------------------
# the system
# ---------------------------------------------------------------------------

Generator = namedtuple("Generator", "label rep box plane_map")
FoldArrow = namedtuple("FoldArrow", "label index box plane_map")


class SystemAC:
    """A graph-indexed union of hyperbolic generators and folding maps."""

    generators_depend_on_p = False
    fold_p_additive = True  # fold offsets enter the first coordinate additively

    def __init__(self, graph, params, generators, folds, rep_cache=None):
        self.graph = graph
        self.params = params
        self.generators = generators
        self.folds = folds
        self._rep_cache = rep_cache if rep_cache is not None else {}
        self.shared_cache = {}

    # projection adapted to the stable fibers: first coordinate
    def project(self, x, y=None, vertex=VERTEX):
        return x

    def generator_rep(self, label) -> AffineRep:
        return self.generators[label].rep

    def fold(self, label) -> FoldArrow:
        return self.folds[label]

    def fold_point(self, label, x, y):
        """Fold image computed in the backend arithmetic (exact if rational)."""
        return fold_image_point(self, label, x, y)

    def fold_for_word(self, word: Word) -> Optional[str]:
        """The fold reachable after the word: branch j feeds fold j."""
        if word.is_empty():
            return None
        last = word.letters[-1]
        j = int(last[1:])
        lbl = fold_label(j)
        return lbl if lbl in self.folds else None

    def word_rep(self, word: Word, tol: float = 1e-12):
        return self._build_rep(word.letters)

    def _build_rep(self, letters):
        if not letters:
            return identity_rep()
        cached = self._rep_cache.get(letters)
        if cached is not None:
            return cached
        head = self._build_rep(letters[:-1]) if len(letters) > 1 else None
        if head is None:
            rep = self.generator_rep(letters[0])
        else:
            rep = head.compose(self.generator_rep(letters[-1]))
        self._rep_cache[letters] = rep
        return rep

    def with_p(self, p) -> "SystemAC":
        new_params = self.params.with_p(p)
        system = build_model(new_params)
        if not self.generators_depend_on_p:
            system._rep_cache = self._rep_cache
            system.shared_cache = self.shared_cache
        return system


def build_model(params: ModelParams) -> SystemAC:
    """Assemble the model system and verify its disjointness facts."""
    N = params.N
    s = params.sqrt_delta
    slope = params.slope
    d2 = params.delta * params.delta

    # branch intervals must be pairwise disjoint with the fold box in the
    # central gap
    prev_hi = None
    for j in range(1, N + 1):
        lo, hi = params.interval(j)
        if not (lo < hi):
            raise ModelError(f"branch interval {j} is empty: delta too large")
        if prev_hi is not None and not (prev_hi < lo):
            raise ModelError(f"branch intervals {j-1},{j} overlap")
        prev_hi = hi
    half = params.fold_box_halfwidth()
    mid_hi = params.interval(N // 2)[1]
    mid_lo = params.interval(N // 2 + 1)[0]
    if not (mid_hi < -half and half < mid_lo):
        raise ModelError("fold box is not inside the central branch gap")

    vertices = [VERTEX]
    arrows = []
    generators = {}
    for j in range(1, N + 1):
        lbl = generator_label(j)
        arrows.append(Arrow(lbl, VERTEX, VERTEX, HYPERBOLIC))
        cj = params.center(j)
        lo, hi = params.interval(j)
        rep = AffineRep(slope, cj, s * slope, s * cj)
        fslope, fcj, fs = float(slope), float(cj), float(s)

        def gmap(x, y, _a=fslope, _c=fcj, _s=fs):
            return ((x - _c) / _a, _s * (_a * y + _c))

        def gderiv(x, y, _a=fslope, _s=fs):
            return ((1.0 / _a, 0.0), (0.0, _s * _a))

        box = BoxRegion.rectangle(float(lo), float(hi))
        generators[lbl] = Generator(
            lbl, rep, box, PlaneMap(gmap, gderiv, box, label=lbl)
        )

    folds = {}
    for j in range(1, N):
        lbl = fold_label(j)
        arrows.append(Arrow(lbl, VERTEX, VERTEX, FOLD))
        lo, hi = params.interval(j)
        pj = float(params.p[j - 1])
        fs = float(params.sqrt_delta)

        def fmap(x, y, _p=pj, _s=fs):
            return (x * x + y + _p, -_s * x)

        def fderiv(x, y, _s=fs):
            return ((2.0 * x, 1.0), (-_s, 0.0))

        box = BoxRegion.rectangle(
            -float(half), float(half), float(s * lo), float(s * hi)
        )
        folds[lbl] = FoldArrow(lbl, j, box, PlaneMap(fmap, fderiv, box, label=lbl))

    graph = TransitionGraph(vertices, arrows)
    return SystemAC(graph, params, generators, folds)


def fold_image_point(system: SystemAC, fold_lbl: str, x, y):
    """Exact fold map in the system's backend arithmetic."""
    j = system.folds[fold_lbl].index
    p = system.params.p[j - 1]
    s = system.params.sqrt_delta
    return (x * x + y + p, -s * x)


# ---------------------------------------------------------------------------
# invariant Cantor sets
# ---------------------------------------------------------------------------


@dataclass
class CantorApprox:
    side: str
    depth: int
    los: np.ndarray
    his: np.ndarray
    thickness: float
    closed_form: float
    params: ModelParams = field(repr=False, default=None)

    @property
    def hull(self):
        return (float(self.los[0]), float(self.his[-1]))

    def translate(self, t: float) -> "CantorApprox":
        return CantorApprox(
            self.side, self.depth, self.los + t, self.his + t,
            self.thickness, self.closed_form, self.params,
        )

    def restrict(self, lo: float, hi: float) -> "CantorApprox":
        mask = (self.los >= lo) & (self.his <= hi)
        return CantorApprox(
            self.side, self.depth, self.los[mask], self.his[mask],
            self.thickness, self.closed_form, self.params,
        )


def thickness_scan(los: np.ndarray, his: np.ndarray) -> float:
    """Bridge/gap thickness of a finite union of disjoint sorted intervals.

    For each bounded gap, the bridge on either side runs to the nearest
    strictly longer gap (or to the hull end); the thickness is the minimum
    ratio bridge/gap over all gaps and sides.
    """
    n = len(los)
    if n < 2:
        return float("inf")
    gaps = los[1:] - his[:-1]  # gap i sits right of interval i
    m = len(gaps)
    left_bound = np.empty(m)  # leftmost coordinate of the left bridge
    stack = []  # indices of gaps, decreasing sizes
    for i in range(m):
        while stack and gaps[stack[-1]] <= gaps[i]:
            stack.pop()
        # bridge stops at the right edge of the nearest strictly larger gap
        left_bound[i] = los[stack[-1] + 1] if stack else los[0]
        stack.append(i)
    right_bound = np.empty(m)
    stack = []
    for i in range(m - 1, -1, -1):
        while stack and gaps[stack[-1]] <= gaps[i]:
            stack.pop()
        # ... and at the left edge of the nearest larger gap on the right
        right_bound[i] = his[stack[-1]] if stack else his[-1]
        stack.append(i)
    left_bridge = his[:-1] - left_bound
    right_bridge = right_bound - los[1:]
    with np.errstate(divide="ignore"):
        ratios = np.minimum(left_bridge, right_bridge) / gaps
    return float(ratios.min())


def stable_thickness_exact(params: ModelParams) -> float:
    N, d = params.N, float(params.delta)
    return (N - 1 + N * d * d) / (d * d * N * N) - 1


def unstable_thickness_asymptotic(params: ModelParams) -> float:
    N = params.N
    return float(params.sqrt_delta) * (N - 1) / N


def stable_gap_size(params: ModelParams) -> float:
    N, d = params.N, float(params.delta)
    return 2 * d * d * N / (N - 1 + N * d * d)


def cantor_approx(side: str, depth: int, params: ModelParams) -> CantorApprox:
    """Level-`depth` iterated-function-system approximation of the stable or
    unstable invariant Cantor set, with measured thickness."""
    if depth < 1:
        raise ModelError("depth must be >= 1")
    d2 = float(params.delta) ** 2
    if d2 < 1e-14:
        raise PrecisionError(
            "Cantor gaps fall below float resolution; use exact descent "
            "(selection witnesses) instead of a global approximation"
        )
    if side == "stable":
        slope, offs = float(params.slope), [
            float(params.center(j)) for j in range(1, params.N + 1)
        ]
        closed = stable_thickness_exact(params)
    elif side == "unstable":
        s = float(params.sqrt_delta)
        slope = s * float(params.slope)
        offs = [s * float(params.center(j)) for j in range(1, params.N + 1)]
        closed = unstable_thickness_asymptotic(params)
    else:
        raise ModelError(f"unknown side {side!r}")
    los = np.array([-1.0])
    his = np.array([1.0])
    for _ in range(depth):
        los = np.concatenate([slope * los + c for c in offs])
        his = np.concatenate([slope * his + c for c in offs])
    tau = thickness_scan(los, his)
    return CantorApprox(side, depth, los, his, tau, closed, params)


INTERSECT = "intersect"
K1_IN_GAP = "k1_in_gap_of_k2"
K2_IN_GAP = "k2_in_gap_of_k1"
INTERLEAVED = "interleaved"


def _hull_in_gap(hull, los, his) -> bool:
    lo, hi = hull
    if hi < los[0] or lo > his[-1]:
        return True  # outside the hull: the unbounded gap
    idx = np.searchsorted(his, lo, side="left")
    if idx >= len(los):
        return True
    # candidate gap: between interval idx-1 and idx
    gap_lo = his[idx - 1] if idx > 0 else -np.inf
    gap_hi = los[idx]
    return gap_lo < lo and hi < gap_hi


def intervals_intersect(los1, his1, los2, his2) -> bool:
    if len(los1) == 0 or len(los2) == 0:
        return False
    idx = np.searchsorted(los2, his1, side="right")
    has_left = idx > 0
    # his2 is increasing for disjoint sorted intervals
    prev_hi = np.where(has_left, his2[np.maximum(idx - 1, 0)], -np.inf)
    return bool(np.any(has_left & (prev_hi >= los1)))


def gap_check(K1: CantorApprox, K2: CantorApprox) -> str:
    """Overlap verdict for two finite Cantor approximations."""
    if intervals_intersect(K1.los, K1.his, K2.los, K2.his):
        return INTERSECT
    if _hull_in_gap(K1.hull, K2.los, K2.his):
        return K1_IN_GAP
    if _hull_in_gap(K2.hull, K1.los, K1.his):
        return K2_IN_GAP
    return INTERLEAVED


# ---------------------------------------------------------------------------
# fixed points of one-sided sequences (exact in the rational backend)
# ---------------------------------------------------------------------------


def _affine_chain_value(letters_outer_first, tail_outer_first, slope, centers, pre_scale=1):
    """Value of an infinite nested composition m1(m2(...)) of affine maps
    x -> pre_scale*(slope*x + c_j); `letters_outer_first` then the periodic
    tail repeated."""

    def compose(acc, letter):
        m, b = acc
        j = int(letter[1:])
        c = centers[j - 1]
        # acc corresponds to the outer part; append the next inner map
        return (m * (pre_scale * slope), m * (pre_scale * c) + b)

    m_pre, b_pre = 1, 0
    for letter in letters_outer_first:
        m_pre, b_pre = compose((m_pre, b_pre), letter)
    m_per, b_per = 1, 0
    for letter in tail_outer_first:
        m_per, b_per = compose((m_per, b_per), letter)
    fixed = b_per / (1 - m_per)
    return m_pre * fixed + b_pre


def stable_point(seq, params: ModelParams):
    """x-coordinate of the vertical stable leaf of a right sequence."""
    centers = [params.center(j) for j in range(1, params.N + 1)]
    if not seq.period:
        raise ModelError("stable_point needs an eventually periodic sequence")
    return _affine_chain_value(seq.prefix, seq.period, params.slope, centers)


def unstable_point(seq, params: ModelParams):
    """y-coordinate of the horizontal unstable leaf of a left sequence."""
    centers = [params.center(j) for j in range(1, params.N + 1)]
    if not seq.period:
        raise ModelError("unstable_point needs an eventually periodic sequence")
    outer = [seq.letter(i) for i in range(1, len(seq.prefix) + 1)]
    tail = list(reversed(seq.period))
    return _affine_chain_value(
        outer, tail, params.slope, centers, pre_scale=params.sqrt_delta
    )


def model_v(u_tail, s_head, j: int, params: ModelParams):
    """Closed-form tangency offset y_u - x_s + p_j of the model."""
    if u_tail.letter(1) != generator_label(j):
        raise ModelError(
            f"unstable sequence must end with branch {j} to enter fold {j}"
        )
    y_u = unstable_point(u_tail, params)
    x_s = stable_point(s_head, params)
    return y_u - x_s + params.p[j - 1]


# ---------------------------------------------------------------------------
# dissipation diagnostic
# ---------------------------------------------------------------------------


def dissipation_margin(params: ModelParams, eps: float = 0.1) -> float:
    """max over generators of |DF| * |det DF|^eps, computed in log-space.

    Below 1 means the system contracts area fast enough relative to its
    expansion (moderate dissipativeness).
    """
    slope_log = log_of(params.slope)
    s_log = log_of(params.sqrt_delta)
    norm_log = max(-slope_log, s_log + slope_log)  # |DF| = max(1/slope, s*slope)
    det_log = s_log  # det DF = s for every generator
    return math.exp(norm_log + eps * det_log)


def per_letter_exponent(params: ModelParams) -> float:
    """The exponent e with (per-letter height)^e = per-letter width.

    Used to calibrate the width/height certificates: for a single branch the
    width is `slope` and the height is `s*slope`, so e = log(slope)/log(s*slope).
    """
    slope_log = log_of(params.slope)
    return slope_log / (slope_log + log_of(params.sqrt_delta))


# ---------------------------------------------------------------------------
# degree-6 polynomial family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HenonParams:
    b: float = 0.0
    p: Tuple[float, float, float, float, float] = (0.0, 0.0, 0.0, 0.0, 0.0)


OrbitRecord = namedtuple("OrbitRecord", "points escaped escape_time")


def henon_map(params: HenonParams):
    b, p = params.b, params.p

    def f(x, y):
        # coefficients p0..p4 multiply x^0..x^4
        return (
            x**6 + p[0] + p[1] * x + p[2] * x**2 + p[3] * x**3 + p[4] * x**4 - y,
            b * x,
        )

    return f


def henon_iterate(
    params: HenonParams, z0, steps: int, escape_radius: float = 100.0
) -> OrbitRecord:
    if steps < 1:
        raise ModelError("steps must be >= 1")
    f = henon_map(params)
    x, y = float(z0[0]), float(z0[1])
    points = [(x, y)]
    for k in range(1, steps + 1):
        try:
            x, y = f(x, y)
        except OverflowError:
            return OrbitRecord(points, True, k)
        if not (math.isfinite(x) and math.isfinite(y)):
            return OrbitRecord(points, True, k)
        points.append((x, y))
        if math.hypot(x, y) > escape_radius:
            return OrbitRecord(points, True, k)
    return OrbitRecord(points, False, None)


def henon_scan(
    params: HenonParams,
    x_range=(-1.3, 1.3),
    y_range=(-0.3, 0.3),
    grid: int = 41,
    steps: int = 400,
    escape_radius: float = 100.0,
) -> np.ndarray:
    """Escape times over a phase-space rectangle; -1 marks bounded samples."""
    out = np.empty((grid, grid), dtype=np.int64)
    xs = np.linspace(x_range[0], x_range[1], grid)
    ys = np.linspace(y_range[0], y_range[1], grid)
    for i, x0 in enumerate(xs):
        for j, y0 in enumerate(ys):
            rec = henon_iterate(params, (x0, y0), steps, escape_radius)
            out[j, i] = rec.escape_time if rec.escaped else -1
    return out


def degree6_poly(x: float) -> float:
    """32 x^6 - 48 x^4 + 18 x^2 - 1: the degree-6 interval polynomial whose
    critical values alternate between -1 and 1."""
    return 32 * x**6 - 48 * x**4 + 18 * x**2 - 1


def degree6_critical_points():
    r = math.sqrt(3) / 2
    return [-r, -0.5, 0.0, 0.5, r]


def degree6_critical_values_exact():
    """Critical values evaluated exactly through u = x^2 (so the irrational
    critical abscissas do not pollute the arithmetic)."""
    q = lambda u: 32 * u**3 - 48 * u**2 + 18 * u - 1
    us = [Fraction(3, 4), Fraction(1, 4), Fraction(0), Fraction(1, 4), Fraction(3, 4)]
    return [q(u) for u in us]


# ---------------------------------------------------------------------------
# perturbed generators (for solver stress tests)
# ---------------------------------------------------------------------------


def perturbed_generator(j: int, params: ModelParams, eps_cubic: float = 0.01) -> PlaneMap:
    """Branch map with a cubic vertical shear: the expanding coordinate
    becomes Cj^{-1}(x) + eps*y^3, breaking y-independence."""
    slope, c = float(params.slope), float(params.center(j))
    s = float(params.sqrt_delta)
    lo, hi = params.interval(j)

    def f(x, y):
        return ((x - c) / slope + eps_cubic * y**3, s * (slope * y + c))

    def deriv(x, y):
        return ((1.0 / slope, 3.0 * eps_cubic * y**2), (0.0, s * slope))

    # exact preimage strip of the unit square: the shear bends the box sides
    box = BoxRegion(
        lambda y: c + slope * (-1.0 - eps_cubic * y**3),
        lambda y: c + slope * (1.0 - eps_cubic * y**3),
    )
    return PlaneMap(f, deriv, box, label=f"{generator_label(j)}~cubic")
