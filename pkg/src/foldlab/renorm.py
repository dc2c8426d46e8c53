"""Fold normal forms, rescaling factors, charts, and chain verification.

Each chain index j carries a word c_j ending at a fold.  Near the fold's
tangency point the composite map has the normal form q*x^2 + b*y + r(x,y);
the rescaling factors

    sigma_j = horizontal contraction of the word map,
    gamma_j = prod_{k>=1} |sigma_{j+k}/q_{j+k-1}|^(2^-k),
    gamma_breve_j = prod_{k>=1} |width of the (j+k)-th cylinder|^(2^-k)

set the size of the renormalization boxes B_j = Phi_j((-0.3,0.3)^2).  The
verifier checks the smallness hypotheses (ratio thresholds), the exact
log-space identity gamma_j^2 = |sigma_{j+1}/q_j| * gamma_{j+1}, the sandwich
bounds, and the box inclusion F^{c_{j+1}} o F^{fold_j}(B_j) subset B_{j+1} on
a sampled grid.  Because the gammas fall far below floating resolution at
positions of order one, points are carried as an exact anchor plus log-scale
offsets.

All products are computed in log-space with a geometric tail extrapolation
beyond the materialized chain (widths relative to the base box width, so the
extended sequence keeps the measured structure); the closed-form tail makes
the gamma identity exact up to float rounding regardless of the horizon.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .hyperbolic import AffineRep, distortion, distortion_bound
from .numerics import LogReal, log_of
from .symbolic import Word
from . import tangency as tg


class RenormError(RuntimeError):
    pass


class DegenerateFoldError(RenormError):
    pass


class ChartDomainError(RenormError):
    """A composite sample left the expected region; carries the sample."""

    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


CHART_RADIUS = 0.3
RATIO_THRESHOLD = 0.1
INCLUSION_GRID = 21
INCLUSION_MARGIN = 0.05
IDENTITY_TOL = 1e-12
JET_TOL = 1e-8
R0_RATIO = 0.01
HORIZON_DEFAULT = 40
SANDWICH_SLACK = 1e-9


# ---------------------------------------------------------------------------
# the chain
# ---------------------------------------------------------------------------


class Chain:
    """A finite run of tangency words c_1..c_n with their system and schedule.

    Derived data (word reps, normal forms, rescaling factors) are cached on
    the chain; indices are 1-based throughout.
    """

    def __init__(self, words: Sequence[Word], system, sched=None):
        if not words:
            raise RenormError("chain needs at least one word")
        self.words = list(words)
        self.system = system
        self.sched = sched
        self._normal_forms: Dict[int, "NormalForm"] = {}
        self._factors = None
        for j in range(1, len(self.words) + 1):
            if system.fold_for_word(self.word(j)) is None:
                raise RenormError(f"chain word {j} does not end at a fold")

    @classmethod
    def from_selection(cls, run_or_state) -> "Chain":
        state = getattr(run_or_state, "state", run_or_state)
        return cls(state.words, state.system, state.sched)

    def __len__(self):
        return len(self.words)

    def word(self, j: int) -> Word:
        return self.words[j - 1]

    def fold(self, j: int) -> str:
        return self.system.fold_for_word(self.word(j))

    def rep(self, j: int):
        return self.system.word_rep(self.word(j))

    @property
    def beta(self) -> float:
        return self.sched.beta if self.sched is not None else 1.5

    def base_width_log(self) -> float:
        """Log of the full horizontal extent of the base box (2 for [-1,1])."""
        los = [float(g.box.x_interval(0.0)[0]) for g in self.system.generators.values()]
        his = [float(g.box.x_interval(0.0)[1]) for g in self.system.generators.values()]
        return math.log(max(his) - min(los) + 2 * float(self.system.params.delta**2))

    def sigma_log(self, j: int) -> float:
        """Log of the horizontal contraction of the j-th word map."""
        rep = self.rep(j)
        if isinstance(rep, AffineRep):
            return log_of(abs(rep.ax))
        return abs(LogReal.from_value(rep.dx_dx1(0.0, 0.0))).log

    def width_log(self, j: int) -> float:
        """Log of the horizontal width of the j-th cylinder box."""
        return self.sigma_log(j) + self.base_width_log()

    def height_log(self, j: int) -> float:
        """Log of the vertical extent of the j-th word image."""
        rep = self.rep(j)
        if isinstance(rep, AffineRep):
            return log_of(abs(rep.dy))
        return abs(LogReal.from_value(rep.dy_dy0(0.0, 0.0))).log

    def normal_form(self, j: int) -> "NormalForm":
        if j not in self._normal_forms:
            self._normal_forms[j] = normal_form_fit(j, self, self.system)
        return self._normal_forms[j]

    def factors(self, horizon: int = HORIZON_DEFAULT) -> List["Factors"]:
        if self._factors is None:
            self._factors = rescaling_factors(self, horizon)
        return self._factors


# ---------------------------------------------------------------------------
# normal form at the folds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalForm:
    """q*x^2 + b*y + r(x,y) at the fold of chain index j, centered at the
    critical point of the tangency offset."""

    j: int
    fold: str
    x_crit: object
    anchor_y: object  # unstable-curve height at x_crit
    value: object  # critical value (the constant term)
    q: object
    b: object
    r: Callable[[float, float], float]
    r0: float
    jet_residuals: Tuple[float, float, float]

    @property
    def K(self) -> float:
        """Normal-form constant: max of |q|, 1/|q|, |b|, 1/|b|."""
        q, b = abs(float(self.q)), abs(float(self.b))
        return max(q, 1.0 / q, b, 1.0 / b)


def normal_form_fit(j: int, chain: Chain, system, tol: float = JET_TOL) -> NormalForm:
    """Fit the fold normal form at chain index j.

    The critical abscissa, curvature and anchor come from the tangency data;
    the shear coefficient is the vertical derivative of the fold's first
    coordinate there; r is the exact remainder evaluator.  In the model
    (exact quadratic fold, horizontal unstable curves) q = 1, b = 1, r = 0.
    """
    word = chain.word(j)
    fold = chain.fold(j)
    data = tg.critical_tangency(word, fold, system)
    zx, h = data.zeta
    cast = system.params.cast
    q = data.curvature * cast(Fraction(1, 2))
    if abs(float(q)) < tg.CURVATURE_MIN / 2:
        raise DegenerateFoldError(f"normal-form curvature {float(q):.3g} at index {j}")
    rep = system.word_rep(word)
    a = data.a

    if isinstance(rep, AffineRep):
        def curve(x):
            return rep.y_of(x)
    else:
        def curve(x):
            return rep.y_of(float(x), 0.0)

    # shear coefficient by a symmetric secant in backend arithmetic; exact
    # whenever the fold is affine in y
    t = cast(Fraction(1, 1024))
    b = (system.fold_point(fold, zx, h + t)[0]
         - system.fold_point(fold, zx, h - t)[0]) / (2 * t)
    if b == 0:
        raise DegenerateFoldError(f"vanishing shear coefficient at index {j}")

    def r(x, y):
        px = zx + x
        py = curve(px) + y
        image = system.fold_point(fold, px, py)
        return image[0] - a - q * x * x - b * y

    r0 = float(r(0 * t, 0 * t))
    step = cast(Fraction(1, 10**5))
    fstep = float(step)
    jx = float(r(step, 0 * t) - r(-step, 0 * t)) / (2 * fstep)
    jy = float(r(0 * t, step) - r(0 * t, -step)) / (2 * fstep)
    jxx = float(r(step, 0 * t) - 2 * r(0 * t, 0 * t) + r(-step, 0 * t)) / (
        fstep * fstep
    )
    jets = (abs(jx), abs(jy), abs(jxx))
    if max(jets) > tol:
        raise DegenerateFoldError(
            f"normal-form jets not removed at index {j}: {jets}"
        )
    return NormalForm(j, fold, zx, h, a, q, b, r, abs(r0), jets)


# ---------------------------------------------------------------------------
# rescaling factors (log-space with certified tails)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Factors:
    j: int
    sigma_log: float
    gamma_log: float
    gamma_breve_log: float
    tail_bound: float  # magnitude of the closed-form tail beyond the horizon


def _weighted_tail_sum(vals: List[float], j: int, beta: float, horizon: int,
                       base: float = 0.0) -> Tuple[float, float]:
    """sum_{k>=1} 2^-k v_{j+k} for the sequence extended geometrically beyond
    its last entry (relative to `base`), with the closed-form remainder past
    the horizon included.  Returns (total, |remainder|)."""
    n = len(vals)
    terms = []
    for k in range(1, horizon + 1):
        idx = j + k
        if idx <= n:
            v = vals[idx - 1]
        else:
            v = base + beta ** (idx - n) * (vals[n - 1] - base)
        terms.append(0.5**k * v)
    # beyond the horizon every index is extrapolated: geometric closed form
    ratio = beta / 2.0
    if ratio >= 1.0:
        raise RenormError("tail ratio beta/2 must be < 1 for convergence")
    rem = base * 0.5**horizon + (vals[n - 1] - base) * beta ** (j - n) * (
        ratio ** (horizon + 1) / (1.0 - ratio)
    )
    return math.fsum(terms) + rem, abs(rem)


def rescaling_factors(chain: Chain, horizon: int = HORIZON_DEFAULT) -> List[Factors]:
    """Per-index (sigma, gamma, gamma_breve) in log-space.

    gamma uses the q-normalized contractions |sigma_k / q_{k-1}|; gamma_breve
    uses cylinder widths, extrapolated relative to the base box width so the
    extended sequence keeps the width = base * scale structure.
    """
    n = len(chain)
    beta = chain.beta
    base = chain.base_width_log()
    sig = [chain.sigma_log(k) for k in range(1, n + 1)]
    qlog = [abs(LogReal.from_value(chain.normal_form(k).q)).log
            for k in range(1, n + 1)]
    # entry k (0-based) is log|sigma_{k+1} / q_k|; the k = 0 entry is never
    # consumed (gamma_j only reads indices >= j+1 >= 2)
    contr = [sig[k] - (qlog[k - 1] if k >= 1 else 0.0) for k in range(n)]
    widths = [sig[k] + base for k in range(n)]
    if any(s == 0.0 for s in sig):
        raise DegenerateFoldError("zero horizontal contraction in the chain")
    out = []
    for j in range(1, n + 1):
        g, tail_g = _weighted_tail_sum(contr, j, beta, horizon, base=0.0)
        gb, tail_b = _weighted_tail_sum(widths, j, beta, horizon, base=base)
        out.append(Factors(j, sig[j - 1], g, gb, max(tail_g, tail_b)))
    return out


# ---------------------------------------------------------------------------
# anchored points: exact anchor + log-scale offsets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnchoredPoint:
    """A plane point anchor + offset with the offset carried in log-scale.

    The anchor is exact backend arithmetic; the offsets stay meaningful far
    below floating resolution at positions of order one.
    """

    x: object
    y: object
    ex: LogReal
    ey: LogReal

    def to_floats(self) -> Tuple[float, float]:
        return float(self.x) + self.ex.to_float(), float(self.y) + self.ey.to_float()


def apply_fold(system, fold_lbl: str, pt: AnchoredPoint) -> AnchoredPoint:
    """Push an anchored point through a fold; exact for quadratic folds."""
    idx = system.fold(fold_lbl).index
    p = system.params.p[idx - 1]
    s = system.params.sqrt_delta
    nx = pt.x * pt.x + pt.y + p
    ny = -s * pt.x
    nex = LogReal.from_value(2 * pt.x) * pt.ex + pt.ex * pt.ex + pt.ey
    ney = -(LogReal.from_value(s) * pt.ex)
    return AnchoredPoint(nx, ny, nex, ney)


def apply_letter(system, letter: str, pt: AnchoredPoint) -> AnchoredPoint:
    """Push an anchored point forward through one hyperbolic generator."""
    rep = system.generator_rep(letter)
    if not isinstance(rep, AffineRep):
        raise RenormError("anchored propagation needs affine generators")
    nx = (pt.x - rep.cx) / rep.ax
    ny = rep.dy * pt.y + rep.ey
    nex = pt.ex / LogReal.from_value(rep.ax)
    ney = pt.ey * LogReal.from_value(rep.dy)
    return AnchoredPoint(nx, ny, nex, ney)


def apply_word(system, word: Word, pt: AnchoredPoint) -> AnchoredPoint:
    for letter in word.letters:
        pt = apply_letter(system, letter, pt)
    return pt


# ---------------------------------------------------------------------------
# rescaling charts
# ---------------------------------------------------------------------------


@dataclass
class RescalingChart:
    """Phi_j(X,Y) = (x_crit + gamma X, h(x_crit + gamma X) + (q gamma^2/2b) Y)."""

    j: int
    gamma: LogReal
    y_scale: LogReal  # q * gamma^2 / (2 b), signed
    anchor: Tuple[object, object]
    h_slope: float  # slope of the unstable curve at the anchor
    normal_form: NormalForm

    def forward(self, X: float, Y: float) -> AnchoredPoint:
        ex = LogReal.from_value(X) * self.gamma
        ey = self.y_scale * LogReal.from_value(Y) + LogReal.from_value(self.h_slope) * ex
        return AnchoredPoint(self.anchor[0], self.anchor[1], ex, ey)

    def inverse(self, pt: AnchoredPoint) -> Tuple[float, float]:
        dx = LogReal.from_value(pt.x - self.anchor[0]) + pt.ex
        X = (dx / self.gamma).to_float()
        dy = LogReal.from_value(pt.y - self.anchor[1]) + pt.ey
        dy = dy - LogReal.from_value(self.h_slope) * dx
        Y = (dy / self.y_scale).to_float()
        return X, Y

    def diameter_log(self) -> float:
        """Log of the box diameter; dominated by the horizontal extent."""
        horiz = self.gamma.log + math.log(2 * CHART_RADIUS)
        vert = abs(self.y_scale).log + math.log(2 * CHART_RADIUS)
        return max(horiz, vert) + 0.5 * math.log1p(math.exp(2 * (min(horiz, vert) - max(horiz, vert))))

    def round_trip_error(self, samples: int = 100, seed: int = 7) -> float:
        import random

        rng = random.Random(seed)
        worst = 0.0
        for _ in range(samples):
            X = rng.uniform(-CHART_RADIUS, CHART_RADIUS)
            Y = rng.uniform(-CHART_RADIUS, CHART_RADIUS)
            X2, Y2 = self.inverse(self.forward(X, Y))
            worst = max(worst, abs(X2 - X), abs(Y2 - Y))
        return worst


def chart_eval(j: int, chain: Chain) -> RescalingChart:
    nf = chain.normal_form(j)
    fac = chain.factors()[j - 1]
    gamma = LogReal.from_log(fac.gamma_log)
    q = LogReal.from_value(nf.q)
    b = LogReal.from_value(nf.b)
    y_scale = q * gamma * gamma / (b * 2)
    rep = chain.rep(j)
    if isinstance(rep, AffineRep):
        h_slope = 0.0
    else:
        h_slope = float(rep.dy_dx1(float(nf.x_crit), 0.0))
    return RescalingChart(j, gamma, y_scale, (nf.x_crit, nf.anchor_y), h_slope, nf)


# ---------------------------------------------------------------------------
# the renormalized map
# ---------------------------------------------------------------------------


class RenormalizedMap:
    """F_j = Phi_{j+1}^{-1} o F^{c_{j+1}} o F^{fold_j} o Phi_j on (-0.3,0.3)^2."""

    def __init__(self, j: int, chain: Chain):
        if j + 1 > len(chain):
            raise RenormError(f"renormalized map at {j} needs chain index {j+1}")
        self.j = j
        self.chain = chain
        self.chart = chart_eval(j, chain)
        self.next_chart = chart_eval(j + 1, chain)
        self.fold = chain.fold(j)
        self.word = chain.word(j + 1)
        q = float(chain.normal_form(j).q)
        rep = chain.rep(j + 1)
        deriv = rep.ax if isinstance(rep, AffineRep) else rep.dx_dx1(0.0, 0.0)
        sigma_sign = 1 if deriv > 0 else -1
        self.limit_sign = (1 if q > 0 else -1) * sigma_sign

    def __call__(self, X: float, Y: float) -> Tuple[float, float]:
        pt = self.chart.forward(X, Y)
        pt = apply_fold(self.chain.system, self.fold, pt)
        pt = apply_word(self.chain.system, self.word, pt)
        out = self.next_chart.inverse(pt)
        if max(abs(out[0]), abs(out[1])) > 10.0:
            raise ChartDomainError(
                f"renormalized image far outside the chart at index {self.j}",
                sample=(X, Y, out),
            )
        return out

    def limit_model(self, X: float, Y: float) -> Tuple[float, float]:
        return self.limit_sign * (X * X + Y / 2.0), 0.0

    def limit_distance(self, grid: int = 11) -> float:
        """Sup-distance to the limit map over a sample grid."""
        worst = 0.0
        for i in range(grid):
            for k in range(grid):
                X = -CHART_RADIUS + 2 * CHART_RADIUS * i / (grid - 1)
                Y = -CHART_RADIUS + 2 * CHART_RADIUS * k / (grid - 1)
                x1, y1 = self(X, Y)
                x2, y2 = self.limit_model(X, Y)
                worst = max(worst, abs(x1 - x2), abs(y1 - y2))
        return worst


def renormalized_map(j: int, chain: Chain, system=None) -> RenormalizedMap:
    return RenormalizedMap(j, chain)


# ---------------------------------------------------------------------------
# chain verification
# ---------------------------------------------------------------------------


@dataclass
class IndexRecord:
    j: int
    sigma_log: float
    gamma_log: float
    gamma_breve_log: float
    width_log: float
    height_log: float
    cond_i: bool
    cond_ii: Optional[bool]
    cond_ii_ratio_log: Optional[float]
    cond_iii: bool
    cond_iii_width_ratio_log: float
    cond_iii_height_ratio_log: float
    identity_error: Optional[float]
    breve_sandwich: Optional[bool]
    bk_sandwich: bool
    scale_separation_log: Optional[float]
    inclusion_checked: bool = False
    inclusion_passed: Optional[bool] = None
    inclusion_margin: Optional[float] = None

    def as_dict(self):
        return {k: v for k, v in self.__dict__.items()}


@dataclass
class ChainReport:
    records: List[IndexRecord] = field(default_factory=list)
    blocking: Optional[str] = None
    B_constant: float = 0.0
    K_constant: float = 0.0
    thresholds: Dict[str, float] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        for r in self.records:
            conds = [r.cond_i, r.cond_iii]
            if r.cond_ii is not None:
                conds.append(r.cond_ii)
            if r.identity_error is not None:
                conds.append(r.identity_error <= self.thresholds["identity_tol"])
            if r.breve_sandwich is not None:
                conds.append(r.breve_sandwich)
            conds.append(r.bk_sandwich)
            if r.inclusion_checked:
                conds.append(bool(r.inclusion_passed))
            if not all(conds):
                return False
        return True

    def to_json(self, **kwargs) -> str:
        payload = {
            "passed": self.passed,
            "blocking": self.blocking,
            "B": self.B_constant,
            "K": self.K_constant,
            "thresholds": self.thresholds,
            "notes": self.notes,
            "records": [r.as_dict() for r in self.records],
        }
        kwargs.setdefault("sort_keys", True)
        return json.dumps(payload, **kwargs)


def _default_thresholds() -> Dict[str, float]:
    return {
        "ratio": RATIO_THRESHOLD,
        "inclusion_margin": INCLUSION_MARGIN,
        "identity_tol": IDENTITY_TOL,
        "r0_ratio": R0_RATIO,
        "sandwich_slack": SANDWICH_SLACK,
    }


def inclusion_test(j: int, chain: Chain, grid: int = INCLUSION_GRID,
                   margin: float = INCLUSION_MARGIN) -> Tuple[bool, float]:
    """Sample B_j on a grid, push through fold_j then c_{j+1}, and demand the
    images land in B_{j+1} with relative margin; returns (ok, min margin)."""
    chart = chart_eval(j, chain)
    nxt = chart_eval(j + 1, chain)
    system = chain.system
    fold = chain.fold(j)
    word = chain.word(j + 1)
    min_margin = float("inf")
    for i in range(grid):
        for k in range(grid):
            X = -CHART_RADIUS + 2 * CHART_RADIUS * i / (grid - 1)
            Y = -CHART_RADIUS + 2 * CHART_RADIUS * k / (grid - 1)
            pt = chart.forward(X, Y)
            pt = apply_fold(system, fold, pt)
            pt = apply_word(system, word, pt)
            Xp, Yp = nxt.inverse(pt)
            m = 1.0 - max(abs(Xp), abs(Yp)) / CHART_RADIUS
            min_margin = min(min_margin, m)
    return min_margin >= margin, min_margin


def box_fits_fold(j: int, chain: Chain) -> bool:
    """B_j must sit inside its fold box: 0.3*gamma_j < halfwidth/2."""
    half = chain.system.params.fold_box_halfwidth()
    bound = LogReal.from_value(half) / 2
    extent = LogReal.from_log(chain.factors()[j - 1].gamma_log) * CHART_RADIUS
    return extent < bound


def verify_chain(chain: Chain, system=None, thresholds: Optional[dict] = None,
                 horizon: int = HORIZON_DEFAULT) -> ChainReport:
    """Check the renormalization hypotheses (i)-(iii), the gamma identity,
    both sandwiches, and the sampled box inclusions along the chain.

    The report is the product: every ratio is recorded so stricter thresholds
    can be replayed offline; `blocking` names the first failed hypothesis.
    """
    system = system if system is not None else chain.system
    th = _default_thresholds()
    if thresholds:
        th.update(thresholds)
    ratio_log = math.log(th["ratio"])
    n = len(chain)
    facs = chain.factors(horizon)
    report = ChainReport(thresholds=th)

    # distortion constant B from a representative word, K from the normal forms
    rec = distortion(chain.rep(1))
    report.B_constant = distortion_bound(rec)
    report.K_constant = max(chain.normal_form(j).K for j in range(1, n + 1))
    log_bk = math.log(report.B_constant * report.K_constant)

    for j in range(1, n + 1):
        f = facs[j - 1]
        width = chain.width_log(j)
        height = chain.height_log(j)
        cond_i = math.isfinite(f.gamma_breve_log) and chain.beta / 2 < 1
        if j < n:
            v = tg.v_value(chain.word(j), chain.word(j + 1), system).value
            vlog = abs(LogReal.from_value(v)).log
            bound = facs[j].gamma_breve_log + ratio_log
            cond_ii = vlog <= bound
            cond_ii_ratio = vlog - facs[j].gamma_breve_log
        else:
            cond_ii = None
            cond_ii_ratio = None
        w_ratio = width - ratio_log  # log(|Y^c_j| / threshold)
        h_ratio = height - (2 * f.gamma_breve_log + ratio_log)
        cond_iii = width <= ratio_log and height <= 2 * f.gamma_breve_log + ratio_log
        if j < n:
            qj = abs(LogReal.from_value(chain.normal_form(j).q)).log
            ident = abs(2 * f.gamma_log - (facs[j].sigma_log - qj)
                        - facs[j].gamma_log)
        else:
            ident = None
        if chain.sched is not None:
            from .selection import delta_schedule

            logd = delta_schedule(j, chain.sched).log
            lo = math.log(2.0) + 3.0 * chain.sched.eps_exponent * logd
            hi = math.log(2.0) + 3.0 * logd
            sandwich = lo - th["sandwich_slack"] <= f.gamma_breve_log <= hi + th["sandwich_slack"]
            if j + 5 <= n:
                scale_sep = delta_schedule(j + 5, chain.sched).log - 2 * f.gamma_breve_log
            else:
                scale_sep = None
        else:
            sandwich = None
            scale_sep = None
        bk = abs(f.gamma_breve_log - f.gamma_log) <= log_bk + th["sandwich_slack"]
        report.records.append(IndexRecord(
            j, f.sigma_log, f.gamma_log, f.gamma_breve_log, width, height,
            cond_i, cond_ii, cond_ii_ratio, cond_iii, w_ratio, h_ratio,
            ident, sandwich, bk, scale_sep,
        ))

    # blocking condition: first failed hypothesis in (i),(ii),(iii) order per j
    for r in report.records:
        for name, ok in (("i", r.cond_i), ("ii", r.cond_ii), ("iii", r.cond_iii)):
            if ok is False:
                report.blocking = name
                break
        if report.blocking:
            report.notes.append(
                f"hypothesis ({report.blocking}) fails first at index {r.j}"
            )
            break

    # sampled inclusions where the box fits inside its fold box
    for j in range(1, n):
        r = report.records[j - 1]
        if not box_fits_fold(j, chain):
            continue
        ok, margin = inclusion_test(j, chain, margin=th["inclusion_margin"])
        r.inclusion_checked = True
        r.inclusion_passed = ok
        r.inclusion_margin = margin

    # honest accounting: scale-separation ratios are informational
    bad = [r.j for r in report.records
           if r.scale_separation_log is not None and r.scale_separation_log > ratio_log]
    if bad:
        report.notes.append(
            "scale-separation ratio delta_{j+5}/gamma_breve_j^2 exceeds the "
            f"threshold at indices {bad} (informational)"
        )
    return report


# ---------------------------------------------------------------------------
# wandering cloud (forward iteration of a sampled box)
# ---------------------------------------------------------------------------


@dataclass
class CloudStep:
    k: int
    label: str
    kind: str  # "fold" | "hyperbolic"
    diam_log: float
    separated: bool  # offsets stay clear of the region boundary


@dataclass
class CloudReport:
    J: int
    expected: List[str]
    itinerary: List[str]
    steps: List[CloudStep]
    diam0_log: float
    shrink_step: Optional[int]  # first k with diam < 10% of diam0
    block_end_diams: List[float]

    @property
    def itinerary_matches(self) -> bool:
        return self.itinerary == self.expected[: len(self.itinerary)]

    @property
    def no_fold_revisit(self) -> bool:
        """Folds appear exactly where the expected itinerary has them."""
        for got, want in zip(self.itinerary, self.expected):
            if (got.startswith("f")) != (want.startswith("f")):
                return False
        return True

    @property
    def decaying_blocks(self) -> bool:
        d = self.block_end_diams
        return all(b < a for a, b in zip(d, d[1:]))


def _classify(system, x, y):
    """Which region holds (x, y): a branch interval or a fold box.

    Returns (label, margin) with margin = exact distance to the nearest
    boundary of the region (the fold boxes sit in the central gap, so the
    classification is unambiguous)."""
    for j in range(1, system.params.N + 1):
        lo, hi = system.params.interval(j)
        if lo <= x <= hi:
            from .model import generator_label

            return generator_label(j), min(x - lo, hi - x)
    half = system.params.fold_box_halfwidth()
    if -half <= x <= half:
        s = system.params.sqrt_delta
        for lbl, fold in sorted(system.folds.items()):
            lo, hi = system.params.interval(fold.index)
            ylo, yhi = s * lo, s * hi
            if ylo <= y <= yhi:
                return lbl, min(half - x, x + half, y - ylo, yhi - y)
    raise ChartDomainError("cloud anchor left every admissible region",
                           sample=(float(x), float(y)))


def _cloud_diam_log(offs: List[Tuple[LogReal, LogReal]]) -> float:
    dims = []
    for idx in (0, 1):
        vals = [o[idx] for o in offs]
        hi = max(vals)
        lo = min(vals)
        dims.append((hi - lo).log)
    return max(dims)


def iterate_cloud(chain: Chain, J: Optional[int] = None, blocks: int = 3,
                  grid: int = 5) -> CloudReport:
    """Iterate a sampled B_J forward through `blocks` word/fold blocks.

    Tracks the symbolic itinerary (which region each anchor visits), checks
    the cloud never straddles a region boundary, and records the diameter
    decay; the wandering-domain picture is diam -> 0 with no unscheduled fold
    visits."""
    n = len(chain)
    if J is None:
        J = next((j for j in range(1, n + 1) if box_fits_fold(j, chain)), None)
        if J is None:
            raise RenormError("no chain box fits inside its fold box")
    if J + blocks > n:
        blocks = n - J
    if blocks < 1:
        raise RenormError("chain too short to iterate any block")
    system = chain.system
    chart = chart_eval(J, chain)
    anchor = AnchoredPoint(chart.anchor[0], chart.anchor[1],
                           LogReal.zero(), LogReal.zero())
    offs = []
    for i in range(grid):
        for k in range(grid):
            X = -CHART_RADIUS + 2 * CHART_RADIUS * i / (grid - 1)
            Y = -CHART_RADIUS + 2 * CHART_RADIUS * k / (grid - 1)
            pt = chart.forward(X, Y)
            offs.append((pt.ex, pt.ey))
    expected: List[str] = [chain.fold(J)]
    for b in range(1, blocks + 1):
        expected.extend(chain.word(J + b).letters)
        if b < blocks:
            expected.append(chain.fold(J + b))
    diam0 = _cloud_diam_log(offs)
    steps: List[CloudStep] = []
    itinerary: List[str] = []
    shrink = None
    block_ends: List[float] = []
    for k, want in enumerate(expected, start=1):
        label, margin = _classify(system, anchor.x, anchor.y)
        itinerary.append(label)
        max_off = max(max(abs(o[0]), abs(o[1])) for o in offs)
        separated = max_off < LogReal.from_value(margin) if margin > 0 else False
        arrow = system.graph.arrow(label)
        if arrow.kind == "fold":
            new_anchor = apply_fold(system, label, AnchoredPoint(
                anchor.x, anchor.y, LogReal.zero(), LogReal.zero()))
            ax = LogReal.from_value(2 * anchor.x)
            s = LogReal.from_value(system.params.sqrt_delta)
            offs = [(ax * ex + ex * ex + ey, -(s * ex)) for ex, ey in offs]
        else:
            rep = system.generator_rep(label)
            new_anchor = apply_letter(system, label, AnchoredPoint(
                anchor.x, anchor.y, LogReal.zero(), LogReal.zero()))
            a = LogReal.from_value(rep.ax)
            d = LogReal.from_value(rep.dy)
            offs = [(ex / a, ey * d) for ex, ey in offs]
        anchor = new_anchor
        diam = _cloud_diam_log(offs)
        steps.append(CloudStep(k, label, arrow.kind, diam, separated))
        if shrink is None and diam < diam0 + math.log(0.1):
            shrink = k
        if label != want:
            break
    # block-end diameters: after each full word c_{J+b}
    pos = 0
    for b in range(1, blocks + 1):
        pos += 1  # the fold preceding the word
        pos += len(chain.word(J + b).letters)
        if pos <= len(steps):
            block_ends.append(steps[pos - 1].diam_log)
    return CloudReport(J, expected, itinerary, steps, diam0, shrink, block_ends)
