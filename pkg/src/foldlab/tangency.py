"""Critical tangency points, tangency offsets, and the 5-slot Newton solver.

For a hyperbolic word c ending at a fold, the unstable curve h_c(x) =
y_of^c(x, 0) is pushed through the fold; the first coordinate of the result
has a unique critical point (the tangency point zeta).  The offset

    V(c, c') = a(c) - b(c')

measures the signed distance between the fold image of c's unstable curve and
the stable fiber of c'; it vanishes exactly at a quadratic heteroclinic
tangency.  Five such offsets form the map solved by `psi_solve` to pin five
tangencies simultaneously with five fold offsets.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple

from .hyperbolic import AffineRep, word_rep as _hyperbolic_word_rep
from .numerics import LogReal, sup_norm
from .symbolic import Word


class TangencyError(ValueError):
    pass


class NoTangencyError(TangencyError):
    pass


class AmbiguityError(TangencyError):
    pass


class DegenerateUnfoldingError(TangencyError):
    pass


class TrustRegionError(TangencyError):
    """Newton left the admissible region or diverged; carries the best iterate."""

    def __init__(self, message, best_p=None, residual=None):
        super().__init__(message)
        self.best_p = best_p
        self.residual = residual


CURVATURE_MIN = 0.1
BRACKET_COUNT = 64


@dataclass(frozen=True)
class TangencyData:
    """Critical tangency point of a word's unstable curve under its fold."""

    zeta: Tuple[object, object]  # point in the fold box
    a: object  # critical value of the projected fold image
    curvature: object  # second derivative of the offset function at zeta
    word: Word
    fold: str
    derivative_residual: float = 0.0


VRecord = namedtuple("VRecord", "value a b word_u word_s parameter")


def _rep_of(word: Word, system, tol: float = 1e-12):
    if hasattr(system, "word_rep"):
        return system.word_rep(word, tol)
    return _hyperbolic_word_rep(word, system, tol)


def _fold_image(system, fold_lbl: str, x, y):
    if hasattr(system, "fold_point"):
        return system.fold_point(fold_lbl, x, y)
    return system.fold(fold_lbl).plane_map.f(x, y)


def critical_tangency(
    c: Word, fold: str, system, tol: float = 1e-12
) -> TangencyData:
    """Locate the critical point of x -> project(fold(x, h_c(x))) on the fold
    box, where h_c is the unstable curve of the word c.

    The parameter-independent data (critical abscissa, curve height,
    curvature) are cached per word on the system's shared cache when fold
    offsets act additively; the critical value `a` is always recomputed at the
    current parameter.
    """
    if c.is_empty():
        raise TangencyError("tangency needs a nonempty word")
    arrow = system.graph.arrow(fold)
    if arrow.kind != "fold":
        raise TangencyError(f"{fold!r} is not a fold arrow")
    rep = _rep_of(c, system, tol)
    cache = getattr(system, "shared_cache", None)
    cacheable = cache is not None and getattr(system, "fold_p_additive", False)
    key = ("zeta", c.letters, fold)
    if cacheable and key in cache:
        zx, h_zx, curvature, resid = cache[key]
    else:
        zx, h_zx, curvature, resid = _locate_critical(rep, fold, system, tol)
        if cacheable:
            cache[key] = (zx, h_zx, curvature, resid)
    if abs(float(curvature)) < CURVATURE_MIN:
        raise DegenerateUnfoldingError(
            f"curvature {float(curvature):.3g} below {CURVATURE_MIN} at {c!r}"
        )
    a = _fold_image(system, fold, zx, h_zx)[0]
    return TangencyData((zx, h_zx), a, curvature, c, fold, resid)


def _locate_critical(rep, fold: str, system, tol: float):
    """(critical x, curve height there, curvature, derivative residual)."""
    fold_arrow = system.fold(fold)
    box = fold_arrow.box
    if isinstance(rep, AffineRep):
        # the unstable curve is exactly horizontal: y_of is x-independent, and
        # the model fold projects to x^2 + const, critical at x = 0 exactly
        zero = 0 * rep.ey
        h = rep.y_of(zero, zero)
        return zero, h, 2, 0.0

    def h_of(x):
        return rep.y_of(x, 0.0)

    def g_prime(x):
        (a, b), _ = fold_arrow.plane_map.deriv(x, h_of(x))
        return a + b * rep.dy_dx1(x, 0.0)

    lo, hi = box.x_interval(0.0)
    lo, hi = float(lo), float(hi)
    xs = [lo + (hi - lo) * k / BRACKET_COUNT for k in range(BRACKET_COUNT + 1)]
    vals = [g_prime(x) for x in xs]
    brackets = [
        (xs[k], xs[k + 1])
        for k in range(BRACKET_COUNT)
        if vals[k] == 0 or vals[k] * vals[k + 1] < 0
    ]
    # a zero landing exactly on a shared endpoint produces two brackets
    brackets = _merge_adjacent(brackets)
    if not brackets:
        raise NoTangencyError(f"no sign change of the tangency derivative on {fold}")
    if len(brackets) > 1:
        raise AmbiguityError(
            f"{len(brackets)} critical brackets on {fold}; word too short "
            "for a unique tangency"
        )
    blo, bhi = brackets[0]
    step = (hi - lo) / 200.0

    def g_second(x):
        return (g_prime(x + step) - g_prime(x - step)) / (2 * step)

    x = 0.5 * (blo + bhi)
    for _ in range(100):
        gp = g_prime(x)
        if abs(gp) <= tol:
            break
        g2 = g_second(x)
        if g2 == 0:
            raise DegenerateUnfoldingError("vanishing curvature during solve")
        xn = x - gp / g2
        if gp > 0:
            bhi = x
        else:
            blo = x
        if not (blo <= xn <= bhi):
            xn = 0.5 * (blo + bhi)
        x = xn
    resid = abs(g_prime(x))
    if resid > max(tol, 1e-9):
        raise NoTangencyError(f"critical-point solve stalled (residual {resid:.3e})")
    return x, h_of(x), g_second(x), resid


def _merge_adjacent(brackets):
    out = []
    for b in brackets:
        if out and out[-1][1] == b[0]:
            out[-1] = (out[-1][0], b[1])
        else:
            out.append(b)
    return out


def b_value(c2: Word, system, tol: float = 1e-12):
    """Pullback offset of c2's own tangency point through the word map: the
    x-position (at the word's origin) of the fiber that its fold image is
    compared against."""
    fold2 = system.fold_for_word(c2)
    if fold2 is None:
        raise TangencyError(f"{c2!r} does not feed a fold")
    data = critical_tangency(c2, fold2, system, tol)
    rep = _rep_of(c2, system, tol)
    zx = data.zeta[0]
    if isinstance(rep, AffineRep):
        return rep.x_of(zx)
    return rep.x_of(float(zx), 0.0)


def sequence_b_value(s, system, tol: float = 1e-12):
    """Limit b-value of an infinite stable continuation.

    For eventually periodic sequences over exact affine generators, the limit
    is computed in closed form (geometric fixed point); otherwise a truncation
    deep enough for the width to fall below `tol` is used, with the residual
    width as the reported uncertainty.
    """
    period_rep = prefix_rep = None
    if s.period:
        prefix_rep = _rep_of(Word(s.graph, s.prefix), system, tol)
        period_rep = _rep_of(Word(s.graph, s.period), system, tol)
    if isinstance(period_rep, AffineRep) and isinstance(prefix_rep, AffineRep):
        fixed = period_rep.cx / (1 - period_rep.ax)
        return prefix_rep.x_of(fixed), 0.0
    depth = len(s.prefix) + len(s.period or s.prefix)
    while True:
        word = s.truncate(depth)
        rep = _rep_of(word, system, tol)
        width = abs(rep.dx_dx1(0.0, 0.0)) if not isinstance(rep, AffineRep) else abs(
            float(rep.ax)
        )
        if width <= tol or depth > 4000:
            return rep.x_of(0.0, 0.0), 2 * width
        depth *= 2


def v_value(c: Word, c2, system, tol: float = 1e-12) -> VRecord:
    """Tangency offset a(c) - b(c2); c2 may be a Word or an infinite stable
    continuation (OneSidedSequence)."""
    fold = system.fold_for_word(c)
    if fold is None:
        raise TangencyError(f"{c!r} does not feed a fold")
    data = critical_tangency(c, fold, system, tol)
    if isinstance(c2, Word):
        b = b_value(c2, system, tol)
    else:
        b, _ = sequence_b_value(c2, system, tol)
    return VRecord(data.a - b, data.a, b, c, c2, getattr(system, "params", None))


# ---------------------------------------------------------------------------
# the 5-slot simultaneous-tangency solver
# ---------------------------------------------------------------------------

SolveResult = namedtuple(
    "SolveResult", "p steps residual_norm lipschitz displacement_norm"
)


def _psi_components(words: Sequence[Word], s_next, system, tol):
    vals = []
    for k in range(4):
        vals.append(v_value(words[k], words[k + 1], system, tol).value)
    vals.append(v_value(words[4], s_next, system, tol).value)
    return vals


def _fold_slots(words: Sequence[Word], system) -> List[int]:
    slots = []
    for w in words:
        fold = system.fold_for_word(w)
        if fold is None:
            raise TangencyError(f"{w!r} does not feed a fold")
        slots.append(system.fold(fold).index)
    if len(set(slots)) != len(slots):
        raise TangencyError(f"fold slots must be distinct, got {slots}")
    return slots


def _solve_linear(J, rhs):
    """Gaussian elimination with partial pivoting; exact on Fractions."""
    n = len(rhs)
    A = [list(row) + [rhs[i]] for i, row in enumerate(J)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(float(A[r][col])))
        if A[piv][col] == 0:
            raise DegenerateUnfoldingError("singular tangency Jacobian")
        A[col], A[piv] = A[piv], A[col]
        for r in range(n):
            if r != col and A[r][col] != 0:
                factor = A[r][col] / A[col][col]
                A[r] = [a - factor * b for a, b in zip(A[r], A[col])]
    return [A[i][n] / A[i][i] for i in range(n)]


def psi_solve(
    words: Sequence[Word],
    s_next,
    system,
    p0: Sequence,
    tol: float = 1e-12,
    max_steps: int = 20,
    fd_step=None,
) -> Tuple[object, SolveResult]:
    """Damped Newton driving all five tangency offsets to zero.

    Only the five fold offsets involved in `words` move; the finite-difference
    Jacobian is exact for affine offset dependence (one step then suffices).
    Returns the updated system and the solve record.
    """
    if len(words) != 5:
        raise TangencyError("psi_solve needs exactly 5 words")
    slots = _fold_slots(words, system)
    if fd_step is None:
        fd_step = 1e-7
    sysk = system.with_p(p0) if tuple(p0) != tuple(system.params.p) else system
    p = list(sysk.params.p)
    h = sysk.params.cast(Fraction(fd_step).limit_denominator(10**12))
    psi0 = _psi_components(words, s_next, sysk, tol)
    norm0 = sup_norm(psi0)
    init_norm = norm0
    steps = 0
    for _ in range(max_steps + 1):
        if norm0 <= LogReal.from_value(tol):
            break
        J = []
        for slot in slots:
            pk = list(p)
            pk[slot - 1] = pk[slot - 1] + h
            vals = _psi_components(words, s_next, sysk.with_p(pk), tol)
            J.append([(v - v0) / h for v, v0 in zip(vals, psi0)])
        # J built column-wise; transpose to rows
        Jrows = [[J[c][r] for c in range(5)] for r in range(5)]
        delta = _solve_linear(Jrows, [-v for v in psi0])
        scale = Fraction(1)
        for _damp in range(12):
            pn = list(p)
            for slot, d in zip(slots, delta):
                pn[slot - 1] = pn[slot - 1] + scale * d
            try:
                sys_n = sysk.with_p(pn)
            except ValueError:
                scale = scale / 2
                continue
            psin = _psi_components(words, s_next, sys_n, tol)
            if sup_norm(psin) < norm0:
                break
            scale = scale / 2
        else:
            raise TrustRegionError(
                "Newton step failed to reduce the tangency residuals "
                "(target tangency outside the admissible offset region?)",
                best_p=tuple(p),
                residual=norm0.to_float(),
            )
        p, sysk, psi0, norm0 = pn, sys_n, psin, sup_norm(psin)
        steps += 1
    else:
        raise TrustRegionError(
            f"no convergence in {max_steps} Newton steps",
            best_p=tuple(p),
            residual=norm0.to_float(),
        )
    disp = sup_norm([a - b for a, b in zip(p, p0)])
    lip = (
        (disp / init_norm).to_float()
        if init_norm.sign != 0 and disp.sign != 0
        else 0.0
    )
    return sysk, SolveResult(tuple(p), steps, norm0, lip, disp)
