"""Inductive 5-offset parameter selection along a shrinking scale schedule.

The schedule is delta_j = delta0^(beta^j) (beta = 3/2).  Each step chooses a
new word at the next scale — a stable prefix, a connector, and an unstable
suffix — then re-solves five simultaneous tangencies with the five fold
offsets.  Every accepted step carries three certificates:

  (C1) width sandwich  delta^(1+e+2e^2) <= w_min <= w_max <= delta,
  (C2) tangency residuals at the solved parameter below tolerance
       (exactly zero in the rational backend),
  (C3) parameter displacement below C1 * delta.

The dissipation exponent e and the constants C1, L0, M_beta are calibrated
per system and recorded with their provenance; certificates always store both
the bound and the measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

from .hyperbolic import AffineRep, extremal_widths
from .numerics import LogReal, log_of, sup_norm
from .symbolic import (
    LEFT,
    RIGHT,
    OneSidedSequence,
    Word,
    concat,
)
from . import tangency as tg


class SelectionError(RuntimeError):
    pass


class PreconditionError(SelectionError):
    pass


class ConnectivityError(SelectionError):
    pass


# ---------------------------------------------------------------------------
# schedule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleParams:
    """Scale schedule and calibrated run constants."""

    beta: float = 1.5
    delta0: float = 0.05
    eps: float = 0.1
    C1: float = 0.0
    L0: float = 1.0
    nu: float = 0.5
    m_beta: float = 0.0
    eps_provenance: str = "default"

    def __post_init__(self):
        if not (1.0 < self.beta < 2.0):
            raise SelectionError("schedule exponent must lie in (1,2)")
        if not (0.0 < self.delta0 < 1.0):
            raise SelectionError("initial scale must lie in (0,1)")

    @property
    def eps_exponent(self) -> float:
        """The certificate exponent 1 + e + 2e^2."""
        return 1.0 + self.eps + 2.0 * self.eps**2

    def schedule_ok(self) -> bool:
        """Solvability condition beta^5 > (1+e+2e^2) * beta/(2-beta)."""
        return self.beta**5 > self.eps_exponent * self.beta / (2.0 - self.beta)


def delta_schedule(j: int, sched: ScheduleParams) -> LogReal:
    """delta_j = delta0^(beta^j), exact in log-space."""
    if j < 0:
        raise SelectionError("schedule index must be >= 0")
    return LogReal.from_log((sched.beta**j) * math.log(sched.delta0))


def m_beta_constant(beta: float, grid: int = 400) -> float:
    """sup over delta in (0, 1/2] of sum_j delta^(beta^j) / delta."""
    best = 0.0
    for k in range(grid):
        logd = math.log(0.5) + (math.log(1e-10) - math.log(0.5)) * k / (grid - 1)
        total = 0.0
        j = 1
        while True:
            term = (beta**j - 1.0) * logd
            if term < -80:
                break
            total += math.exp(term)
            j += 1
        best = max(best, total)
    return best


def _letter_logs(system):
    """(log width, log height) per generator letter; exact for affine reps."""
    out = {}
    for lbl in system.graph.hyperbolic_labels():
        rep = system.generator_rep(lbl)
        if isinstance(rep, AffineRep):
            out[lbl] = (log_of(abs(rep.ax)), log_of(abs(rep.dy)))
        else:
            w = extremal_widths(rep)
            out[lbl] = (w.w_max.log, w.h_max.log)
    return out


def _solve_eps(excess: float) -> float:
    """Smallest e with e + 2e^2 >= excess."""
    return max(0.0, (-1.0 + math.sqrt(1.0 + 8.0 * excess)) / 4.0)


def calibrate_schedule(
    sched: ScheduleParams, system, horizon: int, safety: float = 1.02
) -> ScheduleParams:
    """Fix the certificate exponent and run constants from the system.

    The width of a chosen word overshoots its scale by a ratio r_j that is
    largest at the first steps (short words, integer letter counts).  The
    exponent e is the smallest value making 1+e+2e^2 cover every planned r_j,
    never below the per-letter width/height exponent; the schedule solvability
    condition is re-checked afterwards.
    """
    logs = _letter_logs(system)
    lw = max(w for w, _ in logs.values())  # widest letter (log scale, < 0)
    lh = max(h for _, h in logs.values())
    per_letter = lw / lh  # exponent with height^e = width per letter
    r_max = per_letter
    for j in range(1, horizon + 1):
        logd = (sched.beta**j) * math.log(sched.delta0)
        m = max(1, math.ceil(logd / lw) - 1)  # maximal m with m*lw > logd
        mp = max(1, math.ceil(logd / lh) - 1)
        r = ((m + 1) + (mp + 1)) * lw / logd
        r_max = max(r_max, r)
    eps = max(per_letter, _solve_eps((r_max - 1.0) * safety))
    # C1 = 2*sqrt(5) * L0 * (sup |D(projection o fold)| + 1), measured
    sup_d = 1.0
    for fold in system.folds.values():
        lo, hi = fold.box.x_interval(0.0)
        for x in (lo, 0.0, hi):
            (a, b), _ = fold.plane_map.deriv(float(x), 0.0)
            sup_d = max(sup_d, abs(a) + abs(b))
    c1 = 2.0 * math.sqrt(5.0) * sched.L0 * (sup_d + 1.0)
    out = replace(
        sched,
        eps=eps,
        C1=c1,
        m_beta=m_beta_constant(sched.beta),
        eps_provenance=(
            f"calibrated: per-letter exponent {per_letter:.6f}, "
            f"max planned width ratio {r_max:.6f} over {horizon} scales"
        ),
    )
    if not out.schedule_ok():
        raise SelectionError(
            f"calibrated exponent {eps:.4f} violates the schedule condition"
        )
    return out


# ---------------------------------------------------------------------------
# word selection
# ---------------------------------------------------------------------------


def width_bounds(word: Word, system) -> Tuple[LogReal, LogReal]:
    rep = system.word_rep(word) if hasattr(system, "word_rep") else None
    if isinstance(rep, AffineRep):
        w = abs(LogReal.from_value(rep.ax))
        return w, w
    from .hyperbolic import word_rep as _wr

    widths = extremal_widths(rep if rep is not None else _wr(word, system))
    return widths.w_min, widths.w_max


def _truncation_logs(seq: OneSidedSequence, logs, count: int, idx: int):
    """Cumulative log width (idx 0) or height (idx 1) of truncations 1..count."""
    out = []
    acc = 0.0
    for i in range(1, count + 1):
        acc += logs[seq.letter(i)][idx]
        out.append(acc)
    return out


def _connector(origin: str, target: str, graph, budget_log: float, logs) -> Word:
    """Shortest admissible hyperbolic word from `origin` to `target` whose
    worst-case width stays above the budget; empty when endpoints agree."""
    if origin == target:
        return Word(graph, ())
    frontier = {origin: ()}
    seen = {origin}
    depth_budget = max(1, int(budget_log / min(w for w, _ in logs.values())))
    for _ in range(depth_budget):
        nxt = {}
        for v, path in frontier.items():
            for a in graph.out_arrows(v):
                if a.target == target:
                    return Word(graph, path + (a.label,))
                if a.target not in seen:
                    seen.add(a.target)
                    nxt[a.target] = path + (a.label,)
        if not nxt:
            break
        frontier = nxt
    raise ConnectivityError(
        f"no admissible connector {origin} -> {target} within the width budget"
    )


def choose_word(
    s: OneSidedSequence,
    u: OneSidedSequence,
    delta: LogReal,
    system,
    sched: ScheduleParams,
    prefix_block: Optional[Word] = None,
) -> Word:
    """Word at scale delta: stable prefix + connector + unstable suffix.

    The prefix takes m+1 letters of s with m maximal such that the truncation
    width still exceeds delta; the suffix takes m'+1 letters of u with m'
    maximal such that the truncation height exceeds delta (m' = 1 when even a
    single letter is already below — the early-scale regime).  The width
    sandwich (C1) is verified in log-space before returning.
    """
    if s.direction != RIGHT or u.direction != LEFT:
        raise SelectionError("need a right stable sequence and a left unstable one")
    logd = delta.log
    logs = _letter_logs(system)
    if logd >= max(w for w, _ in logs.values()):
        raise PreconditionError("scale too large: no single letter is narrower")
    max_len = int(logd / max(w for w, _ in logs.values())) + 3
    wlogs = _truncation_logs(s, logs, max_len, 0)
    m = 0
    for i, w in enumerate(wlogs, start=1):
        if w > logd:
            m = i
        else:
            break
    if m < 1:
        raise PreconditionError("stable prefix shorter than one letter")
    hmax_len = max(1, int(logd / max(h for _, h in logs.values())) + 2)
    hlogs = _truncation_logs(u, logs, hmax_len, 1)
    mp = 0
    for i, h in enumerate(hlogs, start=1):
        if h > logd:
            mp = i
        else:
            break
    mp = max(mp, 1)
    prefix = s.truncate(m + 1)
    suffix = u.truncate(mp + 1)
    budget_log = sched.eps**4 * logd
    middle = _connector(prefix.target, suffix.origin, system.graph, budget_log, logs)
    if prefix_block is not None and not prefix_block.is_empty():
        # optional caller-supplied block, spliced ahead of the connector and
        # counted against the same width budget
        mid_w = sum(logs[l][0] for l in prefix_block.letters + middle.letters)
        if mid_w < budget_log:
            raise SelectionError("caller block exceeds the connector budget")
        middle = concat(prefix_block, middle)
    word = concat(concat(prefix, middle), suffix)
    w_min, w_max = width_bounds(word, system)
    lower = LogReal.from_log(sched.eps_exponent * logd)
    if not (lower <= w_min and w_max <= delta):
        raise SelectionError(
            "width sandwich violated: "
            f"log bounds [{lower.log:.4f}, {logd:.4f}], "
            f"measured [{w_min.log:.4f}, {w_max.log:.4f}]"
        )
    return word


# ---------------------------------------------------------------------------
# tangency witnesses (robust-intersection pairs, built constructively)
# ---------------------------------------------------------------------------


def stable_witness(system, target, depth: int, tail=("a1",)) -> OneSidedSequence:
    """Greedy descent of the stable Cantor construction toward `target`.

    At each level pick the child interval containing the target (or the
    nearest child); after `depth` letters append the periodic tail.  Exact in
    the rational backend.
    """
    letters = []
    scale, offset = 1, 0  # current cell map x -> scale*x + offset on [-1,1]
    branches = {
        lbl: system.generator_rep(lbl) for lbl in system.graph.hyperbolic_labels()
    }
    for _ in range(depth):
        best = None
        for lbl, rep in sorted(branches.items()):
            lo = scale * rep.x_of(-1) + offset
            hi = scale * rep.x_of(1) + offset
            if lo > hi:
                lo, hi = hi, lo
            if lo <= target <= hi:
                dist = 0
            else:
                dist = min(abs(target - lo), abs(target - hi))
            if best is None or dist < best[0]:
                best = (dist, lbl, rep)
        _, lbl, rep = best
        letters.append(lbl)
        # compose: new cell = old cell restricted to branch lbl
        scale, offset = scale * rep.ax, scale * rep.cx + offset
    return OneSidedSequence(system.graph, RIGHT, tuple(letters), tuple(tail))


def witness_depth(delta: LogReal, system, factor: float = 1e-3) -> int:
    """Descent depth making the witness cell smaller than factor*delta."""
    logs = _letter_logs(system)
    lw = max(w for w, _ in logs.values())
    return max(2, math.ceil((delta.log + math.log(factor) - math.log(2.0)) / lw))


# ---------------------------------------------------------------------------
# certificates and state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    name: str  # "C1" | "C2" | "C3"
    step: int
    passed: bool
    bound_log: float
    measured_log: float
    note: str = ""


@dataclass
class SelectionState:
    step: int
    system: object
    sched: ScheduleParams
    words: List[Word]
    witnesses: List[OneSidedSequence]
    s_next: OneSidedSequence
    certificates: List[Certificate] = field(default_factory=list)
    displacements: List[LogReal] = field(default_factory=list)
    p_history: List[tuple] = field(default_factory=list)
    newton_steps: List[int] = field(default_factory=list)

    @property
    def p(self):
        return self.system.params.p


def _slot_of(index: int, fold_count: int = 5) -> int:
    """Fold slot used by the word at chain index `index` (1-based, cycling)."""
    return (index - 1) % fold_count + 1


def _unstable_tail(system, slot: int, anchor: str = "a1") -> OneSidedSequence:
    from .model import generator_label

    return OneSidedSequence(
        system.graph, LEFT, (generator_label(slot),), (anchor,)
    )


def _target_of(word: Word, system):
    """Critical value of the word's unstable curve under its fold, i.e. the
    x-level the next stable witness must hit."""
    fold = system.fold_for_word(word)
    data = tg.critical_tangency(word, fold, system)
    return data.a


def _certify_c1(word, delta, sched, system, step) -> Certificate:
    w_min, w_max = width_bounds(word, system)
    lower = sched.eps_exponent * delta.log
    ok = lower <= w_min.log <= w_max.log <= delta.log
    return Certificate(
        "C1", step, ok, delta.log, w_max.log,
        note=f"lower {lower:.4f}, w_min {w_min.log:.4f}, |word| {len(word)}",
    )


def _certify_c2(words, s_next, system, tol, step) -> Certificate:
    vals = tg._psi_components(words, s_next, system, tol)
    worst = sup_norm(vals)
    exact = all(v == 0 for v in vals)
    return Certificate(
        "C2", step, worst <= LogReal.from_value(tol), math.log(tol), worst.log,
        note="exact zeros" if exact else "",
    )


def _certify_c3(disp: LogReal, delta: LogReal, sched, step) -> Certificate:
    bound = math.log(sched.C1) + delta.log
    return Certificate(
        "C3", step, disp.log < bound, bound, disp.log,
        note=f"C1 = {sched.C1:.4f}",
    )


# ---------------------------------------------------------------------------
# the induction
# ---------------------------------------------------------------------------


def initialize(system, p0, sched: ScheduleParams, tol: float = 1e-12,
               witness_factor: float = 1e-3) -> SelectionState:
    """Step 1: choose the first five words and solve their five tangencies."""
    if tuple(p0) != tuple(system.params.p):
        system = system.with_p(p0)
    words: List[Word] = []
    witnesses: List[OneSidedSequence] = []
    s_seq = OneSidedSequence(system.graph, RIGHT, (), ("a1",))
    for i in range(1, 6):
        slot = _slot_of(i)
        u = _unstable_tail(system, slot)
        delta_i = delta_schedule(i, sched)
        word = choose_word(s_seq, u, delta_i, system, sched)
        words.append(word)
        witnesses.append(s_seq)
        target = _target_of(word, system)
        depth = witness_depth(delta_schedule(i + 1, sched), system, witness_factor)
        s_seq = stable_witness(system, target, depth)
    # the rational backend can and should solve to exactly zero: later chain
    # verifications compare leftover residuals against much smaller scales
    solve_tol = 0.0 if system.params.backend == "rational" else tol
    sys1, res = tg.psi_solve(words, s_seq, system, p0, solve_tol)
    state = SelectionState(
        step=1, system=sys1, sched=sched, words=words,
        witnesses=witnesses, s_next=s_seq,
    )
    for i, w in enumerate(words, start=1):
        state.certificates.append(
            _certify_c1(w, delta_schedule(i, sched), sched, system, 1)
        )
    state.certificates.append(_certify_c2(words, s_seq, sys1, tol, 1))
    state.certificates.append(
        _certify_c3(res.displacement_norm, delta_schedule(1, sched), sched, 1)
    )
    state.displacements.append(res.displacement_norm)
    state.p_history.append(tuple(sys1.params.p))
    state.newton_steps.append(res.steps)
    return state


def selection_step(state: SelectionState, tol: float = 1e-12,
                   witness_factor: float = 1e-3) -> SelectionState:
    """One inductive step: new word at the next scale, five tangencies re-solved."""
    system = state.system
    sched = state.sched
    new_index = len(state.words) + 1
    slot = _slot_of(new_index)
    delta_new = delta_schedule(new_index, sched)
    u = _unstable_tail(system, slot)
    word = choose_word(state.s_next, u, delta_new, system, sched)
    target = _target_of(word, system)
    depth = witness_depth(delta_schedule(new_index + 1, sched), system,
                          witness_factor)
    s_next = stable_witness(system, target, depth)
    window = state.words[-4:] + [word]
    solve_tol = 0.0 if system.params.backend == "rational" else tol
    sys1, res = tg.psi_solve(window, s_next, system, system.params.p, solve_tol)
    step = state.step + 1
    state = replace(
        state,
        step=step,
        system=sys1,
        words=state.words + [word],
        witnesses=state.witnesses + [state.s_next],
        s_next=s_next,
    )
    state.certificates.append(_certify_c1(word, delta_new, sched, sys1, step))
    state.certificates.append(_certify_c2(window, s_next, sys1, tol, step))
    state.certificates.append(_certify_c3(res.displacement_norm, delta_new,
                                          sched, step))
    state.displacements.append(res.displacement_norm)
    state.p_history.append(tuple(sys1.params.p))
    state.newton_steps.append(res.steps)
    return state


@dataclass
class RunResult:
    state: SelectionState
    p_infinity: tuple
    p0: tuple
    total_displacement: LogReal
    displacement_bound: LogReal
    converged: bool


def run_selection(system, p0, sched: Optional[ScheduleParams] = None,
                  max_steps: int = 4, tol: float = 1e-12,
                  witness_factor: float = 1e-3,
                  calibrate: bool = True) -> RunResult:
    """Initialization plus up to `max_steps` inductive steps.

    Stops early once the next displacement bound C1*delta falls below machine
    resolution relative to the parameter (the finite-precision horizon for the
    float backend; the rational backend runs the full request).
    """
    if sched is None:
        sched = ScheduleParams()
    if calibrate:
        sched = calibrate_schedule(sched, system, max_steps + 6)
    if max_steps < 0:
        raise SelectionError("max_steps must be >= 0")
    if sched.m_beta == 0.0:
        sched = replace(sched, m_beta=m_beta_constant(sched.beta))
    state = initialize(system, p0, sched, tol, witness_factor)
    converged = False
    for _ in range(max_steps):
        next_delta = delta_schedule(len(state.words) + 1, sched)
        p_scale = max(abs(float(v)) for v in state.p)
        if math.log(sched.C1) + next_delta.log < math.log(
            2.3e-16 * p_scale
        ) and state.system.params.backend == "float":
            converged = True
            break
        state = selection_step(state, tol, witness_factor)
    total = sup_norm([a - b for a, b in zip(state.p, p0)])
    bound = LogReal.from_log(
        math.log(sched.C1 * sched.m_beta * sched.delta0)
    )
    return RunResult(state, tuple(state.p), tuple(p0), total, bound, converged)


# ---------------------------------------------------------------------------
# historic word extension
# ---------------------------------------------------------------------------


def historic_extension(prefix: Word, nu: float, graph, horizon: int = 8,
                       exhaustive_cap: int = 4096, beam_width: int = 32):
    """Extension (over hyperbolic arrows) of length <= nu*|prefix| whose
    extended empirical measure is farthest (Wasserstein, cylinder metric)
    from every past empirical measure of the prefix.

    Exhaustive over all candidates when their count fits the cap; otherwise a
    beam search, flagged in the result.
    """
    from .stats import empirical_measure_of_word, wasserstein1

    budget = int(nu * len(prefix))
    empty = Word(graph, ())
    if budget < 1 or len(prefix) < 1:
        return empty, 0.0, True
    past = [
        empirical_measure_of_word(prefix, n, horizon)
        for n in range(1, len(prefix) + 1)
    ]

    def score(word: Word) -> float:
        ext = concat(prefix, word)
        mu = empirical_measure_of_word(ext, len(ext), horizon)
        return min(wasserstein1(mu, nu_m) for nu_m in past)

    arrows = [a for a in graph.arrows.values() if a.kind == "hyperbolic"]
    n_arrows = max(1, len(arrows))
    total = sum(n_arrows**k for k in range(1, budget + 1))
    exhaustive = total <= exhaustive_cap
    best, best_score = empty, 0.0
    if exhaustive:
        frontier = [()]
        for _ in range(budget):
            nxt = []
            for path in frontier:
                tail = graph.arrow(path[-1]).target if path else prefix.target
                for a in arrows:
                    if a.origin == tail:
                        cand = path + (a.label,)
                        nxt.append(cand)
                        s = score(Word(graph, cand))
                        if s > best_score:
                            best, best_score = Word(graph, cand), s
            frontier = nxt
        return best, best_score, True
    frontier = [((), 0.0)]
    for _ in range(budget):
        cands = []
        for path, _s in frontier:
            tail = graph.arrow(path[-1]).target if path else prefix.target
            for a in arrows:
                if a.origin == tail:
                    cand = path + (a.label,)
                    cands.append((cand, score(Word(graph, cand))))
        if not cands:
            break
        cands.sort(key=lambda t: (-t[1], t[0]))
        frontier = cands[:beam_width]
        if frontier[0][1] > best_score:
            best, best_score = Word(graph, frontier[0][0]), frontier[0][1]
    return best, best_score, False
