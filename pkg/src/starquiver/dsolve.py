"""Numerical construction of nilpotent residue tuples with zero sum.

The solver works inside the prescribed conjugacy classes by construction:
each matrix is parametrized as ``A_i = P_i N_i P_i^{-1}`` over invertible
conjugators, with N_i the Jordan form of class i, and minimizes the
squared Frobenius norm of the sum by first-order descent.  Perturbing
``P_i`` to ``(I + X_i) P_i`` moves ``A_i`` by the commutator ``[X_i, A_i]``
to first order, so the descent direction in the X coordinates is
``-[S, A_i^T]`` with ``S`` the current sum.  Step sizes come from Armijo
backtracking; restarts draw fresh random orthogonal conjugators from
per-restart deterministic streams, and the first succeeding restart (by
index) wins.

``exact_refine`` turns a certified floating solution into a nearby exact
rational one: the flag data is snapped to small-denominator rationals,
strong preservation becomes a per-point linear constraint on the matrix
entries, and the zero-sum condition couples the blocks in one small exact
linear solve anchored at the floating solution.  The result sums to zero
exactly and is exactly nilpotent; the rank profile is then re-verified
exactly.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import linalg_exact as ex
from .combinat import (
    FeasibilityReport,
    NilpotentClass,
    ParabolicType,
    ds_feasible,
    type_from_classes,
)
from .higgs import HiggsTuple, IrreducibilityCertificate, irreducible
from .spectral import rank_profile
from .starrep import numerical_rank


@dataclass(frozen=True)
class DSInstance:
    rank: int
    classes: tuple
    points: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        for c in self.classes:
            if c.rank != self.rank:
                raise ValueError("all classes must share the instance rank")
        if not self.classes:
            raise ValueError("need at least one class")
        if self.points is None:
            pts = tuple(Fraction(i) for i in range(len(self.classes)))
        else:
            pts = tuple(
                p if isinstance(p, Fraction) else Fraction(p) for p in self.points
            )
        if len(pts) != len(self.classes):
            raise ValueError("need one marked point per class")
        object.__setattr__(self, "points", pts)

    @property
    def n(self):
        return len(self.classes)

    def parabolic_type(self, K=None) -> ParabolicType:
        return type_from_classes(list(self.classes), points=list(self.points), K=K)

    def feasibility(self) -> FeasibilityReport:
        return ds_feasible(list(self.classes), self.rank)


@dataclass
class SolverConfig:
    tolerance: float = 1e-10
    max_iters: int = 5000
    restarts: int = 20
    seed: int = 0
    condition_cap: float = 1e8


@dataclass
class DSSolution:
    matrices: list
    conjugators: list
    residual: float
    mode: str = "float"
    restart_index: int = -1
    iterations: int = 0

    def profile(self, tol=None):
        return rank_profile(self.matrices, self.mode, tol)


@dataclass
class SolveOutcome:
    success: bool
    solution: DSSolution = None
    feasibility: FeasibilityReport = None
    best_residuals: list = field(default_factory=list)
    message: str = ""


def _jordan_float(cls: NilpotentClass):
    return np.array(
        [[float(x) for x in row] for row in ex.jordan_nilpotent(cls.to_partition() if cls.rank_sequence else (), cls.rank)]
    )


def _random_orthogonal(r, rng):
    q, rr = np.linalg.qr(rng.standard_normal((r, r)))
    return q * np.sign(np.diag(rr))


def _descent_run(instance, config, rng, max_iters):
    """One restart of Armijo-backtracked gradient descent; returns
    (residual, matrices, conjugators, iterations)."""
    r = instance.rank
    jordans = [_jordan_float(c) for c in instance.classes]
    active = [i for i, c in enumerate(instance.classes) if c.rank_sequence]
    ps = [np.eye(r) if i not in active else _random_orthogonal(r, rng) for i in range(instance.n)]

    def matrices_from(ps_):
        out = []
        for i in range(instance.n):
            if i in active:
                out.append(ps_[i] @ jordans[i] @ np.linalg.inv(ps_[i]))
            else:
                out.append(np.zeros((r, r)))
        return out

    mats = matrices_from(ps)
    s = sum(mats)
    phi = float(np.sum(s * s))
    eta = 0.1
    iterations = 0
    target = config.tolerance**2
    stall = 0
    history = []
    for it in range(max_iters):
        iterations = it + 1
        if phi <= target:
            break
        grads = {}
        gnorm2 = 0.0
        for i in active:
            g = s @ mats[i].T - mats[i].T @ s  # [S, A_i^T]
            grads[i] = g
            gnorm2 += float(np.sum(g * g))
        if gnorm2 == 0.0:
            break  # stationary point away from zero: give up this restart
        phi_before = phi
        accepted = False
        backtracks = 0
        while backtracks < 40:
            trial_ps = list(ps)
            okay = True
            for i in active:
                x = -eta * grads[i]
                trial_ps[i] = (np.eye(r) + x) @ ps[i]
                if np.linalg.cond(trial_ps[i]) > config.condition_cap:
                    okay = False
                    break
            if okay:
                trial_mats = matrices_from(trial_ps)
                trial_s = sum(trial_mats)
                trial_phi = float(np.sum(trial_s * trial_s))
                if trial_phi <= phi - 0.25 * eta * gnorm2:
                    ps, mats, s, phi = trial_ps, trial_mats, trial_s, trial_phi
                    accepted = True
                    eta = min(eta * 1.3, 10.0)
                    break
            eta *= 0.5
            backtracks += 1
        if not accepted:
            break
        # a restart stuck at a nonzero critical value will not recover;
        # neither will one crawling along a flat valley
        stall = stall + 1 if phi_before - phi <= 1e-14 * phi else 0
        if stall >= 25:
            break
        history.append(phi)
        # healthy runs contract superlinearly once near the zero locus; a
        # run that cannot halve its value in 300 iterations never finishes
        if len(history) > 300 and phi > 0.5 * history[-300]:
            break
    return math.sqrt(phi), mats, ps, iterations


def solve(instance: DSInstance, config: SolverConfig = None) -> SolveOutcome:
    """Search for matrices in the prescribed classes with zero sum.

    Infeasible instances are still attempted (the feasibility inequality
    is a sufficient condition for existence, not a proven necessary one);
    the report always carries the feasibility flags.  After convergence
    the last matrix is replaced by minus the sum of the others, accepted
    only when its rank profile survives at the rank threshold.
    """
    config = config or SolverConfig()
    feas = instance.feasibility()
    if all(not c.rank_sequence for c in instance.classes):
        r = instance.rank
        sol = DSSolution(
            matrices=[np.zeros((r, r)) for _ in instance.classes],
            conjugators=[np.eye(r) for _ in instance.classes],
            residual=0.0,
            restart_index=0,
            iterations=0,
        )
        return SolveOutcome(True, sol, feas, [0.0])
    best_residuals = []
    for restart in range(config.restarts):
        rng = np.random.default_rng([config.seed, restart])
        resid, mats, ps, iters = _descent_run(instance, config, rng, config.max_iters)
        best_residuals.append(resid)
        if resid < config.tolerance:
            mats = _exactness_refinement(mats, instance, config)
            resid = float(np.linalg.norm(sum(mats)))
            sol = DSSolution(
                matrices=mats,
                conjugators=ps,
                residual=resid,
                restart_index=restart,
                iterations=iters,
            )
            return SolveOutcome(True, sol, feas, best_residuals)
    return SolveOutcome(
        False,
        None,
        feas,
        best_residuals,
        message=(
            "budget exhausted"
            + ("" if feas.feasible else " (instance fails the feasibility inequality)")
        ),
    )


def _exactness_refinement(mats, instance, config):
    """Replace the last active matrix by minus the sum of the others when
    that preserves its rank profile."""
    active = [i for i, c in enumerate(instance.classes) if c.rank_sequence]
    if not active:
        return mats
    last = active[-1]
    candidate = -sum(m for i, m in enumerate(mats) if i != last)
    want = instance.classes[last].rank_sequence
    residual = float(np.linalg.norm(sum(mats)))
    got = rank_profile([candidate], "float", tol=max(1e-7, 1e3 * residual))[0]
    if got == want:
        out = list(mats)
        out[last] = candidate
        return out
    return mats


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerifyReport:
    residual: float
    profile_ok: bool
    profiles: list
    expected: list
    irreducible: bool
    words: list
    conjugator_error: float
    hitchin: object = None  # VanishingOrderReport from the exact cross-check

    def passed(self):
        return self.profile_ok and self.irreducible


def verify(
    solution: DSSolution,
    instance: DSInstance,
    tol=1e-8,
    rank_tol=None,
    hitchin=False,
) -> VerifyReport:
    """Certification report: sum residual, exact-class rank profile,
    irreducibility words, conjugator consistency, and optionally the exact
    spectral cross-check via rational refinement."""
    mode = solution.mode
    if mode == "exact":
        total = solution.matrices[0]
        for m in solution.matrices[1:]:
            total = ex.madd(total, m)
        residual = 0.0 if ex.is_zero(total) else float(
            np.linalg.norm(np.array([[float(x) for x in row] for row in total]))
        )
    else:
        residual = float(np.linalg.norm(sum(solution.matrices)))
    if rank_tol is None and mode == "float":
        rank_tol = max(1e-7, 1e3 * residual)
    profiles = solution.profile(rank_tol)
    expected = [c.rank_sequence for c in instance.classes]
    profile_ok = all(p == e for p, e in zip(profiles, expected))
    cert = irreducible(solution.matrices, mode)
    conj_err = 0.0
    if mode == "float":
        for a, p, c in zip(solution.matrices, solution.conjugators, instance.classes):
            n = _jordan_float(c)
            conj_err = max(conj_err, float(np.linalg.norm(a - p @ n @ np.linalg.inv(p))))
    hitchin_report = None
    if hitchin:
        from .spectral import char_poly, vanishing_orders

        exact_sol = solution if mode == "exact" else exact_refine(solution, instance)
        sigma = instance.parabolic_type()
        h = flags_from_solution(exact_sol, sigma)
        hp = char_poly(h)
        hitchin_report = vanishing_orders(hp, sigma)
    return VerifyReport(
        residual=residual,
        profile_ok=profile_ok,
        profiles=profiles,
        expected=expected,
        irreducible=cert.irreducible,
        words=cert.words,
        conjugator_error=conj_err,
        hitchin=hitchin_report,
    )


# ---------------------------------------------------------------------------
# flags from a solution


def _col_space_exact(m):
    """Basis of the column space as a matrix (columns)."""
    rr, piv = ex.rref(ex.mtrans(m))
    rows = rr[: len(piv)]
    if not rows:
        return [[] for _ in m]
    return ex.mtrans(rows)


def _col_space_float(m, threshold=None):
    s = np.linalg.svd(m, compute_uv=False)
    if threshold is None:
        threshold = max(m.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rk = int(np.sum(s > threshold))
    if rk == 0:
        return np.zeros((m.shape[0], 0), dtype=complex)
    u, _, _ = np.linalg.svd(m)
    return u[:, :rk]


def flags_from_solution(
    solution: DSSolution, sigma: ParabolicType, rank_tol=None
) -> HiggsTuple:
    """Image flags of the powers: the step of dimension gamma_j at point i
    is the column space of the j-th power of A_i.

    Requires the rank profile to match the type's flag dimensions; when a
    type step is not of image form the flag is completed inside the kernel
    lattice by deterministic column selection (flagged by construction
    failure if impossible).  Float-mode rank thresholds are anchored at
    the base matrix scale raised to the power, inflated by the sum
    residual, because a refined last matrix is nilpotent only up to that
    residual.
    """
    mode = solution.mode
    if mode == "float" and rank_tol is None:
        rank_tol = max(1e-7, 1e3 * solution.residual)
    flags = []
    # the validation tolerance must dominate the same residual scale
    higgs_tol = 1e-8 if mode == "exact" else max(1e-8, 1e2 * solution.residual)
    for i in range(sigma.n_points):
        gam = sigma.gamma(i)[:-1]
        a = solution.matrices[i]
        if mode == "float":
            a = np.asarray(a, dtype=complex)
            s = np.linalg.svd(a, compute_uv=False)
            scale = float(s[0]) if s.size else 0.0
        fl = []
        power = a
        for j, gj in enumerate(gam, start=1):
            if mode == "exact":
                basis = _col_space_exact(power)
                width = ex.shape(basis)[1]
            else:
                sp = np.linalg.svd(power, compute_uv=False)
                anchor = max(float(sp[0]) if sp.size else 0.0, scale**j)
                basis = _col_space_float(power, threshold=rank_tol * anchor)
                width = basis.shape[1]
            if width != gj:
                basis = _complete_flag_step(a, power, gj, mode)
            fl.append(basis)
            power = ex.mmul(power, a) if mode == "exact" else power @ a
        flags.append(fl)
    return HiggsTuple(
        sigma=sigma,
        matrices=list(solution.matrices),
        flags=flags,
        mode=mode,
        tol=higgs_tol,
    )


def _complete_flag_step(a, power, target_dim, mode):
    """Extend Im(power) inside ker(a)-directions to the target dimension,
    choosing kernel basis columns deterministically."""
    if mode == "exact":
        base = _col_space_exact(power)
        have = ex.shape(base)[1]
        if have > target_dim:
            raise ValueError("rank exceeds the flag step dimension")
        kernel = ex.nullspace(a)
        cols = ex.mtrans(base) if have else []
        for v in kernel:
            if len(cols) == target_dim:
                break
            cand = cols + [v]
            if ex.rank(cand) == len(cand):
                cols = cand
        if len(cols) != target_dim:
            raise ValueError("cannot complete the flag step inside the kernel")
        return ex.mtrans(cols)
    base = _col_space_float(power)
    if base.shape[1] > target_dim:
        raise ValueError("rank exceeds the flag step dimension")
    u, s, vh = np.linalg.svd(a)
    rk = numerical_rank(a)
    kernel = vh[rk:].conj().T
    cols = [base[:, k] for k in range(base.shape[1])]
    for k in range(kernel.shape[1]):
        if len(cols) == target_dim:
            break
        cand = np.stack(cols + [kernel[:, k]], axis=1)
        if numerical_rank(cand) == len(cols) + 1:
            cols.append(kernel[:, k])
    if len(cols) != target_dim:
        raise ValueError("cannot complete the flag step inside the kernel")
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# exact rational refinement


class RefinementError(RuntimeError):
    pass


def _snap(x, denominator):
    return Fraction(round(float(x) * denominator), denominator)


def _nested_columns(float_flags, r):
    """One real column basis per point whose prefixes span the flag steps.

    The deepest step comes first; shallower steps are extended by the
    residuals of their own columns against what is already chosen, so the
    prefix of width gamma_j spans the j-th step up to float error.
    """
    if not float_flags:
        return np.zeros((r, 0))
    cols = []
    for b in reversed(float_flags):  # deepest first
        b = np.asarray(b).real
        for k in range(b.shape[1]):
            v = b[:, k].copy()
            for c in cols:
                v = v - c * float(np.dot(c, v))
            nv = float(np.linalg.norm(v))
            if nv > 1e-6:
                cols.append(v / nv)
    widths = [np.asarray(b).shape[1] for b in float_flags]
    if len(cols) != widths[0]:
        raise RefinementError("flag steps are not numerically nested")
    return np.stack(cols, axis=1)


def _preservation_basis(flag_bases, r):
    """Exact basis of the space of matrices pushing the snapped flag
    strictly deeper, as flattened column vectors."""
    chain = [ex.meye(r)] + list(flag_bases) + [None]  # None = zero space
    constraints = []
    for j in range(len(chain) - 1):
        src, dst = chain[j], chain[j + 1]
        if dst is None:
            # A * src = 0
            for col in range(ex.shape(src)[1]):
                for row in range(r):
                    eq = [Fraction(0)] * (r * r)
                    for t in range(r):
                        eq[row * r + t] = src[t][col]
                    constraints.append(eq)
            continue
        # rows spanning the left kernel of dst kill A * src
        left = ex.nullspace(ex.mtrans(dst))
        for lv in left:
            for col in range(ex.shape(src)[1]):
                eq = [Fraction(0)] * (r * r)
                for row in range(r):
                    for t in range(r):
                        eq[row * r + t] += lv[row] * src[t][col]
                constraints.append(eq)
    if not constraints:
        return [
            [Fraction(int(k == t)) for k in range(r * r)] for t in range(r * r)
        ]
    return ex.nullspace(constraints)


def exact_refine(
    solution: DSSolution,
    instance: DSInstance,
    denominator=2**16,
    max_attempts=4,
) -> DSSolution:
    """Exact rational solution near a certified floating one.

    The image flags are snapped to rationals; inside each point's
    strong-preservation space (a linear space in the matrix entries) the
    zero-sum condition is one exact linear system, solved anchored at the
    floating matrices.  Exact nilpotency and strong preservation hold by
    construction; the rank profile and closeness are re-verified, with a
    finer snap on failure.
    """
    if solution.mode == "exact":
        return solution
    r = instance.rank
    sigma = instance.parabolic_type()
    h = flags_from_solution(solution, sigma)
    nested = [_nested_columns(h.flags[i], r) for i in range(sigma.n_points)]
    for attempt in range(max_attempts):
        den = denominator * (2 ** (4 * attempt))
        snapped_flags = []
        okay = True
        for i in range(sigma.n_points):
            gam = sigma.gamma(i)[:-1]
            cols = nested[i]
            snapped_cols = [
                [_snap(cols[row, k], den) for k in range(cols.shape[1])]
                for row in range(r)
            ]
            # prefixes of one snapped nested basis stay nested exactly
            fl = []
            for gj in gam:
                sb = [row[:gj] for row in snapped_cols]
                if ex.rank(sb) != gj:
                    okay = False
                fl.append(sb)
            snapped_flags.append(fl)
        if not okay:
            continue
        bases = [_preservation_basis(snapped_flags[i], r) for i in range(instance.n)]
        dims = [len(b) for b in bases]
        # central constraint sum_i B_i c_i = 0 over all coefficient vectors
        total_dim = sum(dims)
        if total_dim == 0:
            mats = [ex.mzeros(r, r) for _ in range(instance.n)]
        else:
            central = [[Fraction(0)] * total_dim for _ in range(r * r)]
            offset = 0
            for i, basis in enumerate(bases):
                for k, vec in enumerate(basis):
                    for row_idx in range(r * r):
                        central[row_idx][offset + k] = vec[row_idx]
                offset += dims[i]
            # anchor: coordinates of the floating matrices in each basis
            anchor = []
            for i, basis in enumerate(bases):
                if not basis:
                    continue
                bf = np.array([[float(x) for x in vec] for vec in basis]).T
                target = np.asarray(solution.matrices[i]).real.reshape(-1)
                coeff, *_ = np.linalg.lstsq(bf, target, rcond=None)
                anchor.extend(_snap(c, den) for c in coeff)
            sol_vec = ex.solve_anchored(central, anchor)
            mats = []
            offset = 0
            for i, basis in enumerate(bases):
                flat = [Fraction(0)] * (r * r)
                for k, vec in enumerate(basis):
                    c = sol_vec[offset + k]
                    if c != 0:
                        for t in range(r * r):
                            flat[t] += c * vec[t]
                offset += dims[i]
                mats.append([flat[t * r : (t + 1) * r] for t in range(r)])
        profiles = rank_profile(mats, "exact")
        expected = [c.rank_sequence for c in instance.classes]
        if profiles != list(expected):
            continue
        drift = max(
            float(
                np.linalg.norm(
                    np.array([[float(x) for x in row] for row in m])
                    - np.asarray(solution.matrices[i]).real
                )
            )
            for i, m in enumerate(mats)
        )
        if drift > 1e-2:
            continue
        conjugators = []
        for m, c in zip(mats, instance.classes):
            if c.rank_sequence:
                conjugators.append(ex.nilpotent_jordan_basis(m))
            else:
                conjugators.append(ex.meye(r))
        return DSSolution(
            matrices=mats,
            conjugators=conjugators,
            residual=0.0,
            mode="exact",
            restart_index=solution.restart_index,
            iterations=solution.iterations,
        )
    raise RefinementError(
        "rational refinement failed: snapped flags kept degenerating"
    )


# ---------------------------------------------------------------------------
# instance generation (used by tests and the verification suite)


def random_partition(r, rng):
    parts = []
    left = r
    while left > 0:
        p = int(rng.integers(1, left + 1))
        parts.append(p)
        left -= p
    return tuple(sorted(parts, reverse=True))


def random_feasible_instance(rng, max_rank=5, max_points=6) -> DSInstance:
    """Random instance with 2r <= sum of first-power ranks, nonzero
    classes, four or more points."""
    while True:
        r = int(rng.integers(2, max_rank + 1))
        n = int(rng.integers(4, max_points + 1))
        classes = []
        for _ in range(n):
            while True:
                part = random_partition(r, rng)
                if len(part) < r:  # exclude the zero class
                    break
            classes.append(NilpotentClass.from_partition(part))
        inst = DSInstance(rank=r, classes=tuple(classes))
        if inst.feasibility().feasible:
            return inst
