"""Residue tuples with flags, and the dictionary to moment-zero quiver data.

A ``HiggsTuple`` packages n square residue matrices summing to zero with a
flag of subspaces at every marked point, each matrix pushing every flag
step strictly deeper.  Such tuples are exactly the matrix form of twisted
endomorphisms on a trivialized bundle with simple poles at the marked
points, written in the local frames dz/(z - x).

The two conversions:

- a moment-zero representation with injective inward maps yields residues
  ``g_1 f_1`` and image flags ``Im(g_1 ... g_j)``;
- a tuple satisfying the invariants yields inward inclusions and outward
  corestrictions of the residues, landing back on the moment-zero locus.

Both directions are implemented for floating and exact entries.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import linalg_exact as ex
from .combinat import ParabolicType, check_small_weights
from .starrep import (
    StarQuiver,
    StarRep,
    arm_semistable,
    build_star_quiver,
    moment_is_zero,
    moment_residual,
    numerical_rank,
    to_float_matrix,
)


class BridgeError(ValueError):
    pass


class WeightsNotSmallError(ValueError):
    """The weight bound fails, so subspace slope tests do not certify
    semistability (a heavy top weight lets a twisted sub-line-bundle beat
    every constant subspace)."""


def _is_exact(mode):
    return mode == "exact"


def _col_rank(a, mode, tol=None):
    if _is_exact(mode):
        return ex.rank(a)
    return numerical_rank(a, tol)


def _subspace_contained(span, vecs, mode, tol=1e-8):
    """Column space of vecs contained in column space of span?"""
    if _is_exact(mode):
        if not vecs or not vecs[0]:
            return True
        if not span or not span[0]:
            return ex.is_zero(vecs)
        stacked = ex.hstack([span, vecs])
        return ex.rank(stacked) == ex.rank(span)
    if vecs.shape[1] == 0:
        return True
    if span.shape[1] == 0:
        return bool(np.linalg.norm(vecs) <= tol)
    # residual of least-squares projection onto span
    q, _ = np.linalg.qr(span)
    resid = vecs - q @ (q.conj().T @ vecs)
    scale = max(1.0, float(np.linalg.norm(vecs)))
    return bool(np.linalg.norm(resid) <= tol * scale)


def _intersection_dim(a, b, mode, tol=None):
    """dim(col a  meet  col b) = rk a + rk b - rk [a b]."""
    if _is_exact(mode):
        if not a or not a[0]:
            return 0
        if not b or not b[0]:
            return 0
        return ex.rank(a) + ex.rank(b) - ex.rank(ex.hstack([a, b]))
    if a.shape[1] == 0 or b.shape[1] == 0:
        return 0
    return (
        numerical_rank(a, tol)
        + numerical_rank(b, tol)
        - numerical_rank(np.hstack([a, b]), tol)
    )


@dataclass
class HiggsTuple:
    """Residue matrices A_1..A_n with per-point flags and inherited weights.

    ``flags[i]`` lists full-column-rank basis matrices for the proper flag
    steps at point i (the full space and the zero space are implicit), so
    the list has sigma_x - 1 entries of widths gamma_1 > ... > gamma_{s-1}.
    """

    sigma: ParabolicType
    matrices: list
    flags: list
    mode: str = "float"
    tol: float = 1e-8
    check: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.mode not in ("float", "exact"):
            raise ValueError("mode must be 'float' or 'exact'")
        if self.mode == "float":
            self.matrices = [np.asarray(m, dtype=complex) for m in self.matrices]
            self.flags = [
                [np.asarray(b, dtype=complex) for b in fl] for fl in self.flags
            ]
        if self.check:
            problems = self.validate()
            if problems:
                raise BridgeError("; ".join(problems))

    @property
    def rank(self):
        return self.sigma.rank

    @property
    def n(self):
        return self.sigma.n_points

    def validate(self):
        """List of violated invariants (empty when valid)."""
        out = []
        r = self.rank
        if len(self.matrices) != self.n or len(self.flags) != self.n:
            return ["need one residue matrix and one flag list per marked point"]
        # residues sum to zero
        total = self.matrices[0]
        for m in self.matrices[1:]:
            total = ex.madd(total, m) if self.mode == "exact" else total + m
        if self.mode == "exact":
            if not ex.is_zero(total):
                out.append("residues do not sum to zero")
        elif np.linalg.norm(total) > self.tol:
            out.append(f"residue sum has norm {np.linalg.norm(total):.2e}")
        for i in range(self.n):
            gam = self.sigma.gamma(i)[:-1]
            fl = self.flags[i]
            if len(fl) != len(gam):
                out.append(f"point {i}: expected {len(gam)} flag steps")
                continue
            for j, (b, gj) in enumerate(zip(fl, gam), start=1):
                mshape = ex.shape(b) if self.mode == "exact" else b.shape
                if mshape != (r, gj):
                    out.append(f"point {i}: flag step {j} should be {r}x{gj}")
                elif _col_rank(b, self.mode) != gj:
                    out.append(f"point {i}: flag step {j} basis is rank deficient")
            # strong preservation through the full chain, zero space last
            chain = [None] + list(fl) + [None]  # None = full space / zero space
            a = self.matrices[i]
            for j in range(len(chain) - 1):
                src, dst = chain[j], chain[j + 1]
                image = a if src is None else (
                    ex.mmul(a, src) if self.mode == "exact" else a @ src
                )
                if dst is None:  # zero space
                    if self.mode == "exact":
                        okay = ex.is_zero(image)
                    else:
                        okay = np.linalg.norm(image) <= self.tol
                else:
                    okay = _subspace_contained(dst, image, self.mode, self.tol)
                if not okay:
                    out.append(f"point {i}: residue does not push step {j} deeper")
                    break
        return out


# ---------------------------------------------------------------------------
# conversions


def quiver_to_higgs(rep: StarRep, sigma: ParabolicType, tol=1e-8) -> HiggsTuple:
    """Residues g_1 f_1 and image flags Im(g_1 ... g_j).

    Requires all moment components to vanish and every inward map to have
    full rank (otherwise the image flags would be too small).
    """
    quiver = build_star_quiver(sigma)
    if rep.quiver != quiver:
        raise BridgeError("representation does not live on the type's quiver")
    if not moment_is_zero(rep, tol):
        raise BridgeError(
            f"moment map does not vanish (residual {moment_residual(rep):.2e})"
        )
    for j in range(quiver.n_arms):
        if not arm_semistable(rep, j):
            raise BridgeError(f"arm {j} has a rank-deficient inward map")
    mats = [rep.residue(j) for j in range(quiver.n_arms)]
    flags = []
    for j in range(quiver.n_arms):
        fl = []
        acc = None
        for gm in rep.g[j]:
            acc = gm if acc is None else (
                ex.mmul(acc, gm) if rep.mode == "exact" else acc @ gm
            )
            fl.append(acc)
        flags.append(fl)
    return HiggsTuple(sigma=sigma, matrices=mats, flags=flags, mode=rep.mode, tol=tol)


def higgs_to_quiver(h: HiggsTuple, tol=None) -> StarRep:
    """Inward maps are basis inclusions of consecutive flag steps; outward
    maps are the residues written from one step's basis to the next.

    The corestriction solve tolerance defaults to the tuple's own
    validation tolerance.
    """
    if tol is None:
        tol = h.tol
    quiver = build_star_quiver(h.sigma)
    r = h.rank
    f, g = [], []
    for i in range(h.n):
        chain = [ex.meye(r) if h.mode == "exact" else np.eye(r, dtype=complex)]
        chain += list(h.flags[i])
        fj, gj = [], []
        a = h.matrices[i]
        for j in range(1, len(chain)):
            prev, cur = chain[j - 1], chain[j]
            if h.mode == "exact":
                try:
                    gj.append(ex.solve(prev, cur))
                    fj.append(ex.solve(cur, ex.mmul(a, prev)))
                except ValueError as e:
                    raise BridgeError(
                        f"point {i}: flag step {j} is not preserved strongly ({e})"
                    ) from None
            else:
                gsol, gres, _, _ = np.linalg.lstsq(prev, cur, rcond=None)
                fsol, fres, _, _ = np.linalg.lstsq(cur, a @ prev, rcond=None)
                for sol, target, basis in ((gsol, cur, prev), (fsol, a @ prev, cur)):
                    resid = np.linalg.norm(basis @ sol - target)
                    if resid > tol * max(1.0, np.linalg.norm(target)):
                        raise BridgeError(
                            f"point {i}: flag step {j} is not preserved strongly "
                            f"(residual {resid:.2e})"
                        )
                gj.append(gsol)
                fj.append(fsol)
        f.append(fj)
        g.append(gj)
    return StarRep(quiver, f, g, h.mode)


def assemble_phi(h: HiggsTuple, z):
    """Value sum A_i / (z - x_i); z must avoid the marked points."""
    pts = h.sigma.line.points
    if h.mode == "exact":
        z = z if isinstance(z, Fraction) else Fraction(z)
        if z in pts:
            raise BridgeError(f"evaluation at the pole {z}")
        out = ex.mzeros(h.rank, h.rank)
        for a, x in zip(h.matrices, pts):
            out = ex.madd(out, ex.mscale(Fraction(1) / (z - x), a))
        return out
    zc = complex(z)
    if any(abs(zc - complex(x)) == 0.0 for x in pts):
        raise BridgeError(f"evaluation at the pole {z}")
    out = np.zeros((h.rank, h.rank), dtype=complex)
    for a, x in zip(h.matrices, pts):
        out = out + a / (zc - complex(x))
    return out


# ---------------------------------------------------------------------------
# slopes


def parabolic_slope(h: HiggsTuple, w=None, degree=0, point_fibers=None, tol=None):
    """Weighted slope of the subobject spanned by ``w`` (the full object
    when ``w`` is None), as an exact rational.

    ``degree`` is the underlying degree of the subobject (0 for constant
    subspaces of the trivialized bundle).  ``point_fibers`` optionally
    gives a separate fiber basis at every marked point for subbundles that
    are not constant; the column count must agree across points and
    ``degree`` should then carry the subbundle's actual degree.
    """
    sig = h.sigma
    if w is None and point_fibers is None:
        return Fraction(degree, sig.rank) + sig.full_slope()
    if point_fibers is not None:
        fibers = point_fibers
        k = ex.shape(fibers[0])[1] if h.mode == "exact" else fibers[0].shape[1]
    else:
        fibers = [w] * sig.n_points
        k = ex.shape(w)[1] if h.mode == "exact" else w.shape[1]
    if k == 0:
        raise BridgeError("subobject must be nonzero")
    for fib in fibers:
        if _col_rank(fib, h.mode, tol) != k:
            raise BridgeError("subobject basis is rank deficient")
    total = Fraction(0)
    for i in range(sig.n_points):
        fl = [None] + list(h.flags[i]) + [None]  # full space ... zero space
        inter = []
        for j, step in enumerate(fl):
            if j == 0:
                inter.append(k)
            elif j == len(fl) - 1:
                inter.append(0)
            else:
                inter.append(_intersection_dim(step, fibers[i], h.mode, tol))
        for j, a in enumerate(sig.weights[i], start=1):
            total += a * (inter[j - 1] - inter[j])
    return (Fraction(degree) + total / sig.K) / k


# ---------------------------------------------------------------------------
# irreducibility (full matrix algebra test)


@dataclass
class IrreducibilityCertificate:
    irreducible: bool
    dimension: int
    words: list  # index words spanning the algebra (0-based, () = identity)
    invariant_subspace: object = None  # basis of a common invariant subspace


class _SpanTracker:
    """Incremental linear-independence bookkeeping for flattened matrices."""

    def __init__(self, mode, dim, tol=1e-9):
        self.mode = mode
        self.dim = dim
        self.tol = tol
        self.rows = []  # exact: reduced rows with pivot index; float: orthonormal
        self.pivots = []
        self.scale0 = 0.0  # largest vector magnitude seen (float mode)

    def add(self, vec):
        if self.mode == "exact":
            v = list(vec)
            for row, piv in zip(self.rows, self.pivots):
                c = v[piv]
                if c != 0:
                    v = [x - c * y for x, y in zip(v, row)]
            piv = next((i for i, x in enumerate(v) if x != 0), None)
            if piv is None:
                return False
            inv = Fraction(1) / v[piv]
            v = [x * inv for x in v]
            self.rows.append(v)
            self.pivots.append(piv)
            return True
        v = np.asarray(vec, dtype=complex)
        scale = np.linalg.norm(v)
        self.scale0 = max(self.scale0, scale)
        # vectors at roundoff scale relative to the data are numerically
        # zero, not new directions
        if scale <= self.tol * self.scale0:
            return False
        for _ in range(2):  # reorthogonalize once for numerical safety
            for row in self.rows:
                v = v - row * np.vdot(row, v)
        resid = np.linalg.norm(v)
        if resid <= self.tol * scale:
            return False
        self.rows.append(v / resid)
        return True

    def __len__(self):
        return len(self.rows)


def _flatten(m, mode):
    if mode == "exact":
        return [x for row in m for x in row]
    return np.asarray(m, dtype=complex).reshape(-1)


def irreducible(mats, mode="float", tol=1e-9, want_witness=True):
    """Do the matrices generate the full matrix algebra?

    Closes a word basis under left multiplication until the span
    stabilizes; the tuple has no common proper invariant subspace exactly
    when the closed span has dimension rank squared.  When it does not, a
    common invariant subspace is extracted from the stabilized span by
    closing candidate vectors under the algebra.
    """
    if not mats:
        raise ValueError("need at least one matrix")
    r = len(mats[0]) if mode == "exact" else mats[0].shape[0]
    eye = ex.meye(r) if mode == "exact" else np.eye(r, dtype=complex)
    tracker = _SpanTracker(mode, r * r, tol)
    tracker.add(_flatten(eye, mode))
    words = [()]
    elements = [eye]
    frontier = list(range(len(elements)))
    while frontier and len(tracker) < r * r:
        next_frontier = []
        for idx in frontier:
            for a_idx, a in enumerate(mats):
                prod = (
                    ex.mmul(a, elements[idx])
                    if mode == "exact"
                    else a @ elements[idx]
                )
                if tracker.add(_flatten(prod, mode)):
                    words.append((a_idx,) + words[idx])
                    elements.append(prod)
                    next_frontier.append(len(elements) - 1)
                    if len(tracker) == r * r:
                        break
            if len(tracker) == r * r:
                break
        frontier = next_frontier
    dim = len(tracker)
    if dim == r * r:
        return IrreducibilityCertificate(True, dim, words)
    witness = None
    if want_witness:
        witness = _find_invariant_subspace(mats, elements, mode, tol)
    return IrreducibilityCertificate(False, dim, words, invariant_subspace=witness)


def _algebra_closure_of_vector(elements, v, mode, tol):
    """Column space of {m v : m in algebra span}; invariant by closure."""
    if mode == "exact":
        cols = []
        for m in elements:
            cols.append([sum(m[i][j] * v[j] for j in range(len(v))) for i in range(len(v))])
        mat = [list(row) for row in zip(*cols)]
        rk = ex.rank(mat)
        if rk == 0 or rk == len(v):
            return None
        # extract a basis of the column space
        rr, piv = ex.rref([list(row) for row in zip(*mat)])  # row space of transpose
        basis_rows = rr[: len(piv)]
        return [list(col) for col in zip(*basis_rows)]
    stacked = np.stack([m @ v for m in elements], axis=1)
    rk = numerical_rank(stacked, tol)
    if rk == 0 or rk == stacked.shape[0]:
        return None
    u, s, _ = np.linalg.svd(stacked, full_matrices=False)
    return u[:, :rk]


def _find_invariant_subspace(mats, elements, mode, tol):
    r = len(mats[0]) if mode == "exact" else mats[0].shape[0]
    candidates = []
    if mode == "exact":
        for k in range(r):
            e = [Fraction(int(i == k)) for i in range(r)]
            candidates.append(e)
        for m in mats:
            for v in ex.nullspace(m):
                candidates.append(v)
        for t in range(1, 6):
            v = [Fraction((t * i * i + 3 * i + t) % 7 - 3) for i in range(r)]
            if any(x != 0 for x in v):
                candidates.append(v)
    else:
        for k in range(r):
            e = np.zeros(r, dtype=complex)
            e[k] = 1.0
            candidates.append(e)
        for m in mats:
            u, s, vh = np.linalg.svd(m)
            rk = numerical_rank(m, None)
            for col in range(rk, r):
                candidates.append(vh[col].conj())
        rng = np.random.default_rng(20240 + r)
        combo = sum(
            rng.standard_normal() * np.asarray(to_float_matrix(m, mode), dtype=complex)
            for m in mats
        )
        vals, vecs = np.linalg.eig(combo)
        for col in range(vecs.shape[1]):
            candidates.append(vecs[:, col])
    for v in candidates:
        basis = _algebra_closure_of_vector(elements, v, mode, tol)
        if basis is not None:
            return basis
    return None


# ---------------------------------------------------------------------------
# stability verdict


@dataclass
class StabilityReport:
    verdict: str  # stable | semistable_only | unstable | inconclusive
    full_slope: Fraction
    witness_subspace: object = None
    witness_slope: Fraction = None
    exhaustive: bool = False


def stability_verdict(h: HiggsTuple, seed=0, tol=1e-9) -> StabilityReport:
    """Stable when the residues act irreducibly; otherwise compares the
    slopes of the invariant subspaces the search finds.

    Requires the small-weights bound: without it, constant-subspace slope
    comparisons cannot certify semistability (a twisted sub-line-bundle
    with a heavy top weight defeats them), so the call refuses.
    The reducible branch is not an exhaustive search and may be
    inconclusive.
    """
    if not check_small_weights(h.sigma):
        raise WeightsNotSmallError(
            "weights are too large for subspace slope testing: "
            "the reduction to constant subspaces requires the small-weights bound"
        )
    full = parabolic_slope(h)
    cert = irreducible(h.matrices, h.mode, tol)
    if cert.irreducible:
        return StabilityReport(verdict="stable", full_slope=full, exhaustive=True)
    # reducible: every subobject test happens on invariant subspaces
    candidates = _invariant_subspace_candidates(h, cert, seed, tol)
    best = None
    saw_equal = False
    for basis in candidates:
        slope = parabolic_slope(h, basis)
        if slope > full:
            return StabilityReport(
                verdict="unstable",
                full_slope=full,
                witness_subspace=basis,
                witness_slope=slope,
            )
        if slope == full:
            saw_equal = True
            best = basis
    if saw_equal:
        return StabilityReport(
            verdict="semistable_only",
            full_slope=full,
            witness_subspace=best,
            witness_slope=full,
        )
    return StabilityReport(verdict="inconclusive", full_slope=full)


def _invariant_subspace_candidates(h: HiggsTuple, cert, seed, tol):
    """Invariant subspaces to test: the certificate witness, algebra
    closures of flag steps and coordinate vectors, and seeded random
    vectors.  Zero tuples make every subspace invariant, so flag steps and
    coordinate subspaces enter directly."""
    r = h.rank
    mode = h.mode
    mats = h.matrices
    all_zero = all(
        (ex.is_zero(m) if mode == "exact" else np.linalg.norm(m) == 0.0) for m in mats
    )
    # rebuild algebra span elements (cheap at this scale)
    cert2 = irreducible(mats, mode, tol, want_witness=False)
    eye = ex.meye(r) if mode == "exact" else np.eye(r, dtype=complex)
    elements = [eye]
    for word in cert2.words:
        m = eye
        for idx in word:
            m = ex.mmul(mats[idx], m) if mode == "exact" else mats[idx] @ m
        elements.append(m)
    out = []
    if cert.invariant_subspace is not None:
        out.append(cert.invariant_subspace)
    seeds = []
    for i in range(h.n):
        for b in h.flags[i]:
            if mode == "exact":
                for col in zip(*b):
                    seeds.append(list(col))
            else:
                for col in range(b.shape[1]):
                    seeds.append(b[:, col])
    for k in range(r):
        if mode == "exact":
            seeds.append([Fraction(int(i == k)) for i in range(r)])
        else:
            e = np.zeros(r, dtype=complex)
            e[k] = 1.0
            seeds.append(e)
    rng = np.random.default_rng(seed)
    for _ in range(4):
        if mode == "exact":
            seeds.append([Fraction(int(rng.integers(-5, 6))) for _ in range(r)])
        else:
            seeds.append(rng.standard_normal(r) + 1j * rng.standard_normal(r))
    for v in seeds:
        if mode == "exact" and all(x == 0 for x in v):
            continue
        if all_zero:
            basis = (
                [[x] for x in v] if mode == "exact" else np.asarray(v).reshape(-1, 1)
            )
            if _col_rank(basis, mode) == 1:
                out.append(basis)
            continue
        basis = _algebra_closure_of_vector(elements, v, mode, tol)
        if basis is not None:
            out.append(basis)
    # also flag steps themselves when invariant
    for i in range(h.n):
        for b in h.flags[i]:
            invariant = all(
                _subspace_contained(
                    b,
                    ex.mmul(m, b) if mode == "exact" else m @ b,
                    mode,
                    1e-8,
                )
                for m in mats
            )
            if invariant:
                out.append(b)
    return out
