"""Representations of the doubled star quiver and their stability data.

Orientation convention, fixed once: ``f`` maps point outward (center
toward arm tips), ``g`` maps point inward.  Levels are 1-based; level 0
is the central vertex of dimension ``rank``.  With chains
``(g_1, ..., g_s)`` on an arm, ``f_i`` has shape ``g_i x g_{i-1}`` and
``g_i`` has shape ``g_{i-1} x g_i`` (``g_0 = rank``).

The moment map components are written at the vertex where both
compositions are endomorphisms: the central component is the sum of
``g_1 f_1`` over arms, the component at arm vertex i is
``f_i g_i - g_{i+1} f_{i+1}`` (just ``f_s g_s`` at the tip).  Vanishing of
all components encodes residue-sum zero plus strong flag preservation.

Two entry representations are supported and never mixed inside one value:
``float`` (complex128 ndarrays) and ``exact`` (Fraction row lists).
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import linalg_exact as ex
from .combinat import ParabolicType, flag_dimension_vector


@dataclass(frozen=True)
class StarQuiver:
    rank: int
    arms: tuple  # tuple of chains; each chain a tuple of positive ints

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(tuple(a) for a in self.arms))
        if self.rank < 1:
            raise ValueError("central rank must be positive")
        for chain in self.arms:
            if any(c < 1 for c in chain):
                raise ValueError("arm dimensions must be positive")
            if any(a <= b for a, b in zip(chain, chain[1:])):
                raise ValueError("arm chains must be strictly decreasing")
            if chain and chain[0] > self.rank:
                raise ValueError("arm dimensions cannot exceed the central rank")

    @property
    def n_arms(self):
        return len(self.arms)

    def dims(self, j):
        """(rank, g_1, ..., g_s) for arm j."""
        return (self.rank,) + self.arms[j]

    def phase_dim(self):
        """Complex dimension of the doubled representation space."""
        return 2 * sum(
            a * b for j in range(self.n_arms) for a, b in zip(self.dims(j), self.dims(j)[1:])
        )


def build_star_quiver(sigma: ParabolicType) -> StarQuiver:
    """Arm j carries the flag dimension vector of the j-th marked point."""
    return StarQuiver(
        rank=sigma.rank,
        arms=tuple(flag_dimension_vector(sigma, x) for x in sigma.line.points),
    )


@dataclass(frozen=True)
class StabilityCharacter:
    """Multiplicative character: determinant of the central block to the
    power -N times determinants of arm blocks to positive powers d.

    The integrality N * rank = sum of d * dim over arm vertices is exactly
    the condition that the diagonal one-parameter subgroup acts trivially
    on the character; exponents are stored pre-scaled so N is an integer.
    """

    central_exponent: int  # equals -N
    arm_exponents: tuple  # per arm, tuple of positive ints d_i

    def __post_init__(self):
        object.__setattr__(
            self, "arm_exponents", tuple(tuple(d) for d in self.arm_exponents)
        )

    @property
    def N(self):
        return -self.central_exponent

    def check_diagonal(self, quiver: StarQuiver):
        total = sum(
            d * dim
            for j, ds in enumerate(self.arm_exponents)
            for d, dim in zip(ds, quiver.arms[j])
        )
        return total == self.N * quiver.rank


def build_character(sigma: ParabolicType) -> StabilityCharacter:
    """Arm exponents are consecutive weight gaps; the central exponent is
    minus the weighted dimension sum over rank, scaled by the least
    positive integer that clears the denominator."""
    quiver = build_star_quiver(sigma)
    d = []
    for i in range(sigma.n_points):
        wts = sigma.weights[i]
        d.append(tuple(wts[k + 1] - wts[k] for k in range(len(wts) - 1)))
    total = sum(
        dv * dim for ds, chain in zip(d, quiver.arms) for dv, dim in zip(ds, chain)
    )
    r = sigma.rank
    if total == 0:
        return StabilityCharacter(central_exponent=0, arm_exponents=tuple(d))
    mult = r // math.gcd(int(total), r)
    n_big = int(total) * mult // r
    d_scaled = tuple(tuple(int(dv) * mult for dv in ds) for ds in d)
    return StabilityCharacter(central_exponent=-n_big, arm_exponents=d_scaled)


# ---------------------------------------------------------------------------
# mode-dispatched matrix helpers


def _is_exact(mode):
    return mode == "exact"


def _mul(a, b, mode):
    return ex.mmul(a, b) if _is_exact(mode) else a @ b


def _sub(a, b, mode):
    return ex.msub(a, b) if _is_exact(mode) else a - b


def _add(a, b, mode):
    return ex.madd(a, b) if _is_exact(mode) else a + b


def _zeros(m, n, mode):
    return ex.mzeros(m, n) if _is_exact(mode) else np.zeros((m, n), dtype=complex)


def _eye(n, mode):
    return ex.meye(n) if _is_exact(mode) else np.eye(n, dtype=complex)


def _trace(a, mode):
    return ex.mtrace(a) if _is_exact(mode) else np.trace(a)


def _inv(a, mode):
    return ex.inv(a) if _is_exact(mode) else np.linalg.inv(a)


def _norm(a, mode):
    if _is_exact(mode):
        return float(sum(float(x) ** 2 for row in a for x in row)) ** 0.5
    return float(np.linalg.norm(a))


def _shape(a, mode):
    return ex.shape(a) if _is_exact(mode) else a.shape


def numerical_rank(a, tol=None):
    """Rank by singular values; threshold max-dim * eps * largest singular
    value unless overridden."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    if tol is None:
        tol = max(a.shape) * np.finfo(float).eps * s[0]
    return int(np.sum(s > tol))


def _rank(a, mode, tol=None):
    return ex.rank(a) if _is_exact(mode) else numerical_rank(a, tol)


def to_float_matrix(a, mode):
    if _is_exact(mode):
        return np.array([[float(x) for x in row] for row in a], dtype=complex)
    return np.asarray(a, dtype=complex)


# ---------------------------------------------------------------------------
# representations


class StarRep:
    """Immutable-by-convention container for all f and g matrices.

    ``f[j][i]`` and ``g[j][i]`` hold the outward/inward maps at level i+1
    of arm j.  Entries are complex floats or Fractions; the two never mix
    inside one value.
    """

    def __init__(self, quiver: StarQuiver, f, g, mode="float"):
        if mode not in ("float", "exact"):
            raise ValueError("mode must be 'float' or 'exact'")
        self.quiver = quiver
        self.mode = mode
        if len(f) != quiver.n_arms or len(g) != quiver.n_arms:
            raise ValueError("need one f-list and one g-list per arm")
        self.f = []
        self.g = []
        for j in range(quiver.n_arms):
            dims = quiver.dims(j)
            if len(f[j]) != len(dims) - 1 or len(g[j]) != len(dims) - 1:
                raise ValueError(f"arm {j}: wrong number of levels")
            fj, gj = [], []
            for i in range(len(dims) - 1):
                fm = f[j][i] if mode == "exact" else np.asarray(f[j][i], dtype=complex)
                gm = g[j][i] if mode == "exact" else np.asarray(g[j][i], dtype=complex)
                if _shape(fm, mode) != (dims[i + 1], dims[i]):
                    raise ValueError(f"arm {j} level {i + 1}: f has wrong shape")
                if _shape(gm, mode) != (dims[i], dims[i + 1]):
                    raise ValueError(f"arm {j} level {i + 1}: g has wrong shape")
                fj.append(fm)
                gj.append(gm)
            self.f.append(fj)
            self.g.append(gj)

    def residue(self, j):
        """g_1 f_1 on arm j; the zero endomorphism for an empty arm."""
        if not self.f[j]:
            return _zeros(self.quiver.rank, self.quiver.rank, self.mode)
        return _mul(self.g[j][0], self.f[j][0], self.mode)

    def residues(self):
        return [self.residue(j) for j in range(self.quiver.n_arms)]

    def copy(self):
        if self.mode == "exact":
            f = [[ex.mcopy(m) for m in arm] for arm in self.f]
            g = [[ex.mcopy(m) for m in arm] for arm in self.g]
        else:
            f = [[m.copy() for m in arm] for arm in self.f]
            g = [[m.copy() for m in arm] for arm in self.g]
        return StarRep(self.quiver, f, g, self.mode)

    def to_float(self):
        if self.mode == "float":
            return self
        f = [[to_float_matrix(m, "exact") for m in arm] for arm in self.f]
        g = [[to_float_matrix(m, "exact") for m in arm] for arm in self.g]
        return StarRep(self.quiver, f, g, "float")


def zero_rep(quiver: StarQuiver, mode="float") -> StarRep:
    f, g = [], []
    for j in range(quiver.n_arms):
        dims = quiver.dims(j)
        f.append([_zeros(dims[i + 1], dims[i], mode) for i in range(len(dims) - 1)])
        g.append([_zeros(dims[i], dims[i + 1], mode) for i in range(len(dims) - 1)])
    return StarRep(quiver, f, g, mode)


def random_rep(quiver: StarQuiver, rng, scale=1.0, real=False) -> StarRep:
    """Independent Gaussian entries on every slot (float mode)."""

    def draw(m, n):
        a = rng.standard_normal((m, n))
        if not real:
            a = a + 1j * rng.standard_normal((m, n))
        return scale * a

    f, g = [], []
    for j in range(quiver.n_arms):
        dims = quiver.dims(j)
        f.append([draw(dims[i + 1], dims[i]) for i in range(len(dims) - 1)])
        g.append([draw(dims[i], dims[i + 1]) for i in range(len(dims) - 1)])
    return StarRep(quiver, f, g, "float")


# ---------------------------------------------------------------------------
# moment map


@dataclass
class MomentValue:
    center: object
    arms: list  # arms[j][i] is the component at arm j, vertex i+1

    def components(self):
        yield ("center",), self.center
        for j, arm in enumerate(self.arms):
            for i, m in enumerate(arm):
                yield (j, i + 1), m


def moment_map(rep: StarRep) -> MomentValue:
    q, mode = rep.quiver, rep.mode
    center = _zeros(q.rank, q.rank, mode)
    for j in range(q.n_arms):
        if rep.f[j]:
            center = _add(center, rep.residue(j), mode)
    arms = []
    for j in range(q.n_arms):
        comps = []
        s = len(rep.f[j])
        for i in range(s):
            fg = _mul(rep.f[j][i], rep.g[j][i], mode)
            if i + 1 < s:
                gf = _mul(rep.g[j][i + 1], rep.f[j][i + 1], mode)
                comps.append(_sub(fg, gf, mode))
            else:
                comps.append(fg)
        arms.append(comps)
    return MomentValue(center=center, arms=arms)


def moment_residual(rep: StarRep) -> float:
    """Largest Frobenius norm over all moment components."""
    mv = moment_map(rep)
    return max(_norm(m, rep.mode) for _, m in mv.components())


def moment_is_zero(rep: StarRep, tol=1e-8) -> bool:
    if rep.mode == "exact":
        return all(ex.is_zero(m) for _, m in moment_map(rep).components())
    return moment_residual(rep) <= tol


# ---------------------------------------------------------------------------
# stability on arms


def arm_semistable(rep: StarRep, j: int, tol=None) -> bool:
    """Every inward map on arm j has full column rank, so each level
    injects into the center."""
    dims = rep.quiver.dims(j)
    for i, gm in enumerate(rep.g[j]):
        if _rank(gm, rep.mode, tol) < dims[i + 1]:
            return False
    return True


@dataclass
class OneParameterSubgroup:
    """Diagonal destabilizer at a single arm vertex.

    In the column basis ``basis`` of the vertex space, the subgroup acts
    by t^(exponents) (one entry is -1, the rest 0).  The limit of the arm
    action exists along t -> infinity, and the character pairing is
    -(arm exponent at the vertex), which is negative.
    """

    arm: int
    level: int  # 1-based vertex on the arm
    exponents: tuple
    basis: object  # square matrix over the vertex space

    def pairing(self, character: StabilityCharacter) -> int:
        d = character.arm_exponents[self.arm][self.level - 1]
        return d * sum(self.exponents)


def destabilizing_one_ps(rep: StarRep, j: int, tol=None):
    """Destabilizer for arm j, or None when every inward map has full rank.

    Finds the shallowest rank-deficient level, column-reduces for a kernel
    vector, and returns the one-parameter subgroup scaling that direction
    by t^-1.
    """
    dims = rep.quiver.dims(j)
    for i, gm in enumerate(rep.g[j]):
        size = dims[i + 1]
        if _rank(gm, rep.mode, tol) >= size:
            continue
        if rep.mode == "exact":
            kernel = ex.nullspace(gm)
            v = kernel[0]
            vf = np.array([float(x) for x in v], dtype=complex)
        else:
            _, _, vh = np.linalg.svd(gm)
            vf = vh[-1].conj()
        # complete vf to a basis by Gram-Schmidt over the identity
        cols = [vf / np.linalg.norm(vf)]
        for k in range(size):
            e = np.zeros(size, dtype=complex)
            e[k] = 1.0
            w = e - sum(c * np.vdot(c, e) for c in cols)
            if np.linalg.norm(w) > 1e-9:
                cols.append(w / np.linalg.norm(w))
            if len(cols) == size:
                break
        basis = np.stack(cols, axis=1)
        exponents = tuple([-1] + [0] * (size - 1))
        return OneParameterSubgroup(arm=j, level=i + 1, exponents=exponents, basis=basis)
    return None


def one_ps_element(quiver: StarQuiver, ps: OneParameterSubgroup, t: float):
    """Group element of the subgroup at parameter t (identity elsewhere)."""
    blocks = []
    for j in range(quiver.n_arms):
        arm_blocks = []
        for i, dim in enumerate(quiver.arms[j]):
            if j == ps.arm and i + 1 == ps.level:
                d = np.diag([t ** m for m in ps.exponents]).astype(complex)
                b = np.asarray(ps.basis, dtype=complex)
                arm_blocks.append(b @ d @ np.linalg.inv(b))
            else:
                arm_blocks.append(np.eye(dim, dtype=complex))
        blocks.append(arm_blocks)
    return GroupElement(center=np.eye(quiver.rank, dtype=complex), arms=blocks)


def one_ps_replay(rep: StarRep, ps: OneParameterSubgroup, ts=(1e2, 1e4, 1e6)):
    """Max entry magnitude of the acted arm's inward maps at growing t.

    The destabilizer certificate lives in the arm construction (inward
    maps only); a valid certificate keeps these bounded as t grows.
    """
    rep = rep.to_float()
    out = []
    for t in ts:
        h = one_ps_element(rep.quiver, ps, t)
        acted = group_act(rep, h)
        biggest = 0.0
        for gm in acted.g[ps.arm]:
            biggest = max(biggest, float(np.max(np.abs(gm))) if gm.size else 0.0)
        out.append(biggest)
    return out


# ---------------------------------------------------------------------------
# group action and trace invariants


@dataclass
class GroupElement:
    center: object
    arms: list  # arms[j][i]: block at arm j, vertex i+1

    def inverse(self, mode="float"):
        c = _inv(self.center, mode)
        arms = [[_inv(b, mode) for b in arm] for arm in self.arms]
        return GroupElement(center=c, arms=arms)


def random_group_element(quiver: StarQuiver, rng) -> GroupElement:
    def draw(n):
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        return a + 2.0 * n * np.eye(n)  # comfortably invertible

    return GroupElement(
        center=draw(quiver.rank),
        arms=[[draw(d) for d in quiver.arms[j]] for j in range(quiver.n_arms)],
    )


def group_act(rep: StarRep, h: GroupElement) -> StarRep:
    """Base change at every vertex: each map is conjugated by the blocks
    at its head and tail."""
    mode = rep.mode
    f, g = [], []
    for j in range(rep.quiver.n_arms):
        fj, gj = [], []
        blocks = [h.center] + list(h.arms[j])
        inv_blocks = [_inv(b, mode) for b in blocks]
        for i in range(len(rep.f[j])):
            fj.append(_mul(_mul(blocks[i + 1], rep.f[j][i], mode), inv_blocks[i], mode))
            gj.append(_mul(_mul(blocks[i], rep.g[j][i], mode), inv_blocks[i + 1], mode))
        f.append(fj)
        g.append(gj)
    return StarRep(rep.quiver, f, g, mode)


class InvalidCycle(ValueError):
    pass


def trace_along_cycle(rep: StarRep, cycle):
    """Trace of the matrix composition along a closed center-based walk.

    Steps are ("f", arm, level) or ("g", arm, level) with 1-based levels;
    the walk must start and end at the central vertex.  The empty walk
    gives the trace of the identity, i.e. the rank.
    """
    mode = rep.mode
    q = rep.quiver
    at = None  # None = center, else (arm, level)
    acc = _eye(q.rank, mode)
    for step in cycle:
        kind, j, level = step
        if not (0 <= j < q.n_arms) or not (1 <= level <= len(q.arms[j])):
            raise InvalidCycle(f"no vertex at arm {j} level {level}")
        if kind == "f":
            here = None if level == 1 else (j, level - 1)
            if at != here:
                raise InvalidCycle(f"outward step {step} does not start at {at}")
            acc = _mul(rep.f[j][level - 1], acc, mode)
            at = (j, level)
        elif kind == "g":
            if at != (j, level):
                raise InvalidCycle(f"inward step {step} does not start at {at}")
            acc = _mul(rep.g[j][level - 1], acc, mode)
            at = None if level == 1 else (j, level - 1)
        else:
            raise InvalidCycle(f"unknown step kind {kind!r}")
    if at is not None:
        raise InvalidCycle("walk does not return to the central vertex")
    return _trace(acc, mode)


def center_cycles(quiver: StarQuiver, max_len: int):
    """All closed center-based walks of length <= max_len (excluding the
    empty walk)."""
    out = []

    def extend(path, at, remaining):
        if at is None and path:
            out.append(tuple(path))
        if remaining == 0:
            return
        if at is None:
            for j in range(quiver.n_arms):
                if quiver.arms[j]:
                    path.append(("f", j, 1))
                    extend(path, (j, 1), remaining - 1)
                    path.pop()
        else:
            j, level = at
            if level < len(quiver.arms[j]):
                path.append(("f", j, level + 1))
                extend(path, (j, level + 1), remaining - 1)
                path.pop()
            path.append(("g", j, level))
            extend(path, (j, level - 1) if level > 1 else None, remaining - 1)
            path.pop()

    extend([], None, max_len)
    return out
