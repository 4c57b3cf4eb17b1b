"""Canonical bracket on the doubled-quiver phase space and its checks.

Outward entries are positions and inward entries are momenta, paired by
the trace form: the slot ``f[a][b]`` is conjugate to ``g[b][a]``.  For
observables F, G with gradient arrays dF/df, dF/dg the bracket is

    {F, G} = sum over arms and levels of
             Tr(dG/dg . dF/df) - Tr(dF/dg . dG/df),

which makes {f-entry, conjugate g-entry} = +1 and reproduces the entry
bracket of the pole-wise endomorphism valued function

    phi(z) = sum_m (g_1^m f_1^m) / (z - x_m):

    {phi_ij(z), phi_kl(w)} = delta_jk Delta_il(z,w) - delta_li Delta_kj(z,w),

where Delta(z,w) = (phi(z) - phi(w)) / (w - z).  Gradients of trace
observables are closed-form via the cyclic rule; every factory can verify
its oracle against central finite differences at construction.

All derivatives are holomorphic (no conjugation): observables here are
polynomial in the matrix entries, and a real-step central difference of a
holomorphic function estimates exactly the complex derivative.
"""

from dataclasses import dataclass

import numpy as np

from .starrep import StarQuiver, StarRep, moment_map, random_rep


@dataclass
class Gradient:
    """Arrays shaped like the representation's f and g slots."""

    f: list
    g: list

    def to_vector(self):
        parts = []
        for arm in self.f:
            parts.extend(m.reshape(-1) for m in arm)
        for arm in self.g:
            parts.extend(m.reshape(-1) for m in arm)
        return np.concatenate(parts) if parts else np.zeros(0, dtype=complex)


def zero_gradient(quiver: StarQuiver) -> Gradient:
    f, g = [], []
    for j in range(quiver.n_arms):
        dims = quiver.dims(j)
        f.append(
            [np.zeros((dims[i + 1], dims[i]), dtype=complex) for i in range(len(dims) - 1)]
        )
        g.append(
            [np.zeros((dims[i], dims[i + 1]), dtype=complex) for i in range(len(dims) - 1)]
        )
    return Gradient(f=f, g=g)


@dataclass
class Observable:
    quiver: StarQuiver
    value: object  # rep -> complex
    grad: object  # rep -> Gradient
    label: str = ""


class GradientOracleError(RuntimeError):
    pass


def fd_gradient(obs: Observable, rep: StarRep, h=1e-6) -> Gradient:
    """Central finite differences entry by entry (real step; exact for the
    holomorphic polynomials used here, up to truncation error)."""
    out = zero_gradient(rep.quiver)
    for kind in ("f", "g"):
        slots = rep.f if kind == "f" else rep.g
        grads = out.f if kind == "f" else out.g
        for j in range(rep.quiver.n_arms):
            for i in range(len(slots[j])):
                m, n = slots[j][i].shape
                for a in range(m):
                    for b in range(n):
                        plus = rep.copy()
                        minus = rep.copy()
                        (plus.f if kind == "f" else plus.g)[j][i][a, b] += h
                        (minus.f if kind == "f" else minus.g)[j][i][a, b] -= h
                        grads[j][i][a, b] = (obs.value(plus) - obs.value(minus)) / (2 * h)
    return out


def _selfcheck(obs: Observable, seed=911, probes=2, h=1e-6, rtol=1e-6):
    """Directional derivative probes of the closed-form oracle."""
    rng = np.random.default_rng(seed)
    rep = random_rep(obs.quiver, rng, scale=0.7)
    g = obs.grad(rep)
    for _ in range(probes):
        d = random_rep(obs.quiver, rng, scale=1.0)
        plus, minus = rep.copy(), rep.copy()
        for j in range(rep.quiver.n_arms):
            for i in range(len(rep.f[j])):
                plus.f[j][i] += h * d.f[j][i]
                minus.f[j][i] -= h * d.f[j][i]
                plus.g[j][i] += h * d.g[j][i]
                minus.g[j][i] -= h * d.g[j][i]
        fd = (obs.value(plus) - obs.value(minus)) / (2 * h)
        analytic = 0.0 + 0.0j
        for j in range(rep.quiver.n_arms):
            for i in range(len(rep.f[j])):
                analytic += np.sum(g.f[j][i] * d.f[j][i])
                analytic += np.sum(g.g[j][i] * d.g[j][i])
        scale = max(1.0, abs(fd))
        if abs(fd - analytic) > 1e-4 * scale:
            raise GradientOracleError(
                f"{obs.label}: oracle {analytic} vs finite difference {fd}"
            )


def bracket(f_obs: Observable, g_obs: Observable, rep: StarRep) -> complex:
    """Canonical bracket evaluated at the representation."""
    if f_obs.quiver != rep.quiver or g_obs.quiver != rep.quiver:
        raise ValueError("observables and representation live on different quivers")
    gf = f_obs.grad(rep)
    gg = g_obs.grad(rep)
    total = 0.0 + 0.0j
    for j in range(rep.quiver.n_arms):
        for i in range(len(rep.f[j])):
            total += np.trace(gg.g[j][i] @ gf.f[j][i])
            total -= np.trace(gf.g[j][i] @ gg.f[j][i])
    return total


# ---------------------------------------------------------------------------
# the pole-wise endomorphism and its observables


def phi_value(rep: StarRep, points, z) -> np.ndarray:
    out = np.zeros((rep.quiver.rank, rep.quiver.rank), dtype=complex)
    for m in range(rep.quiver.n_arms):
        xm = complex(points[m])
        if z == xm:
            raise ValueError(f"evaluation at the pole {z}")
        out += np.asarray(rep.residue(m)) / (complex(z) - xm)
    return out


def phi_derivative(rep: StarRep, points, z) -> np.ndarray:
    out = np.zeros((rep.quiver.rank, rep.quiver.rank), dtype=complex)
    for m in range(rep.quiver.n_arms):
        xm = complex(points[m])
        out -= np.asarray(rep.residue(m)) / (complex(z) - xm) ** 2
    return out


def delta(rep: StarRep, points, z, w, at_equal=False) -> np.ndarray:
    """(phi(z) - phi(w)) / (w - z); with ``at_equal`` the z -> w limit
    -phi'(w) is returned instead (z is ignored)."""
    if at_equal:
        return -phi_derivative(rep, points, w)
    if z == w:
        raise ValueError("z = w needs the at_equal limit flag")
    return (phi_value(rep, points, z) - phi_value(rep, points, w)) / (complex(w) - complex(z))


def trace_power_observable(
    quiver: StarQuiver, points, t: int, z, selfcheck=True
) -> Observable:
    """Tr(phi(z)^t) with its closed-form gradient.

    Only the first-level slots carry gradient: for arm m the f-gradient is
    t (phi^{t-1} g_1^m)^T / (z - x_m) and the g-gradient is
    t (f_1^m phi^{t-1})^T / (z - x_m), by the cyclic trace rule.
    """
    if t < 1:
        raise ValueError("trace power must be at least 1")
    zc = complex(z)

    def value(rep):
        return complex(np.trace(np.linalg.matrix_power(phi_value(rep, points, zc), t)))

    def grad(rep):
        out = zero_gradient(quiver)
        pw = np.linalg.matrix_power(phi_value(rep, points, zc), t - 1)
        for m in range(quiver.n_arms):
            if not rep.f[m]:
                continue
            c = t / (zc - complex(points[m]))
            out.f[m][0] = c * (pw @ rep.g[m][0]).T
            out.g[m][0] = c * (rep.f[m][0] @ pw).T
        return out

    obs = Observable(quiver=quiver, value=value, grad=grad, label=f"I_{t}({z})")
    if selfcheck:
        _selfcheck(obs)
    return obs


def entry_observable(
    quiver: StarQuiver, points, z, row: int, col: int, selfcheck=True
) -> Observable:
    """The (row, col) entry of phi(z) with closed-form gradient."""
    r = quiver.rank
    if not (0 <= row < r and 0 <= col < r):
        raise IndexError("entry indices out of range")
    zc = complex(z)

    def value(rep):
        return complex(phi_value(rep, points, zc)[row, col])

    def grad(rep):
        out = zero_gradient(quiver)
        for m in range(quiver.n_arms):
            if not rep.f[m]:
                continue
            c = 1.0 / (zc - complex(points[m]))
            out.f[m][0][:, col] = c * rep.g[m][0][row, :]
            out.g[m][0][row, :] = c * rep.f[m][0][:, col]
        return out

    obs = Observable(
        quiver=quiver, value=value, grad=grad, label=f"phi[{row},{col}]({z})"
    )
    if selfcheck:
        _selfcheck(obs)
    return obs


def check_entry_bracket(rep: StarRep, points, z, w, i, j, k, l) -> float:
    """|{phi_ij(z), phi_kl(w)} - (delta_jk Delta_il - delta_li Delta_kj)|."""
    fij = entry_observable(rep.quiver, points, z, i, j, selfcheck=False)
    fkl = entry_observable(rep.quiver, points, w, k, l, selfcheck=False)
    lhs = bracket(fij, fkl, rep)
    dm = delta(rep, points, z, w)
    rhs = (1.0 if j == k else 0.0) * dm[i, l] - (1.0 if l == i else 0.0) * dm[k, j]
    return abs(lhs - rhs)


def check_commutativity(rep: StarRep, points, t, t_prime, z, w) -> float:
    """|{Tr(phi(z)^t), Tr(phi(w)^t')}| at the representation."""
    it = trace_power_observable(rep.quiver, points, t, z, selfcheck=False)
    it2 = trace_power_observable(rep.quiver, points, t_prime, w, selfcheck=False)
    return abs(bracket(it, it2, rep))


# ---------------------------------------------------------------------------
# Hamiltonian vector fields and flows


@dataclass
class VectorField:
    f: list
    g: list


def hamiltonian_vector_field(f_obs: Observable, rep: StarRep) -> VectorField:
    """Components dF/dp on position slots and -dF/dq on momentum slots."""
    gr = f_obs.grad(rep)
    xf, xg = [], []
    for j in range(rep.quiver.n_arms):
        xf.append([gr.g[j][i].T.copy() for i in range(len(rep.f[j]))])
        xg.append([-gr.f[j][i].T.copy() for i in range(len(rep.f[j]))])
    return VectorField(f=xf, g=xg)


def euler_step(rep: StarRep, field: VectorField, h: float) -> StarRep:
    out = rep.copy()
    for j in range(rep.quiver.n_arms):
        for i in range(len(rep.f[j])):
            out.f[j][i] += h * field.f[j][i]
            out.g[j][i] += h * field.g[j][i]
    return out


# ---------------------------------------------------------------------------
# quadratic observables (closed under the bracket; used for Jacobi tests)


def slot_index(quiver: StarQuiver):
    """Flat coordinate order: all f entries arm by arm, then all g."""
    slots = []
    for kind in ("f", "g"):
        for j in range(quiver.n_arms):
            dims = quiver.dims(j)
            for i in range(len(dims) - 1):
                m, n = (dims[i + 1], dims[i]) if kind == "f" else (dims[i], dims[i + 1])
                for a in range(m):
                    for b in range(n):
                        slots.append((kind, j, i, a, b))
    return slots


def poisson_tensor(quiver: StarQuiver) -> np.ndarray:
    """Constant antisymmetric pairing J with {v_a, v_b} = J[a, b]."""
    slots = slot_index(quiver)
    pos = {s: idx for idx, s in enumerate(slots)}
    d = len(slots)
    jmat = np.zeros((d, d))
    for idx, (kind, j, i, a, b) in enumerate(slots):
        if kind != "f":
            continue
        p = pos[("g", j, i, b, a)]
        jmat[idx, p] = 1.0
        jmat[p, idx] = -1.0
    return jmat


def pack_rep(rep: StarRep) -> np.ndarray:
    parts = []
    for arm in rep.f:
        parts.extend(m.reshape(-1) for m in arm)
    for arm in rep.g:
        parts.extend(m.reshape(-1) for m in arm)
    return np.concatenate(parts) if parts else np.zeros(0, dtype=complex)


def gradient_from_vector(quiver: StarQuiver, vec) -> Gradient:
    out = zero_gradient(quiver)
    pos = 0
    for arm in out.f:
        for i, m in enumerate(arm):
            arm[i] = vec[pos : pos + m.size].reshape(m.shape)
            pos += m.size
    for arm in out.g:
        for i, m in enumerate(arm):
            arm[i] = vec[pos : pos + m.size].reshape(m.shape)
            pos += m.size
    return out


class QuadraticObservable:
    """F(v) = v^T S v / 2 + b^T v + c over the packed phase coordinates.

    The bracket of two quadratics is again quadratic, which keeps Jacobi
    checks structurally exact: with J the Poisson tensor and the gradient
    S v + b, {F, G} = (grad F)^T J (grad G) has
    S' = S_F J S_G + (S_F J S_G)^T, b' = S_F J b_G - S_G J b_F and
    c' = b_F^T J b_G.
    """

    def __init__(self, quiver, s, b, c=0.0):
        self.quiver = quiver
        self.s = np.asarray(s)
        self.b = np.asarray(b)
        self.c = c

    @classmethod
    def random(cls, quiver, rng, scale=1.0):
        d = quiver.phase_dim()
        s = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        s = scale * (s + s.T) / 2
        b = scale * (rng.standard_normal(d) + 1j * rng.standard_normal(d))
        return cls(quiver, s, b, complex(rng.standard_normal()))

    def value_at(self, vec):
        return complex(vec @ self.s @ vec / 2 + self.b @ vec + self.c)

    def gradient_at(self, vec):
        return self.s @ vec + self.b

    def to_observable(self) -> Observable:
        def value(rep):
            return self.value_at(pack_rep(rep))

        def grad(rep):
            return gradient_from_vector(self.quiver, self.gradient_at(pack_rep(rep)))

        return Observable(self.quiver, value, grad, label="quadratic")

    def bracket_with(self, other, jmat):
        """The bracket as a new quadratic observable."""
        sjs = self.s @ jmat @ other.s
        s_new = sjs + sjs.T
        b_new = self.s @ jmat @ other.b - other.s @ jmat @ self.b
        c_new = complex(self.b @ jmat @ other.b)
        return QuadraticObservable(self.quiver, s_new, b_new, c_new)


# ---------------------------------------------------------------------------
# moment entries as observables, tangent spaces, Hamiltonian counting


def moment_entry_gradients(rep: StarRep):
    """Gradients of every moment-map entry at the representation, as rows
    of a Jacobian over the packed coordinates."""
    quiver = rep.quiver
    slots = slot_index(quiver)
    pos = {s: idx for idx, s in enumerate(slots)}
    d = len(slots)
    rows = []
    r = quiver.rank
    # central component sum_m g_1^m f_1^m
    for k in range(r):
        for l in range(r):
            row = np.zeros(d, dtype=complex)
            for m in range(quiver.n_arms):
                if not rep.f[m]:
                    continue
                g1, f1 = rep.g[m][0], rep.f[m][0]
                for a in range(f1.shape[0]):
                    row[pos[("f", m, 0, a, l)]] += g1[k, a]
                for b in range(g1.shape[1]):
                    row[pos[("g", m, 0, k, b)]] += f1[b, l]
            rows.append(row)
    # arm components f_i g_i - g_{i+1} f_{i+1} (tip: f_s g_s)
    for m in range(quiver.n_arms):
        s_len = len(rep.f[m])
        for i in range(s_len):
            fi, gi = rep.f[m][i], rep.g[m][i]
            size = fi.shape[0]
            for k in range(size):
                for l in range(size):
                    row = np.zeros(d, dtype=complex)
                    for b in range(fi.shape[1]):
                        row[pos[("f", m, i, k, b)]] += gi[b, l]
                        row[pos[("g", m, i, b, l)]] += fi[k, b]
                    if i + 1 < s_len:
                        fn, gn = rep.f[m][i + 1], rep.g[m][i + 1]
                        for b in range(gn.shape[1]):
                            row[pos[("g", m, i + 1, k, b)]] -= fn[b, l]
                            row[pos[("f", m, i + 1, b, l)]] -= gn[k, b]
                    rows.append(row)
    return np.stack(rows, axis=0) if rows else np.zeros((0, d), dtype=complex)


def moment_zero_tangent(rep: StarRep, rel_tol=1e-8) -> np.ndarray:
    """Orthonormal basis (columns) of the kernel of the moment
    differential at the representation."""
    jac = moment_entry_gradients(rep)
    if jac.shape[0] == 0:
        return np.eye(jac.shape[1], dtype=complex)
    u, s, vh = np.linalg.svd(jac)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(jac.shape[1], dtype=complex)
    rk = int(np.sum(s > rel_tol * s[0]))
    return vh[rk:].conj().T


def independent_hamiltonian_count(
    rep: StarRep, points, ts, zs, rel_tol=1e-6
) -> int:
    """Rank of the sampled trace-power differentials restricted to the
    moment-zero tangent space at the representation."""
    tangent = moment_zero_tangent(rep)
    rows = []
    for t in ts:
        for z in zs:
            obs = trace_power_observable(rep.quiver, points, t, z, selfcheck=False)
            vec = obs.grad(rep).to_vector()
            rows.append(vec @ tangent)  # holomorphic pairing, no conjugation
    stacked = np.stack(rows, axis=0)
    s = np.linalg.svd(stacked, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))
