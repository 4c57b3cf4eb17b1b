from fractions import Fraction

import numpy as np
import pytest
import sympy

from conftest import closed_form_flags, closed_form_matrices
from starquiver import linalg_exact as ex
from starquiver.combinat import MarkedLine, NilpotentClass, ParabolicType
from starquiver.dsolve import DSInstance, SolverConfig, flags_from_solution, solve
from starquiver.higgs import HiggsTuple
from starquiver.spectral import (
    ExactnessRequired,
    HitchinPoint,
    SpectralPreconditionError,
    char_poly,
    is_integral,
    pole_cleared_matrix,
    rank_profile,
    sample_hitchin_point,
    spectral_poly,
    vanishing_orders,
)

F = Fraction
LAM, Z = sympy.symbols("lam z")


@pytest.fixture()
def closed_form_tuple(full_flag_type):
    return HiggsTuple(
        sigma=full_flag_type,
        matrices=closed_form_matrices(),
        flags=closed_form_flags(),
        mode="exact",
    )


def _zero_tuple(full_flag_type):
    e1 = [[F(1)], [F(0)]]
    return HiggsTuple(full_flag_type, [ex.mzeros(2, 2)] * 4, [[e1]] * 4, mode="exact")


def test_char_poly_zero_tuple(full_flag_type):
    hp = char_poly(_zero_tuple(full_flag_type))
    assert hp.coeffs == [[], []]


def test_char_poly_against_symbolic_determinant(closed_form_tuple):
    hp = char_poly(closed_form_tuple)
    assert hp.coeffs[0] == []  # traces vanish identically
    # frozen oracle value computed by expanding det(lam - M(z)) symbolically:
    # the level-2 coefficient is -z(z-1)(z-2)(z-3)
    assert hp.coeffs[1] == [F(0), F(6), F(-11), F(6), F(-1)]
    # independent oracle at runtime
    pts = [0, 1, 2, 3]
    m = sympy.zeros(2, 2)
    for i, (a, x) in enumerate(zip(closed_form_tuple.matrices, pts)):
        c = sympy.prod([Z - xx for k, xx in enumerate(pts) if k != i])
        m += sympy.Matrix([[sympy.Rational(str(v)) for v in row] for row in a]) * c
    det = sympy.expand((LAM * sympy.eye(2) - m).det())
    assert sympy.simplify(spectral_poly(hp) - det) == 0


def test_char_poly_conjugation_invariant(closed_form_tuple):
    p = [[F(1), F(2)], [F(1), F(3)]]
    pinv = ex.inv(p)
    mats = [ex.mmul(ex.mmul(p, a), pinv) for a in closed_form_tuple.matrices]
    flags = [[ex.mmul(p, b) for b in fl] for fl in closed_form_tuple.flags]
    conj = HiggsTuple(closed_form_tuple.sigma, mats, flags, mode="exact")
    assert char_poly(conj).coeffs == char_poly(closed_form_tuple).coeffs


def test_char_poly_newton_identities(closed_form_tuple):
    # power sums p_k = Tr(M^k) satisfy p_k + c_1 p_{k-1} + ... + k c_k = 0
    hp = char_poly(closed_form_tuple)
    for z0 in (F(9, 2), F(-3, 7)):
        m = pole_cleared_matrix(closed_form_tuple, z0)
        c = [ex.peval(p, z0) for p in hp.coeffs]
        power = ex.meye(2)
        psums = []
        for _ in range(2):
            power = ex.mmul(power, m)
            psums.append(ex.mtrace(power))
        for k in range(1, 3):
            acc = psums[k - 1] + sum(c[j - 1] * psums[k - j - 1] for j in range(1, k))
            acc += k * c[k - 1]
            assert acc == 0


def test_char_poly_float_mode_close(closed_form_tuple):
    hf = HiggsTuple(
        sigma=closed_form_tuple.sigma,
        matrices=[np.array([[float(x) for x in row] for row in mm]) for mm in closed_form_tuple.matrices],
        flags=[[np.array([[float(x) for x in row] for row in b]) for b in fl] for fl in closed_form_tuple.flags],
        mode="float",
    )
    hp = char_poly(hf)
    exact = char_poly(closed_form_tuple)
    approx = np.array([complex(v) for v in hp.coeffs[1]])
    truth = np.array([float(v) for v in exact.coeffs[1]])
    assert np.linalg.norm(approx - truth) < 1e-8


def test_degree_bound_enforced(full_flag_type):
    # residues that do not sum to zero break the degree bound and are caught
    e11 = [[F(1), F(0)], [F(0), F(0)]]
    h = HiggsTuple(
        full_flag_type,
        [e11, e11, e11, e11],
        closed_form_flags(),
        mode="exact",
        check=False,
    )
    with pytest.raises(ExactnessRequired):
        char_poly(h)


def test_vanishing_orders_zero_point(full_flag_type):
    hp = HitchinPoint(rank=2, points=full_flag_type.line.points, coeffs=[[], []])
    rep = vanishing_orders(hp, full_flag_type)
    assert rep.member is True
    assert all(o is None for row in rep.orders for o in row)
    assert rep.all_exact is False  # the informative level is forced zero


def test_vanishing_orders_closed_form(closed_form_tuple):
    rep = vanishing_orders(char_poly(closed_form_tuple), closed_form_tuple.sigma)
    assert rep.member and rep.all_exact
    assert rep.orders[1] == [1, 1, 1, 1]
    assert rep.required[1] == [1, 1, 1, 1]


def test_vanishing_orders_insufficient(full_flag_type):
    # level-2 polynomial missing the root at the first point
    p2 = ex.poly_from_roots([(F(1), 1), (F(2), 1), (F(3), 1)])
    hp = HitchinPoint(rank=2, points=full_flag_type.line.points, coeffs=[[], p2])
    rep = vanishing_orders(hp, full_flag_type)
    assert rep.member is False
    assert rep.orders[1][0] == 0


def test_rank_profile_basics():
    zero = [ex.mzeros(3, 3)]
    assert rank_profile(zero, "exact") == [()]
    jordan = ex.jordan_nilpotent((4,), 4)
    assert rank_profile([jordan], "exact") == [(3, 2, 1)]
    jf = np.array([[float(x) for x in row] for row in jordan])
    assert rank_profile([jf], "float") == [(3, 2, 1)]


def test_rank_profile_matches_prescribed_classes(rank2_instance):
    out = solve(rank2_instance, SolverConfig(seed=2))
    prof = rank_profile(out.solution.matrices, "float", tol=1e-6)
    assert prof == [(1,), (1,), (1,), (1,)]


def test_spectral_poly_shapes(full_flag_type):
    hp = HitchinPoint(rank=2, points=full_flag_type.line.points, coeffs=[[], []])
    assert spectral_poly(hp) == LAM**2
    hp1 = HitchinPoint(rank=1, points=full_flag_type.line.points, coeffs=[[F(1), F(2)]])
    assert sympy.expand(spectral_poly(hp1) - (LAM + 1 + 2 * Z)) == 0


def test_is_integral_verdicts():
    assert is_integral(LAM**2 - Z)[0] == "integral"
    assert is_integral(LAM**2 - Z**2)[0] == "not_integral"
    assert is_integral((LAM - Z) ** 2)[0] == "not_integral"  # not squarefree
    # squarefree odd-degree radicand stays irreducible
    assert is_integral(LAM**2 - (Z**3 - Z))[0] == "integral"


def test_is_integral_closed_form(closed_form_tuple):
    verdict, _ = is_integral(spectral_poly(char_poly(closed_form_tuple)))
    assert verdict == "integral"


def test_sampler_full_flag(full_flag_type):
    hp, retries = sample_hitchin_point(full_flag_type, seed=5)
    assert retries < 50
    rep = vanishing_orders(hp, full_flag_type)
    assert rep.member and rep.all_exact
    assert is_integral(spectral_poly(hp))[0] == "integral"
    # level 1 has negative degree: forced zero
    assert hp.coeffs[0] == []


def test_sampler_precondition(line4):
    # flagless points make every level degree negative
    t = ParabolicType(line=line4, rank=2, K=4, multiplicities=((2,),) * 4, weights=((0,),) * 4)
    with pytest.raises(SpectralPreconditionError):
        sample_hitchin_point(t, seed=0)


def test_solver_outputs_are_members():
    rng = np.random.default_rng(99)
    from starquiver.dsolve import exact_refine, random_feasible_instance

    for k in range(5):
        inst = random_feasible_instance(rng, max_rank=3, max_points=5)
        out = solve(inst, SolverConfig(seed=300 + k))
        assert out.success
        exact = exact_refine(out.solution, inst)
        sigma = inst.parabolic_type()
        h = flags_from_solution(exact, sigma)
        rep = vanishing_orders(char_poly(h), sigma)
        assert rep.member


def test_exact_orders_iff_rank_profile(line4):
    # degrading one class below its prescribed ranks shifts the orders up
    c = NilpotentClass(rank=2, rank_sequence=(1,))
    inst = DSInstance(rank=2, classes=(c, c, c, c))
    out = solve(inst, SolverConfig(seed=4))
    from starquiver.dsolve import exact_refine

    exact = exact_refine(out.solution, inst)
    sigma = inst.parabolic_type()
    h = flags_from_solution(exact, sigma)
    assert vanishing_orders(char_poly(h), sigma).all_exact
    # merge the last two residues (sum unchanged): the last residue becomes
    # zero, its ranks drop, and the order at its point rises above required
    mats = [m for m in exact.matrices]
    mats[2] = ex.madd(mats[2], mats[3])
    mats[3] = ex.mzeros(2, 2)
    h2 = HiggsTuple(sigma, mats, h.flags, mode="exact", check=False)
    rep2 = vanishing_orders(char_poly(h2), sigma)
    assert rank_profile(mats, "exact")[3] == ()
    assert not rep2.all_exact
