from fractions import Fraction

import numpy as np
import pytest

from conftest import closed_form_matrices
from starquiver import linalg_exact as ex
from starquiver.combinat import NilpotentClass
from starquiver.dsolve import (
    DSInstance,
    DSSolution,
    SolverConfig,
    exact_refine,
    flags_from_solution,
    random_feasible_instance,
    solve,
    verify,
)
from starquiver.higgs import higgs_to_quiver
from starquiver.starrep import moment_residual

F = Fraction


def test_solve_rank2_boundary_instance(rank2_instance):
    out = solve(rank2_instance, SolverConfig(seed=7, restarts=20, tolerance=1e-10))
    assert out.success
    assert out.solution.residual < 1e-10
    assert out.solution.restart_index < 20
    rep = verify(out.solution, rank2_instance)
    assert rep.profile_ok and rep.irreducible
    assert rep.conjugator_error < 1e-6


def test_closed_form_certificate(rank2_instance):
    # the explicit solution certifies feasibility independently of the solver
    mats = [
        np.array([[float(x) for x in row] for row in m]) for m in closed_form_matrices()
    ]
    assert np.linalg.norm(sum(mats)) == 0.0
    sol = DSSolution(
        matrices=mats,
        conjugators=[np.eye(2) for _ in mats],
        residual=0.0,
    )
    rep = verify(sol, rank2_instance)
    assert rep.profile_ok and rep.irreducible


def test_zero_classes_immediate():
    c = NilpotentClass(rank=3, rank_sequence=())
    inst = DSInstance(rank=3, classes=(c, c, c, c))
    out = solve(inst, SolverConfig(seed=0))
    assert out.success
    assert out.solution.iterations == 0
    assert all(np.linalg.norm(m) == 0.0 for m in out.solution.matrices)


def test_infeasible_instance_never_certifies():
    # rank-1 images of four matrices span at most four of five dimensions,
    # so any zero-sum tuple leaves a proper invariant subspace
    c = NilpotentClass.from_partition((2, 1, 1, 1))
    inst = DSInstance(rank=5, classes=(c,) * 4)
    feas = inst.feasibility()
    assert not feas.feasible
    out = solve(inst, SolverConfig(seed=0, restarts=5, max_iters=2000))
    if out.success:
        rep = verify(out.solution, inst)
        assert not rep.irreducible
        assert rep.words is not None


def test_verify_detects_broken_sum(rank2_instance):
    out = solve(rank2_instance, SolverConfig(seed=1))
    sol = out.solution
    bad = DSSolution(
        matrices=[m.copy() for m in sol.matrices],
        conjugators=[p.copy() for p in sol.conjugators],
        residual=sol.residual,
    )
    bad.matrices[3] = bad.matrices[3] + 0.5 * np.eye(2)
    rep = verify(bad, rank2_instance)
    assert rep.residual > 0.1


def test_verify_reducible_family():
    # strictly upper triangular tuple summing to zero: sum and profile pass,
    # irreducibility fails with an invariant-line witness
    e12 = np.array([[0.0, 1.0], [0.0, 0.0]])
    c = NilpotentClass(rank=2, rank_sequence=(1,))
    inst = DSInstance(rank=2, classes=(c, c, c))
    sol = DSSolution(
        matrices=[e12, e12, -2 * e12],
        conjugators=[np.eye(2), np.eye(2), np.diag([2.0, 1.0])],
        residual=0.0,
    )
    rep = verify(sol, inst)
    assert rep.residual == 0.0
    assert rep.profile_ok
    assert not rep.irreducible


def test_flags_from_solution_image_lines(rank2_instance):
    out = solve(rank2_instance, SolverConfig(seed=2))
    sigma = rank2_instance.parabolic_type()
    h = flags_from_solution(out.solution, sigma)
    for a, fl in zip(h.matrices, h.flags):
        basis = fl[0]
        # image line: A maps everything into it, and it dies under A
        img = a @ np.eye(2)
        q, _ = np.linalg.qr(basis)
        assert np.linalg.norm(img - q @ (q.conj().T @ img)) < 1e-6
        assert np.linalg.norm(a @ basis) < 1e-6


def test_flags_from_zero_solution():
    c = NilpotentClass(rank=2, rank_sequence=())
    inst = DSInstance(rank=2, classes=(c,) * 4)
    out = solve(inst, SolverConfig(seed=0))
    h = flags_from_solution(out.solution, inst.parabolic_type())
    assert all(fl == [] for fl in h.flags)


def test_pipeline_rank3_classes():
    c21 = NilpotentClass(rank=3, rank_sequence=(2, 1))
    c1 = NilpotentClass(rank=3, rank_sequence=(1,))
    inst = DSInstance(rank=3, classes=(c21, c1, c1, c21))
    out = solve(inst, SolverConfig(seed=11))
    assert out.success
    h = flags_from_solution(out.solution, inst.parabolic_type())
    rep = higgs_to_quiver(h)
    assert moment_residual(rep) < 1e-8


def test_descent_gradient_matches_finite_differences(rank2_instance):
    rng = np.random.default_rng(0)
    jordans = [
        np.array([[0.0, 1.0], [0.0, 0.0]]) for _ in range(4)
    ]
    worst = 0.0
    for _ in range(100):
        ps = [np.linalg.qr(rng.standard_normal((2, 2)))[0] for _ in range(4)]
        mats = [p @ n @ np.linalg.inv(p) for p, n in zip(ps, jordans)]
        s = sum(mats)
        xs = [rng.standard_normal((2, 2)) for _ in range(4)]
        # analytic: dPhi = 2 <S, [X_i, A_i]>
        analytic = sum(
            2 * np.sum(s * (x @ a - a @ x)) for x, a in zip(xs, mats)
        )
        h = 1e-6
        phi_p, phi_m = 0.0, 0.0

        def phi_of(eps):
            total = sum(
                (np.eye(2) + eps * x) @ a @ np.linalg.inv(np.eye(2) + eps * x)
                for x, a in zip(xs, mats)
            )
            return float(np.sum(total * total))

        fd = (phi_of(h) - phi_of(-h)) / (2 * h)
        scale = max(1.0, abs(fd))
        worst = max(worst, abs(fd - analytic) / scale)
    assert worst < 1e-6


def test_exact_refine_properties(rank2_instance):
    out = solve(rank2_instance, SolverConfig(seed=3))
    exact = exact_refine(out.solution, rank2_instance)
    assert exact.mode == "exact"
    total = exact.matrices[0]
    for m in exact.matrices[1:]:
        total = ex.madd(total, m)
    assert ex.is_zero(total)
    assert exact.profile() == [c.rank_sequence for c in rank2_instance.classes]
    # conjugators reproduce the matrices from the normal forms exactly
    for m, p, c in zip(exact.matrices, exact.conjugators, rank2_instance.classes):
        n = ex.jordan_nilpotent(c.to_partition(), 2)
        assert ex.mmul(ex.mmul(p, n), ex.inv(p)) == m
    # the refinement stays near the floating solution
    for m, a in zip(exact.matrices, out.solution.matrices):
        drift = np.linalg.norm(
            np.array([[float(x) for x in row] for row in m]) - np.asarray(a).real
        )
        assert drift < 1e-2


def test_solver_reports_are_deterministic(rank2_instance):
    from starquiver import jsonio

    def run():
        out = solve(rank2_instance, SolverConfig(seed=5))
        rep = verify(out.solution, rank2_instance)
        return jsonio.dumps(
            {
                "residual": out.solution.residual,
                "restart": out.solution.restart_index,
                "profiles": [list(p) for p in rep.profiles],
                "irreducible": rep.irreducible,
                "best": out.best_residuals,
            }
        )

    assert run() == run()


def test_conjugated_instance_same_report(rank2_instance):
    # classes are basis-free (rank sequences), so a conjugated instance is
    # the same instance and seeded runs agree verbatim
    c = NilpotentClass(rank=2, rank_sequence=(1,))
    inst2 = DSInstance(rank=2, classes=(c, c, c, c))
    out1 = solve(rank2_instance, SolverConfig(seed=9))
    out2 = solve(inst2, SolverConfig(seed=9))
    assert out1.best_residuals == out2.best_residuals
    assert all(
        np.array_equal(a, b)
        for a, b in zip(out1.solution.matrices, out2.solution.matrices)
    )


def test_random_feasible_instances_valid():
    rng = np.random.default_rng(31)
    for _ in range(20):
        inst = random_feasible_instance(rng)
        assert inst.feasibility().feasible
        assert 2 <= inst.rank <= 5
        assert 4 <= inst.n <= 6
        assert all(c.rank_sequence for c in inst.classes)
