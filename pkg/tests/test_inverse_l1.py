import numpy as np
import pytest

import invqtp as iq
from invqtp.inverse_l1 import InverseSolveError, perturbation_norms
from invqtp.linprog import enumerate_vertices, solve_lp


def _problem(seed, n, m, diagonal=False):
    prob = iq.generate_instance(seed, n, m, diagonal=diagonal)
    part = iq.support_partition(prob.flow)
    return prob.instance, prob.cost, prob.flow, part


def test_builder_counts_dense_2x2():
    inst, cost, flow, part = _problem(0, 2, 2)
    pots = iq.tree_potentials(inst, cost, flow, part)
    fixed = iq.build_l1_lp(inst, cost, flow, part, pots)
    assert fixed.meta["nominal_variables"] == 48
    assert fixed.meta["raw_variables"] == 45
    free = iq.build_l1_lp(inst, cost, flow, part)
    assert free.meta["nominal_variables"] == 48
    assert free.meta["raw_variables"] == 49


def test_builder_counts_diagonal_2x2():
    inst, cost, flow, part = _problem(1, 2, 2, diagonal=True)
    free = iq.build_l1_lp(inst, cost, flow, part, diagonal=True)
    assert free.meta["nominal_variables"] == 24
    assert free.meta["raw_variables"] == 25


def test_builder_row_structure():
    inst, cost, flow, part = _problem(2, 2, 2)
    lp = iq.build_l1_lp(inst, cost, flow, part)
    cells = inst.cells
    assert lp.n_rows == 2 * cells
    rc_cols = [k for k, name in enumerate(lp.names) if name.startswith("rc(")]
    assert len(rc_cols) == len(part.zero)
    for p in range(cells):
        has_rc = any(lp.A[p, k] != 0 for k in rc_cols)
        assert has_rc == (p in part.zero)


def test_solve_zero_perturbation_on_optimal_flow():
    prob = iq.generate_instance(12, 2, 2)
    inst, cost = prob.instance, prob.cost
    flow = iq.FlowMatrix(iq.frank_wolfe_optimize(inst, cost, tol=1e-9))
    sol = iq.solve_l1(inst, cost, flow)
    assert sol.objective_value <= 1e-6
    assert np.abs(sol.matrix_cost - cost.Q).max() <= 1e-6
    assert np.abs(sol.vector_cost - cost.c).max() <= 1e-6


def test_solve_single_cell_is_free():
    inst = iq.TransportationInstance([4.0], [4.0])
    cost = iq.QuadraticCost([[3.0]], [11.0])
    sol = iq.solve_l1(inst, cost, iq.FlowMatrix([4.0]))
    assert sol.objective_value <= 1e-9


def test_lp_objective_matches_vertex_oracle():
    inst, cost, flow, part = _problem(1002, 2, 2, diagonal=True)
    pots = iq.tree_potentials(inst, cost, flow, part)
    lp = iq.build_l1_lp(inst, cost, flow, part, pots, diagonal=True)
    simplex = solve_lp(lp)
    oracle = enumerate_vertices(lp, max_vars=24)
    assert simplex.status == oracle.status == "optimal"
    assert abs(simplex.objective - oracle.objective) <= 1e-8
    sol = iq.solve_l1(inst, cost, flow, part, pots, diagonal=True)
    assert abs(sol.objective_value - oracle.objective) <= 1e-8


def test_suboptimal_vertex_of_uniform_quadratic():
    """diag(2,..,2) with zero linear cost: any vertex of the unit 2x2 polytope
    loses to the interior point, so the inverse objective is positive and must
    match the enumeration oracle."""
    inst = iq.TransportationInstance([1.0, 1.0], [1.0, 1.0])
    cost = iq.QuadraticCost.from_diagonal(np.full(4, 2.0), np.zeros(4))
    flow = iq.FlowMatrix(np.array([1.0, 0.0, 0.0, 1.0]))
    assert iq.frank_wolfe_gap(inst, cost, flow) > 1e-6
    part = iq.support_partition(flow)
    pots = iq.tree_potentials(inst, cost, flow, part)
    lp = iq.build_l1_lp(inst, cost, flow, part, pots, diagonal=True)
    oracle = enumerate_vertices(lp, max_vars=24)
    sol = iq.solve_l1(inst, cost, flow, part, pots, diagonal=True)
    assert sol.objective_value > 1e-6
    assert abs(sol.objective_value - oracle.objective) <= 1e-8


def test_canonicalize_cancels_overlap():
    mat = np.zeros((4, 4))
    mat[1, 2] = mat[2, 1] = 1.0
    split = iq.SplitVariables(
        mat_pos=mat.copy(),
        mat_neg=mat.copy(),
        vec_pos=np.zeros(4),
        vec_neg=np.zeros(4),
        matrix_bound=2.0,
        potentials=np.zeros(4),
        slacks=np.zeros(4),
    )
    out = iq.canonicalize(split)
    assert np.all(out.mat_pos == 0) and np.all(out.mat_neg == 0)
    assert out.matrix_bound == 0.0


def test_canonicalize_idempotent_on_canonical_input():
    inst, cost, flow, part = _problem(1004, 2, 2, diagonal=True)
    sol = iq.solve_l1(inst, cost, flow, part)
    again = iq.canonicalize(sol.split)
    assert np.array_equal(again.mat_pos, sol.split.mat_pos)
    assert np.array_equal(again.vec_neg, sol.split.vec_neg)
    assert again.matrix_bound == sol.split.matrix_bound


def test_canonicalize_preserves_differences_and_improves():
    """Feasibility survives overlap removal and the objective never grows."""
    rng = np.random.default_rng(7)
    inst, cost, flow, part = _problem(1006, 2, 2, diagonal=True)
    sol = iq.solve_l1(inst, cost, flow, part)
    base = sol.split
    bump_m = np.abs(rng.normal(size=base.mat_pos.shape))
    bump_m = (bump_m + bump_m.T) / 2
    bump_v = np.abs(rng.normal(size=4))
    noisy = iq.SplitVariables(
        mat_pos=base.mat_pos + bump_m,
        mat_neg=base.mat_neg + bump_m,
        vec_pos=base.vec_pos + bump_v,
        vec_neg=base.vec_neg + bump_v,
        matrix_bound=float((base.mat_pos + base.mat_neg + 2 * bump_m).sum(axis=0).max()),
        potentials=base.potentials,
        slacks=base.slacks,
    )
    out = iq.canonicalize(noisy)
    assert np.allclose(out.mat_pos - out.mat_neg, base.mat_pos - base.mat_neg)
    assert np.allclose(out.vec_pos - out.vec_neg, base.vec_pos - base.vec_neg)
    noisy_obj = noisy.matrix_bound + (noisy.vec_pos + noisy.vec_neg).sum()
    out_obj = out.matrix_bound + (out.vec_pos + out.vec_neg).sum()
    assert out_obj <= noisy_obj + 1e-12
    assert np.all((out.mat_pos + out.mat_neg).sum(axis=0) <= out.matrix_bound + 1e-12)


def test_closed_form_zero_reduced_costs():
    prob = iq.generate_instance(13, 2, 2)
    inst, cost = prob.instance, prob.cost
    flow = iq.FlowMatrix(iq.frank_wolfe_optimize(inst, cost, tol=1e-9))
    part = iq.support_partition(flow)
    try:
        pots = iq.tree_potentials(inst, cost, flow, part)
    except iq.CyclicSupportError:
        pytest.skip("optimal support is cyclic for this seed")
    rc = iq.reduced_costs(inst, cost, flow, pots)
    if np.min(rc) < -1e-9:
        pytest.skip("optimal flow has negative off-tree reduced cost at tree potentials")
    sol = iq.closed_form_l1(inst, cost, flow, part, pots)
    assert np.array_equal(sol.matrix_cost, cost.Q)
    assert np.allclose(sol.vector_cost, cost.c)


def test_closed_form_single_cell():
    inst = iq.TransportationInstance([4.0], [4.0])
    cost = iq.QuadraticCost([[3.0]], [11.0])
    sol = iq.closed_form_l1(inst, cost, iq.FlowMatrix([4.0]))
    assert sol.objective_value == 0.0


def test_closed_form_dominates_free_lp(nonoptimal_fleet):
    for _, inst, cost, flow in nonoptimal_fleet[:10]:
        part = iq.support_partition(flow)
        pots = iq.tree_potentials(inst, cost, flow, part)
        closed = iq.closed_form_l1(inst, cost, flow, part, pots)
        lp = iq.solve_l1(inst, cost, flow, part)
        assert closed.objective_value >= lp.objective_value - 1e-8


def test_closed_form_vector_mode_forced_without_support():
    inst = iq.TransportationInstance([0.0, 0.0], [0.0, 0.0])
    cost = iq.QuadraticCost(np.eye(4), np.array([1.0, -2.0, 0.5, 0.0]))
    flow = iq.FlowMatrix(np.zeros(4))
    sol = iq.closed_form_l1(inst, cost, flow)
    assert np.array_equal(sol.matrix_cost, cost.Q)
    # negative reduced cost on a zero-flow cell must be lifted through d
    assert sol.vector_cost[1] == pytest.approx(cost.c[1] + 2.0)
    assert sol.diagnostics["stationarity_max_residual"] <= 1e-9


def test_matrix_cost_symmetry_is_exact(nonoptimal_fleet):
    for _, inst, cost, flow in nonoptimal_fleet[:6]:
        part = iq.support_partition(flow)
        pots = iq.tree_potentials(inst, cost, flow, part)
        for sol in (
            iq.solve_l1(inst, cost, flow, part),
            iq.closed_form_l1(inst, cost, flow, part, pots),
        ):
            assert np.array_equal(sol.matrix_cost, sol.matrix_cost.T)


def test_norm_reconstruction_after_canonicalization(nonoptimal_fleet):
    for _, inst, cost, flow in nonoptimal_fleet[:8]:
        sol = iq.solve_l1(inst, cost, flow)
        mat, vec = perturbation_norms(cost, sol.matrix_cost, sol.vector_cost, "l1")
        assert abs(mat + vec - sol.objective_value) <= 1e-7


def test_certificate_success_implies_zero_objective():
    for seed in range(8):
        prob = iq.generate_instance(seed, 2, 3, diagonal=True)
        inst, cost, flow = prob.instance, prob.cost, prob.flow
        if iq.kkt_check(inst, cost, flow) is not None:
            sol = iq.solve_l1(inst, cost, flow)
            assert sol.objective_value <= 1e-6


def test_stationarity_certification(nonoptimal_fleet):
    for _, inst, cost, flow in nonoptimal_fleet[:8]:
        part = iq.support_partition(flow)
        sol = iq.solve_l1(inst, cost, flow, part)
        cert = sol.certificate
        perturbed = iq.QuadraticCost(sol.matrix_cost, sol.vector_cost)
        r = iq.stationarity_residual(inst, perturbed, flow, cert)
        assert np.max(np.abs(r)) <= 1e-7
        assert cert.slacks.min() >= 0
        assert np.all(cert.slacks[part.positive_sorted()] == 0)
