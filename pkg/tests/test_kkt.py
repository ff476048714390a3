import numpy as np
import pytest

import invqtp as iq
from invqtp.kkt import (
    CyclicSupportError,
    SizeGuardError,
    certificate_report,
    opposite_sign_residual,
)


def _residual_by_loops(inst, cost, flow, cert):
    """Independent elementwise recomputation of the stationarity defect."""
    n, m = inst.n, inst.m
    out = np.empty(inst.cells)
    for p in range(inst.cells):
        i, j = iq.unflatten(p, m)
        hx = sum(cost.Q[p, q] * flow.x[q] for q in range(inst.cells))
        out[p] = cert.potentials[i - 1] + cert.potentials[n + j - 1] + cert.slacks[p] - hx - cost.c[p]
    return out


def test_residual_single_cell_choice():
    inst = iq.TransportationInstance([2.0], [2.0])
    h, delta = 3.0, 1.5
    cost = iq.QuadraticCost([[h]], [delta])
    flow = iq.FlowMatrix([2.0])
    cert = iq.DualCertificate([h * 2.0 + delta, 0.0], [0.0])
    r = iq.stationarity_residual(inst, cost, flow, cert)
    assert np.max(np.abs(r)) == 0.0


def test_residual_all_zero():
    inst = iq.TransportationInstance([1.0, 1.0], [1.0, 1.0])
    cost = iq.QuadraticCost(np.zeros((4, 4)), np.zeros(4))
    cert = iq.DualCertificate(np.zeros(4), np.zeros(4))
    r = iq.stationarity_residual(inst, cost, flow=iq.FlowMatrix(np.zeros(4)), cert=cert)
    assert np.max(np.abs(r)) == 0.0


def test_residual_matches_independent_arithmetic():
    rng = np.random.default_rng(4)
    prob = iq.generate_instance(4, 2, 3)
    inst, cost, flow = prob.instance, prob.cost, prob.flow
    cert = iq.DualCertificate(rng.normal(size=5), np.abs(rng.normal(size=6)))
    r = iq.stationarity_residual(inst, cost, flow, cert)
    assert np.max(np.abs(r - _residual_by_loops(inst, cost, flow, cert))) <= 1e-12


def test_kkt_check_accepts_forward_optimum():
    for seed in (2, 5, 8):
        prob = iq.generate_instance(seed, 2, 2)
        x0 = iq.frank_wolfe_optimize(prob.instance, prob.cost, tol=1e-9)
        flow = iq.FlowMatrix(x0)
        cert = iq.kkt_check(prob.instance, prob.cost, flow)
        assert cert is not None
        r = iq.stationarity_residual(prob.instance, prob.cost, flow, cert)
        assert np.max(np.abs(r)) <= 1e-7
        assert cert.slacks.min() >= 0
        pos = iq.support_partition(flow).positive_sorted()
        assert np.all(cert.slacks[pos] == 0)


def test_kkt_check_single_cell_always_succeeds():
    inst = iq.TransportationInstance([3.0], [3.0])
    cost = iq.QuadraticCost([[2.0]], [-7.0])
    assert iq.kkt_check(inst, cost, iq.FlowMatrix([3.0])) is not None


def test_kkt_check_rejects_suboptimal_vertex():
    inst = iq.TransportationInstance([1.0, 1.0], [1.0, 1.0])
    cost = iq.QuadraticCost(np.eye(4), np.array([0.0, 10.0, 10.0, 0.0]))
    bad = iq.FlowMatrix([0.0, 1.0, 1.0, 0.0])
    assert iq.frank_wolfe_gap(inst, cost, bad) > 1e-6
    assert iq.kkt_check(inst, cost, bad) is None


def test_reduced_costs_without_quadratic_part():
    prob = iq.generate_instance(1, 2, 2, diagonal=True)
    inst = prob.instance
    cost = iq.QuadraticCost(np.zeros((4, 4)), prob.cost.c)
    rc = iq.reduced_costs(inst, cost, prob.flow, np.zeros(4))
    assert np.array_equal(rc, cost.c)


def test_reduced_costs_identity_action():
    prob = iq.generate_instance(1, 2, 2)
    inst, flow = prob.instance, prob.flow
    cost = iq.QuadraticCost(np.eye(4), prob.cost.c)
    rc = iq.reduced_costs(inst, cost, flow, np.zeros(4))
    assert np.allclose(rc, cost.c + flow.x)


def test_reduced_costs_affine_in_potentials():
    prob = iq.generate_instance(2, 2, 3)
    inst, cost, flow = prob.instance, prob.cost, prob.flow
    base = iq.reduced_costs(inst, cost, flow, np.zeros(5))
    t = 0.7
    shifted = np.zeros(5)
    shifted[: inst.n] = t
    rc = iq.reduced_costs(inst, cost, flow, shifted)
    assert np.allclose(rc, base - t)


def test_tree_potentials_single_cell():
    inst = iq.TransportationInstance([1.0], [1.0])
    cost = iq.QuadraticCost([[0.0]], [5.0])
    w = iq.tree_potentials(inst, cost, iq.FlowMatrix([1.0]))
    assert np.array_equal(w, [0.0, 5.0])


def test_tree_potentials_zero_reduced_costs_on_support():
    for seed in range(6):
        prob = iq.generate_instance(seed, 3, 3)
        inst, cost, flow = prob.instance, prob.cost, prob.flow
        part = iq.support_partition(flow)
        w = iq.tree_potentials(inst, cost, flow, part)
        rc = iq.reduced_costs(inst, cost, flow, w)
        pos = part.positive_sorted()
        assert np.max(np.abs(rc[pos])) <= 1e-9


def test_tree_potentials_empty_support():
    inst = iq.TransportationInstance([0.0, 0.0], [0.0, 0.0])
    cost = iq.QuadraticCost(np.eye(4), np.ones(4))
    w = iq.tree_potentials(inst, cost, iq.FlowMatrix(np.zeros(4)))
    assert np.array_equal(w, np.zeros(4))


def test_tree_potentials_rejects_cycle():
    inst = iq.TransportationInstance([1.0, 1.0], [1.0, 1.0])
    cost = iq.QuadraticCost(np.zeros((4, 4)), np.zeros(4))
    cyclic = iq.FlowMatrix([0.5, 0.5, 0.5, 0.5])
    with pytest.raises(CyclicSupportError):
        iq.tree_potentials(inst, cost, cyclic)


def test_gap_zero_on_single_point():
    inst = iq.TransportationInstance([2.0], [2.0])
    cost = iq.QuadraticCost([[1.0]], [3.0])
    assert iq.frank_wolfe_gap(inst, cost, iq.FlowMatrix([2.0])) == pytest.approx(0.0)


def test_gap_small_after_optimization():
    for seed in (0, 3, 6):
        prob = iq.generate_instance(seed, 3, 2)
        x0 = iq.frank_wolfe_optimize(prob.instance, prob.cost, tol=1e-9)
        assert iq.frank_wolfe_gap(prob.instance, prob.cost, iq.FlowMatrix(x0)) <= 1e-8


def test_gap_nonnegative_on_random_feasible_flows():
    rng = np.random.default_rng(11)
    prob = iq.generate_instance(5, 2, 3)
    inst, cost = prob.instance, prob.cost
    verts = iq.transportation_vertices(inst)
    for _ in range(25):
        weights = rng.dirichlet(np.ones(len(verts)))
        x = np.sum([wv * v for wv, v in zip(weights, verts)], axis=0)
        flow = iq.FlowMatrix(np.maximum(x, 0.0))
        assert iq.frank_wolfe_gap(inst, cost, flow) >= -1e-12


def test_gap_guard():
    prob = iq.generate_instance(0, 4, 4)
    with pytest.raises(SizeGuardError):
        iq.frank_wolfe_gap(prob.instance, prob.cost, prob.flow)


def test_gap_and_certificate_agree_for_psd():
    """First-order gap at zero and certificate existence coincide for PSD Q."""
    for seed in range(12):
        prob = iq.generate_instance(seed, 3, 3, diagonal=seed % 2 == 0)
        inst, cost, flow = prob.instance, prob.cost, prob.flow
        has_cert = iq.kkt_check(inst, cost, flow) is not None
        small_gap = iq.frank_wolfe_gap(inst, cost, flow) <= 1e-7
        assert has_cert == small_gap, seed


def test_certificate_report_flags_sign_convention():
    prob = iq.generate_instance(2, 2, 2)
    inst, cost = prob.instance, prob.cost
    flow = iq.FlowMatrix(iq.frank_wolfe_optimize(inst, cost, tol=1e-9))
    cert = iq.kkt_check(inst, cost, flow)
    report = certificate_report(inst, cost, flow, cert)
    assert report["stationarity_max_residual"] <= 1e-7
    if cert.slacks.max() > 1e-6:
        alt = opposite_sign_residual(inst, cost, flow, cert)
        assert report["opposite_sign_max_residual"] == pytest.approx(np.max(np.abs(alt)))
        assert "sign_note" in report
