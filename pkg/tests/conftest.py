import numpy as np
import pytest

from invqtp.linprog import LinearProgram


def make_random_lp(seed: int) -> LinearProgram:
    """Small integer-data LP; seeds cycle through feasible, free-variable,
    and arbitrary-rhs (possibly infeasible or unbounded) styles."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    mrows = int(rng.integers(1, min(n, 5) + 1))
    A = rng.integers(-3, 4, size=(mrows, n)).astype(float)
    style = seed % 4
    if style in (0, 1):
        b = A @ rng.integers(0, 4, size=n).astype(float)
    else:
        b = rng.integers(-6, 7, size=mrows).astype(float)
    c = rng.integers(-5, 6, size=n).astype(float)
    free = np.zeros(n, dtype=bool)
    if style == 1 and n >= 3:
        free[int(rng.integers(0, n))] = True
    if n + int(free.sum()) > 12:
        free[:] = False
    return LinearProgram(c, A, b, free=free)


@pytest.fixture(scope="session")
def optimal_fleet():
    """50 seeded instances with an exactly forward-optimal flow embedded."""
    import invqtp as iq

    shapes = [(n, m) for n in (1, 2, 3) for m in (1, 2, 3)]
    fleet = []
    for seed in range(50):
        n, m = shapes[seed % len(shapes)]
        prob = iq.generate_instance(seed, n, m, diagonal=seed % 2 == 1)
        x0 = iq.frank_wolfe_optimize(prob.instance, prob.cost, tol=1e-9)
        fleet.append((seed, prob.instance, prob.cost, iq.FlowMatrix(x0)))
    return fleet


@pytest.fixture(scope="session")
def nonoptimal_fleet():
    """50 seeded diagonal-Q 2x2/2x3 instances whose embedded flow is not optimal."""
    import invqtp as iq

    fleet = []
    seed = 0
    while len(fleet) < 50:
        n, m = [(2, 2), (2, 3)][len(fleet) % 2]
        prob = iq.generate_instance(1000 + seed, n, m, diagonal=True)
        seed += 1
        if iq.kkt_check(prob.instance, prob.cost, prob.flow) is not None:
            continue
        fleet.append((seed, prob.instance, prob.cost, prob.flow))
    return fleet
