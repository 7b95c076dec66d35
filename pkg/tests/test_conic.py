import io

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irsrelay import conic
from irsrelay.conic import (ConicProgram, lift_complex, lift_matrix, lift_vector, parse_dump,
                            real_part_functional, solve, unlift_hermitian, unlift_vector)

seeds = st.integers(0, 2**32 - 1)


def test_scalar_lower_bound():
    p = ConicProgram()
    x = p.free(1)
    p.add_constraint([(x, 1.0)], ">=", 1.0)
    p.minimize([(x, 1.0)])
    sol = solve(p)
    assert sol.optimal
    assert sol.value(x)[0] == pytest.approx(1.0, abs=1e-7)
    assert sol.objective == pytest.approx(1.0, abs=1e-7)


def test_soc_geometry():
    # minimize -t  s.t. ||(x, y)|| <= 1, t <= x
    p = ConicProgram()
    u = p.soc(3)
    t = p.free(1)
    p.fix(u, 0, 1.0)
    p.add_constraint([(t, 1.0), (u, [0.0, -1.0, 0.0])], "<=", 0.0)
    p.minimize([(t, -1.0)])
    sol = solve(p)
    assert sol.optimal
    assert sol.objective == pytest.approx(-1.0, abs=1e-7)
    assert sol.value(u)[1] == pytest.approx(1.0, abs=1e-6)


def test_sdp_trace_with_unit_diagonal():
    p = ConicProgram()
    X = p.psd(3)
    for i in range(3):
        E = np.zeros((3, 3))
        E[i, i] = 1.0
        p.add_constraint([(X, E)], "==", 1.0)
    p.maximize([(X, np.eye(3))])
    sol = solve(p)
    assert sol.optimal
    assert sol.objective == pytest.approx(3.0, abs=1e-7)


def test_infeasible_reported_by_status():
    p = ConicProgram()
    x = p.nonneg(1)
    p.add_constraint([(x, 1.0)], "<=", -1.0)
    p.minimize([(x, 1.0)])
    sol = solve(p)
    assert sol.status == conic.INFEASIBLE and not sol.usable()


def test_unbounded_reported_by_status():
    p = ConicProgram()
    x = p.free(1)
    p.minimize([(x, 1.0)])
    assert solve(p).status in (conic.UNBOUNDED, conic.INFEASIBLE)


def test_iteration_cap_reported():
    p = ConicProgram()
    u = p.soc(3)
    p.fix(u, 0, 1.0)
    p.minimize([(u, [0.0, 1.0, 1.0])])
    assert solve(p, max_iter=1).status in (conic.MAX_ITER, conic.STALLED)


def test_bad_coefficient_shapes_rejected():
    p = ConicProgram()
    X = p.psd(2)
    with pytest.raises(ValueError):
        p.add_constraint([(X, np.ones((3, 3)))], "==", 1.0)
    with pytest.raises(ValueError):
        p.add_constraint([(X, np.array([[0.0, 1.0], [0.0, 0.0]]))], "==", 1.0)
    with pytest.raises(ValueError):
        p.soc(1)
    with pytest.raises(ValueError):
        p.add_constraint([(X, np.eye(2))], "<>", 1.0)


def _random_program(seed):
    """Random feasible and bounded mix of all three cones, plus the same model in cvxpy."""
    rng = np.random.default_rng(seed)
    n = 3
    C = rng.standard_normal((n, n))
    C = C + C.T
    g = rng.standard_normal(2)
    p = ConicProgram()
    X = p.psd(n)
    u = p.soc(3)
    w = p.nonneg(2)
    p.add_constraint([(X, np.eye(n))], "==", 1.0)
    p.fix(u, 0, 1.0)
    p.add_constraint([(w, [1.0, 1.0])], "==", 1.0)
    p.minimize([(X, C), (u, [0.0, g[0], g[1]]), (w, [1.0, 2.0])])

    Xc = cp.Variable((n, n), PSD=True)
    uc = cp.Variable(2)
    wc = cp.Variable(2, nonneg=True)
    obj = cp.trace(C @ Xc) + g @ uc + wc[0] + 2 * wc[1]
    ref = cp.Problem(cp.Minimize(obj), [cp.trace(Xc) == 1, cp.norm(uc) <= 1, cp.sum(wc) == 1])
    return p, ref, (X, C, u, g, w)


@given(seeds)
def test_matches_external_solver(seed):
    p, ref, _ = _random_program(seed)
    sol = solve(p)
    ref.solve(solver=cp.CLARABEL)
    assert sol.optimal
    assert sol.objective == pytest.approx(ref.value, abs=1e-6)


@given(seeds)
def test_objective_matches_reevaluation(seed):
    p, _, (X, C, u, g, w) = _random_program(seed)
    sol = solve(p)
    Xv = sol.value(X)
    again = np.sum(C * Xv) + g @ sol.value(u)[1:] + sol.value(w) @ [1.0, 2.0]
    assert abs(again - sol.objective) <= 10 * conic.DEFAULT_TOL * (1 + abs(sol.objective))


def test_solver_is_deterministic():
    a = solve(_random_program(4)[0])
    b = solve(_random_program(4)[0])
    assert a.objective == b.objective and np.array_equal(a.x, b.x)


def test_dump_round_trip():
    p, _, _ = _random_program(9)
    sf = p.compile()
    buf = io.StringIO()
    sf.dump(buf)
    c, A, b, cones = parse_dump(buf.getvalue().splitlines())
    assert np.array_equal(c, sf.c) and np.array_equal(b, sf.b)
    assert np.array_equal(A, sf.dense_A())
    assert {k for k, _ in cones} <= {"l", "q", "s"}
    assert sum(d * d if k == "s" else d for k, d in cones) == sf.n


def test_dump_solves_identically_in_cvxpy():
    p, _, _ = _random_program(13)
    buf = io.StringIO()
    p.compile().dump(buf)
    c, A, b, cones = parse_dump(buf.getvalue().splitlines())
    x = cp.Variable(c.size)
    cons, off = [A @ x == b], 0
    for kind, d in cones:
        if kind == "l":
            cons.append(x[off:off + d] >= 0)
            off += d
        elif kind == "q":
            cons.append(cp.SOC(x[off], x[off + 1:off + d]))
            off += d
        else:
            M = cp.reshape(x[off:off + d * d], (d, d), order="C")
            cons += [M == M.T, M >> 0]
            off += d * d
    ref = cp.Problem(cp.Minimize(c @ x), cons)
    ref.solve(solver=cp.CLARABEL)
    assert solve(p).objective == pytest.approx(ref.value, abs=1e-6)


def test_lift_real_scalar_unchanged():
    assert np.array_equal(lift_complex(2.5), 2.5 * np.eye(2))
    assert np.array_equal(lift_vector(np.array([1.0, 2.0])), [1, 2, 0, 0])


def test_lift_imaginary_unit_is_rotation():
    assert np.array_equal(lift_complex(1j), [[0, -1], [1, 0]])


@given(seeds)
def test_lifted_quadratic_form(seed):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    Q = Z + Z.conj().T
    v = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    lv = lift_vector(v)
    want = np.vdot(v, Q @ v).real
    assert abs(lv @ lift_matrix(Q) @ lv - want) <= 1e-12 * (1 + abs(want)) * 10
    assert np.allclose(unlift_vector(lv), v)
    assert np.allclose(unlift_hermitian(lift_matrix(Q)), Q)
    f = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    assert real_part_functional(f) @ lv == pytest.approx(np.vdot(f, v).real)


@given(seeds)
def test_unlift_keeps_psd(seed):
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((6, 6))
    X = Y @ Y.T
    assert np.linalg.eigvalsh(unlift_hermitian(X))[0] >= -1e-12
