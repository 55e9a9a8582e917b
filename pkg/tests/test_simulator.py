import math

import numpy as np
import pytest
from scipy.linalg import expm
from hypothesis import given
from hypothesis import strategies as st

from support import custom_channel, manipulator

from tipbeam.beam import ChannelTag, ModelError, make_r_channel, make_t_channel
from tipbeam.control import FeedbackMode, Gains, TorqueMap, suggest_gains, torque_from_accel
from tipbeam.fem import Mesh, assemble, frequencies
from tipbeam.lyapunov import build_V
from tipbeam.profiles import Profile
from tipbeam.simulator import (CSV_COLUMNS, build_closed_loop, default_dt, observables, simulate,
                               step_midpoint, write_csv)
from tipbeam.state import DiscreteState


@pytest.fixture(scope="module")
def system():
    ch = make_t_channel(manipulator())
    ops = assemble(Mesh.uniform(6, 1.0), ch)
    g = suggest_gains(ch)
    return build_closed_loop(ops, g), build_V(ops, g)


def _decoupled(alpha=1.0, beta=1.0, k=1.0):
    ch = custom_channel(Profile.zero(1.0))
    ops = assemble(Mesh.uniform(2, 1.0), ch)
    return build_closed_loop(ops, Gains(alpha, beta, k, 10.0))


def test_zero_step(system):
    sys_, _ = system
    assert not np.any(step_midpoint(sys_, np.zeros(sys_.dim), 0.1))


def test_rate_row_of_closed_loop(system):
    sys_, _ = system
    n = sys_.ops.n
    g = sys_.gains
    assert sys_.A_cl[2 * n + 1, 2 * n + 1] == pytest.approx(-g.k / g.beta, rel=1e-15)


def test_damped_double_integrator_block():
    sys_ = _decoupled(alpha=2.0, beta=4.0, k=1.0)
    n = sys_.ops.n
    block = sys_.A_cl[2 * n:, 2 * n:]
    assert np.allclose(block, [[0, 1], [-2.0 / 4.0, -1.0 / 4.0]], atol=1e-15)
    assert not np.any(sys_.A_cl[2 * n:, : 2 * n])


def test_midpoint_map_of_hand_computed_2x2():
    # phi' = w, w' = -(phi + w): (I - dt/2 A)^{-1} (I + dt/2 A) written out
    sys_ = _decoupled()
    n = sys_.ops.n
    dt, phi, w = 0.3, 0.4, -1.1
    h = dt / 2
    det = 1 + h + h * h
    lhs_inv = np.array([[1 + h, h], [-h, 1]]) / det
    rhs = np.array([[1, h], [-h, 1 - h]])
    expected = lhs_inv @ rhs @ np.array([phi, w])
    x = np.zeros(sys_.dim)
    x[2 * n:] = (phi, w)
    out = step_midpoint(sys_, x, dt)
    assert np.allclose(out[2 * n:], expected, rtol=1e-14, atol=1e-15)


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1.0))
def test_step_is_linear(seed, dt):
    ch = make_r_channel(manipulator(phiR0=0.4))
    ops = assemble(Mesh.uniform(4, 1.0), ch)
    sys_ = build_closed_loop(ops, suggest_gains(ch))
    rng = np.random.default_rng(seed)
    x1, x2 = rng.standard_normal((2, sys_.dim))
    lhs = step_midpoint(sys_, x1 + x2, dt)
    rhs = step_midpoint(sys_, x1, dt) + step_midpoint(sys_, x2, dt)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(lhs)


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 0.5))
def test_midpoint_is_time_reversible(seed, dt):
    ch = make_r_channel(manipulator(phiR0=0.4))
    ops = assemble(Mesh.uniform(4, 1.0), ch)
    sys_ = build_closed_loop(ops, suggest_gains(ch))
    x = np.random.default_rng(seed).standard_normal(sys_.dim)
    back = step_midpoint(sys_, step_midpoint(sys_, x, -dt), dt)
    assert np.linalg.norm(back - x) <= 1e-10 * np.linalg.norm(x)


def test_batched_steps_match_single(system):
    sys_, _ = system
    X = np.random.default_rng(0).standard_normal((sys_.dim, 3))
    out = step_midpoint(sys_, X, 0.02)
    for j in range(3):
        single = step_midpoint(sys_, X[:, j], 0.02)
        assert np.abs(out[:, j] - single).max() <= 1e-13 * np.abs(single).max()


def test_invalid_step(system):
    sys_, _ = system
    with pytest.raises(ModelError):
        step_midpoint(sys_, np.zeros(sys_.dim), 0.0)
    with pytest.raises(ModelError):
        simulate(sys_, np.zeros(sys_.dim), 1.0, 0.5)


def test_factorization_cached_per_step_size(system):
    sys_, _ = system
    assert sys_.factorization(0.125) is sys_.factorization(0.125)
    assert sys_.factorization(0.125) is not sys_.factorization(0.25)


def test_zero_trajectory(system):
    sys_, form = system
    traj = simulate(sys_, DiscreteState.zeros(sys_.ops.n), 0.1, 1.0)
    assert len(traj) == 11
    table = observables(traj, form, sys_.ops.G)
    assert all(not np.any(v) for k, v in table.items() if k != "t")


def test_step_count_and_grid(system):
    sys_, _ = system
    traj = simulate(sys_, np.ones(sys_.dim), 0.3, 1.0)
    assert len(traj) == 5  # ceil(1 / 0.3) = 4 steps
    assert np.allclose(np.diff(traj.times), 0.3)


def test_energy_column_matches_form(system):
    sys_, form = system
    traj = simulate(sys_, np.random.default_rng(1).standard_normal(sys_.dim), 0.05, 1.0)
    table = observables(traj, form, sys_.ops.G)
    direct = np.array([form.V(x) for x in traj.states])
    assert np.allclose(table["V"], direct, rtol=1e-14, atol=0)


def test_raising_torque_column_matches_scalar_map():
    p = manipulator(phiR0=0.5)
    ch = make_r_channel(p)
    ops = assemble(Mesh.uniform(4, 1.0), ch)
    g = Gains(1.0, 1.0, 2.0, 1.0)
    sys_ = build_closed_loop(ops, g)
    x0 = np.zeros(sys_.dim)
    x0[-1] = 0.5  # rest shape, spinning hub: u = -k w / beta at t = 0
    traj = simulate(sys_, x0, 0.01, 0.01)
    tmap = TorqueMap(p, ops.mesh)
    table = observables(traj, build_V(ops, g), ops.G, tmap, ChannelTag.RAISING)
    u0 = -g.k * 0.5 / g.beta
    zero = DiscreteState.zeros(ops.n)
    assert table["u"][0] == pytest.approx(u0, rel=1e-15)
    assert table["torque"][0] == pytest.approx(torque_from_accel(0.0, u0, zero, x0, tmap)[1], rel=1e-14)


def test_applied_and_literal_controls_recorded():
    ch = make_t_channel(manipulator(cz=Profile.polynomial([2.5, -1.0], 1.0),
                                    z0=Profile.polynomial([0, 0, 0, 0.01], 1.0), phiR0=0.5))
    ops = assemble(Mesh.uniform(4, 1.0), ch)
    sys_ = build_closed_loop(ops, suggest_gains(ch), FeedbackMode.DISCRETE)
    traj = simulate(sys_, np.random.default_rng(2).standard_normal(sys_.dim), 0.1, 1.0)
    assert np.allclose(traj.u, traj.states @ sys_.F)
    assert np.allclose(traj.u_literal, traj.states @ sys_.F_literal)
    assert np.abs(traj.u - traj.u_literal).max() > 0


def test_csv_format(system):
    sys_, form = system
    traj = simulate(sys_, np.random.default_rng(3).standard_normal(sys_.dim), 0.1, 0.3)
    text = write_csv(observables(traj, form, sys_.ops.G))
    lines = text.split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert "\r" not in text and text.endswith("\n")
    assert len(lines) == len(traj) + 2
    row = [float(v) for v in lines[1].split(",")]
    assert row[1] == form.V(traj.states[0])  # 17 significant digits round-trip exactly


def test_default_step_is_twentieth_of_shortest_period(system):
    sys_, _ = system
    w = frequencies(sys_.ops.K, sys_.ops.M_aug)
    assert default_dt(sys_.ops) == pytest.approx(2 * math.pi / w[-1] / 20, rel=1e-12)


def test_second_order_in_time():
    ch = make_r_channel(manipulator(phiR0=0.4))
    ops = assemble(Mesh.uniform(4, 1.0), ch)
    sys_ = build_closed_loop(ops, suggest_gains(ch))
    x0 = np.random.default_rng(4).standard_normal(sys_.dim)
    # short horizon so the fastest mode stays in the asymptotic regime
    T = 0.02
    exact = expm(T * sys_.A_cl) @ x0
    errs = [np.linalg.norm(simulate(sys_, x0, T / k, T).states[-1] - exact) for k in (128, 256, 512)]
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(np.abs(orders - 2.0) < 0.1)


def test_closed_loop_spectrum_in_left_half_plane(system):
    sys_, form = system
    assert sys_.eigenvalues(form).real.max() <= 1e-10
    # the energy-coordinate and raw-pencil spectra are the same set
    a, b = sys_.eigenvalues(form), sys_.eigenvalues()
    a = a[np.lexsort((a.real, a.imag))]
    b = b[np.lexsort((b.real, b.imag))]
    assert np.abs(a - b).max() <= 1e-10 * np.abs(a).max()
