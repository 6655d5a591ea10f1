import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bitbandit.codec import (
    CapacityError,
    NetCodebook,
    ProtocolError,
    QuantSchedule,
    ScalarSchedule,
    build_grid_net,
    build_unit_net,
    capacity_check,
    f_of_T,
    load_codebook,
    nearest_center,
    save_codebook,
    scalar_decode,
    scalar_encode,
    scalar_q_envelope,
    scalar_schedule_step,
    schedule_step,
    vector_decode,
    vector_encode,
)
from conftest import ball_points

# Frozen oracle values (direct evaluation of the defining formulas).
F_OF_T_EXAMPLE = 0.042141288130199774   # L=1, T=1000, d=2, beta from delta=1/T, lam=M=1
BETA_SQRT_1E3 = 6.123350735615706       # sqrt(beta_T) at delta=1/1000
SCALAR_F1 = 4.291932052578694           # B=1, m=1, T=100
SCALAR_P1 = 5.291932052578694
SCALAR_Q1 = 2.645966026289347
SCALAR_P2 = 11.229830131446736


class TestFofT:
    def test_zero_beta(self):
        assert f_of_T(1.0, 1000, 2, 0.0) == 0.0

    def test_worked_example(self):
        bsq = math.sqrt(1.0) * 1.0 + math.sqrt(
            2.0 * math.log(1000.0) + 2.0 * math.log((2.0 + 1000.0) / 2.0)
        )
        assert bsq == pytest.approx(BETA_SQRT_1E3, rel=1e-12)
        assert f_of_T(1.0, 1000, 2, bsq * bsq) == pytest.approx(F_OF_T_EXAMPLE, rel=1e-12)

    def test_inverse_L_scaling(self):
        # The 1/L prefactor halves exactly; the log(dLT) term shifts slightly,
        # so the exact identity is L * f * sqrt(log(dLT)) = const.
        f1 = f_of_T(1.0, 10**6, 3, 25.0)
        f2 = f_of_T(2.0, 10**6, 3, 25.0)
        lhs = 1.0 * f1 * math.sqrt(math.log(3 * 1 * 10**6))
        rhs = 2.0 * f2 * math.sqrt(math.log(3 * 2 * 10**6))
        assert lhs == pytest.approx(rhs, rel=1e-12)
        assert f2 == pytest.approx(f1 / 2.0, rel=3e-2)

    def test_rejects_degenerate_log(self):
        with pytest.raises(ValueError):
            f_of_T(1.0, 1, 1, 1.0)


class TestQuantSchedule:
    def test_halving_with_zero_f(self):
        s = QuantSchedule.start(10.0, 0.0, 0.5)
        s = schedule_step(s)
        assert (s.q, s.p) == (5.0, 5.0)

    def test_direct_substitution(self):
        s = QuantSchedule(q=0.0, p=2.0, f_const=2.0, epsilon=0.5)
        s = schedule_step(s)
        assert (s.q, s.p) == (1.0, 3.0)

    def test_fixed_point_convergence(self):
        f = 0.37
        s = QuantSchedule.start(11.0, f, 0.5)
        for _ in range(200):
            s = schedule_step(s)
        assert s.q == pytest.approx(f, abs=1e-12)
        assert s.p == pytest.approx(2.0 * f, abs=1e-12)

    @given(q0=st.floats(0.0, 100.0), f=st.floats(0.0, 10.0))
    @settings(max_examples=50, deadline=None)
    def test_p_equals_q_plus_f_invariant(self, q0, f):
        s = QuantSchedule.start(q0, f, 0.5)
        for _ in range(5):
            s = schedule_step(s)
            assert s.p == s.q + s.f_const
            assert s.q >= 0.0

    def test_geometric_envelope(self):
        # q_{tau} <= q0 * 2^-tau + 2 f for every tau (geometric series bound)
        M, f = 1.0, 0.0013
        s = QuantSchedule.start(10.0 * M, f, 0.5)
        for tau in range(1, 200):
            s = schedule_step(s)
            assert s.q <= 10.0 * M * 2.0 ** (-tau) + 2.0 * f + 1e-15


class TestBuildUnitNet:
    def test_d1_size_and_separation(self):
        cb = build_unit_net(1, 0.5, seed=0)
        assert cb.size <= 5
        c = np.sort(cb.centers[:, 0])
        assert np.all(np.diff(c) > 0.5)
        assert np.all(np.abs(cb.centers) <= 1.0)

    def test_deterministic(self):
        a = build_unit_net(3, 0.5, seed=42)
        b = build_unit_net(3, 0.5, seed=42)
        assert a.centers.tobytes() == b.centers.tobytes()
        c = build_unit_net(3, 0.5, seed=43)
        assert c.centers.tobytes() != a.centers.tobytes()

    def test_separation_property(self):
        cb = build_unit_net(3, 0.5, seed=1)
        diff = cb.centers[:, None, :] - cb.centers[None, :, :]
        d2 = (diff * diff).sum(-1)
        np.fill_diagonal(d2, np.inf)
        assert d2.min() > 0.25

    def test_fresh_probe_coverage_d3(self):
        cb = build_unit_net(3, 0.5, seed=2)
        pts = ball_points(10_000, 3, np.random.default_rng(99))
        cross = pts @ cb.centers.T
        d2 = (pts * pts).sum(1)[:, None] - 2 * cross + (cb.centers**2).sum(1)[None, :]
        dmin = np.sqrt(np.maximum(d2.min(1), 0.0))
        # residual gaps are counted, never silent; the acceptance budget is 0.1%
        assert (dmin > 0.5).mean() <= 1e-3

    def test_rejects_bad_epsilon(self):
        with pytest.raises(ValueError):
            build_unit_net(2, 1.5, seed=0)


@pytest.fixture(scope="module")
def book():
    return build_unit_net(2, 0.5, seed=0)


class TestVectorCodec:

    def test_exact_center_roundtrip(self, book):
        for j in (0, book.size - 1):
            e = 3.7 * book.centers[j]
            sym = vector_encode(book, 3.7, e)
            assert sym == j
            np.testing.assert_array_equal(vector_decode(book, 3.7, sym), e)

    def test_overflow(self, book):
        e = np.array([1.5, 0.0])
        assert vector_encode(book, 1.0, e) == book.overflow_symbol
        assert vector_decode(book, 1.0, book.overflow_symbol) is None

    def test_roundtrip_error_bound(self, book):
        pts = ball_points(2000, 2, np.random.default_rng(7))
        p = 0.8
        for x in pts:
            e = p * x
            sym = vector_encode(book, p, e)
            assert sym != book.overflow_symbol
            err = np.linalg.norm(vector_decode(book, p, sym) - e)
            _, dist = nearest_center(book, e / p)
            if dist <= book.epsilon:
                assert err <= book.epsilon * p + 1e-12

    def test_decode_scaling_law(self, book):
        out1 = vector_decode(book, 1.0, 3)
        out2 = vector_decode(book, 2.0, 3)
        np.testing.assert_array_equal(out2, 2.0 * out1)

    def test_scale_equivariance_symbol_for_symbol(self, book):
        pts = ball_points(500, 2, np.random.default_rng(8))
        for p in (0.1, 1.0, 37.5):
            for x in pts[:100]:
                e = p * 0.99 * x
                assert vector_encode(book, p, e) == vector_encode(book, 1.0, e / p)

    def test_bad_symbol_rejected(self, book):
        with pytest.raises(ProtocolError):
            vector_decode(book, 1.0, book.size + 1)

    def test_identical_books_from_same_params(self):
        a = build_unit_net(2, 0.5, seed=5)
        b = build_unit_net(2, 0.5, seed=5)
        np.testing.assert_array_equal(a.centers, b.centers)


class TestGridCodec:
    def test_covers_and_same_interface(self):
        grid = build_grid_net(2, 0.5)
        pts = ball_points(2000, 2, np.random.default_rng(3))
        for x in pts[:500]:
            sym = vector_encode(grid, 1.0, x)
            assert sym != grid.overflow_symbol
            err = np.linalg.norm(vector_decode(grid, 1.0, sym) - x)
            assert err <= grid.epsilon + 1e-12

    def test_needs_more_symbols_than_net(self):
        grid = build_grid_net(3, 0.5)
        net = build_unit_net(3, 0.5, seed=0)
        assert grid.size > net.size


class TestCapacityCheck:
    def test_d1_b3_ok(self):
        cb = build_unit_net(1, 0.5, seed=0)
        capacity_check(cb, 3)  # size <= 5, alphabet 8

    def test_exact_power_without_overflow_room_fails(self):
        cb = NetCodebook(centers=np.zeros((4, 1)), epsilon=0.5, seed=0)
        with pytest.raises(CapacityError, match="B >= 3"):
            capacity_check(cb, 2)

    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_six_d_always_enough_at_half(self, d):
        cb = build_unit_net(d, 0.5, seed=0, stop_rejections=500)
        capacity_check(cb, 6 * d)


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        cb = build_unit_net(3, 0.5, seed=11)
        path = tmp_path / "book.bbn"
        save_codebook(cb, path)
        back = load_codebook(path)
        assert back.d == cb.d and back.epsilon == cb.epsilon and back.seed == cb.seed
        assert back.centers.tobytes() == cb.centers.tobytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bbn"
        path.write_bytes(b"not a codebook")
        with pytest.raises(ValueError, match="not a codebook"):
            load_codebook(path)


class TestScalarSchedule:
    def test_worked_example(self):
        s = ScalarSchedule.start(1, 1.0, 100)
        assert s.f == pytest.approx(SCALAR_F1, rel=1e-12)
        assert s.p == pytest.approx(SCALAR_P1, rel=1e-12)
        assert s.q == pytest.approx(SCALAR_Q1, rel=1e-12)
        s2 = scalar_schedule_step(s)
        assert s2.p == pytest.approx(SCALAR_P2, rel=1e-12)
        assert s2.k == 2

    def test_gamma_zero_kills_q(self):
        s = ScalarSchedule.start(None, 1.0, 100)
        for _ in range(100):
            assert s.q == 0.0
            s = scalar_schedule_step(s)

    @pytest.mark.parametrize("B", [1, 2, 4])
    def test_envelope_holds(self, B):
        s = ScalarSchedule.start(B, 1.0, 10_000)
        for _ in range(1000):
            assert s.q <= scalar_q_envelope(s)
            s = scalar_schedule_step(s)

    def test_rejects_zero_bits(self):
        with pytest.raises(ValueError):
            ScalarSchedule.start(0, 1.0, 100)


class TestScalarCodec:
    def test_two_bin_case(self):
        sym = scalar_encode(1.0, 4.0, 1)
        assert sym == 1
        assert scalar_decode(sym, 4.0, 1) == 2.0
        assert abs(2.0 - 1.0) <= 0.5 * 4.0

    def test_overflow_is_silent(self):
        assert scalar_encode(5.0, 4.0, 1) is None
        assert scalar_encode(-4.0001, 4.0, 1) is None

    def test_boundary_assignment(self):
        assert scalar_encode(-4.0, 4.0, 1) == 0
        assert scalar_decode(0, 4.0, 1) == -2.0
        assert scalar_encode(4.0, 4.0, 1) == 1  # last bin closed

    @given(
        e=st.floats(-1.0, 1.0),
        p=st.floats(0.01, 100.0),
        B=st.integers(1, 8),
    )
    @settings(max_examples=200, deadline=None)
    def test_decode_error_bound(self, e, p, B):
        val = e * p
        sym = scalar_encode(val, p, B)
        assert sym is not None
        err = abs(scalar_decode(sym, p, B) - val)
        assert err <= p / 2**B + 1e-12 * p

    def test_bad_symbol(self):
        with pytest.raises(ProtocolError):
            scalar_decode(2, 1.0, 1)
