import math

import numpy as np
import pytest

from wpscatter.packets import (
    OperatorKind, Packet1D, PacketError, PolyOnPacket,
    hermiticity_defect, matrix_element, momentum_amplitude, overlap,
    overlap_general, position_amplitude, resolve_identity,
)
from wpscatter.quadrature import Region, integrate_adaptive

RNG = np.random.default_rng(2024)


def random_packet(sigma=None):
    s = sigma if sigma is not None else RNG.uniform(0.4, 2.5)
    return Packet1D(s, RNG.uniform(-2, 2), RNG.uniform(-3, 3))


def quad_1d(f, lo, hi, tol=1e-11):
    return integrate_adaptive(lambda pts: f(pts[:, 0]),
                              Region.box((lo, hi)), tol).value


def test_peak_value_is_n1():
    pkt = Packet1D(1.7, 0.9, -0.4)
    assert position_amplitude(pkt, pkt.X0) == pytest.approx(pkt.N1)


def test_position_norm_by_quadrature():
    pkt = Packet1D(0.8, 1.2, 0.3)
    f = lambda x: np.abs(position_amplitude(pkt, x)) ** 2 + 0j
    w = math.sqrt(pkt.sigma)
    norm = quad_1d(f, pkt.X0 - 12 * w, pkt.X0 + 12 * w)
    assert norm.real == pytest.approx(1.0, abs=1e-10)


def test_momentum_amplitude_matches_fourier_transform():
    pkt = Packet1D(1.3, -0.7, 0.9)
    n = 2 ** 14
    L = 80.0
    x = np.linspace(-L / 2, L / 2, n, endpoint=False)
    dx = x[1] - x[0]
    psi = position_amplitude(pkt, x)
    k = np.fft.fftfreq(n, d=dx) * 2 * math.pi
    # <p|pkt> = (1/sqrt(2 pi)) int dx e^{-ipx} psi(x)
    ft = np.fft.fft(psi) * dx * np.exp(1j * k * (L / 2)) / math.sqrt(2 * math.pi)
    sel = np.argsort(k)
    k, ft = k[sel], ft[sel]
    mask = np.abs(k - pkt.P0) < 4.0
    expected = momentum_amplitude(pkt, k[mask])
    assert np.max(np.abs(ft[mask] - expected)) < 1e-8


def test_overlap_self_is_one():
    for _ in range(20):
        pkt = random_packet()
        assert overlap(pkt, pkt) == pytest.approx(1.0, abs=1e-14)


def test_overlap_displaced_magnitude():
    s = 1.9
    a = Packet1D(s, 0.7, 0.0)
    b = Packet1D(s, 0.7, 2.0 * math.sqrt(s))
    assert abs(overlap(a, b)) == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_overlap_bounded_by_one():
    s = RNG.uniform(0.5, 2.0)
    for _ in range(200):
        a, b = random_packet(s), random_packet(s)
        assert abs(overlap(a, b)) <= 1.0 + 1e-14


def test_overlap_against_quadrature():
    s = 1.1
    a, b = random_packet(s), random_packet(s)
    f = lambda x: np.conj(position_amplitude(a, x)) * position_amplitude(b, x)
    lo = min(a.X0, b.X0) - 14 * math.sqrt(s)
    hi = max(a.X0, b.X0) + 14 * math.sqrt(s)
    assert overlap(a, b) == pytest.approx(quad_1d(f, lo, hi), abs=1e-10)


def test_overlap_general_reduces_to_equal_width():
    s = 0.9
    a, b = random_packet(s), random_packet(s)
    assert overlap_general(a, b) == pytest.approx(overlap(a, b), abs=1e-13)


def test_overlap_general_mixed_widths_against_quadrature():
    a = Packet1D(0.6, 1.1, -0.5)
    b = Packet1D(2.2, -0.3, 0.8)
    f = lambda x: np.conj(position_amplitude(a, x)) * position_amplitude(b, x)
    got = overlap_general(a, b)
    assert got == pytest.approx(quad_1d(f, -25, 25), abs=1e-10)


def test_equal_width_required_for_basis_ops():
    with pytest.raises(PacketError):
        overlap(Packet1D(1.0, 0, 0), Packet1D(2.0, 0, 0))


def test_diagonal_momentum_element():
    pkt = random_packet()
    assert matrix_element(OperatorKind.p(), pkt, pkt) == pytest.approx(pkt.P0, abs=1e-13)


def test_diagonal_momentum_against_derivative_quadrature():
    pkt = Packet1D(1.4, 0.8, -1.1)
    h = 1e-5

    def f(x):
        dpsi = (position_amplitude(pkt, x + h) - position_amplitude(pkt, x - h)) / (2 * h)
        return np.conj(position_amplitude(pkt, x)) * (-1j) * dpsi

    got = quad_1d(f, pkt.X0 - 14, pkt.X0 + 14, tol=1e-9)
    assert matrix_element(OperatorKind.p(), pkt, pkt) == pytest.approx(got, abs=1e-7)


def test_diagonal_x2_element():
    pkt = random_packet()
    expected = pkt.sigma / 2 + pkt.X0 ** 2
    assert matrix_element(OperatorKind.x2(), pkt, pkt) == pytest.approx(expected, abs=1e-12)
    f = lambda x: x ** 2 * np.abs(position_amplitude(pkt, x)) ** 2 + 0j
    got = quad_1d(f, pkt.X0 - 16 * math.sqrt(pkt.sigma), pkt.X0 + 16 * math.sqrt(pkt.sigma))
    assert expected == pytest.approx(got.real, abs=1e-9)


def test_diagonal_variance_is_half_sigma():
    for _ in range(10):
        pkt = random_packet()
        var = (matrix_element(OperatorKind.x2(), pkt, pkt)
               - matrix_element(OperatorKind.x(), pkt, pkt) ** 2)
        assert var == pytest.approx(pkt.sigma / 2, abs=1e-12)


def test_delta_element_at_origin():
    s = 1.6
    a = Packet1D(s, 0.9, 0.0)
    b = Packet1D(s, 0.9, 0.0)
    assert matrix_element(OperatorKind.delta_at_0(), a, b) == pytest.approx(
        a.N1 ** 2, abs=1e-14)


def test_delta_element_against_amplitude_product():
    s = 0.8
    a, b = random_packet(s), random_packet(s)
    expected = np.conj(position_amplitude(a, 0.0)) * position_amplitude(b, 0.0)
    assert matrix_element(OperatorKind.delta_at_0(), a, b) == pytest.approx(
        complex(expected), abs=1e-13)


def test_plane_wave_element_against_quadrature():
    s = 1.2
    a, b = random_packet(s), random_packet(s)
    k = 0.9
    f = lambda x: np.conj(position_amplitude(a, x)) * np.exp(1j * k * x) \
        * position_amplitude(b, x)
    got = quad_1d(f, -25, 25)
    assert matrix_element(OperatorKind.plane_wave(k), a, b) == pytest.approx(got, abs=1e-10)


def test_power_ops_match_low_order_forms():
    s = 1.0
    a, b = random_packet(s), random_packet(s)
    assert matrix_element(OperatorKind.pow_x(1), a, b) == pytest.approx(
        matrix_element(OperatorKind.x(), a, b), abs=1e-13)
    assert matrix_element(OperatorKind.pow_x(2), a, b) == pytest.approx(
        matrix_element(OperatorKind.x2(), a, b), abs=1e-13)
    assert matrix_element(OperatorKind.pow_p(1), a, b) == pytest.approx(
        matrix_element(OperatorKind.p(), a, b), abs=1e-13)
    assert matrix_element(OperatorKind.pow_p(2), a, b) == pytest.approx(
        matrix_element(OperatorKind.p2(), a, b), abs=1e-13)
    assert matrix_element(OperatorKind.pow_x(0), a, b) == pytest.approx(
        overlap(a, b), abs=1e-14)


def test_pow_p_matches_momentum_space_quadrature():
    s = 1.1
    a, b = random_packet(s), random_packet(s)
    for n in (1, 2, 3, 4):
        f = lambda p: np.conj(momentum_amplitude(a, p)) * p ** n \
            * momentum_amplitude(b, p)
        got = quad_1d(f, -22, 22, tol=1e-11)
        assert matrix_element(OperatorKind.pow_p(n), a, b) == pytest.approx(
            got, abs=1e-8)


def test_pow_p_matches_packet_chain():
    # <a|p^n|b> rebuilt from displayed p / p^2 elements with one completeness
    # insertion: a 3-packet chain a -- (P,X) -- b.
    s = 1.0
    a = Packet1D(s, 0.6, -0.8)
    b = Packet1D(s, -0.4, 0.7)
    chains = {
        2: (OperatorKind.p(), OperatorKind.p()),
        3: (OperatorKind.p(), OperatorKind.p2()),
        4: (OperatorKind.p2(), OperatorKind.p2()),
    }

    def chain_value(left_op, right_op):
        def integrand(pts):
            out = np.empty(pts.shape[0], dtype=complex)
            for i, (P, X) in enumerate(pts):
                mid = Packet1D(s, P, X)
                out[i] = (matrix_element(left_op, a, mid)
                          * matrix_element(right_op, mid, b))
            return out / (2 * math.pi)
        return integrate_adaptive(integrand, Region.box((-14, 14), (-14, 14)),
                                  1e-9).value

    assert chain_value(OperatorKind.p(), OperatorKind.identity()) == pytest.approx(
        matrix_element(OperatorKind.pow_p(1), a, b), abs=1e-7)
    for n, (lop, rop) in chains.items():
        assert chain_value(lop, rop) == pytest.approx(
            matrix_element(OperatorKind.pow_p(n), a, b), abs=1e-7)


def test_hermiticity_defects():
    s = 1.3
    ops = [OperatorKind.identity(), OperatorKind.x(), OperatorKind.x2(),
           OperatorKind.p(), OperatorKind.p2(), OperatorKind.pow_x(3),
           OperatorKind.pow_p(4), OperatorKind.delta_at_0(),
           OperatorKind.plane_wave(1.7), OperatorKind.one_plus_p()]
    for _ in range(25):
        a, b = random_packet(s), random_packet(s)
        for op in ops:
            assert hermiticity_defect(op, a, b) <= 1e-12


def test_resolve_identity_self():
    pkt = Packet1D(1.0, 0.5, -0.2)
    res = resolve_identity(pkt, pkt, tol=1e-10)
    assert res.value == pytest.approx(1.0, abs=1e-8)
    assert res.converged


def test_resolve_identity_random_pair():
    s = 0.9
    for _ in range(5):
        t, p = random_packet(s), random_packet(s)
        res = resolve_identity(t, p, tol=1e-10)
        assert res.value == pytest.approx(overlap(p, t), abs=1e-8)


def test_resolve_identity_truncated_region_is_flagged():
    s = 1.0
    t = Packet1D(s, 0.0, 0.0)
    p = Packet1D(s, 0.4, 0.5)
    res = resolve_identity(t, p, tol=1e-10, n_sigmas=2.0)
    # quadrature converged on the tight box, but the reconstruction is off
    # and the recorded tail bound announces it
    assert abs(res.value - overlap(p, t)) > 1e-8
    assert res.truncation_bound > 1e-3


def test_completeness_residual_within_quadrature_error():
    s = 1.2
    for _ in range(100):
        t, p = random_packet(s), random_packet(s)
        res = resolve_identity(t, p, tol=1e-9)
        assert abs(res.value - overlap(p, t)) <= \
            10 * max(res.error_estimate, 1e-9)


def test_poly_on_packet_reproduces_p2():
    pkt = random_packet()
    bra = random_packet(pkt.sigma)
    state = PolyOnPacket(pkt).apply_p().apply_p()
    assert state.bracket_with(bra) == pytest.approx(
        matrix_element(OperatorKind.p2(), bra, pkt), abs=1e-12)


def test_poly_on_packet_xp_commutator():
    pkt = random_packet()
    bra = random_packet(pkt.sigma)
    xp = PolyOnPacket(pkt).apply_p().apply_x()
    px = PolyOnPacket(pkt).apply_x().apply_p()
    got = xp.add(px.scale(-1.0)).bracket_with(bra)
    assert got == pytest.approx(1j * overlap(bra, pkt), abs=1e-12)
