"""Gaussian wave packets: overlaps, operator matrix elements, completeness.

A packet |P0, X0> has position amplitude
    <x|P0,X0> = N1 exp(i P0 (x - X0) - (x - X0)^2 / (2 sigma)),
with N1^2 = (pi sigma)^(-1/2), so <P0,X0|P0,X0> = 1.  All matrix elements
below are exact closed forms; hbar = m = 1 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import GaussianTrunc, QuadResult, Region, integrate_adaptive

__all__ = [
    "Packet1D", "OperatorKind", "PacketError", "PolyOnPacket",
    "position_amplitude", "momentum_amplitude", "overlap", "overlap_general",
    "matrix_element", "hermiticity_defect", "resolve_identity",
]

_SQRT_PI = math.sqrt(math.pi)


class PacketError(ValueError):
    pass


@dataclass(frozen=True)
class Packet1D:
    """Normalized 1D Gaussian packet of width parameter sigma (a length^2)."""
    sigma: float
    P0: float
    X0: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise PacketError(f"sigma must be positive, got {self.sigma}")

    @property
    def N1(self) -> float:
        return (math.pi * self.sigma) ** -0.25


@dataclass(frozen=True)
class OperatorKind:
    """Tagged operator whose packet matrix element has a closed form.

    Tags: identity, x, x2, pow_x(n), p, p2, pow_p(n), delta_at_0,
    plane_wave(k), one_plus_p.
    """
    tag: str
    n: int = 0
    k: float = 0.0

    _TAGS = ("identity", "x", "x2", "pow_x", "p", "p2", "pow_p",
             "delta_at_0", "plane_wave", "one_plus_p")

    def __post_init__(self):
        if self.tag not in self._TAGS:
            raise PacketError(f"unsupported operator tag {self.tag!r}")
        if self.tag in ("pow_x", "pow_p") and self.n < 0:
            raise PacketError("power tags need n >= 0")
        if self.tag == "plane_wave" and not math.isfinite(self.k):
            raise PacketError("plane_wave needs finite k")

    @property
    def adjoint(self) -> "OperatorKind":
        if self.tag == "plane_wave":
            return OperatorKind("plane_wave", k=-self.k)
        return self

    @classmethod
    def identity(cls): return cls("identity")
    @classmethod
    def x(cls): return cls("x")
    @classmethod
    def x2(cls): return cls("x2")
    @classmethod
    def pow_x(cls, n: int): return cls("pow_x", n=n)
    @classmethod
    def p(cls): return cls("p")
    @classmethod
    def p2(cls): return cls("p2")
    @classmethod
    def pow_p(cls, n: int): return cls("pow_p", n=n)
    @classmethod
    def delta_at_0(cls): return cls("delta_at_0")
    @classmethod
    def plane_wave(cls, k: float): return cls("plane_wave", k=k)
    @classmethod
    def one_plus_p(cls): return cls("one_plus_p")


def position_amplitude(pkt: Packet1D, x):
    """<x|pkt>; vectorized over x."""
    x = np.asarray(x, dtype=float)
    u = x - pkt.X0
    return pkt.N1 * np.exp(1j * pkt.P0 * u - u * u / (2.0 * pkt.sigma))


def momentum_amplitude(pkt: Packet1D, p):
    """<p|pkt> with <x|p> = e^{ipx}/sqrt(2 pi); vectorized over p."""
    p = np.asarray(p, dtype=float)
    return (pkt.N1 * math.sqrt(pkt.sigma)
            * np.exp(-1j * p * pkt.X0 - pkt.sigma * (p - pkt.P0) ** 2 / 2.0))


def _require_equal_sigma(a: Packet1D, b: Packet1D) -> float:
    if abs(a.sigma - b.sigma) > 1e-12 * max(a.sigma, b.sigma):
        raise PacketError("basis operations need equal packet widths; "
                          "use overlap_general for mixed widths")
    return a.sigma


def overlap(a: Packet1D, b: Packet1D) -> complex:
    """<a|b> for equal widths."""
    s = _require_equal_sigma(a, b)
    dx = a.X0 - b.X0
    dp = a.P0 - b.P0
    return complex(np.exp(-dx * dx / (4.0 * s) - s * dp * dp / 4.0
                          + 0.5j * (a.P0 + b.P0) * dx))


def overlap_general(a: Packet1D, b: Packet1D) -> complex:
    """<a|b> for arbitrary widths (plain Gaussian integral)."""
    alpha = 0.5 / a.sigma + 0.5 / b.sigma
    beta = a.X0 / a.sigma + b.X0 / b.sigma + 1j * (b.P0 - a.P0)
    gamma = (-a.X0 ** 2 / (2 * a.sigma) - b.X0 ** 2 / (2 * b.sigma)
             + 1j * (a.P0 * a.X0 - b.P0 * b.X0))
    return complex(a.N1 * b.N1 * math.sqrt(math.pi / alpha)
                   * np.exp(beta * beta / (4 * alpha) + gamma))


def _a12(a: Packet1D, b: Packet1D, s: float) -> complex:
    # center of x in the bra*ket Gaussian product
    return 0.5 * (a.X0 + b.X0 - 1j * s * (a.P0 - b.P0))


def _b12(a: Packet1D, b: Packet1D, s: float) -> complex:
    # center of p in the momentum-space product
    return 0.5 * (a.P0 + b.P0 + 1j * (a.X0 - b.X0) / s)


def _double_factorial(m: int) -> int:
    out = 1
    for v in range(m, 0, -2):
        out *= v
    return out


def _central_moment_sum(n: int, center: complex, variance: float) -> complex:
    # E[(center + xi)^n] with xi a zero-mean Gaussian of the given variance;
    # odd central moments vanish (contour-shift argument for complex center).
    total = 0j
    for q in range(n // 2 + 1):
        total += (math.comb(n, 2 * q) * _double_factorial(2 * q - 1)
                  * variance ** q * center ** (n - 2 * q))
    return total


def matrix_element(op: OperatorKind, a: Packet1D, b: Packet1D) -> complex:
    """<a|op|b> in closed form."""
    s = _require_equal_sigma(a, b)
    ov = overlap(a, b)
    tag = op.tag
    if tag == "identity":
        return ov
    if tag == "x":
        return _a12(a, b, s) * ov
    if tag == "x2":
        return (s / 2.0 + _a12(a, b, s) ** 2) * ov
    if tag == "pow_x":
        return _central_moment_sum(op.n, _a12(a, b, s), s / 2.0) * ov
    if tag == "p":
        return _b12(a, b, s) * ov
    if tag == "p2":
        return (0.5 / s + _b12(a, b, s) ** 2) * ov
    if tag == "pow_p":
        return _central_moment_sum(op.n, _b12(a, b, s), 0.5 / s) * ov
    if tag == "one_plus_p":
        return (1.0 + _b12(a, b, s)) * ov
    if tag == "delta_at_0":
        return complex(a.N1 * b.N1
                       * np.exp(1j * (a.P0 * a.X0 - b.P0 * b.X0)
                                - (a.X0 ** 2 + b.X0 ** 2) / (2.0 * s)))
    if tag == "plane_wave":
        # e^{ikx}|P0,X0> = e^{ikX0} |P0+k, X0>
        shifted = Packet1D(b.sigma, b.P0 + op.k, b.X0)
        return complex(np.exp(1j * op.k * b.X0)) * overlap(a, shifted)
    raise PacketError(f"unsupported operator tag {tag!r}")


def hermiticity_defect(op: OperatorKind, a: Packet1D, b: Packet1D) -> float:
    """|<a|op|b> - conj(<b|op^dagger|a>)|; zero for every supported tag."""
    return abs(matrix_element(op, a, b)
               - np.conj(matrix_element(op.adjoint, b, a)))


def _overlap_arrays(sigma, P1, X1, P2, X2):
    dx = X1 - X2
    dp = P1 - P2
    return np.exp(-dx * dx / (4.0 * sigma) - sigma * dp * dp / 4.0
                  + 0.5j * (P1 + P2) * dx)


def resolve_identity(target: Packet1D, probe: Packet1D,
                     tol: float = 1e-10, n_sigmas: float = 8.0,
                     max_evals: int = 2_000_000) -> QuadResult:
    """Reconstruct <probe|target> through int dP dX/(2pi) <probe|P,X><P,X|target>.

    The (P, X) box covers ``n_sigmas`` packet widths around both packets;
    the Gaussian tail fraction left outside is reported as
    ``truncation_bound`` so deliberately tight boxes are flagged.
    """
    s = _require_equal_sigma(target, probe)
    wx = math.sqrt(2.0 * s)
    wp = math.sqrt(2.0 / s)
    x_lo = min(probe.X0, target.X0) - n_sigmas * wx
    x_hi = max(probe.X0, target.X0) + n_sigmas * wx
    p_lo = min(probe.P0, target.P0) - n_sigmas * wp
    p_hi = max(probe.P0, target.P0) + n_sigmas * wp

    def integrand(pts):
        P = pts[:, 0]
        X = pts[:, 1]
        bra = np.conj(_overlap_arrays(s, P, X, probe.P0, probe.X0))
        ket = _overlap_arrays(s, P, X, target.P0, target.X0)
        return bra * ket / (2.0 * math.pi)

    region = Region((p_lo, x_lo), (p_hi, x_hi))
    res = integrate_adaptive(integrand, region, tol, max_evals=max_evals)
    res.truncation_bound = 2.0 * math.erfc(n_sigmas / math.sqrt(2.0))
    return res


class PolyOnPacket:
    """(polynomial in x) * packet states, closed under x, p, and Gaussians' H.

    Used to evaluate operator products such as <a|A H|b> exactly: apply the
    operators symbolically on the ket, then contract with pow_x matrix
    elements.
    """

    def __init__(self, packet: Packet1D, coeffs=None):
        self.packet = packet
        self.coeffs = np.array([1.0 + 0j] if coeffs is None else coeffs,
                               dtype=complex)

    def _shift(self, k: int) -> np.ndarray:
        out = np.zeros(len(self.coeffs) + k, dtype=complex)
        out[k:] = self.coeffs
        return out

    def apply_x(self) -> "PolyOnPacket":
        return PolyOnPacket(self.packet, self._shift(1))

    def apply_p(self) -> "PolyOnPacket":
        # p (f psi) = (-i f') psi + f (p psi), with
        # p psi = (P0 - i X0/sigma + i x / sigma) psi.
        pkt = self.packet
        c = self.coeffs
        out = np.zeros(len(c) + 1, dtype=complex)
        for m in range(1, len(c)):
            out[m - 1] += -1j * m * c[m]
        out[:len(c)] += (pkt.P0 - 1j * pkt.X0 / pkt.sigma) * c
        out[1:len(c) + 1] += (1j / pkt.sigma) * c
        return PolyOnPacket(pkt, out)

    def add(self, other: "PolyOnPacket") -> "PolyOnPacket":
        if other.packet != self.packet:
            raise PacketError("can only add polynomials over the same packet")
        n = max(len(self.coeffs), len(other.coeffs))
        c = np.zeros(n, dtype=complex)
        c[:len(self.coeffs)] += self.coeffs
        c[:len(other.coeffs)] += other.coeffs
        return PolyOnPacket(self.packet, c)

    def scale(self, z: complex) -> "PolyOnPacket":
        return PolyOnPacket(self.packet, z * self.coeffs)

    def bracket_with(self, bra: Packet1D) -> complex:
        """<bra| (poly * packet) > via pow_x matrix elements."""
        total = 0j
        for m, c in enumerate(self.coeffs):
            if c != 0:
                total += c * matrix_element(OperatorKind.pow_x(m), bra, self.packet)
        return total
