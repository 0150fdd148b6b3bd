"""Special-function kernel against an independent high-precision oracle.

The oracle is a 200-term Maclaurin series for erf summed at 50 decimal
digits with mpmath (and mpmath's own erfc for the Faddeeva identity);
it was used to freeze the literal expected values below before the
kernel was written.
"""

import numpy as np
import pytest
import mpmath as mp

from wpscatter.cerf import (
    CerfDomainError, CerfOverflowError,
    erf_asymptotic, erf_complex, erfc_complex, faddeeva,
)

mp.mp.dps = 50


def erf_oracle(z: complex) -> complex:
    zz = mp.mpc(z.real, z.imag)
    total = mp.mpc(0)
    term = zz
    for n in range(200):
        if n > 0:
            term *= -zz * zz / n
        total += term / (2 * n + 1)
    return complex(2 / mp.sqrt(mp.pi) * total)


def w_oracle(z: complex) -> complex:
    zz = mp.mpc(z.real, z.imag)
    return complex(mp.exp(-zz * zz) * mp.erfc(-1j * zz))


def test_faddeeva_at_zero():
    assert faddeeva(0.0 + 0.0j) == pytest.approx(1.0)


def test_faddeeva_decays_along_positive_imaginary_axis():
    ts = np.linspace(0.5, 25.0, 60)
    vals = [abs(faddeeva(1j * t)) for t in ts]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 0.03


def test_faddeeva_against_oracle_unit_point():
    # frozen from the 50-digit oracle
    expected = 0.3678794411714423 + 0.6071577058413937j
    got = faddeeva(1.0 + 0.0j)
    assert got == pytest.approx(expected, rel=1e-13)
    assert got == pytest.approx(w_oracle(1.0 + 0j), rel=1e-13)


def test_faddeeva_relative_error_over_disk():
    rng = np.random.default_rng(7)
    for _ in range(300):
        r = rng.uniform(0.0, 30.0)
        th = rng.uniform(0.0, 2.0 * np.pi)
        z = complex(r * np.cos(th), r * np.sin(th))
        if (-z * z).real > 700.0:
            continue  # documented overflow region
        ref = w_oracle(z)
        assert abs(faddeeva(z) - ref) <= 1e-12 * abs(ref)


def test_faddeeva_overflow_raises():
    with pytest.raises(CerfOverflowError):
        faddeeva(0.0 - 30.0j)


def test_faddeeva_rejects_non_finite():
    with pytest.raises(CerfDomainError):
        faddeeva(complex(np.nan, 0.0))


def test_faddeeva_reflection_identity_on_strip():
    # w(z) e^{z^2} + w(-z) e^{z^2} = 2 for |Im z| <= 5
    rng = np.random.default_rng(11)
    for _ in range(200):
        z = complex(rng.uniform(-6, 6), rng.uniform(-5, 5))
        e = np.exp(z * z)
        if not np.isfinite(e):
            continue
        lhs = faddeeva(z) * e + faddeeva(-z) * e
        assert lhs == pytest.approx(2.0, abs=5e-12 * max(1.0, abs(e)))


def test_erf_at_zero_and_one():
    assert erf_complex(0.0 + 0j) == 0.0
    assert erf_complex(1.0 + 0j) == pytest.approx(0.8427007929497149, abs=1e-14)


def test_erf_matches_oracle_disk():
    rng = np.random.default_rng(3)
    for _ in range(300):
        z = complex(rng.uniform(-8, 8), rng.uniform(-8, 8))
        if abs(z) > 8.0:
            continue
        ref = erf_oracle(z)
        got = erf_complex(z)
        assert abs(got - ref) <= 1e-12 * max(abs(ref), 1.0)


def test_erf_odd_symmetry():
    rng = np.random.default_rng(5)
    for _ in range(100):
        z = complex(rng.uniform(-6, 6), rng.uniform(-6, 6))
        assert erf_complex(-z) == pytest.approx(-erf_complex(z), abs=1e-13)


def test_erf_conjugate_symmetry():
    rng = np.random.default_rng(9)
    for _ in range(100):
        z = complex(rng.uniform(-7, 7), rng.uniform(-7, 7))
        assert erf_complex(np.conj(z)) == pytest.approx(
            np.conj(erf_complex(z)), abs=1e-13 * max(1.0, abs(erf_complex(z))))


def test_erf_branch_seam_consistency():
    # both algorithm branches evaluated at the same seam points
    from wpscatter.cerf import _erf_series, _w_upper
    for th in np.linspace(0, 2 * np.pi, 40, endpoint=False):
        z = 1.5 * np.exp(1j * th)
        series = _erf_series(z)
        zr = z if z.real >= 0 else -z
        rational = 1.0 - np.exp(-zr * zr) * _w_upper(1j * zr)
        if z.real < 0:
            rational = -rational
        assert abs(series - rational) < 1e-12 * max(1.0, abs(series))


def test_erfc_complement():
    rng = np.random.default_rng(13)
    for _ in range(50):
        z = complex(rng.uniform(-4, 4), rng.uniform(-4, 4))
        assert erfc_complex(z) + erf_complex(z) == pytest.approx(1.0, abs=1e-12)


def test_erf_asymptotic_real_point():
    got = erf_asymptotic(5.0 + 0j, n_terms=2)
    assert abs(got - erf_complex(5.0 + 0j)) <= 1e-9


def test_erf_asymptotic_complex_point():
    got = erf_asymptotic(4.0 + 4.0j, n_terms=6)
    assert abs(got - erf_complex(4.0 + 4.0j)) <= 1e-6


def test_erf_asymptotic_saturates_for_large_real():
    assert erf_asymptotic(12.0 + 0j, n_terms=3) == pytest.approx(1.0, abs=1e-15)
    assert erf_asymptotic(-12.0 + 0j, n_terms=3) == pytest.approx(-1.0, abs=1e-15)


def test_erf_asymptotic_domain_error():
    with pytest.raises(CerfDomainError):
        erf_asymptotic(1.0 + 0j)


def test_erf_asymptotic_agrees_on_validation_annulus():
    # divergent series: ~|z|^2 terms is near-optimal truncation, and the
    # sgn(Re z) prescription degrades right on the imaginary axis
    rng = np.random.default_rng(17)
    count = 0
    while count < 60:
        z = complex(rng.uniform(-8, 8), rng.uniform(-8, 8))
        if not 3.0 <= abs(z) <= 8.0 or abs(z.real) < 0.5:
            continue
        count += 1
        ref = erf_complex(z)
        got = erf_asymptotic(z, n_terms=8)
        assert abs(got - ref) <= 1e-3 * max(1.0, abs(ref))
