import cmath
import math

import numpy as np
import pytest

from buckforge import (
    TransferFunction,
    bode_sweep,
    close_unity_loop,
    evaluate,
    poles,
    series,
    stability_margins,
)
from buckforge.lti import PoleOnAxisError, dc_gain, magnitude_db, phase_deg
from buckforge.pi_design import PIGains, compensated_loop

from oracles import sweep_margins

INTEGRATOR = TransferFunction((1.0,), (1.0, 0.0))


def test_constructor_validation():
    with pytest.raises(ValueError):
        TransferFunction((1.0,), ())
    with pytest.raises(ValueError):
        TransferFunction((1.0,), (0.0, 1.0))
    with pytest.raises(ValueError):
        TransferFunction((math.nan,), (1.0,))
    assert TransferFunction((0.0, 0.0, 2.0), (1.0, 1.0)).num == (2.0,)
    assert TransferFunction((0.0, 0.0), (1.0,)).num == (0.0,)


def test_evaluate_dc_gain(nominal_plant):
    z = evaluate(nominal_plant, 0.0)
    assert abs(z) == pytest.approx(29.4118, rel=1e-4)
    assert phase_deg(z) == 0.0


def test_evaluate_integrator():
    z = evaluate(INTEGRATOR, 1.0)
    assert abs(z) == pytest.approx(1.0, rel=1e-12)
    assert phase_deg(z) == pytest.approx(-90.0, abs=1e-12)


def test_evaluate_resonance_phase(nominal_plant):
    # at omega^2 = det(A) the real part of the denominator vanishes
    omega = math.sqrt(nominal_plant.den[2])
    z = evaluate(nominal_plant, omega)
    assert phase_deg(z) == pytest.approx(-90.0, abs=1e-6)


def test_evaluate_errors():
    with pytest.raises(PoleOnAxisError):
        evaluate(INTEGRATOR, 0.0)
    with pytest.raises(ValueError):
        evaluate(INTEGRATOR, -1.0)


def test_bode_constant_gain():
    one = TransferFunction((1.0,), (1.0,))
    for pt in bode_sweep(one, 0.1, 1000.0, 10):
        assert pt.magnitude_db == 0.0
        assert pt.phase_deg == 0.0


def test_bode_integrator_asymptotes():
    points = bode_sweep(INTEGRATOR, 1.0, 1e4, 100)
    for pt in points:
        assert pt.phase_deg == pytest.approx(-90.0, abs=1e-9)
    # -20 dB per decade: compare points one decade apart
    assert points[100].magnitude_db - points[0].magnitude_db == pytest.approx(
        -20.0, abs=1e-9
    )
    omegas = [pt.omega for pt in points]
    assert omegas == sorted(omegas)


def test_bode_low_frequency_gain(nominal_plant):
    first = bode_sweep(nominal_plant, 1.0, 1e6, 10)[0]
    # frozen: 20*log10 |G(j*1)| for the nominal plant
    assert first.magnitude_db == pytest.approx(29.3704, abs=2e-3)


def test_bode_magnitude_definition(nominal_plant):
    for pt in bode_sweep(nominal_plant, 0.5, 2e4, 31):
        assert pt.magnitude_db == magnitude_db(evaluate(nominal_plant, pt.omega))


def test_bode_range_validation(nominal_plant):
    with pytest.raises(ValueError):
        bode_sweep(nominal_plant, 10.0, 1.0, 10)
    with pytest.raises(ValueError):
        bode_sweep(nominal_plant, 0.0, 1.0, 10)
    with pytest.raises(ValueError):
        bode_sweep(nominal_plant, 1.0, 10.0, 0)


def test_phase_unwrap_continuity(nominal_plant):
    loops = [
        nominal_plant,
        compensated_loop(nominal_plant, PIGains(0.23, 1.0)),
        compensated_loop(nominal_plant, PIGains(10.0, 1.0)),
        close_unity_loop(nominal_plant),
    ]
    for loop in loops:
        points = bode_sweep(loop, 1e-2, 1e7, 100)
        phases = [pt.phase_deg for pt in points]
        deltas = np.abs(np.diff(phases))
        assert deltas.max() < 180.0


def test_margins_integrator():
    report = stability_margins(INTEGRATOR)
    assert report.gain_crossover == pytest.approx(1.0, rel=1e-9)
    assert report.phase_margin_deg == pytest.approx(90.0, abs=1e-9)
    assert report.phase_crossover is None
    assert math.isinf(report.gain_margin_db)
    assert report.stable_loop
    assert report.gain_crossover_count == 1
    assert report.phase_crossover_count == 0


@pytest.fixture
def three_pole_loop():
    # 8e6 / ((s+10)(s+100)(s+1000)): phase heads to -270, so both
    # crossovers exist
    den = np.polymul(np.polymul([1.0, 10.0], [1.0, 100.0]), [1.0, 1000.0])
    return TransferFunction((8e6,), tuple(den))


def test_margins_three_pole_self_consistency(three_pole_loop):
    report = stability_margins(three_pole_loop)
    assert report.gain_crossover is not None
    assert report.phase_crossover is not None
    # |L| = 1 at the gain crossover
    assert abs(abs(evaluate(three_pole_loop, report.gain_crossover)) - 1.0) < 1e-8
    # unwrapped phase = -180 at the phase crossover (principal phase is
    # within a hair of the branch point; compare against both edges)
    ph = phase_deg(evaluate(three_pole_loop, report.phase_crossover))
    assert min(abs(ph - 180.0), abs(ph + 180.0)) < 1e-6
    # gain margin definition
    gm = -magnitude_db(evaluate(three_pole_loop, report.phase_crossover))
    assert report.gain_margin_db == pytest.approx(gm, abs=1e-9)
    # phase margin definition
    pm = 180.0 + phase_deg(evaluate(three_pole_loop, report.gain_crossover))
    assert report.phase_margin_deg == pytest.approx(pm, abs=1e-9)


def test_margins_three_pole_against_oracle(three_pole_loop):
    report = stability_margins(three_pole_loop)
    oracle = sweep_margins(three_pole_loop.num, three_pole_loop.den)
    assert report.phase_margin_deg == pytest.approx(
        oracle["phase_margin_deg"], abs=0.1
    )
    assert report.gain_margin_db == pytest.approx(oracle["gain_margin_db"], abs=0.05)


def test_margins_report_lowest_of_multiple_crossings():
    # magnitude hump: below 0 dB at DC, above in the midband, below again
    num = 500.0 * np.polymul([1.0, 1.0], [1.0, 1.0])
    den = np.polymul([1.0, 0.1], np.polymul([1.0, 100.0], [1.0, 100.0]))
    loop = TransferFunction(tuple(num), tuple(den))
    report = stability_margins(loop)
    mags = np.abs(
        np.polyval(loop.num, 1j * np.logspace(-2, 7, 9001))
        / np.polyval(loop.den, 1j * np.logspace(-2, 7, 9001))
    )
    oracle_count = int(np.count_nonzero(np.diff(np.sign(mags - 1.0))))
    assert oracle_count >= 2
    assert report.gain_crossover_count == oracle_count
    # the reported crossover is the lowest-frequency one
    crossings = np.logspace(-2, 7, 9001)[np.nonzero(np.diff(np.sign(mags - 1.0)))[0]]
    assert report.gain_crossover == pytest.approx(crossings[0], rel=0.01)


def test_bode_anchor_negative_dc_gain():
    inverting = TransferFunction((-1.0,), (1.0, 1.0))
    first = bode_sweep(inverting, 1e-3, 1.0, 10)[0]
    assert first.phase_deg == pytest.approx(-180.0, abs=0.5)


def test_bode_anchor_integrator_loop(nominal_plant):
    loop = compensated_loop(nominal_plant, PIGains(0.23, 1.0))
    first = bode_sweep(loop, 1e-3, 1e3, 50)[0]
    # one origin pole dominates well below the plant dynamics
    assert first.phase_deg == pytest.approx(-90.0, abs=1.0)


def test_margins_unstable_high_gain():
    # raise the gain until |L| > 1 at the phase crossover
    den = np.polymul(np.polymul([1.0, 10.0], [1.0, 100.0]), [1.0, 1000.0])
    loop = TransferFunction((1e9,), tuple(den))
    report = stability_margins(loop)
    assert report.gain_margin_db < 0.0
    assert not report.stable_loop


def test_close_unity_loop(nominal_plant):
    closed = close_unity_loop(nominal_plant)
    assert closed.num == nominal_plant.num
    assert closed.den[0] == 1.0
    assert closed.den[1] == nominal_plant.den[1]
    assert closed.den[2] == nominal_plant.den[2] + nominal_plant.num[0]

    one = TransferFunction((1.0,), (1.0,))
    assert close_unity_loop(one).num == (1.0,)
    assert close_unity_loop(one).den == (2.0,)

    assert close_unity_loop(INTEGRATOR).den == (1.0, 1.0)


def test_close_unity_loop_degenerate():
    minus_one = TransferFunction((-1.0,), (1.0,))
    with pytest.raises(ValueError):
        close_unity_loop(minus_one)


def test_closed_loop_response_oracle():
    # frequency response of G/(1+G) must equal the complex-arithmetic
    # closure of G's response, for random stable G up to degree 3
    rng = np.random.default_rng(42)
    for _ in range(100):
        deg = int(rng.integers(1, 4))
        re = -(10.0 ** rng.uniform(-1, 3, size=deg))
        den = np.poly(re)
        num = rng.uniform(-5, 5, size=int(rng.integers(1, deg + 2)))
        if abs(num[0]) < 1e-3:
            num[0] = 1.0
        g = TransferFunction(tuple(num), tuple(den))
        closed = close_unity_loop(g)
        for omega in 10.0 ** rng.uniform(-2, 4, size=5):
            zg = evaluate(g, float(omega))
            if abs(1.0 + zg) < 1e-9:
                continue
            zm = evaluate(closed, float(omega))
            assert cmath.isclose(zm, zg / (1.0 + zg), rel_tol=1e-10)


def test_series_compensated_coefficients(nominal_plant):
    pi = TransferFunction((0.23, 1.0), (1.0, 0.0))
    loop = series(nominal_plant, pi)
    k = nominal_plant.num[0]
    assert loop.num == (0.23 * k, k)
    assert loop.den == (1.0, nominal_plant.den[1], nominal_plant.den[2], 0.0)


def test_series_identity_and_no_cancellation(nominal_plant):
    one = TransferFunction((1.0,), (1.0,))
    assert series(nominal_plant, one) == nominal_plant
    s_over_one = TransferFunction((1.0, 0.0), (1.0,))
    prod = series(INTEGRATOR, s_over_one)
    assert prod.num == (1.0, 0.0)
    assert prod.den == (1.0, 0.0)


def test_series_improper_product_rejected():
    s_over_one = TransferFunction((1.0, 0.0), (1.0,))
    one = TransferFunction((1.0,), (1.0,))
    with pytest.raises(ValueError):
        series(one, s_over_one)


def test_poles_nominal_plant(nominal_plant):
    got = sorted(poles(nominal_plant), key=lambda z: z.real)
    # quadratic formula on the nominal denominator gives two real poles
    assert got[0].imag == 0.0 and got[1].imag == 0.0
    assert got[0].real == pytest.approx(-560.8398777014106, rel=1e-9)
    assert got[1].real == pytest.approx(-242.49345563192276, rel=1e-9)
    oracle = sorted(np.roots(nominal_plant.den), key=lambda z: z.real)
    for z, w in zip(got, oracle):
        assert z == pytest.approx(w, rel=1e-9)


def test_poles_simple_cases():
    assert sorted(
        z.real for z in poles(TransferFunction((1.0,), (1.0, 0.0, -1.0)))
    ) == pytest.approx([-1.0, 1.0])
    assert poles(TransferFunction((1.0,), (1.0, 0.0, 0.0, 0.0))) == [0j, 0j, 0j]
    with pytest.raises(ValueError):
        poles(TransferFunction((1.0,), (1.0, 0.0, 0.0, 0.0, 1.0)))


def test_poles_residuals_random_cubics():
    rng = np.random.default_rng(3)
    for _ in range(100):
        den = tuple(rng.uniform(-10, 10, size=4))
        if abs(den[0]) < 0.1:
            den = (1.0,) + den[1:]
        tf = TransferFunction((1.0,), den)
        scale = max(abs(c) for c in den)
        for z in poles(tf):
            resid = np.polyval(den, z)
            assert abs(resid) < 1e-6 * scale


def test_poles_complex_pair(nominal_plant):
    closed = close_unity_loop(nominal_plant)
    got = poles(closed)
    assert got[0].imag != 0.0
    assert got[0] == got[1].conjugate()
    oracle = np.roots(closed.den)
    assert sorted(z.imag for z in got) == pytest.approx(
        sorted(z.imag for z in oracle), rel=1e-9
    )


def test_dc_gain_variants(nominal_plant):
    assert dc_gain(nominal_plant) == pytest.approx(29.4118, rel=1e-4)
    assert math.isinf(dc_gain(INTEGRATOR))
    prop_only = TransferFunction((3.0, 0.0), (1.0, 0.0))
    assert math.isnan(dc_gain(prop_only))
