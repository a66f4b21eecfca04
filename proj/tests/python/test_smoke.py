import math

import numpy as np
import pytest

import nvsim


def test_zero_field_odmr_line():
    lines = nvsim.odmr_lines(nvsim.SpinHamiltonianParams())
    assert len(lines) == 1
    assert lines[0].freq_mhz == pytest.approx(2880.0)


def test_odmr_spectrum_has_two_dips_in_a_weak_field():
    p = nvsim.SpinHamiltonianParams()
    p.b0 = [0.0, 0.0, 1.0]
    s = nvsim.cw_odmr_spectrum(p, nvsim.Sweep(2800.0, 2960.0, 1601), 2.0)
    v = np.asarray(s.values)
    dips = np.flatnonzero((v[1:-1] < v[:-2]) & (v[1:-1] < v[2:]) & (v[1:-1] < 0.99))
    assert len(dips) == 2
    assert s.to_csv().startswith("#")


def test_zeno():
    assert nvsim.zeno_survival(1.0, 4) == pytest.approx(0.5 * (1 + 0.875**4))
    assert nvsim.zeno_survival_continuous(1.0, 4) == pytest.approx(0.5 * (1 + math.exp(-0.5)))


def test_saturated_intensity():
    r = nvsim.PhotophysicsRates()
    r.a_rad = 7.69e7
    r.k_x = r.k_y = r.k_z = 1e6
    r.r_slr = 1.0
    assert nvsim.saturated_intensity(r, 5e7).emitted == pytest.approx(2.31, rel=5e-3)


def test_dsl_round_trip_and_errors():
    seq = nvsim.parse_sequence("pulse mw on=2-3 rabi=140MHz dur=3.571ns\nwait 1.5us\n")
    assert [e.kind for e in seq.events] == [nvsim.EventKind.MwPulse, nvsim.EventKind.Delay]
    again = nvsim.parse_sequence(nvsim.print_sequence(seq))
    assert again.events[1].duration_s == pytest.approx(1.5e-6)
    with pytest.raises(nvsim.ParseError) as err:
        nvsim.parse_sequence("pulse mw f=2880MHz rabi=-1MHz dur=10ns")
    assert err.value.line == 1
    assert "rabi" in str(err.value)


def test_rabi_trace():
    t, p0 = nvsim.rabi_trace(nvsim.SpinHamiltonianParams(), 40.0, 100e-9, 201)
    t = np.asarray(t)
    assert np.max(np.abs(np.asarray(p0) - np.cos(np.pi * 40e6 * t) ** 2)) < 1e-5


def test_bell_tomography():
    rho, fidelity = nvsim.bell_tomography(nvsim.BellState.PsiMinus)
    assert rho.shape == (4, 4)
    assert fidelity > 0.999
    assert rho[1, 2].real == pytest.approx(-0.5, abs=1e-6)


def test_readout_is_reproducible():
    m = nvsim.ReadoutModel()
    m.flip_probability = 0.0938
    a = nvsim.readout_histogram(m, 5000, 3)
    b = nvsim.readout_histogram(m, 5000, 3)
    assert a.frequencies == b.frequencies
    assert a.total() == 5000
    assert nvsim.readout_fidelity(a).fidelity == pytest.approx(0.95, abs=0.02)


def test_g2_antibunching():
    g = nvsim.g2_curve(nvsim.EmitterModel.ne8(), 1e8, nvsim.Sweep(0.0, 2000.0, 401))
    v = np.asarray(g.values)
    assert v[0] == pytest.approx(0.0, abs=1e-12)
    assert v.max() > 1.05


def test_eit_feature_position():
    sys = nvsim.LambdaSystem()
    s = nvsim.eit_probe_spectrum(sys, nvsim.Sweep(2795.0, 2799.0, 401), absorption=True)
    v = np.asarray(s.values)
    inner = np.argmin(np.abs(np.asarray(s.axis) - sys.two_photon_resonance_mhz()))
    assert v[inner] < v[inner - 5] and v[inner] < v[inner + 5]


def test_polariton():
    st = nvsim.polariton(0.0, 1e5, 1e4)
    assert st.spin_fraction() == pytest.approx(1.0)
    stored, back = nvsim.storage_round_trip(10.0, 1e5, 1e4)
    assert stored > 0.999
    assert back == pytest.approx(nvsim.polariton(10.0, 1e5, 1e4).photon_fraction(), abs=1e-3)


def test_invalid_arguments_raise_value_error():
    e = nvsim.EmitterModel.nv()
    e.lifetime_ns = -5.0
    with pytest.raises(ValueError):
        nvsim.g2_curve(e, 1e7, nvsim.Sweep(0.0, 10.0, 11))
