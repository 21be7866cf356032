"""Cell-level model checks against independently computed references.

Reference values in this file were produced with scipy root-finding and
direct evaluation of the closed-form expressions, not by calling the
code under test, and are frozen here as literals.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from gcpim.charge import (
    DEFAULT_TAU_NS,
    CellParams,
    ConfigError,
    ModelConfig,
    NOMINAL_CELL,
    calibrate_tau,
    decay,
    decay_with_scale,
    overdrive,
    residual_after_discharge,
    residual_from_overdrive,
    sense,
)

CFG = ModelConfig()

# independently root-found from vdd*exp(-drt/tau) = v_sa at the defaults
TAU_REF_NS = 21640.42561333445
# stored '1' after the full logic retention window (5 us)
V_AGED_5US = 0.7143304733856898
RESIDUAL_AGED_5US = 0.26548256285449345
MARGIN_AGED_5US = 0.18451743714550656
# stored '1' one nanosecond old (the freshest a logic operand can be)
RESIDUAL_FRESH = 0.04504938559555649


def test_tau_matches_root_find():
    f = lambda tau: 0.9 * math.exp(-15000.0 / tau) - 0.45
    ref = brentq(f, 1e3, 1e6, xtol=1e-9)
    assert calibrate_tau() == pytest.approx(ref, rel=1e-12)
    assert DEFAULT_TAU_NS == pytest.approx(TAU_REF_NS, rel=1e-12)
    assert CFG.tau_ns == DEFAULT_TAU_NS


def test_tau_rederives_for_other_rails():
    cfg = ModelConfig(vdd=1.0, v_sa_read=0.5, drt_read_ns=10000).calibrated()
    assert decay(1.0, 10000, NOMINAL_CELL, cfg) == pytest.approx(0.5, rel=1e-12)


def test_tau_rejects_degenerate_levels():
    with pytest.raises(ConfigError):
        calibrate_tau(vdd=0.9, v_sa_read=0.9)
    with pytest.raises(ConfigError):
        calibrate_tau(drt_read_ns=0)


def test_decay_reference_points():
    assert decay(CFG.vdd, 5000, NOMINAL_CELL, CFG) == pytest.approx(
        V_AGED_5US, rel=1e-12
    )
    # the calibration point: half the rail at the read retention limit
    assert decay(CFG.vdd, 15000, NOMINAL_CELL, CFG) == pytest.approx(
        0.45, rel=1e-12
    )
    assert decay(0.0, 10**6, NOMINAL_CELL, CFG) == 0.0


def test_decay_rejects_negative_dt():
    with pytest.raises(ValueError):
        decay(0.9, -1, NOMINAL_CELL, CFG)


@given(
    v=st.floats(0.0, 0.9),
    a=st.integers(0, 20000),
    b=st.integers(0, 20000),
)
@settings(max_examples=200, deadline=None)
def test_decay_composes(v, a, b):
    # two decays in sequence equal one decay over the summed interval
    once = decay(v, a + b, NOMINAL_CELL, CFG)
    twice = decay(decay(v, a, NOMINAL_CELL, CFG), b, NOMINAL_CELL, CFG)
    assert twice == pytest.approx(once, rel=1e-12, abs=1e-15)


@given(
    v=st.floats(0.0, 0.9),
    dt=st.integers(0, 30000),
    scale=st.floats(0.25, 4.0),
)
@settings(max_examples=200, deadline=None)
def test_decay_scale_equals_time_dilation(v, dt, scale):
    # multiplying tau by s is the same as dividing elapsed time by s
    scaled = decay_with_scale(v, dt, scale, CFG)
    dilated = decay_with_scale(v, dt / scale, 1.0, CFG)
    assert scaled == pytest.approx(dilated, rel=1e-12, abs=1e-15)


def test_sense_tie_reads_high():
    assert sense(0.45, 0.45) == 1
    assert sense(np.nextafter(0.45, 0.0), 0.45) == 0
    got = sense(np.array([0.0, 0.44, 0.45, 0.9]), 0.45)
    assert got.tolist() == [0, 0, 1, 1]
    assert got.dtype == np.uint8


def test_overdrive_clamps_at_zero():
    assert overdrive(0.0, 0.0, CFG) == 0.0
    assert overdrive(0.18, 0.0, CFG) == 0.0
    assert overdrive(0.9, 0.0, CFG) == pytest.approx(0.72, rel=1e-12)
    # a positive offset raises the conduction knee
    assert overdrive(0.2, 0.05, CFG) == 0.0


def test_residual_quiet_inputs_keep_precharge():
    # inputs below the drive threshold leave the output at the rail
    assert residual_after_discharge([0.0], [NOMINAL_CELL], CFG) == CFG.vdd
    assert residual_after_discharge([0.17, 0.0], [NOMINAL_CELL] * 2, CFG) == CFG.vdd


def test_residual_single_full_input_hits_floor():
    got = residual_after_discharge([CFG.vdd], [NOMINAL_CELL], CFG)
    assert got == pytest.approx(CFG.v_residual_floor, rel=1e-12)


def test_residual_reference_points():
    aged = residual_after_discharge([V_AGED_5US], [NOMINAL_CELL], CFG)
    assert aged == pytest.approx(RESIDUAL_AGED_5US, rel=1e-12)
    assert CFG.v_sa_read - aged == pytest.approx(MARGIN_AGED_5US, rel=1e-12)
    fresh_v = decay(CFG.vdd, 1, NOMINAL_CELL, CFG)
    fresh = residual_after_discharge([fresh_v], [NOMINAL_CELL], CFG)
    assert fresh == pytest.approx(RESIDUAL_FRESH, rel=1e-12)


@given(
    v1=st.floats(0.0, 0.9),
    v2=st.floats(0.0, 0.9),
)
@settings(max_examples=200, deadline=None)
def test_residual_monotone_in_input_level(v1, v2):
    lo, hi = sorted((v1, v2))
    r_lo = residual_after_discharge([lo], [NOMINAL_CELL], CFG)
    r_hi = residual_after_discharge([hi], [NOMINAL_CELL], CFG)
    assert r_hi <= r_lo + 1e-15


@given(
    voltages=st.lists(st.floats(0.0, 0.9), min_size=1, max_size=8),
    extra=st.floats(0.0, 0.9),
)
@settings(max_examples=200, deadline=None)
def test_residual_monotone_in_fan_in(voltages, extra):
    # adding one more input can only pull the output lower (wired-NOR)
    params = [NOMINAL_CELL] * len(voltages)
    base = residual_after_discharge(voltages, params, CFG)
    more = residual_after_discharge(voltages + [extra], params + [NOMINAL_CELL], CFG)
    assert more <= base + 1e-15
    assert CFG.v_residual_floor <= more <= CFG.vdd


def test_residual_saturates_not_overshoots():
    # many strong inputs cannot pull below the floor
    got = residual_after_discharge([0.9] * 8, [NOMINAL_CELL] * 8, CFG)
    assert got == pytest.approx(CFG.v_residual_floor, rel=1e-12)


def test_residual_vectorized_matches_scalar():
    d = np.array([0.0, 0.1, 0.72, 5.0])
    got = residual_from_overdrive(d, CFG)
    ref = np.array([residual_from_overdrive(float(x), CFG) for x in d])
    np.testing.assert_allclose(got, ref, rtol=1e-15)


def test_residual_input_validation():
    with pytest.raises(ValueError):
        residual_after_discharge([], [], CFG)
    with pytest.raises(ValueError):
        residual_after_discharge([0.5], [], CFG)
    with pytest.raises(ValueError):
        residual_after_discharge([1.5], [NOMINAL_CELL], CFG)


def test_config_rejects_bad_orderings():
    with pytest.raises(ConfigError):
        ModelConfig(v_sa_read=0.95)  # above the rail
    with pytest.raises(ConfigError):
        ModelConfig(v_t_drive=0.5)  # above the sense threshold
    with pytest.raises(ConfigError):
        ModelConfig(v_residual_floor=0.5)
    with pytest.raises(ConfigError):
        ModelConfig(tau_ns=0.0)
    with pytest.raises(ConfigError):
        ModelConfig(drt_logic_ns=20000)  # longer than the read window


def test_cell_params_reject_nonpositive_tau_scale():
    with pytest.raises(ConfigError):
        CellParams(tau_scale=0.0)
