"""类时极点证书、割函数与单射性探测测试"""
import math

import numpy as np
import pytest

from torus2poles.dynamics import PhaseState, jacobi_zeros
from torus2poles.poles import (
    CERTIFIED,
    REFUTED,
    certify_pole,
    cut_value,
    distance_defects,
    exp_injectivity_probe,
)


def test_flat_point_is_pole(flat, fast):
    cert = certify_pole(flat, (0.0, 0.0), horizon=10.0, n_angles=8, settings=fast)
    assert cert.status == CERTIFIED
    assert cert.jacobi_zero_count == 0
    assert cert.max_defect <= 1e-6


def test_plateau_point_is_pole(plateau, fast):
    cert = certify_pole(plateau, (0.0, 0.5), horizon=20.0, n_angles=8, settings=fast)
    assert cert.certified
    assert cert.oracle_agreement
    assert cert.max_defect <= 1e-6
    wide = [e for e in cert.evidence if abs(e.psi0) > 0.5]
    assert wide
    assert all(e.max_defect <= 1e-6 for e in wide)
    assert cert.to_dict()["status"] == CERTIFIED


def test_certificate_stable_under_grid_doubling(plateau, fast):
    coarse = certify_pole(plateau, (0.3, 0.4), horizon=10.0, n_angles=8, settings=fast)
    fine = certify_pole(plateau, (0.3, 0.4), horizon=10.0, n_angles=16, settings=fast)
    assert coarse.status == fine.status == CERTIFIED


def test_focusing_point_is_refuted(cosine, fast):
    cert = certify_pole(cosine, (0.0, 0.5), horizon=5.0, n_angles=8, settings=fast)
    assert cert.status == REFUTED
    assert cert.refutation.reason == "jacobi"
    assert cert.oracle_agreement
    zeros = jacobi_zeros(cosine, PhaseState(0.0, 0.5, cert.refutation.psi0), 5.0, fast)
    assert cert.refutation.tau == pytest.approx(zeros[0])
    assert "refutation" in cert.to_dict()


def test_certify_rejects_bad_arguments(flat):
    with pytest.raises(ValueError):
        certify_pole(flat, (0, 0), horizon=0.0)
    with pytest.raises(ValueError):
        certify_pole(flat, (0, 0), n_angles=4)


def test_distance_defects_at_pole(plateau, fast):
    defects = distance_defects(plateau, (0.0, 0.5), 0.2, [1.0, 4.0, 8.0], fast)
    assert np.all(defects <= 1e-6)


def test_cut_value_infinite_at_pole(flat, plateau, fast):
    assert cut_value(flat, (0.0, 0.0), 0.3, 10.0, fast, probes=4) == math.inf
    assert cut_value(plateau, (0.0, 0.5), 0.3, 10.0, fast, probes=4) == math.inf


def test_cut_value_finite_at_focusing_point(cosine, fast):
    value = cut_value(cosine, (0.0, 0.5), 0.3, 5.0, fast, probes=10)
    assert math.isfinite(value)
    assert 0.0 < value < 5.0


def test_injectivity_probe(flat, plateau, fast):
    angles = np.linspace(-1.0, 1.0, 9)
    taus = [1.0, 2.0, 4.0]
    flat_report = exp_injectivity_probe(flat, (0.0, 0.0), angles, taus, fast)
    assert flat_report.empty
    assert flat_report.n_cells == 27
    assert exp_injectivity_probe(plateau, (0.0, 0.5), angles, taus, fast).empty


def test_injectivity_probe_rejects_nonpositive_tau(flat):
    with pytest.raises(ValueError):
        exp_injectivity_probe(flat, (0.0, 0.0), [0.0, 0.5], [0.0, 1.0])
