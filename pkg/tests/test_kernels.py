import os
import subprocess
import sys

import numpy as np
import pytest

from discwalker import kernels
from discwalker.controller import control
from discwalker.dynamics import RobotParams, accelerations, omega_from_vel, perturb_params
from discwalker.dynamics import State

needs_c = pytest.mark.skipif(kernels._ckernels is None, reason="compiled kernels not built")


def samples(g, rng, n=200):
    for _ in range(n):
        q_N = rng.uniform(g.qN_plus, g.qN_minus)
        q = np.array([rng.uniform(-3, 3), g.href(q_N)[0] + rng.normal(0, 0.2), q_N])
        dq = np.array([rng.normal(0, 3), rng.normal(0, 1), g.V(q_N)[0] + rng.normal(0, 0.3)])
        yield q, dq


def test_python_kernel_matches_api(params, gait, gains, rng):
    k = kernels.make_kernel(params, params, gait, gains, backend="python")
    for q, dq in samples(gait, rng):
        x = np.r_[q, dq]
        u, _ = control(params, gait, gains, State(q, omega_from_vel(params, q, dq)))
        np.testing.assert_allclose(k.aux(x)[:2], u, rtol=1e-9, atol=1e-8)
        np.testing.assert_allclose(k.rhs(0.0, x)[3:], accelerations(params, q, dq, u), rtol=1e-9, atol=1e-8)


@needs_c
def test_backends_agree(params, gait, gains, rng):
    plant = perturb_params(params, {"m_l": 1.1, "J_d": 0.9})
    for actuated in (True, False):
        kp = kernels.make_kernel(plant, params, gait, gains, actuated, backend="python")
        kc = kernels.make_kernel(plant, params, gait, gains, actuated, backend="cython")
        assert (kp.backend, kc.backend) == ("python", "cython")
        for q, dq in samples(gait, rng, 100):
            x = np.r_[q, dq]
            np.testing.assert_allclose(kc.rhs(0.0, x), kp.rhs(0.0, x), rtol=1e-12, atol=1e-10)
            np.testing.assert_allclose(kc.aux(x), kp.aux(x), rtol=1e-12, atol=1e-10)


def test_unactuated_kernel_is_free_dynamics(params, gait, gains, rng):
    k = kernels.make_kernel(params, params, gait, gains, actuated=False)
    for q, dq in samples(gait, rng, 20):
        np.testing.assert_allclose(k.rhs(0.0, np.r_[q, dq])[3:], accelerations(params, q, dq, [0, 0]), atol=1e-10)


def test_pure_override():
    env = dict(os.environ, DISCWALKER_PURE="1")
    out = subprocess.run(
        [sys.executable, "-c", "from discwalker import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_missing_backend_raises(params, gait, gains, monkeypatch):
    monkeypatch.setattr(kernels, "_ckernels", None)
    with pytest.raises(ImportError):
        kernels.make_kernel(params, params, gait, gains, backend="cython")
