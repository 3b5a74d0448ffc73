"""Compiled kernel vs pure-Python integrator agreement and selection."""
import os
import subprocess
import sys as _sys

import numpy as np
import pytest

import nhvak
from nhvak.dynamics import BACKEND, integrate_nonholonomic

needs_compiled = pytest.mark.skipif(BACKEND != "compiled",
                                    reason="speedup extension not built")


@needs_compiled
def test_backend_agreement(unicycle, carriage, heisenberg, holonomic):
    for sys, v0 in [(unicycle, [1.0, 2.0]), (carriage, [1.0, 2.0]),
                    (heisenberg, [1.0, 0.5]), (holonomic, [1.0, 0.5])]:
        fast = integrate_nonholonomic(sys, np.zeros(sys.dim), np.array(v0), 3.0, 1e-3)
        slow = integrate_nonholonomic(sys, np.zeros(sys.dim), np.array(v0), 3.0, 1e-3,
                                      force_python=True)
        assert np.max(np.abs(fast.q - slow.q)) <= 1e-9
        assert np.max(np.abs(fast.vd - slow.vd)) <= 1e-9
        assert np.array_equal(fast.t, slow.t)


@needs_compiled
def test_fast_path_only_for_constant_coefficient_systems(gen_heisenberg, unicycle):
    assert gen_heisenberg.fast is None
    assert unicycle.fast is not None
    from nhvak.systems import UnicycleParams, build_unicycle
    with_potential = build_unicycle(UnicycleParams(
        potential=lambda q: 0.3 * np.cos(q[2]),
        potential_grad=lambda q: np.stack(
            [np.zeros_like(q[..., 0]), np.zeros_like(q[..., 0]),
             -0.3 * np.sin(q[..., 2]), np.zeros_like(q[..., 0])], axis=-1)))
    assert with_potential.fast is None


def test_env_var_forces_python_backend():
    code = ("import nhvak.dynamics as d; print(d.BACKEND)")
    env = dict(os.environ, NHVAK_PURE_PYTHON="1")
    out = subprocess.run([_sys.executable, "-c", code], capture_output=True,
                         text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


@needs_compiled
def test_compiled_rejects_oversized_dimension():
    from nhvak import _speedup
    with pytest.raises(ValueError):
        _speedup.integrate_nh(0, np.eye(9), np.zeros((9, 9, 9)), np.eye(9),
                              np.eye(9), np.zeros(9), np.zeros(9), 1, 1e-3)
