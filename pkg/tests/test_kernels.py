import os
import subprocess
import sys

import numpy as np
import pytest

from mctsga import _kernels
from mctsga.genome import decode, encode
from mctsga.network import MlpSpec, forward, init_model


@pytest.mark.parametrize("sizes", [(8, 16, 8, 4, 1), (3, 1), (2, 5, 1)])
def test_backends_agree_with_reference_forward(sizes):
    spec = MlpSpec(sizes)
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(37, sizes[0]))
    params = rng.normal(scale=2.0, size=(7, spec.n_params))
    ref = np.stack([forward(decode(encode(init_model(spec, 0)).with_values(p), spec), X)
                    for p in params])
    s = np.asarray(sizes)
    for fn in (_kernels.forward_population_numpy, _kernels.forward_population_numba):
        out = fn(params, X, s)
        assert out.shape == (7, 37)
        assert np.max(np.abs(out - ref)) < 1e-12


def _backend_in_subprocess(flag):
    env = dict(os.environ)
    env.pop("MCTSGA_DISABLE_NUMBA", None)
    if flag is not None:
        env["MCTSGA_DISABLE_NUMBA"] = flag
    out = subprocess.run([sys.executable, "-c", "import mctsga; print(mctsga.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_flag_selects_backend():
    assert _backend_in_subprocess("1") == "numpy"
    assert _backend_in_subprocess("0") == ("numba" if _kernels.HAVE_NUMBA else "numpy")
    assert _backend_in_subprocess(None) == ("numba" if _kernels.HAVE_NUMBA else "numpy")
