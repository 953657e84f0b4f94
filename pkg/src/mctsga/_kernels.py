"""Batched forward pass for a population of flat parameter vectors.

Fitness evaluation dominates the runtime of both the GA and the tree
search, so the population forward pass lives here with two
implementations:

* ``forward_population_numba`` - explicit loops compiled with ``@njit``
  (``nogil`` so evaluation threads run in parallel).
* ``forward_population_numpy`` - stacked ``matmul`` over the population.

The active backend is numba when it imports, unless the environment
variable ``MCTSGA_DISABLE_NUMBA`` is set to a truthy value. Parameter
layout per layer: weight matrix (out x in) row-major, then the bias
vector.
"""

import os

import numpy as np

_FLAG = os.environ.get("MCTSGA_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

HAVE_NUMBA = njit is not None
BACKEND = "numba" if HAVE_NUMBA and not _DISABLED else "numpy"


def forward_population_numpy(params, X, sizes):
    """Output probabilities, shape (n_members, n_samples)."""
    params = np.ascontiguousarray(params, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    n_members = params.shape[0]
    act = np.broadcast_to(X, (n_members,) + X.shape)
    off = 0
    for fin, fout in zip(sizes[:-1], sizes[1:]):
        fin, fout = int(fin), int(fout)
        W = params[:, off:off + fout * fin].reshape(n_members, fout, fin)
        off += fout * fin
        b = params[:, off:off + fout]
        off += fout
        z = np.matmul(act, W.transpose(0, 2, 1)) + b[:, None, :]
        act = 1.0 / (1.0 + np.exp(-z))
    return act[:, :, 0]


def _forward_population_loops(params, X, sizes):
    # activations are stored (unit, sample) so the innermost loops run over
    # samples and vectorise
    n_members = params.shape[0]
    n = X.shape[0]
    n_layers = sizes.shape[0] - 1
    width = 0
    for s in sizes:
        if s > width:
            width = s
    out = np.empty((n_members, n))
    Xt = X.T.copy()
    a = np.empty((width, n))
    h = np.empty((width, n))
    for p in range(n_members):
        for j in range(sizes[0]):
            for i in range(n):
                a[j, i] = Xt[j, i]
        off = 0
        for layer in range(n_layers):
            fin = sizes[layer]
            fout = sizes[layer + 1]
            bias_off = off + fout * fin
            for o in range(fout):
                for i in range(n):
                    h[o, i] = 0.0
                base = off + o * fin
                for k in range(fin):
                    w = params[p, base + k]
                    for i in range(n):
                        h[o, i] += w * a[k, i]
                b = params[p, bias_off + o]
                for i in range(n):
                    h[o, i] = 1.0 / (1.0 + np.exp(-(h[o, i] + b)))
            for o in range(fout):
                for i in range(n):
                    a[o, i] = h[o, i]
            off = bias_off + fout
        for i in range(n):
            out[p, i] = a[0, i]
    return out


if HAVE_NUMBA:
    _forward_population_jit = njit(cache=True, nogil=True)(_forward_population_loops)
else:  # pragma: no cover
    _forward_population_jit = _forward_population_loops


def forward_population_numba(params, X, sizes):
    """Same contract as :func:`forward_population_numpy`, jit-compiled."""
    return _forward_population_jit(
        np.ascontiguousarray(params, dtype=np.float64),
        np.ascontiguousarray(X, dtype=np.float64),
        np.asarray(sizes, dtype=np.int64),
    )


def forward_population(params, X, sizes):
    if BACKEND == "numba":
        return forward_population_numba(params, X, sizes)
    return forward_population_numpy(params, X, sizes)
