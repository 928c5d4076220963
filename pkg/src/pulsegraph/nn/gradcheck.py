"""Central finite-difference gradient checking."""
from __future__ import annotations

import numpy as np

FD_STEP = 1e-5
# below this norm a gradient counts as zero and is compared absolutely
REL_FLOOR = 1e-6


def relative_error(analytic, numeric, floor: float = REL_FLOOR) -> np.ndarray:
    """Elementwise |a - n| / max(|a|, |n|, floor)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def tensor_relative_error(analytic, numeric, floor: float = REL_FLOOR) -> float:
    """||a - n|| / max(||a||, ||n||, floor) over a whole tensor.

    Entries whose true gradient is exactly zero (e.g. an attention key bias,
    which softmax ignores) carry only finite-difference rounding noise, so
    they are judged against the scale of the tensor rather than against zero.
    """
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if a.size == 0:
        return 0.0
    denom = max(np.linalg.norm(a), np.linalg.norm(n), floor)
    return float(np.linalg.norm(a - n) / denom)


def numeric_grad(f, x: np.ndarray, indices=None, h: float = FD_STEP) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. entries of ``x`` (perturbed in place)."""
    flat = x.reshape(-1)
    idx = range(flat.size) if indices is None else indices
    out = np.zeros(len(idx) if indices is not None else flat.size)
    for n, i in enumerate(idx):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        out[n] = (fp - fm) / (2.0 * h)
    return out


def check_params(f, params: dict, grads: dict, names=None, indices=None, h: float = FD_STEP):
    """Relative error per parameter tensor (see :func:`tensor_relative_error`).

    ``indices`` optionally maps a name to the flat entries to probe; tensors
    not listed are skipped.
    """
    report = {}
    for name in names or sorted(grads):
        sel = None if indices is None else indices.get(name)
        if indices is not None and sel is None:
            continue
        num = numeric_grad(f, params[name], sel, h)
        ana = np.asarray(grads[name]).reshape(-1)
        if sel is not None:
            ana = ana[sel]
        report[name] = tensor_relative_error(ana, num)
    return report
