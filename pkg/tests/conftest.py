"""Shared test helpers: finite-difference gradients and tiny corpora."""

import numpy as np


def central_diff_grads(loss_fn, params, h=1e-5):
    """Central finite differences of a scalar loss w.r.t. each param tensor.

    loss_fn takes no arguments and returns a python float; it must re-run
    the full forward pass so that in-place perturbations of param.data are
    picked up. Independent of the tape machinery on purpose.
    """
    grads = []
    for p in params:
        g = np.zeros_like(p.data, dtype=np.float64)
        flat = p.data.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = loss_fn()
            flat[i] = orig - h
            lm = loss_fn()
            flat[i] = orig
            gf[i] = (lp - lm) / (2.0 * h)
        grads.append(g.reshape(p.data.shape))
    return grads


def max_rel_err(analytic, numeric, floor=1e-8):
    """Max relative error, ignoring entries where both sides are ~zero."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    err = np.abs(analytic - numeric) / denom
    err[(np.abs(analytic) < floor) & (np.abs(numeric) < floor)] = 0.0
    return float(err.max()) if err.size else 0.0
