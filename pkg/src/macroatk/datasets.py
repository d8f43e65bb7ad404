"""Synthetic multi-label data with known label marginals."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .core import make_rng


def make_synthetic(n, m, seed=0, kprime=None, spread=2.0, tail=0.8, base_rate=0.2,
                   chunk_rows=8192, ensure_positive=True):
    """Draw marginals ``eta`` and labels ``y ~ Bernoulli(eta)``.

    Label base rates decay as ``base_rate * (j + 1) ** -tail`` (a long tail);
    ``logit(eta_ij) = logit(rate_j) + spread * z_ij`` with standard normal
    ``z``. With ``kprime`` the marginals are returned as CSR rows holding the
    ``kprime`` largest entries; labels are always drawn from the full rows.

    ``ensure_positive`` gives every label at least one positive instance
    (the instance with the largest marginal) so that empirical priors are
    non-zero.

    Returns ``(marginals, labels)``; labels are binary CSR.
    """
    rng = make_rng(seed)
    rates = base_rate * (np.arange(m) + 1.0) ** -tail
    offset = np.log(rates / (1 - rates))
    eta_blocks, y_blocks = [], []
    best_val = np.full(m, -1.0)
    best_row = np.zeros(m, dtype=np.int64)
    for start in range(0, n, chunk_rows):
        rows = min(chunk_rows, n - start)
        logits = offset + spread * rng.standard_normal((rows, m))
        eta = 1.0 / (1.0 + np.exp(-logits))
        y = rng.random((rows, m)) < eta
        top = eta.argmax(axis=0)
        better = eta[top, np.arange(m)] > best_val
        best_val[better] = eta[top, np.arange(m)][better]
        best_row[better] = start + top[better]
        if kprime is not None and kprime < m:
            drop = np.argpartition(-eta, kprime, axis=1)[:, kprime:]
            np.put_along_axis(eta, drop, 0.0, axis=1)
            eta_blocks.append(sp.csr_matrix(eta))
        else:
            eta_blocks.append(eta)
        y_blocks.append(sp.csr_matrix(y, dtype=float))
    Y = sp.vstack(y_blocks, format="csr")
    if ensure_positive:
        empty = np.flatnonzero(np.asarray(Y.sum(axis=0)).ravel() == 0)
        if empty.size:
            Y = Y.tolil()
            for j in empty:
                Y[best_row[j], j] = 1.0
            Y = Y.tocsr()
    if kprime is not None and kprime < m:
        X = sp.vstack(eta_blocks, format="csr")
    else:
        X = np.vstack(eta_blocks)
    return X, Y
