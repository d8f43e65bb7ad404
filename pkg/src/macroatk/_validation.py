"""Input validation shared by the estimators and the CLI."""

import numpy as np
import scipy.sparse as sp
from sklearn.utils.validation import check_array

from .exceptions import InvalidInputError, ShapeError


def check_marginals(X, n_labels=None):
    """Validate a marginal matrix: CSR or dense float, values in [0, 1]."""
    X = check_array(X, accept_sparse="csr", dtype=np.float64)
    vals = X.data if sp.issparse(X) else X
    if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
        raise InvalidInputError("marginals must lie in [0, 1]")
    if n_labels is not None and X.shape[1] != n_labels:
        raise ShapeError(f"expected {n_labels} labels, got {X.shape[1]}")
    return X


def check_labels(Y, shape=None, soft=False):
    """Validate labels: binary CSR/dense, or values in [0, 1] when ``soft``."""
    Y = check_array(Y, accept_sparse="csr", dtype=np.float64)
    vals = Y.data if sp.issparse(Y) else Y
    if soft:
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise InvalidInputError("soft labels must lie in [0, 1]")
    elif vals.size and not np.all((vals == 0.0) | (vals == 1.0)):
        raise InvalidInputError("labels must be binary (pass soft=True for marginals)")
    if shape is not None and Y.shape != tuple(shape):
        raise ShapeError(f"labels have shape {Y.shape}, expected {tuple(shape)}")
    return Y
