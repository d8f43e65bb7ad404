"""Text formats for labels, marginals, predictions, classifiers and reports.

All files are UTF-8 with LF line endings and ``.`` as decimal separator.

Label and prediction files::

    n m
    0,2 5:0.1        <- comma-separated label indices, optional ignored feat:val tokens
    1
                     <- empty line: no relevant labels

Marginal files::

    n m
    0:0.9 2:0.3      <- space-separated label:probability pairs

Distribution files (tab or space separated)::

    n m
    weight eta_1 ... eta_m
"""

from __future__ import annotations

import json
import math
import statistics
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .core import AffineTopK, RandomizedClassifier
from .exceptions import InvalidClassifierError, ParseError

DEFAULT_KPRIME = 200
CLASSIFIER_FORMAT = "macroatk-randomized-classifier"


def _fmt(x):
    return format(float(x), ".17g")


def _read_lines(path):
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _parse_header(lines, path):
    if not lines:
        raise ParseError("missing 'n m' header", 1, path)
    parts = lines[0].split()
    if len(parts) != 2:
        raise ParseError(f"header must be 'n m', got {lines[0]!r}", 1, path)
    try:
        n, m = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError(f"header must hold two integers, got {lines[0]!r}", 1, path) from None
    if n < 0 or m < 1:
        raise ParseError(f"invalid dimensions n={n}, m={m}", 1, path)
    body = lines[1:]
    if len(body) != n:
        raise ParseError(f"header announces {n} rows but the file has {len(body)}", len(lines), path)
    return n, m, body


def _csr(rows, n, m, values=None):
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum([len(r) for r in rows], out=indptr[1:])
    indices = np.fromiter((j for r in rows for j in r), dtype=np.int64, count=int(indptr[-1]))
    if values is None:
        data = np.ones(indices.size)
    else:
        data = np.fromiter((v for r in values for v in r), dtype=float, count=int(indptr[-1]))
    return sp.csr_matrix((data, indices, indptr), shape=(n, m))


def load_labels(path):
    """Read a label file into an ``(n, m)`` binary CSR matrix."""
    lines = _read_lines(path)
    n, m, body = _parse_header(lines, path)
    rows = []
    for offset, line in enumerate(body):
        lineno = offset + 2
        tokens = line.split()
        labels = set()
        if tokens and not line[:1].isspace() and ":" not in tokens[0]:
            for tok in tokens[0].split(","):
                if tok == "":
                    continue
                try:
                    j = int(tok)
                except ValueError:
                    raise ParseError(f"bad label index {tok!r}", lineno, path) from None
                if not 0 <= j < m:
                    raise ParseError(f"label index {j} outside [0, {m})", lineno, path)
                labels.add(j)
        rows.append(sorted(labels))
    return _csr(rows, n, m)


def save_labels(Y, path):
    """Write a binary CSR/dense matrix in the label-file format."""
    Y = sp.csr_matrix(Y)
    n, m = Y.shape
    out = [f"{n} {m}"]
    for i in range(n):
        lo, hi = Y.indptr[i], Y.indptr[i + 1]
        cols = sorted(int(j) for j, v in zip(Y.indices[lo:hi], Y.data[lo:hi]) if v != 0)
        out.append(",".join(map(str, cols)))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


save_predictions = save_labels
load_predictions = load_labels


def truncate_rows(X, kprime):
    """Keep the ``kprime`` largest entries per row (ties: smaller index wins)."""
    X = sp.csr_matrix(X)
    n, m = X.shape
    rows, vals = [], []
    for i in range(n):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        cols, data = X.indices[lo:hi], X.data[lo:hi]
        if cols.size > kprime:
            keep = np.lexsort((cols, -data))[:kprime]
            keep = keep[np.argsort(cols[keep])]
            cols, data = cols[keep], data[keep]
        rows.append(cols)
        vals.append(data)
    return _csr(rows, n, m, vals)


def load_marginals(path, kprime=None):
    """Read a marginal file into an ``(n, m)`` CSR matrix.

    ``kprime`` truncates every row to its ``kprime`` largest probabilities;
    ``None`` keeps every stored entry.
    """
    lines = _read_lines(path)
    n, m, body = _parse_header(lines, path)
    rows, vals = [], []
    for offset, line in enumerate(body):
        lineno = offset + 2
        entries = {}
        for tok in line.split():
            j_s, sep, p_s = tok.partition(":")
            if not sep:
                raise ParseError(f"expected label:probability, got {tok!r}", lineno, path)
            try:
                j, p = int(j_s), float(p_s)
            except ValueError:
                raise ParseError(f"malformed pair {tok!r}", lineno, path) from None
            if not 0 <= j < m:
                raise ParseError(f"label index {j} outside [0, {m})", lineno, path)
            if not 0.0 <= p <= 1.0:
                raise ParseError(f"probability {p!r} outside [0, 1]", lineno, path)
            if j in entries:
                raise ParseError(f"duplicate label index {j}", lineno, path)
            entries[j] = p
        cols = sorted(entries)
        rows.append(cols)
        vals.append([entries[j] for j in cols])
    X = _csr(rows, n, m, vals)
    if kprime is not None:
        X = truncate_rows(X, kprime)
    return X


def save_marginals(X, path):
    """Write marginals (CSR or dense); dense zeros are not stored."""
    X = sp.csr_matrix(X)
    n, m = X.shape
    out = [f"{n} {m}"]
    for i in range(n):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        order = np.argsort(X.indices[lo:hi], kind="stable")
        cols, data = X.indices[lo:hi][order], X.data[lo:hi][order]
        out.append(" ".join(f"{int(j)}:{_fmt(v)}" for j, v in zip(cols, data)))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def load_distribution(path):
    """Read a discrete distribution file (``n m`` header, then ``weight eta...``)."""
    from .oracle import DiscreteDistribution

    lines = [ln for ln in _read_lines(path)]
    n, m, body = _parse_header(lines, path)
    weights, rows = [], []
    for offset, line in enumerate(body):
        lineno = offset + 2
        parts = line.split()
        if len(parts) != m + 1:
            raise ParseError(f"expected {m + 1} fields, got {len(parts)}", lineno, path)
        try:
            nums = [float(p) for p in parts]
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", lineno, path) from None
        weights.append(nums[0])
        rows.append(nums[1:])
    try:
        return DiscreteDistribution(np.array(weights), np.array(rows).reshape(n, m))
    except ValueError as exc:
        raise ParseError(str(exc), None, path) from None


def save_distribution(dist, path):
    out = [f"{dist.n} {dist.m}"]
    for w, row in zip(dist.weights, dist.marginals):
        out.append("\t".join([_fmt(w)] + [_fmt(v) for v in row]))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Classifiers
# ---------------------------------------------------------------------------


def classifier_to_dict(rclf):
    if isinstance(rclf, AffineTopK):
        rclf = RandomizedClassifier((rclf,), np.ones(1))
    return {
        "format": CLASSIFIER_FORMAT,
        "version": 1,
        "k": rclf.k,
        "m": rclf.m,
        "components": [
            {"weight": float(w), "a": [float(v) for v in c.a], "b": [float(v) for v in c.b]}
            for w, c in zip(rclf.weights, rclf.components)
        ],
    }


def classifier_from_dict(doc):
    try:
        if doc.get("format") != CLASSIFIER_FORMAT:
            raise ParseError(f"not a classifier document (format={doc.get('format')!r})")
        k, m = int(doc["k"]), int(doc["m"])
        comps, weights = [], []
        for c in doc["components"]:
            a, b = c["a"], c["b"]
            if len(a) != m or len(b) != m:
                raise ParseError(f"component coefficients must have length {m}")
            comps.append(AffineTopK(np.array(a, dtype=float), np.array(b, dtype=float), k))
            weights.append(float(c["weight"]))
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"classifier schema violation: {exc!r}") from None
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"classifier schema violation: {exc}") from None
    w = np.array(weights)
    if not comps or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ParseError(f"mixture weights must be non-negative and sum to 1 (got {w.sum()!r})")
    if w.sum() != 1.0:
        w = w / w.sum()
    try:
        return RandomizedClassifier(tuple(comps), w)
    except InvalidClassifierError as exc:
        raise ParseError(str(exc)) from None


def save_classifier(rclf, path):
    # json writes floats with repr(), the shortest string that round-trips exactly
    Path(path).write_text(json.dumps(classifier_to_dict(rclf), indent=1) + "\n", encoding="utf-8")


def load_classifier(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, path) from None
    if not isinstance(doc, dict):
        raise ParseError("classifier document must be a JSON object", None, path)
    return classifier_from_dict(doc)


# ---------------------------------------------------------------------------
# Reports and traces
# ---------------------------------------------------------------------------

REPORT_COLUMNS = ("strategy", "metric", "mean", "std", "repeats")


def summarize(values):
    """Mean and population standard deviation of repeated measurements.

    ``statistics`` works with exact rationals, so constant repeats give a
    standard deviation of exactly 0.
    """
    v = [float(x) for x in values]
    return statistics.fmean(v), statistics.pstdev(v)


def report_rows(results):
    """``{(strategy, metric): [values...]}`` to sorted report rows."""
    rows = []
    for (strategy, metric), vals in sorted(results.items()):
        mean, std = summarize(vals)
        rows.append({"strategy": strategy, "metric": metric, "mean": mean, "std": std,
                     "repeats": len(vals), "values": [float(x) for x in vals]})
    return rows


def save_report(rows, path):
    """Write ``path`` as TSV and ``path`` with ``.json`` suffix as a JSON mirror.

    ``rows`` is a list of dicts with the keys of :data:`REPORT_COLUMNS`
    (``values`` is kept in the JSON only). Returns both paths.
    """
    path = Path(path)
    lines = ["\t".join(REPORT_COLUMNS)]
    for r in rows:
        lines.append("\t".join([str(r["strategy"]), str(r["metric"]), _fmt(r["mean"]),
                                _fmt(r["std"]), str(int(r["repeats"]))]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    json_path = path.with_suffix(".json")
    json_path.write_text(json.dumps({"columns": list(REPORT_COLUMNS), "rows": rows}, indent=1) + "\n",
                         encoding="utf-8")
    return path, json_path


def load_report(path):
    """Read the TSV report back into a list of dicts."""
    lines = _read_lines(path)
    if not lines or tuple(lines[0].split("\t")) != REPORT_COLUMNS:
        raise ParseError("unexpected report header", 1, path)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != len(REPORT_COLUMNS):
            raise ParseError("wrong number of columns", lineno, path)
        rows.append({"strategy": parts[0], "metric": parts[1], "mean": float(parts[2]),
                     "std": float(parts[3]), "repeats": int(parts[4])})
    return rows


def save_trace(trace, path):
    lines = ["iteration\tobjective\tstep"]
    for i, obj, step in trace.rows():
        lines.append(f"{i}\t{_fmt(obj)}\t{_fmt(step)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_table(header, rows, path):
    """Generic TSV writer for plot-ready tables."""
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(_fmt(v) if isinstance(v, float) and math.isfinite(v) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
