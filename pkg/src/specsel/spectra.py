"""Dense symmetric eigensolver and the graph -> spectrum map.

Eigenvalues are computed by Householder reduction to tridiagonal form
followed by implicit-shift QL iteration (the classic EISPACK route),
compiled with numba.  Only eigenvalues are produced; eigenvector
accumulation is skipped since downstream classifiers consume values only.

The spectrum of a graph is the ascending eigenvalue vector of its
Laplacian (undirected) or of ``B @ B.T`` built from the incidence matrix
(directed); either way the vector has length n.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .graphs import Graph, directed_laplacian, laplacian

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class Spectrum:
    """Ascending real eigenvalues plus the clamp tolerance that was applied."""

    values: np.ndarray
    tol: float

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        self.values.setflags(write=False)

    def __len__(self):
        return self.values.size


@njit(cache=True)
def _householder_tridiag(a):
    """Reduce symmetric a (destroyed) to tridiagonal; returns (diag, subdiag)."""
    n = a.shape[0]
    d = np.zeros(n)
    e = np.zeros(n)
    for i in range(n - 1, 0, -1):
        l = i - 1
        h = 0.0
        if l > 0:
            scale = 0.0
            for k in range(l + 1):
                scale += abs(a[i, k])
            if scale == 0.0:
                e[i] = a[i, l]
            else:
                for k in range(l + 1):
                    a[i, k] /= scale
                    h += a[i, k] * a[i, k]
                f = a[i, l]
                g = -np.sqrt(h) if f >= 0.0 else np.sqrt(h)
                e[i] = scale * g
                h -= f * g
                a[i, l] = f - g
                f = 0.0
                for j in range(l + 1):
                    g = 0.0
                    for k in range(j + 1):
                        g += a[j, k] * a[i, k]
                    for k in range(j + 1, l + 1):
                        g += a[k, j] * a[i, k]
                    e[j] = g / h
                    f += e[j] * a[i, j]
                hh = f / (h + h)
                for j in range(l + 1):
                    f = a[i, j]
                    g = e[j] - hh * f
                    e[j] = g
                    for k in range(j + 1):
                        a[j, k] -= f * e[k] + g * a[i, k]
        else:
            e[i] = a[i, l]
    for i in range(n):
        d[i] = a[i, i]
    e[0] = 0.0
    return d, e


@njit(cache=True)
def _ql_implicit(d, e, max_sweeps):
    """Implicit-shift QL on a tridiagonal (d, e); d becomes the eigenvalues.

    Returns 0 on success, 1 if the sweep budget is exhausted.
    """
    n = d.shape[0]
    for i in range(1, n):
        e[i - 1] = e[i]
    e[n - 1] = 0.0
    sweeps = 0
    for l in range(n):
        while True:
            m = n - 1
            for mm in range(l, n - 1):
                dd = abs(d[mm]) + abs(d[mm + 1])
                if abs(e[mm]) <= _EPS * dd:
                    m = mm
                    break
            if m == l:
                break
            sweeps += 1
            if sweeps > max_sweeps:
                return 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            sign_r = r if g >= 0.0 else -r
            g = d[m] - d[l] + e[l] / (g + sign_r)
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0


def eigenvalues_symmetric(m: np.ndarray) -> Spectrum:
    """All eigenvalues of a symmetric real matrix, sorted ascending.

    Rejects matrices with relative asymmetry above 1e-12.  Values within
    1e-8 * ||m|| of zero are snapped to exactly zero: negatives there are
    roundoff on PSD input, and the symmetric snap keeps zero multiplicities
    (component counts) exact.  Genuinely negative eigenvalues pass through.
    """
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    amax = np.abs(a).max(initial=0.0)
    asym = np.abs(a - a.T).max(initial=0.0)
    if asym > 1e-12 * max(1.0, amax):
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:g})")
    tol = 1e-8 * max(1.0, np.abs(a).sum(axis=1).max(initial=0.0))
    if n == 1:
        vals = a[0, :1].copy()
    else:
        d, e = _householder_tridiag(a)
        status = _ql_implicit(d, e, 30 * n)
        if status != 0:
            raise RuntimeError(f"QL iteration failed to converge within {30 * n} sweeps")
        vals = np.sort(d)
    vals[np.abs(vals) < tol] = 0.0
    return Spectrum(vals, tol)


def spectrum(g: Graph) -> Spectrum:
    """Ascending Laplacian eigenvalues of a graph; length exactly n."""
    mat = directed_laplacian(g) if g.directed else laplacian(g)
    return eigenvalues_symmetric(mat)


def zero_multiplicity(s: Spectrum | np.ndarray, eps: float | None = None) -> int:
    """Count eigenvalues below ``eps``; default eps is 1e-6 * max(1, lambda_max).

    For an undirected graph's spectrum this equals the number of connected
    components.
    """
    vals = s.values if isinstance(s, Spectrum) else np.asarray(s, dtype=np.float64)
    if eps is None:
        eps = 1e-6 * max(1.0, float(vals[-1]) if vals.size else 1.0)
    elif eps <= 0:
        raise ValueError("eps must be positive")
    return int(np.count_nonzero(vals < eps))


def write_spectrum_csv(path, rows: Iterable[tuple[str, int, Sequence[float]]]) -> None:
    """Write spectra as CSV: model_label, replicate_id, lambda_1..lambda_n."""
    rows = list(rows)
    if not rows:
        raise ValueError("no spectra to write")
    width = len(rows[0][2])
    for label, rep, vals in rows:
        if len(vals) != width:
            raise ValueError(f"mixed spectrum lengths: {len(vals)} vs {width} "
                             f"(label {label!r}, replicate {rep})")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model_label", "replicate_id"]
                        + [f"lambda_{i + 1}" for i in range(width)])
        for label, rep, vals in rows:
            writer.writerow([label, rep] + [f"{float(v):.12g}" for v in vals])
