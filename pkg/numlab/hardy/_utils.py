# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import hashlib
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import ConfigError


Field = Callable[[np.ndarray], np.ndarray]


def fd_step(delta_tilde: np.ndarray) -> np.ndarray:
    """Finite-difference step tied to the distance from the singular set.

    Parameters
    ----------
    delta_tilde: np.ndarray
        Projection distance δ̃ at the evaluation points.

    Returns
    -------
    np.ndarray:
        h = min(10⁻³·max(δ̃, 10⁻²), δ̃/10), so that stencils never
        reach the singular set.
    """
    dt = np.asarray(delta_tilde, dtype=float)
    return np.minimum(1e-3 * np.maximum(dt, 1e-2), dt / 10.0)


def _stencil(points: np.ndarray, steps: np.ndarray) -> np.ndarray:
    # (M, 2N, N): x + h e_i for i < N, then x - h e_i
    m, n = points.shape
    offsets = np.concatenate([np.eye(n), -np.eye(n)])
    return points[:, None, :] + steps[:, None, None] * offsets[None, :, :]


def _evaluate(f: Field, points: np.ndarray) -> np.ndarray:
    m, s, n = points.shape
    return np.asarray(f(points.reshape(m * s, n)), dtype=float).reshape(m, s)


def central_gradient(f: Field, points: np.ndarray,
                     steps: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Richardson-extrapolated central-difference gradient.

    Returns the gradient with shape (M, N) and an error estimate per point.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    steps = np.broadcast_to(np.asarray(steps, dtype=float), points.shape[:1])
    n = points.shape[1]

    def one_level(h):
        values = _evaluate(f, _stencil(points, h))
        return (values[:, :n] - values[:, n:]) / (2.0 * h[:, None])

    coarse = one_level(steps)
    fine = one_level(steps / 2.0)
    grad = (4.0 * fine - coarse) / 3.0
    error = np.max(np.abs(fine - coarse), axis=1) / 3.0
    return grad, error


def central_laplacian(f: Field, points: np.ndarray,
                      steps: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Richardson-extrapolated (2N+1)-point Laplacian.

    Returns the Laplacian with shape (M,) and an error estimate per point.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    steps = np.broadcast_to(np.asarray(steps, dtype=float), points.shape[:1])
    n = points.shape[1]
    center = np.asarray(f(points), dtype=float)

    def one_level(h):
        values = _evaluate(f, _stencil(points, h))
        second = values[:, :n] + values[:, n:] - 2.0 * center[:, None]
        return np.sum(second, axis=1) / h ** 2

    coarse = one_level(steps)
    fine = one_level(steps / 2.0)
    return (4.0 * fine - coarse) / 3.0, np.abs(fine - coarse) / 3.0


def stencil_inside(inside: Optional[Callable[[np.ndarray], np.ndarray]],
                   points: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """Mask of points whose whole stencil satisfies ``inside``."""
    points = np.atleast_2d(points)
    if inside is None:
        return np.ones(points.shape[0], dtype=bool)
    stencil = _stencil(points, np.broadcast_to(steps, points.shape[:1]))
    m, s, n = stencil.shape
    flags = np.asarray(inside(stencil.reshape(m * s, n)), dtype=bool)
    return np.all(flags.reshape(m, s), axis=1) & np.asarray(
        inside(points), dtype=bool)


def parse_lambda_grid(spec: str) -> np.ndarray:
    """Parse a ``lo:hi:count`` λ grid into a sorted array.

    >>> parse_lambda_grid('-10:10:21')[:3]
    array([-10.,  -9.,  -8.])
    """
    parts = str(spec).split(':')
    if len(parts) != 3:
        raise ConfigError(f'expected lo:hi:count, got {spec!r}',
                          field='run.lambdas')
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f'expected lo:hi:count, got {spec!r}',
                          field='run.lambdas') from None
    if count < 1 or hi < lo:
        raise ConfigError(f'empty lambda grid {spec!r}', field='run.lambdas')
    if count == 1:
        return np.array([lo])
    return np.linspace(lo, hi, count)


def digest(*arrays: np.ndarray) -> str:
    """Short content hash used as a grid signature."""
    h = hashlib.sha1()
    for array in arrays:
        data = np.ascontiguousarray(np.asarray(array, dtype=float))
        h.update(str(data.shape).encode())
        h.update(data.tobytes())
    return h.hexdigest()[:16]


def fit_constant(values: np.ndarray) -> float:
    """Constant bounding a residual family: the max of finite values."""
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return float('nan')
    return float(np.max(finite))
