# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import abc
from typing import Optional, Tuple

import numpy as np


class GridCoordinates(abc.ABC):
    """Orthogonal coordinates y in which a scenario lays out its grid.

    A tensor grid is built in y; fields are evaluated at the Cartesian
    images x(y). For orthogonal coordinates with Lamé factors h_a the
    Dirichlet energy density is Σ_a (J/h_a²)(∂u/∂y_a)² and the volume
    element is J dy, J = h_1⋯h_N.
    """

    #: axes along which the last node is the first one
    periodic_axes: Tuple[int, ...] = ()

    #: axis whose zero face is a line: the nodes of that face are merged
    #: along ``collapsed_axis``
    polar_axis: Optional[int] = None
    collapsed_axis: Optional[int] = None

    @abc.abstractmethod
    def to_cartesian(self, y: np.ndarray) -> np.ndarray:
        pass

    @abc.abstractmethod
    def jacobian(self, y: np.ndarray) -> np.ndarray:
        pass

    @abc.abstractmethod
    def stiffness_factors(self, y: np.ndarray) -> np.ndarray:
        """(M, N) array of J/h_a² at the points y."""
        pass

    def __repr__(self):
        return f'<{type(self).__name__}>'


class CartesianCoordinates(GridCoordinates):

    def to_cartesian(self, y: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(y, dtype=float))

    def jacobian(self, y: np.ndarray) -> np.ndarray:
        return np.ones(np.atleast_2d(y).shape[0])

    def stiffness_factors(self, y: np.ndarray) -> np.ndarray:
        return np.ones(np.atleast_2d(y).shape, dtype=float)


class CylindricalCoordinates(GridCoordinates):
    """y = (r, θ, z) with x = (r cos θ, r sin θ, z).

    θ runs over [0, 2π] and is periodic; the nodes on r = 0 form the
    axis and share one unknown per height.
    """

    periodic_axes = (1,)
    polar_axis = 0
    collapsed_axis = 1

    def to_cartesian(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        r, theta = y[:, 0], y[:, 1]
        return np.stack([r * np.cos(theta), r * np.sin(theta), y[:, 2]],
                        axis=1)

    def jacobian(self, y: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(y, dtype=float))[:, 0].copy()

    def stiffness_factors(self, y: np.ndarray) -> np.ndarray:
        r = np.atleast_2d(np.asarray(y, dtype=float))[:, 0]
        with np.errstate(divide='ignore'):
            return np.stack([r, 1.0 / r, r], axis=1)


CARTESIAN = CartesianCoordinates()
CYLINDRICAL = CylindricalCoordinates()
