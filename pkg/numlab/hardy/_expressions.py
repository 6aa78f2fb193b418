# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import logging
import tokenize
import typing
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import sympy
from sympy.parsing import sympy_parser

from .errors import WeightError


DISTANCE_VARIABLES = ('d', 'delta', 'delta_hat', 'delta_tilde', 'psi')

_NON_SMOOTH = (sympy.Abs, sympy.sign, sympy.Piecewise, sympy.Heaviside,
               sympy.Max, sympy.Min, sympy.floor, sympy.ceiling)


def coordinate_names(dim: int) -> Tuple[str, ...]:
    return tuple(f'x{i + 1}' for i in range(dim))


def parse_expression(expression: Union[str, float, int, sympy.Expr],
                     dim: int) -> sympy.Expr:
    """Parse a weight expression with sympy, guarding the variable names.

    Only the coordinates ``x1 .. xN`` and the distance variables ``d``,
    ``delta``, ``delta_hat``, ``delta_tilde`` and ``psi`` may appear free.
    """
    if isinstance(expression, sympy.Expr):
        expr = expression
    elif isinstance(expression, (int, float)):
        expr = sympy.Float(expression) if isinstance(expression, float) \
            else sympy.Integer(expression)
    else:
        local_dict: Dict[str, Any] = {
            name: sympy.Symbol(name, real=True)
            for name in coordinate_names(dim) + DISTANCE_VARIABLES}
        try:
            expr = sympy_parser.parse_expr(str(expression),
                                           local_dict=local_dict)
        except (SyntaxError, TypeError, ValueError, AttributeError,
                tokenize.TokenError, sympy.SympifyError) as exc:
            raise WeightError(
                f'cannot parse expression {expression!r}: {exc}') from None

    allowed = set(coordinate_names(dim) + DISTANCE_VARIABLES)
    unknown = sorted(s.name for s in expr.free_symbols
                     if s.name not in allowed)
    if unknown:
        raise WeightError(
            f'unknown variable(s) {", ".join(unknown)} in {expression!r}; '
            f'allowed are x1..x{dim}, {", ".join(DISTANCE_VARIABLES)}')
    return expr


class ScalarField:
    """A scalar field on Ω̄ described by a closed-form expression tree.

    The tree is kept as a sympy expression so that derivatives are exact;
    evaluation goes through :func:`sympy.lambdify` with the numpy backend.
    """

    _logger = logging.getLogger('numlab.hardy.expressions')

    def __init__(self, expression: Union[str, float, int, sympy.Expr], *,
                 dim: int) -> None:
        self.__dim = dim
        self.__expr = parse_expression(expression, dim)
        if isinstance(expression, str):
            self.__source = expression.strip()
        elif isinstance(expression, (int, float)):
            self.__source = str(expression)
        else:
            self.__source = str(self.__expr)
        self.__names = tuple(sorted(s.name for s in self.__expr.free_symbols))
        symbols = [sympy.Symbol(name, real=True) for name in self.__names]
        self._logger.debug('compile expression `%s`', self.__expr)
        self.__func = sympy.lambdify(symbols, self.__expr, modules='numpy')

    @property
    def dim(self) -> int:
        return self.__dim

    @property
    def sympy_expr(self) -> sympy.Expr:
        return self.__expr

    @property
    def expression(self) -> str:
        """The expression as it was written."""
        return self.__source

    @property
    def variables(self) -> Tuple[str, ...]:
        return self.__names

    @property
    def is_constant(self) -> bool:
        return not self.__names

    @property
    def depends_on_distances(self) -> bool:
        return any(name in DISTANCE_VARIABLES for name in self.__names)

    @property
    def is_smooth(self) -> bool:
        return not self.__expr.has(*_NON_SMOOTH)

    def __call__(self, points: np.ndarray,
                 fields: Optional[Any] = None) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        args: List[np.ndarray] = []
        for name in self.__names:
            if name.startswith('x') and name[1:].isdigit():
                args.append(points[:, int(name[1:]) - 1])
            else:
                if fields is None:
                    raise WeightError(
                        f'expression {self.expression!r} needs the distance '
                        f'variable {name!r} but no scenario fields were given')
                args.append(np.asarray(getattr(fields, name), dtype=float))
        value = np.asarray(self.__func(*args), dtype=float)
        return np.broadcast_to(value, points.shape[:1]).copy()

    def derivative(self, index: int) -> 'ScalarField':
        self._require_coordinates('differentiate')
        symbol = sympy.Symbol(f'x{index + 1}', real=True)
        return ScalarField(sympy.diff(self.__expr, symbol), dim=self.__dim)

    def gradient(self) -> List['ScalarField']:
        return [self.derivative(i) for i in range(self.__dim)]

    def laplacian(self) -> 'ScalarField':
        self._require_coordinates('differentiate')
        expr = sum((sympy.diff(self.__expr, sympy.Symbol(name, real=True), 2)
                    for name in coordinate_names(self.__dim)),
                   sympy.Integer(0))
        return ScalarField(sympy.simplify(expr), dim=self.__dim)

    def combine(self, other: 'ScalarField',
                op: typing.Callable[[sympy.Expr, sympy.Expr], sympy.Expr]
                ) -> 'ScalarField':
        return ScalarField(op(self.__expr, other.sympy_expr), dim=self.__dim)

    def scaled(self, factor: float) -> 'ScalarField':
        return ScalarField(sympy.Float(factor) * self.__expr
                           if not float(factor).is_integer()
                           else sympy.Integer(int(factor)) * self.__expr,
                           dim=self.__dim)

    def _require_coordinates(self, action: str) -> None:
        if self.depends_on_distances:
            raise WeightError(
                f'cannot {action} {self.expression!r}: only expressions of '
                f'x1..x{self.__dim} have symbolic derivatives')

    def __eq__(self, other):
        if not isinstance(other, type(self)):
            return False
        return sympy.simplify(self.__expr - other.sympy_expr) == 0

    def __hash__(self):
        return hash((type(self), str(self.__expr), self.__dim))

    def __repr__(self):
        return f'<ScalarField {self.expression}>'
