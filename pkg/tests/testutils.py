# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import json
import os
import pathlib
import tempfile
import unittest
from typing import Any, Dict, Optional

import numpy as np

from numlab.hardy import SparseOperator


SLOW_TESTS = os.environ.get('HARDY_SLOW_TESTS') == '1'


def slow_test(func):
    """Skip acceptance-scale runs unless HARDY_SLOW_TESTS=1."""
    return unittest.skipUnless(
        SLOW_TESTS, 'set HARDY_SLOW_TESTS=1 for acceptance-scale runs')(func)


def operator(matrix, name: str = 'M') -> SparseOperator:
    return SparseOperator(matrix, name=name, signature='test')


def dirichlet_laplacian_1d(n: int):
    """Stiffness and lumped mass of −u'' on (0, 1) with n cells."""
    from scipy import sparse
    h = 1.0 / n
    main = np.full(n - 1, 2.0 / h)
    off = np.full(n - 2, -1.0 / h)
    A = sparse.diags([off, main, off], [-1, 0, 1])
    B = sparse.diags(np.full(n - 1, h))
    return operator(A, 'A'), operator(B, 'B_plain')


class ConfigDirectory:
    """A temporary directory holding one experiment configuration."""

    def __init__(self, scenario: Dict[str, Any],
                 weights: Any = None,
                 run: Optional[Dict[str, Any]] = None) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.root = pathlib.Path(self._tmp.name)
        self.out = self.root / 'out'
        payload: Dict[str, Any] = {'scenario': scenario}
        if weights is not None:
            payload['weights'] = weights
        payload['run'] = dict(run or {}, output_dir=str(self.out))
        self.config = self.root / 'config.json'
        self.config.write_text(json.dumps(payload, indent=2))

    def read_json(self, name: str) -> Dict[str, Any]:
        return json.loads((self.out / name).read_text())

    def __enter__(self) -> 'ConfigDirectory':
        return self

    def __exit__(self, *exc) -> None:
        self._tmp.cleanup()
