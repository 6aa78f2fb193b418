# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import csv
import io
import json
import math
import os
import pathlib
import tempfile
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Union

import numpy as np

from .discretization import SparseOperator


SCHEMA_VERSION = 1

PathLike = Union[str, pathlib.Path]


def _plain(value: Any) -> Any:
    # JSON-safe copy; non-finite floats become strings
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    return value


def write_atomic(path: PathLike, text: str) -> pathlib.Path:
    """Write ``text`` to a temporary file beside ``path`` and rename it."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp = tempfile.mkstemp(prefix=f'.{path.name}.', dir=path.parent)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as stream:
            stream.write(text)
        os.replace(temp, path)
    except BaseException:
        try:
            os.unlink(temp)
        except FileNotFoundError:
            pass
        raise
    return path


def dumps_json(payload: Mapping[str, Any]) -> str:
    body = dict(_plain(payload))
    body['schema'] = SCHEMA_VERSION
    return json.dumps(body, sort_keys=True, indent=2,
                      allow_nan=False) + '\n'


def write_json(path: PathLike, payload: Mapping[str, Any]) -> pathlib.Path:
    return write_atomic(path, dumps_json(payload))


def write_csv(path: PathLike, columns: Sequence[str],
              rows: Iterable[Mapping[str, Any]]) -> pathlib.Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format(row.get(c)) for c in columns])
    return write_atomic(path, buffer.getvalue())


def _format(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_triplets(path: PathLike, operator: SparseOperator) -> pathlib.Path:
    """``row col value`` per line, sorted by row then column."""
    lines = [f'{i} {j} {v!r}' for i, j, v in operator.triplets()]
    return write_atomic(path, '\n'.join(lines) + '\n')


def write_plot_script(path: PathLike, data: str, *, plateau: float,
                      quantity: str = 'mu') -> pathlib.Path:
    """gnuplot script drawing the curve of ``data`` and the plateau."""
    script = '\n'.join([
        "set datafile separator ','",
        "set key top right",
        "set xlabel 'lambda'",
        f"set ylabel '{quantity}'",
        f'plateau = {plateau!r}',
        f"plot '{data}' using 1:2 skip 1 with linespoints title "
        f"'{quantity}(lambda)', plateau with lines dashtype 2 "
        "title '(N-k)^2/4'",
        ''])
    return write_atomic(path, script)


class ArtifactIndex:
    """Paths written by one command, for the ``report.json`` index."""

    def __init__(self, root: PathLike) -> None:
        self.__root = pathlib.Path(root)
        self.__entries: Dict[str, str] = {}

    @property
    def root(self) -> pathlib.Path:
        return self.__root

    def path(self, name: str) -> pathlib.Path:
        return self.__root / name

    def add(self, key: str, path: pathlib.Path) -> pathlib.Path:
        self.__entries[key] = path.name
        return path

    def entries(self) -> Dict[str, str]:
        return dict(self.__entries)

    def __iter__(self):
        return iter(sorted(self.__entries.items()))

    def names(self) -> List[str]:
        return sorted(self.__entries.values())
