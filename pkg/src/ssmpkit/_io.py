"""Deterministic file output."""
from pathlib import Path

import numpy as np


def write_csv(path, names, cols) -> None:
    """Deterministic CSV: repr-exact floats, integers as integers."""
    cols = [np.asarray(c) for c in cols]
    lines = [",".join(names)]
    fmt = [(lambda v: str(int(v))) if np.issubdtype(c.dtype, np.integer) or c.dtype == bool
           else (lambda v: repr(float(v))) for c in cols]
    for row in zip(*cols):
        lines.append(",".join(f(v) for f, v in zip(fmt, row)))
    Path(path).write_text("\n".join(lines) + "\n")
