"""CSV reading/writing with row- and column-precise diagnostics."""

import csv

import numpy as np

from .exceptions import DimensionMismatch, NonBinaryLabel, ValidationError

__all__ = ["CsvError", "read_matrix_csv", "read_labels_csv", "write_matrix_csv"]


class CsvError(ValidationError):
    pass


def read_matrix_csv(path):
    """Read ``sample_id, f1, f2, ...`` with a header row.

    Returns ``(sample_ids, column_names, values)``.  Line numbers in error
    messages count the header as line 1.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvError(f"{path}: file is empty (a header row is required)", where=str(path))
    header = [h.strip() for h in rows[0]]
    if len(header) < 1:
        raise CsvError(f"{path}: header has no columns", where=str(path))
    names = header[1:]
    ids, data = [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise CsvError(f"{path}: line {line_no} has {len(row)} fields, header has "
                           f"{len(header)}", where=str(path), index=(line_no, None))
        ids.append(row[0].strip())
        vals = []
        for col, cell in zip(names, row[1:]):
            try:
                v = float(cell)
            except ValueError:
                raise CsvError(f"{path}: line {line_no}, column {col!r}: cannot parse "
                               f"{cell!r} as a number", where=str(path),
                               index=(line_no, col)) from None
            if not np.isfinite(v):
                raise CsvError(f"{path}: line {line_no}, column {col!r}: non-finite value "
                               f"{cell!r}", where=str(path), index=(line_no, col))
            vals.append(v)
        data.append(vals)
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise CsvError(f"{path}: duplicate sample id {dup!r}", where=str(path))
    values = np.array(data, dtype=np.float64).reshape(len(ids), len(names))
    return ids, names, values


def read_labels_csv(path):
    ids, names, values = read_matrix_csv(path)
    bad = (values != 0) & (values != 1)
    if bad.any():
        r, c = (int(i) for i in np.argwhere(bad)[0])
        raise NonBinaryLabel(f"{path}: line {r + 2}, column {names[c]!r}: label "
                             f"{values[r, c]!r} is not 0/1", where=str(path),
                             index=(r + 2, names[c]))
    if not names:
        raise DimensionMismatch(f"{path}: no label columns", where=str(path))
    return ids, names, values


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_matrix_csv(path, ids, names, values):
    """Write with full float round-trip precision."""
    values = np.asarray(values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", *names])
        for sid, row in zip(ids, values):
            w.writerow([sid, *(_fmt(v) for v in row.tolist())])
