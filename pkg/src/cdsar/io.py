"""File formats: metadata-prefixed CSV, dataset tables, JSON containers.

CSV files start with one or more ``# `` lines carrying a JSON metadata
object (resolved config, master seed, format version), followed by a header
row and comma-separated records with LF line endings. Floats are written
with ``repr`` so a re-read reproduces them bit-exactly.
"""

import csv
import json
import math

import numpy as np

from cdsar.montecarlo import ImageDataset

FORMAT_VERSION = 1
META_PREFIX = "# "
DATASET_COLUMNS = ("member", "model", "q", "seed", "line", "zeta", "j", "psi", "re", "im")


class DatasetFormatError(ValueError):
    """Malformed dataset file; ``line`` is the 1-based line number."""

    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = path
        self.line = line


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows, meta=None):
    with open(path, "w", newline="") as fh:
        if meta is not None:
            fh.write(META_PREFIX + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def read_csv(path):
    """(meta, columns, rows) with rows as lists of strings, plus line numbers."""
    meta = None
    with open(path, newline="") as fh:
        lines = fh.read().split("\n")
    start = 0
    while start < len(lines) and lines[start].startswith("#"):
        text = lines[start][1:].strip()
        if text and meta is None:
            try:
                meta = json.loads(text)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(path, start + 1, f"bad metadata line: {exc}") from None
        start += 1
    body = [(i + 1, ln) for i, ln in enumerate(lines) if i >= start and ln.strip()]
    if not body:
        raise DatasetFormatError(path, start + 1, "missing header row")
    parsed = list(csv.reader([ln for _, ln in body]))
    columns = parsed[0]
    rows = [(body[k][0], parsed[k]) for k in range(1, len(parsed))]
    return meta, columns, rows


def read_numeric_csv(path):
    """(meta, columns, float array) for an all-numeric table."""
    meta, columns, rows = read_csv(path)
    out = np.empty((len(rows), len(columns)))
    for k, (lineno, r) in enumerate(rows):
        if len(r) != len(columns):
            raise DatasetFormatError(path, lineno, f"expected {len(columns)} fields, got {len(r)}")
        try:
            out[k] = [float(x) if x != "" else math.nan for x in r]
        except ValueError as exc:
            raise DatasetFormatError(path, lineno, str(exc)) from None
    return meta, columns, out


# datasets -----------------------------------------------------------------


def dataset_rows(datasets, grid):
    for i, ds in enumerate(datasets):
        ds.check_grid(grid)
        for m in range(grid.n_lines):
            zeta = grid.zeta_lines[m]
            for j in range(grid.n_per_line):
                z = ds.samples[m, j]
                yield (
                    i, ds.model or "", "" if ds.q is None else float(ds.q),
                    "" if ds.seed is None else int(ds.seed),
                    m, float(zeta), j, float(grid.psi_samples[m][j]), z.real, z.imag,
                )


def write_datasets_csv(path, datasets, grid, meta=None):
    write_csv(path, DATASET_COLUMNS, dataset_rows(datasets, grid), meta)


def read_datasets_csv(path, grid=None):
    """Parse a dataset table back into ImageDataset members.

    Required columns: member, line, j, re, im. Rows may come in any order
    but every member must fill the same (line, j) rectangle.
    """
    meta, columns, rows = read_csv(path)
    need = ("member", "line", "j", "re", "im")
    missing = [c for c in need if c not in columns]
    if missing:
        raise DatasetFormatError(path, 1 + (meta is not None), f"missing columns {missing}")
    idx = {c: columns.index(c) for c in columns}
    cells = {}
    info = {}
    for lineno, r in rows:
        if len(r) != len(columns):
            raise DatasetFormatError(path, lineno, f"expected {len(columns)} fields, got {len(r)}")
        try:
            key = (int(r[idx["member"]]), int(r[idx["line"]]), int(r[idx["j"]]))
            val = complex(float(r[idx["re"]]), float(r[idx["im"]]))
        except ValueError as exc:
            raise DatasetFormatError(path, lineno, str(exc)) from None
        if min(key) < 0:
            raise DatasetFormatError(path, lineno, "negative index")
        if not (math.isfinite(val.real) and math.isfinite(val.imag)):
            raise DatasetFormatError(path, lineno, "non-finite sample")
        if key in cells:
            raise DatasetFormatError(path, lineno, f"duplicate entry {key}")
        cells[key] = (val, lineno)
        if key[0] not in info:
            model = r[idx["model"]] if "model" in idx else ""
            q = r[idx["q"]] if "q" in idx else ""
            seed = r[idx["seed"]] if "seed" in idx else ""
            try:
                info[key[0]] = (model or None, float(q) if q else None, int(seed) if seed else None)
            except ValueError as exc:
                raise DatasetFormatError(path, lineno, str(exc)) from None
    if not cells:
        raise DatasetFormatError(path, 2, "no data rows")
    members = sorted(info)
    n_lines = 1 + max(k[1] for k in cells)
    n_per = 1 + max(k[2] for k in cells)
    if grid is not None and (n_lines, n_per) != (grid.n_lines, grid.n_per_line):
        raise DatasetFormatError(
            path, max(v[1] for v in cells.values()),
            f"data shape ({n_lines}, {n_per}) does not match grid ({grid.n_lines}, {grid.n_per_line})",
        )
    out = []
    for mem in members:
        arr = np.empty((n_lines, n_per), dtype=complex)
        for m in range(n_lines):
            for j in range(n_per):
                if (mem, m, j) not in cells:
                    raise DatasetFormatError(path, len(rows) + 1, f"member {mem} lacks entry ({m}, {j})")
                arr[m, j] = cells[(mem, m, j)][0]
        model, q, seed = info[mem]
        out.append(ImageDataset(arr, model=model, q=q, seed=seed))
    return meta, out


def write_json_container(path, kind, meta, payload):
    doc = {"format": f"cdsar.{kind}", "version": FORMAT_VERSION, "meta": meta, "data": payload}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def read_json_container(path, kind):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(path, exc.lineno, exc.msg) from None
    if doc.get("format") != f"cdsar.{kind}":
        raise DatasetFormatError(path, 1, f"expected format cdsar.{kind}, got {doc.get('format')!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise DatasetFormatError(path, 1, f"unsupported version {doc.get('version')!r}")
    return doc["meta"], doc["data"]


def ensemble_payload(datasets):
    return [
        {
            "model": ds.model, "q": ds.q, "seed": ds.seed,
            "re": ds.samples.real.tolist(), "im": ds.samples.imag.tolist(),
        }
        for ds in datasets
    ]


def datasets_from_payload(path, payload):
    out = []
    for k, d in enumerate(payload):
        try:
            arr = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
            out.append(ImageDataset(arr, model=d.get("model"), q=d.get("q"), seed=d.get("seed")))
        except (KeyError, ValueError, TypeError) as exc:
            raise DatasetFormatError(path, 1, f"member {k}: {exc}") from None
    return out


def write_jsonl(path, records, meta=None):
    with open(path, "w") as fh:
        if meta is not None:
            fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(ln) for ln in fh if ln.strip()]
