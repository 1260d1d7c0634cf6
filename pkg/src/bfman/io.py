"""File formats: data CSVs, truth sidecars, summaries and the raw draw archive.

Data CSV: one header row of variable names, one subject per row, dot
decimal, no index column.

Draw archive: ``draws.bin`` holds little-endian float64 arrays back to back
in C order; ``draws.json`` lists each array's name, shape and byte offset.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .model import PosteriorDraws

DRAW_ARRAYS = ("lam", "eta", "z", "theta", "sigma2", "tau", "loglik", "accept_rate")


class ParseError(ValueError):
    pass


def _fmt(x) -> str:
    return repr(float(x))


def write_matrix_csv(path, M, header=None, prefix="V"):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    header = header or [f"{prefix}{j + 1}" for j in range(M.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in M:
            w.writerow([_fmt(v) for v in row])


def read_matrix_csv(path):
    """Read a data CSV; returns ``(matrix, header)``.

    Raises :class:`ParseError` naming the 1-based file line of any ragged,
    non-numeric or non-finite row.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {line_no} has {len(row)} fields, expected {len(header)}")
            try:
                values = [float(v) for v in row]
            except ValueError:
                raise ParseError(f"{path}: row {line_no} has a non-numeric field") from None
            if not all(np.isfinite(values)):
                raise ParseError(f"{path}: row {line_no} has a NaN or infinite value")
            rows.append(values)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows, dtype=float), header


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return json.loads(path.read_text())


def write_binary(path, arrays: dict):
    """Write float64 arrays back to back; returns the JSON descriptor."""
    entries, offset = [], 0
    with open(path, "wb") as fh:
        for name, arr in arrays.items():
            a = np.ascontiguousarray(arr, dtype="<f8")
            fh.write(a.tobytes())
            entries.append({"name": name, "shape": list(a.shape), "offset": offset})
            offset += a.nbytes
    return {"file": Path(path).name, "dtype": "<f8", "order": "C", "arrays": entries}


def read_binary(descriptor_path) -> dict:
    desc = read_json(descriptor_path)
    raw = (Path(descriptor_path).parent / desc["file"]).read_bytes()
    out = {}
    for e in desc["arrays"]:
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        out[e["name"]] = np.frombuffer(raw, dtype="<f8", count=count,
                                       offset=e["offset"]).reshape(e["shape"])
    return out


def save_draws(directory, draws: PosteriorDraws):
    directory = Path(directory)
    desc = write_binary(directory / "draws.bin", {k: getattr(draws, k) for k in DRAW_ARRAYS})
    desc.update(burnin=draws.burnin, thin=draws.thin, model=draws.model)
    write_json(directory / "draws.json", desc)


def load_draws(directory) -> PosteriorDraws:
    directory = Path(directory)
    arrays = read_binary(directory / "draws.json")
    meta = read_json(directory / "draws.json")
    z = arrays["z"].astype(np.int8)
    return PosteriorDraws(
        lam=arrays["lam"].copy(), eta=arrays["eta"].copy(), z=z, theta=arrays["theta"].copy(),
        sigma2=arrays["sigma2"].copy(), tau=arrays["tau"].copy(), loglik=arrays["loglik"].copy(),
        accept_rate=arrays["accept_rate"].copy(), zero_prop=1.0 - z.mean(axis=1),
        burnin=meta["burnin"], thin=meta["thin"], model=meta["model"],
    )
