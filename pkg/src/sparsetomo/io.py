"""Writers for experiment artifacts: CSV tables, raw images, manifests.

Every writer is deterministic: identical inputs produce identical bytes.
Floats are serialized with repr, which round-trips float64 exactly.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .experiments import DecayRecord, RateFit, SummaryRow
from .phantoms import Image

DECAY_HEADER = ("regime", "p", "transform", "N", "k", "seed", "alpha", "delta",
                "bregman", "rel_err_sq", "objective_final", "status")

SUMMARY_HEADER = ("N", "n_ok", "mean_bregman", "std_bregman",
                  "mean_rel_err_sq", "std_rel_err_sq")


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (np.floating,)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_rows_csv(path, header, rows):
    """Generic CSV writer; floats via repr, everything else via str."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def write_decay_csv(path, records: list[DecayRecord]):
    rows = [
        (r.regime, r.p, r.transform_kind, r.N, r.k, r.seed, r.alpha, r.delta,
         r.bregman, r.rel_err_sq, r.objective_final, r.status)
        for r in records
    ]
    write_rows_csv(path, DECAY_HEADER, rows)


def read_decay_csv(path) -> list[DecayRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != DECAY_HEADER:
            raise ValueError(f"unexpected decay CSV header: {header}")
        out = []
        for row in reader:
            regime, p, kind, N, k, seed, alpha, delta, breg, rel, obj, status = row
            out.append(DecayRecord(regime, float(p), kind, int(N), int(k),
                                   int(seed), float(alpha), float(delta),
                                   float(breg), float(rel), float(obj), status))
    return out


def write_summary_csv(path, rows: list[SummaryRow], fit: RateFit | None = None,
                      theoretical_exp: float | None = None):
    """Per-N statistics, optionally followed by fit/theory annotation rows."""
    table = [(r.N, r.n_ok, r.mean_bregman, r.std_bregman,
              r.mean_rel_err_sq, r.std_rel_err_sq) for r in rows]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for row in table:
            writer.writerow([_cell(v) for v in row])
        if fit is not None:
            writer.writerow(["fit", _cell(fit.c), _cell(fit.beta_exp),
                             _cell(fit.r_squared), "", ""])
        if theoretical_exp is not None:
            writer.writerow(["theoretical", "", _cell(float(theoretical_exp)),
                             "", "", ""])


def write_raw_f64(path, img: Image):
    """Headerless little-endian float64, row-major (load_image's raw_f64)."""
    np.ascontiguousarray(img.values, dtype="<f8").tofile(path)


def write_pgm(path, img: Image, maxval: int = 65535):
    """Binary P5 at 8 or 16 bits; values are rescaled to [0, maxval] by max."""
    if not 0 < maxval < 65536:
        raise ValueError(f"maxval must be in 1..65535, got {maxval}")
    v = img.as2d()
    peak = float(v.max())
    scaled = np.zeros_like(v) if peak <= 0 else np.clip(v / peak, 0.0, 1.0)
    pix = np.rint(scaled * maxval)
    pix = pix.astype(">u2" if maxval > 255 else "u1")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.side} {img.side}\n{maxval}\n".encode("ascii"))
        fh.write(pix.tobytes())


def write_json(path, payload: dict):
    """Pretty, key-sorted JSON (used for run manifests)."""
    def default(obj):
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        raise TypeError(f"not JSON serializable: {type(obj)}")

    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")


def finite_or_none(x: float):
    """NaN/inf -> None, for JSON-safe metric reporting."""
    return float(x) if math.isfinite(x) else None
