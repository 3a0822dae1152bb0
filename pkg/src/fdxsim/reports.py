"""CSV writers shared by the command line subcommands.

Every file has a header row and numbers are written as 17-significant-digit
decimal text so a rerun with the same inputs is byte-identical.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    x = float(value)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        x = 0.0  # drop the sign of -0.0
    return format(x, ".17g")


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def write_isolation_csv(path, iso_map) -> Path:
    """Isolation map: one row per receive beam, one column per transmit beam."""
    iso = np.asarray(iso_map, dtype=float)
    header = ["rx_beam"] + [f"tx_{j}" for j in range(iso.shape[1])]
    return write_rows(path, header, ([i, *row] for i, row in enumerate(iso)))


def write_rate_region_csv(path, points) -> Path:
    return write_rows(path, ["label", "mu", "se_tx_bps_hz", "se_rx_bps_hz"],
                      ([p.label, p.mu, p.se_tx, p.se_rx] for p in points))


def write_levels_csv(path, report) -> Path:
    return write_rows(path, ["stage_name", "power_dbm", "margin_db"], report.rows())


def write_selection_csv(path, user_ids, scores, chosen) -> Path:
    return write_rows(path, ["user_id", "score", "selected"],
                      ([u, s, u == chosen] for u, s in zip(user_ids, scores)))
