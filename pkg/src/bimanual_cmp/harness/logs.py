"""Per-tick CSV logs and the metrics derived from them.

Every float is printed with 9 significant digits. Metrics are always
computed from the printed values, so re-reading a CSV reproduces them
exactly.
"""

from __future__ import annotations

import io
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "log_columns",
    "format_table",
    "write_csv",
    "read_csv",
    "RunMetrics",
    "metrics_from_log",
    "PEAK_TOLERANCE",
]

PEAK_TOLERANCE = 1e-6
FLOAT_FORMAT = "%.9g"


def log_columns(n: int = 7) -> list[str]:
    cols = ["t"]
    for name in ("q", "qd"):
        for arm in (1, 2):
            cols += [f"{name}{arm}_{j}" for j in range(1, n + 1)]
    for block in ("abs", "rel"):
        cols += [f"err_{block}_{a}" for a in ("x", "y", "z", "rx", "ry", "rz")]
    cols += ["pert_fx", "pert_fy", "pert_fz", "pert_n"]
    for term in ("rec", "biman", "vft", "ff"):
        for arm in (1, 2):
            cols += [f"tau_{term}{arm}_{j}" for j in range(1, n + 1)]
    return cols


def format_table(data: np.ndarray) -> np.ndarray:
    """String matrix of ``data`` at the log precision."""
    return np.char.mod(FLOAT_FORMAT, np.asarray(data, dtype=float))


def write_csv(path, columns, text: np.ndarray) -> None:
    """Write a header plus the preformatted rows; LF line endings."""
    buf = io.StringIO()
    buf.write(",".join(columns))
    buf.write("\n")
    for row in text:
        buf.write(",".join(row))
        buf.write("\n")
    Path(path).write_bytes(buf.getvalue().encode("ascii"))


def read_csv(path):
    """``(columns, data)`` from a log written by :func:`write_csv`."""
    with open(path, "r", newline="") as fh:
        columns = fh.readline().rstrip("\n").split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return columns, data


@dataclass(frozen=True)
class RunMetrics:
    """Summary of one run; all distances in m, forces in N.

    The peak instant is the last tick whose estimated perturbation norm is
    within ``PEAK_TOLERANCE`` (relative) of the maximum, i.e. the end of a
    hold plateau once the arms have settled. Without a perturbation it is
    ``-1`` and the at-peak fields are zero.
    """

    max_abs_error: float
    max_rel_error: float
    rms_abs_error: float
    rms_rel_error: float
    max_abs_rot_error: float
    max_rel_rot_error: float
    peak_perturbation: float
    peak_tick: int
    peak_time: float
    abs_error_at_peak: float
    rel_error_at_peak: float
    compliance: float
    max_tau_biman: float
    max_tau_vft: float

    def as_dict(self) -> dict:
        return asdict(self)


def metrics_from_log(columns, data, min_force: float = 1e-3) -> RunMetrics:
    idx = {c: i for i, c in enumerate(columns)}

    def block(prefix, names):
        return data[:, [idx[f"{prefix}{a}"] for a in names]]

    e_abs = np.linalg.norm(block("err_abs_", "xyz"), axis=1)
    e_rel = np.linalg.norm(block("err_rel_", "xyz"), axis=1)
    r_abs = np.linalg.norm(block("err_abs_", ("rx", "ry", "rz")), axis=1)
    r_rel = np.linalg.norm(block("err_rel_", ("rx", "ry", "rz")), axis=1)
    pert = data[:, idx["pert_n"]]
    biman = data[:, [i for c, i in idx.items() if c.startswith("tau_biman")]]
    vft = data[:, [i for c, i in idx.items() if c.startswith("tau_vft")]]
    peak = float(pert.max()) if pert.size else 0.0
    if peak > min_force:
        tick = int(np.flatnonzero(pert >= peak * (1.0 - PEAK_TOLERANCE))[-1])
        at_abs, at_rel = float(e_abs[tick]), float(e_rel[tick])
        compliance = float(e_abs.max() / peak)
        time = float(data[tick, idx["t"]])
    else:
        tick, at_abs, at_rel, compliance, time = -1, 0.0, 0.0, 0.0, 0.0
    return RunMetrics(
        max_abs_error=float(e_abs.max()),
        max_rel_error=float(e_rel.max()),
        rms_abs_error=float(np.sqrt(np.mean(e_abs ** 2))),
        rms_rel_error=float(np.sqrt(np.mean(e_rel ** 2))),
        max_abs_rot_error=float(r_abs.max()),
        max_rel_rot_error=float(r_rel.max()),
        peak_perturbation=peak,
        peak_tick=tick,
        peak_time=time,
        abs_error_at_peak=at_abs,
        rel_error_at_peak=at_rel,
        compliance=compliance,
        max_tau_biman=float(np.abs(biman).max()) if biman.size else 0.0,
        max_tau_vft=float(np.abs(vft).max()) if vft.size else 0.0,
    )
