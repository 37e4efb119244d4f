"""Trace files.

Binary layout (little endian)::

    magic        8 bytes   b"RQDTRACE"
    version      uint32    1
    header_len   uint32
    header       UTF-8 JSON {"format_version", "config", "points_per_trace",
                             "record_dtype"}
    records      fixed-size records, one per trace, in index order

Each record holds ``index`` (int64), ``initial_phase``, ``alpha`` (float64),
``memory_outcome`` (int8, -1 when there is no memory), ``charge_ok``,
``kept``, ``sign_applied`` (uint8), ``rectify_sign`` (int8) and ``counts``
(``m`` x uint16 for Poisson counts, float64 for Gaussian noise).  Reading
with :func:`read_traces` returns a numpy structured array, so each field is
also available as a column.

The CSV form writes the same fields followed by ``c0 .. c{m-1}``.
"""
from __future__ import annotations

import csv
import json
import struct

import numpy as np

from .config import config_to_dict
from .protocols import MemoryOutcome, PhotonTrace
from .signal_model import NoiseMode

MAGIC = b"RQDTRACE"
VERSION = 1
_META_FIELDS = ("index", "initial_phase", "alpha", "memory_outcome", "charge_ok", "kept",
                "rectify_sign", "sign_applied")


def record_dtype(config):
    m = config.geometry.points_per_trace
    counts = "<u2" if config.readout.noise_mode is NoiseMode.POISSON else "<f8"
    return np.dtype([
        ("index", "<i8"), ("initial_phase", "<f8"), ("alpha", "<f8"),
        ("memory_outcome", "i1"), ("charge_ok", "u1"), ("kept", "u1"),
        ("rectify_sign", "i1"), ("sign_applied", "u1"), ("counts", counts, (m,)),
    ])


def _record(trace, dtype):
    rec = np.zeros((), dtype=dtype)
    if dtype["counts"].base.kind == "u" and trace.counts.max(initial=0) > np.iinfo(np.uint16).max:
        raise OverflowError("photon count exceeds uint16 range")
    rec["index"] = trace.index
    rec["initial_phase"] = trace.initial_phase
    rec["alpha"] = trace.alpha
    rec["memory_outcome"] = -1 if trace.memory_outcome is None else int(trace.memory_outcome)
    rec["charge_ok"] = trace.charge_ok
    rec["kept"] = trace.kept
    rec["rectify_sign"] = trace.rectify_sign
    rec["sign_applied"] = trace.sign_applied
    rec["counts"] = trace.counts
    return rec


class TraceWriter:
    """Streaming writer; use as a context manager and call :meth:`write` per trace."""

    def __init__(self, path, config):
        self.dtype = record_dtype(config)
        header = json.dumps({
            "format_version": VERSION,
            "config": config_to_dict(config),
            "points_per_trace": config.geometry.points_per_trace,
            "record_dtype": [list(d) if len(d) == 2 else [d[0], d[1], list(d[2])]
                             for d in self.dtype.descr],
        }, sort_keys=True).encode()
        self._fh = open(path, "wb")
        self._fh.write(MAGIC + struct.pack("<II", VERSION, len(header)) + header)
        self.count = 0

    def write(self, trace):
        self._fh.write(_record(trace, self.dtype).tobytes())
        self.count += 1

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_traces(path, config, traces):
    with TraceWriter(path, config) as w:
        for tr in traces:
            w.write(tr)
    return w.count


def read_header(fh):
    magic = fh.read(8)
    if magic != MAGIC:
        raise ValueError("not a trace file")
    version, n = struct.unpack("<II", fh.read(8))
    if version != VERSION:
        raise ValueError(f"unsupported trace file version {version}")
    return json.loads(fh.read(n))


def read_traces(path):
    """Return ``(header, records)``; ``records`` is a structured array."""
    with open(path, "rb") as fh:
        header = read_header(fh)
        descr = [tuple(d[:2]) if len(d) == 2 else (d[0], d[1], tuple(d[2]))
                 for d in header["record_dtype"]]
        records = np.frombuffer(fh.read(), dtype=np.dtype(descr))
    return header, records


def records_to_traces(records):
    """Rebuild :class:`PhotonTrace` objects from :func:`read_traces` output."""
    for r in records:
        mem = None if r["memory_outcome"] < 0 else MemoryOutcome(int(r["memory_outcome"]))
        counts = r["counts"]
        counts = counts.astype(np.int64) if counts.dtype.kind == "u" else counts.copy()
        yield PhotonTrace(int(r["index"]), counts, float(r["initial_phase"]), float(r["alpha"]),
                          mem, bool(r["charge_ok"]), bool(r["kept"]), int(r["rectify_sign"]),
                          bool(r["sign_applied"]))


def write_traces_csv(path, traces, n_points):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(_META_FIELDS) + [f"c{j}" for j in range(n_points)])
        for tr in traces:
            mem = "" if tr.memory_outcome is None else int(tr.memory_outcome)
            w.writerow([tr.index, repr(tr.initial_phase), repr(tr.alpha), mem, int(tr.charge_ok),
                        int(tr.kept), tr.rectify_sign, int(tr.sign_applied)]
                       + [repr(float(c)) if isinstance(c, float) else int(c)
                          for c in tr.counts.tolist()])
