"""Complex pressure samples over evaluation points, one row per frequency."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PressureField:
    """Pressure values (pascals, complex) at fixed points for several frequencies.

    `values[i, j]` is the pressure at frequency `freqs_hz[i]` and point j.
    The point order is defined by whichever grid produced the field.
    """

    freqs_hz: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs_hz, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.complex128)
        if v.ndim != 2 or len(f) != v.shape[0]:
            raise ValueError(f"values must be (n_freqs, n_points), got {v.shape} for {len(f)} frequencies")
        object.__setattr__(self, "freqs_hz", f)
        object.__setattr__(self, "values", v)
        f.setflags(write=False)
        v.setflags(write=False)

    @property
    def n_points(self):
        return self.values.shape[1]

    def at_frequency(self, freq_hz):
        i = np.flatnonzero(np.isclose(self.freqs_hz, freq_hz, rtol=1e-12, atol=0))
        if len(i) != 1:
            raise KeyError(f"frequency {freq_hz} Hz not in field (have {self.freqs_hz.tolist()})")
        return self.values[i[0]]

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["freqHz", "pointIndex", "re", "im"])
            for i, f in enumerate(self.freqs_hz):
                for j in range(self.values.shape[1]):
                    v = self.values[i, j]
                    w.writerow([repr(float(f)), j, repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def load_csv(cls, path):
        freqs = []
        rows = {}
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            if header != ["freqHz", "pointIndex", "re", "im"]:
                raise ValueError(f"unexpected field CSV header {header} in {path}")
            for rec in r:
                f = float(rec[0])
                if not freqs or freqs[-1] != f:
                    freqs.append(f)
                    rows[f] = []
                rows[f].append((int(rec[1]), float(rec[2]), float(rec[3])))
        npts = {len(v) for v in rows.values()}
        if len(npts) != 1:
            raise ValueError(f"inconsistent point counts per frequency in {path}")
        values = np.zeros((len(freqs), npts.pop()), dtype=np.complex128)
        for i, f in enumerate(freqs):
            for j, re, im in rows[f]:
                values[i, j] = re + 1j * im
        return cls(np.array(freqs), values)
