"""Relative error metrics between pressure fields and mesh-variant studies.

Errors are relative norms of the complex difference, so magnitude and
phase deviations both count; a pi phase flip of an otherwise perfect
field scores 2 (two hundred percent). Grid quadrature weights enter the
L2 norms; frequencies carry uniform weight. For the ipsi/contra subsets
both the numerator and the denominator restrict to the subset, otherwise
contralateral errors would be deflated by the larger ipsilateral
reference energy.
"""

from __future__ import annotations

import csv
import math
import re
import time
from dataclasses import dataclass

import numpy as np

from .bem import calc_hrtf_reciprocal, patch_source_strength
from .fields import PressureField
from .waves import Medium

SUBSETS = ("all", "ipsi", "contra")


def _aligned_values(p_num, p_ref, grid):
    if p_num.values.shape != p_ref.values.shape:
        raise ValueError(
            f"fields are misaligned: {p_num.values.shape} vs {p_ref.values.shape}"
        )
    if not np.array_equal(p_num.freqs_hz, p_ref.freqs_hz):
        raise ValueError("fields are misaligned: frequency lists differ")
    if p_num.n_points != grid.n_points:
        raise ValueError(
            f"fields have {p_num.n_points} points but the grid has {grid.n_points}"
        )
    return p_num.values, p_ref.values


def _l2(values, weights):
    return math.sqrt(float(np.sum(weights[None, :] * np.abs(values) ** 2)))


def relative_error(p_num, p_ref, grid, subset="all", norm="L2"):
    """Relative error of p_num against p_ref over one grid subset.

    L2 uses the grid's solid-angle weights and sums all frequencies with
    uniform weight; Linf takes the maximum over frequencies and points.
    """
    values, ref = _aligned_values(p_num, p_ref, grid)
    mask = grid.hemisphere_mask(subset)
    diff = values[:, mask] - ref[:, mask]
    ref = ref[:, mask]
    if norm == "L2":
        num = _l2(diff, grid.weights[mask])
        den = _l2(ref, grid.weights[mask])
    elif norm == "Linf":
        num = float(np.max(np.abs(diff), initial=0.0))
        den = float(np.max(np.abs(ref), initial=0.0))
    else:
        raise ValueError(f"unknown norm {norm!r} (use 'L2' or 'Linf')")
    if den == 0.0:
        raise ValueError(f"reference field has zero {norm} norm on subset {subset!r}")
    return num / den


@dataclass(frozen=True)
class FrequencyErrors:
    freq_hz: float
    e_l2: dict
    e_linf: dict


@dataclass(frozen=True)
class ErrorReport:
    """Relative errors of one field pair: both norms, all subsets."""

    e_l2: dict
    e_linf: dict
    per_frequency: tuple
    ratio: float

    def __post_init__(self):
        for table in (self.e_l2, self.e_linf):
            if any(v < 0 for v in table.values()):
                raise ValueError("relative errors must be nonnegative")

    def summary(self):
        lines = ["subset   e_L2       e_Linf"]
        for s in SUBSETS:
            lines.append(f"{s:<8} {100 * self.e_l2[s]:7.2f} %  {100 * self.e_linf[s]:7.2f} %")
        lines.append(f"Linf/L2 ratio (all): {self.ratio:.3f}")
        return "\n".join(lines)


def _single_frequency(field_obj, index):
    return PressureField(
        freqs_hz=field_obj.freqs_hz[index : index + 1],
        values=field_obj.values[index : index + 1],
    )


def compare_fields(p_num, p_ref, grid):
    """Full ErrorReport: both norms over the three subsets, per frequency."""
    _aligned_values(p_num, p_ref, grid)
    e_l2 = {s: relative_error(p_num, p_ref, grid, s, "L2") for s in SUBSETS}
    e_linf = {s: relative_error(p_num, p_ref, grid, s, "Linf") for s in SUBSETS}
    rows = []
    for i, f in enumerate(p_num.freqs_hz):
        a = _single_frequency(p_num, i)
        b = _single_frequency(p_ref, i)
        rows.append(
            FrequencyErrors(
                freq_hz=float(f),
                e_l2={s: relative_error(a, b, grid, s, "L2") for s in SUBSETS},
                e_linf={s: relative_error(a, b, grid, s, "Linf") for s in SUBSETS},
            )
        )
    ratio = e_linf["all"] / e_l2["all"] if e_l2["all"] > 0.0 else float("nan")
    return ErrorReport(
        e_l2=e_l2, e_linf=e_linf, per_frequency=tuple(rows), ratio=ratio
    )


# -- mesh-variant studies ---------------------------------------------------------

_LABEL_GRAMMAR = re.compile(
    r"^(UNI|COS(?P<cosalpha>\d+(?:\.\d+)?)|POW(?P<powalpha>\d+(?:\.\d+)?))"
    r"\((?P<first>\d+(?:\.\d+)?)(?:,\s*(?P<second>\d+(?:\.\d+)?))?\)$"
)


def _parse_label(label):
    """(family, lmin_mm, lmax_mm) from a grading label, blanks if opaque."""
    m = _LABEL_GRAMMAR.match(label)
    if not m:
        return "", "", ""
    first = m.group("first")
    second = m.group("second")
    if label.startswith("UNI"):
        return "uniform", first, first
    family = "raised-cosine" if m.group("cosalpha") else "power"
    return family, first, second or first


@dataclass(frozen=True)
class StudyVariant:
    """One mesh entering a study; `field` short-circuits the solver run."""

    label: str
    mesh: object
    field: PressureField = None
    seconds: float = float("nan")


@dataclass(frozen=True)
class StudyScene:
    """Shared context for a study: reference field, grid, and solver setup."""

    reference: PressureField
    grid: object
    freqs_hz: tuple
    patch_label: str = "mic"
    medium: Medium = Medium()
    velocity: float = 1.0
    method: str = "auto"
    tol: float = 1e-6
    dense_cap: int = 8000
    quad_rule: str = "tri7"


@dataclass(frozen=True)
class StudyRow:
    label: str
    family: str
    lmin_mm: str
    lmax_mm: str
    n_faces: int
    report: ErrorReport
    seconds: float

    def csv_record(self):
        return [
            self.label,
            self.family,
            self.lmin_mm,
            self.lmax_mm,
            self.n_faces,
            repr(self.report.e_l2["all"]),
            repr(self.report.e_l2["ipsi"]),
            repr(self.report.e_l2["contra"]),
            repr(self.report.e_linf["all"]),
            repr(self.report.ratio),
            repr(float(self.seconds)),
        ]


STUDY_CSV_HEADER = [
    "label",
    "family",
    "lmin",
    "lmax",
    "nFaces",
    "eL2_all",
    "eL2_ipsi",
    "eL2_contra",
    "eLinf_all",
    "ratio",
    "seconds",
]


@dataclass(frozen=True)
class StudyTable:
    rows: tuple

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(STUDY_CSV_HEADER)
            for row in self.rows:
                w.writerow(row.csv_record())

    def column(self, name):
        if name == "nFaces":
            return [r.n_faces for r in self.rows]
        if name == "seconds":
            return [r.seconds for r in self.rows]
        if name == "label":
            return [r.label for r in self.rows]
        key = {"eL2_all": "all", "eL2_ipsi": "ipsi", "eL2_contra": "contra"}.get(name)
        if key is not None:
            return [r.report.e_l2[key] for r in self.rows]
        raise KeyError(f"unknown study column {name!r}")


def normalized_point_source_field(field_obj, mesh, patch_label, medium=Medium(), velocity=1.0):
    """Rescale a reciprocal (vibrating patch) field to a unit point source.

    Divides each frequency row by the patch's equivalent monopole strength
    so fields from meshes with different patch areas are comparable to each
    other and to the analytic reference with strength 1.
    """
    strengths = np.array(
        [
            patch_source_strength(mesh, patch_label, f, medium, velocity)
            for f in field_obj.freqs_hz
        ]
    )
    return PressureField(
        freqs_hz=field_obj.freqs_hz, values=field_obj.values / strengths[:, None]
    )


def error_study(variants, scene):
    """Solve (or reuse) each variant and compare it against the reference.

    Computed fields use the reciprocal setup with the scene's patch label
    and are normalized to a unit point source before comparison.
    """
    rows = []
    for variant in variants:
        field_obj = variant.field
        seconds = variant.seconds
        if field_obj is None:
            start = time.perf_counter()
            raw = calc_hrtf_reciprocal(
                variant.mesh,
                scene.patch_label,
                scene.grid,
                scene.freqs_hz,
                medium=scene.medium,
                velocity=scene.velocity,
                method=scene.method,
                tol=scene.tol,
                dense_cap=scene.dense_cap,
                quad_rule=scene.quad_rule,
            )
            seconds = time.perf_counter() - start
            field_obj = normalized_point_source_field(
                raw, variant.mesh, scene.patch_label, scene.medium, scene.velocity
            )
        family, lmin, lmax = _parse_label(variant.label)
        rows.append(
            StudyRow(
                label=variant.label,
                family=family,
                lmin_mm=lmin,
                lmax_mm=lmax,
                n_faces=variant.mesh.n_faces,
                report=compare_fields(field_obj, scene.reference, scene.grid),
                seconds=float(seconds),
            )
        )
    return StudyTable(rows=tuple(rows))
