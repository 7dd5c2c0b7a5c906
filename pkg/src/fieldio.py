"""
Field and report I/O.

BFLD: magic b"BFLD", u32 version (1), u32 n, f64 L, u8 dtype (0 = complex128),
then n*n little-endian complex128 values, row-major. Boundary traces and plot
slices are CSV files written through pandas.
"""

import logging
import os
import re

import numpy as np
import pandas as pd
import plotly.express as px

from .beltrami import QCMap
from .divform import MatrixFieldA, k_mu, mu_from_a
from .errors import ConfigError, FieldFormatError
from .field_core import TWO_PI, BoundaryFunction, ComplexField, GridSpec

logger = logging.getLogger(__name__)

MAGIC = b"BFLD"
VERSION = 1
DTYPE_COMPLEX128 = 0
HEADER = np.dtype([("magic", "S4"), ("version", "<u4"), ("n", "<u4"), ("L", "<f8"), ("dtype", "u1")])
VALUE_DTYPE = np.dtype("<c16")


# ---------------------------------------------------------------------------
# BFLD fields
# ---------------------------------------------------------------------------

def field_bytes(field):
    header = np.zeros(1, dtype=HEADER)
    header[0] = (MAGIC, VERSION, field.grid.n, field.grid.L, DTYPE_COMPLEX128)
    return header.tobytes() + np.ascontiguousarray(field.values, dtype=VALUE_DTYPE).tobytes()


def export_field(field, path):
    with open(path, "wb") as fh:
        fh.write(field_bytes(field))
    logger.debug("wrote %s (n=%d)", path, field.grid.n)
    return path


def parse_field(raw, source="<bytes>", **kwargs):
    if len(raw) < HEADER.itemsize:
        raise FieldFormatError(f"{source}: truncated header, expected {HEADER.itemsize} bytes, got {len(raw)}")
    header = np.frombuffer(raw[:HEADER.itemsize], dtype=HEADER)[0]
    if bytes(header["magic"]) != MAGIC:
        raise FieldFormatError(f"{source}: bad magic {bytes(header['magic'])!r}")
    if int(header["version"]) != VERSION:
        raise FieldFormatError(f"{source}: unsupported version {int(header['version'])}")
    if int(header["dtype"]) != DTYPE_COMPLEX128:
        raise FieldFormatError(f"{source}: unsupported dtype code {int(header['dtype'])}")
    n, L = int(header["n"]), float(header["L"])
    expected = HEADER.itemsize + n * n * VALUE_DTYPE.itemsize
    if len(raw) != expected:
        raise FieldFormatError(f"{source}: expected {expected} bytes for n={n}, got {len(raw)}")
    try:
        grid = GridSpec(L, n)
    except ConfigError as exc:
        raise FieldFormatError(f"{source}: {exc}") from exc
    values = np.frombuffer(raw[HEADER.itemsize:], dtype=VALUE_DTYPE).reshape(n, n)
    return ComplexField(grid, values, **kwargs)


def import_field(path, **kwargs):
    """Read a BFLD file; kwargs (support_radius, tail, mass) are passed to ComplexField."""
    with open(path, "rb") as fh:
        raw = fh.read()
    return parse_field(raw, source=os.fspath(path), **kwargs)


# ---------------------------------------------------------------------------
# Sidecars
# ---------------------------------------------------------------------------

def write_sidecar(path, values):
    """key=value lines, sorted by key."""
    lines = [f"{key}={_format(values[key])}" for key in sorted(values)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_sidecar(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for number, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FieldFormatError(f"{path}:{number}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _format(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (complex, np.complexfloating)):
        value = complex(value)
        return f"{value.real!r},{value.imag!r}"
    return str(value)


def _field_descriptor(name, field):
    return {f"{name}.tail": field.tail, f"{name}.mass": complex(field.mass),
            f"{name}.support": "" if field.support_radius is None else float(field.support_radius)}


def _field_kwargs(meta, name):
    if f"{name}.tail" not in meta:
        return {}
    re_part, im_part = meta[f"{name}.mass"].split(",")
    support = meta[f"{name}.support"]
    return {"tail": meta[f"{name}.tail"], "mass": complex(float(re_part), float(im_part)),
            "support_radius": float(support) if support else None}


def _paths(directory, stem, names):
    return {name: os.path.join(directory, f"{stem}_{name}.bfld") for name in names}


# ---------------------------------------------------------------------------
# Maps and matrix fields
# ---------------------------------------------------------------------------

QCMAP_FIELDS = ("f", "fz", "fzbar", "J")


def save_qcmap(f, directory, stem="map"):
    """Four BFLD fields plus a key=value sidecar <stem>.txt."""
    os.makedirs(directory, exist_ok=True)
    paths = _paths(directory, stem, QCMAP_FIELDS)
    meta = {"k": float(f.k), "L": float(f.grid.L), "n": f.grid.n, "residual": float(f.residual),
            "iterations": int(f.iterations), "kind": f.kind}
    for name in QCMAP_FIELDS:
        field = getattr(f, name)
        export_field(field, paths[name])
        meta.update(_field_descriptor(name, field))
    write_sidecar(os.path.join(directory, f"{stem}.txt"), meta)
    return paths


def load_qcmap(directory, stem="map"):
    meta = read_sidecar(os.path.join(directory, f"{stem}.txt"))
    paths = _paths(directory, stem, QCMAP_FIELDS)
    fields = {name: import_field(paths[name], **_field_kwargs(meta, name)) for name in QCMAP_FIELDS}
    grid = fields["f"].grid
    fz = fields["fz"].values
    mu = np.divide(fields["fzbar"].values, fz, out=np.zeros_like(fz), where=np.abs(fz) > 0)
    return QCMap(grid, fields["f"], fields["fz"], fields["fzbar"], fields["J"], ComplexField(grid, mu),
                 float(meta["k"]), residual=float(meta.get("residual", 0.0)),
                 iterations=int(meta.get("iterations", 0)), kind=meta.get("kind", "principal"))


MATRIX_FIELDS = ("a11", "a12", "a22")


def save_matrix_field(A, directory, stem="A"):
    """Three real BFLD fields plus a sidecar with k, max K_mu and the det deviation."""
    os.makedirs(directory, exist_ok=True)
    paths = _paths(directory, stem, MATRIX_FIELDS)
    for name in MATRIX_FIELDS:
        export_field(ComplexField(A.grid, getattr(A, name)), paths[name])
    mu = mu_from_a(A)
    write_sidecar(os.path.join(directory, f"{stem}.txt"), {
        "k": mu.max_abs(), "K_mu_max": float(np.max(k_mu(mu))), "det_deviation_max": A.det_deviation,
        "L": float(A.grid.L), "n": A.grid.n,
    })
    return paths


def load_matrix_field(directory, stem="A"):
    paths = _paths(directory, stem, MATRIX_FIELDS)
    fields = [import_field(paths[name]) for name in MATRIX_FIELDS]
    return MatrixFieldA(fields[0].grid, *(np.real(fd.values) for fd in fields))


# ---------------------------------------------------------------------------
# Boundary traces
# ---------------------------------------------------------------------------

def boundary_frame(bf, M=512):
    t = TWO_PI * (np.arange(M) + 0.5) / M
    values = bf.evaluate(t)
    return pd.DataFrame({"t": t, "re": values.real, "im": values.imag})


def write_boundary_csv(bf, path, M=512):
    boundary_frame(bf, M).to_csv(path, index=False, float_format="%.17g")
    return path


def read_boundary_csv(path, unimodular=False, singular_points=(), n_samples=None):
    """Periodic linear interpolation of a t,re,im trace."""
    frame = pd.read_csv(path)
    missing = {"t", "re", "im"} - set(frame.columns)
    if missing:
        raise FieldFormatError(f"{path}: boundary trace lacks columns {sorted(missing)}")
    t = np.mod(frame["t"].to_numpy(dtype=float), TWO_PI)
    order = np.argsort(t)
    t = t[order]
    values = (frame["re"].to_numpy(dtype=float) + 1j * frame["im"].to_numpy(dtype=float))[order]
    if t.size < 2:
        raise FieldFormatError(f"{path}: boundary trace needs at least two rows")

    def trace(s):
        s = np.mod(np.asarray(s, dtype=float), TWO_PI)
        out = np.interp(s, t, values.real, period=TWO_PI) + 1j * np.interp(s, t, values.imag, period=TWO_PI)
        return out / np.abs(out) if unimodular else out

    return BoundaryFunction.from_function(trace, n_samples=n_samples, singular_points=singular_points,
                                          unimodular=unimodular, exact=False)


# ---------------------------------------------------------------------------
# Plot slices
# ---------------------------------------------------------------------------

_SLICE = re.compile(r"^\s*(boundary_trace|radial_ray|full_grid_downsampled)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


def parse_slice(text):
    """"radial_ray(0.5)" -> ("radial_ray", 0.5); missing parameters get defaults."""
    match = _SLICE.match(str(text))
    if not match:
        raise ConfigError(f"unknown plot slice {text!r}")
    kind, arg = match.group(1), match.group(2)
    if kind == "boundary_trace":
        return kind, None
    if kind == "radial_ray":
        return kind, float(arg) if arg else 0.0
    return kind, int(arg) if arg else 4


def plot_frame(field, slice_kind, param=None, samples=512):
    grid = field.grid
    if slice_kind == "boundary_trace":
        t = TWO_PI * np.arange(samples) / samples
        values = field.evaluate(np.exp(1j * t))
        return pd.DataFrame({"t": t, "re": values.real, "im": values.imag})
    if slice_kind == "radial_ray":
        angle = float(param or 0.0)
        r = np.linspace(0.0, 0.5 * grid.L, samples // 2 + 1)
        values = field.evaluate(r * np.exp(1j * angle))
        return pd.DataFrame({"r": r, "re": values.real, "im": values.imag})
    if slice_kind == "full_grid_downsampled":
        factor = int(param or 1)
        if factor < 1 or factor > grid.n:
            raise ConfigError(f"downsample factor {factor} must lie in [1, n={grid.n}]")
        Z = grid.Z[::factor, ::factor]
        values = field.values[::factor, ::factor]
        return pd.DataFrame({"x": Z.real.ravel(), "y": Z.imag.ravel(),
                             "re": values.real.ravel(), "im": values.imag.ravel()})
    raise ConfigError(f"unknown plot slice {slice_kind!r}")


def export_plot_csv(field, path, slice="boundary_trace", samples=512):
    kind, param = parse_slice(slice) if isinstance(slice, str) else slice
    frame = plot_frame(field, kind, param, samples)
    frame.to_csv(path, index=False, float_format="%.17g")
    return frame


def export_plot_html(frame, path, title=""):
    """Interactive plotly view of a plot slice frame."""
    if "r" in frame:
        fig = px.line(frame, x="r", y=["re", "im"], title=title)
    elif "t" in frame:
        fig = px.line(frame, x="t", y=["re", "im"], title=title)
    else:
        pivot = frame.pivot(index="y", columns="x", values="re")
        fig = px.imshow(pivot.to_numpy(), x=pivot.columns, y=pivot.index, origin="lower", title=title)
    fig.write_html(path, include_plotlyjs="cdn", div_id="field-plot")
    return path


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def write_report(frame, path, summary=None):
    """CSV table; summary items follow as trailing '# key=value' lines."""
    frame.to_csv(path, index=False, float_format="%.17g")
    if summary:
        with open(path, "a", encoding="utf-8") as fh:
            for key in sorted(summary):
                fh.write(f"# {key}={_format(summary[key])}\n")
    return path


def read_report(path):
    return pd.read_csv(path, comment="#")
