"""Snapshot serialization (CSV + binary), run histories and figures.

Every delimited artifact gets a rendered matplotlib figure next to it
(same stem, .png); headless Agg rendering only.

Binary dump layout (little-endian):
  magic            b"PPMHD1" (cell averages) or b"PPMHD-DG1" (modal)
  int32            dimensionality d
  int32 * d        cell counts
  float64 * d      spacings
  [int32, int32]   DG only: degree k, coefficients per component
  float64 ...      row-major cell data, 8 (or 8 * ncoef) per cell
"""

from __future__ import annotations

import struct
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .exceptions import ConfigError, MhdDomainError  # noqa: E402
from .fv import ddf_residual_field  # noqa: E402
from .grid import CartesianGrid, GridGeometry, OUTFLOW  # noqa: E402
from .states import RHO, _ienergy_raw  # noqa: E402

MAGIC_FV = b"PPMHD1"
MAGIC_DG = b"PPMHD-DG1"

_COLUMNS_BASE = ["rho", "mx", "my", "mz", "bx", "by", "bz", "E", "p",
                 "ienergy", "ddf"]


def _axis_names(dim):
    return ["i", "j", "k"][:dim], ["x", "y", "z"][:dim]


def snapshot_table(grid: CartesianGrid, eos, extra=None):
    """(column names, 2D data array) for a cell-average snapshot."""
    dim = grid.dim
    idx_names, coord_names = _axis_names(dim)
    interior = grid.interior
    en = _ienergy_raw(interior)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = eos.pressure(interior[..., RHO], en / interior[..., RHO])
    ddf = ddf_residual_field(grid)
    mesh_idx = np.meshgrid(*[np.arange(n) for n in grid.geom.counts],
                           indexing="ij")
    mesh_xyz = np.meshgrid(*[grid.geom.centers(a) for a in range(dim)],
                           indexing="ij")
    cols = [m.ravel() for m in mesh_idx] + [m.ravel() for m in mesh_xyz]
    cols += [interior[..., c].ravel() for c in range(8)]
    cols += [p.ravel(), en.ravel(), ddf.ravel()]
    if extra:
        for _, arr in extra:
            cols.append(np.asarray(arr).ravel())
    names = idx_names + coord_names + list(_COLUMNS_BASE)
    if extra:
        names += [name for name, _ in extra]
    return names, np.column_stack(cols)


def write_snapshot_csv(path, grid, eos, t, dt=None, meta=None, extra=None):
    """Write one row per cell; metadata goes into leading comment lines."""
    names, data = snapshot_table(grid, eos, extra=extra)
    lines = [f"# t={t!r}"]
    if dt is not None:
        lines.append(f"# dt={dt!r}")
    for key, val in (meta or {}).items():
        lines.append(f"# {key}={val}")
    lines.append(f"# columns: {','.join(names)}")
    header = "\n".join(lines) + "\n" + ",".join(names)
    np.savetxt(path, data, delimiter=",", header=header, comments="")
    return Path(path)


def read_snapshot_csv(path):
    """(metadata dict, structured record array) from a snapshot CSV."""
    meta = {}
    names = None
    header_lines = 0
    with open(path) as fh:
        for line in fh:
            header_lines += 1
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("columns:"):
                    continue
                if "=" in body:
                    key, val = body.split("=", 1)
                    meta[key.strip()] = val.strip()
            else:
                names = line.strip().split(",")
                break
    if names is None:
        raise ConfigError(f"{path}: no column header found")
    data = np.genfromtxt(path, delimiter=",", names=names,
                         skip_header=header_lines)
    return meta, data


def grid_from_snapshot(path):
    """Rebuild a cell-average grid (outflow boundaries) from a snapshot CSV."""
    meta, data = read_snapshot_csv(path)
    idx_cols = [n for n in ("i", "j", "k") if n in data.dtype.names]
    dim = len(idx_cols)
    counts = tuple(int(data[c].max()) + 1 for c in idx_cols)
    coords = [np.unique(data[ax]) for ax in ("x", "y", "z")[:dim]]
    spacings = tuple(float(c[1] - c[0]) if len(c) > 1 else 1.0 for c in coords)
    origin = tuple(float(c[0] - 0.5 * d) for c, d in zip(coords, spacings))
    interior = np.zeros(counts + (8,))
    flat_index = tuple(data[c].astype(int) for c in idx_cols)
    for slot, name in enumerate(_COLUMNS_BASE[:8]):
        interior[flat_index + (slot,)] = data[name]
    geom = GridGeometry(counts=counts, spacings=spacings, origin=origin)
    rules = tuple((OUTFLOW, OUTFLOW) for _ in range(dim))
    return CartesianGrid.from_interior(geom, rules, interior), meta, data


def write_binary(path, obj):
    """Dump a CartesianGrid or DgField to the binary format."""
    from .dg import DgField

    with open(path, "wb") as fh:
        if isinstance(obj, DgField):
            fh.write(MAGIC_DG)
            geom = obj.geom
            fh.write(struct.pack("<i", geom.dim))
            fh.write(struct.pack(f"<{geom.dim}i", *geom.counts))
            fh.write(struct.pack(f"<{geom.dim}d", *geom.spacings))
            ncoef = obj.coef.shape[-1]
            fh.write(struct.pack("<2i", obj.k, ncoef))
            fh.write(np.ascontiguousarray(
                obj.interior_coef, dtype="<f8").tobytes())
        elif isinstance(obj, CartesianGrid):
            fh.write(MAGIC_FV)
            geom = obj.geom
            fh.write(struct.pack("<i", geom.dim))
            fh.write(struct.pack(f"<{geom.dim}i", *geom.counts))
            fh.write(struct.pack(f"<{geom.dim}d", *geom.spacings))
            fh.write(np.ascontiguousarray(
                obj.interior, dtype="<f8").tobytes())
        else:
            raise MhdDomainError(f"cannot serialize {type(obj).__name__}")
    return Path(path)


def read_binary(path):
    """Read a binary dump; returns (kind, header dict, data array)."""
    raw = Path(path).read_bytes()
    if raw.startswith(MAGIC_DG):
        kind, off = "dg", len(MAGIC_DG)
    elif raw.startswith(MAGIC_FV):
        kind, off = "fv", len(MAGIC_FV)
    else:
        raise ConfigError(f"{path}: unknown magic bytes")
    (dim,) = struct.unpack_from("<i", raw, off)
    off += 4
    counts = struct.unpack_from(f"<{dim}i", raw, off)
    off += 4 * dim
    spacings = struct.unpack_from(f"<{dim}d", raw, off)
    off += 8 * dim
    header = {"dim": dim, "counts": counts, "spacings": spacings}
    if kind == "dg":
        k, ncoef = struct.unpack_from("<2i", raw, off)
        off += 8
        header["k"] = k
        header["ncoef"] = ncoef
        shape = counts + (8, ncoef)
    else:
        shape = counts + (8,)
    data = np.frombuffer(raw, dtype="<f8", offset=off).reshape(shape).copy()
    return kind, header, data


def write_history_csv(path, names, rows):
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        arr = arr.reshape(0, len(names))
    np.savetxt(path, arr, delimiter=",", header=",".join(names), comments="")
    return Path(path)


# ----------------------------------------------------------------------
# Figures
# ----------------------------------------------------------------------

def render_snapshot_figure(csv_path, out_path=None):
    """Line plots (1D) or pseudocolor maps (2D) of density and pressure."""
    _, data = read_snapshot_csv(csv_path)
    out_path = out_path or Path(csv_path).with_suffix(".png")
    is_2d = "j" in data.dtype.names
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    if not is_2d:
        axes[0].plot(data["x"], data["rho"], "-", lw=1)
        axes[1].plot(data["x"], data["p"], "-", lw=1, color="tab:red")
        axes[0].set_xlabel("x")
        axes[1].set_xlabel("x")
    else:
        nx = int(data["i"].max()) + 1
        ny = int(data["j"].max()) + 1
        for ax, name, cmap in ((axes[0], "rho", "viridis"),
                               (axes[1], "p", "inferno")):
            field = data[name].reshape(nx, ny)
            im = ax.pcolormesh(data["x"].reshape(nx, ny),
                               data["y"].reshape(nx, ny), field, cmap=cmap,
                               shading="nearest")
            fig.colorbar(im, ax=ax, shrink=0.85)
            ax.set_aspect("equal")
    axes[0].set_title("density")
    axes[1].set_title("pressure")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return Path(out_path)


def render_history_figure(div_csv, extrema_csv, out_path):
    div = np.genfromtxt(div_csv, delimiter=",", names=True)
    ext = np.genfromtxt(extrema_csv, delimiter=",", names=True)
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4))
    axes[0].plot(np.atleast_1d(div["t"]), np.atleast_1d(div["div_sup"]), "-")
    axes[0].set_title("divergence sup-norm")
    axes[0].set_xlabel("t")
    axes[1].plot(np.atleast_1d(ext["t"]), np.atleast_1d(ext["min_rho"]),
                 label="min rho")
    axes[1].plot(np.atleast_1d(ext["t"]), np.atleast_1d(ext["min_p"]),
                 label="min p")
    axes[1].set_yscale("symlog", linthresh=1e-14)
    axes[1].legend()
    axes[1].set_title("positivity margins")
    axes[1].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return Path(out_path)


def render_convergence_figure(rows, out_path):
    """rows: (n, l1, l2, linf) tuples."""
    arr = np.asarray(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    for col, label in ((1, "L1"), (2, "L2"), (3, "Linf")):
        ax.loglog(arr[:, 0], arr[:, col], "o-", label=label)
    ref = arr[0, 1] * (arr[:, 0] / arr[0, 0]) ** -3.0
    ax.loglog(arr[:, 0], ref, "k--", lw=0.8, label="slope -3")
    ax.set_xlabel("cells per direction")
    ax.set_ylabel("density error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return Path(out_path)


# ----------------------------------------------------------------------
# Derived plot data
# ----------------------------------------------------------------------

PLOT_KINDS = ("slice", "schlieren", "delta")


def emit_plotdata(snapshot_csv, kind, outdir=None, axis="y", index=None):
    """Derived CSV (plus a figure) from a snapshot.

    slice:     1D cut of a 2D field along a grid line
    schlieren: gradient-magnitude of log density
    delta:     ratio of the divergence-driven to the positive part of the
               post-step internal energy (needs a failure snapshot that
               carries the pre-step interface divergence and dt)
    """
    if kind not in PLOT_KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; use one of {PLOT_KINDS}")
    snapshot_csv = Path(snapshot_csv)
    outdir = Path(outdir) if outdir else snapshot_csv.parent
    outdir.mkdir(parents=True, exist_ok=True)
    meta, data = read_snapshot_csv(snapshot_csv)
    is_2d = "j" in data.dtype.names
    stem = snapshot_csv.stem

    if kind == "slice":
        if not is_2d:
            raise ConfigError("slice needs a 2D snapshot")
        nx = int(data["i"].max()) + 1
        ny = int(data["j"].max()) + 1
        if axis == "y":
            idx = ny // 2 if index is None else int(index)
            sel = data[data["j"].astype(int) == idx]
            coord = "x"
        else:
            idx = nx // 2 if index is None else int(index)
            sel = data[data["i"].astype(int) == idx]
            coord = "y"
        out_csv = outdir / f"{stem}_slice.csv"
        cols = [coord, "rho", "p", "ienergy"]
        header = (f"# slice of {snapshot_csv.name} at {axis}-index {idx}\n"
                  f"# columns: {','.join(cols)}\n" + ",".join(cols))
        np.savetxt(out_csv, np.column_stack([sel[c] for c in cols]),
                   delimiter=",", header=header, comments="")
        fig, ax = plt.subplots(figsize=(5, 3.4))
        ax.plot(sel[coord], sel["rho"], label="rho")
        ax.plot(sel[coord], sel["p"], label="p")
        ax.set_xlabel(coord)
        ax.legend()
    elif kind == "schlieren":
        out_csv = outdir / f"{stem}_schlieren.csv"
        if is_2d:
            nx = int(data["i"].max()) + 1
            ny = int(data["j"].max()) + 1
            rho = data["rho"].reshape(nx, ny)
            x = data["x"].reshape(nx, ny)
            y = data["y"].reshape(nx, ny)
            dx = float(x[1, 0] - x[0, 0]) if nx > 1 else 1.0
            dy = float(y[0, 1] - y[0, 0]) if ny > 1 else 1.0
            with np.errstate(divide="ignore", invalid="ignore"):
                logr = np.log(rho)
            gx, gy = np.gradient(logr, dx, dy)
            mag = np.hypot(gx, gy)
            cols = np.column_stack([data["i"], data["j"], data["x"],
                                    data["y"], mag.ravel()])
            names = ["i", "j", "x", "y", "schlieren"]
        else:
            x = data["x"]
            dx = float(x[1] - x[0]) if len(x) > 1 else 1.0
            with np.errstate(divide="ignore", invalid="ignore"):
                mag = np.abs(np.gradient(np.log(data["rho"]), dx))
            cols = np.column_stack([data["i"], x, mag])
            names = ["i", "x", "schlieren"]
        header = (f"# gradient magnitude of log(rho) from {snapshot_csv.name}\n"
                  f"# columns: {','.join(names)}\n" + ",".join(names))
        np.savetxt(out_csv, cols, delimiter=",", header=header, comments="")
        fig, ax = plt.subplots(figsize=(4.6, 3.8))
        if is_2d:
            im = ax.pcolormesh(x, y, mag, cmap="gray_r", shading="nearest")
            fig.colorbar(im, ax=ax, shrink=0.85)
            ax.set_aspect("equal")
        else:
            ax.plot(x, mag)
        ax.set_title("schlieren of log density")
    else:  # delta
        if "delta" not in data.dtype.names:
            raise ConfigError(
                "delta export needs a failure snapshot with a delta column")
        out_csv = outdir / f"{stem}_delta.csv"
        names = [n for n in ("i", "j", "x", "y", "delta") if n in data.dtype.names]
        header = (f"# divergence-negativity ratio from {snapshot_csv.name}\n"
                  f"# columns: {','.join(names)}\n" + ",".join(names))
        np.savetxt(out_csv, np.column_stack([data[n] for n in names]),
                   delimiter=",", header=header, comments="")
        fig, ax = plt.subplots(figsize=(4.6, 3.8))
        if is_2d:
            nx = int(data["i"].max()) + 1
            ny = int(data["j"].max()) + 1
            im = ax.pcolormesh(data["x"].reshape(nx, ny),
                               data["y"].reshape(nx, ny),
                               data["delta"].reshape(nx, ny), cmap="RdBu",
                               vmin=-2.0, vmax=2.0, shading="nearest")
            fig.colorbar(im, ax=ax, shrink=0.85)
            ax.set_aspect("equal")
        else:
            ax.plot(data["x"], data["delta"])
        ax.set_title("divergence-negativity ratio")
    fig.tight_layout()
    out_png = out_csv.with_suffix(".png")
    fig.savefig(out_png, dpi=130)
    plt.close(fig)
    return out_csv, out_png
