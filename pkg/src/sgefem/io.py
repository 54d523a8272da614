"""Plain-text mesh files, VTK legacy export and result tables."""

import csv
import io

import numpy as np

from .mesh import Mesh


def write_mesh(path, mesh):
    """Sections ``vertices N`` / ``triangles N`` / ``corners N``, one entity per line."""
    lines = [f"vertices {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [" ".join(str(i) for i in t) for t in mesh.triangles.tolist()]
    lines.append(f"corners {len(mesh.corners)}")
    lines += [str(int(c)) for c in mesh.corners]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path, name=None):
    with open(path) as fh:
        tokens = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    sections = {}
    k = 0
    while k < len(tokens):
        head = tokens[k]
        if len(head) != 2 or not head[1].isdigit():
            raise ValueError(f"line {k + 1}: expected '<section> <count>', got {' '.join(head)!r}")
        count = int(head[1])
        sections[head[0]] = tokens[k + 1 : k + 1 + count]
        if len(sections[head[0]]) != count:
            raise ValueError(f"section {head[0]!r} is truncated")
        k += 1 + count
    for required in ("vertices", "triangles"):
        if required not in sections:
            raise ValueError(f"missing section {required!r}")
    vertices = np.array(sections["vertices"], dtype=float)
    triangles = np.array(sections["triangles"], dtype=np.int64)
    corners = np.array(sections.get("corners", []), dtype=np.int64).ravel()
    return Mesh.from_triangles(vertices, triangles, corners, name=name or str(path))


def write_vtk(path, mesh, point_data=None, cell_data=None, title="sgefem"):
    """VTK legacy ASCII unstructured grid (version 3.0) with linear triangles.

    ``point_data``/``cell_data`` map names to arrays of shape ``(N,)``
    (scalars) or ``(N, 2)`` (vectors, padded with a zero z component).
    """
    out = io.StringIO()
    out.write("# vtk DataFile Version 3.0\n")
    out.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
    out.write(f"POINTS {mesh.n_vertices} double\n")
    for x, y in mesh.vertices:
        out.write(f"{x:.16e} {y:.16e} 0\n")
    T = mesh.n_triangles
    out.write(f"CELLS {T} {4 * T}\n")
    for a, b, c in mesh.triangles:
        out.write(f"3 {a} {b} {c}\n")
    out.write(f"CELL_TYPES {T}\n")
    out.write("5\n" * T)
    for kind, data, count in (("POINT_DATA", point_data, mesh.n_vertices), ("CELL_DATA", cell_data, T)):
        if not data:
            continue
        out.write(f"{kind} {count}\n")
        for name, arr in data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape[0] != count:
                raise ValueError(f"{name}: expected {count} values, got {arr.shape[0]}")
            if arr.ndim == 1:
                out.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                out.writelines(f"{v:.16e}\n" for v in arr)
            else:
                out.write(f"VECTORS {name} double\n")
                out.writelines(f"{u:.16e} {v:.16e} 0\n" for u, v in arr[:, :2])
    with open(path, "w", newline="\n") as fh:
        fh.write(out.getvalue())


def read_vtk_header(path):
    """First four lines of a legacy VTK file (version line, title, format, dataset)."""
    with open(path) as fh:
        return [next(fh).rstrip("\n") for _ in range(4)]


def format_error(value):
    return f"{value:.3e}"


def format_rate(value):
    return "" if value is None or not np.isfinite(value) else f"{value:.2f}"


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        writer.writerows(rows)


def format_table(header, rows):
    """Right-aligned text table."""
    cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
