import numpy as np
import pytest

from sgefem.io import (
    format_error,
    format_rate,
    format_table,
    read_mesh,
    read_vtk_header,
    write_csv,
    write_mesh,
    write_vtk,
)
from sgefem.mesh import build_polar_disk, build_structured_square


@pytest.mark.parametrize("mesh", [build_structured_square(3, 0.2, 4), build_polar_disk(2, 6)])
def test_mesh_roundtrip(tmp_path, mesh):
    path = tmp_path / "m.txt"
    write_mesh(path, mesh)
    back = read_mesh(path)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert np.array_equal(back.corners, mesh.corners)


def test_mesh_reader_reports_bad_lines(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("vertices 3\n0 0\n1 0\n0 1\ntriangles two\n")
    with pytest.raises(ValueError, match="line 5"):
        read_mesh(path)
    path.write_text("vertices 3\n0 0\n1 0\n")
    with pytest.raises(ValueError, match="truncated"):
        read_mesh(path)
    path.write_text("vertices 1\n0 0\n")
    with pytest.raises(ValueError, match="triangles"):
        read_mesh(path)


def test_vtk_header_and_sizes(tmp_path):
    mesh = build_structured_square(2)
    path = tmp_path / "out.vtk"
    write_vtk(path, mesh, point_data={"p": np.arange(mesh.n_vertices), "u": np.ones((mesh.n_vertices, 2))})
    head = read_vtk_header(path)
    assert head[0] == "# vtk DataFile Version 3.0"
    assert head[2:] == ["ASCII", "DATASET UNSTRUCTURED_GRID"]
    text = path.read_text()
    assert f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}" in text
    assert "VECTORS u double" in text and "SCALARS p double 1" in text
    with pytest.raises(ValueError):
        write_vtk(path, mesh, cell_data={"bad": np.zeros(3)})


def test_csv_uses_crlf(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b"], [[1, "0.5"], [2, ""]])
    assert path.read_bytes() == b"a,b\r\n1,0.5\r\n2,\r\n"


def test_formatting_helpers():
    assert format_error(0.00123456) == "1.235e-03"
    assert format_rate(1.996) == "2.00"
    assert format_rate(None) == "" and format_rate(float("nan")) == ""
    table = format_table(["x", "value"], [[1, "abc"], [22, "d"]]).splitlines()
    assert table[0] == " x  value"
    assert set(table[1]) == {"-", " "}
    assert table[2] == " 1    abc"
