"""Mesh export.

ASCII PLY with an optional per-vertex ``quality`` property carrying residual
magnitudes. Values are printed with shortest round-trip formatting, so the
text parses back to the exact floats that were written and reruns are
byte-identical.
"""

from __future__ import annotations

from .decoder import FaceMesh
from .errors import ValidationError


def write_ply(path, mesh: FaceMesh, comment: str | None = None) -> None:
    """Write a mesh as ASCII PLY.

    When the mesh carries a per-vertex scalar it is emitted as a fourth
    vertex property named ``quality``; otherwise vertices are plain x y z.
    """
    has_quality = mesh.per_vertex_scalar is not None
    if comment is not None and ("\n" in comment or "\r" in comment):
        raise ValidationError("PLY comment must be a single line")

    lines = ["ply", "format ascii 1.0"]
    if comment:
        lines.append(f"comment {comment}")
    lines.append(f"element vertex {mesh.num_vertices}")
    lines.append("property float x")
    lines.append("property float y")
    lines.append("property float z")
    if has_quality:
        lines.append("property float quality")
    lines.append(f"element face {mesh.faces.shape[0]}")
    lines.append("property list uchar int vertex_indices")
    lines.append("end_header")

    for i in range(mesh.num_vertices):
        x, y, z = mesh.vertices[i]
        row = f"{float(x)!r} {float(y)!r} {float(z)!r}"
        if has_quality:
            row += f" {float(mesh.per_vertex_scalar[i])!r}"
        lines.append(row)
    for face in mesh.faces:
        lines.append(f"3 {int(face[0])} {int(face[1])} {int(face[2])}")

    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
