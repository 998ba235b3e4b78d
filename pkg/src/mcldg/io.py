"""Output writers: CSV error tables, legacy VTK field dumps and residual histories."""
from __future__ import annotations

import math
import os
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .bernstein import subcell_cells
from .law import ConservationLaw
from .space import DGSpace

CSV_COLUMNS = ("preset", "scheme", "p", "inv_h", "dof", "l1_error", "eoc")
_VTK_CELL = {"line": 3, "tri": 5, "quad": 9}


def _sci(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return f"{x:.5e}"


def format_error_csv(rows: Iterable[Mapping]) -> str:
    """Render rows with the fixed column layout; floats get 6 significant digits."""
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        missing = [c for c in CSV_COLUMNS if c not in r and c != "eoc"]
        if missing:
            raise KeyError(f"row lacks columns {missing}")
        lines.append(",".join([str(r["preset"]), str(r["scheme"]), str(int(r["p"])), str(int(r["inv_h"])),
                               str(int(r["dof"])), _sci(r["l1_error"]), _sci(r.get("eoc"))]))
    return "\n".join(lines) + "\n"


def write_error_csv(rows: Iterable[Mapping], path) -> str:
    text = format_error_csv(rows)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return os.fspath(path)


def write_residual_history(residuals: Sequence[float], path, l2: Optional[Sequence[float]] = None) -> str:
    """Two- or three-column text file ``step,r_max[,r_l2]``."""
    with open(path, "w") as fh:
        fh.write("step,r_max" + (",r_l2" if l2 is not None else "") + "\n")
        for k, r in enumerate(residuals, start=1):
            extra = f",{l2[k - 1]:.6e}" if l2 is not None else ""
            fh.write(f"{k},{r:.6e}{extra}\n")
    return os.fspath(path)


def write_vtk(space: DGSpace, U: np.ndarray, path, law: Optional[ConservationLaw] = None,
              title: str = "mcldg field") -> str:
    """Legacy ASCII unstructured grid with one point per DG node.

    Interface nodes are duplicated, cells are the Bezier subcells and point
    data are the Bernstein coefficients, i.e. exactly the limited values.
    """
    E, N = space.E, space.N
    U = np.asarray(U, dtype=float).reshape(E, N, -1)
    m = U.shape[-1]
    pts = space.node_x.reshape(E * N, space.dim)
    pts3 = np.zeros((E * N, 3))
    pts3[:, :space.dim] = pts
    local = np.array(subcell_cells(space.ref), dtype=int)          # (ns, nv)
    cells = (np.arange(E)[:, None, None] * N + local[None]).reshape(-1, local.shape[1])
    names = list(law.component_names) if law is not None else [f"u{c}" for c in range(m)]
    out = [f"# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
           f"POINTS {E * N} double"]
    out += [f"{x:.12g} {y:.12g} {z:.12g}" for x, y, z in pts3]
    nv = local.shape[1]
    out.append(f"CELLS {len(cells)} {len(cells) * (nv + 1)}")
    out += [f"{nv} " + " ".join(map(str, c)) for c in cells]
    out.append(f"CELL_TYPES {len(cells)}")
    out += [str(_VTK_CELL[space.mesh.kind])] * len(cells)
    out.append(f"POINT_DATA {E * N}")
    fields = [(names[c], U[..., c].ravel()) for c in range(m)]
    if law is not None:
        try:
            dname, dval = law.derived(U)
            fields.append((dname, np.asarray(dval).ravel()))
        except ArithmeticError:
            pass
    for name, vals in fields:
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [f"{v:.12g}" for v in vals]
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
    return os.fspath(path)
