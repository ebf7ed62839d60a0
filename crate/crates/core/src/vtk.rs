//! Legacy-VTK unstructured-grid writer for field visualisation: nodal
//! displacements, per-tet hardening variables, per-interface damage.

use crate::mesh::Mesh;

/// Per-cell fields accompanying the mesh. Tets come first, cohesive
/// midsurface triangles after, matching the cell order in the file.
pub struct Fields<'a> {
    /// Nodal displacements, 3 dof per node.
    pub u: &'a [f64],
    /// Tensile/compressive equivalent plastic strain per tet (zero for
    /// elastic regions).
    pub alpha: Option<&'a [(f64, f64)]>,
    /// Damage per cohesive element, averaged over its integration points.
    pub omega: Option<&'a [f64]>,
}

fn num(x: f64) -> String {
    // shortest-roundtrip formatting keeps files deterministic; VTK readers
    // reject `inf`, which never appears in converged fields
    format!("{x:?}")
}

/// Renders the mesh and fields as an ASCII legacy-VTK unstructured grid.
/// Tets are cell type 10; cohesive elements appear as their bottom-face
/// triangles (type 5) carrying the damage field.
pub fn vtk_unstructured(mesh: &Mesh, fields: &Fields) -> String {
    let n = mesh.nodes.len();
    assert_eq!(fields.u.len(), 3 * n, "displacement vector length");
    if let Some(a) = fields.alpha {
        assert_eq!(a.len(), mesh.tets.len(), "alpha field length");
    }
    if let Some(w) = fields.omega {
        assert_eq!(w.len(), mesh.cohesive.len(), "omega field length");
    }

    let ncell = mesh.tets.len() + mesh.cohesive.len();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str("rvehom fields\nASCII\nDATASET UNSTRUCTURED_GRID\n");

    s.push_str(&format!("POINTS {n} double\n"));
    for p in &mesh.nodes {
        s.push_str(&format!("{} {} {}\n", num(p.x), num(p.y), num(p.z)));
    }

    let list_len = 5 * mesh.tets.len() + 4 * mesh.cohesive.len();
    s.push_str(&format!("CELLS {ncell} {list_len}\n"));
    for t in &mesh.tets {
        let [a, b, c, d] = t.nodes;
        s.push_str(&format!("4 {a} {b} {c} {d}\n"));
    }
    for c in &mesh.cohesive {
        let [a, b, d] = c.bottom;
        s.push_str(&format!("3 {a} {b} {d}\n"));
    }
    s.push_str(&format!("CELL_TYPES {ncell}\n"));
    for _ in &mesh.tets {
        s.push_str("10\n");
    }
    for _ in &mesh.cohesive {
        s.push_str("5\n");
    }

    s.push_str(&format!("POINT_DATA {n}\n"));
    s.push_str("VECTORS displacement double\n");
    for i in 0..n {
        s.push_str(&format!(
            "{} {} {}\n",
            num(fields.u[3 * i]),
            num(fields.u[3 * i + 1]),
            num(fields.u[3 * i + 2])
        ));
    }

    s.push_str(&format!("CELL_DATA {ncell}\n"));
    s.push_str("SCALARS region int 1\nLOOKUP_TABLE default\n");
    for t in &mesh.tets {
        s.push_str(&format!("{}\n", t.region));
    }
    for _ in &mesh.cohesive {
        s.push_str("-1\n");
    }
    if let Some(alpha) = fields.alpha {
        for (name, pick) in
            [("alpha_t", 0usize), ("alpha_c", 1usize)]
        {
            s.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
            for a in alpha {
                s.push_str(&format!("{}\n", num(if pick == 0 { a.0 } else { a.1 })));
            }
            for _ in &mesh.cohesive {
                s.push_str("0.0\n");
            }
        }
    }
    if let Some(omega) = fields.omega {
        s.push_str("SCALARS omega double 1\nLOOKUP_TABLE default\n");
        for _ in &mesh.tets {
            s.push_str("0.0\n");
        }
        for w in omega {
            s.push_str(&format!("{}\n", num(*w)));
        }
    }
    s
}
