//! Neutral mesh data model: sectioned text format, validation, boundary
//! extraction, periodic-pair detection and tied-interface welding.
//!
//! Coordinates are in mm. Node/element ids are zero-based and equal their
//! line position within the section, which keeps file ordering authoritative
//! and round-trips bit-identical.

use crate::{Error, Result};
use nalgebra::Vector3;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Outward-winding faces of a positively oriented tet.
pub(crate) const TET_FACES: [[usize; 3]; 4] = [[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tet {
    pub nodes: [usize; 4],
    pub region: u32,
}

/// Zero-thickness interface element: bottom triangle then top triangle with
/// matched node order (`bottom[i]` coincides with `top[i]`). The bottom
/// winding points its normal towards the top side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohesiveTri {
    pub bottom: [usize; 3],
    pub top: [usize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicPair {
    pub master: usize,
    pub slave: usize,
    /// 0, 1 or 2 for the x, y, z period direction.
    pub axis: u8,
}

#[derive(Debug, Clone, Default)]
pub struct Mesh {
    pub nodes: Vec<Vector3<f64>>,
    pub tets: Vec<Tet>,
    pub cohesive: Vec<CohesiveTri>,
    pub face_sets: BTreeMap<String, Vec<[usize; 3]>>,
    pub periodic: Vec<PeriodicPair>,
    /// Optional per-tet material direction (yarn axis).
    pub directions: Option<Vec<Vector3<f64>>>,
}

pub fn tet_volume(nodes: &[Vector3<f64>], t: &[usize; 4]) -> f64 {
    let a = nodes[t[1]] - nodes[t[0]];
    let b = nodes[t[2]] - nodes[t[0]];
    let c = nodes[t[3]] - nodes[t[0]];
    a.cross(&b).dot(&c) / 6.0
}

/// Volume and constant shape-function gradients of a linear tet.
pub fn tet_gradients(nodes: &[Vector3<f64>], t: &[usize; 4]) -> (f64, [Vector3<f64>; 4]) {
    let j = nalgebra::Matrix3::from_columns(&[
        nodes[t[1]] - nodes[t[0]],
        nodes[t[2]] - nodes[t[0]],
        nodes[t[3]] - nodes[t[0]],
    ]);
    let vol = j.determinant() / 6.0;
    let jinv = j.try_inverse().expect("validated tets are invertible");
    // rows of J^-1 are the gradients of the barycentric coordinates 1..3
    let g1 = Vector3::new(jinv[(0, 0)], jinv[(0, 1)], jinv[(0, 2)]);
    let g2 = Vector3::new(jinv[(1, 0)], jinv[(1, 1)], jinv[(1, 2)]);
    let g3 = Vector3::new(jinv[(2, 0)], jinv[(2, 1)], jinv[(2, 2)]);
    (vol, [-(g1 + g2 + g3), g1, g2, g3])
}

#[derive(Debug, Clone)]
pub struct BoundaryFace {
    pub nodes: [usize; 3],
    pub normal: Vector3<f64>,
    pub area: f64,
    pub tet: usize,
}

impl Mesh {
    pub fn bbox(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for n in &self.nodes {
            for k in 0..3 {
                lo[k] = lo[k].min(n[k]);
                hi[k] = hi[k].max(n[k]);
            }
        }
        (lo, hi)
    }

    pub fn total_volume(&self) -> f64 {
        self.tets.iter().map(|t| tet_volume(&self.nodes, &t.nodes)).sum()
    }

    /// Structural validation of every mesh invariant that does not need a
    /// box: id ranges, tet orientation, cohesive coincidence, direction
    /// normalisation. Periodic-pair geometry is checked when pairs exist.
    pub fn validate(&self) -> Result<()> {
        let nn = self.nodes.len();
        let (lo, hi) = self.bbox();
        let diag = (hi - lo).norm().max(1e-30);
        for (i, t) in self.tets.iter().enumerate() {
            if t.nodes.iter().any(|&n| n >= nn) {
                return Err(Error::Mesh(format!("tet {i} references a missing node")));
            }
            let v = tet_volume(&self.nodes, &t.nodes);
            if v <= 0.0 {
                return Err(Error::Mesh(format!("tet {i} is inverted or degenerate (volume {v:.3e})")));
            }
        }
        for (i, c) in self.cohesive.iter().enumerate() {
            if c.bottom.iter().chain(c.top.iter()).any(|&n| n >= nn) {
                return Err(Error::Mesh(format!("cohesive element {i} references a missing node")));
            }
            for k in 0..3 {
                let d = (self.nodes[c.bottom[k]] - self.nodes[c.top[k]]).norm();
                if d > 1e-9 * diag {
                    return Err(Error::Mesh(format!(
                        "cohesive element {i} faces are not coincident (node pair {k}, gap {d:.3e})"
                    )));
                }
            }
        }
        for (name, faces) in &self.face_sets {
            for f in faces {
                if f.iter().any(|&n| n >= nn) {
                    return Err(Error::Mesh(format!("face set '{name}' references a missing node")));
                }
            }
        }
        if !self.periodic.is_empty() {
            let period = hi - lo;
            for p in &self.periodic {
                if p.master >= nn || p.slave >= nn || p.axis > 2 {
                    return Err(Error::Mesh(format!("periodic pair {p:?} out of range")));
                }
                let mut want = Vector3::zeros();
                want[p.axis as usize] = period[p.axis as usize];
                let d = self.nodes[p.slave] - self.nodes[p.master] - want;
                if d.norm() > 1e-8 * diag {
                    return Err(Error::Mesh(format!(
                        "periodic pair {:?} offset differs from the period vector by {:.3e}",
                        p,
                        d.norm()
                    )));
                }
            }
        }
        if let Some(dirs) = &self.directions {
            if dirs.len() != self.tets.len() {
                return Err(Error::Mesh("directions must cover every tet".into()));
            }
            for (i, d) in dirs.iter().enumerate() {
                if (d.norm() - 1.0).abs() > 1e-10 {
                    return Err(Error::Mesh(format!("direction {i} is not unit length")));
                }
            }
        }
        Ok(())
    }

    /// Faces incident to exactly one tet, with outward normals. Cohesive
    /// interface faces are internal and excluded even though node splitting
    /// leaves them single-sided.
    pub fn boundary_faces(&self) -> Result<Vec<BoundaryFace>> {
        let mut count: BTreeMap<[usize; 3], (usize, [usize; 3], usize)> = BTreeMap::new();

        for (ti, t) in self.tets.iter().enumerate() {
            for f in TET_FACES {
                let tri = [t.nodes[f[0]], t.nodes[f[1]], t.nodes[f[2]]];
                let mut key = tri;
                key.sort_unstable();
                let e = count.entry(key).or_insert((0, tri, ti));
                e.0 += 1;
                e.1 = tri;
                e.2 = ti;
            }
        }
        let mut cohesive_faces: Vec<[usize; 3]> = Vec::new();
        for c in &self.cohesive {
            for tri in [c.bottom, c.top] {
                let mut key = tri;
                key.sort_unstable();
                cohesive_faces.push(key);
            }
        }
        cohesive_faces.sort_unstable();

        let mut out = Vec::new();
        for (key, (n, tri, ti)) in count {
            if n > 2 {
                return Err(Error::Mesh(format!(
                    "non-manifold boundary: face {key:?} shared by {n} tets"
                )));
            }
            if n != 1 || cohesive_faces.binary_search(&key).is_ok() {
                continue;
            }
            let p0 = self.nodes[tri[0]];
            let e1 = self.nodes[tri[1]] - p0;
            let e2 = self.nodes[tri[2]] - p0;
            let nv = e1.cross(&e2);
            let area = 0.5 * nv.norm();
            if area < 1e-16 {
                return Err(Error::Mesh(format!("degenerate boundary face {tri:?}")));
            }
            let mut normal = nv.normalize();
            // orient away from the owning tet's centroid
            let t = &self.tets[ti];
            let centroid = (self.nodes[t.nodes[0]]
                + self.nodes[t.nodes[1]]
                + self.nodes[t.nodes[2]]
                + self.nodes[t.nodes[3]])
                / 4.0;
            let face_c = (p0 + self.nodes[tri[1]] + self.nodes[tri[2]]) / 3.0;
            if normal.dot(&(face_c - centroid)) < 0.0 {
                normal = -normal;
            }
            out.push(BoundaryFace { nodes: tri, normal, area, tet: ti });
        }
        Ok(out)
    }

    /// Welds every cohesive pair into a single node (tied interface): the
    /// inverse of cohesive insertion, used for `ft = inf` runs. Surviving
    /// nodes keep their relative order.
    pub fn weld_cohesive(&self) -> Mesh {
        let nn = self.nodes.len();
        // union-find, root = smallest id
        let mut parent: Vec<usize> = (0..nn).collect();
        fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for c in &self.cohesive {
            for k in 0..3 {
                let a = find(&mut parent, c.bottom[k]);
                let b = find(&mut parent, c.top[k]);
                if a != b {
                    let (lo, hi) = (a.min(b), a.max(b));
                    parent[hi] = lo;
                }
            }
        }
        let mut remap = vec![usize::MAX; nn];
        let mut nodes = Vec::new();
        for i in 0..nn {
            if find(&mut parent, i) == i {
                remap[i] = nodes.len();
                nodes.push(self.nodes[i]);
            }
        }
        for i in 0..nn {
            let r = find(&mut parent, i);
            remap[i] = remap[r];
        }
        let tets = self
            .tets
            .iter()
            .map(|t| Tet { nodes: t.nodes.map(|n| remap[n]), region: t.region })
            .collect();
        let face_sets = self
            .face_sets
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().map(|f| f.map(|n| remap[n])).collect()))
            .collect();
        let mut periodic: Vec<PeriodicPair> = self
            .periodic
            .iter()
            .map(|p| PeriodicPair { master: remap[p.master], slave: remap[p.slave], axis: p.axis })
            .collect();
        periodic.sort_unstable_by_key(|p| (p.axis, p.master, p.slave));
        periodic.dedup();
        Mesh {
            nodes,
            tets,
            cohesive: Vec::new(),
            face_sets,
            periodic,
            directions: self.directions.clone(),
        }
    }

    /// Warnings for thin elements (minimum dihedral angle below 5 degrees).
    pub fn quality_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut count = 0usize;
        let mut worst = f64::INFINITY;
        for t in &self.tets {
            let mut min_angle = f64::INFINITY;

            let mut normals = [Vector3::zeros(); 4];
            for (k, f) in TET_FACES.iter().enumerate() {
                let p0 = self.nodes[t.nodes[f[0]]];
                let e1 = self.nodes[t.nodes[f[1]]] - p0;
                let e2 = self.nodes[t.nodes[f[2]]] - p0;
                normals[k] = e1.cross(&e2).normalize();
            }
            for i in 0..4 {
                for j in (i + 1)..4 {
                    // interior dihedral between faces i and j
                    let ang = std::f64::consts::PI - normals[i].dot(&normals[j]).clamp(-1.0, 1.0).acos();
                    min_angle = min_angle.min(ang);
                }
            }
            if min_angle < 5.0_f64.to_radians() {
                count += 1;
                worst = worst.min(min_angle);
            }
        }
        if count > 0 {
            out.push(format!(
                "{count} tets have a dihedral angle below 5 deg (worst {:.2} deg)",
                worst.to_degrees()
            ));
        }
        out
    }
}

/// Bijective opposite-face matching for each axis of the box. Coincident
/// duplicated nodes (cohesive splitting on a boundary face) are told apart by
/// the region multiset of their attached tets; an unresolvable ambiguity or
/// an unmatched node is an error naming the node.
pub fn detect_periodic_pairs(
    mesh: &Mesh,
    lo: Vector3<f64>,
    hi: Vector3<f64>,
    tol: f64,
) -> Result<Vec<PeriodicPair>> {
    let bfaces = mesh.boundary_faces()?;
    let mut on_boundary = vec![false; mesh.nodes.len()];
    for f in &bfaces {
        for &n in &f.nodes {
            on_boundary[n] = true;
        }
    }
    // region signature of each node
    let mut signature: Vec<Vec<u32>> = vec![Vec::new(); mesh.nodes.len()];
    for t in &mesh.tets {
        for &n in &t.nodes {
            signature[n].push(t.region);
        }
    }
    for s in &mut signature {
        s.sort_unstable();
        s.dedup();
    }

    let mut pairs = Vec::new();
    for axis in 0..3usize {
        let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
        let mut lo_nodes: Vec<usize> = Vec::new();
        let mut hi_nodes: Vec<usize> = Vec::new();
        for (i, p) in mesh.nodes.iter().enumerate() {
            if !on_boundary[i] {
                continue;
            }
            if (p[axis] - lo[axis]).abs() <= tol {
                lo_nodes.push(i);
            }
            if (p[axis] - hi[axis]).abs() <= tol {
                hi_nodes.push(i);
            }
        }
        if lo_nodes.len() != hi_nodes.len() {
            return Err(Error::Mesh(format!(
                "axis {axis}: {} nodes on the low face vs {} on the high face",
                lo_nodes.len(),
                hi_nodes.len()
            )));
        }
        let proj_key = |i: usize| (mesh.nodes[i][a1], mesh.nodes[i][a2]);
        let sort_cmp = |&x: &usize, &y: &usize| {
            let (ax, ay) = proj_key(x);
            let (bx, by) = proj_key(y);
            ax.partial_cmp(&bx).unwrap().then(ay.partial_cmp(&by).unwrap()).then(x.cmp(&y))
        };
        lo_nodes.sort_unstable_by(sort_cmp);
        hi_nodes.sort_unstable_by(sort_cmp);

        let mut used = vec![false; hi_nodes.len()];
        for &m in &lo_nodes {
            let (mx, my) = proj_key(m);
            // geometric candidates within tol in the sorted list
            let start = hi_nodes.partition_point(|&s| mesh.nodes[s][a1] < mx - tol);
            let mut cands: Vec<usize> = Vec::new();
            for (k, &s) in hi_nodes.iter().enumerate().skip(start) {
                let (sx, sy) = proj_key(s);
                if sx > mx + tol {
                    break;
                }
                if !used[k] && (sy - my).abs() <= tol {
                    cands.push(k);
                }
            }
            // coincident duplicates (split interfaces reaching the boundary)
            // are told apart by region signature; a unique geometric match
            // stands on its own since opposite faces may touch different
            // regions
            if cands.len() > 1 {
                cands.retain(|&k| signature[hi_nodes[k]] == signature[m]);
            }
            match cands[..] {
                [k] => {
                    used[k] = true;
                    pairs.push(PeriodicPair { master: m, slave: hi_nodes[k], axis: axis as u8 });
                }
                [] => {
                    return Err(Error::Mesh(format!(
                        "axis {axis}: node {m} at ({:.6}, {:.6}) has no periodic partner",
                        mx, my
                    )));
                }
                _ => {
                    return Err(Error::Mesh(format!(
                        "axis {axis}: node {m} matches several opposite nodes with equal region signature"
                    )));
                }
            }
        }
    }
    Ok(pairs)
}

/// Parses the sectioned text format. Ids must equal the line index within
/// their section; errors carry 1-based line numbers.
pub fn parse_mesh(text: &str) -> Result<Mesh> {
    enum Section {
        None,
        Nodes(usize),
        Tets(usize),
        Cohesive(usize),
        FaceSet(String, usize),
        Periodic(usize),
        Directions(usize),
    }
    let mut mesh = Mesh::default();
    let mut dirs: Vec<(usize, Vector3<f64>)> = Vec::new();
    let mut section = Section::None;
    let mut remaining = 0usize;

    let err = |line: usize, msg: &str| Error::MeshParse { line, msg: msg.to_string() };

    for (li, raw) in text.lines().enumerate() {
        let line_no = li + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if remaining == 0 {
            // expect a section header
            let need = |n: usize| -> Result<usize> {
                if toks.len() != n {
                    return Err(err(line_no, "malformed section header"));
                }
                toks[n - 1]
                    .parse::<usize>()
                    .map_err(|_| err(line_no, "section count is not an integer"))
            };
            section = match toks[0] {
                "NODES" => Section::Nodes(need(2)?),
                "TETS" => Section::Tets(need(2)?),
                "COHESIVE" => Section::Cohesive(need(2)?),
                "FACESET" => {
                    if toks.len() != 3 {
                        return Err(err(line_no, "FACESET needs a name and a count"));
                    }
                    let n = toks[2]
                        .parse::<usize>()
                        .map_err(|_| err(line_no, "section count is not an integer"))?;
                    Section::FaceSet(toks[1].to_string(), n)
                }
                "PERIODIC" => Section::Periodic(need(2)?),
                "DIRECTIONS" => Section::Directions(need(2)?),
                other => return Err(err(line_no, &format!("unknown section '{other}'"))),
            };
            remaining = match &section {
                Section::Nodes(n)
                | Section::Tets(n)
                | Section::Cohesive(n)
                | Section::Periodic(n)
                | Section::Directions(n)
                | Section::FaceSet(_, n) => *n,
                Section::None => 0,
            };
            if let Section::FaceSet(name, _) = &section {
                if mesh.face_sets.contains_key(name) {
                    return Err(err(line_no, &format!("duplicate face set '{name}'")));
                }
                mesh.face_sets.insert(name.clone(), Vec::new());
            }
            continue;
        }

        let ints = |k: usize| -> Result<Vec<usize>> {
            if toks.len() != k {
                return Err(err(line_no, &format!("expected {k} fields")));
            }
            toks.iter()
                .map(|t| t.parse::<usize>().map_err(|_| err(line_no, "bad integer field")))
                .collect()
        };

        match &mut section {
            Section::Nodes(_) => {
                if toks.len() != 4 {
                    return Err(err(line_no, "node line needs: id x y z"));
                }
                let id: usize =
                    toks[0].parse().map_err(|_| err(line_no, "bad node id"))?;
                if id != mesh.nodes.len() {
                    return Err(err(line_no, "node ids must be consecutive from 0"));
                }
                let mut c = [0.0f64; 3];
                for k in 0..3 {
                    c[k] = toks[k + 1]
                        .parse()
                        .map_err(|_| err(line_no, "bad node coordinate"))?;
                }
                mesh.nodes.push(Vector3::new(c[0], c[1], c[2]));
            }
            Section::Tets(_) => {
                let v = ints(6)?;
                if v[0] != mesh.tets.len() {
                    return Err(err(line_no, "tet ids must be consecutive from 0"));
                }
                mesh.tets.push(Tet {
                    nodes: [v[1], v[2], v[3], v[4]],
                    region: v[5] as u32,
                });
            }
            Section::Cohesive(_) => {
                let v = ints(7)?;
                if v[0] != mesh.cohesive.len() {
                    return Err(err(line_no, "cohesive ids must be consecutive from 0"));
                }
                mesh.cohesive.push(CohesiveTri {
                    bottom: [v[1], v[2], v[3]],
                    top: [v[4], v[5], v[6]],
                });
            }
            Section::FaceSet(name, _) => {
                let v = ints(3)?;
                mesh.face_sets.get_mut(name).unwrap().push([v[0], v[1], v[2]]);
            }
            Section::Periodic(_) => {
                let v = ints(3)?;
                if v[2] > 2 {
                    return Err(err(line_no, "periodic axis must be 0, 1 or 2"));
                }
                mesh.periodic.push(PeriodicPair { master: v[0], slave: v[1], axis: v[2] as u8 });
            }
            Section::Directions(_) => {
                if toks.len() != 4 {
                    return Err(err(line_no, "direction line needs: elem dx dy dz"));
                }
                let id: usize = toks[0].parse().map_err(|_| err(line_no, "bad element id"))?;
                let mut c = [0.0f64; 3];
                for k in 0..3 {
                    c[k] = toks[k + 1]
                        .parse()
                        .map_err(|_| err(line_no, "bad direction component"))?;
                }
                dirs.push((id, Vector3::new(c[0], c[1], c[2])));
            }
            Section::None => unreachable!(),
        }
        remaining -= 1;
    }
    if remaining != 0 {
        return Err(Error::Mesh("file ended inside a section".into()));
    }
    if mesh.nodes.is_empty() {
        return Err(Error::Mesh("mesh has no NODES section".into()));
    }
    if !dirs.is_empty() {
        let mut d = vec![None; mesh.tets.len()];
        for (id, v) in dirs {
            if id >= mesh.tets.len() {
                return Err(Error::Mesh(format!("direction for missing element {id}")));
            }
            d[id] = Some(v);
        }
        if d.iter().any(|x| x.is_none()) {
            return Err(Error::Mesh("DIRECTIONS must cover every tet".into()));
        }
        mesh.directions = Some(d.into_iter().map(|x| x.unwrap()).collect());
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Serialises in canonical section order; floats use the shortest
/// round-tripping representation so parse(serialise(m)) is bit-identical.
pub fn serialise_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "NODES {}", mesh.nodes.len());
    for (i, n) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {}", i, n[0], n[1], n[2]);
    }
    let _ = writeln!(s, "TETS {}", mesh.tets.len());
    for (i, t) in mesh.tets.iter().enumerate() {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {}",
            i, t.nodes[0], t.nodes[1], t.nodes[2], t.nodes[3], t.region
        );
    }
    if !mesh.cohesive.is_empty() {
        let _ = writeln!(s, "COHESIVE {}", mesh.cohesive.len());
        for (i, c) in mesh.cohesive.iter().enumerate() {
            let _ = writeln!(
                s,
                "{} {} {} {} {} {} {}",
                i, c.bottom[0], c.bottom[1], c.bottom[2], c.top[0], c.top[1], c.top[2]
            );
        }
    }
    for (name, faces) in &mesh.face_sets {
        let _ = writeln!(s, "FACESET {} {}", name, faces.len());
        for f in faces {
            let _ = writeln!(s, "{} {} {}", f[0], f[1], f[2]);
        }
    }
    if !mesh.periodic.is_empty() {
        let _ = writeln!(s, "PERIODIC {}", mesh.periodic.len());
        for p in &mesh.periodic {
            let _ = writeln!(s, "{} {} {}", p.master, p.slave, p.axis);
        }
    }
    if let Some(dirs) = &mesh.directions {
        let _ = writeln!(s, "DIRECTIONS {}", dirs.len());
        for (i, d) in dirs.iter().enumerate() {
            let _ = writeln!(s, "{} {} {} {}", i, d[0], d[1], d[2]);
        }
    }
    s
}

/// A unit cube split into 6 positively oriented tets around the main
/// diagonal; handy for fixtures and tests.
pub fn unit_cube_mesh(region: u32) -> Mesh {
    box_mesh(Vector3::new(1.0, 1.0, 1.0), 1, 1, 1, region)
}

/// Structured box mesh: nx*ny*nz cells, 6 tets per cell (Kuhn split along
/// the global diagonal so opposite faces triangulate identically).
pub fn box_mesh(size: Vector3<f64>, nx: usize, ny: usize, nz: usize, region: u32) -> Mesh {
    let idx = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut nodes = Vec::new();
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push(Vector3::new(
                    size[0] * i as f64 / nx as f64,
                    size[1] * j as f64 / ny as f64,
                    size[2] * k as f64 / nz as f64,
                ));
            }
        }
    }
    // Kuhn triangulation: 6 tets per cube, all sharing the cell diagonal
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut tets = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let base = [i, j, k];
                for perm in PERMS {
                    // path from (0,0,0) to (1,1,1) adding axes in perm order
                    let mut corners = [[0usize; 3]; 4];
                    for step in 0..3 {
                        corners[step + 1] = corners[step];
                        corners[step + 1][perm[step]] += 1;
                    }
                    let ids = corners.map(|c| idx(base[0] + c[0], base[1] + c[1], base[2] + c[2]));
                    let mut t = Tet { nodes: ids, region };
                    if tet_volume(&nodes, &t.nodes) < 0.0 {
                        t.nodes.swap(2, 3);
                    }
                    tets.push(t);
                }
            }
        }
    }
    Mesh { nodes, tets, ..Default::default() }
}
