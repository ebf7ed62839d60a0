//! Tetrahedral meshing of unidirectional fibre RVEs.
//!
//! The cross-section is triangulated in 2D with the fibre circles as
//! constraint polylines, then extruded along z into prism layers, each prism
//! split into three tets. Boundary traces are mirrored on opposite cell edges
//! so the result pairs periodically, and the fibre-matrix circles form the
//! locus where zero-thickness cohesive elements can be inserted.

use crate::layout::FibreLayout;
use crate::mesh::{detect_periodic_pairs, tet_volume, CohesiveTri, Mesh, Tet, TET_FACES};
use crate::{Error, Result};
use nalgebra::Vector3;
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};
use std::collections::{BTreeMap, BTreeSet};

pub const MATRIX_REGION: u32 = 0;
pub const FIBRE_REGION: u32 = 1;

/// Chord count used to polygonise a circle of radius `r` at edge length `e`.
fn segment_count(r: f64, e: f64) -> usize {
    ((2.0 * std::f64::consts::PI * r / e).ceil() as usize).max(12)
}

/// A polygonised fibre circle (possibly clipped by the cell rectangle).
struct ImagePoly {
    c: (f64, f64),
    r: f64,
    /// vertices counterclockwise by angle: (x, y, 2d node)
    verts: Vec<(f64, f64, usize)>,
    /// chord[k]: verts[k] -> verts[k+1 mod n] runs along the circle (a
    /// constraint edge); false means the gap runs along the cell boundary
    chord: Vec<bool>,
}

/// Rigid toroidal shift of the layout keeping every circle clear of
/// tangency with the cell edges and corners. The layout is periodic, so any
/// shift reproduces the same pattern.
fn choose_shift(layout: &FibreLayout, edge: f64) -> Result<(f64, f64)> {
    let (lx, ly) = layout.cell;
    if layout.fibres.is_empty() {
        return Ok((0.0, 0.0));
    }
    let margin_of = |shift: (f64, f64)| -> f64 {
        let mut worst = f64::INFINITY;
        for &(x, y, r) in &layout.fibres {
            let wx = (x + shift.0).rem_euclid(lx);
            let wy = (y + shift.1).rem_euclid(ly);
            let dx = wx.min(lx - wx);
            let dy = wy.min(ly - wy);
            // distance to the nearest vertical/horizontal edge line and to
            // the nearest corner under the wrap-around metric
            let dc = (dx * dx + dy * dy).sqrt();
            worst = worst.min((dx - r).abs());
            worst = worst.min((dy - r).abs());
            worst = worst.min((dc - r).abs());
        }
        worst
    };
    let n = 64;
    let mut best = ((0.0, 0.0), -1.0f64);
    for i in 0..n {
        for j in 0..n {
            let s = (i as f64 * lx / n as f64, j as f64 * ly / n as f64);
            let m = margin_of(s);
            if m > best.1 {
                best = (s, m);
            }
        }
    }
    let chord = |r: f64| 2.0 * std::f64::consts::PI * r / segment_count(r, edge) as f64;
    let need = layout.fibres.iter().map(|f| 0.3 * chord(f.2)).fold(f64::INFINITY, f64::min);
    if best.1 < need {
        return Err(Error::Generate(format!(
            "no rigid shift keeps fibres clear of cell-edge tangency at this \
             resolution (best margin {:.3e}, need {:.3e})",
            best.1, need
        )));
    }
    Ok(best.0)
}

struct CrossSection {
    points: Vec<(f64, f64)>,
    tris: Vec<[usize; 3]>,
    regions: Vec<u32>,
}

fn build_cross_section(layout: &FibreLayout, target_edge: f64) -> Result<CrossSection> {
    let (lx, ly) = layout.cell;
    let eps = 1e-9 * lx.max(ly);
    let images = layout.images();

    // near-tangent fibre pairs leave no room for even a single element
    for i in 0..images.len() {
        for j in (i + 1)..images.len() {
            let (a, b) = (&images[i], &images[j]);
            let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
            let gap = d - a.2 - b.2;
            if gap < 1e-3 * a.2.min(b.2) {
                return Err(Error::Generate(format!(
                    "fibres {} and {} overlap or are nearly tangent (surface gap {gap:.3e})",
                    a.3, b.3
                )));
            }
        }
    }

    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
    let mut node_of: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    let mut handles = Vec::new();
    let mut points = Vec::new();
    let get_node = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>,
                        node_of: &mut BTreeMap<(u64, u64), usize>,
                        points: &mut Vec<(f64, f64)>,
                        handles: &mut Vec<spade::handles::FixedVertexHandle>,
                        x: f64,
                        y: f64|
     -> Result<usize> {
        if let Some(&id) = node_of.get(&(x.to_bits(), y.to_bits())) {
            return Ok(id);
        }
        let h = cdt
            .insert(Point2::new(x, y))
            .map_err(|e| Error::Generate(format!("cannot insert point ({x}, {y}): {e:?}")))?;
        let id = points.len();
        node_of.insert((x.to_bits(), y.to_bits()), id);
        points.push((x, y));
        handles.push(h);
        Ok(id)
    };

    // fibre circles: polygonised, clipped against the cell rectangle
    let mut polys = Vec::new();
    for &(cx, cy, r, _parent) in &images {
        let e_seg = 2.0 * std::f64::consts::PI * r / segment_count(r, target_edge) as f64;
        // crossings with the four boundary lines, via chord formulas so the
        // same values appear bit-identically on both members of a wrapped
        // image pair
        let mut cross: Vec<(f64, f64, f64)> = Vec::new(); // (angle, x, y)
        for xl in [0.0, lx] {
            let dx = xl - cx;
            if dx.abs() < r {
                let hw = (r * r - dx * dx).sqrt();
                for yy in [cy - hw, cy + hw] {
                    cross.push(((yy - cy).atan2(dx), xl, yy.clamp(0.0, ly)));
                }
            }
        }
        for yl in [0.0, ly] {
            let dy = yl - cy;
            if dy.abs() < r {
                let hw = (r * r - dy * dy).sqrt();
                for xx in [cx - hw, cx + hw] {
                    cross.push((dy.atan2(xx - cx), xx.clamp(0.0, lx), yl));
                }
            }
        }
        let mut verts: Vec<(f64, f64, usize)> = Vec::new();
        let mut chord: Vec<bool> = Vec::new();
        if cross.is_empty() {
            // fully interior circle
            let n = segment_count(r, target_edge);
            for k in 0..n {
                let a = std::f64::consts::PI * (2.0 * k as f64 + 1.0) / n as f64;
                let (x, y) = (cx + r * a.cos(), cy + r * a.sin());
                let id = get_node(&mut cdt, &mut node_of, &mut points, &mut handles, x, y)?;
                verts.push((x, y, id));
                chord.push(true);
            }
        } else {
            cross.sort_by(|a, b| a.0.total_cmp(&b.0));
            cross.dedup_by(|a, b| (a.1 - b.1).abs() < eps && (a.2 - b.2).abs() < eps);
            // kept arcs in angle order; each is a run of polygon vertices
            // from one crossing to the next
            let m = cross.len();
            let mut arcs: Vec<Vec<(f64, f64, usize)>> = Vec::new();
            for k in 0..m {
                let (a0, x0, y0) = cross[k];
                let (mut a1, x1, y1) = cross[(k + 1) % m];
                if a1 <= a0 {
                    a1 += 2.0 * std::f64::consts::PI;
                }
                let mid = 0.5 * (a0 + a1);
                let (mx, my) = (cx + r * mid.cos(), cy + r * mid.sin());
                if !(mx > eps && mx < lx - eps && my > eps && my < ly - eps) {
                    continue;
                }
                let mut arc = Vec::new();
                arc.push((x0, y0, get_node(&mut cdt, &mut node_of, &mut points, &mut handles, x0, y0)?));
                let nsub = ((r * (a1 - a0) / e_seg).ceil() as usize).max(1);
                for s in 1..nsub {
                    let a = a0 + (a1 - a0) * s as f64 / nsub as f64;
                    let (x, y) = (cx + r * a.cos(), cy + r * a.sin());
                    arc.push((x, y, get_node(&mut cdt, &mut node_of, &mut points, &mut handles, x, y)?));
                }
                arc.push((x1, y1, get_node(&mut cdt, &mut node_of, &mut points, &mut handles, x1, y1)?));
                arcs.push(arc);
            }
            if arcs.is_empty() {
                continue; // image only grazes the cell from outside
            }
            // arc interiors are circle chords; each arc's final vertex
            // connects to the next arc along the cell boundary instead
            for arc in &arcs {
                for (w, v) in arc.iter().enumerate() {
                    verts.push(*v);
                    chord.push(w + 1 < arc.len());
                }
            }
        }
        polys.push(ImagePoly { c: (cx, cy), r, verts, chord });
    }

    // cell corners
    let corner_ids = [
        get_node(&mut cdt, &mut node_of, &mut points, &mut handles, 0.0, 0.0)?,
        get_node(&mut cdt, &mut node_of, &mut points, &mut handles, lx, 0.0)?,
        get_node(&mut cdt, &mut node_of, &mut points, &mut handles, lx, ly)?,
        get_node(&mut cdt, &mut node_of, &mut points, &mut handles, 0.0, ly)?,
    ];

    // boundary subdivision: one shared partition per axis so opposite edges
    // carry identical traces; uniform points yield to circle crossings
    let specials = |polys: &[ImagePoly], vertical: bool| -> Vec<f64> {
        let mut s = Vec::new();
        for p in polys {
            for &(x, y, _) in &p.verts {
                if vertical && (x == 0.0 || x == lx) {
                    s.push(y);
                }
                if !vertical && (y == 0.0 || y == ly) {
                    s.push(x);
                }
            }
        }
        s
    };
    let uniform = |l: f64, specials: &[f64]| -> Vec<f64> {
        let k = (l / target_edge).ceil().max(1.0) as usize;
        let h = l / k as f64;
        (1..k)
            .map(|j| j as f64 * h)
            .filter(|&u| specials.iter().all(|&s| (u - s).abs() > 0.45 * h))
            .collect()
    };
    let ys = uniform(ly, &specials(&polys, true));
    let xs = uniform(lx, &specials(&polys, false));

    let mut edge_chains: Vec<Vec<(f64, usize)>> = vec![Vec::new(); 4]; // x=0, x=lx, y=0, y=ly
    for (e, &(x0, c0, c1)) in
        [(0.0, corner_ids[0], corner_ids[3]), (lx, corner_ids[1], corner_ids[2])].iter().enumerate()
    {
        let chain = &mut edge_chains[e];
        chain.push((0.0, c0));
        chain.push((ly, c1));
        for &u in &ys {
            let id = get_node(&mut cdt, &mut node_of, &mut points, &mut handles, x0, u)?;
            chain.push((u, id));
        }
    }
    for (e, &(y0, c0, c1)) in
        [(0.0, corner_ids[0], corner_ids[1]), (ly, corner_ids[3], corner_ids[2])].iter().enumerate()
    {
        let chain = &mut edge_chains[e + 2];
        chain.push((0.0, c0));
        chain.push((lx, c1));
        for &u in &xs {
            let id = get_node(&mut cdt, &mut node_of, &mut points, &mut handles, u, y0)?;
            chain.push((u, id));
        }
    }
    // circle crossing points already sit on the edges; fold them in
    for p in &polys {
        for &(x, y, id) in &p.verts {
            if x == 0.0 {
                edge_chains[0].push((y, id));
            } else if x == lx {
                edge_chains[1].push((y, id));
            }
            if y == 0.0 {
                edge_chains[2].push((x, id));
            } else if y == ly {
                edge_chains[3].push((x, id));
            }
        }
    }

    // interior Steiner grid for element quality, keeping clear of the
    // constraint polylines
    let kx = (lx / target_edge).ceil().max(1.0) as usize;
    let ky = (ly / target_edge).ceil().max(1.0) as usize;
    let (hx, hy) = (lx / kx as f64, ly / ky as f64);
    for i in 0..kx {
        for j in 0..ky {
            let (x, y) = ((i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy);
            let m = hx.max(hy);
            if x < 0.55 * m || x > lx - 0.55 * m || y < 0.55 * m || y > ly - 0.55 * m {
                continue;
            }
            let clear = polys.iter().all(|p| {
                let d = ((x - p.c.0).powi(2) + (y - p.c.1).powi(2)).sqrt();
                (d - p.r).abs() > 0.55 * m
            });
            if clear {
                get_node(&mut cdt, &mut node_of, &mut points, &mut handles, x, y)?;
            }
        }
    }

    // constraints: boundary chains then circle chords
    let add = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>,
                   a: usize,
                   b: usize|
     -> Result<()> {
        if a == b {
            return Ok(());
        }
        if !cdt.can_add_constraint(handles[a], handles[b]) {
            return Err(Error::Generate(format!(
                "constraint between ({:?}) and ({:?}) crosses another constraint; \
                 fibre circles too close for the requested edge length",
                points[a], points[b]
            )));
        }
        cdt.add_constraint(handles[a], handles[b]);
        Ok(())
    };
    for chain in &mut edge_chains {
        chain.sort_by(|a, b| a.0.total_cmp(&b.0));
        chain.dedup_by_key(|v| v.1);
        for w in 0..chain.len() - 1 {
            add(&mut cdt, chain[w].1, chain[w + 1].1)?;
        }
    }
    for p in &polys {
        let n = p.verts.len();
        for k in 0..n {
            if p.chord[k] {
                add(&mut cdt, p.verts[k].2, p.verts[(k + 1) % n].2)?;
            }
        }
    }

    // extract triangles; region by convex membership in any circle polygon
    let mut tris = Vec::new();
    let mut regions = Vec::new();
    for f in cdt.inner_faces() {
        let vs = f.vertices();
        let tri = [vs[0].fix().index(), vs[1].fix().index(), vs[2].fix().index()];
        let cx = (points[tri[0]].0 + points[tri[1]].0 + points[tri[2]].0) / 3.0;
        let cy = (points[tri[0]].1 + points[tri[1]].1 + points[tri[2]].1) / 3.0;
        let fibre = polys.iter().any(|p| {
            let d2 = (cx - p.c.0).powi(2) + (cy - p.c.1).powi(2);
            if d2 >= p.r * p.r {
                return false;
            }
            let n = p.verts.len();
            (0..n).filter(|&k| p.chord[k]).all(|k| {
                let (ax, ay, _) = p.verts[k];
                let (bx, by, _) = p.verts[(k + 1) % n];
                (bx - ax) * (cy - ay) - (by - ay) * (cx - ax) >= 0.0
            })
        });
        tris.push(tri);
        regions.push(if fibre { FIBRE_REGION } else { MATRIX_REGION });
    }
    Ok(CrossSection { points, tris, regions })
}

/// Triangulates the cross-section and extrudes it `nz` layers along z.
/// Opposite boundary traces match, so `detect_periodic_pairs` succeeds on
/// the result; fibre tets are tagged `FIBRE_REGION`, matrix `MATRIX_REGION`.
pub fn mesh_ud_rve(layout: &FibreLayout, lz: f64, nz: usize, target_edge: f64) -> Result<Mesh> {
    if !(lz > 0.0) || !lz.is_finite() {
        return Err(Error::Params(format!("depth must be positive, got {lz}")));
    }
    if nz == 0 {
        return Err(Error::Params("need at least one layer".into()));
    }
    if !(target_edge > 0.0) || !target_edge.is_finite() {
        return Err(Error::Params(format!("target edge must be positive, got {target_edge}")));
    }
    let shift = choose_shift(layout, target_edge)?;
    let shifted = FibreLayout {
        cell: layout.cell,
        fibres: layout
            .fibres
            .iter()
            .map(|&(x, y, r)| {
                ((x + shift.0).rem_euclid(layout.cell.0), (y + shift.1).rem_euclid(layout.cell.1), r)
            })
            .collect(),
    };
    let cs = build_cross_section(&shifted, target_edge)?;

    let n2 = cs.points.len();
    let dz = lz / nz as f64;
    let mut nodes = Vec::with_capacity(n2 * (nz + 1));
    for k in 0..=nz {
        let z = k as f64 * dz;
        for &(x, y) in &cs.points {
            nodes.push(Vector3::new(x, y, z));
        }
    }
    let mut tets = Vec::with_capacity(cs.tris.len() * nz * 3);
    for k in 0..nz {
        let (lo, hi) = (k * n2, (k + 1) * n2);
        for (t, &tri) in cs.tris.iter().enumerate() {
            let mut s = tri;
            s.sort_unstable();
            let [i, j, m] = s;
            let (bi, bj, bm) = (lo + i, lo + j, lo + m);
            let (ti, tj, tm) = (hi + i, hi + j, hi + m);
            // consistent-diagonal split: every vertical quad takes the
            // diagonal from its lower-indexed bottom corner to the
            // higher-indexed top corner, so neighbouring prisms conform
            for mut cand in [[bi, bj, bm, tm], [bi, bj, tm, tj], [bi, tj, tm, ti]] {
                if tet_volume(&nodes, &cand) < 0.0 {
                    cand.swap(2, 3);
                }
                tets.push(Tet { nodes: cand, region: cs.regions[t] });
            }
        }
    }
    let mut mesh = Mesh {
        nodes,
        tets,
        cohesive: Vec::new(),
        face_sets: BTreeMap::new(),
        periodic: Vec::new(),
        directions: None,
    };
    let (lo, hi) = mesh.bbox();
    mesh.periodic = detect_periodic_pairs(&mesh, lo, hi, 1e-9 * (hi - lo).norm())?;
    mesh.validate()?;
    Ok(mesh)
}

/// Splits the interface between two regions with zero-thickness cohesive
/// elements: interface nodes are duplicated, every `interface.1`-side tet is
/// reattached to the duplicates, and one cohesive element per interface face
/// ties the halves together. Periodic pairs are recomputed afterwards since
/// coincident duplicates on the outer boundary pair by region signature.
pub fn insert_cohesive(mesh: &Mesh, interface: (u32, u32)) -> Result<Mesh> {
    let (ra, rb) = interface;
    if ra == rb {
        return Err(Error::Params("interface regions must differ".into()));
    }
    // face -> owning (tet, region, outward winding) pairs
    let mut owners: BTreeMap<[usize; 3], Vec<(usize, u32, [usize; 3])>> = BTreeMap::new();
    for (ti, t) in mesh.tets.iter().enumerate() {
        for f in TET_FACES {
            let tri = [t.nodes[f[0]], t.nodes[f[1]], t.nodes[f[2]]];
            let mut key = tri;
            key.sort_unstable();
            owners.entry(key).or_default().push((ti, t.region, tri));
        }
    }
    // interface faces, wound outward from the `ra` side
    let mut iface: Vec<[usize; 3]> = Vec::new();
    for own in owners.values() {
        if own.len() == 2 {
            let (a, b) = (&own[0], &own[1]);
            if a.1 == ra && b.1 == rb {
                iface.push(a.2);
            } else if a.1 == rb && b.1 == ra {
                iface.push(b.2);
            }
        }
    }
    if iface.is_empty() {
        return Err(Error::Mesh(format!("no interface faces between regions {ra} and {rb}")));
    }
    let split: BTreeSet<usize> = iface.iter().flatten().copied().collect();

    let mut out = mesh.clone();
    let mut dup: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in &split {
        dup.insert(v, out.nodes.len());
        let p = out.nodes[v];
        out.nodes.push(p);
    }
    for t in &mut out.tets {
        if t.region == rb {
            for n in &mut t.nodes {
                if let Some(&d) = dup.get(n) {
                    *n = d;
                }
            }
        }
    }
    for f in &iface {
        let bottom = *f;
        let top = [dup[&f[0]], dup[&f[1]], dup[&f[2]]];
        out.cohesive.push(CohesiveTri { bottom, top });
    }
    if !mesh.periodic.is_empty() {
        let (lo, hi) = out.bbox();
        out.periodic = detect_periodic_pairs(&out, lo, hi, 1e-9 * (hi - lo).norm())?;
    }
    out.validate()?;
    Ok(out)
}
