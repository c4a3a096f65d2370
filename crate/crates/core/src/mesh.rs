//! Conforming triangulations of a two-subdomain partition `Omega = Omega+ U Omega-`.
//!
//! Every triangle carries a side tag. Interface edges are stored oriented so
//! that their right-hand normal points from `Omega-` into `Omega+`; boundary
//! edges are oriented so that their right-hand normal points outward.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }

    fn tag(self) -> i32 {
        match self {
            Side::Plus => 1,
            Side::Minus => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub side: Side,
}

/// What the mesh was built from. Routines that need closed-form geometry
/// (radial references, skin expansions) check this.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Disk of radius `r_outer` containing the disk of radius `r_sigma` as `Omega-`.
    Annulus {
        r_sigma: f64,
        r_outer: f64,
    },
    /// Square `(-w, w)^2`, `Omega-` the quadrants where `x y < 0`.
    Checkerboard {
        half_width: f64,
    },
    /// Square `(-w, w)^2` with a polygonal inclusion `Omega-`.
    SquarePolygon {
        half_width: f64,
        polygon: Vec<[f64; 2]>,
    },
    Unknown,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<Triangle>,
    interface_edges: Vec<[usize; 2]>,
    boundary_edges: Vec<[usize; 2]>,
    geometry: Geometry,
    h_max: f64,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Local edges of a triangle in counter-clockwise order.
const LOCAL_EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

impl Mesh {
    /// Builds a mesh from nodes and tagged triangles, orienting triangles
    /// counter-clockwise and deriving interface and boundary edges.
    pub fn from_parts(nodes: Vec<[f64; 2]>, mut triangles: Vec<Triangle>, geometry: Geometry) -> Result<Self> {
        for (t, tri) in triangles.iter_mut().enumerate() {
            for &v in &tri.vertices {
                if v >= nodes.len() {
                    return Err(Error::Geometry(format!("triangle {t} references missing node {v}")));
                }
            }
            let [a, b, c] = tri.vertices;
            if signed_area(nodes[a], nodes[b], nodes[c]) < 0.0 {
                tri.vertices.swap(1, 2);
            }
        }
        let (interface_edges, boundary_edges) = derive_edges(&nodes, &triangles)?;
        let h_max = triangles
            .iter()
            .flat_map(|t| LOCAL_EDGES.iter().map(move |&(i, j)| (t.vertices[i], t.vertices[j])))
            .map(|(a, b)| dist(nodes[a], nodes[b]))
            .fold(0.0, f64::max);
        let mesh = Mesh {
            nodes,
            triangles,
            interface_edges,
            boundary_edges,
            geometry,
            h_max,
        };
        mesh.check_invariants()?;
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn interface_edges(&self) -> &[[usize; 2]] {
        &self.interface_edges
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].vertices;
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn triangle_centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].vertices;
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    pub fn area(&self, side: Side) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| self.triangles[t].side == side)
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Total length of the interface.
    pub fn interface_length(&self) -> f64 {
        self.interface_edges
            .iter()
            .map(|e| dist(self.nodes[e[0]], self.nodes[e[1]]))
            .sum()
    }

    /// `mask[i]` is true if node `i` belongs to a triangle of `side`.
    pub fn side_mask(&self, side: Side) -> Vec<bool> {
        let mut m = vec![false; self.nodes.len()];
        for t in self.triangles.iter().filter(|t| t.side == side) {
            for &v in &t.vertices {
                m[v] = true;
            }
        }
        m
    }

    pub fn interface_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.nodes.len()];
        for e in &self.interface_edges {
            m[e[0]] = true;
            m[e[1]] = true;
        }
        m
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.nodes.len()];
        for e in &self.boundary_edges {
            m[e[0]] = true;
            m[e[1]] = true;
        }
        m
    }

    /// Sorted indices of the interface nodes.
    pub fn interface_nodes(&self) -> Vec<usize> {
        mask_to_indices(&self.interface_mask())
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        mask_to_indices(&self.boundary_mask())
    }

    /// Copy of the mesh with the roles of `Omega+` and `Omega-` exchanged.
    pub fn swap_sides(&self) -> Result<Mesh> {
        let triangles = self
            .triangles
            .iter()
            .map(|t| Triangle {
                vertices: t.vertices,
                side: t.side.other(),
            })
            .collect();
        let geometry = match &self.geometry {
            Geometry::Annulus { .. } | Geometry::SquarePolygon { .. } => Geometry::Unknown,
            g => g.clone(),
        };
        Mesh::from_parts(self.nodes.clone(), triangles, geometry)
    }

    /// Verifies tags, orientation, interface/boundary structure and the
    /// Euler characteristic of a disk.
    pub fn check_invariants(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            if self.triangle_area(t) <= 0.0 {
                return Err(Error::Geometry(format!("triangle {t} is degenerate")));
            }
        }
        let (iface, bnd) = derive_edges(&self.nodes, &self.triangles)?;
        if iface != self.interface_edges {
            return Err(Error::Geometry(
                "interface edge list does not match triangle tags".into(),
            ));
        }
        if bnd != self.boundary_edges {
            return Err(Error::Geometry("boundary edge list does not match triangles".into()));
        }
        let mut used = vec![false; self.nodes.len()];
        for t in &self.triangles {
            for &v in &t.vertices {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::Geometry(format!("node {v} belongs to no triangle")));
        }
        // interface polylines: closed away from the outer boundary
        let on_boundary = self.boundary_mask();
        let mut degree = vec![0usize; self.nodes.len()];
        for e in &self.interface_edges {
            degree[e[0]] += 1;
            degree[e[1]] += 1;
        }
        for (v, &d) in degree.iter().enumerate() {
            if d % 2 == 1 && !on_boundary[v] {
                return Err(Error::Geometry(format!("interface polyline ends at interior node {v}")));
            }
        }
        let edges = count_edges(&self.triangles);
        let euler = self.nodes.len() as i64 - edges as i64 + self.triangles.len() as i64;
        if euler != 1 {
            return Err(Error::Geometry(format!("Euler characteristic {euler}, expected 1")));
        }
        Ok(())
    }

    /// SHA-256 of the text serialization.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("contrastlab-mesh v1\n");
        let _ = writeln!(s, "vertices {}", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(s, "{:?} {:?}", p[0], p[1]);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let [a, b, c] = t.vertices;
            let _ = writeln!(s, "{a} {b} {c} {}", t.side.tag());
        }
        let _ = writeln!(s, "interface_edges {}", self.interface_edges.len());
        for e in &self.interface_edges {
            let _ = writeln!(s, "{} {}", e[0], e[1]);
        }
        let _ = writeln!(s, "boundary_edges {}", self.boundary_edges.len());
        for e in &self.boundary_edges {
            let _ = writeln!(s, "{} {}", e[0], e[1]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines
                .next()
                .ok_or_else(|| Error::format(0, format!("unexpected end of file, expected {what}")))
        };
        let (ln, header) = next("header")?;
        if header != "contrastlab-mesh v1" {
            return Err(Error::format(ln, "expected header `contrastlab-mesh v1`"));
        }
        fn count(line: (usize, &str), key: &str) -> Result<usize> {
            let (ln, l) = line;
            let mut it = l.split(' ');
            if it.next() != Some(key) {
                return Err(Error::format(ln, format!("expected `{key} <count>`")));
            }
            let n = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::format(ln, "bad count"))?;
            if it.next().is_some() {
                return Err(Error::format(ln, "trailing tokens"));
            }
            Ok(n)
        }
        fn tokens<T: std::str::FromStr>(line: (usize, &str), k: usize) -> Result<Vec<T>> {
            let (ln, l) = line;
            let toks: Vec<&str> = l.split(' ').collect();
            if toks.len() != k {
                return Err(Error::format(ln, format!("expected {k} fields, found {}", toks.len())));
            }
            toks.iter()
                .map(|t| {
                    t.parse::<T>()
                        .map_err(|_| Error::format(ln, format!("cannot parse `{t}`")))
                })
                .collect()
        }
        let nv = count(next("vertices")?, "vertices")?;
        let mut nodes = Vec::with_capacity(nv);
        for _ in 0..nv {
            let v: Vec<f64> = tokens(next("vertex")?, 2)?;
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::format(0, "non-finite coordinate"));
            }
            nodes.push([v[0], v[1]]);
        }
        let nt = count(next("triangles")?, "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let line = next("triangle")?;
            let v: Vec<i64> = tokens(line, 4)?;
            let side = match v[3] {
                1 => Side::Plus,
                -1 => Side::Minus,
                _ => return Err(Error::format(line.0, "side tag must be 1 or -1")),
            };
            let mut idx = [0usize; 3];
            for k in 0..3 {
                if v[k] < 0 || v[k] as usize >= nv {
                    return Err(Error::format(line.0, "vertex index out of range"));
                }
                idx[k] = v[k] as usize;
            }
            triangles.push(Triangle { vertices: idx, side });
        }
        let mut read_edges = |key: &str| -> Result<Vec<[usize; 2]>> {
            let ne = count(next(key)?, key)?;
            let mut out = Vec::with_capacity(ne);
            for _ in 0..ne {
                let line = next("edge")?;
                let v: Vec<usize> = tokens(line, 2)?;
                if v[0] >= nv || v[1] >= nv {
                    return Err(Error::format(line.0, "edge index out of range"));
                }
                out.push([v[0], v[1]]);
            }
            Ok(out)
        };
        let interface_edges = read_edges("interface_edges")?;
        let boundary_edges = read_edges("boundary_edges")?;
        if let Some((ln, l)) = lines.next() {
            if !(l.is_empty() && lines.next().is_none()) {
                return Err(Error::format(ln, "trailing content"));
            }
        }
        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = tri.vertices;
            if signed_area(nodes[a], nodes[b], nodes[c]) <= 0.0 {
                return Err(Error::Geometry(format!("triangle {t} is not counter-clockwise")));
            }
        }
        let h_max = triangles
            .iter()
            .flat_map(|t| LOCAL_EDGES.iter().map(move |&(i, j)| (t.vertices[i], t.vertices[j])))
            .map(|(a, b)| dist(nodes[a], nodes[b]))
            .fold(0.0, f64::max);
        let mesh = Mesh {
            nodes,
            triangles,
            interface_edges,
            boundary_edges,
            geometry: Geometry::Unknown,
            h_max,
        };
        mesh.check_invariants()?;
        Ok(mesh)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Mesh::from_text(&text)
    }

    /// Largest radial extent of a `Omega-` triangle meeting the strip
    /// `r_sigma - width <= r <= r_sigma`; meaningful on annulus meshes.
    pub fn radial_resolution_near_interface(&self, r_sigma: f64, width: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for t in self.triangles.iter().filter(|t| t.side == Side::Minus) {
            let rs: Vec<f64> = t.vertices.iter().map(|&v| norm(self.nodes[v])).collect();
            let rmin = rs.iter().copied().fold(f64::INFINITY, f64::min);
            let rmax = rs.iter().copied().fold(0.0, f64::max);
            if rmax >= r_sigma - width {
                worst = worst.max(rmax - rmin);
            }
        }
        worst
    }
}

pub(crate) fn norm(p: [f64; 2]) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

pub(crate) fn mask_to_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect()
}

fn count_edges(triangles: &[Triangle]) -> usize {
    let mut set: Vec<(usize, usize)> = triangles
        .iter()
        .flat_map(|t| {
            LOCAL_EDGES.iter().map(move |&(i, j)| {
                let (a, b) = (t.vertices[i], t.vertices[j]);
                (a.min(b), a.max(b))
            })
        })
        .collect();
    set.sort_unstable();
    set.dedup();
    set.len()
}

type EdgeLists = (Vec<[usize; 2]>, Vec<[usize; 2]>);

fn derive_edges(nodes: &[[f64; 2]], triangles: &[Triangle]) -> Result<EdgeLists> {
    let _ = nodes;
    let mut map: BTreeMap<(usize, usize), Vec<(usize, [usize; 2])>> = BTreeMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for &(i, j) in &LOCAL_EDGES {
            let (a, b) = (tri.vertices[i], tri.vertices[j]);
            map.entry((a.min(b), a.max(b))).or_default().push((t, [a, b]));
        }
    }
    let mut iface = Vec::new();
    let mut bnd = Vec::new();
    for (key, owners) in &map {
        match owners.as_slice() {
            [(_, e)] => bnd.push(*e),
            [(t1, e1), (t2, e2)] => {
                let (s1, s2) = (triangles[*t1].side, triangles[*t2].side);
                if e1 != &[e2[1], e2[0]] {
                    return Err(Error::Geometry(format!(
                        "edge {key:?} is traversed in the same direction by two triangles"
                    )));
                }
                if s1 != s2 {
                    iface.push(if s1 == Side::Minus { *e1 } else { *e2 });
                }
            }
            _ => {
                return Err(Error::Geometry(format!(
                    "edge {key:?} is shared by {} triangles",
                    owners.len()
                )))
            }
        }
    }
    Ok((iface, bnd))
}

/// One ring of an annulus-type mesh: radius and number of equally spaced nodes.
#[derive(Debug, Clone, Copy)]
struct Ring {
    radius: f64,
    count: usize,
}

fn ring_count(r: f64, h: f64) -> usize {
    ((2.0 * PI * r / h).round() as usize).max(6)
}

/// Triangulates concentric rings; triangles between ring `k-1` and `k` are
/// `Omega-` when `k <= sigma_ring`.
fn build_from_rings(rings: &[Ring], sigma_ring: usize, geometry: Geometry) -> Result<Mesh> {
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut start = Vec::with_capacity(rings.len());
    for ring in rings {
        start.push(nodes.len());
        if ring.count == 1 {
            nodes.push([0.0, 0.0]);
            continue;
        }
        for k in 0..ring.count {
            let th = 2.0 * PI * k as f64 / ring.count as f64;
            nodes.push([ring.radius * th.cos(), ring.radius * th.sin()]);
        }
    }
    let mut triangles = Vec::new();
    for k in 1..rings.len() {
        let side = if k <= sigma_ring { Side::Minus } else { Side::Plus };
        let (na, nb) = (rings[k - 1].count, rings[k].count);
        let (sa, sb) = (start[k - 1], start[k]);
        if na == 1 {
            for j in 0..nb {
                triangles.push(Triangle {
                    vertices: [sa, sb + j, sb + (j + 1) % nb],
                    side,
                });
            }
            continue;
        }
        let (mut i, mut j) = (0usize, 0usize);
        while i < na || j < nb {
            let next_a = (i + 1) as f64 / na as f64;
            let next_b = (j + 1) as f64 / nb as f64;
            if j < nb && (i == na || next_b <= next_a) {
                triangles.push(Triangle {
                    vertices: [sa + i % na, sb + j, sb + (j + 1) % nb],
                    side,
                });
                j += 1;
            } else {
                triangles.push(Triangle {
                    vertices: [sa + i % na, sb + j % nb, sa + (i + 1) % na],
                    side,
                });
                i += 1;
            }
        }
    }
    Mesh::from_parts(nodes, triangles, geometry)
}

fn check_annulus(r_sigma: f64, r_outer: f64) -> Result<()> {
    if !(r_sigma > 0.0 && r_outer > r_sigma && r_outer.is_finite()) {
        return Err(Error::Geometry(format!(
            "annulus needs 0 < r_sigma < r_outer, got r_sigma = {r_sigma}, r_outer = {r_outer}"
        )));
    }
    Ok(())
}

/// Quasi-uniform disk mesh with `Omega-` the disk of radius `r_sigma`; the
/// mesh size halves with each level.
pub fn build_annulus(r_sigma: f64, r_outer: f64, level: u32) -> Result<Mesh> {
    build_annulus_sized(r_sigma, r_outer, r_sigma / (2.0 * 2f64.powi(level as i32)))
}

/// Quasi-uniform disk mesh with target size `h`.
pub fn build_annulus_sized(r_sigma: f64, r_outer: f64, h: f64) -> Result<Mesh> {
    check_annulus(r_sigma, r_outer)?;
    if !(h > 0.0 && h < r_sigma) {
        return Err(Error::Geometry(format!("mesh size {h} out of range")));
    }
    let n_minus = (r_sigma / h).round() as usize;
    let n_plus = (((r_outer - r_sigma) / h).round() as usize).max(1);
    let mut rings = vec![Ring { radius: 0.0, count: 1 }];
    for i in 1..=n_minus {
        let r = r_sigma * i as f64 / n_minus as f64;
        rings.push(Ring {
            radius: r,
            count: ring_count(r, h),
        });
    }
    for i in 1..=n_plus {
        let r = r_sigma + (r_outer - r_sigma) * i as f64 / n_plus as f64;
        rings.push(Ring {
            radius: r,
            count: ring_count(r, h),
        });
    }
    build_from_rings(&rings, n_minus, Geometry::Annulus { r_sigma, r_outer })
}

/// Radial grading of `Omega-` towards the interface.
#[derive(Debug, Clone, Copy)]
pub struct LayerGrading {
    /// Radial spacing at the interface.
    pub h_min: f64,
    /// Depth below the interface meshed with constant spacing `h_min`.
    pub depth: f64,
    /// Geometric growth factor of the radial spacing beyond `depth`.
    pub growth: f64,
}

/// Disk mesh with bulk size `h` and radial spacing graded down to
/// `grading.h_min` just inside the interface. Rings inside the graded layer
/// share the node count of the interface ring, which keeps the thin
/// elements close to right triangles.
pub fn build_annulus_graded(r_sigma: f64, r_outer: f64, h: f64, grading: LayerGrading) -> Result<Mesh> {
    check_annulus(r_sigma, r_outer)?;
    if !(grading.h_min > 0.0 && grading.h_min <= h && grading.growth > 1.0 && grading.depth >= 0.0) {
        return Err(Error::Geometry("invalid layer grading".into()));
    }
    // radii inside Omega-, from the interface inwards
    let mut depths = vec![0.0];
    let mut step = grading.h_min;
    let mut y: f64 = 0.0;
    while y + step < grading.depth.min(r_sigma) {
        y += step;
        depths.push(y);
    }
    while step < h && y + step < r_sigma - h {
        step = (step * grading.growth).min(h);
        y += step;
        depths.push(y);
    }
    let layer_end = y;
    let rest = r_sigma - layer_end;
    let n_rest = ((rest / h).round() as usize).max(1);
    for i in 1..n_rest {
        depths.push(layer_end + rest * i as f64 / n_rest as f64);
    }
    let n_sigma = ring_count(r_sigma, h);
    let mut rings = vec![Ring { radius: 0.0, count: 1 }];
    for &d in depths.iter().rev() {
        let r = r_sigma - d;
        let count = if d <= layer_end { n_sigma } else { ring_count(r, h) };
        rings.push(Ring { radius: r, count });
    }
    let sigma_ring = rings.len() - 1;
    let n_plus = (((r_outer - r_sigma) / h).round() as usize).max(1);
    for i in 1..=n_plus {
        let r = r_sigma + (r_outer - r_sigma) * i as f64 / n_plus as f64;
        rings.push(Ring {
            radius: r,
            count: ring_count(r, h),
        });
    }
    build_from_rings(&rings, sigma_ring, Geometry::Annulus { r_sigma, r_outer })
}

/// Structured mesh of `(-w, w)^2` with `2^(level+1)` cells per half side,
/// a node at the origin and `Omega-` the quadrants where `x y < 0`.
pub fn build_checkerboard(half_width: f64, level: u32) -> Result<Mesh> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::Geometry(format!("invalid half width {half_width}")));
    }
    let m = 2usize.pow(level + 1);
    let n = 2 * m;
    let coord = |i: usize| half_width * (i as f64 - m as f64) / m as f64;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([coord(i), coord(j)]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let cx = 0.5 * (coord(i) + coord(i + 1));
            let cy = 0.5 * (coord(j) + coord(j + 1));
            let side = if cx * cy < 0.0 { Side::Minus } else { Side::Plus };
            triangles.push(Triangle {
                vertices: [id(i, j), id(i + 1, j), id(i + 1, j + 1)],
                side,
            });
            triangles.push(Triangle {
                vertices: [id(i, j), id(i + 1, j + 1), id(i, j + 1)],
                side,
            });
        }
    }
    Mesh::from_parts(nodes, triangles, Geometry::Checkerboard { half_width })
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let o = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| signed_area(a, b, c);
    let d1 = o(q1, q2, p1);
    let d2 = o(q1, q2, p2);
    let d3 = o(p1, p2, q1);
    let d4 = o(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], c: [f64; 2], d: f64| {
        d == 0.0 && c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

pub(crate) fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Checks that `polygon` is simple, non-degenerate and strictly inside
/// `(-w, w)^2`.
pub fn validate_polygon(half_width: f64, polygon: &[[f64; 2]]) -> Result<()> {
    let n = polygon.len();
    if n < 3 {
        return Err(Error::Geometry("polygon needs at least 3 vertices".into()));
    }
    for p in polygon {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::Geometry("non-finite polygon vertex".into()));
        }
        if p[0].abs() >= half_width || p[1].abs() >= half_width {
            return Err(Error::Geometry(format!(
                "polygon vertex ({}, {}) is not strictly inside the square",
                p[0], p[1]
            )));
        }
    }
    let area: f64 = (0..n)
        .map(|i| {
            let (a, b) = (polygon[i], polygon[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5;
    if area.abs() <= 1e-14 * half_width * half_width {
        return Err(Error::Geometry("polygon has zero area".into()));
    }
    for i in 0..n {
        let (a1, a2) = (polygon[i], polygon[(i + 1) % n]);
        if dist(a1, a2) == 0.0 {
            return Err(Error::Geometry("repeated polygon vertex".into()));
        }
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (b1, b2) = (polygon[j], polygon[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return Err(Error::Geometry(format!("polygon edges {i} and {j} intersect")));
            }
        }
    }
    Ok(())
}

/// Square `(-w, w)^2` with a polygonal inclusion, meshed by a constrained
/// Delaunay triangulation refined to triangles of size about `h`.
pub fn build_square_polygon(half_width: f64, polygon: &[[f64; 2]], h: f64) -> Result<Mesh> {
    use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

    if !(half_width > 0.0 && h > 0.0 && h < half_width) {
        return Err(Error::Geometry(format!(
            "invalid square/size: w = {half_width}, h = {h}"
        )));
    }
    validate_polygon(half_width, polygon)?;
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let insert_loop = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>, pts: &[[f64; 2]]| -> Result<()> {
        let mut handles = Vec::new();
        let n = pts.len();
        for i in 0..n {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            let k = ((dist(a, b) / h).ceil() as usize).max(1);
            for s in 0..k {
                let t = s as f64 / k as f64;
                let p = Point2::new(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]));
                let hnd = cdt
                    .insert(p)
                    .map_err(|e| Error::Geometry(format!("triangulation insert failed: {e:?}")))?;
                handles.push(hnd);
            }
        }
        for i in 0..handles.len() {
            cdt.add_constraint(handles[i], handles[(i + 1) % handles.len()]);
        }
        Ok(())
    };
    let w = half_width;
    insert_loop(&mut cdt, &[[-w, -w], [w, -w], [w, w], [-w, w]])?;
    insert_loop(&mut cdt, polygon)?;
    let params = RefinementParameters::<f64>::new()
        .with_max_allowed_area(0.5 * h * h * 3f64.sqrt() / 2.0)
        .with_angle_limit(AngleLimit::from_deg(25.0))
        .keep_constraint_edges()
        .with_max_additional_vertices(10_000_000);
    cdt.refine(params);

    let nodes: Vec<[f64; 2]> = cdt
        .vertices()
        .map(|v| {
            let p = v.position();
            [p.x, p.y]
        })
        .collect();
    let mut triangles = Vec::with_capacity(cdt.num_inner_faces());
    for f in cdt.inner_faces() {
        let vs = f.vertices();
        let idx = [vs[0].fix().index(), vs[1].fix().index(), vs[2].fix().index()];
        let c = [
            (nodes[idx[0]][0] + nodes[idx[1]][0] + nodes[idx[2]][0]) / 3.0,
            (nodes[idx[0]][1] + nodes[idx[1]][1] + nodes[idx[2]][1]) / 3.0,
        ];
        let side = if point_in_polygon(c, polygon) {
            Side::Minus
        } else {
            Side::Plus
        };
        triangles.push(Triangle { vertices: idx, side });
    }
    Mesh::from_parts(
        nodes,
        triangles,
        Geometry::SquarePolygon {
            half_width,
            polygon: polygon.to_vec(),
        },
    )
}

/// The L-shaped inclusion used as the default non-smooth polygon.
pub fn l_shaped_polygon() -> Vec<[f64; 2]> {
    vec![
        [-0.5, -0.5],
        [0.5, -0.5],
        [0.5, 0.0],
        [0.0, 0.0],
        [0.0, 0.5],
        [-0.5, 0.5],
    ]
}
