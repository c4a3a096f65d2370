//! Piecewise-linear finite elements on tagged triangulations: assembly,
//! loads, constrained solves and norms.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Side};
use crate::sparse::{CsrMatrix, LuFactorization, TripletBuilder};

/// Data on `Omega`, evaluated per side so that it may jump across the interface.
pub type DomainFn = Arc<dyn Fn([f64; 2], Side) -> C64 + Send + Sync>;
/// Data on the interface.
pub type InterfaceFn = Arc<dyn Fn([f64; 2]) -> C64 + Send + Sync>;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Nodal values of a P1 function on a mesh.
#[derive(Clone)]
pub struct ScalarField {
    mesh: Arc<Mesh>,
    values: Vec<C64>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("nodes", &self.values.len())
            .finish()
    }
}

impl ScalarField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<C64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::MeshMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.num_nodes();
        Self {
            mesh,
            values: vec![ZERO; n],
        }
    }

    /// Nodal interpolant of `f`. Nodes on the interface take the `Minus` value.
    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn([f64; 2], Side) -> C64) -> Self {
        let minus = mesh.side_mask(Side::Minus);
        let values = mesh
            .nodes()
            .iter()
            .zip(&minus)
            .map(|(&p, &m)| f(p, if m { Side::Minus } else { Side::Plus }))
            .collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn same_mesh(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh.to_text() == other.mesh.to_text()
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: C64, other: &ScalarField) -> Result<ScalarField> {
        if !self.same_mesh(other) {
            return Err(Error::MeshMismatch("fields live on different meshes".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        Ok(ScalarField {
            mesh: self.mesh.clone(),
            values,
        })
    }

    pub fn scaled(&self, s: C64) -> ScalarField {
        ScalarField {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Values at nodes of `side` (others zero).
    pub fn restricted(&self, side: Side) -> ScalarField {
        let mask = self.mesh.side_mask(side);
        ScalarField {
            mesh: self.mesh.clone(),
            values: self
                .values
                .iter()
                .zip(&mask)
                .map(|(&v, &m)| if m { v } else { ZERO })
                .collect(),
        }
    }

    /// Mean value over `Omega` (exact for P1).
    pub fn mean(&self) -> C64 {
        let w = lumped_mass(&self.mesh, None);
        let total: f64 = w.iter().sum();
        self.values.iter().zip(&w).map(|(v, m)| v * m).sum::<C64>() / total
    }

    /// Copy with the mean over `Omega` removed.
    pub fn zero_mean(&self) -> ScalarField {
        let m = self.mean();
        ScalarField {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| v - m).collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 48);
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{i} {:?} {:?}", v.re, v.im);
        }
        s
    }

    pub fn from_text(mesh: Arc<Mesh>, text: &str) -> Result<ScalarField> {
        let n = mesh.num_nodes();
        let mut values = vec![ZERO; n];
        let mut seen = vec![false; n];
        for (ln, line) in text.lines().enumerate() {
            let toks: Vec<&str> = line.split(' ').collect();
            if toks.len() != 3 {
                return Err(Error::format(ln + 1, "expected `node_index real imag`"));
            }
            let i: usize = toks[0].parse().map_err(|_| Error::format(ln + 1, "bad node index"))?;
            let re: f64 = toks[1].parse().map_err(|_| Error::format(ln + 1, "bad real part"))?;
            let im: f64 = toks[2]
                .parse()
                .map_err(|_| Error::format(ln + 1, "bad imaginary part"))?;
            if i >= n || seen[i] {
                return Err(Error::format(ln + 1, "node index out of range or repeated"));
            }
            seen[i] = true;
            values[i] = C64::new(re, im);
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::format(0, "field does not cover every node"));
        }
        ScalarField::new(mesh, values)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Gradients of the three barycentric functions and the area of triangle `t`.
pub fn basis_gradients(mesh: &Mesh, t: usize) -> ([[f64; 2]; 3], f64) {
    let [a, b, c] = mesh.triangles()[t].vertices;
    let p = [mesh.nodes()[a], mesh.nodes()[b], mesh.nodes()[c]];
    let area = mesh.triangle_area(t);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(p[j][1] - p[k][1]) / (2.0 * area), (p[k][0] - p[j][0]) / (2.0 * area)];
    }
    (g, area)
}

/// Stiffness matrix of `div(a grad u)` with `a` piecewise constant per side.
pub fn stiffness(mesh: &Mesh, coeff: impl Fn(Side) -> C64) -> CsrMatrix {
    let mut b = TripletBuilder::with_capacity(mesh.num_nodes(), 9 * mesh.triangles().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = coeff(tri.side);
        if a == ZERO {
            continue;
        }
        let (g, area) = basis_gradients(mesh, t);
        for i in 0..3 {
            for j in 0..3 {
                let kij = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                b.add(tri.vertices[i], tri.vertices[j], a * kij);
            }
        }
    }
    b.build()
}

/// Unit-coefficient stiffness restricted to the triangles of `side`.
pub fn stiffness_side(mesh: &Mesh, side: Side) -> CsrMatrix {
    stiffness(mesh, |s| if s == side { C64::new(1.0, 0.0) } else { ZERO })
}

/// Consistent mass matrix with piecewise constant weight.
pub fn mass(mesh: &Mesh, coeff: impl Fn(Side) -> C64) -> CsrMatrix {
    let mut b = TripletBuilder::with_capacity(mesh.num_nodes(), 9 * mesh.triangles().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = coeff(tri.side);
        if a == ZERO {
            continue;
        }
        let area = mesh.triangle_area(t);
        for i in 0..3 {
            for j in 0..3 {
                let mij = if i == j { area / 6.0 } else { area / 12.0 };
                b.add(tri.vertices[i], tri.vertices[j], a * mij);
            }
        }
    }
    b.build()
}

/// `m_i = int phi_i` over `Omega` or over one side.
pub fn lumped_mass(mesh: &Mesh, side: Option<Side>) -> Vec<f64> {
    let mut m = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if side.is_some_and(|s| s != tri.side) {
            continue;
        }
        let a3 = mesh.triangle_area(t) / 3.0;
        for &v in &tri.vertices {
            m[v] += a3;
        }
    }
    m
}

/// `int_Sigma phi_i`.
pub fn interface_lumped_mass(mesh: &Mesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.num_nodes()];
    for e in mesh.interface_edges() {
        let half = edge_length(mesh, *e) / 2.0;
        m[e[0]] += half;
        m[e[1]] += half;
    }
    m
}

fn edge_length(mesh: &Mesh, e: [usize; 2]) -> f64 {
    let (a, b) = (mesh.nodes()[e[0]], mesh.nodes()[e[1]]);
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// `F_i = int f phi_i` with the vertex rule, optionally over one side only.
pub fn domain_load(mesh: &Mesh, f: &DomainFn, side: Option<Side>) -> Vec<C64> {
    let mut out = vec![ZERO; mesh.num_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if side.is_some_and(|s| s != tri.side) {
            continue;
        }
        let a3 = mesh.triangle_area(t) / 3.0;
        for &v in &tri.vertices {
            out[v] += f(mesh.nodes()[v], tri.side) * a3;
        }
    }
    out
}

/// `G_i = scale * int_Sigma g phi_i` with the trapezoid rule per edge.
pub fn interface_load(mesh: &Mesh, g: &InterfaceFn, scale: C64) -> Vec<C64> {
    let mut out = vec![ZERO; mesh.num_nodes()];
    for e in mesh.interface_edges() {
        let half = edge_length(mesh, *e) / 2.0;
        for &v in e {
            out[v] += scale * g(mesh.nodes()[v]) * half;
        }
    }
    out
}

/// Exact `||u_h||^2` over the triangles of one side (or all).
pub fn l2_norm_sq(mesh: &Mesh, u: &[C64], side: Option<Side>) -> f64 {
    let mut s = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if side.is_some_and(|x| x != tri.side) {
            continue;
        }
        let v = tri.vertices.map(|i| u[i]);
        let sum = v[0] + v[1] + v[2];
        let sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        s += mesh.triangle_area(t) / 12.0 * (sq + sum.norm_sqr());
    }
    s
}

/// Exact `||grad u_h||^2` over the triangles of one side (or all).
pub fn h1_semi_sq(mesh: &Mesh, u: &[C64], side: Option<Side>) -> f64 {
    let mut s = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if side.is_some_and(|x| x != tri.side) {
            continue;
        }
        let (g, area) = basis_gradients(mesh, t);
        let mut gx = ZERO;
        let mut gy = ZERO;
        for i in 0..3 {
            gx += u[tri.vertices[i]] * g[i][0];
            gy += u[tri.vertices[i]] * g[i][1];
        }
        s += area * (gx.norm_sqr() + gy.norm_sqr());
    }
    s
}

/// Exact `||u_h||^2_{L2(Sigma)}` and `||d_s u_h||^2_{L2(Sigma)}`.
pub fn interface_norms_sq(mesh: &Mesh, u: &[C64]) -> (f64, f64) {
    let mut l2 = 0.0;
    let mut tang = 0.0;
    for e in mesh.interface_edges() {
        let len = edge_length(mesh, *e);
        let (a, b) = (u[e[0]], u[e[1]]);
        l2 += len / 3.0 * (a.norm_sqr() + b.norm_sqr() + (a * b.conj()).re);
        tang += (b - a).norm_sqr() / len;
    }
    (l2, tang)
}

/// Norm of the nodal interpolant of side-wise data.
pub fn domain_data_l2(mesh: &Mesh, f: &DomainFn, side: Option<Side>) -> f64 {
    let mut s = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if side.is_some_and(|x| x != tri.side) {
            continue;
        }
        let v = tri.vertices.map(|i| f(mesh.nodes()[i], tri.side));
        let sum = v[0] + v[1] + v[2];
        let sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        s += mesh.triangle_area(t) / 12.0 * (sq + sum.norm_sqr());
    }
    s.sqrt()
}

pub fn interface_data_l2(mesh: &Mesh, g: &InterfaceFn) -> f64 {
    let vals: Vec<C64> = mesh.nodes().iter().map(|&p| g(p)).collect();
    interface_norms_sq(mesh, &vals).0.sqrt()
}

/// Per-subdomain and interface norms of a field.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormReport {
    pub l2_plus: f64,
    pub l2_minus: f64,
    pub h1_semi_plus: f64,
    pub h1_semi_minus: f64,
    pub h1_plus: f64,
    pub h1_minus: f64,
    pub l2_sigma: f64,
    pub h1_sigma: f64,
    pub flux_l2_sigma: f64,
}

impl NormReport {
    /// Scalar proxy for the product norm used throughout:
    /// `|u+|_1 + |u-|_1 + |u|_{1,Sigma} + |flux|_{0,Sigma}`.
    pub fn proxy(&self) -> f64 {
        self.h1_plus + self.h1_minus + self.h1_sigma + self.flux_l2_sigma
    }
}

/// Reusable norm evaluation on one mesh. The interface flux is the residual
/// of the `Omega+` stiffness at interface nodes divided by the lumped
/// interface mass; interface nodes on the outer boundary are skipped.
pub struct NormCalculator {
    mesh: Arc<Mesh>,
    k_plus: CsrMatrix,
    sigma_mass: Vec<f64>,
    flux_nodes: Vec<usize>,
}

impl NormCalculator {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let k_plus = stiffness_side(&mesh, Side::Plus);
        let sigma_mass = interface_lumped_mass(&mesh);
        let bnd = mesh.boundary_mask();
        let flux_nodes = mesh.interface_nodes().into_iter().filter(|&i| !bnd[i]).collect();
        Self {
            mesh,
            k_plus,
            sigma_mass,
            flux_nodes,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Norms of `u`; `plus_load` is added to `K+ u` before the flux is read
    /// off (the `Omega+` source term, scaled like the stiffness).
    pub fn report(&self, u: &[C64], plus_load: Option<&[C64]>) -> NormReport {
        let mesh = &*self.mesh;
        let l2p = l2_norm_sq(mesh, u, Some(Side::Plus));
        let l2m = l2_norm_sq(mesh, u, Some(Side::Minus));
        let h1p = h1_semi_sq(mesh, u, Some(Side::Plus));
        let h1m = h1_semi_sq(mesh, u, Some(Side::Minus));
        let (ls, ts) = interface_norms_sq(mesh, u);
        let mut flux = 0.0;
        for &i in &self.flux_nodes {
            let mut r = ZERO;
            for (j, k) in self.k_plus.row(i) {
                r += k * u[j];
            }
            if let Some(l) = plus_load {
                r += l[i];
            }
            flux += r.norm_sqr() / self.sigma_mass[i];
        }
        NormReport {
            l2_plus: l2p.sqrt(),
            l2_minus: l2m.sqrt(),
            h1_semi_plus: h1p.sqrt(),
            h1_semi_minus: h1m.sqrt(),
            h1_plus: (l2p + h1p).sqrt(),
            h1_minus: (l2m + h1m).sqrt(),
            l2_sigma: ls.sqrt(),
            h1_sigma: (ls + ts).sqrt(),
            flux_l2_sigma: flux.sqrt(),
        }
    }
}

pub fn norms(field: &ScalarField) -> NormReport {
    NormCalculator::new(field.mesh.clone()).report(&field.values, None)
}

/// How a system is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Homogeneous-or-prescribed values on the outer boundary.
    DirichletExterior,
    /// Prescribed values on the interface.
    DirichletOnSigma,
    /// No Dirichlet nodes at all; requires `ZeroMean`.
    NeumannPure,
    /// Zero mean over the active nodes: one node is pinned during the
    /// factorization and the weighted mean is removed afterwards.
    ZeroMean,
}

/// A factorized operator restricted to a set of active nodes, with some of
/// them held at prescribed values and an optional zero-mean normalization.
pub struct ReducedOperator {
    n_global: usize,
    free: Vec<usize>,
    fixed: Vec<usize>,
    coupling: Vec<Vec<(usize, C64)>>,
    mean: Option<MeanConstraint>,
    lu: LuFactorization,
}

/// Pinned node of a zero-mean operator, with its matrix row (kept to report
/// the incompatibility of the right-hand side) and the mean weights.
struct MeanConstraint {
    pin: usize,
    row: Vec<(usize, C64)>,
    nodes: Vec<usize>,
    weights: Vec<f64>,
}

impl ReducedOperator {
    /// `active` marks the nodes whose rows take part; of those, `fixed`
    /// nodes are prescribed. With `zero_mean`, the kernel of a pure Neumann
    /// operator is removed by `sum_i w_i u_i = 0` over the active nodes; no
    /// node may be fixed then.
    pub fn new(a: &CsrMatrix, active: &[bool], fixed: &[bool], zero_mean: Option<&[f64]>) -> Result<Self> {
        let n = a.dim();
        const NONE: usize = usize::MAX;
        let mean = match zero_mean {
            Some(w) => {
                if (0..n).any(|i| active[i] && fixed[i]) {
                    return Err(Error::Precondition(
                        "zero-mean operator cannot carry fixed nodes".into(),
                    ));
                }
                let nodes: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
                // heaviest node, first on ties
                let pin = nodes
                    .iter()
                    .copied()
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if w[b] >= w[i] => Some(b),
                        _ => Some(i),
                    })
                    .ok_or_else(|| Error::Precondition("zero-mean operator without active nodes".into()))?;
                let row = a.row(pin).filter(|(j, _)| active[*j]).collect();
                let weights = nodes.iter().map(|&i| w[i]).collect();
                Some(MeanConstraint {
                    pin,
                    row,
                    nodes,
                    weights,
                })
            }
            None => None,
        };
        let pinned = mean.as_ref().map(|m| m.pin);
        let mut local = vec![NONE; n];
        let mut free = Vec::new();
        let mut fixed_list = Vec::new();
        for i in 0..n {
            if active[i] && !fixed[i] && Some(i) != pinned {
                local[i] = free.len();
                free.push(i);
            } else if active[i] && Some(i) != pinned {
                fixed_list.push(i);
            }
        }
        let nf = free.len();
        let mut b = TripletBuilder::with_capacity(nf, a.nnz());
        let mut coupling = vec![Vec::new(); nf];
        for (li, &gi) in free.iter().enumerate() {
            for (gj, v) in a.row(gi) {
                if local[gj] != NONE {
                    b.add(li, local[gj], v);
                } else if active[gj] && Some(gj) != pinned {
                    coupling[li].push((gj, v));
                }
            }
        }
        let m = b.build();
        let order = crate::sparse::reverse_cuthill_mckee(&m);
        let lu = LuFactorization::with_ordering(&m, order)?;
        Ok(Self {
            n_global: n,
            free,
            fixed: fixed_list,
            coupling,
            mean,
            lu,
        })
    }

    /// Unknowns of the factorized system (the pinned node excluded).
    pub fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    pub fn factorization(&self) -> &LuFactorization {
        &self.lu
    }

    /// Solves with right-hand side `rhs` (global, read at free nodes) and
    /// prescribed values `fixed_values` (global, read at fixed nodes).
    /// Returns the global solution (zero outside the active set) and, for a
    /// zero-mean operator, the residual left in the pinned row, which
    /// vanishes for compatible data.
    pub fn solve(&self, rhs: &[C64], fixed_values: Option<&[C64]>) -> (Vec<C64>, C64) {
        assert_eq!(rhs.len(), self.n_global);
        let mut b: Vec<C64> = self.free.iter().map(|&g| rhs[g]).collect();
        if let Some(fv) = fixed_values {
            for (li, row) in self.coupling.iter().enumerate() {
                for &(gj, v) in row {
                    b[li] -= v * fv[gj];
                }
            }
        }
        let x = self.lu.solve(&b);
        let mut out = vec![ZERO; self.n_global];
        for (li, &g) in self.free.iter().enumerate() {
            out[g] = x[li];
        }
        if let Some(fv) = fixed_values {
            for &g in &self.fixed {
                out[g] = fv[g];
            }
        }
        let Some(mc) = &self.mean else {
            return (out, ZERO);
        };
        let defect = rhs[mc.pin] - mc.row.iter().map(|&(j, v)| v * out[j]).sum::<C64>();
        let total: f64 = mc.weights.iter().sum();
        let mean = mc.nodes.iter().zip(&mc.weights).map(|(&i, &w)| out[i] * w).sum::<C64>() / total;
        for &i in &mc.nodes {
            out[i] -= mean;
        }
        (out, defect)
    }
}

/// Builds the reduced operator for `matrix` under the given constraint
/// kinds. `side` restricts the active nodes to one subdomain.
pub fn constrain(
    mesh: &Mesh,
    matrix: &CsrMatrix,
    kinds: &[ConstraintKind],
    side: Option<Side>,
) -> Result<ReducedOperator> {
    let has = |k| kinds.contains(&k);
    if has(ConstraintKind::NeumannPure) && !has(ConstraintKind::ZeroMean) {
        return Err(Error::SingularSystem(
            "pure Neumann problem without a zero-mean constraint".into(),
        ));
    }
    if has(ConstraintKind::NeumannPure)
        && (has(ConstraintKind::DirichletExterior) || has(ConstraintKind::DirichletOnSigma))
    {
        return Err(Error::Precondition(
            "pure Neumann problem cannot carry Dirichlet nodes".into(),
        ));
    }
    let active = match side {
        Some(s) => mesh.side_mask(s),
        None => vec![true; mesh.num_nodes()],
    };
    let mut fixed = vec![false; mesh.num_nodes()];
    if has(ConstraintKind::DirichletExterior) {
        for (f, b) in fixed.iter_mut().zip(mesh.boundary_mask()) {
            *f |= b;
        }
    }
    if has(ConstraintKind::DirichletOnSigma) {
        for (f, b) in fixed.iter_mut().zip(mesh.interface_mask()) {
            *f |= b;
        }
    }
    let fixed: Vec<bool> = fixed.iter().zip(&active).map(|(f, a)| *f && *a).collect();
    let w = has(ConstraintKind::ZeroMean).then(|| lumped_mass(mesh, side));
    ReducedOperator::new(matrix, &active, &fixed, w.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_annulus, build_checkerboard};

    #[test]
    fn stiffness_annihilates_constants() {
        let m = build_annulus(1.0, 2.0, 1).unwrap();
        let k = stiffness(&m, |s| {
            if s == Side::Plus {
                C64::new(1.0, 0.0)
            } else {
                C64::new(7.0, 2.0)
            }
        });
        let one = vec![C64::new(1.0, 0.0); m.num_nodes()];
        let r = k.matvec(&one);
        assert!(r.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn lumped_mass_sums_to_area() {
        let m = build_checkerboard(1.0, 1).unwrap();
        let w: f64 = lumped_mass(&m, None).iter().sum();
        assert!((w - 4.0).abs() < 1e-13);
        let wm: f64 = lumped_mass(&m, Some(Side::Minus)).iter().sum();
        assert!((wm - 2.0).abs() < 1e-13);
    }

    #[test]
    fn linear_field_norms_are_exact() {
        let m = Arc::new(build_checkerboard(1.0, 0).unwrap());
        let u = ScalarField::interpolate(m.clone(), |p, _| C64::new(p[0], 0.0));
        let r = norms(&u);
        // int x^2 over half the square = 2/3 per side
        assert!((r.l2_plus.powi(2) - 2.0 / 3.0).abs() < 1e-13);
        assert!((r.h1_semi_minus.powi(2) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn neumann_without_mean_is_rejected() {
        let m = build_annulus(1.0, 2.0, 0).unwrap();
        let k = stiffness(&m, |_| C64::new(1.0, 0.0));
        let r = constrain(&m, &k, &[ConstraintKind::NeumannPure], None);
        assert!(matches!(r, Err(Error::SingularSystem(_))));
    }

    #[test]
    fn field_text_round_trip() {
        let m = Arc::new(build_annulus(1.0, 2.0, 0).unwrap());
        let u = ScalarField::interpolate(m.clone(), |p, _| C64::new(p[0].sin(), p[1] / 3.0));
        let v = ScalarField::from_text(m, &u.to_text()).unwrap();
        assert_eq!(u.values(), v.values());
    }

    #[test]
    fn zero_mean_solve_has_zero_mean() {
        let m = build_annulus(1.0, 2.0, 1).unwrap();
        let k = stiffness(&m, |_| C64::new(1.0, 0.0));
        let op = constrain(&m, &k, &[ConstraintKind::NeumannPure, ConstraintKind::ZeroMean], None).unwrap();
        let f: DomainFn = Arc::new(|p, _| C64::new(p[0], 0.0));
        let b = domain_load(&m, &f, None);
        let (u, defect) = op.solve(&b, None);
        assert!(defect.norm() < 1e-10);
        let w = lumped_mass(&m, None);
        let mean: C64 = u.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!(mean.norm() < 1e-12);
    }
}
