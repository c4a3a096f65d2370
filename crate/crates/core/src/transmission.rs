//! The monolithic transmission problem
//! `int a grad phi . grad psi = -int f psi + s int_Sigma g psi`
//! with `a = a+` on `Omega+`, `a = a-` on `Omega-`, and `s = a+ - a-`
//! (standard) or `s = 1` (modified).

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    constrain, domain_data_l2, domain_load, interface_data_l2, interface_load, lumped_mass, stiffness, ConstraintKind,
    DomainFn, InterfaceFn, NormCalculator, NormReport, ReducedOperator, ScalarField,
};
use crate::mesh::{Mesh, Side};
use crate::oracle::RadialBc;
use crate::sparse::CsrMatrix;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExteriorBc {
    Dirichlet,
    Neumann,
}

impl From<ExteriorBc> for RadialBc {
    fn from(bc: ExteriorBc) -> Self {
        match bc {
            ExteriorBc::Dirichlet => RadialBc::Dirichlet,
            ExteriorBc::Neumann => RadialBc::Neumann,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Standard,
    Modified,
}

/// Named domain data.
#[derive(Clone)]
pub struct DomainData {
    pub name: String,
    pub f: DomainFn,
}

/// Named interface data.
#[derive(Clone)]
pub struct InterfaceData {
    pub name: String,
    pub g: InterfaceFn,
}

impl DomainData {
    pub fn new(name: &str, f: impl Fn([f64; 2], Side) -> C64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.to_string(),
            f: Arc::new(f),
        }
    }

    pub fn zero() -> Self {
        Self::new("zero", |_, _| ZERO)
    }

    /// Preset by name: `zero`, `one_minus` (1 on `Omega-`), `x_plus`
    /// (`x` on `Omega+`), `x` (`x` everywhere), `balanced` (3 on `Omega-`,
    /// -1 on `Omega+`: zero mean on the unit-in-radius-two annulus).
    pub fn preset(name: &str) -> Result<Self> {
        let c = |x: f64| C64::new(x, 0.0);
        Ok(match name {
            "zero" => Self::zero(),
            "one_minus" => Self::new(name, move |_, s| if s == Side::Minus { c(1.0) } else { ZERO }),
            "x_plus" => Self::new(name, move |p, s| if s == Side::Plus { c(p[0]) } else { ZERO }),
            "x" => Self::new(name, move |p, _| c(p[0])),
            "balanced" => Self::new(name, move |_, s| if s == Side::Minus { c(3.0) } else { c(-1.0) }),
            _ => return Err(Error::Config(format!("unknown domain data preset `{name}`"))),
        })
    }

    /// The same data minus its discrete mean over the domain of `mesh`, so
    /// that `int_Omega f = 0` holds for the assembled load.
    pub fn centered(&self, mesh: &Mesh) -> DomainData {
        let load = domain_load(mesh, &self.f, None);
        let mean = load.iter().sum::<C64>() / (mesh.area(Side::Minus) + mesh.area(Side::Plus));
        let f = self.f.clone();
        DomainData {
            name: format!("{}_centered", self.name),
            f: Arc::new(move |p, s| f(p, s) - mean),
        }
    }
}

impl InterfaceData {
    pub fn new(name: &str, g: impl Fn([f64; 2]) -> C64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.to_string(),
            g: Arc::new(g),
        }
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| ZERO)
    }

    /// Preset by name: `zero`, `one`, `cos` (`cos theta`), `x`, `x_plus_y`.
    pub fn preset(name: &str) -> Result<Self> {
        let c = |x: f64| C64::new(x, 0.0);
        Ok(match name {
            "zero" => Self::zero(),
            "one" => Self::new(name, move |_| c(1.0)),
            "cos" => Self::new(name, move |p| {
                let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                if r > 0.0 {
                    c(p[0] / r)
                } else {
                    ZERO
                }
            }),
            "x" => Self::new(name, move |p| c(p[0])),
            "x_plus_y" => Self::new(name, move |p| c(p[0] + p[1])),
            _ => return Err(Error::Config(format!("unknown interface data preset `{name}`"))),
        })
    }

    /// The same data minus its discrete mean over the interface of `mesh`, so
    /// that `int_Sigma g = 0` holds for the assembled load.
    pub fn centered(&self, mesh: &Mesh) -> InterfaceData {
        let load = interface_load(mesh, &self.g, C64::new(1.0, 0.0));
        let mean = load.iter().sum::<C64>() / mesh.interface_length();
        let g = self.g.clone();
        InterfaceData {
            name: format!("{}_centered", self.name),
            g: Arc::new(move |p| g(p) - mean),
        }
    }
}

#[derive(Clone)]
pub struct TransmissionProblem {
    pub bc: ExteriorBc,
    pub a_plus: C64,
    pub a_minus: C64,
    pub f: DomainData,
    pub g: InterfaceData,
    pub variant: Variant,
}

impl std::fmt::Debug for TransmissionProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransmissionProblem")
            .field("bc", &self.bc)
            .field("a_plus", &self.a_plus)
            .field("a_minus", &self.a_minus)
            .field("f", &self.f.name)
            .field("g", &self.g.name)
            .field("variant", &self.variant)
            .finish()
    }
}

impl TransmissionProblem {
    pub fn new(
        bc: ExteriorBc,
        a_plus: C64,
        a_minus: C64,
        f: DomainData,
        g: InterfaceData,
        variant: Variant,
    ) -> Result<Self> {
        if a_plus == ZERO || a_minus == ZERO || !a_plus.is_finite() || !a_minus.is_finite() {
            return Err(Error::Precondition("coefficients must be finite and nonzero".into()));
        }
        Ok(Self {
            bc,
            a_plus,
            a_minus,
            f,
            g,
            variant,
        })
    }

    /// `rho = a- / a+`.
    pub fn rho(&self) -> C64 {
        self.a_minus / self.a_plus
    }

    /// Copy with `a- = rho a+`.
    pub fn with_rho(&self, rho: C64) -> Result<Self> {
        let mut p = self.clone();
        p.a_minus = rho * self.a_plus;
        TransmissionProblem::new(p.bc, p.a_plus, p.a_minus, p.f, p.g, p.variant)
    }

    pub fn coefficient(&self, side: Side) -> C64 {
        match side {
            Side::Plus => self.a_plus,
            Side::Minus => self.a_minus,
        }
    }

    /// Factor in front of the interface integral.
    pub fn interface_scale(&self) -> C64 {
        match self.variant {
            Variant::Standard => self.a_plus - self.a_minus,
            Variant::Modified => C64::new(1.0, 0.0),
        }
    }

    /// The same problem with `Omega+` and `Omega-` exchanged (to be solved on
    /// [`Mesh::swap_sides`]); the solution is unchanged.
    pub fn swapped(&self) -> Self {
        let f = self.f.f.clone();
        let g = self.g.g.clone();
        let sign = match self.variant {
            Variant::Standard => -1.0,
            Variant::Modified => 1.0,
        };
        TransmissionProblem {
            bc: self.bc,
            a_plus: self.a_minus,
            a_minus: self.a_plus,
            f: DomainData {
                name: format!("{}_swapped", self.f.name),
                f: Arc::new(move |p, s| f(p, s.other())),
            },
            g: InterfaceData {
                name: format!("{}_swapped", self.g.name),
                g: Arc::new(move |p| g(p) * sign),
            },
            variant: self.variant,
        }
    }

    /// Global load vector `-F + s G`.
    pub fn load(&self, mesh: &Mesh) -> Vec<C64> {
        let f = domain_load(mesh, &self.f.f, None);
        let g = interface_load(mesh, &self.g.g, self.interface_scale());
        f.iter().zip(&g).map(|(a, b)| -a + b).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub satisfied: bool,
    pub integral_f: C64,
    pub integral_g: C64,
    /// Largest violated combination (zero when satisfied).
    pub residual: f64,
    pub tolerance: f64,
}

impl CompatibilityReport {
    /// The integral condition that fails (the first one checked when none does).
    pub fn condition(&self) -> &'static str {
        if self.integral_g.norm() > self.tolerance && self.integral_f.norm() <= self.tolerance {
            "int_Sigma g = 0"
        } else if self.integral_f.norm() > self.tolerance && self.integral_g.norm() <= self.tolerance {
            "int_Omega f = 0"
        } else {
            "-int_Omega f + int_Sigma g = 0"
        }
    }
}

/// Compatibility of the data with the exterior condition and variant,
/// using the same quadrature as the assembled loads. Tolerance `1e-10`
/// relative to the sum of load magnitudes.
pub fn check_compatibility(problem: &TransmissionProblem, mesh: &Mesh) -> CompatibilityReport {
    let fl = domain_load(mesh, &problem.f.f, None);
    let gl = interface_load(mesh, &problem.g.g, C64::new(1.0, 0.0));
    let integral_f: C64 = fl.iter().sum();
    let integral_g: C64 = gl.iter().sum();
    let scale: f64 = fl.iter().map(|z| z.norm()).sum::<f64>() + gl.iter().map(|z| z.norm()).sum::<f64>();
    let tolerance = 1e-10 * scale;
    let residual = match (problem.bc, problem.variant) {
        (ExteriorBc::Neumann, Variant::Standard) => integral_f.norm().max(integral_g.norm()),
        (ExteriorBc::Dirichlet, Variant::Standard) => integral_g.norm(),
        (ExteriorBc::Neumann, Variant::Modified) => (-integral_f + integral_g).norm(),
        (ExteriorBc::Dirichlet, Variant::Modified) => 0.0,
    };
    CompatibilityReport {
        satisfied: residual <= tolerance,
        integral_f,
        integral_g,
        residual,
        tolerance,
    }
}

/// Factorized monolithic operator for one set of coefficients.
pub struct DirectSolver {
    mesh: Arc<Mesh>,
    bc: ExteriorBc,
    matrix: CsrMatrix,
    op: ReducedOperator,
}

impl DirectSolver {
    pub fn new(mesh: &Arc<Mesh>, bc: ExteriorBc, a_plus: C64, a_minus: C64) -> Result<Self> {
        let k = stiffness(mesh, |s| if s == Side::Plus { a_plus } else { a_minus });
        let kinds: &[ConstraintKind] = match bc {
            ExteriorBc::Dirichlet => &[ConstraintKind::DirichletExterior],
            ExteriorBc::Neumann => &[ConstraintKind::NeumannPure, ConstraintKind::ZeroMean],
        };
        let op = constrain(mesh, &k, kinds, None)?;
        Ok(Self {
            mesh: mesh.clone(),
            bc,
            matrix: k,
            op,
        })
    }

    /// Solves with a global load; for Neumann problems the load must sum to zero.
    pub fn solve_load(&self, load: &[C64]) -> Result<ScalarField> {
        let zeros = vec![ZERO; load.len()];
        let (u, _) = self.op.solve(load, Some(&zeros));
        let field = ScalarField::new(self.mesh.clone(), u)?;
        Ok(match self.bc {
            ExteriorBc::Neumann => field.zero_mean(),
            ExteriorBc::Dirichlet => field,
        })
    }

    /// Relative residual of `u` against `load` over the rows without a
    /// Dirichlet condition.
    pub fn residual(&self, u: &[C64], load: &[C64]) -> f64 {
        let r = self.matrix.matvec(u);
        let boundary = self.mesh.boundary_mask();
        let keep = |i: usize| self.bc == ExteriorBc::Neumann || !boundary[i];
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in (0..r.len()).filter(|&i| keep(i)) {
            num += (r[i] - load[i]).norm_sqr();
            den += load[i].norm_sqr();
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

/// Direct solution of the monolithic problem. Fails with a compatibility
/// error when the data violate the solvability condition.
pub fn solve_direct(problem: &TransmissionProblem, mesh: &Arc<Mesh>) -> Result<ScalarField> {
    let load = problem.load(mesh);
    if problem.bc == ExteriorBc::Neumann {
        let total: C64 = load.iter().sum();
        let scale: f64 = load.iter().map(|z| z.norm()).sum();
        if total.norm() > 1e-10 * scale {
            return Err(Error::Compatibility {
                condition: check_compatibility(problem, mesh).condition(),
                residual: total.norm(),
                tolerance: 1e-10 * scale,
            });
        }
    }
    let solver = DirectSolver::new(mesh, problem.bc, problem.a_plus, problem.a_minus)?;
    solver.solve_load(&load)
}

/// Norms of a solution, with the interface flux read from the `Omega+` side.
pub fn solution_norms(problem: &TransmissionProblem, calc: &NormCalculator, u: &ScalarField) -> NormReport {
    let fp = domain_load(calc.mesh(), &problem.f.f, Some(Side::Plus));
    let fp: Vec<C64> = fp.iter().map(|v| v / problem.a_plus).collect();
    calc.report(u.values(), Some(&fp))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataNorm {
    /// `|a+|^-1 ||f|| + ||g||`.
    Standard,
    /// `||f-|| / |a-| + ||f+|| / |a+| + ||g||`.
    Symmetric,
}

pub fn data_norm(problem: &TransmissionProblem, mesh: &Mesh, kind: DataNorm) -> f64 {
    let g = interface_data_l2(mesh, &problem.g.g);
    match kind {
        DataNorm::Standard => domain_data_l2(mesh, &problem.f.f, None) / problem.a_plus.norm() + g,
        DataNorm::Symmetric => {
            domain_data_l2(mesh, &problem.f.f, Some(Side::Minus)) / problem.a_minus.norm()
                + domain_data_l2(mesh, &problem.f.f, Some(Side::Plus)) / problem.a_plus.norm()
                + g
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformityRow {
    pub rho: C64,
    pub norms: NormReport,
    pub data_norm: f64,
    /// `proxy / data_norm`; `None` for zero data.
    pub ratio: Option<f64>,
}

/// Solves for every coefficient pair `(a+, a-)` produced by `coeffs` (in
/// parallel, results in input order) and reports proxy-norm ratios.
pub fn sweep_coefficients(
    template: &TransmissionProblem,
    pairs: &[(C64, C64)],
    mesh: &Arc<Mesh>,
    kind: DataNorm,
) -> Result<Vec<UniformityRow>> {
    let calc = NormCalculator::new(mesh.clone());
    pairs
        .par_iter()
        .map(|&(ap, am)| {
            let p = TransmissionProblem::new(
                template.bc,
                ap,
                am,
                template.f.clone(),
                template.g.clone(),
                template.variant,
            )?;
            let u = solve_direct(&p, mesh)?;
            let norms = solution_norms(&p, &calc, &u);
            let dn = data_norm(&p, mesh, kind);
            Ok(UniformityRow {
                rho: p.rho(),
                norms,
                data_norm: dn,
                ratio: (dn > 0.0).then(|| norms.proxy() / dn),
            })
        })
        .collect()
}

/// Sweep over `rho = a- / a+` with `a+` fixed.
pub fn sweep_uniformity(template: &TransmissionProblem, rhos: &[C64], mesh: &Arc<Mesh>) -> Result<Vec<UniformityRow>> {
    let pairs: Vec<(C64, C64)> = rhos.iter().map(|&r| (template.a_plus, r * template.a_plus)).collect();
    sweep_coefficients(template, &pairs, mesh, DataNorm::Standard)
}

/// `max / min` of the defined ratios.
pub fn ratio_spread(rows: &[UniformityRow]) -> Option<f64> {
    let r: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    if r.is_empty() {
        return None;
    }
    let max = r.iter().copied().fold(f64::MIN, f64::max);
    let min = r.iter().copied().fold(f64::MAX, f64::min);
    Some(max / min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityReport {
    /// `psi^H A phi`.
    pub pairing: C64,
    /// `phi^H M phi` (lumped mass).
    pub norm_sq: f64,
    /// `|pairing + norm_sq| / norm_sq`.
    pub relative_error: f64,
}

/// Cross-check of uniqueness by duality: solves `A^H psi = -M phi` (the
/// adjoint problem, i.e. conjugated coefficients) and verifies
/// `psi^H A phi = -phi^H M phi`. For Neumann problems `phi` is first
/// normalized to zero mean.
pub fn duality_check(problem: &TransmissionProblem, mesh: &Arc<Mesh>, phi: &ScalarField) -> Result<DualityReport> {
    let phi = match problem.bc {
        ExteriorBc::Neumann => phi.zero_mean(),
        ExteriorBc::Dirichlet => {
            let mut v = phi.values().to_vec();
            for i in mesh.boundary_nodes() {
                v[i] = ZERO;
            }
            ScalarField::new(mesh.clone(), v)?
        }
    };
    let m = lumped_mass(mesh, None);
    let rhs: Vec<C64> = phi.values().iter().zip(&m).map(|(u, w)| -u * w).collect();
    let adj = DirectSolver::new(mesh, problem.bc, problem.a_plus.conj(), problem.a_minus.conj())?;
    let psi = adj.solve_load(&rhs)?;
    let a = stiffness(mesh, |s| problem.coefficient(s));
    let aphi = a.matvec(phi.values());
    let pairing: C64 = psi.values().iter().zip(&aphi).map(|(p, v)| p.conj() * v).sum();
    let norm_sq: f64 = phi.values().iter().zip(&m).map(|(u, w)| u.norm_sqr() * w).sum();
    Ok(DualityReport {
        pairing,
        norm_sq,
        relative_error: (pairing + norm_sq).norm() / norm_sq.max(f64::MIN_POSITIVE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_annulus;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn cos_problem(bc: ExteriorBc, rho: f64) -> TransmissionProblem {
        TransmissionProblem::new(
            bc,
            c(1.0),
            c(rho),
            DomainData::zero(),
            InterfaceData::preset("cos").unwrap(),
            Variant::Standard,
        )
        .unwrap()
    }

    #[test]
    fn constant_interface_data_is_incompatible_for_neumann() {
        let mesh = Arc::new(build_annulus(1.0, 2.0, 1).unwrap());
        let mut p = cos_problem(ExteriorBc::Neumann, 10.0);
        p.g = InterfaceData::preset("one").unwrap();
        assert!(!check_compatibility(&p, &mesh).satisfied);
        assert!(matches!(solve_direct(&p, &mesh), Err(Error::Compatibility { .. })));
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let mesh = Arc::new(build_annulus(1.0, 2.0, 1).unwrap());
        let mut p = cos_problem(ExteriorBc::Dirichlet, 10.0);
        p.g = InterfaceData::zero();
        let u = solve_direct(&p, &mesh).unwrap();
        assert!(u.values().iter().all(|v| v.norm() == 0.0));
        let rows = sweep_uniformity(&p, &[c(10.0)], &mesh).unwrap();
        assert!(rows[0].ratio.is_none());
    }

    #[test]
    fn duality_identity_holds() {
        let mesh = Arc::new(build_annulus(1.0, 2.0, 1).unwrap());
        for bc in [ExteriorBc::Neumann, ExteriorBc::Dirichlet] {
            let p = TransmissionProblem::new(
                bc,
                c(1.0),
                C64::new(3.0, 40.0),
                DomainData::zero(),
                InterfaceData::preset("cos").unwrap(),
                Variant::Standard,
            )
            .unwrap();
            let u = solve_direct(&p, &mesh).unwrap();
            let d = duality_check(&p, &mesh, &u).unwrap();
            assert!(d.relative_error < 1e-8, "{bc:?}: {}", d.relative_error);
        }
    }

    #[test]
    fn rho_one_is_plain_poisson() {
        // with a+ = a- the standard interface term vanishes
        let mesh = Arc::new(build_annulus(1.0, 2.0, 1).unwrap());
        let p = cos_problem(ExteriorBc::Dirichlet, 1.0);
        let u = solve_direct(&p, &mesh).unwrap();
        assert!(u.values().iter().all(|v| v.norm() < 1e-14));
    }
}
