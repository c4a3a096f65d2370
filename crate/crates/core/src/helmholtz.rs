//! Scalar time-harmonic problem for the out-of-plane electric field,
//! `int grad u . grad v - kappa^2 alpha u v = i nu int j v`, with
//! `alpha = 1` in `Omega+` and `1 + i / delta^2` in the conductor `Omega-`.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    constrain, domain_data_l2, domain_load, h1_semi_sq, interface_lumped_mass, l2_norm_sq, mass, stiffness,
    ConstraintKind, DomainFn, ScalarField,
};
use crate::fit;
use crate::mesh::{build_annulus_graded, norm, Geometry, LayerGrading, Mesh, Side};
use crate::oracle::TmParameters;
use crate::sparse::backward_error;
use crate::transmission::ExteriorBc;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Largest condition estimate of the limit problem accepted before the
/// frequency is shifted.
pub const RESONANCE_THRESHOLD: f64 = 1e8;
/// Minimum number of elements per skin depth in the conductor.
pub const ELEMENTS_PER_SKIN_DEPTH: f64 = 8.0;

/// Outer boundary condition: natural (insulating) or essential
/// (perfectly conducting).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TmBoundary {
    InsulatingAnalog,
    ConductingAnalog,
}

impl TmBoundary {
    pub fn exterior(self) -> ExteriorBc {
        match self {
            TmBoundary::InsulatingAnalog => ExteriorBc::Neumann,
            TmBoundary::ConductingAnalog => ExteriorBc::Dirichlet,
        }
    }
}

/// A named current density.
#[derive(Clone)]
pub struct TmSource {
    pub name: String,
    pub j: DomainFn,
}

impl TmSource {
    pub fn new(name: &str, j: impl Fn([f64; 2], Side) -> C64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.to_string(),
            j: Arc::new(j),
        }
    }

    /// Preset by name: `zero`, `ring_indicator` (1 on `1.2 < r < 1.8`),
    /// `ring_smooth` (`sin^2` bump on the same ring). Both rings sit in
    /// `Omega+` of the unit-interface annulus.
    pub fn preset(name: &str) -> Result<Self> {
        Ok(match name {
            "zero" => Self::new(name, |_, _| ZERO),
            "ring_indicator" => Self::new(name, |p, _| C64::new(f64::from(u8::from(ring_indicator(norm(p)))), 0.0)),
            "ring_smooth" => Self::new(name, |p, _| C64::new(ring_smooth(norm(p)), 0.0)),
            _ => return Err(Error::Config(format!("unknown current preset `{name}`"))),
        })
    }

    /// Radial profile of a preset, for the reference solver.
    pub fn radial_profile(name: &str) -> Result<Arc<dyn Fn(f64) -> C64 + Send + Sync>> {
        Ok(match name {
            "zero" => Arc::new(|_| ZERO),
            "ring_indicator" => Arc::new(|r| C64::new(f64::from(u8::from(ring_indicator(r))), 0.0)),
            "ring_smooth" => Arc::new(|r| C64::new(ring_smooth(r), 0.0)),
            _ => return Err(Error::Config(format!("current preset `{name}` has no radial profile"))),
        })
    }

    pub fn scaled(&self, s: C64) -> TmSource {
        let j = self.j.clone();
        TmSource {
            name: format!("{}_x{}", self.name, s),
            j: Arc::new(move |p, side| s * j(p, side)),
        }
    }
}

fn ring_indicator(r: f64) -> bool {
    r > 1.2 && r < 1.8
}

fn ring_smooth(r: f64) -> f64 {
    if ring_indicator(r) {
        (std::f64::consts::PI * (r - 1.2) / 0.6).sin().powi(2)
    } else {
        0.0
    }
}

/// Physical parameters. The conductor is described by `delta`; `sigma`
/// inputs are converted once, so both routes give identical coefficients.
#[derive(Clone)]
pub struct TmProblem {
    pub omega: f64,
    pub eps0: f64,
    pub mu0: f64,
    delta: f64,
    pub j: TmSource,
}

impl std::fmt::Debug for TmProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TmProblem")
            .field("omega", &self.omega)
            .field("eps0", &self.eps0)
            .field("mu0", &self.mu0)
            .field("delta", &self.delta)
            .field("j", &self.j.name)
            .finish()
    }
}

impl TmProblem {
    pub fn from_delta(omega: f64, eps0: f64, mu0: f64, delta: f64, j: TmSource) -> Result<Self> {
        if !(omega > 0.0 && eps0 > 0.0 && mu0 > 0.0 && omega.is_finite() && eps0.is_finite() && mu0.is_finite()) {
            return Err(Error::Precondition("omega, eps0 and mu0 must be positive".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Precondition(format!("delta must be positive, got {delta}")));
        }
        Ok(Self {
            omega,
            eps0,
            mu0,
            delta,
            j,
        })
    }

    /// `delta = sqrt(omega eps0 / sigma)`.
    pub fn from_sigma(omega: f64, eps0: f64, mu0: f64, sigma: f64, j: TmSource) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Precondition(format!("sigma must be positive, got {sigma}")));
        }
        Self::from_delta(omega, eps0, mu0, (omega * eps0 / sigma).sqrt(), j)
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::from_sigma(self.omega, self.eps0, self.mu0, sigma, self.j.clone())
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::from_delta(self.omega, self.eps0, self.mu0, delta, self.j.clone())
    }

    /// Same conductor (`sigma` fixed) at another frequency.
    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        Self::from_sigma(omega, self.eps0, self.mu0, self.sigma(), self.j.clone())
    }

    pub fn kappa(&self) -> f64 {
        self.omega * (self.eps0 * self.mu0).sqrt()
    }

    pub fn nu(&self) -> f64 {
        self.omega * self.mu0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `sigma = kappa^2 / (nu delta^2)`.
    pub fn sigma(&self) -> f64 {
        self.kappa().powi(2) / (self.nu() * self.delta * self.delta)
    }

    pub fn alpha(&self, side: Side) -> C64 {
        match side {
            Side::Plus => C64::new(1.0, 0.0),
            Side::Minus => C64::new(1.0, 1.0 / (self.delta * self.delta)),
        }
    }

    /// `sqrt(2) delta / kappa`.
    pub fn skin_depth(&self) -> f64 {
        SQRT_2 * self.delta / self.kappa()
    }

    pub fn oracle_parameters(&self) -> TmParameters {
        TmParameters {
            kappa: self.kappa(),
            nu: self.nu(),
            delta: self.delta,
        }
    }
}

/// `K - kappa^2 M_alpha`.
pub fn tm_operator(problem: &TmProblem, mesh: &Mesh) -> crate::sparse::CsrMatrix {
    let k = stiffness(mesh, |_| C64::new(1.0, 0.0));
    let k2 = problem.kappa().powi(2);
    let m = mass(mesh, |s| problem.alpha(s));
    k.combine(C64::new(1.0, 0.0), &m, C64::new(-k2, 0.0))
}

/// Assembled current `J_i = int j phi_i`.
pub fn current_load(problem: &TmProblem, mesh: &Mesh) -> Vec<C64> {
    domain_load(mesh, &problem.j.j, None)
}

/// Discrete solution; errors if the factorization breaks down or the
/// backward error exceeds `1e-10` (both signal a frequency near a
/// resonance).
pub fn solve_tm(problem: &TmProblem, mesh: &Arc<Mesh>, bc: TmBoundary) -> Result<ScalarField> {
    let a = tm_operator(problem, mesh);
    let kinds: &[ConstraintKind] = match bc {
        TmBoundary::InsulatingAnalog => &[],
        TmBoundary::ConductingAnalog => &[ConstraintKind::DirichletExterior],
    };
    let op = constrain(mesh, &a, kinds, None).map_err(|e| match e {
        Error::Singular { pivot, magnitude } => Error::SingularSystem(format!(
            "TM operator singular at pivot {pivot} (|u| = {magnitude:e}); shift omega away from a resonance"
        )),
        e => e,
    })?;
    let iv = C64::new(0.0, problem.nu());
    let load: Vec<C64> = current_load(problem, mesh).iter().map(|v| iv * v).collect();
    let zeros = vec![ZERO; load.len()];
    let (u, _) = op.solve(&load, Some(&zeros));
    let free = op.free_nodes();
    let x: Vec<C64> = free.iter().map(|&i| u[i]).collect();
    let b: Vec<C64> = free.iter().map(|&i| load[i]).collect();
    let res = backward_error(op.factorization().matrix(), &x, &b);
    if res > 1e-10 {
        return Err(Error::SingularSystem(format!(
            "TM backward error {res:e} above 1e-10; shift omega away from a resonance"
        )));
    }
    ScalarField::new(mesh.clone(), u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `|grad u|^2 - kappa^2 |u|^2 + nu Im (j, u)`, relative.
    pub real_identity_residual: f64,
    /// `sigma |u|^2_{Omega-} + Re (j, u)`, relative.
    pub imag_identity_residual: f64,
    /// `sqrt(sigma) |u|_{0, Omega-}`.
    pub sigma_weighted_norm: f64,
}

/// Energy identities obtained by testing the discrete equation with `u`,
/// with norms taken from the assembled matrices.
pub fn energy_identities(u: &ScalarField, problem: &TmProblem) -> EnergyReport {
    let mesh = u.mesh();
    let v = u.values();
    let quad = |m: &crate::sparse::CsrMatrix| -> f64 {
        let mv = m.matvec(v);
        v.iter().zip(&mv).map(|(a, b)| (a.conj() * b).re).sum()
    };
    let one = |_| C64::new(1.0, 0.0);
    let grad = quad(&stiffness(mesh, one));
    let l2 = quad(&mass(mesh, one));
    let l2_minus = quad(&mass(
        mesh,
        |s| if s == Side::Minus { C64::new(1.0, 0.0) } else { ZERO },
    ));
    let jl = current_load(problem, mesh);
    let ju: C64 = jl.iter().zip(v).map(|(j, u)| j * u.conj()).sum();
    let (k2, nu, sigma) = (problem.kappa().powi(2), problem.nu(), problem.sigma());
    let re_scale = grad + k2 * l2 + nu * ju.norm();
    let re = (grad - k2 * l2 + nu * ju.im).abs() / re_scale.max(f64::MIN_POSITIVE);
    let im_scale = sigma * l2_minus + ju.norm();
    let im = (sigma * l2_minus + ju.re).abs() / im_scale.max(f64::MIN_POSITIVE);
    EnergyReport {
        real_identity_residual: if re_scale == 0.0 { 0.0 } else { re },
        imag_identity_residual: if im_scale == 0.0 { 0.0 } else { im },
        sigma_weighted_norm: (sigma * l2_minus.max(0.0)).sqrt(),
    }
}

fn limit_operator(problem: &TmProblem, mesh: &Mesh, bc: TmBoundary) -> Result<crate::fem::ReducedOperator> {
    let k = stiffness(mesh, |s| if s == Side::Plus { C64::new(1.0, 0.0) } else { ZERO });
    let m = mass(mesh, |s| if s == Side::Plus { C64::new(1.0, 0.0) } else { ZERO });
    let a = k.combine(C64::new(1.0, 0.0), &m, C64::new(-problem.kappa().powi(2), 0.0));
    let kinds: &[ConstraintKind] = match bc {
        TmBoundary::InsulatingAnalog => &[ConstraintKind::DirichletOnSigma],
        TmBoundary::ConductingAnalog => &[ConstraintKind::DirichletOnSigma, ConstraintKind::DirichletExterior],
    };
    constrain(mesh, &a, kinds, Some(Side::Plus))
}

/// Condition estimate of the limit problem in `Omega+` (field vanishing on
/// the interface). Large values mean `omega` is close to an eigenfrequency.
pub fn probe_resonance(problem: &TmProblem, mesh: &Mesh, bc: TmBoundary) -> f64 {
    match limit_operator(problem, mesh, bc) {
        Ok(op) => op.factorization().condition_estimate(),
        Err(_) => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceProbe {
    pub omega: f64,
    pub condition: f64,
    pub shifts: u32,
}

/// Shifts `omega` up by 1% until the limit-problem probe falls below
/// [`RESONANCE_THRESHOLD`] (at most 10 shifts).
pub fn ensure_nonresonant(problem: &TmProblem, mesh: &Mesh, bc: TmBoundary) -> Result<(TmProblem, ResonanceProbe)> {
    let mut p = problem.clone();
    for shifts in 0..=10 {
        let condition = probe_resonance(&p, mesh, bc);
        if condition <= RESONANCE_THRESHOLD {
            let probe = ResonanceProbe {
                omega: p.omega,
                condition,
                shifts,
            };
            return Ok((p, probe));
        }
        p = p.with_omega(p.omega * 1.01)?;
    }
    Err(Error::SingularSystem(format!(
        "limit problem stays near resonance up to omega = {}",
        p.omega
    )))
}

/// Errors unless the conductor elements within one skin depth of the
/// interface are at most a skin depth over [`ELEMENTS_PER_SKIN_DEPTH`].
pub fn check_resolution(mesh: &Mesh, problem: &TmProblem) -> Result<()> {
    let r_sigma = match mesh.geometry() {
        Geometry::Annulus { r_sigma, .. } => *r_sigma,
        _ => {
            return Err(Error::UnsupportedGeometry(
                "resolution rule needs an annulus mesh".into(),
            ))
        }
    };
    let d = problem.skin_depth();
    let required = d / ELEMENTS_PER_SKIN_DEPTH;
    let actual = mesh.radial_resolution_near_interface(r_sigma, d);
    if actual > required * (1.0 + 1e-12) {
        return Err(Error::Resolution { required, actual });
    }
    Ok(())
}

/// Annulus mesh with bulk size `h`, graded in the conductor so that the
/// skin depth of `problem` holds about `per_depth` elements.
pub fn skin_mesh(r_sigma: f64, r_outer: f64, h: f64, problem: &TmProblem, per_depth: f64) -> Result<Mesh> {
    let d = problem.skin_depth();
    let h_min = (d / per_depth).min(h);
    build_annulus_graded(
        r_sigma,
        r_outer,
        h,
        LayerGrading {
            h_min,
            depth: (3.0 * d).min(r_sigma / 2.0),
            growth: 1.1,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmRow {
    pub sigma: f64,
    pub delta: f64,
    pub l2_all: f64,
    pub l2_minus: f64,
    /// `|grad u|_{0, Omega}`.
    pub h1_all: f64,
    pub sqrt_sigma_l2_minus: f64,
    pub j_l2: f64,
    /// `j` is out of plane, so its divergence vanishes and the `H(div)`
    /// norm equals the `L2` norm.
    pub j_hdiv: f64,
    /// `|u|_0 / |j|_0`.
    pub ratio: f64,
    pub energy: EnergyReport,
}

fn tm_row(problem: &TmProblem, mesh: &Arc<Mesh>, bc: TmBoundary) -> Result<TmRow> {
    let u = solve_tm(problem, mesh, bc)?;
    let v = u.values();
    let l2_all = l2_norm_sq(mesh, v, None).sqrt();
    let l2_minus = l2_norm_sq(mesh, v, Some(Side::Minus)).sqrt();
    let h1_all = h1_semi_sq(mesh, v, None).sqrt();
    let j_l2 = domain_data_l2(mesh, &problem.j.j, None);
    let energy = energy_identities(&u, problem);
    Ok(TmRow {
        sigma: problem.sigma(),
        delta: problem.delta(),
        l2_all,
        l2_minus,
        h1_all,
        sqrt_sigma_l2_minus: problem.sigma().sqrt() * l2_minus,
        j_l2,
        j_hdiv: j_l2,
        ratio: if j_l2 > 0.0 { l2_all / j_l2 } else { 0.0 },
        energy,
    })
}

/// One solve per conductivity, in parallel, rows in input order. Every
/// conductivity must be resolved by the mesh.
pub fn sigma_sweep(template: &TmProblem, sigmas: &[f64], mesh: &Arc<Mesh>, bc: TmBoundary) -> Result<Vec<TmRow>> {
    if sigmas.is_empty() {
        return Err(Error::Config("empty conductivity list".into()));
    }
    let problems: Vec<TmProblem> = sigmas.iter().map(|&s| template.with_sigma(s)).collect::<Result<_>>()?;
    for p in &problems {
        check_resolution(mesh, p)?;
    }
    problems
        .par_iter()
        .zip(sigmas)
        .map(|(p, &s)| tm_row(p, mesh, bc).map(|row| TmRow { sigma: s, ..row }))
        .collect()
}

/// `1` up to `0.4 w`, `0` beyond `0.8 w`, quintic smoothstep between.
pub fn cutoff(distance: f64, width: f64) -> f64 {
    let t = ((distance - 0.4 * width) / (0.4 * width)).clamp(0.0, 1.0);
    1.0 - t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Boundary-layer profile `exp(-lambda Y)`.
pub fn profile(y: f64, lambda: C64) -> C64 {
    (-lambda * y).exp()
}

/// Terms of the expansion in powers of `delta` on one annulus mesh.
#[derive(Debug, Clone)]
pub struct SkinExpansion {
    pub delta: f64,
    pub r_sigma: f64,
    /// `kappa (1 - i) / sqrt 2`.
    pub lambda: C64,
    /// Limit field, vanishing on the interface and in the conductor.
    pub u0: ScalarField,
    /// First correction in `Omega+` (trace `w1` on the interface).
    pub u1: ScalarField,
    /// Interface amplitude of the first profile, by polar angle.
    pub w1: Vec<(f64, C64)>,
}

impl SkinExpansion {
    /// `W_1` at polar angle `theta` (periodic linear interpolation).
    pub fn w1_at(&self, theta: f64) -> C64 {
        let n = self.w1.len();
        let tau = std::f64::consts::TAU;
        let t = theta.rem_euclid(tau);
        let i = self.w1.partition_point(|p| p.0 <= t);
        let (a, b) = if i == 0 || i == n {
            (self.w1[n - 1], (self.w1[0].0 + tau, self.w1[0].1))
        } else {
            (self.w1[i - 1], self.w1[i])
        };
        let (ta, tb) = if i == 0 { (a.0 - tau, b.0 - tau) } else { (a.0, b.0) };
        let s = if tb > ta { (t - ta) / (tb - ta) } else { 0.0 };
        a.1 + (b.1 - a.1) * s
    }

    /// `sum_{k <= m} delta^k u_k` as a nodal field.
    pub fn approximation(&self, m: usize) -> Result<ScalarField> {
        let mesh = self.u0.mesh().clone();
        let mut out = self.u0.values().to_vec();
        if m >= 1 {
            let minus = mesh.side_mask(Side::Minus);
            let iface = mesh.interface_mask();
            for (i, p) in mesh.nodes().iter().enumerate() {
                if minus[i] && !iface[i] {
                    let r = norm(*p);
                    let dist = self.r_sigma - r;
                    let chi = cutoff(dist, self.r_sigma);
                    let w = self.w1_at(p[1].atan2(p[0]));
                    out[i] = self.delta * chi * w * profile(dist / self.delta, self.lambda);
                } else {
                    out[i] += self.delta * self.u1.values()[i];
                }
            }
        }
        if m >= 2 {
            return Err(Error::Precondition("expansion implemented for m <= 1".into()));
        }
        ScalarField::new(mesh, out)
    }
}

/// Builds `u0`, the profile amplitude `W_1 = dr u0 / lambda` from the
/// interface residual of the discrete limit problem, and `u1`.
pub fn skin_expansion(problem: &TmProblem, mesh: &Arc<Mesh>, bc: TmBoundary) -> Result<SkinExpansion> {
    let r_sigma = match mesh.geometry() {
        Geometry::Annulus { r_sigma, .. } => *r_sigma,
        _ => {
            return Err(Error::UnsupportedGeometry(
                "skin expansion needs an annulus mesh".into(),
            ))
        }
    };
    let n = mesh.num_nodes();
    let op = limit_operator(problem, mesh, bc)?;
    let plus_load = domain_load(mesh, &problem.j.j, Some(Side::Plus));
    let iv = C64::new(0.0, problem.nu());
    let rhs: Vec<C64> = plus_load.iter().map(|v| iv * v).collect();
    let zeros = vec![ZERO; n];
    let (u0, _) = op.solve(&rhs, Some(&zeros));

    // interface residual of the limit problem: R_i = -dr u0 m_i
    let k = stiffness(mesh, |s| if s == Side::Plus { C64::new(1.0, 0.0) } else { ZERO });
    let m = mass(mesh, |s| if s == Side::Plus { C64::new(1.0, 0.0) } else { ZERO });
    let a = k.combine(C64::new(1.0, 0.0), &m, C64::new(-problem.kappa().powi(2), 0.0));
    let res = a.matvec(&u0);
    let sig_mass = interface_lumped_mass(mesh);
    let lambda = C64::new(1.0, -1.0) * (problem.kappa() / SQRT_2);
    let mut trace = vec![ZERO; n];
    let mut w1 = Vec::new();
    for i in mesh.interface_nodes() {
        let dr = -(res[i] - rhs[i]) / sig_mass[i];
        let w = dr / lambda;
        trace[i] = w;
        let p = mesh.nodes()[i];
        w1.push((p[1].atan2(p[0]).rem_euclid(std::f64::consts::TAU), w));
    }
    w1.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (u1, _) = op.solve(&zeros, Some(&trace));
    Ok(SkinExpansion {
        delta: problem.delta(),
        r_sigma,
        lambda,
        u0: ScalarField::new(mesh.clone(), u0)?,
        u1: ScalarField::new(mesh.clone(), u1)?,
        w1,
    })
}

/// `|R+|_0 + |grad R+|_0 + delta^-1/2 |R-|_0 + delta^1/2 |grad R-|_0`.
pub fn weighted_remainder(u: &ScalarField, approx: &ScalarField, delta: f64) -> Result<f64> {
    let r = u.axpy(C64::new(-1.0, 0.0), approx)?;
    let mesh = r.mesh();
    let v = r.values();
    Ok(l2_norm_sq(mesh, v, Some(Side::Plus)).sqrt()
        + h1_semi_sq(mesh, v, Some(Side::Plus)).sqrt()
        + l2_norm_sq(mesh, v, Some(Side::Minus)).sqrt() / delta.sqrt()
        + delta.sqrt() * h1_semi_sq(mesh, v, Some(Side::Minus)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkinRow {
    pub delta: f64,
    pub m: usize,
    pub weighted_remainder: f64,
    /// Slope over the last three `delta` values up to this row.
    pub slope_window: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkinStudy {
    pub rows: Vec<SkinRow>,
    /// Fitted slope per order `m`.
    pub slopes: Vec<(usize, fit::SlopeFit)>,
}

/// Weighted remainders of the order-`m` expansions over a `delta` list.
/// `mesh_for` supplies the mesh for each `delta`; every mesh must resolve
/// its skin depth.
pub fn remainder_delta_study(
    template: &TmProblem,
    orders: &[usize],
    deltas: &[f64],
    mesh_for: impl Fn(&TmProblem) -> Result<Mesh> + Sync,
    bc: TmBoundary,
) -> Result<SkinStudy> {
    if deltas.is_empty() || orders.is_empty() {
        return Err(Error::Config("empty delta or order list".into()));
    }
    let per_delta: Vec<Vec<f64>> = deltas
        .par_iter()
        .map(|&d| {
            let p = template.with_delta(d)?;
            let mesh = Arc::new(mesh_for(&p)?);
            check_resolution(&mesh, &p)?;
            let u = solve_tm(&p, &mesh, bc)?;
            let exp = skin_expansion(&p, &mesh, bc)?;
            orders
                .iter()
                .map(|&m| weighted_remainder(&u, &exp.approximation(m)?, d))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for (oi, &m) in orders.iter().enumerate() {
        let ys: Vec<f64> = per_delta.iter().map(|v| v[oi]).collect();
        for i in 0..deltas.len() {
            let lo = (i + 1).saturating_sub(3);
            rows.push(SkinRow {
                delta: deltas[i],
                m,
                weighted_remainder: ys[i],
                slope_window: if i >= 2 {
                    fit::loglog_slope(&deltas[lo..=i], &ys[lo..=i])
                } else {
                    None
                },
            });
        }
        slopes.push((m, fit::fit(deltas, &ys)));
    }
    Ok(SkinStudy { rows, slopes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_annulus;

    fn problem(sigma: f64) -> TmProblem {
        TmProblem::from_sigma(1.0, 1.0, 1.0, sigma, TmSource::preset("ring_smooth").unwrap()).unwrap()
    }

    #[test]
    fn sigma_and_delta_routes_agree_bitwise() {
        let a = problem(1e4);
        let b = a.with_delta(a.delta()).unwrap();
        assert_eq!(a.alpha(Side::Minus), b.alpha(Side::Minus));
        assert_eq!(a.sigma().to_bits(), b.sigma().to_bits());
        assert!((a.sigma() - 1e4).abs() < 1e-8);
    }

    #[test]
    fn zero_current_gives_zero_field() {
        let mesh = Arc::new(build_annulus(1.0, 2.0, 1).unwrap());
        let mut p = problem(10.0);
        p.j = TmSource::preset("zero").unwrap();
        let u = solve_tm(&p, &mesh, TmBoundary::InsulatingAnalog).unwrap();
        assert!(u.values().iter().all(|v| v.norm() == 0.0));
        let e = energy_identities(&u, &p);
        assert_eq!(e.real_identity_residual, 0.0);
        assert_eq!(e.imag_identity_residual, 0.0);
    }

    #[test]
    fn energy_identities_and_linearity() {
        let mesh = Arc::new(build_annulus(1.0, 2.0, 2).unwrap());
        for bc in [TmBoundary::InsulatingAnalog, TmBoundary::ConductingAnalog] {
            let p = problem(30.0);
            let u = solve_tm(&p, &mesh, bc).unwrap();
            let e = energy_identities(&u, &p);
            assert!(
                e.real_identity_residual < 1e-9 && e.imag_identity_residual < 1e-9,
                "{e:?}"
            );
            let mut q = p.clone();
            q.j = p.j.scaled(C64::new(2.0, 0.0));
            let v = solve_tm(&q, &mesh, bc).unwrap();
            for (a, b) in u.values().iter().zip(v.values()) {
                assert!((a * 2.0 - b).norm() <= 1e-12 * (1.0 + b.norm()));
            }
        }
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.0, 1.0), 1.0);
        assert_eq!(cutoff(0.4, 1.0), 1.0);
        assert_eq!(cutoff(0.8, 1.0), 0.0);
        assert!((cutoff(0.6, 1.0) - 0.5).abs() < 1e-15);
        // three skin depths: Y = 3 sqrt 2 in units of delta with kappa = 1
        let lambda = C64::new(1.0, -1.0) / SQRT_2;
        let y = 3.0 * SQRT_2;
        assert!((profile(y, lambda).norm() - (-3.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn under_resolved_layer_is_rejected() {
        let mesh = Arc::new(build_annulus(1.0, 2.0, 2).unwrap());
        let err = sigma_sweep(&problem(1.0), &[1e6], &mesh, TmBoundary::InsulatingAnalog).unwrap_err();
        assert!(matches!(err, Error::Resolution { .. }));
    }

    #[test]
    fn resonance_probe_is_moderate_at_unit_frequency() {
        let mesh = build_annulus(1.0, 2.0, 2).unwrap();
        let (p, probe) = ensure_nonresonant(&problem(1e3), &mesh, TmBoundary::InsulatingAnalog).unwrap();
        assert_eq!(probe.shifts, 0);
        assert_eq!(p.omega, 1.0);
        assert!(probe.condition < 1e4);
    }
}
