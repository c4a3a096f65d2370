//! Expansion of the transmission solution in powers of `1 / rho` by
//! alternating subdomain solves.
//!
//! Write `L` for the subdomain with the large coefficient and `S` for the
//! other one, `rho = a_L / a_S`. Dividing the discrete system by `a_S` gives
//! `(K_S + rho K_L) phi = rho b1 + b0`, and `phi = sum_k rho^-k phi_k` with
//!
//! * `K_L phi_k = d_k` on the `L` nodes, where `d_0 = b1`,
//!   `d_1 = b0 - K_S phi_0` and `d_k = -K_S phi_{k-1}` (the last two read on
//!   `L` nodes, so `K_S` only contributes on the interface);
//! * `K_S phi_k = [k = 0] b0` on the nodes of `S` away from the interface,
//!   with the interface trace taken from the `L` step.
//!
//! The interface rows of `K_S phi` are the discrete normal flux, so the
//! partial sums telescope to the discrete monolithic solution. When `L` is
//! floating (pure Neumann) while `S` carries a Dirichlet boundary, each `L`
//! step is fixed up to a constant; that constant `c_k` is chosen through the
//! harmonic lifting `psi` so that the next step is solvable.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    constrain, domain_load, interface_load, stiffness_side, ConstraintKind, NormCalculator, NormReport,
    ReducedOperator, ScalarField,
};
use crate::mesh::{Mesh, Side};
use crate::transmission::{DirectSolver, ExteriorBc, TransmissionProblem, Variant};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Relative tolerance on the solvability of the first two steps.
pub const DATA_COMPATIBILITY_TOL: f64 = 1e-10;
/// Relative tolerance on the solvability of later steps.
pub const STEP_COMPATIBILITY_TOL: f64 = 1e-8;
/// Safety factor between the estimated ratio and the reported threshold.
pub const RHO0_SAFETY: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    NeumannLargeMinus,
    DirichletLargeMinus,
    NeumannLargePlus,
    DirichletLargePlus,
}

impl Regime {
    pub fn new(bc: ExteriorBc, large: Side) -> Regime {
        match (bc, large) {
            (ExteriorBc::Neumann, Side::Minus) => Regime::NeumannLargeMinus,
            (ExteriorBc::Dirichlet, Side::Minus) => Regime::DirichletLargeMinus,
            (ExteriorBc::Neumann, Side::Plus) => Regime::NeumannLargePlus,
            (ExteriorBc::Dirichlet, Side::Plus) => Regime::DirichletLargePlus,
        }
    }

    /// Regime of a problem: the side with the larger `|a|` is large.
    pub fn of(problem: &TransmissionProblem) -> Regime {
        let large = if problem.a_minus.norm() >= problem.a_plus.norm() {
            Side::Minus
        } else {
            Side::Plus
        };
        Regime::new(problem.bc, large)
    }

    pub fn bc(self) -> ExteriorBc {
        match self {
            Regime::NeumannLargeMinus | Regime::NeumannLargePlus => ExteriorBc::Neumann,
            _ => ExteriorBc::Dirichlet,
        }
    }

    pub fn large_side(self) -> Side {
        match self {
            Regime::NeumannLargeMinus | Regime::DirichletLargeMinus => Side::Minus,
            _ => Side::Plus,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::NeumannLargeMinus => "neumann_large_minus",
            Regime::DirichletLargeMinus => "dirichlet_large_minus",
            Regime::NeumannLargePlus => "neumann_large_plus",
            Regime::DirichletLargePlus => "dirichlet_large_plus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesStatus {
    Converged,
    RatioGeOne,
    MaxTerms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub k_max: usize,
    pub tol: f64,
    /// Terms computed before convergence may be declared.
    pub min_terms: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            k_max: 60,
            tol: 1e-13,
            min_terms: 8,
        }
    }
}

/// Harmonic lifting of the interface into the small subdomain.
#[derive(Debug, Clone)]
pub struct DirichletCorrector {
    /// 1 on the interface, 0 on the outer boundary, discretely harmonic in
    /// between; extended by 1 into the large subdomain.
    pub psi: ScalarField,
    /// Discrete `int_Sigma dn psi`, the interface residual of `psi` paired
    /// with the all-ones interface lifting.
    pub flux_denominator: C64,
}

/// The lifting `psi` on `small` (normally `Omega+`).
pub fn build_dirichlet_corrector(mesh: &Arc<Mesh>, small: Side) -> Result<DirichletCorrector> {
    let iface = mesh.interface_nodes();
    if iface.is_empty() || mesh.boundary_nodes().is_empty() {
        return Err(Error::Precondition(
            "corrector needs an interface and an outer boundary".into(),
        ));
    }
    let ks = stiffness_side(mesh, small);
    let op = constrain(
        mesh,
        &ks,
        &[ConstraintKind::DirichletOnSigma, ConstraintKind::DirichletExterior],
        Some(small),
    )?;
    let n = mesh.num_nodes();
    let bnd = mesh.boundary_mask();
    let mut fixed = vec![ZERO; n];
    for &i in &iface {
        if !bnd[i] {
            fixed[i] = C64::new(1.0, 0.0);
        }
    }
    let (mut psi, _) = op.solve(&vec![ZERO; n], Some(&fixed));
    let r = ks.matvec(&psi);
    let denominator: C64 = iface.iter().filter(|&&i| !bnd[i]).map(|&i| r[i]).sum();
    if denominator.norm() < 1e-12 * mesh.interface_length() {
        return Err(Error::Geometry("vanishing flux of the harmonic lifting".into()));
    }
    let smask = mesh.side_mask(small);
    for i in 0..n {
        if !smask[i] {
            psi[i] = C64::new(1.0, 0.0);
        }
    }
    Ok(DirichletCorrector {
        psi: ScalarField::new(mesh.clone(), psi)?,
        flux_denominator: denominator,
    })
}

/// `c_k = -(flux + [k = 0] source) / denominator`, where `flux` is the
/// interface flux of the uncorrected term and `source` the integral of the
/// large-side data.
pub fn compute_constant_ck(corrector: &DirichletCorrector, flux: C64, source: C64, k: usize) -> C64 {
    let s = if k == 0 { source } else { ZERO };
    -(flux + s) / corrector.flux_denominator
}

fn compatibility(data: &[C64], nodes: &[usize], tol: f64) -> Result<()> {
    let sum: C64 = nodes.iter().map(|&i| data[i]).sum();
    let scale: f64 = nodes.iter().map(|&i| data[i].norm()).sum();
    if sum.norm() > tol * scale {
        return Err(Error::Compatibility {
            condition: "int_Sigma step datum = 0",
            residual: sum.norm() / scale,
            tolerance: tol,
        });
    }
    Ok(())
}

/// One term of the chain.
#[derive(Debug, Clone)]
pub struct SeriesTerm {
    pub field: ScalarField,
    pub constant: Option<C64>,
    pub norms: NormReport,
}

/// Factorized subdomain operators and the lazily grown chain of terms for
/// one problem family. The terms do not depend on `rho`, so a context
/// serves a whole sweep.
pub struct SeriesContext {
    mesh: Arc<Mesh>,
    regime: Regime,
    a_small: C64,
    k_small: crate::sparse::CsrMatrix,
    large_op: ReducedOperator,
    small_op: ReducedOperator,
    large_nodes: Vec<usize>,
    large_floating: bool,
    corrector: Option<DirichletCorrector>,
    b1: Vec<C64>,
    b0: Vec<C64>,
    /// Small-side part of `b0`.
    b0_small: Vec<C64>,
    /// `-sum b0` over the large-side contributions (corrector source).
    source: C64,
    zero_data: bool,
    calc: NormCalculator,
    terms: Vec<SeriesTerm>,
}

impl SeriesContext {
    /// Builds the context for `problem` in `regime`; the small-side
    /// coefficient of `problem` is kept, the large one is set per run.
    pub fn new(problem: &TransmissionProblem, regime: Regime, mesh: &Arc<Mesh>) -> Result<Self> {
        if regime.bc() != problem.bc {
            return Err(Error::Precondition(format!(
                "regime {} does not match the exterior condition",
                regime.name()
            )));
        }
        let large = regime.large_side();
        let small = large.other();
        let a_small = problem.coefficient(small);
        let n = mesh.num_nodes();
        let k_large = stiffness_side(mesh, large);
        let k_small = stiffness_side(mesh, small);
        let bnd = mesh.boundary_mask();
        let lmask = mesh.side_mask(large);
        let large_touches_boundary = (0..n).any(|i| lmask[i] && bnd[i]);
        let large_floating = problem.bc == ExteriorBc::Neumann || !large_touches_boundary;
        let large_op = if large_floating {
            constrain(
                mesh,
                &k_large,
                &[ConstraintKind::NeumannPure, ConstraintKind::ZeroMean],
                Some(large),
            )?
        } else {
            constrain(mesh, &k_large, &[ConstraintKind::DirichletExterior], Some(large))?
        };
        let small_kinds: &[ConstraintKind] = match problem.bc {
            ExteriorBc::Dirichlet => &[ConstraintKind::DirichletOnSigma, ConstraintKind::DirichletExterior],
            ExteriorBc::Neumann => &[ConstraintKind::DirichletOnSigma],
        };
        let small_op = constrain(mesh, &k_small, small_kinds, Some(small))?;
        let corrector = if large_floating && problem.bc == ExteriorBc::Dirichlet {
            Some(build_dirichlet_corrector(mesh, small)?)
        } else {
            None
        };

        // b = -F + s G, divided by a_S and split into powers of rho
        let f_large = domain_load(mesh, &problem.f.f, Some(large));
        let f_small = domain_load(mesh, &problem.f.f, Some(small));
        let g = interface_load(mesh, &problem.g.g, C64::new(1.0, 0.0));
        let g_eff = if large == Side::Minus { 1.0 } else { -1.0 };
        let (c1, c0) = match problem.variant {
            Variant::Standard => (-g_eff * C64::new(1.0, 0.0), g_eff * C64::new(1.0, 0.0)),
            Variant::Modified => (ZERO, 1.0 / a_small),
        };
        let b1: Vec<C64> = g.iter().map(|v| c1 * v).collect();
        let b0_large: Vec<C64> = (0..n).map(|i| -f_large[i] / a_small + c0 * g[i]).collect();
        let b0_small: Vec<C64> = f_small.iter().map(|v| -v / a_small).collect();
        let b0: Vec<C64> = (0..n).map(|i| b0_large[i] + b0_small[i]).collect();
        let source = -b0_large.iter().sum::<C64>();
        let zero_data = b1.iter().chain(&b0).all(|v| *v == ZERO);
        let large_nodes = crate::mesh::mask_to_indices(&lmask);
        Ok(Self {
            mesh: mesh.clone(),
            regime,
            a_small,
            k_small,
            large_op,
            small_op,
            large_nodes,
            large_floating,
            corrector,
            b1,
            b0,
            b0_small,
            source,
            zero_data,
            calc: NormCalculator::new(mesh.clone()),
            terms: Vec::new(),
        })
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn corrector(&self) -> Option<&DirichletCorrector> {
        self.corrector.as_ref()
    }

    pub fn terms(&self) -> &[SeriesTerm] {
        &self.terms
    }

    /// Coefficient pair `(a+, a-)` for a given `rho = a_L / a_S`.
    pub fn coefficients(&self, rho: C64) -> (C64, C64) {
        match self.regime.large_side() {
            Side::Minus => (self.a_small, rho * self.a_small),
            Side::Plus => (rho * self.a_small, self.a_small),
        }
    }

    /// Data `d_k` of the large-side step, given the previous term.
    pub fn transfer_data(&self, k: usize, previous: Option<&ScalarField>) -> Vec<C64> {
        let n = self.mesh.num_nodes();
        let mut d = vec![ZERO; n];
        let base = match k {
            0 => Some(&self.b1),
            1 => Some(&self.b0),
            _ => None,
        };
        let ks_prev = previous.map(|p| self.k_small.matvec(p.values()));
        for &i in &self.large_nodes {
            let mut v = base.map_or(ZERO, |b| b[i]);
            if let Some(r) = &ks_prev {
                v -= r[i];
            }
            d[i] = v;
        }
        d
    }

    /// Solve on the large side with data `d` (read on large-side nodes).
    pub fn large_step(&self, d: &[C64], k: usize) -> Result<Vec<C64>> {
        if self.large_floating {
            let tol = if k <= 1 {
                DATA_COMPATIBILITY_TOL
            } else {
                STEP_COMPATIBILITY_TOL
            };
            compatibility(d, &self.large_nodes, tol)?;
        }
        let zeros = vec![ZERO; d.len()];
        Ok(self.large_op.solve(d, Some(&zeros)).0)
    }

    /// Extends `large` (valid on large-side nodes) into the small side,
    /// taking the interface values as Dirichlet data.
    pub fn small_step(&self, large: &[C64], k: usize) -> Vec<C64> {
        let n = large.len();
        let zeros = vec![ZERO; n];
        let rhs = if k == 0 { &self.b0 } else { &zeros };
        // `large` vanishes off the large side, in particular on the small
        // part of the outer boundary
        let (small, _) = self.small_op.solve(rhs, Some(large));
        let mut out = large.to_vec();
        for &i in self.small_op.free_nodes() {
            out[i] = small[i];
        }
        out
    }

    fn compute_term(&self, k: usize) -> Result<SeriesTerm> {
        let d = self.transfer_data(k, self.terms.last().map(|t| &t.field));
        let large = self.large_step(&d, k)?;
        let mut phi = self.small_step(&large, k);
        let mut constant = None;
        if let Some(corr) = &self.corrector {
            let r = self.k_small.matvec(&phi);
            let bnd = self.mesh.boundary_mask();
            let mut flux = ZERO;
            for i in self.mesh.interface_nodes() {
                if !bnd[i] {
                    flux += r[i] - if k == 0 { self.b0_small[i] } else { ZERO };
                }
            }
            let c = compute_constant_ck(corr, flux, self.source, k);
            for (p, s) in phi.iter_mut().zip(corr.psi.values()) {
                *p += c * s;
            }
            constant = Some(c);
        }
        let norms = self.calc.report(&phi, None);
        Ok(SeriesTerm {
            field: ScalarField::new(self.mesh.clone(), phi)?,
            constant,
            norms,
        })
    }

    /// Makes sure the first `n` terms exist.
    pub fn ensure_terms(&mut self, n: usize) -> Result<()> {
        while self.terms.len() < n {
            let t = self.compute_term(self.terms.len())?;
            self.terms.push(t);
        }
        Ok(())
    }

    /// Runs the series at `rho = a_L / a_S`.
    pub fn run(&mut self, rho: C64, options: &SeriesOptions) -> Result<SeriesRun> {
        if rho.norm() <= 1.0 || !rho.is_finite() {
            return Err(Error::Precondition(format!("|rho| = {} must exceed 1", rho.norm())));
        }
        let n = self.mesh.num_nodes();
        let mut partial = vec![ZERO; n];
        let mut ratios: Vec<Option<f64>> = Vec::new();
        let mut above = 0;
        let mut status = SeriesStatus::MaxTerms;
        let mut used = 0;
        for k in 0..=options.k_max {
            self.ensure_terms(k + 1)?;
            used = k + 1;
            let t = &self.terms[k];
            let w = rho.powi(-(k as i32));
            for (p, v) in partial.iter_mut().zip(t.field.values()) {
                *p += w * v;
            }
            if self.zero_data {
                status = SeriesStatus::Converged;
                break;
            }
            let size = t.norms.proxy();
            if k >= 1 {
                let prev = self.terms[k - 1].norms.proxy();
                let r = (prev > 0.0).then(|| size / prev);
                ratios.push(r);
                if r.is_some_and(|r| r / rho.norm() >= 1.0) {
                    above += 1;
                } else {
                    above = 0;
                }
                if above >= 3 {
                    status = SeriesStatus::RatioGeOne;
                    break;
                }
            }
            if k + 1 >= options.min_terms {
                let scaled = w.norm() * size;
                let total = self.calc.report(&partial, None).proxy();
                if scaled <= options.tol * total {
                    status = SeriesStatus::Converged;
                    break;
                }
            }
        }
        // ratios[j] compares terms j + 1 and j; skip the first transition
        let tail: Vec<f64> = ratios.iter().skip(1).filter_map(|r| *r).filter(|r| *r > 0.0).collect();
        let last = &tail[tail.len().saturating_sub(5)..];
        let alpha_hat = if last.is_empty() {
            0.0
        } else {
            (last.iter().map(|r| r.ln()).sum::<f64>() / last.len() as f64).exp()
        };
        Ok(SeriesRun {
            regime: self.regime,
            rho,
            coefficients: self.coefficients(rho),
            terms: self.terms[..used].to_vec(),
            alpha_hat,
            status,
            floating: self.regime.bc() == ExteriorBc::Neumann,
        })
    }

    /// Exact remainder `phi - sum_{k <= K} rho^-k phi_k` at `rho`, from the
    /// truncation residual `-rho^-K d_{K+1}` (no cancellation).
    pub fn remainder(&mut self, rho: C64, order: usize, solver: &DirectSolver) -> Result<ScalarField> {
        self.ensure_terms(order + 1)?;
        solver.solve_load(&self.remainder_load(rho, order))
    }

    /// Load of the remainder problem; needs terms up to `order`.
    fn remainder_load(&self, rho: C64, order: usize) -> Vec<C64> {
        let d = self.transfer_data(order + 1, Some(&self.terms[order].field));
        let w = rho.powi(-(order as i32)) * self.a_small;
        d.iter().map(|v| v * w).collect()
    }
}

/// Outcome of a series run at one `rho`.
#[derive(Debug, Clone)]
pub struct SeriesRun {
    pub regime: Regime,
    /// `a_L / a_S`.
    pub rho: C64,
    /// `(a+, a-)`.
    pub coefficients: (C64, C64),
    pub terms: Vec<SeriesTerm>,
    pub alpha_hat: f64,
    pub status: SeriesStatus,
    floating: bool,
}

impl SeriesRun {
    pub fn term_norms(&self) -> Vec<NormReport> {
        self.terms.iter().map(|t| t.norms).collect()
    }

    /// `c_k` for the corrected regimes.
    pub fn constants(&self) -> Vec<Option<C64>> {
        self.terms.iter().map(|t| t.constant).collect()
    }

    /// Term `phi_k` restricted to one side.
    pub fn term_on(&self, k: usize, side: Side) -> ScalarField {
        self.terms[k].field.restricted(side)
    }

    /// `sum_{k <= order} rho^-k phi_k`; zero mean for Neumann problems.
    pub fn partial_sum(&self, order: usize) -> ScalarField {
        let mesh = self.terms[0].field.mesh().clone();
        let mut acc = vec![ZERO; mesh.num_nodes()];
        for (k, t) in self.terms.iter().take(order + 1).enumerate() {
            let w = self.rho.powi(-(k as i32));
            for (a, v) in acc.iter_mut().zip(t.field.values()) {
                *a += w * v;
            }
        }
        let f = ScalarField::new(mesh, acc).expect("term length matches mesh");
        if self.floating {
            f.zero_mean()
        } else {
            f
        }
    }

    pub fn partial_sums(&self) -> Vec<ScalarField> {
        (0..self.terms.len()).map(|k| self.partial_sum(k)).collect()
    }

    pub fn sum(&self) -> ScalarField {
        self.partial_sum(self.terms.len() - 1)
    }

    /// `1.5 alpha_hat`, the empirical convergence threshold.
    pub fn rho0(&self) -> f64 {
        RHO0_SAFETY * self.alpha_hat
    }

    /// `(|phi_k| / |phi_0|)^(1/k)` in the proxy norm.
    pub fn cumulative_ratio(&self, k: usize) -> Option<f64> {
        let n0 = self.terms[0].norms.proxy();
        if k == 0 || n0 == 0.0 {
            return None;
        }
        Some((self.terms[k].norms.proxy() / n0).powf(1.0 / k as f64))
    }

    /// Largest relative deviation of the last five ratios from `alpha_hat`.
    pub fn ratio_spread(&self) -> Option<f64> {
        let p: Vec<f64> = self.terms.iter().map(|t| t.norms.proxy()).collect();
        let ratios: Vec<f64> = p
            .windows(2)
            .skip(1)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect();
        if ratios.len() < 5 || self.alpha_hat == 0.0 {
            return None;
        }
        Some(
            ratios[ratios.len() - 5..]
                .iter()
                .map(|r| (r / self.alpha_hat - 1.0).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// Builds a context for `problem` in its own regime and runs it at the
/// problem's contrast.
pub fn run_series(problem: &TransmissionProblem, mesh: &Arc<Mesh>, options: &SeriesOptions) -> Result<SeriesRun> {
    let regime = Regime::of(problem);
    let mut ctx = SeriesContext::new(problem, regime, mesh)?;
    let rho = match regime.large_side() {
        Side::Minus => problem.a_minus / problem.a_plus,
        Side::Plus => problem.a_plus / problem.a_minus,
    };
    ctx.run(rho, options)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderRow {
    pub order: usize,
    pub rho: C64,
    pub proxy: f64,
}

/// Proxy norms of `direct - partial_sum(K)` for every available `K`.
pub fn compare_to_direct(series: &SeriesRun, direct: &ScalarField) -> Result<Vec<RemainderRow>> {
    let mesh = series.terms[0].field.mesh();
    if !direct.same_mesh(&series.terms[0].field) {
        return Err(Error::Precondition("direct solution lives on a different mesh".into()));
    }
    let calc = NormCalculator::new(mesh.clone());
    let direct = if series.floating {
        direct.zero_mean()
    } else {
        direct.clone()
    };
    (0..series.terms.len())
        .map(|k| {
            let diff = direct.axpy(C64::new(-1.0, 0.0), &series.partial_sum(k))?;
            Ok(RemainderRow {
                order: k,
                rho: series.rho,
                proxy: calc.report(diff.values(), None).proxy(),
            })
        })
        .collect()
}

/// Remainder proxy norms for orders `0..=max_order` over a `rho` sweep via
/// the residual route; rows ordered by `rho`, then order.
pub fn remainder_sweep(ctx: &mut SeriesContext, rhos: &[C64], max_order: usize) -> Result<Vec<RemainderRow>> {
    ctx.ensure_terms(max_order + 1)?;
    let ctx = &*ctx;
    let calc = NormCalculator::new(ctx.mesh.clone());
    let rows: Result<Vec<Vec<RemainderRow>>> = rhos
        .par_iter()
        .map(|&rho| {
            let (ap, am) = ctx.coefficients(rho);
            let solver = DirectSolver::new(&ctx.mesh, ctx.regime.bc(), ap, am)?;
            (0..=max_order)
                .map(|k| {
                    let r = solver.solve_load(&ctx.remainder_load(rho, k))?;
                    Ok(RemainderRow {
                        order: k,
                        rho,
                        proxy: calc.report(r.values(), None).proxy(),
                    })
                })
                .collect()
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_annulus;
    use crate::oracle::{limit_chain, RadialBc};
    use crate::transmission::{solve_direct, DomainData, InterfaceData};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn cos_problem(bc: ExteriorBc, rho: C64) -> TransmissionProblem {
        TransmissionProblem::new(
            bc,
            c(1.0),
            rho,
            DomainData::zero(),
            InterfaceData::preset("cos").unwrap(),
            Variant::Standard,
        )
        .unwrap()
    }

    fn rel_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        let d = a.axpy(c(-1.0), b).unwrap();
        crate::sparse::norm2(d.values()) / crate::sparse::norm2(b.values())
    }

    #[test]
    fn series_sums_to_direct_solution() {
        let mesh = Arc::new(build_annulus(1.0, 2.0, 2).unwrap());
        for bc in [ExteriorBc::Neumann, ExteriorBc::Dirichlet] {
            for rho in [c(100.0), C64::new(0.0, 100.0)] {
                let p = cos_problem(bc, rho);
                let run = run_series(&p, &mesh, &SeriesOptions::default()).unwrap();
                assert_eq!(run.status, SeriesStatus::Converged);
                let direct = solve_direct(&p, &mesh).unwrap();
                assert!(rel_diff(&run.sum(), &direct) < 1e-10, "{bc:?} {rho}");
            }
        }
    }

    #[test]
    fn neumann_chain_matches_radial_recursion() {
        let mesh = Arc::new(build_annulus(1.0, 2.0, 3).unwrap());
        let p = cos_problem(ExteriorBc::Neumann, c(100.0));
        let mut ctx = SeriesContext::new(&p, Regime::NeumannLargeMinus, &mesh).unwrap();
        ctx.ensure_terms(4).unwrap();
        let chain = limit_chain(1, RadialBc::Neumann, c(1.0), 1.0, 2.0, 4).unwrap();
        let iface = mesh.interface_nodes();
        for (k, [a, _, _]) in chain.iter().enumerate() {
            let phi = ctx.terms()[k].field.values();
            let err = iface
                .iter()
                .map(|&i| {
                    let x = mesh.nodes()[i][0];
                    (phi[i] - a * x).norm()
                })
                .fold(0.0, f64::max);
            assert!(err < 2e-2 * a.norm(), "term {k}: {err}");
        }
        let run = ctx.run(c(100.0), &SeriesOptions::default()).unwrap();
        assert!((run.alpha_hat - 0.6).abs() < 0.02, "{}", run.alpha_hat);
        let spread = run.ratio_spread().unwrap();
        assert!(spread < 1e-2, "{spread}");
    }

    #[test]
    fn zero_data_converges_immediately() {
        let mesh = Arc::new(build_annulus(1.0, 2.0, 1).unwrap());
        let mut p = cos_problem(ExteriorBc::Dirichlet, c(50.0));
        p.g = InterfaceData::zero();
        let run = run_series(&p, &mesh, &SeriesOptions::default()).unwrap();
        assert_eq!(run.status, SeriesStatus::Converged);
        assert_eq!(run.terms.len(), 1);
        assert!(run.sum().values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn corrector_denominator_and_first_constant() {
        let mesh = Arc::new(build_annulus(1.0, 2.0, 3).unwrap());
        let corr = build_dirichlet_corrector(&mesh, Side::Plus).unwrap();
        let exact = 2.0 * std::f64::consts::PI / std::f64::consts::LN_2;
        assert!((corr.flux_denominator.re - exact).abs() < 2e-2 * exact);
        let p = TransmissionProblem::new(
            ExteriorBc::Dirichlet,
            c(1.0),
            c(100.0),
            DomainData::preset("one_minus").unwrap(),
            InterfaceData::zero(),
            Variant::Standard,
        )
        .unwrap();
        let mut ctx = SeriesContext::new(&p, Regime::DirichletLargeMinus, &mesh).unwrap();
        ctx.ensure_terms(1).unwrap();
        let c0 = ctx.terms()[0].constant.unwrap();
        // -area(Omega-) / (2 pi / ln 2) on the discrete geometry
        let expected = -mesh.area(Side::Minus) / corr.flux_denominator.re;
        assert!((c0.re - expected).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_constant_interface_data_is_rejected() {
        let mesh = Arc::new(build_annulus(1.0, 2.0, 1).unwrap());
        let mut p = cos_problem(ExteriorBc::Dirichlet, c(100.0));
        p.g = InterfaceData::preset("one").unwrap();
        let err = run_series(&p, &mesh, &SeriesOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Compatibility { .. }));
    }

    #[test]
    fn residual_route_matches_subtraction() {
        let mesh = Arc::new(build_annulus(1.0, 2.0, 2).unwrap());
        for bc in [ExteriorBc::Neumann, ExteriorBc::Dirichlet] {
            let p = cos_problem(bc, c(20.0));
            let direct = solve_direct(&p, &mesh).unwrap();
            let mut ctx = SeriesContext::new(&p, Regime::of(&p), &mesh).unwrap();
            let run = ctx.run(c(20.0), &SeriesOptions::default()).unwrap();
            let rows = compare_to_direct(&run, &direct).unwrap();
            let routed = remainder_sweep(&mut ctx, &[c(20.0)], 2).unwrap();
            for k in 0..=2 {
                let a = rows[k].proxy;
                let b = routed[k].proxy;
                assert!((a - b).abs() < 1e-8 * a, "{bc:?} K={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn large_plus_equals_swapped_large_minus() {
        let mesh = Arc::new(build_annulus(1.0, 2.0, 1).unwrap());
        let p = TransmissionProblem::new(
            ExteriorBc::Neumann,
            c(100.0),
            c(1.0),
            DomainData::zero(),
            InterfaceData::preset("cos").unwrap(),
            Variant::Standard,
        )
        .unwrap();
        let mut a = SeriesContext::new(&p, Regime::NeumannLargePlus, &mesh).unwrap();
        let swapped_mesh = Arc::new(mesh.swap_sides().unwrap());
        let mut b = SeriesContext::new(&p.swapped(), Regime::NeumannLargeMinus, &swapped_mesh).unwrap();
        a.ensure_terms(5).unwrap();
        b.ensure_terms(5).unwrap();
        for k in 0..5 {
            let (x, y) = (a.terms()[k].field.values(), b.terms()[k].field.values());
            let d = x.iter().zip(y).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            assert!(d < 1e-12, "term {k}: {d}");
        }
    }
}
