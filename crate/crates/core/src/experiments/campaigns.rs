//! The eight campaigns. Each fills a [`Recorder`] with tables, mesh records
//! and the predicates to evaluate on those tables.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CampaignConfig, CampaignKind, GeometryKind};
use super::predicate::{Predicate, RowFilter};
use super::table::Table;
use crate::error::{Error, Result};
use crate::fem::NormCalculator;
use crate::helmholtz::{ensure_nonresonant, remainder_delta_study, sigma_sweep, TmBoundary, TmProblem, TmSource};
use crate::mesh::{Mesh, Side};
use crate::powerseries::{compare_to_direct, remainder_sweep, Regime, SeriesContext, SeriesOptions, SeriesRun};
use crate::transmission::{
    solve_direct, sweep_coefficients, DataNorm, DomainData, ExteriorBc, InterfaceData, TransmissionProblem,
    UniformityRow, Variant,
};

pub const SWEEP_COLUMNS: [&str; 11] = [
    "rho_re",
    "rho_im",
    "l2_plus",
    "l2_minus",
    "h1_plus",
    "h1_minus",
    "l2_sigma",
    "h1_sigma",
    "flux_sigma",
    "data_norm",
    "ratio",
];
pub const SERIES_COLUMNS: [&str; 6] = [
    "k",
    "term_norm_minus",
    "term_norm_plus",
    "c_k_re",
    "c_k_im",
    "cumulative_ratio",
];
pub const REMAINDER_COLUMNS: [&str; 3] = ["K", "rho", "remainder_proxy_norm"];
pub const TM_COLUMNS: [&str; 9] = [
    "sigma",
    "delta",
    "l2_all",
    "l2_minus",
    "h1_all",
    "sqrt_sigma_l2_minus",
    "j_l2",
    "j_hdiv",
    "ratio",
];
pub const ENERGY_COLUMNS: [&str; 3] = ["sigma", "real_identity_residual", "imag_identity_residual"];
pub const SKIN_COLUMNS: [&str; 4] = ["delta", "m", "weighted_remainder", "slope_window"];

/// Uniformity bound on `max / min` of the monitored ratio.
pub const UNIFORMITY_SPREAD: f64 = 2.0;
/// Series-direct agreement, relative to the direct solution.
pub const EQUIVALENCE_TOL: f64 = 1e-8;
/// Relative band of the last five term-norm ratios.
pub const GEOMETRIC_TOL: f64 = 0.1;
pub const ANNULUS_FLUX_SPREAD: f64 = 1.5;
pub const TM_RATIO_SPREAD: f64 = 2.0;
pub const TM_WEIGHTED_SPREAD: f64 = 3.0;
pub const TM_SLOPE: f64 = -0.5;
pub const TM_SLOPE_TOL: f64 = 0.1;
pub const ENERGY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshRecord {
    pub label: String,
    pub nodes: usize,
    pub triangles: usize,
    pub h_max: f64,
    pub sha256: String,
}

impl MeshRecord {
    pub fn of(label: impl Into<String>, mesh: &Mesh) -> Self {
        Self {
            label: label.into(),
            nodes: mesh.num_nodes(),
            triangles: mesh.triangles().len(),
            h_max: mesh.h_max(),
            sha256: mesh.fingerprint(),
        }
    }
}

#[derive(Default)]
pub struct Recorder {
    pub tables: Vec<Table>,
    pub meshes: Vec<MeshRecord>,
    pub predicates: Vec<(String, Predicate)>,
    pub notes: Vec<String>,
}

impl Recorder {
    fn predicate(&mut self, name: impl Into<String>, p: Predicate) {
        self.predicates.push((name.into(), p));
    }
}

pub fn run(cfg: &CampaignConfig, rec: &mut Recorder) -> Result<()> {
    match cfg.campaign {
        CampaignKind::Uniformity => uniformity(cfg, rec, "uniformity", false, DataNorm::Standard),
        CampaignKind::Series => series(cfg, rec, Side::Minus),
        CampaignKind::LimitRate => limit_rate(cfg, rec),
        CampaignKind::Symmetric => {
            series(cfg, rec, Side::Plus)?;
            uniformity(cfg, rec, "uniformity", true, DataNorm::Symmetric)
        }
        CampaignKind::Modified => {
            series(cfg, rec, Side::Minus)?;
            uniformity(cfg, rec, "uniformity", false, DataNorm::Standard)
        }
        CampaignKind::Checkerboard => checkerboard(cfg, rec),
        CampaignKind::MaxwellUniform => maxwell(cfg, rec),
        CampaignKind::Skin => skin(cfg, rec),
    }
}

fn bc_name(bc: ExteriorBc) -> &'static str {
    match bc {
        ExteriorBc::Dirichlet => "dirichlet",
        ExteriorBc::Neumann => "neumann",
    }
}

fn tm_boundary(bc: ExteriorBc) -> TmBoundary {
    match bc {
        ExteriorBc::Dirichlet => TmBoundary::ConductingAnalog,
        ExteriorBc::Neumann => TmBoundary::InsulatingAnalog,
    }
}

/// Problem with `a+ = a- = 1` carrying the configured data.
fn template(cfg: &CampaignConfig, bc: ExteriorBc, mesh: &Mesh) -> Result<TransmissionProblem> {
    let mut f = DomainData::preset(&cfg.data.f)?;
    if cfg.data.center_f {
        f = f.centered(mesh);
    }
    let mut g = InterfaceData::preset(&cfg.data.g)?;
    if cfg.data.center_g {
        g = g.centered(mesh);
    }
    let one = C64::new(1.0, 0.0);
    let variant = match cfg.campaign {
        CampaignKind::Modified => Variant::Modified,
        _ => cfg.physics.variant,
    };
    TransmissionProblem::new(bc, one, one, f, g, variant)
}

fn show(z: C64) -> String {
    format!("{:.3e}{:+.3e}i", z.re, z.im)
}

fn sweep_row(r: &UniformityRow) -> Vec<Option<f64>> {
    let n = &r.norms;
    vec![
        Some(r.rho.re),
        Some(r.rho.im),
        Some(n.l2_plus),
        Some(n.l2_minus),
        Some(n.h1_plus),
        Some(n.h1_minus),
        Some(n.l2_sigma),
        Some(n.h1_sigma),
        Some(n.flux_l2_sigma),
        Some(r.data_norm),
        r.ratio,
    ]
}

/// Contrasts `|rho| e^{i arg}` for one argument; inverted for the regime
/// with a large `Omega+`.
fn contrasts(cfg: &CampaignConfig, arg: f64, inverted: bool) -> Vec<C64> {
    cfg.physics
        .rho
        .iter()
        .map(|&m| {
            let r = C64::from_polar(m, arg);
            if inverted {
                r.inv()
            } else {
                r
            }
        })
        .collect()
}

fn uniformity(cfg: &CampaignConfig, rec: &mut Recorder, prefix: &str, inverted: bool, kind: DataNorm) -> Result<()> {
    let mesh = cfg.geometry.mesh()?;
    rec.meshes.push(MeshRecord::of(prefix, &mesh));
    for &bc in &cfg.physics.bc {
        let t = template(cfg, bc, &mesh)?;
        for (ai, &arg) in cfg.physics.rho_arg.iter().enumerate() {
            let pairs: Vec<(C64, C64)> = contrasts(cfg, arg, inverted)
                .into_iter()
                .map(|r| (C64::new(1.0, 0.0), r))
                .collect();
            let rows = sweep_coefficients(&t, &pairs, &mesh, kind)?;
            let mut table = Table::new(format!("{prefix}_{}_arg{ai}", bc_name(bc)), &SWEEP_COLUMNS);
            for r in &rows {
                table.push(sweep_row(r));
            }
            let file = table.file_name();
            rec.tables.push(table);
            rec.predicate(
                format!(
                    "uniformity {} arg={arg}: ratio max/min < {UNIFORMITY_SPREAD}",
                    bc_name(bc)
                ),
                Predicate::SpreadBelow {
                    file,
                    column: "ratio".into(),
                    max: UNIFORMITY_SPREAD,
                },
            );
        }
    }
    Ok(())
}

fn series_options(cfg: &CampaignConfig) -> SeriesOptions {
    SeriesOptions {
        k_max: cfg.series.k_max,
        tol: cfg.series.tol,
        ..SeriesOptions::default()
    }
}

fn series_table(name: String, run: &SeriesRun) -> Table {
    let mut t = Table::new(name, &SERIES_COLUMNS);
    for (k, term) in run.terms.iter().enumerate() {
        t.push(vec![
            Some(k as f64),
            Some(term.norms.h1_minus),
            Some(term.norms.h1_plus),
            term.constant.map(|c| c.re),
            term.constant.map(|c| c.im),
            run.cumulative_ratio(k),
        ]);
    }
    t
}

fn series(cfg: &CampaignConfig, rec: &mut Recorder, large: Side) -> Result<()> {
    let mesh = cfg.geometry.mesh()?;
    rec.meshes.push(MeshRecord::of("series", &mesh));
    let opts = series_options(cfg);
    let calc = NormCalculator::new(mesh.clone());
    for &bc in &cfg.physics.bc {
        let name = bc_name(bc);
        let t = template(cfg, bc, &mesh)?;
        let mut ctx = SeriesContext::new(&t, Regime::new(bc, large), &mesh)?;
        let mags = cfg.series.rho.as_ref().unwrap_or(&cfg.physics.rho);
        let rhos: Vec<C64> = cfg
            .physics
            .rho_arg
            .iter()
            .flat_map(|&arg| mags.iter().map(move |&m| C64::from_polar(m, arg)))
            .collect();
        let runs = rhos
            .iter()
            .map(|&rho| ctx.run(rho, &opts))
            .collect::<Result<Vec<_>>>()?;
        let directs = runs
            .par_iter()
            .map(|run| {
                let (ap, am) = run.coefficients;
                let p = TransmissionProblem::new(bc, ap, am, t.f.clone(), t.g.clone(), t.variant)?;
                solve_direct(&p, &mesh)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rem = Table::new(format!("remainder_{name}"), &REMAINDER_COLUMNS);
        let mut eq = Table::new(format!("equivalence_{name}"), &REMAINDER_COLUMNS);
        for (i, (run, direct)) in runs.iter().zip(&directs).enumerate() {
            let scale = calc.report(direct.values(), None).proxy();
            let rows = compare_to_direct(run, direct)?;
            for r in &rows {
                let rel = if scale > 0.0 { r.proxy / scale } else { r.proxy };
                rem.push_values(&[r.order as f64, r.rho.norm(), rel]);
            }
            let last = rows.last().expect("at least one term");
            let rel = if scale > 0.0 { last.proxy / scale } else { last.proxy };
            eq.push_values(&[last.order as f64, last.rho.norm(), rel]);
            rec.notes.push(format!(
                "{name} rho={}: {} terms, status {:?}, alpha_hat {}",
                show(run.rho),
                run.terms.len(),
                run.status,
                run.alpha_hat
            ));
            let st = series_table(format!("series_{name}_rho{i}"), run);
            let file = st.file_name();
            rec.tables.push(st);
            rec.predicate(
                format!(
                    "series {name} rho={}: last 5 term ratios within {GEOMETRIC_TOL} of geometric",
                    show(run.rho)
                ),
                Predicate::Geometric {
                    file,
                    columns: vec!["term_norm_minus".into(), "term_norm_plus".into()],
                    last: 5,
                    tol: GEOMETRIC_TOL,
                },
            );
        }
        let eq_file = eq.file_name();
        rec.tables.push(rem);
        rec.tables.push(eq);
        rec.predicate(
            format!(
                "series {name} ({}): sum matches direct solve to {EQUIVALENCE_TOL:e}",
                Regime::new(bc, large).name()
            ),
            Predicate::AllBelow {
                file: eq_file,
                column: "remainder_proxy_norm".into(),
                max: EQUIVALENCE_TOL,
            },
        );
    }
    Ok(())
}

fn limit_rate(cfg: &CampaignConfig, rec: &mut Recorder) -> Result<()> {
    let mesh = cfg.geometry.mesh()?;
    rec.meshes.push(MeshRecord::of("limit_rate", &mesh));
    let orders = cfg.series.orders.clone().unwrap_or_else(|| vec![0, 1, 2]);
    let max_order = *orders.iter().max().expect("validated non-empty");
    for &bc in &cfg.physics.bc {
        let name = bc_name(bc);
        let t = template(cfg, bc, &mesh)?;
        let mut ctx = SeriesContext::new(&t, Regime::new(bc, Side::Minus), &mesh)?;
        let rhos = contrasts(cfg, cfg.physics.rho_arg[0], false);
        let rows = remainder_sweep(&mut ctx, &rhos, max_order)?;
        let mut table = Table::new(format!("remainder_{name}"), &REMAINDER_COLUMNS);
        for r in rows.iter().filter(|r| orders.contains(&r.order)) {
            table.push_values(&[r.order as f64, r.rho.norm(), r.proxy]);
        }
        let file = table.file_name();
        rec.tables.push(table);
        for &k in &orders {
            let target = -(k as f64 + 1.0);
            let tol = if k == 0 { 0.1 } else { 0.15 };
            rec.predicate(
                format!("limit rate {name} K={k}: slope {target} +- {tol}"),
                Predicate::Slope {
                    file: file.clone(),
                    x: "rho".into(),
                    y: "remainder_proxy_norm".into(),
                    filter: Some(RowFilter {
                        column: "K".into(),
                        value: k as f64,
                    }),
                    target,
                    tol,
                },
            );
        }
    }
    Ok(())
}

fn checkerboard(cfg: &CampaignConfig, rec: &mut Recorder) -> Result<()> {
    let rho = C64::from_polar(cfg.physics.rho[0], cfg.physics.rho_arg[0]);
    let levels = &cfg.geometry.levels;
    let mut meshes = Vec::new();
    for (kind, label) in [
        (GeometryKind::Checkerboard, "checkerboard"),
        (GeometryKind::Annulus, "annulus"),
    ] {
        let ms = levels
            .iter()
            .map(|&l| cfg.geometry.mesh_at(kind, l).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        for (m, l) in ms.iter().zip(levels) {
            rec.meshes.push(MeshRecord::of(format!("{label}_level{l}"), m));
        }
        meshes.push((label, ms));
    }
    for &bc in &cfg.physics.bc {
        let name = bc_name(bc);
        for (label, ms) in &meshes {
            let mut table = Table::new(format!("{label}_{name}"), &SWEEP_COLUMNS);
            for mesh in ms {
                let t = template(cfg, bc, mesh)?;
                let rows = sweep_coefficients(&t, &[(C64::new(1.0, 0.0), rho)], mesh, DataNorm::Standard)?;
                table.push(sweep_row(&rows[0]));
            }
            let file = table.file_name();
            rec.tables.push(table);
            if *label == "checkerboard" {
                rec.predicate(
                    format!("checkerboard {name}: flux_sigma strictly increasing under refinement"),
                    Predicate::StrictlyIncreasing {
                        file,
                        column: "flux_sigma".into(),
                    },
                );
            } else {
                rec.predicate(
                    format!("annulus {name}: flux_sigma max/min < {ANNULUS_FLUX_SPREAD}"),
                    Predicate::SpreadBelow {
                        file,
                        column: "flux_sigma".into(),
                        max: ANNULUS_FLUX_SPREAD,
                    },
                );
            }
        }
    }
    Ok(())
}

fn tm_template(cfg: &CampaignConfig, sigma: f64) -> Result<TmProblem> {
    TmProblem::from_sigma(cfg.physics.omega, 1.0, 1.0, sigma, TmSource::preset(&cfg.data.j)?)
}

fn maxwell(cfg: &CampaignConfig, rec: &mut Recorder) -> Result<()> {
    let sigmas = &cfg.physics.sigma;
    let sigma_max = sigmas.iter().copied().fold(0.0, f64::max);
    let finest = tm_template(cfg, sigma_max)?;
    let mesh = Arc::new(cfg.geometry.skin_mesh(&finest)?);
    rec.meshes.push(MeshRecord::of("maxwell", &mesh));
    for &bc in &cfg.physics.bc {
        let name = bc_name(bc);
        let tb = tm_boundary(bc);
        let (problem, probe) = ensure_nonresonant(&finest, &mesh, tb)?;
        if probe.shifts > 0 {
            rec.notes.push(format!(
                "{name}: omega shifted to {} ({} shifts)",
                probe.omega, probe.shifts
            ));
        }
        let rows = sigma_sweep(&problem, sigmas, &mesh, tb)?;
        let mut table = Table::new(format!("maxwell_{name}"), &TM_COLUMNS);
        let mut energy = Table::new(format!("energy_{name}"), &ENERGY_COLUMNS);
        for r in &rows {
            table.push_values(&[
                r.sigma,
                r.delta,
                r.l2_all,
                r.l2_minus,
                r.h1_all,
                r.sqrt_sigma_l2_minus,
                r.j_l2,
                r.j_hdiv,
                r.ratio,
            ]);
            energy.push_values(&[
                r.sigma,
                r.energy.real_identity_residual,
                r.energy.imag_identity_residual,
            ]);
        }
        let (file, efile) = (table.file_name(), energy.file_name());
        rec.tables.push(table);
        rec.tables.push(energy);
        rec.predicate(
            format!("maxwell {name}: |u|/|j| max/min < {TM_RATIO_SPREAD}"),
            Predicate::SpreadBelow {
                file: file.clone(),
                column: "ratio".into(),
                max: TM_RATIO_SPREAD,
            },
        );
        rec.predicate(
            format!("maxwell {name}: sqrt(sigma)|u|_minus max/min < {TM_WEIGHTED_SPREAD}"),
            Predicate::SpreadBelow {
                file: file.clone(),
                column: "sqrt_sigma_l2_minus".into(),
                max: TM_WEIGHTED_SPREAD,
            },
        );
        rec.predicate(
            format!("maxwell {name}: slope of |u|_minus vs sigma {TM_SLOPE} +- {TM_SLOPE_TOL}"),
            Predicate::Slope {
                file,
                x: "sigma".into(),
                y: "l2_minus".into(),
                filter: None,
                target: TM_SLOPE,
                tol: TM_SLOPE_TOL,
            },
        );
        for col in ["real_identity_residual", "imag_identity_residual"] {
            rec.predicate(
                format!("maxwell {name}: {col} <= {ENERGY_TOL:e}"),
                Predicate::AllBelow {
                    file: efile.clone(),
                    column: col.into(),
                    max: ENERGY_TOL,
                },
            );
        }
    }
    Ok(())
}

fn skin(cfg: &CampaignConfig, rec: &mut Recorder) -> Result<()> {
    let deltas = &cfg.physics.delta;
    let orders = cfg.series.orders.clone().unwrap_or_else(|| vec![0, 1]);
    if orders.iter().any(|&m| m > 1) {
        return Err(Error::Config("skin expansions are available for m <= 1".into()));
    }
    let j = TmSource::preset(&cfg.data.j)?;
    let template = TmProblem::from_delta(cfg.physics.omega, 1.0, 1.0, deltas[0], j)?;
    for &d in deltas {
        let m = cfg.geometry.skin_mesh(&template.with_delta(d)?)?;
        rec.meshes.push(MeshRecord::of(format!("skin_delta{d}"), &m));
    }
    for &bc in &cfg.physics.bc {
        let name = bc_name(bc);
        let study = remainder_delta_study(
            &template,
            &orders,
            deltas,
            |p| cfg.geometry.skin_mesh(p),
            tm_boundary(bc),
        )?;
        let mut table = Table::new(format!("skin_{name}"), &SKIN_COLUMNS);
        for r in &study.rows {
            table.push(vec![
                Some(r.delta),
                Some(r.m as f64),
                Some(r.weighted_remainder),
                r.slope_window,
            ]);
        }
        let file = table.file_name();
        rec.tables.push(table);
        for &m in &orders {
            let target = m as f64 + 1.0;
            let tol = if m == 0 { 0.3 } else { 0.4 };
            rec.predicate(
                format!("skin {name} m={m}: slope {target} +- {tol}"),
                Predicate::Slope {
                    file: file.clone(),
                    x: "delta".into(),
                    y: "weighted_remainder".into(),
                    filter: Some(RowFilter {
                        column: "m".into(),
                        value: m as f64,
                    }),
                    target,
                    tol,
                },
            );
        }
    }
    Ok(())
}
