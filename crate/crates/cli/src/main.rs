//! `contrastlab` command-line driver.
//!
//! Exit codes: 0 success, 2 precondition or configuration error, 3 solver
//! error, 4 failed acceptance predicate.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use contrastlab_core::experiments::{
    run_campaign, verify_manifest, CampaignConfig, GeometryConfig, GeometryKind, Table,
};
use contrastlab_core::fem::NormCalculator;
use contrastlab_core::helmholtz::{TmProblem, TmSource};
use contrastlab_core::mesh::Mesh;
use contrastlab_core::oracle::{tm_radial, transmission_closed_form, RadialBc, RadialSolution};
use contrastlab_core::powerseries::{run_series, SeriesOptions};
use contrastlab_core::transmission::{
    data_norm, solution_norms, solve_direct, DataNorm, DomainData, ExteriorBc, InterfaceData, TransmissionProblem,
    Variant,
};
use contrastlab_core::{Error, C64};

const EXIT_PRECONDITION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_PREDICATE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "contrastlab",
    version,
    about = "High-contrast transmission problems: power series, uniform estimates, skin effect"
)]
struct Cli {
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "CONTRASTLAB_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a mesh and write it in the text mesh format.
    Mesh {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Direct solve of one transmission problem.
    Solve {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Power-series solve of one transmission problem.
    Series {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 60)]
        k_max: usize,
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a campaign from a TOML config.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: `output_dir` of the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a stored campaign from its CSVs.
    Verify {
        /// Campaign output directory.
        dir: PathBuf,
    },
    /// Radial reference solution on the annulus.
    Oracle {
        #[arg(value_enum)]
        problem: OracleProblem,
        /// Angular mode (default: 1 for transmission, 0 for the radial TM currents).
        #[arg(long)]
        mode: Option<u32>,
        #[arg(long, default_value_t = 1.0)]
        r_sigma: f64,
        #[arg(long, default_value_t = 2.0)]
        r_outer: f64,
        #[arg(long, value_enum, default_value_t = Bc::Neumann)]
        bc: Bc,
        /// Contrast (transmission).
        #[arg(long, default_value_t = 100.0)]
        rho: f64,
        /// Amplitude of `g = g_amp cos(m theta)` (transmission).
        #[arg(long, default_value_t = 1.0)]
        g_amp: f64,
        #[arg(long, value_enum, default_value_t = VariantArg::Standard)]
        variant: VariantArg,
        /// Conductivity (TM).
        #[arg(long, default_value_t = 1e4)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        /// Current preset (TM).
        #[arg(long, default_value = "ring_smooth")]
        j: String,
        /// Number of uniformly spaced radii in the profile.
        #[arg(long, default_value_t = 201)]
        samples: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleProblem {
    Transmission,
    Tm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bc {
    Dirichlet,
    Neumann,
}

impl From<Bc> for ExteriorBc {
    fn from(b: Bc) -> Self {
        match b {
            Bc::Dirichlet => ExteriorBc::Dirichlet,
            Bc::Neumann => ExteriorBc::Neumann,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Standard,
    Modified,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Standard => Variant::Standard,
            VariantArg::Modified => Variant::Modified,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryArg {
    Annulus,
    Polygon,
    Checkerboard,
}

#[derive(Args)]
struct GeometryArgs {
    #[arg(long, value_enum, default_value_t = GeometryArg::Annulus)]
    geometry: GeometryArg,
    #[arg(long, default_value_t = 3)]
    level: u32,
    /// Target element size (annulus, polygon); overrides `--level`.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    r_sigma: f64,
    #[arg(long, default_value_t = 2.0)]
    r_outer: f64,
    #[arg(long, default_value_t = 1.0)]
    half_width: f64,
}

impl GeometryArgs {
    fn build(&self) -> contrastlab_core::Result<Mesh> {
        let kind = match self.geometry {
            GeometryArg::Annulus => GeometryKind::Annulus,
            GeometryArg::Polygon => GeometryKind::Polygon,
            GeometryArg::Checkerboard => GeometryKind::Checkerboard,
        };
        let cfg = GeometryConfig {
            kind,
            r_sigma: self.r_sigma,
            r_outer: self.r_outer,
            levels: vec![self.level],
            h: self.h,
            half_width: self.half_width,
            ..GeometryConfig::default()
        };
        cfg.mesh_at(kind, self.level)
    }
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long, value_enum, default_value_t = Bc::Neumann)]
    bc: Bc,
    /// Contrast modulus `|a- / a+|` (`a+ = 1`).
    #[arg(long, default_value_t = 100.0)]
    rho: f64,
    /// Contrast argument in radians.
    #[arg(long, default_value_t = 0.0)]
    rho_arg: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Standard)]
    variant: VariantArg,
    /// Domain data preset.
    #[arg(long, default_value = "zero")]
    f: String,
    /// Interface data preset.
    #[arg(long, default_value = "cos")]
    g: String,
}

impl ProblemArgs {
    fn build(&self) -> contrastlab_core::Result<TransmissionProblem> {
        TransmissionProblem::new(
            self.bc.into(),
            C64::new(1.0, 0.0),
            C64::from_polar(self.rho, self.rho_arg),
            DomainData::preset(&self.f)?,
            InterfaceData::preset(&self.g)?,
            self.variant.into(),
        )
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory; nothing is written elsewhere.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

impl OutputArgs {
    fn prepare(&self) -> contrastlab_core::Result<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| io_error(&self.out, e))
    }

    fn write_table(&self, t: &Table) -> contrastlab_core::Result<PathBuf> {
        let (name, text) = match self.format {
            Format::Csv => (t.file_name(), t.to_csv()),
            Format::Json => (format!("{}.json", t.name), t.to_json()),
        };
        let path = self.out.join(name);
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn exit_for(e: &Error) -> u8 {
    if e.is_precondition() {
        EXIT_PRECONDITION
    } else {
        EXIT_SOLVER
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_PRECONDITION);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool configured once");
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}

fn run(command: Command) -> contrastlab_core::Result<u8> {
    match command {
        Command::Mesh { geometry, output } => {
            let mesh = geometry.build()?;
            output.prepare()?;
            mesh.write(&output.out.join("mesh.txt"))?;
            let mut t = Table::new(
                "mesh_summary",
                &["nodes", "triangles", "interface_edges", "boundary_edges", "h_max"],
            );
            t.push_values(&[
                mesh.num_nodes() as f64,
                mesh.triangles().len() as f64,
                mesh.interface_edges().len() as f64,
                mesh.boundary_edges().len() as f64,
                mesh.h_max(),
            ]);
            output.write_table(&t)?;
            println!(
                "mesh: {} nodes, {} triangles, h_max {:.4e}, sha256 {}",
                mesh.num_nodes(),
                mesh.triangles().len(),
                mesh.h_max(),
                mesh.fingerprint()
            );
            Ok(0)
        }
        Command::Solve {
            geometry,
            problem,
            output,
        } => {
            let mesh = Arc::new(geometry.build()?);
            let p = problem.build()?;
            let u = solve_direct(&p, &mesh)?;
            output.prepare()?;
            u.write(&output.out.join("solution.txt"))?;
            let calc = NormCalculator::new(mesh.clone());
            let n = solution_norms(&p, &calc, &u);
            let dn = data_norm(&p, &mesh, DataNorm::Standard);
            let mut t = Table::new(
                "norms",
                &[
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
                ],
            );
            let rho = p.rho();
            t.push(vec![
                Some(rho.re),
                Some(rho.im),
                Some(n.l2_plus),
                Some(n.l2_minus),
                Some(n.h1_plus),
                Some(n.h1_minus),
                Some(n.l2_sigma),
                Some(n.h1_sigma),
                Some(n.flux_l2_sigma),
                Some(dn),
                (dn > 0.0).then(|| n.proxy() / dn),
            ]);
            output.write_table(&t)?;
            println!("solved: {} nodes, proxy norm {:.6e}", mesh.num_nodes(), n.proxy());
            Ok(0)
        }
        Command::Series {
            geometry,
            problem,
            k_max,
            tol,
            output,
        } => {
            let mesh = Arc::new(geometry.build()?);
            let p = problem.build()?;
            let opts = SeriesOptions {
                k_max,
                tol,
                ..SeriesOptions::default()
            };
            let run = run_series(&p, &mesh, &opts)?;
            output.prepare()?;
            let mut t = Table::new(
                "series",
                &[
                    "k",
                    "term_norm_minus",
                    "term_norm_plus",
                    "c_k_re",
                    "c_k_im",
                    "cumulative_ratio",
                ],
            );
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
            output.write_table(&t)?;
            run.sum().write(&output.out.join("solution.txt"))?;
            println!(
                "series ({}): {:?} after {} terms, alpha_hat {:.6}, rho0 {:.6}",
                run.regime.name(),
                run.status,
                run.terms.len(),
                run.alpha_hat,
                run.rho0()
            );
            Ok(0)
        }
        Command::Campaign { config, out } => {
            let cfg = CampaignConfig::read(&config)?;
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
            let m = run_campaign(&cfg, &dir)?;
            for p in &m.predicates {
                println!(
                    "{} {} (value {:?})",
                    if p.passed { "PASS" } else { "FAIL" },
                    p.name,
                    p.value
                );
            }
            println!(
                "campaign {}: {} in {:.1}s",
                cfg.campaign.name(),
                if m.passed { "pass" } else { "fail" },
                m.wall_clock_seconds
            );
            Ok(if m.passed { 0 } else { EXIT_PREDICATE })
        }
        Command::Verify { dir } => {
            let r = verify_manifest(&dir)?;
            for p in &r.predicates {
                println!(
                    "{} {} (value {:?})",
                    if p.passed { "PASS" } else { "FAIL" },
                    p.name,
                    p.value
                );
            }
            for f in &r.checksum_mismatches {
                println!("CHANGED {f}: checksum differs from the manifest");
            }
            println!(
                "verify {}: {}",
                r.campaign.name(),
                if r.passed { "pass" } else { "fail" }
            );
            Ok(if r.passed { 0 } else { EXIT_PREDICATE })
        }
        Command::Oracle {
            problem,
            mode,
            r_sigma,
            r_outer,
            bc,
            rho,
            g_amp,
            variant,
            sigma,
            omega,
            j,
            samples,
            output,
        } => {
            let rbc = match bc {
                Bc::Dirichlet => RadialBc::Dirichlet,
                Bc::Neumann => RadialBc::Neumann,
            };
            let sol: RadialSolution = match problem {
                OracleProblem::Transmission => {
                    let rho = C64::new(rho, 0.0);
                    let scale = match Variant::from(variant) {
                        Variant::Standard => C64::new(1.0, 0.0) - rho,
                        Variant::Modified => C64::new(1.0, 0.0),
                    };
                    transmission_closed_form(
                        mode.unwrap_or(1),
                        rho,
                        rbc,
                        scale * g_amp,
                        [C64::new(0.0, 0.0); 2],
                        r_sigma,
                        r_outer,
                    )?
                }
                OracleProblem::Tm => {
                    let p = TmProblem::from_sigma(omega, 1.0, 1.0, sigma, TmSource::preset(&j)?)?;
                    tm_radial(
                        mode.unwrap_or(0),
                        p.oracle_parameters(),
                        TmSource::radial_profile(&j)?,
                        rbc,
                        r_sigma,
                        r_outer,
                    )?
                }
            };
            output.prepare()?;
            let mut t = Table::new("profile", &["r", "re", "im"]);
            let n = samples.max(2);
            for i in 0..n {
                let r = r_outer * i as f64 / (n - 1) as f64;
                let u = sol.radial(r);
                t.push_values(&[r, u.re, u.im]);
            }
            output.write_table(&t)?;
            println!(
                "oracle mode {}: {}, Richardson disagreement {:.3e}",
                sol.mode(),
                if sol.is_closed_form() {
                    "closed form"
                } else {
                    "finite volumes"
                },
                sol.disagreement()
            );
            Ok(0)
        }
    }
}
