//! Independent radial reference solutions on the annulus geometry.
//!
//! Fields of the form `u(r) cos(m theta)` reduce the two-dimensional
//! problems to ODEs in `r`. Closed forms are used where they exist; other
//! cases go through a vertex-centred finite-volume discretization with a
//! node on the interface, checked by Richardson extrapolation on three
//! nested grids.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::mesh::{norm, Side};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadialBc {
    Neumann,
    Dirichlet,
}

/// Tolerance of the Richardson self-consistency check.
pub const RICHARDSON_TOL: f64 = 1e-8;

/// Largest number of radial intervals the reference solver will use.
const MAX_INTERVALS: usize = 1 << 22;

/// A radial ODE
/// `(1/r)(r c u')' - c m^2 u / r^2 + q u = s` on `(0, R)` with piecewise
/// constant `c`, `q` (index 0 for `r < r_sigma`, 1 beyond), continuity of
/// `u` and the flux jump `c_- u'(r_sigma-) - c_+ u'(r_sigma+) = flux_jump`.
#[derive(Clone)]
pub struct RadialBvp {
    pub mode: u32,
    pub r_sigma: f64,
    pub r_outer: f64,
    pub coeff: [C64; 2],
    pub reaction: [C64; 2],
    pub source: Arc<dyn Fn(f64, Side) -> C64 + Send + Sync>,
    pub flux_jump: C64,
    pub bc: RadialBc,
}

#[derive(Debug, Clone)]
enum Profile {
    /// `u- = a r^m + p r^2`, `u+ = b r^m + c r^-m` (or `b + c ln r + q r^2` for `m = 0`).
    Closed {
        a: C64,
        p: C64,
        b: C64,
        c: C64,
        q: C64,
    },
    Grid {
        r: Vec<f64>,
        u: Vec<C64>,
    },
}

/// A reference solution `u(r) cos(m theta)`.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    mode: u32,
    r_sigma: f64,
    r_outer: f64,
    profile: Profile,
    disagreement: f64,
}

impl RadialSolution {
    pub fn mode(&self) -> u32 {
        self.mode
    }

    /// Richardson disagreement of the accepted grid solution (0 for closed forms).
    pub fn disagreement(&self) -> f64 {
        self.disagreement
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.profile, Profile::Closed { .. })
    }

    pub fn radial(&self, r: f64) -> C64 {
        let m = self.mode as i32;
        match &self.profile {
            Profile::Closed { a, p, b, c, q } => {
                if r <= self.r_sigma {
                    a * r.powi(m) + p * r * r
                } else if m == 0 {
                    b + c * r.ln() + q * r * r
                } else {
                    b * r.powi(m) + c * r.powi(-m)
                }
            }
            Profile::Grid { r: grid, u } => {
                let r = r.clamp(0.0, self.r_outer);
                let k = match grid.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
                    Ok(k) => return u[k],
                    Err(k) => k.clamp(1, grid.len() - 1),
                };
                let t = (r - grid[k - 1]) / (grid[k] - grid[k - 1]);
                u[k - 1] * (1.0 - t) + u[k] * t
            }
        }
    }

    /// Value at a point of the plane.
    pub fn eval(&self, p: [f64; 2]) -> C64 {
        let r = norm(p);
        let th = p[1].atan2(p[0]);
        self.radial(r) * (self.mode as f64 * th).cos()
    }

    /// `(r, u(r))` samples: the grid itself, or `n` uniform points for closed forms.
    pub fn samples(&self, n: usize) -> Vec<(f64, C64)> {
        match &self.profile {
            Profile::Grid { r, u } => r.iter().copied().zip(u.iter().copied()).collect(),
            Profile::Closed { .. } => (0..=n)
                .map(|i| {
                    let r = self.r_outer * i as f64 / n as f64;
                    (r, self.radial(r))
                })
                .collect(),
        }
    }

    /// CSV with columns `r,re,im`.
    pub fn profile_csv(&self, n: usize) -> String {
        let mut s = String::from("r,re,im\n");
        for (r, u) in self.samples(n) {
            let _ = writeln!(
                s,
                "{},{},{}",
                crate::experiments::fmt17(r),
                crate::experiments::fmt17(u.re),
                crate::experiments::fmt17(u.im)
            );
        }
        s
    }

    pub fn write_profile(&self, path: &Path, n: usize) -> Result<()> {
        std::fs::write(path, self.profile_csv(n)).map_err(|e| Error::io(path, e))
    }
}

/// Dense complex Gaussian elimination with partial pivoting.
pub(crate) fn dense_solve(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Result<Vec<C64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].norm().partial_cmp(&a[j][k].norm()).unwrap())
            .unwrap();
        if a[p][k].norm() == 0.0 {
            return Err(Error::Singular {
                pivot: k,
                magnitude: 0.0,
            });
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                let akj = a[k][j];
                a[i][j] -= f * akj;
            }
            let bk = b[k];
            b[i] -= f * bk;
        }
    }
    let mut x = vec![ZERO; n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    Ok(x)
}

fn check_radii(r_sigma: f64, r_outer: f64) -> Result<()> {
    if !(r_sigma > 0.0 && r_outer > r_sigma && r_outer.is_finite()) {
        return Err(Error::Geometry(format!(
            "need 0 < r_sigma < r_outer, got {r_sigma}, {r_outer}"
        )));
    }
    Ok(())
}

/// Closed-form transmission solution for `div(a grad u) = f`, `a = 1` on
/// `Omega+` and `a = rho` on `Omega-`, with interface law
/// `rho u-' - u+' = jump` and data of a single angular mode: for `m >= 1`
/// `f = 0`; for `m = 0`, `f` piecewise constant (`f_const = [f-, f+]`).
/// Neumann problems with `m = 0` are normalized to zero mean.
pub fn transmission_closed_form(
    mode: u32,
    rho: C64,
    bc: RadialBc,
    jump: C64,
    f_const: [C64; 2],
    r_sigma: f64,
    r_outer: f64,
) -> Result<RadialSolution> {
    check_radii(r_sigma, r_outer)?;
    if mode > 0 && (f_const[0] != ZERO || f_const[1] != ZERO) {
        return Err(Error::Precondition("closed form needs f = 0 for modes m >= 1".into()));
    }
    let (rs, big_r) = (r_sigma, r_outer);
    let one = C64::new(1.0, 0.0);
    let profile = if mode >= 1 {
        let m = mode as i32;
        let mf = mode as f64;
        let a = vec![
            vec![one * rs.powi(m), -one * rs.powi(m), -one * rs.powi(-m)],
            vec![
                rho * mf * rs.powi(m - 1),
                -one * mf * rs.powi(m - 1),
                one * mf * rs.powi(-m - 1),
            ],
            match bc {
                RadialBc::Neumann => vec![ZERO, one * mf * big_r.powi(m - 1), -one * mf * big_r.powi(-m - 1)],
                RadialBc::Dirichlet => vec![ZERO, one * big_r.powi(m), one * big_r.powi(-m)],
            },
        ];
        let x = dense_solve(a, vec![ZERO, jump, ZERO])?;
        Profile::Closed {
            a: x[0],
            p: ZERO,
            b: x[1],
            c: x[2],
            q: ZERO,
        }
    } else {
        let (fm, fp) = (f_const[0], f_const[1]);
        let p = fm / (4.0 * rho);
        let q = fp / 4.0;
        // interface law: rho (2 p r_s) - (c / r_s + 2 q r_s) = jump
        let c = (rho * 2.0 * p * rs - 2.0 * q * rs - jump) * rs;
        let b = match bc {
            RadialBc::Dirichlet => -(c * big_r.ln() + q * big_r * big_r),
            RadialBc::Neumann => {
                let outer = c / big_r + 2.0 * q * big_r;
                let scale = c.norm() / big_r + (2.0 * q * big_r).norm() + jump.norm();
                if outer.norm() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::Compatibility {
                        condition: "int_Omega f = int_Sigma jump",
                        residual: outer.norm(),
                        tolerance: 1e-10 * scale,
                    });
                }
                // zero mean: int_0^rs (a + p r^2) r dr + int_rs^R (b + c ln r + q r^2) r dr = 0,
                // with a = b + c ln rs + (q - p) rs^2
                let r2 = rs * rs;
                let bb = big_r * big_r;
                let prim = |r: f64| r * r / 2.0 * r.ln() - r * r / 4.0;
                let rest = (c * rs.ln() + (q - p) * r2) * r2 / 2.0
                    + p * r2 * r2 / 4.0
                    + c * (prim(big_r) - prim(rs))
                    + q * (bb * bb - r2 * r2) / 4.0;
                -rest / (bb / 2.0)
            }
        };
        let a = b + c * rs.ln() + (q - p) * rs * rs;
        Profile::Closed { a, p, b, c, q }
    };
    Ok(RadialSolution {
        mode,
        r_sigma,
        r_outer,
        profile,
        disagreement: 0.0,
    })
}

fn tridiag_solve(sub: &[C64], diag: &[C64], sup: &[C64], rhs: &[C64]) -> Result<Vec<C64>> {
    let n = diag.len();
    let mut c = vec![ZERO; n];
    let mut d = vec![ZERO; n];
    let mut beta = diag[0];
    if beta.norm() == 0.0 {
        return Err(Error::Singular {
            pivot: 0,
            magnitude: 0.0,
        });
    }
    c[0] = sup[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - sub[i] * c[i - 1];
        if beta.norm() == 0.0 {
            return Err(Error::Singular {
                pivot: i,
                magnitude: 0.0,
            });
        }
        c[i] = if i + 1 < n { sup[i] / beta } else { ZERO };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1];
        d[i] -= c[i] * next;
    }
    Ok(d)
}

impl RadialBvp {
    fn singular_mean(&self) -> bool {
        self.mode == 0 && self.bc == RadialBc::Neumann && self.reaction == [ZERO, ZERO]
    }

    /// Finite-volume solution on `n_minus + n_plus` uniform intervals.
    pub fn solve_grid(&self, n_minus: usize, n_plus: usize) -> Result<(Vec<f64>, Vec<C64>)> {
        let (rs, big_r) = (self.r_sigma, self.r_outer);
        let n = n_minus + n_plus;
        let r: Vec<f64> = (0..=n)
            .map(|i| {
                if i <= n_minus {
                    rs * i as f64 / n_minus as f64
                } else {
                    rs + (big_r - rs) * (i - n_minus) as f64 / n_plus as f64
                }
            })
            .collect();
        let m2 = (self.mode as f64).powi(2);
        let mut sub = vec![ZERO; n + 1];
        let mut diag = vec![ZERO; n + 1];
        let mut sup = vec![ZERO; n + 1];
        let mut rhs = vec![ZERO; n + 1];
        let side_of = |lo: f64, hi: f64| if 0.5 * (lo + hi) < rs { 0usize } else { 1 };
        for i in 0..=n {
            // left half-cell [r_{i-1/2}, r_i], right half-cell [r_i, r_{i+1/2}]
            let mut halves = Vec::with_capacity(2);
            if i > 0 {
                let rl = 0.5 * (r[i - 1] + r[i]);
                halves.push((rl, r[i], side_of(r[i - 1], r[i])));
                let k = side_of(r[i - 1], r[i]);
                let f = self.coeff[k] * rl / (r[i] - r[i - 1]);
                sub[i] += f;
                diag[i] -= f;
            }
            if i < n {
                let rr = 0.5 * (r[i] + r[i + 1]);
                halves.push((r[i], rr, side_of(r[i], r[i + 1])));
                let k = side_of(r[i], r[i + 1]);
                let f = self.coeff[k] * rr / (r[i + 1] - r[i]);
                sup[i] += f;
                diag[i] -= f;
            }
            for &(lo, hi, k) in &halves {
                let vol = 0.5 * (hi * hi - lo * lo);
                let side = if k == 0 { Side::Minus } else { Side::Plus };
                if m2 > 0.0 && r[i] > 0.0 {
                    // int u / r over the half-cell, exact for u proportional to r^m
                    let m = self.mode as i32;
                    let w = ((hi / r[i]).powi(m) - (lo / r[i]).powi(m)) / self.mode as f64;
                    diag[i] -= self.coeff[k] * m2 * w;
                }
                diag[i] += self.reaction[k] * vol;
                rhs[i] += (self.source)(r[i], side) * vol;
            }
            if i == n_minus {
                rhs[i] -= self.flux_jump * rs;
            }
        }
        let pin = |i: usize, sub: &mut [C64], diag: &mut [C64], sup: &mut [C64], rhs: &mut [C64]| {
            sub[i] = ZERO;
            sup[i] = ZERO;
            diag[i] = C64::new(1.0, 0.0);
            rhs[i] = ZERO;
        };
        if self.mode >= 1 || self.singular_mean() {
            pin(0, &mut sub, &mut diag, &mut sup, &mut rhs);
        }
        if self.bc == RadialBc::Dirichlet {
            pin(n, &mut sub, &mut diag, &mut sup, &mut rhs);
        }
        let mut u = tridiag_solve(&sub, &diag, &sup, &rhs)?;
        if self.singular_mean() {
            let mut num = ZERO;
            let mut den = 0.0;
            for i in 0..=n {
                let lo = if i > 0 { 0.5 * (r[i - 1] + r[i]) } else { 0.0 };
                let hi = if i < n { 0.5 * (r[i] + r[i + 1]) } else { r[n] };
                let vol = 0.5 * (hi * hi - lo * lo);
                num += u[i] * vol;
                den += vol;
            }
            let mean = num / den;
            for v in u.iter_mut() {
                *v -= mean;
            }
        }
        Ok((r, u))
    }

    /// Richardson-checked reference solution starting from `n_minus + n_plus`
    /// intervals and doubling until three nested grids agree to
    /// [`RICHARDSON_TOL`].
    pub fn solve(&self, mut n_minus: usize, mut n_plus: usize) -> Result<RadialSolution> {
        check_radii(self.r_sigma, self.r_outer)?;
        let mut last = f64::INFINITY;
        loop {
            if 4 * (n_minus + n_plus) > MAX_INTERVALS {
                return Err(Error::OracleRefused {
                    disagreement: last,
                    n: n_minus + n_plus,
                });
            }
            let (r1, u1) = self.solve_grid(n_minus, n_plus)?;
            let (_, u2) = self.solve_grid(2 * n_minus, 2 * n_plus)?;
            let (_, u4) = self.solve_grid(4 * n_minus, 4 * n_plus)?;
            let mut e2 = Vec::with_capacity(u1.len());
            let mut diff: f64 = 0.0;
            let mut size: f64 = 0.0;
            for i in 0..u1.len() {
                let a = (4.0 * u2[2 * i] - u1[i]) / 3.0;
                let b = (4.0 * u4[4 * i] - u2[2 * i]) / 3.0;
                diff = diff.max((a - b).norm());
                size = size.max(b.norm());
                e2.push(b);
            }
            let disagreement = if size > 0.0 { diff / size } else { diff };
            if disagreement <= RICHARDSON_TOL {
                return Ok(RadialSolution {
                    mode: self.mode,
                    r_sigma: self.r_sigma,
                    r_outer: self.r_outer,
                    profile: Profile::Grid { r: r1, u: e2 },
                    disagreement,
                });
            }
            last = disagreement;
            n_minus *= 2;
            n_plus *= 2;
        }
    }
}

fn default_intervals(r_sigma: f64, r_outer: f64, h: f64) -> (usize, usize) {
    (
        ((r_sigma / h).ceil() as usize).max(16),
        (((r_outer - r_sigma) / h).ceil() as usize).max(16),
    )
}

/// Transmission reference for a general radial source `f(r)` of mode `m`
/// (finite volumes with Richardson check). Coefficients and interface law
/// as in [`transmission_closed_form`].
pub fn transmission_radial(
    mode: u32,
    rho: C64,
    bc: RadialBc,
    jump: C64,
    source: Arc<dyn Fn(f64, Side) -> C64 + Send + Sync>,
    r_sigma: f64,
    r_outer: f64,
) -> Result<RadialSolution> {
    let bvp = RadialBvp {
        mode,
        r_sigma,
        r_outer,
        coeff: [rho, C64::new(1.0, 0.0)],
        reaction: [ZERO, ZERO],
        source,
        flux_jump: jump,
        bc,
    };
    let (nm, np) = default_intervals(r_sigma, r_outer, r_sigma / 250.0);
    bvp.solve(nm, np)
}

/// Parameters of the scalar time-harmonic problem
/// `lap u + kappa^2 alpha u = -i nu j` with `alpha = 1 + i / delta^2` in `Omega-`.
#[derive(Debug, Clone, Copy)]
pub struct TmParameters {
    pub kappa: f64,
    pub nu: f64,
    pub delta: f64,
}

/// Reference solution of the TM problem for a radial current `j(r)` of mode `m`.
/// The grid resolves the skin depth `sqrt(2) delta / kappa` with at least
/// 50 points.
pub fn tm_radial(
    mode: u32,
    params: TmParameters,
    j: Arc<dyn Fn(f64) -> C64 + Send + Sync>,
    bc: RadialBc,
    r_sigma: f64,
    r_outer: f64,
) -> Result<RadialSolution> {
    let TmParameters { kappa, nu, delta } = params;
    if !(kappa > 0.0 && nu > 0.0 && delta > 0.0) {
        return Err(Error::Precondition("kappa, nu and delta must be positive".into()));
    }
    let k2 = kappa * kappa;
    let skin = std::f64::consts::SQRT_2 * delta / kappa;
    let h = (skin / 50.0).min(r_sigma / 250.0);
    let nm = ((r_sigma / h).ceil() as usize).max(16);
    let np = (((r_outer - r_sigma) / (r_sigma / 250.0)).ceil() as usize).max(16);
    let src = move |r: f64, _side: Side| -C64::new(0.0, nu) * j(r);
    let bvp = RadialBvp {
        mode,
        r_sigma,
        r_outer,
        coeff: [C64::new(1.0, 0.0); 2],
        reaction: [C64::new(k2, k2 / (delta * delta)), C64::new(k2, 0.0)],
        source: Arc::new(src),
        flux_jump: ZERO,
        bc,
    };
    bvp.solve(nm, np)
}

/// Terms of the large-`Omega-` limit chain for a mode-`m >= 1` interface datum
/// `g = g_amp cos(m theta)` and `f = 0`: returns `(A_k, B_k, C_k)` with
/// `phi_k- = A_k r^m`, `phi_k+ = B_k r^m + C_k r^-m`.
pub fn limit_chain(
    mode: u32,
    bc: RadialBc,
    g_amp: C64,
    r_sigma: f64,
    r_outer: f64,
    n_terms: usize,
) -> Result<Vec<[C64; 3]>> {
    check_radii(r_sigma, r_outer)?;
    if mode == 0 {
        return Err(Error::Precondition("limit chain is tabulated for modes m >= 1".into()));
    }
    let m = mode as i32;
    let mf = mode as f64;
    let (rs, big_r) = (r_sigma, r_outer);
    let mut out: Vec<[C64; 3]> = Vec::with_capacity(n_terms);
    for k in 0..n_terms {
        // phi_k-'(r_s) = phi_{k-1}+'(r_s) + [k = 1] g, with phi_0-' = -g
        let slope = if k == 0 {
            -g_amp
        } else {
            let [_, b, c] = out[k - 1];
            let d = b * mf * rs.powi(m - 1) - c * mf * rs.powi(-m - 1);
            if k == 1 {
                d + g_amp
            } else {
                d
            }
        };
        let a = slope / (mf * rs.powi(m - 1));
        let trace = a * rs.powi(m);
        // b r_s^m + c r_s^-m = trace, exterior condition
        let (e1, e2) = match bc {
            RadialBc::Neumann => (big_r.powi(m - 1), -big_r.powi(-m - 1)),
            RadialBc::Dirichlet => (big_r.powi(m), big_r.powi(-m)),
        };
        let det = rs.powi(m) * e2 - rs.powi(-m) * e1;
        let b = trace * e2 / det;
        let c = -trace * e1 / det;
        out.push([a, b, c]);
    }
    Ok(out)
}

/// Limit as `rho -> infinity` of `f(rho)` assuming an expansion in powers of
/// `1 / rho`, by three-point Richardson extrapolation at `rho, 2 rho, 4 rho`.
pub fn richardson_in_inverse_rho(f: impl Fn(f64) -> Result<C64>, rho: f64) -> Result<C64> {
    let (a, b, c) = (f(rho)?, f(2.0 * rho)?, f(4.0 * rho)?);
    // first-order eliminations, then second order
    let ab = 2.0 * b - a;
    let bc = 2.0 * c - b;
    Ok((4.0 * bc - ab) / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn closed_form_satisfies_interface_law() {
        let rho = c(37.0);
        let s = transmission_closed_form(1, rho, RadialBc::Neumann, c(1.0) - rho, [ZERO; 2], 1.0, 2.0).unwrap();
        let eps = 1e-6;
        let dm = (s.radial(1.0) - s.radial(1.0 - eps)) / eps;
        let dp = (s.radial(1.0 + eps) - s.radial(1.0)) / eps;
        assert!((rho * dm - dp - (c(1.0) - rho)).norm() < 1e-3);
        let dr = (s.radial(2.0) - s.radial(2.0 - eps)) / eps;
        assert!(dr.norm() < 1e-5);
    }

    #[test]
    fn neumann_mode_one_exact_amplitude() {
        for rho in [2.0, 10.0, 1e3] {
            let s = transmission_closed_form(1, c(rho), RadialBc::Neumann, c(1.0 - rho), [ZERO; 2], 1.0, 2.0).unwrap();
            let expected = (1.0 - rho) / (rho + 0.6);
            assert!((s.radial(1.0) - c(expected)).norm() < 1e-12);
        }
    }

    #[test]
    fn grid_solver_matches_closed_form() {
        let rho = c(50.0);
        let exact = transmission_closed_form(1, rho, RadialBc::Dirichlet, c(-49.0), [ZERO; 2], 1.0, 2.0).unwrap();
        let bvp = RadialBvp {
            mode: 1,
            r_sigma: 1.0,
            r_outer: 2.0,
            coeff: [rho, c(1.0)],
            reaction: [ZERO; 2],
            source: Arc::new(|_, _| ZERO),
            flux_jump: c(-49.0),
            bc: RadialBc::Dirichlet,
        };
        let num = bvp.solve(200, 200).unwrap();
        for r in [0.3, 1.0, 1.5] {
            assert!((num.radial(r) - exact.radial(r)).norm() < 1e-8 * exact.radial(1.0).norm());
        }
    }

    #[test]
    fn mode_zero_source_closed_form_matches_grid() {
        let f = [c(1.0), c(0.5)];
        let rho = c(20.0);
        let exact = transmission_closed_form(0, rho, RadialBc::Dirichlet, ZERO, f, 1.0, 2.0).unwrap();
        let num = transmission_radial(
            0,
            rho,
            RadialBc::Dirichlet,
            ZERO,
            Arc::new(move |_, s| if s == Side::Minus { f[0] } else { f[1] }),
            1.0,
            2.0,
        )
        .unwrap();
        for r in [0.0, 0.5, 1.0, 1.7] {
            assert!((num.radial(r) - exact.radial(r)).norm() < 1e-8);
        }
    }

    #[test]
    fn neumann_mode_zero_has_zero_mean() {
        // int f = 3 pi - 3 pi = 0
        let f = [c(3.0), c(-1.0)];
        let s = transmission_closed_form(0, c(5.0), RadialBc::Neumann, ZERO, f, 1.0, 2.0).unwrap();
        let n = 20000;
        let mut mean = ZERO;
        for i in 0..n {
            let r = 2.0 * (i as f64 + 0.5) / n as f64;
            mean += s.radial(r) * r * (2.0 / n as f64);
        }
        assert!(mean.norm() < 1e-7);
    }

    #[test]
    fn incompatible_neumann_data_rejected() {
        let r = transmission_closed_form(0, c(5.0), RadialBc::Neumann, ZERO, [c(1.0), c(1.0)], 1.0, 2.0);
        assert!(matches!(r, Err(Error::Compatibility { .. })));
    }

    #[test]
    fn limit_chain_starts_with_minus_identity() {
        let chain = limit_chain(1, RadialBc::Neumann, c(1.0), 1.0, 2.0, 4).unwrap();
        assert!((chain[0][0] - c(-1.0)).norm() < 1e-15);
        assert!((chain[0][1] - c(-0.2)).norm() < 1e-15);
        assert!((chain[0][2] - c(-0.8)).norm() < 1e-15);
        // A_k = delta_k1 g - 0.6 A_{k-1}
        assert!((chain[1][0] - c(1.6)).norm() < 1e-14);
        assert!((chain[2][0] - c(-0.96)).norm() < 1e-14);
    }

    #[test]
    fn series_of_limit_chain_sums_to_exact() {
        let rho: f64 = 40.0;
        let chain = limit_chain(1, RadialBc::Dirichlet, c(1.0), 1.0, 2.0, 80).unwrap();
        let sum: C64 = chain
            .iter()
            .enumerate()
            .map(|(k, t)| t[0] * rho.powi(-(k as i32)))
            .sum();
        let exact =
            transmission_closed_form(1, c(rho), RadialBc::Dirichlet, c(1.0 - rho), [ZERO; 2], 1.0, 2.0).unwrap();
        assert!((sum - exact.radial(1.0)).norm() < 1e-12);
    }

    #[test]
    fn tm_reference_is_self_consistent() {
        let p = TmParameters {
            kappa: 1.0,
            nu: 1.0,
            delta: 0.1,
        };
        let j = Arc::new(|r: f64| {
            if r > 1.0 {
                c((std::f64::consts::PI * (r - 1.0)).sin().powi(2))
            } else {
                ZERO
            }
        });
        let s = tm_radial(0, p, j, RadialBc::Neumann, 1.0, 2.0).unwrap();
        assert!(s.disagreement() <= RICHARDSON_TOL);
    }

    #[test]
    fn richardson_in_rho_removes_low_orders() {
        let f = |rho: f64| Ok(c(0.25 + 3.0 / rho - 7.0 / (rho * rho)));
        let lim = richardson_in_inverse_rho(f, 100.0).unwrap();
        assert!((lim - c(0.25)).norm() < 1e-12);
    }
}
