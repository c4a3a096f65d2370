//! Campaign configuration files (TOML).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::helmholtz::{skin_mesh, TmProblem};
use crate::mesh::{
    build_annulus, build_annulus_sized, build_checkerboard, build_square_polygon, l_shaped_polygon, Mesh,
};
use crate::transmission::{ExteriorBc, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignKind {
    Uniformity,
    Series,
    LimitRate,
    Symmetric,
    Modified,
    Checkerboard,
    MaxwellUniform,
    Skin,
}

impl CampaignKind {
    pub fn name(self) -> &'static str {
        match self {
            CampaignKind::Uniformity => "uniformity",
            CampaignKind::Series => "series",
            CampaignKind::LimitRate => "limit_rate",
            CampaignKind::Symmetric => "symmetric",
            CampaignKind::Modified => "modified",
            CampaignKind::Checkerboard => "checkerboard",
            CampaignKind::MaxwellUniform => "maxwell_uniform",
            CampaignKind::Skin => "skin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Annulus,
    Polygon,
    Checkerboard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default = "default_kind")]
    pub kind: GeometryKind,
    #[serde(default = "one")]
    pub r_sigma: f64,
    #[serde(default = "two")]
    pub r_outer: f64,
    /// Refinement levels; single-mesh campaigns use the first entry.
    #[serde(default = "default_levels")]
    pub levels: Vec<u32>,
    /// Target element size; overrides `levels` for annulus and polygon meshes
    /// and is the bulk size of layer-graded meshes.
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default = "one")]
    pub half_width: f64,
    /// Interface polygon for `polygon` geometries (default: L-shape).
    #[serde(default)]
    pub polygon: Option<Vec<[f64; 2]>>,
    /// Radial elements per skin depth for layer-graded meshes.
    #[serde(default = "default_per_depth")]
    pub per_depth: f64,
}

fn default_kind() -> GeometryKind {
    GeometryKind::Annulus
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn default_levels() -> Vec<u32> {
    vec![3]
}
fn default_per_depth() -> f64 {
    12.0
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            r_sigma: 1.0,
            r_outer: 2.0,
            levels: default_levels(),
            h: None,
            half_width: 1.0,
            polygon: None,
            per_depth: default_per_depth(),
        }
    }
}

impl GeometryConfig {
    /// Mesh at refinement level `level` (ignored when `h` is set, except for
    /// the checkerboard).
    pub fn mesh_at(&self, kind: GeometryKind, level: u32) -> Result<Mesh> {
        match kind {
            GeometryKind::Annulus => match self.h {
                Some(h) => build_annulus_sized(self.r_sigma, self.r_outer, h),
                None => build_annulus(self.r_sigma, self.r_outer, level),
            },
            GeometryKind::Polygon => {
                let poly = self.polygon.clone().unwrap_or_else(l_shaped_polygon);
                let h = self.h.unwrap_or(0.2 * 0.5f64.powi(level as i32));
                build_square_polygon(self.half_width, &poly, h)
            }
            GeometryKind::Checkerboard => build_checkerboard(self.half_width, level),
        }
    }

    pub fn first_level(&self) -> Result<u32> {
        self.levels
            .first()
            .copied()
            .ok_or_else(|| Error::Config("geometry.levels is empty".into()))
    }

    pub fn mesh(&self) -> Result<Arc<Mesh>> {
        Ok(Arc::new(self.mesh_at(self.kind, self.first_level()?)?))
    }

    /// Annulus graded for the skin depth of `problem`.
    pub fn skin_mesh(&self, problem: &TmProblem) -> Result<Mesh> {
        if self.kind != GeometryKind::Annulus {
            return Err(Error::Config("TM campaigns need an annulus geometry".into()));
        }
        skin_mesh(
            self.r_sigma,
            self.r_outer,
            self.h.unwrap_or(0.05),
            problem,
            self.per_depth,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    /// Contrast magnitudes.
    #[serde(default)]
    pub rho: Vec<f64>,
    /// Arguments of the contrast, combined with every magnitude.
    #[serde(default = "default_args")]
    pub rho_arg: Vec<f64>,
    #[serde(default)]
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub delta: Vec<f64>,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default = "default_bc")]
    pub bc: Vec<ExteriorBc>,
    #[serde(default = "default_variant")]
    pub variant: Variant,
}

fn default_args() -> Vec<f64> {
    vec![0.0]
}
fn default_bc() -> Vec<ExteriorBc> {
    vec![ExteriorBc::Neumann]
}
fn default_variant() -> Variant {
    Variant::Standard
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            rho: Vec::new(),
            rho_arg: default_args(),
            sigma: Vec::new(),
            delta: Vec::new(),
            omega: 1.0,
            bc: default_bc(),
            variant: default_variant(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_f")]
    pub f: String,
    #[serde(default = "default_g")]
    pub g: String,
    #[serde(default = "default_j")]
    pub j: String,
    /// Subtract the discrete domain mean from `f`.
    #[serde(default)]
    pub center_f: bool,
    /// Subtract the discrete interface mean from `g`.
    #[serde(default)]
    pub center_g: bool,
}

fn default_f() -> String {
    "zero".into()
}
fn default_g() -> String {
    "cos".into()
}
fn default_j() -> String {
    "ring_smooth".into()
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            f: default_f(),
            g: default_g(),
            j: default_j(),
            center_f: false,
            center_g: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    #[serde(rename = "K_max", default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Remainder orders `K` (limit_rate) or expansion orders `m` (skin).
    #[serde(default)]
    pub orders: Option<Vec<usize>>,
    /// Contrast magnitudes of the series part of `symmetric` and `modified`
    /// (default: `physics.rho`).
    #[serde(default)]
    pub rho: Option<Vec<f64>>,
}

fn default_k_max() -> usize {
    60
}
fn default_tol() -> f64 {
    1e-13
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            k_max: default_k_max(),
            tol: default_tol(),
            orders: None,
            rho: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub campaign: CampaignKind,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub series: SeriesConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: CampaignConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks that the sweep list the campaign iterates over is present.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if !(g.r_sigma > 0.0 && g.r_outer > g.r_sigma && g.half_width > 0.0) {
            return Err(Error::Config("geometry radii or half width out of range".into()));
        }
        if g.levels.is_empty() {
            return Err(Error::Config("geometry.levels is empty".into()));
        }
        let p = &self.physics;
        if p.bc.is_empty() || p.rho_arg.is_empty() {
            return Err(Error::Config("physics.bc and physics.rho_arg must not be empty".into()));
        }
        if !(p.omega > 0.0) {
            return Err(Error::Config("physics.omega must be positive".into()));
        }
        let (list, key) = match self.campaign {
            CampaignKind::MaxwellUniform => (&p.sigma, "physics.sigma"),
            CampaignKind::Skin => (&p.delta, "physics.delta"),
            _ => (&p.rho, "physics.rho"),
        };
        if list.is_empty() {
            return Err(Error::Config(format!("empty sweep list `{key}`")));
        }
        if list.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("`{key}` entries must be positive")));
        }
        if matches!(self.series.orders.as_deref(), Some([])) {
            return Err(Error::Config("empty sweep list `series.orders`".into()));
        }
        if let Some(r) = &self.series.rho {
            if r.is_empty() || r.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Config(
                    "`series.rho` must be a non-empty list of positive values".into(),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = CampaignConfig::from_toml("campaign = \"series\"\n[physics]\nrho = [1e3]\n").unwrap();
        assert_eq!(cfg.geometry.levels, vec![3]);
        assert_eq!(cfg.physics.bc, vec![ExteriorBc::Neumann]);
        assert_eq!(cfg.series.k_max, 60);
        let again = CampaignConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn empty_sweep_is_a_config_error() {
        let r = CampaignConfig::from_toml("campaign = \"uniformity\"\n[physics]\nrho = []\n");
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn unknown_campaign_and_keys_are_rejected() {
        assert!(CampaignConfig::from_toml("campaign = \"nope\"\n").is_err());
        assert!(CampaignConfig::from_toml("campaign = \"series\"\nrhoo = 1\n").is_err());
    }
}
