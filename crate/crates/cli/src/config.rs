//! TOML run configuration: domain, discretization, solver knobs, named
//! perturbation fields, and per-command sections.

use std::path::PathBuf;

use grushin_core::geometry::DomainSpec;
use grushin_core::perturbation::FieldSpec;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub discretization: Discretization,
    #[serde(default)]
    pub solver: Solver,
    /// named fields referenced by `derivative.field`, `--field`, etc.
    #[serde(default)]
    pub fields: Vec<NamedField>,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub derivative: DerivativeSection,
    #[serde(default)]
    pub branches: BranchesSection,
    #[serde(default)]
    pub pohozaev: PohozaevSection,
    #[serde(default)]
    pub scaling: ScalingSection,
    #[serde(default)]
    pub criticality: CriticalitySection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    /// elements across the largest domain extent
    #[serde(default = "default_n")]
    pub n: usize,
    /// eigenpairs to compute
    #[serde(default = "default_m")]
    pub m: usize,
}

fn default_n() -> usize {
    64
}

fn default_m() -> usize {
    5
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization { n: 64, m: 5 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solver {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// relative gap separating eigenvalue clusters
    #[serde(default = "default_cluster_rel_tol")]
    pub cluster_rel_tol: f64,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_seed() -> u64 {
    42
}

fn default_max_iter() -> usize {
    400
}

fn default_cluster_rel_tol() -> f64 {
    1e-6
}

impl Default for Solver {
    fn default() -> Self {
        Solver { tol: 1e-10, seed: 42, max_iter: 400, cluster_rel_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct NamedField {
    pub name: String,
    #[serde(flatten)]
    pub spec: FieldSpec,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    /// also write the eigenvectors as a nodal CSV table
    #[serde(default)]
    pub write_eigenvectors: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// relative certification tolerance of the 1D spectrum
    #[serde(default = "default_oracle_tol")]
    pub tol: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection { tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivativeSection {
    /// name of the perturbation field to differentiate along
    #[serde(default)]
    pub field: Option<String>,
    /// order of the elementary symmetric function of the cluster
    #[serde(default = "default_tau")]
    pub tau: usize,
    /// eigenvalue index whose cluster is differentiated (0-based)
    #[serde(default)]
    pub index: usize,
    /// finite-difference steps
    #[serde(default = "default_eps_list")]
    pub eps: Vec<f64>,
}

impl Default for DerivativeSection {
    fn default() -> Self {
        DerivativeSection { field: None, tau: 1, index: 0, eps: vec![1e-3, 2e-3] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchesSection {
    #[serde(default)]
    pub field: Option<String>,
    /// eigenvalue index whose cluster is analyzed (0-based)
    #[serde(default)]
    pub index: usize,
    /// one-sided finite-difference step
    #[serde(default = "default_branch_eps")]
    pub eps: f64,
}

impl Default for BranchesSection {
    fn default() -> Self {
        BranchesSection { field: None, index: 0, eps: 1e-2 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PohozaevSection {
    /// eigenvalue index (0-based)
    #[serde(default)]
    pub index: usize,
}

impl Default for PohozaevSection {
    fn default() -> Self {
        PohozaevSection { index: 0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    /// dilation parameter
    #[serde(default = "default_t")]
    pub t: f64,
}

impl Default for ScalingSection {
    fn default() -> Self {
        ScalingSection { t: 2.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalitySection {
    /// "volume" or "perimeter"
    #[serde(default = "default_constraint")]
    pub constraint: String,
}

impl Default for CriticalitySection {
    fn default() -> Self {
        CriticalitySection { constraint: "volume".into() }
    }
}

fn default_tau() -> usize {
    1
}

fn default_eps_list() -> Vec<f64> {
    vec![1e-3, 2e-3]
}

fn default_branch_eps() -> f64 {
    1e-2
}

fn default_t() -> f64 {
    2.0
}

fn default_constraint() -> String {
    "volume".into()
}

fn default_oracle_tol() -> f64 {
    1e-8
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    pub fn field_spec(&self, name: &str) -> Result<FieldSpec, String> {
        self.fields
            .iter()
            .find(|f| f.name == name)
            .map(|f| f.spec.clone())
            .ok_or_else(|| {
                let known: Vec<&str> = self.fields.iter().map(|f| f.name.as_str()).collect();
                format!("field '{name}' not defined in config (known: {known:?})")
            })
    }
}
