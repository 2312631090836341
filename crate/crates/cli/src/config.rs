//! Run configuration: TOML with dotted sections.
//!
//! ```toml
//! mode = "continuum"          # continuum | lattice | tensor_box
//! alphas = [0.5, 1.0, "inf"]
//! seed = 1
//!
//! [gamma]
//! dim = 1
//! shape = "interval_union"
//! intervals = [[-1.0, 1.0]]
//!
//! [omega]
//! dim = 1
//! shape = "interval_union"
//! intervals = [[0.0, 1.0]]
//!
//! [grid]                      # one of: L, values, or L_min/L_max/count
//! L_min = 20.0
//! L_max = 200.0
//! count = 10
//! ```
//!
//! In lattice mode `L` is the block length in sites and `[lattice] k_f`
//! replaces the two domains.

use std::f64::consts::PI;

use fermi_ee::asymptotics::{geometric_grid, validate_grid, FitWeighting};
use fermi_ee::discretize::{NyquistPolicy, NystromConfig, LATTICE_MAX_SITES};
use fermi_ee::spectra::{PipelineConfig, RouteChoice};
use fermi_ee::geometry::Shape;
use fermi_ee::{Domain, RenyiOrder};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Continuum,
    Lattice,
    TensorBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<RenyiOrder>,
    /// Seeds the Monte Carlo cross-check only; TOML limits it to `i64::MAX`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Domain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Domain>,
    #[serde(default)]
    pub lattice: LatticeSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub budget: BudgetSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub jcoeff: JcoeffSection,
    #[serde(default)]
    pub functional: FunctionalSection,
}

fn default_alphas() -> Vec<RenyiOrder> {
    vec![RenyiOrder::One]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub k_f: f64,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection { k_f: PI / 2.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(rename = "L_min", default, skip_serializing_if = "Option::is_none")]
    pub l_min: Option<f64>,
    #[serde(rename = "L_max", default, skip_serializing_if = "Option::is_none")]
    pub l_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationSection {
    pub nodes_per_unit: Option<f64>,
    pub nodes_per_wavelength: f64,
    pub panel_order: usize,
    pub nyquist: NyquistPolicy,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        let d = NystromConfig::default();
        DiscretizationSection {
            nodes_per_unit: d.nodes_per_unit,
            nodes_per_wavelength: d.nodes_per_wavelength,
            panel_order: d.panel_order,
            nyquist: d.nyquist,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    /// Defaults to the grid range.
    pub window: Option<[f64; 2]>,
    pub weighting: FitWeighting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSection {
    pub max_nodes: usize,
    pub max_tensor_eigenvalues: usize,
    pub max_lattice_sites: usize,
}

impl Default for BudgetSection {
    fn default() -> Self {
        let d = NystromConfig::default();
        BudgetSection {
            max_nodes: d.max_nodes,
            max_tensor_eigenvalues: d.max_tensor_eigenvalues,
            max_lattice_sites: LATTICE_MAX_SITES,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub json: Option<String>,
    pub csv: Option<String>,
    /// Partial rows of an interrupted sweep; defaults to `<json>.partial.jsonl`.
    pub resume: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JcoeffSection {
    pub resolution: usize,
    pub mc_samples: usize,
}

impl Default for JcoeffSection {
    fn default() -> Self {
        JcoeffSection { resolution: 512, mc_samples: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FunctionalSection {
    pub alphas: Vec<RenyiOrder>,
    pub tol: f64,
    pub dilog_y: f64,
}

impl Default for FunctionalSection {
    fn default() -> Self {
        FunctionalSection {
            alphas: [0.25, 0.5, 1.0, 1.5, 2.0, 4.0, 10.0].iter().map(|&a| RenyiOrder::new(a).unwrap()).collect(),
            tol: 1e-12,
            dilog_y: 1e6,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn nystrom(&self) -> NystromConfig {
        NystromConfig {
            nodes_per_unit: self.discretization.nodes_per_unit,
            nodes_per_wavelength: self.discretization.nodes_per_wavelength,
            panel_order: self.discretization.panel_order,
            nyquist: self.discretization.nyquist,
            max_nodes: self.budget.max_nodes,
            max_tensor_eigenvalues: self.budget.max_tensor_eigenvalues,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            route: match self.mode {
                Mode::TensorBox => RouteChoice::TensorBox,
                _ => RouteChoice::Nystrom,
            },
            nystrom: self.nystrom(),
            tolerance: None,
        }
    }

    /// `(Γ, Ω)`, required outside lattice mode.
    pub fn domains(&self) -> Result<(&Domain, &Domain), CliError> {
        match (&self.gamma, &self.omega) {
            (Some(g), Some(o)) => {
                if g.dim() != o.dim() {
                    return Err(CliError::Config(format!("gamma has dimension {} but omega has {}", g.dim(), o.dim())));
                }
                Ok((g, o))
            }
            _ => Err(CliError::Config("both [gamma] and [omega] are required".into())),
        }
    }

    pub fn dim(&self) -> usize {
        match self.mode {
            Mode::Lattice => 1,
            _ => self.omega.as_ref().map_or(1, Domain::dim),
        }
    }

    /// The scale grid, validated.
    pub fn grid_values(&self) -> Result<Vec<f64>, CliError> {
        let g = &self.grid;
        let integer = self.mode == Mode::Lattice;
        let values = match (g.l, &g.values, g.l_min, g.l_max, g.count) {
            (Some(l), None, None, None, None) => vec![l],
            (None, Some(v), None, None, None) => v.clone(),
            (None, None, Some(lo), Some(hi), Some(n)) => {
                if !(lo > 0.0 && hi > lo) {
                    return Err(CliError::Config(format!("grid needs 0 < L_min < L_max, got {lo}, {hi}")));
                }
                geometric_grid(lo, hi, n, integer)
            }
            (None, None, None, None, None) => Vec::new(),
            _ => {
                return Err(CliError::Config(
                    "[grid] takes exactly one of: L, values, or L_min + L_max + count".into(),
                ))
            }
        };
        validate_grid(&values, integer).map_err(|e| CliError::Config(e.to_string()))?;
        if integer {
            if let Some(&max) = values.last() {
                if max as usize > self.budget.max_lattice_sites.min(LATTICE_MAX_SITES) {
                    return Err(CliError::Config(format!(
                        "lattice block {max} exceeds the budget of {} sites",
                        self.budget.max_lattice_sites.min(LATTICE_MAX_SITES)
                    )));
                }
            }
        }
        Ok(values)
    }

    /// Checks everything that can be checked before computing.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.alphas.is_empty() {
            return Err(CliError::Config("alphas must not be empty".into()));
        }
        match self.mode {
            Mode::Lattice => {
                let k = self.lattice.k_f;
                if !(k > 0.0 && k < PI) {
                    return Err(CliError::Config(format!("lattice.k_f must lie in (0, π), got {k}")));
                }
            }
            // Domains are checked when present; commands that need them ask.
            Mode::Continuum | Mode::TensorBox if self.gamma.is_some() || self.omega.is_some() => {
                let (g, o) = self.domains()?;
                if self.mode == Mode::TensorBox && !(matches!(g.shape(), Shape::Box(_)) && matches!(o.shape(), Shape::Box(_))) {
                    return Err(CliError::Config("tensor_box mode needs box-shaped gamma and omega".into()));
                }
            }
            _ => {}
        }
        let d = &self.discretization;
        if let Some(npu) = d.nodes_per_unit {
            if !(npu > 0.0 && npu.is_finite()) {
                return Err(CliError::Config("discretization.nodes_per_unit must be positive".into()));
            }
        }
        if !(d.nodes_per_wavelength > 0.0) || d.panel_order == 0 || d.panel_order > 64 {
            return Err(CliError::Config("discretization needs nodes_per_wavelength > 0 and 1 ≤ panel_order ≤ 64".into()));
        }
        if let Some(w) = self.fit.window {
            if !(w[0] < w[1]) {
                return Err(CliError::Config("fit.window must be increasing".into()));
            }
        }
        if self.jcoeff.resolution == 0 {
            return Err(CliError::Config("jcoeff.resolution must be positive".into()));
        }
        if !(self.functional.tol > 0.0) || !(self.functional.dilog_y > 1.0) {
            return Err(CliError::Config("functional needs tol > 0 and dilog_y > 1".into()));
        }
        self.grid_values()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
alphas = [1.0, 2.0, "inf"]

[gamma]
dim = 1
shape = "interval_union"
intervals = [[-1.0, 1.0]]

[omega]
dim = 1
shape = "interval_union"
intervals = [[0.0, 1.0]]

[grid]
L = 5.0
"#;

    #[test]
    fn parse_minimal_and_round_trip() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.alphas.len(), 3);
        assert_eq!(cfg.grid_values().unwrap(), vec![5.0]);
        let back = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::parse("alphas = [0.0]").is_err());
        assert!(RunConfig::parse("bogus = 1").is_err());
        let cfg = RunConfig::parse("mode = \"lattice\"\n[lattice]\nk_f = 4.0\n[grid]\nL = 3\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::parse("mode = \"lattice\"\n[grid]\nL = 2.5\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::parse("mode = \"lattice\"\n[grid]\nL = 3\nvalues = [1.0]\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::parse("[grid]\nL = 3\n").unwrap();
        assert!(cfg.domains().is_err());
    }

    #[test]
    fn lattice_grid_rounds_to_sites() {
        let cfg = RunConfig::parse("mode = \"lattice\"\n[grid]\nL_min = 200\nL_max = 2000\ncount = 10\n").unwrap();
        let g = cfg.grid_values().unwrap();
        assert_eq!(g.len(), 10);
        assert!(g.iter().all(|x| x.fract() == 0.0));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn order() -> impl Strategy<Value = RenyiOrder> {
            prop_oneof![
                (0.05f64..20.0).prop_map(|a| RenyiOrder::new(a).unwrap()),
                Just(RenyiOrder::One),
                Just(RenyiOrder::Infinity),
            ]
        }

        fn domain() -> impl Strategy<Value = Domain> {
            prop_oneof![
                (-3.0f64..0.0, 0.1f64..3.0).prop_map(|(a, w)| Domain::interval(a, a + w).unwrap()),
                (0.1f64..2.0, 0.1f64..2.0).prop_map(|(w, h)| Domain::cuboid(&[(0.0, w), (-h, h)]).unwrap()),
                (0.1f64..2.0, -1.0f64..1.0).prop_map(|(r, c)| Domain::ball(&[c, 0.5], r).unwrap()),
            ]
        }

        proptest! {
            #[test]
            fn toml_round_trip(
                alphas in prop::collection::vec(order(), 1..5),
                seed in 0..=i64::MAX as u64,
                gamma in prop::option::of(domain()),
                omega in prop::option::of(domain()),
                l in prop::option::of(0.5f64..500.0),
                npu in prop::option::of(0.5f64..8.0),
                window in prop::option::of((1.0f64..10.0, 20.0f64..100.0)),
                lattice in any::<bool>(),
            ) {
                let cfg = RunConfig {
                    mode: if lattice { Mode::Lattice } else { Mode::Continuum },
                    alphas,
                    seed,
                    gamma,
                    omega,
                    grid: GridSection { l, ..Default::default() },
                    discretization: DiscretizationSection { nodes_per_unit: npu, ..Default::default() },
                    fit: FitSection { window: window.map(|(a, b)| [a, b]), weighting: FitWeighting::InverseArea },
                    ..RunConfig::parse("").unwrap()
                };
                let back = RunConfig::parse(&cfg.to_toml()).unwrap();
                prop_assert_eq!(back, cfg);
            }
        }
    }
}
