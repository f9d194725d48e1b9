//! Experiment configuration. Every field has a default; the resolved config
//! is echoed into each `summary.json`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use skewlab::anosov::{make_anosov, LeafKind, LinearAnosov};
use skewlab::ergodic::Observable;
use skewlab::fiber::{FiberMapFamily, SkewProduct};
use skewlab::perturbation::{perturb_skew, BumpTranslation, DestroyConfig};
use skewlab::torus::{FiberRegion, TorusPoint};

pub const MAX_POWER: u32 = 8;
pub const MAX_GRID: usize = 512;
pub const MAX_SEEDS: usize = 10_000;
pub const MAX_K: usize = 100_000;
pub const MAX_WORD_LENGTH: usize = 32;
pub const MAX_QUADS: usize = 8;
pub const MAX_ITERATIONS: usize = 10_000_000;
pub const MAX_ICS: usize = 1_000;
pub const MAX_PBB_INSTANCES: usize = 10_000;
pub const MAX_PIECES: usize = 64;
pub const MAX_SWEEP_VALUES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base: BaseConfig,
    pub family: FiberMapFamily,
    /// Extra bump translations composed into the family, `g_x ∘ h_x`.
    pub perturbations: Vec<BumpTranslation>,
    pub quad: QuadConfig,
    pub certify: CertifyConfig,
    pub holonomy: HolonomyConfig,
    pub classify: ClassifyConfig,
    pub destroy: DestroyScenario,
    pub ergodic: ErgodicConfig,
    pub pbb: PbbConfig,
    pub sweep: SweepConfig,
    /// Holonomy / fixed-point tolerance shared by all scenarios.
    pub tol: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            base: BaseConfig::default(),
            family: FiberMapFamily::identity(),
            perturbations: Vec::new(),
            quad: QuadConfig::default(),
            certify: CertifyConfig::default(),
            holonomy: HolonomyConfig::default(),
            classify: ClassifyConfig::default(),
            destroy: DestroyScenario::default(),
            ergodic: ErgodicConfig::default(),
            pbb: PbbConfig::default(),
            sweep: SweepConfig::default(),
            tol: 1e-10,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseConfig {
    pub matrix: [[i64; 2]; 2],
    /// The base map is `matrix^power`.
    pub power: u32,
}

impl Default for BaseConfig {
    fn default() -> Self {
        BaseConfig { matrix: [[2, 1], [1, 1]], power: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    pub x: TorusPoint,
    pub radius: f64,
    pub max_den: i64,
    pub n_check: usize,
    /// Number of quads (loop-map pairs) used by `classify`.
    pub count: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { x: TorusPoint::ORIGIN, radius: 0.1, max_den: 10, n_check: 50, count: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    pub grid_n: usize,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig { grid_n: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolonomyConfig {
    pub x: TorusPoint,
    pub kind: LeafKind,
    /// Signed leaf coordinate of the target point.
    pub offset: f64,
    pub grid_n: usize,
    /// Check budget for the equivariance relation.
    pub equivariance_tol: f64,
}

impl Default for HolonomyConfig {
    fn default() -> Self {
        HolonomyConfig {
            x: TorusPoint { u: 0.2, v: 0.3 },
            kind: LeafKind::Stable,
            offset: 0.07,
            grid_n: 32,
            equivariance_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub seeds: usize,
    /// Point budget per class.
    pub k: usize,
    pub word_length: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig { seeds: 100, k: 2000, word_length: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DestroyScenario {
    pub epsilon: f64,
    /// Resolution multiplier of the independent re-scan of `V_x`.
    pub rescan_factor: usize,
    pub settings: DestroyConfig,
}

impl Default for DestroyScenario {
    fn default() -> Self {
        DestroyScenario { epsilon: 0.03, rescan_factor: 2, settings: DestroyConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErgodicConfig {
    pub observable: Observable,
    pub n: usize,
    pub ics: usize,
    /// Fiber region for the initial conditions; whole fiber when absent.
    pub region: Option<FiberRegion>,
    /// Run the destroy scenario first and probe its output (ICs in `V_x` unless `region` is set).
    pub destroy_first: bool,
}

impl Default for ErgodicConfig {
    fn default() -> Self {
        ErgodicConfig { observable: Observable::FiberCos, n: 100_000, ics: 50, region: None, destroy_first: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PbbConfig {
    pub instances: usize,
    pub max_pieces: usize,
    pub max_jumps: usize,
    /// Exact rational, e.g. `"1/10"`.
    pub epsilon: String,
    pub grid_n: usize,
}

impl Default for PbbConfig {
    fn default() -> Self {
        PbbConfig { instances: 100, max_pieces: 21, max_jumps: 20, epsilon: "1/10".into(), grid_n: 8 }
    }
}

/// One-parameter sweep; each value is run through certify + classify.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub seeds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Constant Lewowicz family `f_c`.
    LewowiczC,
    /// Multiplies every bump amplitude of the configured family.
    BumpScale,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { parameter: SweepParameter::LewowiczC, values: vec![0.5, 1.5, 3.0], seeds: 20 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be positive and finite, got {v}");
            }
            Ok(())
        };
        let bounded = |name: &str, v: usize, lo: usize, hi: usize| -> Result<()> {
            if v < lo || v > hi {
                bail!("{name} must be in {lo}..={hi}, got {v}");
            }
            Ok(())
        };
        pos("tol", self.tol)?;
        pos("quad.radius", self.quad.radius)?;
        pos("holonomy.equivariance_tol", self.holonomy.equivariance_tol)?;
        pos("destroy.epsilon", self.destroy.epsilon)?;
        pos("destroy.settings.tol", self.destroy.settings.tol)?;
        pos("destroy.settings.sigma_min", self.destroy.settings.sigma_min)?;
        if !(1..=MAX_POWER).contains(&self.base.power) {
            bail!("base.power must be in 1..={MAX_POWER}, got {}", self.base.power);
        }
        bounded("quad.count", self.quad.count, 1, MAX_QUADS)?;
        bounded("quad.n_check", self.quad.n_check, 1, 10_000)?;
        bounded("certify.grid_n", self.certify.grid_n, 16, MAX_GRID)?;
        bounded("holonomy.grid_n", self.holonomy.grid_n, 1, MAX_GRID)?;
        bounded("classify.seeds", self.classify.seeds, 1, MAX_SEEDS)?;
        bounded("classify.k", self.classify.k, 1, MAX_K)?;
        bounded("classify.word_length", self.classify.word_length, 1, MAX_WORD_LENGTH)?;
        bounded("destroy.rescan_factor", self.destroy.rescan_factor, 1, 8)?;
        bounded("destroy.settings.scan_grid_n", self.destroy.settings.scan_grid_n, 1, MAX_GRID)?;
        bounded("ergodic.n", self.ergodic.n, 4, MAX_ITERATIONS)?;
        bounded("ergodic.ics", self.ergodic.ics, 2, MAX_ICS)?;
        bounded("pbb.instances", self.pbb.instances, 1, MAX_PBB_INSTANCES)?;
        bounded("pbb.max_pieces", self.pbb.max_pieces, 1, MAX_PIECES)?;
        bounded("pbb.max_jumps", self.pbb.max_jumps, 0, MAX_PIECES)?;
        bounded("pbb.grid_n", self.pbb.grid_n, 1, 1024)?;
        bounded("sweep.values", self.sweep.values.len(), 1, MAX_SWEEP_VALUES)?;
        bounded("sweep.seeds", self.sweep.seeds, 1, MAX_SEEDS)?;
        self.pbb_epsilon()?;
        Ok(())
    }

    pub fn base_map(&self) -> Result<LinearAnosov> {
        Ok(make_anosov(self.base.matrix)?.power(self.base.power)?)
    }

    /// The configured family over the configured base, with `perturbations` applied.
    pub fn skew_product(&self) -> Result<SkewProduct> {
        self.skew_product_with(self.family.clone())
    }

    pub fn skew_product_with(&self, family: FiberMapFamily) -> Result<SkewProduct> {
        let sp = SkewProduct::new(self.base_map()?, family);
        Ok(perturb_skew(&sp, &self.perturbations)?)
    }

    pub fn pbb_epsilon(&self) -> Result<skewlab::monotone::Q> {
        let e: skewlab::monotone::Q = self
            .pbb
            .epsilon
            .parse()
            .map_err(|_| anyhow::anyhow!("pbb.epsilon must be a rational like \"1/10\", got {:?}", self.pbb.epsilon))?;
        if e <= skewlab::monotone::q(0, 1) {
            bail!("pbb.epsilon must be positive, got {e}");
        }
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let mut c = ExperimentConfig::default();
        c.family = FiberMapFamily::constant(skewlab::fiber::FiberMap::Lewowicz { c: 0.8 });
        c.ergodic.region = Some(FiberRegion::Disk { center: TorusPoint { u: 0.5, v: 0.5 }, radius: 0.1 });
        c.sweep.parameter = SweepParameter::BumpScale;
        let s = serde_json::to_string_pretty(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), s);
    }

    #[test]
    fn empty_object_is_default() {
        let c: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_and_bad_values() {
        let e = serde_json::from_str::<ExperimentConfig>("{\n  \"classify\": {\"kk\": 3}\n}").unwrap_err();
        assert!(e.to_string().contains("kk") && e.line() == 2);
        let mut c = ExperimentConfig::default();
        c.tol = 0.0;
        assert!(c.validate().is_err());
        c.tol = 1e-10;
        c.classify.k = MAX_K + 1;
        assert!(c.validate().is_err());
        c.classify.k = 10;
        c.pbb.epsilon = "-1/3".into();
        assert!(c.validate().is_err());
    }
}
