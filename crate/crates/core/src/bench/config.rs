//! Experiment configuration files.
//!
//! ```toml
//! name = "sphere"
//! output = "results/sphere"
//!
//! [kernel]
//! kind = "sphere_distance"   # gaussian | matern32 | sphere_distance
//! dim = 3                    # box kernels only
//! rho = 1.7320508075688772   # matern32 only; default √3
//!
//! [measure]
//! kind = "uniform"           # uniform | truncated_gaussian
//!
//! [embedding]
//! kind = "analytic"          # analytic | empirical
//! sample_size = 20000        # empirical only
//! seed = 0
//!
//! [run]
//! methods = ["eq_weight", "linesearch", "fc", "pmp", "gcos", "fc_pmp", "fc_gcos"]
//! seeds = [0, 1, 2]
//! iterations = 300
//! k_max = 10
//! candidates = 10000
//! probe = 10000
//!
//! [run.iterations_per_method]  # optional
//! gcos = 60
//!
//! [run.delta]                  # optional; defaults per method
//! pmp = -1e-4
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::herding::{HerdingConfig, Variant};
use crate::kernels::{BaseMeasure, Domain, KernelKind, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    Gaussian,
    Matern32,
    SphereDistance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub kind: KernelChoice,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureChoice {
    Uniform,
    TruncatedGaussian,
}

impl From<MeasureChoice> for BaseMeasure {
    fn from(m: MeasureChoice) -> Self {
        match m {
            MeasureChoice::Uniform => BaseMeasure::Uniform,
            MeasureChoice::TruncatedGaussian => BaseMeasure::TruncatedGaussian,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    pub kind: MeasureChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingChoice {
    Analytic,
    Empirical,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSection {
    pub kind: EmbeddingChoice,
    #[serde(default = "default_sample_size")]
    pub sample_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_sample_size() -> usize {
    20_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub methods: Vec<String>,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    pub candidates: usize,
    #[serde(default = "default_probe")]
    pub probe: usize,
    #[serde(default)]
    pub iterations_per_method: BTreeMap<String, usize>,
    #[serde(default)]
    pub delta: BTreeMap<String, f64>,
}

fn default_k_max() -> usize {
    10
}

fn default_probe() -> usize {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub output: PathBuf,
    pub kernel: KernelSection,
    pub measure: MeasureSection,
    pub embedding: EmbeddingSection,
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form (after overrides).
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.methods()?;
        for name in self
            .run
            .iterations_per_method
            .keys()
            .chain(self.run.delta.keys())
        {
            name.parse::<Variant>()?;
        }
        if self.run.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if self.run.candidates == 0 {
            return Err(Error::Config("candidates must be at least 1".into()));
        }
        if self.embedding.kind == EmbeddingChoice::Empirical && self.embedding.sample_size == 0 {
            return Err(Error::Config(
                "embedding sample_size must be at least 1".into(),
            ));
        }
        self.kernel_spec()?;
        for v in self.methods()? {
            self.herding_config(v).validate()?;
        }
        Ok(())
    }

    pub fn methods(&self) -> Result<Vec<Variant>> {
        if self.run.methods.is_empty() {
            return Err(Error::Config("methods must be nonempty".into()));
        }
        self.run.methods.iter().map(|m| m.parse()).collect()
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec<f64>> {
        let k = &self.kernel;
        let cube = |dim: Option<usize>| -> Result<Domain<f64>> {
            let dim = dim.ok_or_else(|| Error::Config("box kernels need `dim`".into()))?;
            Domain::cube(dim, k.lower.unwrap_or(-1.0), k.upper.unwrap_or(1.0))
        };
        match k.kind {
            KernelChoice::Gaussian => KernelSpec::new(KernelKind::Gaussian, cube(k.dim)?),
            KernelChoice::Matern32 => KernelSpec::new(
                KernelKind::Matern32 {
                    rho: k.rho.unwrap_or(3f64.sqrt()),
                },
                cube(k.dim)?,
            ),
            KernelChoice::SphereDistance => match k.dim {
                None | Some(3) => Ok(KernelSpec::sphere_distance()),
                Some(d) => Err(Error::Config(format!(
                    "sphere kernel lives in 3 dimensions, got dim = {d}"
                ))),
            },
        }
    }

    pub fn base_measure(&self) -> BaseMeasure {
        self.measure.kind.into()
    }

    pub fn iterations_for(&self, v: Variant) -> usize {
        self.run
            .iterations_per_method
            .get(v.name())
            .copied()
            .unwrap_or(self.run.iterations)
    }

    pub fn delta_for(&self, v: Variant) -> f64 {
        self.run
            .delta
            .get(v.name())
            .copied()
            .unwrap_or(v.default_delta())
    }

    pub fn herding_config(&self, v: Variant) -> HerdingConfig<f64> {
        HerdingConfig::new(v, self.iterations_for(v))
            .with_k_max(self.run.k_max)
            .with_delta(self.delta_for(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "t"
output = "out"
[kernel]
kind = "gaussian"
dim = 2
[measure]
kind = "truncated_gaussian"
[embedding]
kind = "analytic"
[run]
methods = ["linesearch", "gcos"]
seeds = [1, 2]
iterations = 10
candidates = 100
[run.iterations_per_method]
gcos = 4
[run.delta]
gcos = 0.0
"#;

    #[test]
    fn parses_and_applies_overrides() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let gcos: Variant = "gcos".parse().unwrap();
        assert_eq!(c.iterations_for(gcos), 4);
        assert_eq!(c.iterations_for(Variant::LineSearch), 10);
        assert_eq!(c.delta_for(gcos), 0.0);
        assert_eq!(c.run.k_max, 10);
        assert_eq!(c.kernel_spec().unwrap().dim(), 2);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.run.seeds.push(3);
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn rejects_bad_values() {
        for (from, to) in [
            (
                r#"methods = ["linesearch", "gcos"]"#,
                r#"methods = ["newton"]"#,
            ),
            ("seeds = [1, 2]", "seeds = []"),
            ("candidates = 100", "candidates = 0"),
            ("gcos = 0.0", "gcos = -1.0"),
            ("kind = \"gaussian\"", "kind = \"laplace\""),
        ] {
            let text = SAMPLE.replace(from, to);
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{to}");
        }
    }
}
