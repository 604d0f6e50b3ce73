//! Config schemas. Every struct rejects unknown fields, and a file is fully
//! parsed and validated before any numerical work starts.

use std::path::{Path, PathBuf};

use markov_coder::prob::Unit;
use markov_coder::synth::{gaussian_mixture, rng, two_factors, uniform_box};
use markov_coder::vq::EmpiricalInput;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Reads and parses a JSON file. Returns the typed value and the raw JSON
/// (used for the config hash).
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<(T, serde_json::Value)> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let cfg = || |source| CliError::Config { path: path.to_path_buf(), source };
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(cfg())?;
    let typed = serde_json::from_str(&text).map_err(cfg())?;
    Ok((typed, raw))
}

/// Config file for `train`: the data source, the trainer block and optional
/// run settings (overridden by `--seed` and `--unit`).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile<T> {
    pub data: DataSpec,
    pub model: T,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub unit: Option<Unit>,
}

fn one() -> f64 {
    1.0
}

fn zero() -> f64 {
    0.0
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformParams {
    pub n: usize,
    #[serde(default = "one_usize")]
    pub dim: usize,
    #[serde(default = "zero")]
    pub lo: f64,
    #[serde(default = "one")]
    pub hi: f64,
}

impl Default for UniformParams {
    fn default() -> Self {
        Self { n: 200, dim: 1, lo: 0.0, hi: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmParams {
    pub n: usize,
    pub centers: Vec<Vec<f64>>,
    pub width: f64,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self { n: 300, centers: vec![vec![0.0], vec![1.0], vec![2.0]], width: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorParams {
    pub n: usize,
    pub levels: Vec<f64>,
    pub noise: f64,
}

impl Default for FactorParams {
    fn default() -> Self {
        Self { n: 300, levels: vec![-1.0, 0.0, 1.0], noise: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    /// Layer sizes `M_0..M_L`.
    pub sizes: Vec<usize>,
    /// Deterministic forward maps with a perfect model (sizes non-increasing).
    #[serde(default)]
    pub deterministic: bool,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self { sizes: vec![3, 2, 2], deterministic: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeParams {
    pub nodes: usize,
    pub alphabet: usize,
    pub depth: usize,
    pub max_alphabet: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { nodes: 4, alphabet: 2, depth: 2, max_alphabet: 3 }
    }
}

/// Where training data comes from.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSpec {
    /// A dataset file as written by `synth` (path relative to the config).
    File { path: PathBuf },
    Inline {
        points: Vec<Vec<f64>>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    Uniform(UniformParams),
    Gmm(GmmParams),
    Factors(FactorParams),
}

/// Dataset file: points, optional weights, optional ground-truth labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetDoc {
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Vec<usize>>>,
}

impl DatasetDoc {
    pub fn input(&self) -> Result<EmpiricalInput> {
        Ok(match &self.weights {
            Some(w) => EmpiricalInput::new(self.points.clone(), w.clone())?,
            None => EmpiricalInput::uniform(self.points.clone())?,
        })
    }
}

pub fn uniform_data(p: &UniformParams, seed: u64) -> Result<DatasetDoc> {
    if !(p.lo < p.hi) {
        return Err(CliError::Usage(format!("uniform: need lo < hi, got {} and {}", p.lo, p.hi)));
    }
    let d = uniform_box(&mut rng(seed), p.n, p.dim, p.lo, p.hi)?;
    Ok(DatasetDoc { points: d.points().to_vec(), weights: None, labels: None })
}

pub fn gmm_data(p: &GmmParams, seed: u64) -> Result<DatasetDoc> {
    let (d, labels) = gaussian_mixture(&mut rng(seed), p.n, &p.centers, p.width)?;
    Ok(DatasetDoc { points: d.points().to_vec(), weights: None, labels: Some(labels.into_iter().map(|l| vec![l]).collect()) })
}

pub fn factor_data(p: &FactorParams, seed: u64) -> Result<DatasetDoc> {
    let (d, labels) = two_factors(&mut rng(seed), p.n, &p.levels, p.noise)?;
    Ok(DatasetDoc { points: d.points().to_vec(), weights: None, labels: Some(labels.into_iter().map(|l| l.to_vec()).collect()) })
}

impl DataSpec {
    /// Materialises the dataset. Generated sources use `seed`, so they match
    /// `synth` output for the same parameters and seed.
    pub fn resolve(&self, base: &Path, seed: u64) -> Result<DatasetDoc> {
        match self {
            DataSpec::File { path } => Ok(load::<DatasetDoc>(&base.join(path))?.0),
            DataSpec::Inline { points, weights } => {
                Ok(DatasetDoc { points: points.clone(), weights: weights.clone(), labels: None })
            }
            DataSpec::Uniform(p) => uniform_data(p, seed),
            DataSpec::Gmm(p) => gmm_data(p, seed),
            DataSpec::Factors(p) => factor_data(p, seed),
        }
    }
}

/// Config for `verify`: extra chain fixtures to check.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyFile {
    #[serde(default)]
    pub fixtures: Vec<markov_coder::verify::ChainFixture>,
}

/// `eval skip` input: layer-0 points plus a 3-layer chain.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkipSpec {
    pub points: Vec<Vec<f64>>,
    pub chain: markov_coder::chain::ChainDoc,
}

#[cfg(test)]
mod tests {
    use super::*;
    use markov_coder::vq::SoftVqConfig;

    #[test]
    fn data_spec_forms() {
        let s: DataSpec = serde_json::from_str(r#"{"source":"uniform","n":10}"#).unwrap();
        assert_eq!(s, DataSpec::Uniform(UniformParams { n: 10, ..UniformParams::default() }));
        let s: DataSpec = serde_json::from_str(r#"{"source":"inline","points":[[0.0],[1.0]]}"#).unwrap();
        assert!(matches!(s, DataSpec::Inline { .. }));
        assert!(serde_json::from_str::<DataSpec>(r#"{"source":"uniform","n":10,"size":3}"#).is_err());
        assert!(serde_json::from_str::<DataSpec>(r#"{"source":"file","path":"x","n":1}"#).is_err());
    }

    #[test]
    fn missing_field_is_named_with_position() {
        let text = "{\n  \"data\": {\"source\": \"uniform\", \"n\": 10},\n  \"model\": {\"sigma0\": 0.1, \"iterations\": 3}\n}";
        let e = serde_json::from_str::<TrainFile<SoftVqConfig>>(text).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("missing field `codes`"), "{msg}");
        assert!(e.line() > 0);
    }

    #[test]
    fn unknown_top_level_field_rejected() {
        let text = r#"{"data":{"source":"uniform","n":10},"model":{"codes":2,"sigma0":0.1,"iterations":3},"sede":1}"#;
        let msg = serde_json::from_str::<TrainFile<SoftVqConfig>>(text).unwrap_err().to_string();
        assert!(msg.contains("unknown field `sede`"), "{msg}");
    }

    #[test]
    fn generated_data_is_seeded() {
        let p = UniformParams::default();
        assert_eq!(uniform_data(&p, 7).unwrap(), uniform_data(&p, 7).unwrap());
        assert_ne!(uniform_data(&p, 7).unwrap(), uniform_data(&p, 8).unwrap());
        let f = factor_data(&FactorParams::default(), 1).unwrap();
        assert_eq!(f.labels.unwrap()[0].len(), 2);
    }
}
