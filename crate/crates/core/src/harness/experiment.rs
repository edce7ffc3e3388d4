//! The recovery sweep over `(j, m, variant)` and its CSV output.
//!
//! Seeds: the training sample, the held-out targets and every ensemble come
//! from separate streams of `config.seed`. Ensembles depend on `(j, m)` and,
//! under [`EnsemblePolicy::PerTrial`], on the trial index, never on the
//! variant, so all variants of a cell see identical measurements.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::gmra::{build_gmra, Gmra, GmraParams};
use crate::linalg::{dist, norm};
use crate::measure::Ensemble;
use crate::recovery::{recover, CenterSigns, RecoveryOptions, SearchMode, Variant};
use crate::rng::{derive_seed, rng_from_seed, tags};

use super::datasets::sample_sphere;
use super::mnist::load_mnist;

/// Largest accepted measurement count.
pub const MAX_M: usize = 1_000_000;

/// Default finest GMRA level built for an experiment.
pub const DEFAULT_EXPERIMENT_J_MAX: i32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSpec {
    SyntheticSphere {
        d: usize,
        #[serde(alias = "D")]
        ambient_dim: usize,
        n: usize,
    },
    Mnist {
        path: PathBuf,
        digit: u8,
        n: usize,
        /// GMRA intrinsic dimension.
        d: usize,
    },
}

impl DatasetSpec {
    pub fn label(&self) -> String {
        match self {
            DatasetSpec::SyntheticSphere { d, ambient_dim, n } => format!("sphere(d={d};D={ambient_dim};n={n})"),
            DatasetSpec::Mnist { digit, n, .. } => format!("mnist(digit={digit};n={n})"),
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            DatasetSpec::SyntheticSphere { d, .. } | DatasetSpec::Mnist { d, .. } => *d,
        }
    }

    fn sample_count(&self) -> usize {
        match self {
            DatasetSpec::SyntheticSphere { n, .. } | DatasetSpec::Mnist { n, .. } => *n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsemblePolicy {
    /// A fresh ensemble for every trial.
    #[default]
    PerTrial,
    /// One ensemble per `(j, m)` shared by all trials.
    PerCell,
}

fn default_true() -> bool {
    true
}

fn default_j_max() -> i32 {
    DEFAULT_EXPERIMENT_J_MAX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub j_list: Vec<i32>,
    pub m_list: Vec<usize>,
    pub trials: usize,
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub search: SearchMode,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Recover points that were not used to fit the GMRA.
    #[serde(default = "default_true")]
    pub holdout: bool,
    /// Record `mean_runtime_ms`; off keeps reruns byte-identical.
    #[serde(default)]
    pub timing: bool,
    #[serde(default = "default_j_max")]
    pub j_max: i32,
    #[serde(default)]
    pub ensemble: EnsemblePolicy,
    /// Prebuilt GMRA (`OMSG`) to use instead of fitting one.
    #[serde(default)]
    pub gmra: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        match &self.dataset {
            DatasetSpec::SyntheticSphere { d, ambient_dim, n } => {
                if *d == 0 || d >= ambient_dim {
                    bad.push(format!("dataset: need 1 <= d < D (d={d}, D={ambient_dim})"));
                }
                if *n == 0 {
                    bad.push("dataset.n: must be positive".into());
                }
            }
            DatasetSpec::Mnist { n, d, .. } => {
                if *n == 0 {
                    bad.push("dataset.n: must be positive".into());
                }
                if *d == 0 {
                    bad.push("dataset.d: must be positive".into());
                }
            }
        }
        if self.j_list.is_empty() {
            bad.push("j_list: empty".into());
        }
        if let Some(j) = self.j_list.iter().find(|&&j| j < 0 || j > self.j_max) {
            bad.push(format!("j_list: level {j} outside 0..={}", self.j_max));
        }
        if self.m_list.is_empty() {
            bad.push("m_list: empty".into());
        }
        if let Some(m) = self.m_list.iter().find(|&&m| m == 0 || m > MAX_M) {
            bad.push(format!("m_list: {m} outside 1..={MAX_M}"));
        }
        if self.trials == 0 {
            bad.push("trials: must be positive".into());
        }
        if self.variants.is_empty() {
            bad.push("variants: empty".into());
        }
        for v in &self.variants {
            if let Variant::OmsSimple { radius } = v {
                if !(*radius > 0.0) {
                    bad.push(format!("variants: oms_simple radius {radius} must be positive"));
                }
            }
        }
        if self.search == SearchMode::Beam(0) {
            bad.push("search: beam width must be positive".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub j: i32,
    pub m: usize,
    pub variant: String,
    pub trials: usize,
    /// Over feasible trials; NaN when none was feasible.
    pub mean_rel_err: f64,
    pub std_rel_err: f64,
    pub infeasible: usize,
    pub mean_runtime_ms: Option<f64>,
    pub seed: u64,
}

/// Training sample and recovery targets.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train: PointCloud,
    pub targets: PointCloud,
}

pub fn prepare_data(config: &ExperimentConfig) -> Result<ExperimentData> {
    let wanted = config.dataset.sample_count();
    let extra = if config.holdout { config.trials } else { 0 };
    let all = match &config.dataset {
        DatasetSpec::SyntheticSphere { d, ambient_dim, .. } => {
            let train = sample_sphere(*d, *ambient_dim, wanted, derive_seed(config.seed, tags::DATASET))?;
            if config.holdout {
                let targets = sample_sphere(*d, *ambient_dim, config.trials, derive_seed(config.seed, tags::HOLDOUT))?;
                return Ok(ExperimentData { train, targets });
            }
            train
        }
        DatasetSpec::Mnist { path, digit, .. } => load_mnist(path, *digit, wanted + extra, true)?,
    };
    if all.len() < extra + 1 {
        return Err(Error::Config(vec![format!(
            "dataset: {} points available, need more than {extra}",
            all.len()
        )]));
    }
    let n_train = all.len() - extra;
    let train = all.select(&(0..n_train).collect::<Vec<_>>());
    let targets = if config.holdout {
        all.select(&(n_train..all.len()).collect::<Vec<_>>())
    } else {
        let mut rng = rng_from_seed(derive_seed(config.seed, tags::HOLDOUT));
        let idx: Vec<usize> = (0..config.trials).map(|_| rand::Rng::random_range(&mut rng, 0..n_train)).collect();
        all.select(&idx)
    };
    Ok(ExperimentData { train, targets })
}

pub fn prepare_gmra(config: &ExperimentConfig, data: &ExperimentData) -> Result<Gmra> {
    let gmra = match &config.gmra {
        Some(path) => Gmra::read_from(BufReader::new(File::open(path)?))?,
        None => build_gmra(
            &data.train,
            GmraParams::new(config.dataset.intrinsic_dim()).with_range(0, config.j_max),
        )?,
    };
    let bad: Vec<String> = config
        .j_list
        .iter()
        .filter(|&&j| j < gmra.j_min() || j > gmra.j_max())
        .map(|j| format!("j_list: level {j} not in built GMRA range {}..={}", gmra.j_min(), gmra.j_max()))
        .collect();
    if bad.is_empty() {
        Ok(gmra)
    } else {
        Err(Error::Config(bad))
    }
}

/// Seed of the ensemble for `(j, m)` and, per trial, trial `t`.
pub fn ensemble_seed(config: &ExperimentConfig, j: i32, m: usize, trial: usize) -> u64 {
    let cell = derive_seed(derive_seed(derive_seed(config.seed, tags::ENSEMBLE), j as u64), m as u64);
    match config.ensemble {
        EnsemblePolicy::PerTrial => derive_seed(cell, derive_seed(tags::TRIALS, trial as u64)),
        EnsemblePolicy::PerCell => cell,
    }
}

/// One recovery outcome; `None` error means infeasible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub rel_err: Option<f64>,
    pub runtime_ms: f64,
}

/// Runs all variants on every target for one `(j, m)` cell. The result is
/// indexed `[variant][trial]`.
pub fn run_cell(
    config: &ExperimentConfig,
    gmra: &Gmra,
    targets: &PointCloud,
    j: i32,
    m: usize,
) -> Result<Vec<Vec<TrialOutcome>>> {
    let dim = gmra.ambient_dim();
    let shared = match config.ensemble {
        EnsemblePolicy::PerCell => {
            let ens = Ensemble::gaussian(m, dim, ensemble_seed(config, j, m, 0))?;
            let signs = CenterSigns::build(gmra, &ens, j, config.search)?;
            Some((ens, signs))
        }
        EnsemblePolicy::PerTrial => None,
    };
    let per_trial = (0..targets.len())
        .into_par_iter()
        .map(|t| {
            let owned;
            let (ens, signs) = match &shared {
                Some((e, s)) => (e, s),
                None => {
                    let e = Ensemble::gaussian(m, dim, ensemble_seed(config, j, m, t))?;
                    let s = CenterSigns::build(gmra, &e, j, config.search)?;
                    owned = (e, s);
                    (&owned.0, &owned.1)
                }
            };
            let x = targets.point(t);
            let y = ens.quantize(x)?;
            let x_norm = norm(x);
            config
                .variants
                .iter()
                .map(|&variant| {
                    let options = RecoveryOptions::new(variant, config.search);
                    let start = Instant::now();
                    let res = recover(gmra, j, ens, signs, &y, &options);
                    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
                    match res {
                        Ok(r) => Ok(TrialOutcome {
                            rel_err: Some(dist(x, &r.x_star) / x_norm),
                            runtime_ms,
                        }),
                        Err(Error::Infeasible { .. } | Error::InfeasibleCell { .. }) => Ok(TrialOutcome {
                            rel_err: None,
                            runtime_ms,
                        }),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<Vec<TrialOutcome>>>>()?;
    Ok((0..config.variants.len())
        .map(|v| per_trial.iter().map(|row| row[v]).collect())
        .collect())
}

pub fn summarize(
    config: &ExperimentConfig,
    j: i32,
    m: usize,
    variant: &Variant,
    outcomes: &[TrialOutcome],
) -> ResultRow {
    let errs: Vec<f64> = outcomes.iter().filter_map(|o| o.rel_err).collect();
    let n = errs.len() as f64;
    let mean = if errs.is_empty() { f64::NAN } else { errs.iter().sum::<f64>() / n };
    let std = if errs.len() < 2 {
        if errs.is_empty() { f64::NAN } else { 0.0 }
    } else {
        (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let runtime = config
        .timing
        .then(|| outcomes.iter().map(|o| o.runtime_ms).sum::<f64>() / outcomes.len().max(1) as f64);
    ResultRow {
        dataset: config.dataset.label(),
        j,
        m,
        variant: variant.label(),
        trials: outcomes.len(),
        mean_rel_err: mean,
        std_rel_err: std,
        infeasible: outcomes.len() - errs.len(),
        mean_runtime_ms: runtime,
        seed: config.seed,
    }
}

/// Runs the full sweep; writes the CSV when `config.output` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let data = prepare_data(config)?;
    let gmra = prepare_gmra(config, &data)?;
    let rows = run_with(config, &gmra, &data.targets)?;
    if let Some(path) = &config.output {
        write_csv(File::create(path)?, &rows)?;
    }
    Ok(rows)
}

/// The sweep on an existing GMRA and target set.
pub fn run_with(config: &ExperimentConfig, gmra: &Gmra, targets: &PointCloud) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &j in &config.j_list {
        for &m in &config.m_list {
            let cell = run_cell(config, gmra, targets, j, m)?;
            for (variant, outcomes) in config.variants.iter().zip(&cell) {
                rows.push(summarize(config, j, m, variant, outcomes));
            }
            log::info!("finished j={j} m={m}");
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn csv_bytes(rows: &[ResultRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("writing to a Vec cannot fail");
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
                "dataset": {"synthetic_sphere": {"d": 2, "D": 8, "n": 300}},
                "j_list": [2, 3],
                "m_list": [50, 100],
                "trials": 6,
                "variants": ["oms", {"oms_simple": {"radius": 1.5}}, "center_only"],
                "seed": 5,
                "j_max": 4
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn header_and_round_trip() {
        let rows = run_experiment(&small_config()).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 3);
        let bytes = csv_bytes(&rows);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "dataset,j,m,variant,trials,mean_rel_err,std_rel_err,infeasible,mean_runtime_ms,seed"
        );
        assert_eq!(read_csv(&bytes[..]).unwrap(), rows);
        assert_eq!(csv_bytes(&run_experiment(&small_config()).unwrap()), bytes);
    }

    #[test]
    fn config_errors_list_fields() {
        let err = ExperimentConfig::from_json(
            r#"{
                "dataset": {"synthetic_sphere": {"d": 3, "D": 3, "n": 0}},
                "j_list": [], "m_list": [0], "trials": 0, "variants": [], "seed": 1
            }"#,
        )
        .unwrap_err();
        let Error::Config(fields) = err else { panic!("{err:?}") };
        for key in ["dataset", "dataset.n", "j_list", "m_list", "trials", "variants"] {
            assert!(fields.iter().any(|f| f.starts_with(&format!("{key}:"))), "{key} missing from {fields:?}");
        }
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn exact_center_target_has_zero_error() {
        let mut config = small_config();
        config.trials = 1;
        config.variants = vec![Variant::Oms];
        config.j_list = vec![3];
        config.m_list = vec![64];
        let data = prepare_data(&config).unwrap();
        let gmra = prepare_gmra(&config, &data).unwrap();
        let center = gmra.level(3).unwrap().center(2).to_vec();
        let targets = PointCloud::new(center.len(), center).unwrap();
        let rows = run_with(&config, &gmra, &targets).unwrap();
        assert_eq!(rows[0].mean_rel_err, 0.0);
    }

    #[test]
    fn timing_is_opt_in() {
        let mut config = small_config();
        config.j_list = vec![2];
        config.m_list = vec![50];
        assert!(run_experiment(&config).unwrap().iter().all(|r| r.mean_runtime_ms.is_none()));
        config.timing = true;
        assert!(run_experiment(&config).unwrap().iter().all(|r| r.mean_runtime_ms.is_some()));
    }

    #[test]
    fn levels_outside_build_are_rejected() {
        let mut config = small_config();
        config.dataset = DatasetSpec::SyntheticSphere { d: 1, ambient_dim: 4, n: 3 };
        config.j_list = vec![4];
        let data = prepare_data(&config).unwrap();
        assert!(matches!(prepare_gmra(&config, &data), Err(Error::Config(_))));
    }
}
