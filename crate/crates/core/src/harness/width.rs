//! Width diagnostics on an experiment dataset: `w(M)`, `w(M_j)` and
//! `w(M ∪ M_j)` per level, where `M` is the training sample and `M_j` its
//! GMRA image.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmra::{build_gmra, GmraParams};
use crate::widthlab::{check_union_width, estimate_width, gmra_image, riemann_width_bound, FiniteSet, ManifoldMeta, Union};

use super::datasets::sample_sphere;
use super::experiment::DatasetSpec;
use super::mnist::load_mnist;
use crate::rng::{derive_seed, tags};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidthConfig {
    pub dataset: DatasetSpec,
    pub j_list: Vec<i32>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Declared geometry for the closed-form bound, if known.
    #[serde(default)]
    pub manifold: Option<ManifoldMeta>,
}

impl WidthConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        let config: Self = serde_json::from_str(&text)?;
        let mut bad = Vec::new();
        if config.trials < 2 {
            bad.push("trials: need at least 2".to_string());
        }
        if config.j_list.is_empty() || config.j_list.iter().any(|&j| j < 0) {
            bad.push("j_list: need nonnegative levels".to_string());
        }
        if bad.is_empty() {
            Ok(config)
        } else {
            Err(Error::Config(bad))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthRow {
    pub dataset: String,
    pub j: i32,
    pub w_m: f64,
    pub w_m_se: f64,
    pub w_mj: f64,
    pub w_mj_se: f64,
    pub w_union: f64,
    pub w_union_se: f64,
    pub lower_exact: bool,
    pub lower: bool,
    pub upper: bool,
    pub riemann_bound: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

pub fn run_width(config: &WidthConfig) -> Result<Vec<WidthRow>> {
    let (points, d) = match &config.dataset {
        DatasetSpec::SyntheticSphere { d, ambient_dim, n } => {
            (sample_sphere(*d, *ambient_dim, *n, derive_seed(config.seed, tags::DATASET))?, *d)
        }
        DatasetSpec::Mnist { path, digit, n, d } => (load_mnist(path, *digit, *n, true)?, *d),
    };
    let j_max = config.j_list.iter().copied().max().unwrap_or(0);
    let gmra = build_gmra(&points, GmraParams::new(d).with_range(0, j_max))?;
    let bound = config.manifold.map(|m| riemann_width_bound(&m, 1.0, 1.0)).transpose()?;
    let m_set = FiniteSet(points.clone());
    let w_m = estimate_width(&m_set, config.trials, 1, config.seed)?;
    let mut rows = Vec::new();
    for &j in &config.j_list {
        let mj_set = FiniteSet(gmra_image(gmra.level(j)?, &points)?);
        let w_mj = estimate_width(&mj_set, config.trials, 1, config.seed)?;
        let w_u = estimate_width(&Union(&m_set, &mj_set), config.trials, 1, config.seed)?;
        let report = check_union_width(&w_m, &w_mj, &w_u);
        rows.push(WidthRow {
            dataset: config.dataset.label(),
            j,
            w_m: w_m.mean,
            w_m_se: w_m.std_err,
            w_mj: w_mj.mean,
            w_mj_se: w_mj.std_err,
            w_union: w_u.mean,
            w_union_se: w_u.std_err,
            lower_exact: report.lower_exact,
            lower: report.lower,
            upper: report.upper,
            riemann_bound: bound,
            trials: config.trials,
            seed: config.seed,
        });
    }
    Ok(rows)
}

pub fn write_width_csv<W: Write>(w: W, rows: &[WidthRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}
