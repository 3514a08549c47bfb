//! Monte Carlo engine for the equicorrelated one-sided normal-means model
//! `Y_i = μ_i + √(1-ρ) X_i + √ρ X₀`.
//!
//! Replication `r` reads only from random stream `(seed, r)` and results are
//! reduced sequentially in replication order, so a summary is bit-identical
//! for any number of worker threads.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::bound::{fdr_bound, BoundInput};
use crate::error::{Error, Result};
use crate::normal::norm_sf;
use crate::procedures::{bh_count, gbh1_scores, gbh1_weights, storey_weight, GroupedPValues, RejectionResult};
use crate::rng::{standard_normal, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Procedure {
    Gbh1,
    Storey,
    Bh,
}

impl FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gbh1" | "gbh" => Ok(Procedure::Gbh1),
            "storey" => Ok(Procedure::Storey),
            "bh" => Ok(Procedure::Bh),
            other => Err(Error::Config(format!(
                "unknown procedure `{other}` (expected gbh1, storey or bh)"
            ))),
        }
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Procedure::Gbh1 => "gbh1",
            Procedure::Storey => "storey",
            Procedure::Bh => "bh",
        })
    }
}

/// Alternative mean: one value for every alternative, or one per group.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum EffectSize {
    Common(f64),
    PerGroup(Vec<f64>),
}

impl EffectSize {
    fn for_group(&self, j: usize) -> f64 {
        match self {
            EffectSize::Common(mu) => *mu,
            EffectSize::PerGroup(v) => v[j],
        }
    }
}

/// A Monte Carlo campaign. Within group `j` the first `nonnull_counts[j]`
/// hypotheses are alternatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub m: usize,
    pub group_sizes: Vec<usize>,
    pub nonnull_counts: Vec<usize>,
    pub effect_mu: EffectSize,
    pub rho: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub procedure: Procedure,
    pub replications: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    /// Desk-scale campaign: m = 200 in four equal all-null groups,
    /// 2·10⁴ replications.
    fn default() -> Self {
        Self {
            m: 200,
            group_sizes: vec![50; 4],
            nonnull_counts: vec![0; 4],
            effect_mu: EffectSize::Common(2.0),
            rho: 0.1,
            lambda: 0.5,
            alpha: 0.05,
            procedure: Procedure::Gbh1,
            replications: 20_000,
            seed: 20_180_101,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if self.group_sizes.is_empty() || self.group_sizes.contains(&0) {
            return bad("group_sizes must be non-empty with every size >= 1".into());
        }
        if self.group_sizes.iter().sum::<usize>() != self.m {
            return bad(format!(
                "group_sizes sum to {} but m = {}",
                self.group_sizes.iter().sum::<usize>(),
                self.m
            ));
        }
        if self.nonnull_counts.len() != self.group_sizes.len() {
            return bad("nonnull_counts must have one entry per group".into());
        }
        if let Some(j) = (0..self.group_sizes.len()).find(|&j| self.nonnull_counts[j] > self.group_sizes[j]) {
            return bad(format!("nonnull_counts[{j}] exceeds group size"));
        }
        match &self.effect_mu {
            EffectSize::Common(mu) if !(*mu > 0.0 && mu.is_finite()) => return bad("effect_mu must be positive".into()),
            EffectSize::PerGroup(v) if v.len() != self.group_sizes.len() => {
                return bad("effect_mu must be a single value or one value per group".into())
            }
            EffectSize::PerGroup(v) if v.iter().any(|mu| !(*mu > 0.0 && mu.is_finite())) => {
                return bad("effect_mu entries must be positive".into())
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho = {} must lie in [0, 1)", self.rho));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad(format!("lambda = {} must lie in (0, 1)", self.lambda));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        Ok(())
    }

    /// Sets one field from its textual value. Keys are the field names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let num = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}` as a number")))
        };
        let count = |v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}` as a count")))
        };
        let list = |v: &str| -> Result<Vec<usize>> { v.split(',').map(|s| count(s.trim())).collect() };
        match key.trim() {
            "m" => self.m = count(value)?,
            "group_sizes" => self.group_sizes = list(value)?,
            "nonnull_counts" => self.nonnull_counts = list(value)?,
            "effect_mu" => {
                let parts = value.split(',').map(|s| num(s.trim())).collect::<Result<Vec<_>>>()?;
                self.effect_mu = if parts.len() == 1 {
                    EffectSize::Common(parts[0])
                } else {
                    EffectSize::PerGroup(parts)
                };
            }
            "rho" => self.rho = num(value)?,
            "lambda" => self.lambda = num(value)?,
            "alpha" => self.alpha = num(value)?,
            "procedure" => self.procedure = value.parse()?,
            "replications" => self.replications = count(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("`seed`: cannot parse `{value}` as a 64-bit integer")))?
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` document on top of `self`. Blank lines
    /// and lines starting with `#` are ignored. When only `m` is given
    /// the group layout is rescaled to one group of size m with no
    /// alternatives unless the layout keys are also present.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        let mut saw_layout = false;
        let mut saw_m = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let k = k.trim();
            saw_layout |= k == "group_sizes" || k == "nonnull_counts";
            saw_m |= k == "m";
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        if saw_m && !saw_layout && self.group_sizes.iter().sum::<usize>() != self.m {
            self.group_sizes = vec![self.m];
            self.nonnull_counts = vec![0];
        }
        Ok(())
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes to the same flat `key = value` format.
    pub fn to_kv(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mu = match &self.effect_mu {
            EffectSize::Common(mu) => mu.to_string(),
            EffectSize::PerGroup(v) => v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
        };
        format!(
            "m = {}\ngroup_sizes = {}\nnonnull_counts = {}\neffect_mu = {}\nrho = {}\nlambda = {}\nalpha = {}\nprocedure = {}\nreplications = {}\nseed = {}\n",
            self.m,
            join(&self.group_sizes),
            join(&self.nonnull_counts),
            mu,
            self.rho,
            self.lambda,
            self.alpha,
            self.procedure,
            self.replications,
            self.seed
        )
    }

    /// Mean vector and null mask in index order.
    fn layout(&self) -> (Vec<f64>, Vec<bool>) {
        let mut means = Vec::with_capacity(self.m);
        let mut null = Vec::with_capacity(self.m);
        for (j, (&n, &alt)) in self.group_sizes.iter().zip(&self.nonnull_counts).enumerate() {
            let mu = self.effect_mu.for_group(j);
            for i in 0..n {
                let is_alt = i < alt;
                means.push(if is_alt { mu } else { 0.0 });
                null.push(!is_alt);
            }
        }
        (means, null)
    }

    pub fn num_alternatives(&self) -> usize {
        self.nonnull_counts.iter().sum()
    }
}

/// One draw of the test statistics with its truth mask (`true` = null).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub y: Vec<f64>,
    pub is_null: Vec<bool>,
}

/// Draws `X₀, X₁, …, X_m` from replication stream `rep_index` and forms `Y`.
pub fn generate_sample(config: &SimConfig, rep_index: u64) -> Sample {
    let mut rng = stream(config.seed, rep_index);
    let x0 = standard_normal(&mut rng);
    draw(config, &mut rng, x0)
}

/// As [`generate_sample`] but with `X₀` pinned at `x0`; only `X₁ … X_m` are drawn.
pub fn generate_sample_conditional(config: &SimConfig, rep_index: u64, x0: f64) -> Sample {
    let mut rng = stream(config.seed, rep_index);
    draw(config, &mut rng, x0)
}

fn draw<R: rand_chacha::rand_core::RngCore>(config: &SimConfig, rng: &mut R, x0: f64) -> Sample {
    let (means, is_null) = config.layout();
    let own = (1.0 - config.rho).sqrt();
    let shared = config.rho.sqrt() * x0;
    let y = means
        .iter()
        .map(|mu| mu + own * standard_normal(rng) + shared)
        .collect();
    Sample { y, is_null }
}

/// One-sided p-values `1 - Φ(Y_i)`.
pub fn pvalues_from_sample(y: &[f64]) -> Vec<f64> {
    y.iter().map(|&v| norm_sf(v)).collect()
}

/// `V / R`, with `0/0 := 0`.
pub fn false_discovery_proportion(result: &RejectionResult, is_null: &[bool]) -> f64 {
    if result.rejected.is_empty() {
        return 0.0;
    }
    let v = result.rejected.iter().filter(|&&i| is_null[i]).count();
    v as f64 / result.rejected.len() as f64
}

/// Weighted scores the given procedure runs its step-up on.
pub fn procedure_scores(config: &SimConfig, pvalues: Vec<f64>) -> Vec<f64> {
    match config.procedure {
        Procedure::Bh => pvalues,
        Procedure::Storey => {
            let w = storey_weight(&pvalues, config.lambda);
            pvalues.into_iter().map(|p| p * w).collect()
        }
        Procedure::Gbh1 => {
            let gp = GroupedPValues::contiguous(pvalues, &config.group_sizes).expect("validated layout");
            let w = gbh1_weights(&gp, config.lambda).expect("validated lambda");
            gbh1_scores(&gp, &w)
        }
    }
}

/// (false discovery proportion, true positive proportion) for one sample.
fn replication_outcome(config: &SimConfig, sample: &Sample, n_alt: usize) -> (f64, f64) {
    let scores = procedure_scores(config, pvalues_from_sample(&sample.y));
    let mut sorted = scores.clone();
    let k = bh_count(&mut sorted, config.alpha);
    if k == 0 {
        return (0.0, 0.0);
    }
    let threshold = k as f64 * config.alpha / config.m as f64;
    let (mut v, mut s) = (0usize, 0usize);
    for (score, &null) in scores.iter().zip(&sample.is_null) {
        if *score <= threshold {
            if null {
                v += 1;
            } else {
                s += 1;
            }
        }
    }
    (v as f64 / k as f64, s as f64 / n_alt.max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub fdr_hat: f64,
    pub fdr_se: f64,
    /// `None` when the configuration has no alternatives.
    pub power_hat: Option<f64>,
    pub power_se: Option<f64>,
    /// The analytic bound at `(λ, ρ, α)` when that point is in its domain.
    pub bound_value: Option<f64>,
    pub replications_run: usize,
    /// Pinned value of `X₀` for conditional runs.
    pub x0: Option<f64>,
    pub config_echo: SimConfig,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn summarize(config: &SimConfig, outcomes: Vec<(f64, f64)>, x0: Option<f64>) -> SimSummary {
    let (fdp, tpp): (Vec<f64>, Vec<f64>) = outcomes.into_iter().unzip();
    let (fdr_hat, fdr_se) = mean_and_se(&fdp);
    let (power_hat, power_se) = if config.num_alternatives() == 0 {
        (None, None)
    } else {
        let (p, se) = mean_and_se(&tpp);
        (Some(p), Some(se))
    };
    let input = BoundInput::new(config.lambda, config.rho, config.alpha);
    let bound_value = if config.procedure == Procedure::Gbh1 && input.in_theorem_domain() {
        fdr_bound(&input).ok().map(|b| b.total)
    } else {
        None
    };
    SimSummary {
        fdr_hat,
        fdr_se,
        power_hat,
        power_se,
        bound_value,
        replications_run: fdp.len(),
        x0,
        config_echo: config.clone(),
    }
}

/// Estimates FDR and average power over `config.replications` draws.
/// Runs on the current rayon pool.
pub fn run_mc(config: &SimConfig) -> Result<SimSummary> {
    config.validate()?;
    let n_alt = config.num_alternatives();
    let outcomes: Vec<(f64, f64)> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| replication_outcome(config, &generate_sample(config, r), n_alt))
        .collect();
    Ok(summarize(config, outcomes, None))
}

/// [`run_mc`] with `X₀` fixed at `x0`; p-values are then independent.
pub fn run_mc_conditional(config: &SimConfig, x0: f64) -> Result<SimSummary> {
    config.validate()?;
    if !x0.is_finite() {
        return Err(Error::Config(format!("x0 = {x0} must be finite")));
    }
    let n_alt = config.num_alternatives();
    let outcomes: Vec<(f64, f64)> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| replication_outcome(config, &generate_sample_conditional(config, r, x0), n_alt))
        .collect();
    Ok(summarize(config, outcomes, Some(x0)))
}
