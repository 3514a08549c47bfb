//! Numerical audit of the intermediate claims behind the FDR bound.
//!
//! Each check produces a [`VerifyReport`]. Rows carry an observed value and
//! the claimed value it is compared against; `max_violation` is the largest
//! signed excess of observed over claimed (positive means the claim fails on
//! that row). Those comparisons are reported only. The `asserted` list holds
//! the checks that are expected to hold exactly and decide pass/fail.

use rayon::prelude::*;
use serde::Serialize;

use crate::bound::{check_integral_domain, exact_p_conditional, integrals_closed_param, m_factor, AParam};
use crate::error::{Error, Result};
use crate::normal::{log_norm_sf, norm_cdf, norm_sf, INV_SQRT_2PI};
use crate::procedures::{bh_count, gbh1_scores, gbh1_weights, GroupedPValues};
use crate::quadrature::{integrate_from_neg_infinity, integrate_to_infinity, Tolerance};
use crate::rng::{standard_normal, stream};
use crate::simulator::{generate_sample_conditional, pvalues_from_sample, EffectSize, Procedure, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Integrals,
    MBound,
    MvtIdentity,
    LemmaExpectRejections,
    LemmaExpectLoo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertedCheck {
    pub name: String,
    pub passed: bool,
    /// Worst observed discrepancy for this check.
    pub worst: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub section: Section,
    pub grid_labels: Vec<String>,
    pub grid: Vec<Vec<f64>>,
    pub observed: Vec<f64>,
    pub claimed: Vec<f64>,
    /// Signed `observed - claimed` per row; positive means the claim is exceeded.
    pub violation: Vec<f64>,
    /// Monte Carlo standard errors of `observed - claimed`; empty for
    /// deterministic sections.
    pub std_errors: Vec<f64>,
    pub max_violation: f64,
    pub asserted: Vec<AssertedCheck>,
    pub notes: String,
}

impl VerifyReport {
    fn new(section: Section, labels: &[&str], notes: impl Into<String>) -> Self {
        Self {
            section,
            grid_labels: labels.iter().map(|s| s.to_string()).collect(),
            grid: Vec::new(),
            observed: Vec::new(),
            claimed: Vec::new(),
            violation: Vec::new(),
            std_errors: Vec::new(),
            max_violation: f64::NEG_INFINITY,
            asserted: Vec::new(),
            notes: notes.into(),
        }
    }

    fn push(&mut self, point: Vec<f64>, observed: f64, claimed: f64) {
        self.max_violation = self.max_violation.max(observed - claimed);
        self.grid.push(point);
        self.observed.push(observed);
        self.claimed.push(claimed);
        self.violation.push(observed - claimed);
    }

    fn assert_le(&mut self, name: &str, worst: f64, tolerance: f64) {
        self.asserted.push(AssertedCheck {
            name: name.to_string(),
            passed: worst <= tolerance,
            worst,
            tolerance,
        });
    }

    /// Appends the rows and asserted checks of `other` (same section).
    pub fn merge(&mut self, other: VerifyReport) {
        debug_assert_eq!(self.section, other.section);
        self.max_violation = self.max_violation.max(other.max_violation);
        self.grid.extend(other.grid);
        self.observed.extend(other.observed);
        self.claimed.extend(other.claimed);
        self.violation.extend(other.violation);
        self.std_errors.extend(other.std_errors);
        self.asserted.extend(other.asserted);
    }

    /// True when every asserted check passed.
    pub fn passed(&self) -> bool {
        self.asserted.iter().all(|c| c.passed)
    }

    /// Number of rows whose observed value exceeds the claim.
    pub fn violations(&self) -> usize {
        self.violation.iter().filter(|&&v| v > 0.0).count()
    }
}

// ---------------------------------------------------------------------------
// Tail ratio and its supremum

/// `f(x) = (1 - Φ(ax + b)) / (1 - Φ(x))`, evaluated through log tails.
pub fn f_ratio(a: f64, b: f64, x: f64) -> f64 {
    log_f_ratio(a, b, x).exp()
}

fn log_f_ratio(a: f64, b: f64, x: f64) -> f64 {
    log_norm_sf(a * x + b) - log_norm_sf(x)
}

/// Point where `f` crosses 1, `-b / (a - 1)`.
fn crossing(p: &AParam) -> f64 {
    -p.b / p.a_minus_1
}

/// Maximizes `f` over `(-inf, -b/(a-1)]` by a coarse grid followed by
/// golden-section refinement. Returns `(sup, argmax)`.
pub fn sup_f(rho: f64, x0: f64) -> (f64, f64) {
    let p = AParam::from_rho(rho, x0);
    let hi = crossing(&p);
    let lo = (-20.0f64).min(hi - 20.0);
    let f = |x: f64| f_ratio(p.a, p.b, x);

    const N: usize = 4000;
    let step = (hi - lo) / N as f64;
    let (best_i, _) = (0..=N)
        .map(|i| (i, f(lo + i as f64 * step)))
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
        );

    let mut left = lo + best_i.saturating_sub(1) as f64 * step;
    let mut right = (lo + (best_i + 1) as f64 * step).min(hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = right - inv_phi * (right - left);
    let mut d = left + inv_phi * (right - left);
    let (mut fc, mut fd) = (f(c), f(d));
    while right - left > 1e-10 * (1.0 + left.abs()) {
        if fc > fd {
            right = d;
            d = c;
            fd = fc;
            c = right - inv_phi * (right - left);
            fc = f(c);
        } else {
            left = c;
            c = d;
            fc = fd;
            d = left + inv_phi * (right - left);
            fd = f(d);
        }
    }
    let x = 0.5 * (left + right);
    let candidates = [(f(x), x), (f(lo + best_i as f64 * step), lo + best_i as f64 * step)];
    let (v, x) = candidates
        .into_iter()
        .fold((f64::NEG_INFINITY, x), |acc, c| if c.0 > acc.0 { c } else { acc });
    (v, x)
}

// ---------------------------------------------------------------------------
// Mean-value identity

/// `Φ(ax+b) - [Φ(x) + ((a-1)x + b) φ((2ax+b)/(a+1))]`: residual of the
/// claimed exact identity with the intermediate point fixed at `θ = 1/(a+1)`.
pub fn mvt_residual(a: f64, b: f64, x: f64) -> f64 {
    let mid = (2.0 * a * x + b) / (a + 1.0);
    let rhs = norm_cdf(x) + INV_SQRT_2PI * ((a - 1.0) * x + b) * (-0.5 * mid * mid).exp();
    norm_cdf(a * x + b) - rhs
}

// ---------------------------------------------------------------------------
// Quadrature oracle for I₁ … I₇

const INTEGRAL_NAMES: [&str; 7] = ["I1", "I2", "I3", "I4", "I5", "I6", "I7"];

/// Numerically integrates the seven integrands of the bound derivation.
pub fn quad_integrals(a: f64) -> Result<[f64; 7]> {
    check_integral_domain(a)?;
    let am1 = a - 1.0;
    let a2m1 = a * a - 1.0;
    let decay = (2.0 - a * a) / a2m1;
    let growth = 1.0 / (8.0 * a * a - 2.0 * (a + 1.0) * (a + 1.0));
    // Exponents of the two integrand families.
    let plain = move |b: f64| -0.5 * b * b * decay;
    let tilted = move |b: f64| b * b * growth - 0.5 * b * b * decay;
    let scale_of = |expo: &dyn Fn(f64) -> f64| 1.0 / (-2.0 * expo(1.0)).max(1e-12).sqrt();
    let (s_plain, s_tilted) = (scale_of(&plain), scale_of(&tilted));

    let tol = Tolerance {
        abs: 0.0,
        rel: 1e-10,
        max_intervals: 4000,
    };
    let integrands: [(Box<dyn Fn(f64) -> f64>, f64); 6] = [
        (Box::new(move |b| plain(b).exp()), s_plain),
        (Box::new(move |b| am1 * tilted(b).exp()), s_tilted),
        (Box::new(move |b| b * b / (4.0 * am1) * tilted(b).exp()), s_tilted),
        (Box::new(move |b| -b * plain(b).exp()), s_plain),
        (Box::new(move |b| -b * am1 * tilted(b).exp()), s_tilted),
        (Box::new(move |b| -b * b * b / (4.0 * am1) * tilted(b).exp()), s_tilted),
    ];
    let mut out = [0.0; 7];
    for (i, (f, scale)) in integrands.iter().enumerate() {
        let est = integrate_from_neg_infinity(f, 0.0, *scale, tol);
        if !est.converged {
            return Err(Error::Quadrature {
                integral: INTEGRAL_NAMES[i].into(),
                error: est.error,
            });
        }
        out[i] = est.value;
    }
    let est = integrate_to_infinity(|b| INV_SQRT_2PI * (-b * b / (2.0 * a2m1)).exp(), 0.0, a2m1.sqrt(), tol);
    if !est.converged {
        return Err(Error::Quadrature {
            integral: INTEGRAL_NAMES[6].into(),
            error: est.error,
        });
    }
    out[6] = est.value;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Section runners

/// Default `a` values for the integral audit.
pub const INTEGRAL_A_GRID: [f64; 6] = [1.02, 1.05, 1.1, 1.15, 1.2, 1.23];
pub const INTEGRAL_REL_TOL: f64 = 1e-6;

/// Compares quadrature against the closed forms. Observed is the quadrature
/// value, claimed the closed form; the asserted check is on relative error.
pub fn run_integrals(a_grid: &[f64]) -> Result<VerifyReport> {
    let mut report = VerifyReport::new(
        Section::Integrals,
        &["a", "integral"],
        "observed = adaptive Gauss-Kronrod quadrature, claimed = closed form; asserted on relative error",
    );
    let mut worst: f64 = 0.0;
    for &a in a_grid {
        let quad = quad_integrals(a)?;
        check_integral_domain(a)?;
        let closed = integrals_closed_param(&AParam::from_a(a, 0.0));
        for i in 0..7 {
            worst = worst.max(((quad[i] - closed[i]) / closed[i]).abs());
            report.push(vec![a, (i + 1) as f64], quad[i], closed[i]);
        }
    }
    report.assert_le("quadrature matches closed forms (relative)", worst, INTEGRAL_REL_TOL);
    Ok(report)
}

pub const RHO_GRID: [f64; 6] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3];
pub const X0_GRID: [f64; 9] = [-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0];

/// Scans `sup f` against `M(ρ, x₀)`. Asserted: `f` equals 1 at the crossing,
/// is below 1 past it, and for `x₀ <= 0` the supremum stays under `min(2, a)`.
pub fn run_m_bound(rhos: &[f64], x0s: &[f64]) -> Result<VerifyReport> {
    let mut report = VerifyReport::new(
        Section::MBound,
        &["rho", "x0", "argmax_x"],
        "observed = numerical sup of f over (-inf, -b/(a-1)], claimed = M(rho, x0); \
         positive violation means the claimed bound is exceeded",
    );
    let points: Vec<(f64, f64)> = rhos.iter().flat_map(|&r| x0s.iter().map(move |&x| (r, x))).collect();
    let rows: Vec<Result<(f64, f64, f64, f64, f64, f64)>> = points
        .par_iter()
        .map(|&(rho, x0)| {
            let (sup, arg) = sup_f(rho, x0);
            let m = m_factor(rho, x0)?;
            let p = AParam::from_rho(rho, x0);
            let cross = crossing(&p);
            let at_cross = (f_ratio(p.a, p.b, cross) - 1.0).abs();
            // Checked on the log scale: far left of zero f - 1 is below f64 resolution.
            let past = (1..=20)
                .map(|k| log_f_ratio(p.a, p.b, cross + 0.25 * k as f64))
                .fold(f64::NEG_INFINITY, f64::max);
            let cross_err = if past < 0.0 { at_cross } else { f64::INFINITY };
            Ok((rho, x0, sup, arg, m, cross_err))
        })
        .collect();
    let mut worst_cross: f64 = 0.0;
    let mut worst_case1 = f64::NEG_INFINITY;
    for row in rows {
        let (rho, x0, sup, arg, m, cross_err) = row?;
        worst_cross = worst_cross.max(cross_err);
        if x0 <= 0.0 {
            let a = AParam::from_rho(rho, x0).a;
            worst_case1 = worst_case1.max(sup - a.min(2.0));
        }
        report.push(vec![rho, x0, arg], sup, m);
    }
    report.assert_le("f(-b/(a-1)) = 1 and f < 1 beyond it", worst_cross, 1e-9);
    if worst_case1.is_finite() {
        report.assert_le("sup f <= min(2, a) when x0 <= 0", worst_case1, 1e-6);
    }
    Ok(report)
}

/// Maximum `|residual|` of the mean-value identity over `x ∈ [-5, 5]` for
/// each `(ρ, x₀)`. Asserted: the residual vanishes at `b = 0, x = 0`.
pub fn run_mvt(rhos: &[f64], x0s: &[f64]) -> VerifyReport {
    let mut report = VerifyReport::new(
        Section::MvtIdentity,
        &["rho", "x0", "x_at_max"],
        "observed = max over x in [-5, 5] (step 0.05) of |Phi(ax+b) - RHS|, claimed = 0 (exact identity)",
    );
    let mut worst_origin: f64 = 0.0;
    for &rho in rhos {
        let a = AParam::from_rho(rho, 0.0).a;
        worst_origin = worst_origin.max(mvt_residual(a, 0.0, 0.0).abs());
        for &x0 in x0s {
            let p = AParam::from_rho(rho, x0);
            let (res, at) = (0..=200)
                .map(|i| {
                    let x = -5.0 + 0.05 * i as f64;
                    (mvt_residual(p.a, p.b, x).abs(), x)
                })
                .fold((0.0, 0.0), |acc, c| if c.0 > acc.0 { c } else { acc });
            report.push(vec![rho, x0, at], res, 0.0);
        }
    }
    report.assert_le("residual vanishes at b = 0, x = 0", worst_origin, 1e-12);
    report
}

// ---------------------------------------------------------------------------
// Monte Carlo checks of the expectation lemmas

fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gbh1_rejections(config: &SimConfig, pvalues: Vec<f64>) -> usize {
    let gp = GroupedPValues::contiguous(pvalues, &config.group_sizes).expect("validated layout");
    let w = gbh1_weights(&gp, config.lambda).expect("validated lambda");
    let mut scores = gbh1_scores(&gp, &w);
    bh_count(&mut scores, config.alpha)
}

/// Start index of group `j` and the index of its first null, if any.
fn first_null_in(config: &SimConfig, j: usize) -> Option<usize> {
    let start: usize = config.group_sizes[..j].iter().sum();
    (config.nonnull_counts[j] < config.group_sizes[j]).then_some(start + config.nonnull_counts[j])
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

pub const OUTER_DRAWS: usize = 10;

/// Estimates `E[1{p_k <= c R} / R | X₀ = x₀, p_{-k}]` for the first null
/// `k` of the first group that has one, where `R` is the GBH₁ rejection count
/// at the configuration's α. `config.replications` draws of `p_k` are split
/// evenly over [`OUTER_DRAWS`] fixed draws of `p_{-k}`; each outer draw is one
/// row, compared against `c M(ρ, x₀)`.
pub fn check_rejection_expectation(config: &SimConfig, x0: f64, c: f64) -> Result<VerifyReport> {
    config.validate()?;
    if !(c > 0.0) {
        return Err(Error::Config(format!("c = {c} must be positive")));
    }
    let k = (0..config.group_sizes.len())
        .find_map(|j| first_null_in(config, j))
        .ok_or_else(|| Error::Config("configuration has no null hypothesis".into()))?;
    let claimed = c * m_factor(config.rho, x0)?;
    let inner = (config.replications / OUTER_DRAWS).max(2);
    let own = (1.0 - config.rho).sqrt();
    let shared = config.rho.sqrt() * x0;

    let rows: Vec<(f64, f64)> = (0..OUTER_DRAWS as u64)
        .into_par_iter()
        .map(|o| {
            let outer_cfg = SimConfig {
                seed: derive_seed(config.seed, 0x5245_4A00 + o),
                ..config.clone()
            };
            let base = pvalues_from_sample(&generate_sample_conditional(&outer_cfg, 0, x0).y);
            let mut rng = stream(derive_seed(config.seed, 0x494E_4E00 + o), 0);
            let values: Vec<f64> = (0..inner)
                .map(|_| {
                    let pk = norm_sf(own * standard_normal(&mut rng) + shared);
                    let mut p = base.clone();
                    p[k] = pk;
                    let r = gbh1_rejections(config, p);
                    if r > 0 && pk <= c * r as f64 {
                        1.0 / r as f64
                    } else {
                        0.0
                    }
                })
                .collect();
            mean_se(&values)
        })
        .collect();

    let mut report = VerifyReport::new(
        Section::LemmaExpectRejections,
        &["rho", "x0", "c", "outer_draw"],
        format!(
            "observed = MC estimate of E[1{{p_k <= cR}}/R | x0, p_-k] for null index {k} ({inner} inner draws per row), claimed = c*M(rho, x0)"
        ),
    );
    for (o, (est, se)) in rows.into_iter().enumerate() {
        report.push(vec![config.rho, x0, c, o as f64], est, claimed);
        report.std_errors.push(se);
    }
    Ok(report)
}

/// Choice of the nonnegative function in the leave-one-out lemma.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HChoice {
    /// `h = (R_j + 1) / (R + g)`, the function used in the bound derivation.
    BoundH,
    ConstantOne,
}

impl HChoice {
    fn eval(self, group_count: usize, total_count: usize, g: usize) -> f64 {
        match self {
            HChoice::BoundH => (group_count as f64 + 1.0) / (total_count + g) as f64,
            HChoice::ConstantOne => 1.0,
        }
    }

    fn code(self) -> f64 {
        match self {
            HChoice::BoundH => 0.0,
            HChoice::ConstantOne => 1.0,
        }
    }
}

/// Compares `Σ_{k ∈ G_j0} E[h(R_j^(-k)) / (n_j - R_j^(-k))]` with
/// `E[h(R_j)] / P(λ, x₀)` for group `group` under conditional sampling,
/// using the exact conditional `P`. One row; the standard error is that of
/// the per-draw difference.
pub fn check_loo_expectation(config: &SimConfig, x0: f64, group: usize, h: HChoice) -> Result<VerifyReport> {
    config.validate()?;
    if group >= config.group_sizes.len() {
        return Err(Error::Config(format!("group {group} does not exist")));
    }
    let p_cond = exact_p_conditional(config.lambda, config.rho, x0)?;
    let start: usize = config.group_sizes[..group].iter().sum();
    let n_j = config.group_sizes[group];
    let nulls: Vec<usize> = (start + config.nonnull_counts[group]..start + n_j).collect();
    let g = config.group_sizes.len();
    let lambda = config.lambda;
    let cfg = SimConfig {
        seed: derive_seed(config.seed, 0x4C4F_4F00 + group as u64),
        ..config.clone()
    };

    let diffs: Vec<(f64, f64)> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| {
            let p = pvalues_from_sample(&generate_sample_conditional(&cfg, r, x0).y);
            let total = p.iter().filter(|&&v| v <= lambda).count();
            let in_group = p[start..start + n_j].iter().filter(|&&v| v <= lambda).count();
            let lhs: f64 = nulls
                .iter()
                .map(|&k| {
                    let below = usize::from(p[k] <= lambda);
                    let rj = in_group - below;
                    h.eval(rj, total - below, g) / (n_j - rj) as f64
                })
                .sum();
            let rhs = h.eval(in_group, total, g) / p_cond;
            (lhs, rhs)
        })
        .collect();
    let lhs: Vec<f64> = diffs.iter().map(|d| d.0).collect();
    let rhs: Vec<f64> = diffs.iter().map(|d| d.1).collect();
    let delta: Vec<f64> = diffs.iter().map(|d| d.0 - d.1).collect();
    let (l, _) = mean_se(&lhs);
    let (r, _) = mean_se(&rhs);
    let (_, se) = mean_se(&delta);

    let mut report = VerifyReport::new(
        Section::LemmaExpectLoo,
        &["rho", "x0", "group", "h"],
        "observed = MC estimate of sum_k E[h(R_j^-k)/(n_j - R_j^-k)], claimed = E[h(R_j)]/P(lambda, x0) with exact P; h code 0 = (R_j+1)/(R+g), 1 = constant",
    );
    report.push(vec![config.rho, x0, group as f64, h.code()], l, r);
    report.std_errors.push(se);
    Ok(report)
}

/// Configuration used by the lemma sections: two groups of ten, the second
/// holding four alternatives at μ = 2.5.
pub fn lemma_config(seed: u64, replications: usize) -> SimConfig {
    SimConfig {
        m: 20,
        group_sizes: vec![10, 10],
        nonnull_counts: vec![0, 4],
        effect_mu: EffectSize::Common(2.5),
        rho: 0.1,
        lambda: 0.5,
        alpha: 0.05,
        procedure: Procedure::Gbh1,
        replications,
        seed,
    }
}

/// `(ρ, x₀)` points audited by the lemma sections.
pub const LEMMA_POINTS: [(f64, f64); 5] = [(1e-4, 0.0), (0.1, 1.0), (0.2, -2.0), (0.2, 0.0), (0.2, 2.0)];

pub fn run_lemma_rejections(seed: u64, replications: usize) -> Result<VerifyReport> {
    let base = lemma_config(seed, replications);
    let c = base.alpha / base.m as f64;
    let mut out: Option<VerifyReport> = None;
    for &(rho, x0) in &LEMMA_POINTS {
        let cfg = SimConfig { rho, ..base.clone() };
        let r = check_rejection_expectation(&cfg, x0, c)?;
        match out.as_mut() {
            Some(acc) => acc.merge(r),
            None => out = Some(r),
        }
    }
    Ok(out.expect("non-empty point list"))
}

pub fn run_lemma_loo(seed: u64, replications: usize) -> Result<VerifyReport> {
    let base = lemma_config(seed, replications);
    let mut out: Option<VerifyReport> = None;
    for &(rho, x0) in &LEMMA_POINTS {
        for group in 0..base.group_sizes.len() {
            for h in [HChoice::BoundH, HChoice::ConstantOne] {
                let cfg = SimConfig { rho, ..base.clone() };
                let r = check_loo_expectation(&cfg, x0, group, h)?;
                match out.as_mut() {
                    Some(acc) => acc.merge(r),
                    None => out = Some(r),
                }
            }
        }
    }
    Ok(out.expect("non-empty point list"))
}
