//! Closed-form FDR upper bound for GBH₁ under the equicorrelated one-sided
//! normal-means model, and its building blocks.
//!
//! The bound is a sum of seven terms, each scaled by `α(1 - λ)`:
//!
//! | term | ρ-form | a-form |
//! |------|--------|--------|
//! | 1 | `1 / (2 √(1-ρ) Φ(Φ⁻¹(1-λ)/√(1-ρ)))` | `a / (2 Φ(a Φ⁻¹(1-λ)))` (= `a I₇ / (√(a²-1) Φ(·))`) |
//! | 2 | `√(2π)/2 · √((1-ρ)/(1-2ρ))` | `I₁ / √(a²-1)` |
//! | 3 | `√(2π)/2 · (1-√(1-ρ)) √Q` | `I₂ / √(a²-1)` |
//! | 4 | `√(2π)/8 · (1-ρ)(1+√(1-ρ)) Q^{3/2}` | `I₃ / √(a²-1)` |
//! | 5 | `√(ρ(1-ρ)) / (1-2ρ)` | `I₄ / √(a²-1)` |
//! | 6 | `√ρ (1-√(1-ρ))(3+√(1-ρ)) / D` | `I₅ / √(a²-1)` |
//! | 7 | `½ √ρ (1-ρ)(1+√(1-ρ)) Q²` | `I₆ / √(a²-1)` |
//!
//! with `D = 2 - 5ρ - ρ√(1-ρ)`, `Q = (3 + √(1-ρ)) / D` and `a = 1/√(1-ρ)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::normal::{norm_cdf, norm_quantile, phi};

const SQRT_2PI: f64 = 2.506_628_274_631_000_2;

/// Largest λ covered by the bound.
pub const LAMBDA_MAX: f64 = 0.5;

/// `5a + 1 - 3a³ - a²`; positive exactly on the admissible range of `a`.
#[inline]
pub fn admissibility_cubic(a: f64) -> f64 {
    5.0 * a + 1.0 - 3.0 * a * a * a - a * a
}

/// Root ρ* of the admissibility cubic under `a = 1/√(1-ρ)`. The bound's
/// integrals are finite exactly for ρ < ρ*.
pub fn rho_max() -> f64 {
    static RHO_MAX: OnceLock<f64> = OnceLock::new();
    *RHO_MAX.get_or_init(|| {
        let f = |rho: f64| admissibility_cubic(1.0 / (1.0 - rho).sqrt());
        let (mut lo, mut hi) = (0.34, 0.35);
        debug_assert!(f(lo) > 0.0 && f(hi) < 0.0);
        while hi - lo > 1e-15 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    })
}

/// How strictly [`fdr_bound`] checks its input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DomainCheck {
    /// λ ∈ (0, 1/2], ρ ∈ (0, ρ*), α ∈ (0, 1).
    #[default]
    Theorem,
    /// Also allows λ ∈ (1/2, 1). The formulas are still evaluated exactly,
    /// but no FDR guarantee is claimed there.
    Exploratory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInput {
    pub lambda: f64,
    pub rho: f64,
    pub alpha: f64,
}

impl BoundInput {
    pub fn new(lambda: f64, rho: f64, alpha: f64) -> Self {
        Self { lambda, rho, alpha }
    }

    pub fn in_theorem_domain(&self) -> bool {
        self.validate(DomainCheck::Theorem).is_ok()
    }

    pub fn validate(&self, check: DomainCheck) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain("alpha must lie in (0, 1)", self.alpha));
        }
        match check {
            DomainCheck::Theorem => {
                if !(self.lambda > 0.0 && self.lambda <= LAMBDA_MAX) {
                    return Err(Error::domain("lambda must lie in (0, 1/2]", self.lambda));
                }
            }
            DomainCheck::Exploratory => {
                if !(self.lambda > 0.0 && self.lambda < 1.0) {
                    return Err(Error::domain("lambda must lie in (0, 1)", self.lambda));
                }
            }
        }
        check_rho(self.rho)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    let limit = rho_max();
    if rho > 0.0 && rho < limit {
        Ok(())
    } else {
        Err(Error::domain(
            format!("rho must lie in (0, {limit:.6}) (root of 5a+1-3a^3-a^2)"),
            rho,
        ))
    }
}

/// The `(a, b)` reparameterization: `a = 1/√(1-ρ)`, `b = -√(ρ/(1-ρ)) x₀`.
/// `a - 1` and `a² - 1` are kept separately so they stay accurate for small ρ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AParam {
    pub a: f64,
    pub b: f64,
    pub a_minus_1: f64,
    pub a2_minus_1: f64,
}

impl AParam {
    pub fn from_rho(rho: f64, x0: f64) -> Self {
        let s = (1.0 - rho).sqrt();
        Self {
            a: 1.0 / s,
            b: -(rho / (1.0 - rho)).sqrt() * x0,
            a_minus_1: rho / (s * (1.0 + s)),
            a2_minus_1: rho / (1.0 - rho),
        }
    }

    pub fn from_a(a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            a_minus_1: a - 1.0,
            a2_minus_1: a * a - 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parameterization {
    RhoForm,
    AForm,
}

/// The seven additive terms of the bound (already scaled by `α(1-λ)`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundBreakdown {
    pub parameterization: Parameterization,
    pub input: BoundInput,
    pub terms: [f64; 7],
    pub total: f64,
    /// `total / α`.
    pub ratio: f64,
    pub in_theorem_domain: bool,
}

impl BoundBreakdown {
    fn assemble(parameterization: Parameterization, input: BoundInput, unit_terms: [f64; 7]) -> Self {
        let scale = input.alpha * (1.0 - input.lambda);
        let terms = unit_terms.map(|t| scale * t);
        let total = terms.iter().sum::<f64>();
        Self {
            parameterization,
            input,
            terms,
            total,
            ratio: total / input.alpha,
            in_theorem_domain: input.in_theorem_domain(),
        }
    }
}

/// `Φ⁻¹(1 - λ)` evaluated as `-Φ⁻¹(λ)` so small λ keeps its digits.
fn upper_quantile(lambda: f64) -> f64 {
    -norm_quantile(lambda).expect("lambda validated to (0, 1)")
}

/// Evaluates the bound in its ρ-parameterized closed form.
pub fn fdr_bound(input: &BoundInput) -> Result<BoundBreakdown> {
    fdr_bound_with(input, DomainCheck::Theorem)
}

pub fn fdr_bound_with(input: &BoundInput, check: DomainCheck) -> Result<BoundBreakdown> {
    input.validate(check)?;
    let rho = input.rho;
    let s = (1.0 - rho).sqrt();
    let one_minus_s = rho / (1.0 + s);
    let d = 2.0 - 5.0 * rho - rho * s;
    let q = (3.0 + s) / d;
    let z = upper_quantile(input.lambda);
    let sqrt_rho = rho.sqrt();

    let terms = [
        1.0 / (2.0 * s * norm_cdf(z / s)),
        SQRT_2PI / 2.0 * ((1.0 - rho) / (1.0 - 2.0 * rho)).sqrt(),
        SQRT_2PI / 2.0 * one_minus_s * q.sqrt(),
        SQRT_2PI / 8.0 * (1.0 - rho) * (1.0 + s) * q.powf(1.5),
        (rho * (1.0 - rho)).sqrt() / (1.0 - 2.0 * rho),
        sqrt_rho * one_minus_s * (3.0 + s) / d,
        0.5 * sqrt_rho * (1.0 - rho) * (1.0 + s) * q * q,
    ];
    Ok(BoundBreakdown::assemble(Parameterization::RhoForm, *input, terms))
}

/// Evaluates the same bound through `a = 1/√(1-ρ)`.
pub fn fdr_bound_aform(input: &BoundInput) -> Result<BoundBreakdown> {
    fdr_bound_aform_with(input, DomainCheck::Theorem)
}

pub fn fdr_bound_aform_with(input: &BoundInput, check: DomainCheck) -> Result<BoundBreakdown> {
    input.validate(check)?;
    let p = AParam::from_rho(input.rho, 0.0);
    let (a, am1, a2m1) = (p.a, p.a_minus_1, p.a2_minus_1);
    let cubic = admissibility_cubic(a);
    let k = a2m1 * (3.0 * a + 1.0) / cubic;
    let z = upper_quantile(input.lambda);
    let root = a2m1.sqrt();

    let terms = [
        a / (2.0 * norm_cdf(a * z)),
        SQRT_2PI / (2.0 * (2.0 - a * a).sqrt()),
        am1 * SQRT_2PI / 2.0 * ((3.0 * a + 1.0) / cubic).sqrt(),
        SQRT_2PI / (8.0 * am1 * root) * k.powf(1.5),
        root / (2.0 - a * a),
        am1 * root * (3.0 * a + 1.0) / cubic,
        k * k / (2.0 * am1 * root),
    ];
    Ok(BoundBreakdown::assemble(Parameterization::AForm, *input, terms))
}

/// Closed forms of the seven integrals `I₁ … I₇` appearing in the derivation.
/// Requires `a > 1`, `2 - a² > 0` and `5a + 1 - 3a³ - a² > 0`.
pub fn integrals_closed(a: f64) -> Result<[f64; 7]> {
    check_integral_domain(a)?;
    Ok(integrals_closed_param(&AParam::from_a(a, 0.0)))
}

pub(crate) fn check_integral_domain(a: f64) -> Result<()> {
    if !(a > 1.0) {
        return Err(Error::domain("a must exceed 1", a));
    }
    if !(2.0 - a * a > 0.0) {
        return Err(Error::domain("2 - a^2 must be positive", a));
    }
    if !(admissibility_cubic(a) > 0.0) {
        return Err(Error::domain("5a + 1 - 3a^3 - a^2 must be positive", a));
    }
    Ok(())
}

pub(crate) fn integrals_closed_param(p: &AParam) -> [f64; 7] {
    let (a, am1, a2m1) = (p.a, p.a_minus_1, p.a2_minus_1);
    let k = a2m1 * (3.0 * a + 1.0) / admissibility_cubic(a);
    [
        SQRT_2PI / 2.0 * (a2m1 / (2.0 - a * a)).sqrt(),
        am1 * SQRT_2PI / 2.0 * k.sqrt(),
        SQRT_2PI / (8.0 * am1) * k.powf(1.5),
        a2m1 / (2.0 - a * a),
        am1 * k,
        k * k / (2.0 * am1),
        0.5 * a2m1.sqrt(),
    ]
}

/// Upper bound on the conditional-to-marginal tail ratio
/// `f(x) = (1 - Φ(ax + b)) / (1 - Φ(x))` as claimed for ρ below ρ*.
pub fn m_factor(rho: f64, x0: f64) -> Result<f64> {
    check_rho(rho)?;
    let s = (1.0 - rho).sqrt();
    if x0 <= 0.0 {
        return Ok(1.0 / s);
    }
    let one_minus_s = rho / (1.0 + s);
    let num = 4.0 * one_minus_s * one_minus_s + rho * x0 * x0;
    let den = 4.0 * (s - 1.0 + rho);
    let expo = rho * x0 * x0 / (4.0 * one_minus_s + 2.0 * rho);
    Ok(1.0 + num / den * expo.exp())
}

/// Same quantity written in `(a, b)`; used to cross-check [`m_factor`].
pub fn m_factor_ab(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        return a;
    }
    let am1 = a - 1.0;
    let expo = b * b / (8.0 * a * a - 2.0 * (a + 1.0) * (a + 1.0));
    1.0 + (4.0 * am1 * am1 + b * b) / (4.0 * am1) * expo.exp()
}

fn check_lambda_half(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= LAMBDA_MAX {
        Ok(())
    } else {
        Err(Error::domain("lambda must lie in (0, 1/2]", lambda))
    }
}

fn check_conditional(lambda: f64, rho: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::domain("lambda must lie in (0, 1)", lambda));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::domain("rho must lie in [0, 1)", rho));
    }
    Ok(())
}

/// Lower bound on `P(λ, x₀) = Pr(p_i > λ | X₀ = x₀)` for a null `i`:
/// `Φ(a Φ⁻¹(1-λ))` when `b >= 0`, `φ(-b)/(1-b)` when `b < 0`.
pub fn p_lower(lambda: f64, rho: f64, x0: f64) -> Result<f64> {
    check_lambda_half(lambda)?;
    check_conditional(lambda, rho)?;
    let p = AParam::from_rho(rho, x0);
    if p.b >= 0.0 {
        Ok(norm_cdf(p.a * upper_quantile(lambda)))
    } else {
        Ok(phi(-p.b) / (1.0 - p.b))
    }
}

/// `Pr(p_i > λ | X₀ = x₀) = Φ(a Φ⁻¹(1-λ) + b)` for a null `i`.
pub fn exact_p_conditional(lambda: f64, rho: f64, x0: f64) -> Result<f64> {
    check_conditional(lambda, rho)?;
    let p = AParam::from_rho(rho, x0);
    Ok(norm_cdf(p.a * upper_quantile(lambda) + p.b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub lambda: f64,
    pub rho: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Evaluates the bound on a λ-major, ρ-ascending grid. Any out-of-domain
/// point fails the whole call with every offending pair listed.
pub fn bound_curve(lambdas: &[f64], rhos: &[f64], alpha: f64, check: DomainCheck) -> Result<Vec<CurveRow>> {
    let mut rhos_sorted = rhos.to_vec();
    rhos_sorted.sort_by(f64::total_cmp);
    let points: Vec<BoundInput> = lambdas
        .iter()
        .flat_map(|&l| rhos_sorted.iter().map(move |&r| BoundInput::new(l, r, alpha)))
        .collect();
    let offending: Vec<String> = points
        .iter()
        .filter_map(|p| {
            p.validate(check)
                .err()
                .map(|e| format!("(lambda={}, rho={}): {e}", p.lambda, p.rho))
        })
        .collect();
    if !offending.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} grid point(s) outside the domain:\n  {}",
            offending.len(),
            offending.join("\n  ")
        )));
    }
    points
        .par_iter()
        .map(|p| {
            let b = fdr_bound_with(p, check)?;
            Ok(CurveRow {
                lambda: p.lambda,
                rho: p.rho,
                bound: b.total,
                ratio: b.ratio,
            })
        })
        .collect()
}

/// Infimum of the bound over the theorem domain, `α/2 (1 + √(2π)/2 + √π)`,
/// approached at λ = 1/2, ρ → 0.
pub fn bound_infimum(alpha: f64) -> f64 {
    alpha / 2.0 * (1.0 + SQRT_2PI / 2.0 + PI.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn rho_max_brackets_the_cubic_root() {
        let r = rho_max();
        assert!(r > 0.3435 && r < 0.3445, "rho* = {r}");
        let a = 1.0 / (1.0 - r).sqrt();
        assert!(admissibility_cubic(a).abs() < 1e-12);
        assert!((a - 1.2345).abs() < 1e-3);
        let a34 = 1.0 / 0.66f64.sqrt();
        assert!((a34 - 1.2309).abs() < 1e-4);
        assert!(admissibility_cubic(a34) > 0.0);
        assert!(admissibility_cubic(1.2403) < 0.0);
    }

    #[test]
    fn limit_value_near_independence() {
        let b = fdr_bound(&BoundInput::new(0.5, 1e-6, 0.05)).unwrap();
        assert!((b.ratio - 2.013).abs() < 0.005, "ratio = {}", b.ratio);
        assert!((bound_infimum(0.05) / 0.05 - 2.0129).abs() < 1e-4);
        assert!(b.ratio > bound_infimum(0.05) / 0.05);
        assert!((b.ratio - bound_infimum(0.05) / 0.05).abs() < 0.005);
    }

    #[test]
    fn reported_thresholds() {
        let b = fdr_bound(&BoundInput::new(0.05, 0.149, 0.05)).unwrap();
        assert!(b.ratio < 10.0, "{}", b.ratio);
        let b = fdr_bound(&BoundInput::new(0.05, 0.219, 0.05)).unwrap();
        assert!(b.ratio < 20.0, "{}", b.ratio);
    }

    #[test]
    fn domain_errors() {
        assert!(fdr_bound(&BoundInput::new(0.6, 0.1, 0.05)).is_err());
        assert!(fdr_bound(&BoundInput::new(0.0, 0.1, 0.05)).is_err());
        assert!(fdr_bound(&BoundInput::new(0.5, 0.0, 0.05)).is_err());
        assert!(fdr_bound(&BoundInput::new(0.5, 0.35, 0.05)).is_err());
        assert!(fdr_bound(&BoundInput::new(0.5, 0.1, 1.0)).is_err());
        assert!(fdr_bound(&BoundInput::new(0.5, 0.34, 0.05)).is_ok());
        let forced = fdr_bound_with(&BoundInput::new(0.6, 0.1, 0.05), DomainCheck::Exploratory).unwrap();
        assert!(!forced.in_theorem_domain);
        assert!(fdr_bound_with(&BoundInput::new(0.6, 0.35, 0.05), DomainCheck::Exploratory).is_err());
        match fdr_bound(&BoundInput::new(0.6, 0.1, 0.05)) {
            Err(Error::Domain { constraint, .. }) => assert!(constraint.contains("(0, 1/2]")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn aform_term_two_substitution() {
        let input = BoundInput::new(0.5, 0.3, 0.05);
        let b = fdr_bound_aform(&input).unwrap();
        let a2: f64 = 1.0 / 0.7;
        let expected = 0.05 * 0.5 * SQRT_2PI / (2.0 * (2.0 - a2).sqrt());
        assert!(rel(b.terms[1], expected) < 1e-13);
        let rho_form = 0.05 * 0.5 * (0.7f64 / 0.4).sqrt() * SQRT_2PI / 2.0;
        assert!(rel(b.terms[1], rho_form) < 1e-13);
    }

    #[test]
    fn forms_agree_termwise() {
        for &(l, r) in &[(0.25, 0.1), (0.05, 0.3), (0.5, 0.01), (0.4, 0.343)] {
            let input = BoundInput::new(l, r, 0.05);
            let x = fdr_bound(&input).unwrap();
            let y = fdr_bound_aform(&input).unwrap();
            for i in 0..7 {
                assert!(rel(x.terms[i], y.terms[i]) < 1e-12, "term {i} at ({l},{r})");
            }
            assert!(rel(x.total, y.total) < 1e-12);
        }
    }

    #[test]
    fn aform_terms_are_scaled_integrals() {
        let input = BoundInput::new(0.3, 0.2, 0.1);
        let b = fdr_bound_aform(&input).unwrap();
        let p = AParam::from_rho(0.2, 0.0);
        let ints = integrals_closed_param(&p);
        let scale = 0.1 * 0.7 / p.a2_minus_1.sqrt();
        for (i, int) in ints.iter().take(6).enumerate() {
            assert!(rel(b.terms[i + 1], scale * int) < 1e-12, "I{}", i + 1);
        }
        let z = -norm_quantile(0.3).unwrap();
        assert!(rel(b.terms[0], scale * p.a * ints[6] / norm_cdf(p.a * z)) < 1e-12);
    }

    #[test]
    fn closed_integrals_values() {
        let i = integrals_closed(1.2).unwrap();
        assert!((i[0] - 1.1110).abs() < 1e-4, "{}", i[0]);
        assert!(rel(i[3], 0.44 / 0.56) < 1e-12);
        assert!(rel(i[6], 0.5 * 0.44f64.sqrt()) < 1e-12);
        assert!(i.iter().all(|v| v.is_finite() && *v > 0.0));
        assert!(integrals_closed(1.0 + 1e-12).unwrap()[6] < 1e-5);
        assert!(integrals_closed(1.0).is_err());
        assert!(integrals_closed(1.25).is_err());
        assert!(integrals_closed(1.5).is_err());
    }

    #[test]
    fn m_factor_branches() {
        assert!(rel(m_factor(0.2, -1.0).unwrap(), 1.0 / 0.8f64.sqrt()) < 1e-15);
        let m = m_factor(0.2, 2.0).unwrap();
        assert!((m - 6.916).abs() < 1e-3, "{m}");
        assert!((m_factor(1e-12, -5.0).unwrap() - 1.0).abs() < 1e-9);
        for &(r, x0) in &[(0.2, 2.0), (0.05, 0.5), (0.3, 4.0), (0.1, -3.0)] {
            let p = AParam::from_rho(r, x0);
            assert!(rel(m_factor(r, x0).unwrap(), m_factor_ab(p.a, p.b)) < 1e-10);
            assert!(m_factor(r, x0).unwrap() > 1.0);
        }
        assert!(m_factor(0.35, 1.0).is_err());
    }

    #[test]
    fn p_lower_values() {
        assert_eq!(p_lower(0.5, 0.2, -1.0).unwrap(), 0.5);
        let v = p_lower(0.25, 0.19, 0.0).unwrap();
        let a = 1.0 / 0.81f64.sqrt();
        assert!((a - 1.1111).abs() < 1e-4);
        assert!((v - 0.7732).abs() < 1e-4, "{v}");
        let v = p_lower(0.5, 0.2, 2.0).unwrap();
        assert!(rel(v, phi(1.0) / 2.0) < 1e-12);
        assert!((v - 0.1210).abs() < 1e-4);
        assert!(p_lower(0.6, 0.2, 0.0).is_err());
    }

    #[test]
    fn exact_conditional_dominates_lower_bound() {
        assert!((exact_p_conditional(0.5, 1e-12, 0.0).unwrap() - 0.5).abs() < 1e-12);
        let e = exact_p_conditional(0.5, 0.2, 2.0).unwrap();
        assert!((e - norm_cdf(-1.0)).abs() < 1e-12);
        assert!((e - 0.1587).abs() < 1e-4);
        assert!(e >= p_lower(0.5, 0.2, 2.0).unwrap());
        let e = exact_p_conditional(0.3, 0.1, -1.0).unwrap();
        let a = 1.0 / 0.9f64.sqrt();
        let z = -norm_quantile(0.3).unwrap();
        assert!((z - 0.5244).abs() < 1e-4);
        assert!(e >= norm_cdf(a * z));
    }

    #[test]
    fn curve_single_point_and_errors() {
        let rows = bound_curve(&[0.5], &[1e-6], 0.05, DomainCheck::Theorem).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].ratio - 2.013).abs() < 0.005);
        let err = bound_curve(&[0.5], &[0.3, 0.35, 0.36], 0.05, DomainCheck::Theorem).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rho=0.35") && msg.contains("rho=0.36") && msg.contains("2 grid point"));
    }
}
