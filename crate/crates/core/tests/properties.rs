use gbh_core::bound::{rho_max, BoundInput};
use gbh_core::normal::{norm_cdf, norm_quantile, norm_sf, tail_lower_bound};
use gbh_core::procedures::{bh_step_up, gbh1, gbh1_weights, gbh1_weights_loo, step_up_oracle, storey, GroupedPValues};
use gbh_core::verify::{f_ratio, sup_f};
use gbh_core::{exact_p_conditional, fdr_bound, fdr_bound_aform, p_lower, AParam};
use proptest::prelude::*;

fn rel(x: f64, y: f64) -> f64 {
    if x == y {
        0.0
    } else {
        (x - y).abs() / x.abs().max(y.abs())
    }
}

fn pvalues(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![1 => Just(1.0), 1 => 1e-6..0.01f64, 4 => 1e-9..1.0f64],
        1..max_len,
    )
}

/// p-values with a group size vector that partitions them.
fn grouped() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    prop::collection::vec(1usize..10, 1..6).prop_flat_map(|sizes| {
        let m: usize = sizes.iter().sum();
        (prop::collection::vec(1e-9..1.0f64, m), Just(sizes))
    })
}

proptest! {
    #[test]
    fn cdf_is_symmetric(x in -40.0..40.0f64) {
        prop_assert!((norm_cdf(x) + norm_cdf(-x) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cdf_and_quantile_are_increasing(x in -8.0..8.0f64, dx in 1e-6..1.0f64) {
        prop_assert!(norm_cdf(x + dx) > norm_cdf(x));
        let p = norm_cdf(x);
        let q = norm_cdf(x + dx);
        prop_assert!(norm_quantile(q).unwrap() > norm_quantile(p).unwrap());
    }

    #[test]
    fn quantile_round_trip(p in 1e-9..(1.0 - 1e-9)) {
        prop_assert!((norm_cdf(norm_quantile(p).unwrap()) - p).abs() <= 1e-9);
    }

    #[test]
    fn tail_bound_is_strict(x in 0.0..10.0f64) {
        prop_assert!(tail_lower_bound(x).unwrap() < norm_sf(x));
    }

    #[test]
    fn step_up_matches_oracle(p in pvalues(40), alpha in 0.001..0.5f64) {
        let fast = bh_step_up(&p, alpha).unwrap();
        let slow = step_up_oracle(&p, alpha);
        prop_assert_eq!(fast.rejected, slow.rejected);
        prop_assert_eq!(fast.k_star, slow.k_star);
    }

    #[test]
    fn lowering_a_score_never_shrinks_rejections(
        p in pvalues(40),
        pick in any::<prop::sample::Index>(),
        shrink in 0.0..1.0f64,
        alpha in 0.001..0.5f64,
    ) {
        let before = bh_step_up(&p, alpha).unwrap();
        let mut q = p.clone();
        let i = pick.index(q.len());
        q[i] *= shrink;
        let after = bh_step_up(&q, alpha).unwrap();
        for r in &before.rejected {
            prop_assert!(after.is_rejected(*r));
        }
    }

    #[test]
    fn weight_is_nondecreasing_across_lambda(
        (p, sizes) in grouped(),
        lambda in 0.01..0.99f64,
        pick in any::<prop::sample::Index>(),
    ) {
        let k = pick.index(p.len());
        let eps = 1e-7;
        let mut lo = p.clone();
        lo[k] = lambda - eps;
        let mut hi = p;
        hi[k] = lambda + eps;
        let glo = GroupedPValues::contiguous(lo, &sizes).unwrap();
        let ghi = GroupedPValues::contiguous(hi, &sizes).unwrap();
        let j = glo.group_of(k);
        let wlo = gbh1_weights(&glo, lambda).unwrap().weights[j];
        let whi = gbh1_weights(&ghi, lambda).unwrap().weights[j];
        prop_assert!(whi >= wlo, "{whi} < {wlo}");
    }

    #[test]
    fn leave_one_out_weight_is_dominated((p, sizes) in grouped(), lambda in 0.01..0.99f64) {
        let gp = GroupedPValues::contiguous(p, &sizes).unwrap();
        let w = gbh1_weights(&gp, lambda).unwrap();
        for k in 0..gp.m() {
            let j = gp.group_of(k);
            let loo = gbh1_weights_loo(&gp, lambda, k).unwrap();
            prop_assert!(w.weights[j] >= loo.weights[j]);
        }
    }

    #[test]
    fn single_group_reduces_to_storey(p in pvalues(60), lambda in 0.1..0.5f64, alpha in 0.01..0.1f64) {
        let gp = GroupedPValues::single_group(p.clone()).unwrap();
        prop_assert_eq!(gbh1(&gp, lambda, alpha).unwrap().rejected, storey(&p, lambda, alpha).unwrap().rejected);
    }

    #[test]
    fn group_labels_are_interchangeable((p, sizes) in grouped(), lambda in 0.05..0.5f64, alpha in 0.01..0.2f64) {
        // Reversing the order of groups (and their members) must not change decisions.
        let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(j, &n)| std::iter::repeat_n(j, n)).collect();
        let reversed: Vec<usize> = labels.iter().map(|&j| sizes.len() - 1 - j).collect();
        let a = gbh1(&GroupedPValues::from_labels(p.clone(), &labels).unwrap(), lambda, alpha).unwrap();
        let b = gbh1(&GroupedPValues::from_labels(p, &reversed).unwrap(), lambda, alpha).unwrap();
        prop_assert_eq!(a.rejected, b.rejected);
    }

    #[test]
    fn forms_agree(lambda in 1e-4..=0.5f64, rho in 1e-6..0.3442f64) {
        let input = BoundInput::new(lambda, rho, 0.05);
        let r = fdr_bound(&input).unwrap();
        let a = fdr_bound_aform(&input).unwrap();
        for (x, y) in r.terms.iter().zip(&a.terms) {
            prop_assert!(rel(*x, *y) <= 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn terms_positive_and_finite(lambda in 1e-4..=0.5f64, rho in 1e-9..0.344f64, alpha in 1e-4..0.5f64) {
        let b = fdr_bound(&BoundInput::new(lambda, rho, alpha)).unwrap();
        for t in b.terms {
            prop_assert!(t > 0.0 && t.is_finite());
        }
        prop_assert!((b.total / alpha - b.ratio).abs() <= 1e-12 * b.ratio);
    }

    #[test]
    fn exact_probability_dominates_lower_bound(lambda in 1e-4..=0.5f64, rho in 1e-4..0.34f64, x0 in -6.0..6.0f64) {
        let exact = exact_p_conditional(lambda, rho, x0).unwrap();
        let lower = p_lower(lambda, rho, x0).unwrap();
        prop_assert!(exact >= lower, "{exact} < {lower}");
    }

    #[test]
    fn ratio_is_below_one_past_crossing(rho in 0.01..0.34f64, x0 in -4.0..4.0f64, step in 0.01..5.0f64) {
        let p = AParam::from_rho(rho, x0);
        let cross = -p.b / p.a_minus_1;
        prop_assert!((f_ratio(p.a, p.b, cross) - 1.0).abs() <= 1e-9);
        prop_assert!(f_ratio(p.a, p.b, cross + step) <= 1.0);
    }

    #[test]
    fn sup_is_bounded_for_nonpositive_x0(rho in 0.01..0.34f64, x0 in -4.0..=0.0f64) {
        let (sup, _) = sup_f(rho, x0);
        let a = 1.0 / (1.0 - rho).sqrt();
        prop_assert!(sup <= a.min(2.0) + 1e-6);
        prop_assert!(sup >= 1.0 - 1e-12);
    }
}

#[test]
fn bound_diverges_toward_rho_max() {
    let r = rho_max();
    let near = fdr_bound(&BoundInput::new(0.5, r - 1e-9, 0.05)).unwrap();
    let far = fdr_bound(&BoundInput::new(0.5, r - 1e-3, 0.05)).unwrap();
    assert!(near.ratio > 1e6 * far.ratio.min(1.0));
    // Terms 4, 6 and 7 carry the cubic in their denominators.
    for i in [3, 5, 6] {
        assert!(near.terms[i] > 100.0 * far.terms[i]);
    }
}
