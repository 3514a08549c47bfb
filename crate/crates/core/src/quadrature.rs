//! Globally adaptive Gauss–Kronrod (7/15) integration.
//!
//! The interval with the largest error estimate is bisected until the summed
//! error estimate falls below `max(abs_tol, rel_tol * |result|)`.
//! Semi-infinite ranges are mapped onto `[0, 1)` with `x = a ± s t / (1 - t)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 0.0,
            rel: 1e-10,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Piece {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let sum = f(center - dx) + f(center + dx);
        kronrod += w * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    Piece {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over the finite interval `[lo, hi]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Estimate {
    let mut heap = BinaryHeap::new();
    let first = kronrod15(&f, lo, hi);
    let (mut value, mut error) = (first.value, first.error);
    heap.push(first);
    loop {
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target || !error.is_finite() || heap.len() >= tol.max_intervals {
            return Estimate {
                value,
                error,
                intervals: heap.len(),
                converged: error <= target,
            };
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Interval can no longer be split in floating point.
            heap.push(worst);
            return Estimate {
                value,
                error,
                intervals: heap.len(),
                converged: false,
            };
        }
        let left = kronrod15(&f, worst.lo, mid);
        let right = kronrod15(&f, mid, worst.hi);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if heap.len() % 64 == 0 {
            // Re-sum to keep the running totals free of drift.
            value = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
        }
    }
}

/// Integrates `f` over `[start, +inf)` using `x = start + scale t / (1 - t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, start: f64, scale: f64, tol: Tolerance) -> Estimate {
    integrate(
        |t| {
            let u = 1.0 - t;
            let x = start + scale * t / u;
            let y = f(x) * scale / (u * u);
            if y.is_finite() {
                y
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integrates `f` over `(-inf, end]`.
pub fn integrate_from_neg_infinity<F: Fn(f64) -> f64>(f: F, end: f64, scale: f64, tol: Tolerance) -> Estimate {
    integrate_to_infinity(|y| f(2.0 * end - y), end, scale, tol)
}
