//! Distances between an empirical sample and a Laplace target: exact
//! Kolmogorov distance, a lower bound on the bounded-Lipschitz distance over
//! a finite certified family, and the order-statistics Wasserstein distance,
//! which bounds `d_BL` from above because every member of the BL ball is
//! 1-Lipschitz.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace::LaplaceParams;
use crate::quadrature::QuadOptions;
use crate::stats::mean_and_se;
use crate::stein::TestFunction;

/// 95% two-sided DKW constant.
pub const DKW_95: f64 = 1.36;

/// Half-width of the 95% DKW band for `n` draws.
pub fn dkw_band(n: usize) -> f64 {
    DKW_95 / (n as f64).sqrt()
}

/// A sorted, non-empty sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    values: Vec<f64>,
}

impl EmpiricalSample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("empirical sample is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("empirical sample contains non-finite values".into()));
        }
        values.par_sort_unstable_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The sample mapped through `x ↦ c·x`, `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!("scale factor must be positive, got {c}")));
        }
        Ok(Self { values: self.values.iter().map(|v| v * c).collect() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceKind {
    #[serde(rename = "d_K")]
    Kolmogorov,
    #[serde(rename = "d_BL_lower")]
    BlLower,
    #[serde(rename = "d_W_upper")]
    WassersteinUpper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub kind: DistanceKind,
    pub value: f64,
    /// Zero for deterministic functionals of the sample.
    pub std_error: f64,
    /// Number of test functions searched (BL lower bound only).
    pub family_size: usize,
    /// The test function attaining the BL lower bound.
    pub witness: Option<String>,
}

/// `sup_x |F_n(x) - F(x)|`, exact.
pub fn kolmogorov_empirical(s: &EmpiricalSample, target: &LaplaceParams) -> DistanceEstimate {
    let n = s.len() as f64;
    let value = s
        .values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = target.cdf_unchecked(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    DistanceEstimate { kind: DistanceKind::Kolmogorov, value, std_error: 0.0, family_size: 0, witness: None }
}

/// `max_h |mean h(X_i) - E h(W)|` over a family of certified BL functions;
/// a lower bound on `d_BL`. The error is the largest per-function standard
/// error.
pub fn bl_lower_bound(s: &EmpiricalSample, target: &LaplaceParams, family: &[TestFunction]) -> Result<DistanceEstimate> {
    if family.is_empty() {
        return Err(Error::Contract("test-function family is empty".into()));
    }
    let lo = s.values[0].min(target.location() - 10.0 * target.scale());
    let hi = s.values[s.len() - 1].max(target.location() + 10.0 * target.scale());
    let probe: Vec<f64> = (0..=4000).map(|i| lo + (hi - lo) * f64::from(i) / 4000.0).collect();
    for h in family {
        let (sup, lip) = h.probe_bounds(&probe);
        if sup > 1.0 + 1e-12 || lip > 1.0 + 1e-9 || h.sup_bound() > 1.0 || h.lip_const() > 1.0 {
            return Err(Error::Contract(format!("{} is not in the bounded-Lipschitz ball", h.label())));
        }
    }
    let opts = QuadOptions::default();
    let mass = target.expectation(|_| 1.0, &[], &opts)?;
    let per_h: Vec<Result<(f64, f64)>> = family
        .par_iter()
        .map(|h| {
            let wh = target.expectation(|w| h.eval(w), h.kinks(), &opts)? / mass;
            let e = mean_and_se(&s.values, |x| h.eval(x));
            Ok(((e.value - wh).abs(), e.std_error))
        })
        .collect();
    let mut best = (0.0, 0usize);
    let mut max_se: f64 = 0.0;
    for (i, r) in per_h.into_iter().enumerate() {
        let (d, se) = r?;
        if d > best.0 {
            best = (d, i);
        }
        max_se = max_se.max(se);
    }
    Ok(DistanceEstimate {
        kind: DistanceKind::BlLower,
        value: best.0,
        std_error: max_se,
        family_size: family.len(),
        witness: Some(family[best.1].label().to_string()),
    })
}

/// `∫₀¹ |F_n⁻¹(u) - F⁻¹(u)| du` under the quantile coupling, using the
/// closed-form antiderivative of the Laplace quantile on each level strip.
pub fn wasserstein_empirical(s: &EmpiricalSample, target: &LaplaceParams) -> DistanceEstimate {
    let n = s.len();
    let nf = n as f64;
    let mut total = 0.0;
    for (i, &x) in s.values.iter().enumerate() {
        let u0 = i as f64 / nf;
        let u1 = (i + 1) as f64 / nf;
        let split = target.cdf_unchecked(x).clamp(u0, u1);
        let g0 = target.quantile_antiderivative(u0);
        let gs = target.quantile_antiderivative(split);
        let g1 = target.quantile_antiderivative(u1);
        // Q < x below the split level, Q > x above it.
        total += x * (split - u0) - (gs - g0) + (g1 - gs) - x * (u1 - split);
    }
    DistanceEstimate {
        kind: DistanceKind::WassersteinUpper,
        value: total.max(0.0),
        std_error: 0.0,
        family_size: 0,
        witness: None,
    }
}

/// Kolmogorov bound from a bounded-Lipschitz distance against a law whose
/// density is bounded by `density_sup`: `(C+2)/2·√d`, improved to
/// `(3/2)√(C d)` when `C ≥ 1`.
pub fn kolmogorov_from_bl(d_bl: f64, density_sup: f64) -> Result<f64> {
    if !(d_bl.is_finite() && d_bl >= 0.0) {
        return Err(Error::Domain(format!("d_BL must be nonnegative, got {d_bl}")));
    }
    if !(density_sup.is_finite() && density_sup > 0.0) {
        return Err(Error::Domain(format!("density bound must be positive, got {density_sup}")));
    }
    let basic = (density_sup + 2.0) / 2.0 * d_bl.sqrt();
    if density_sup >= 1.0 {
        Ok(basic.min(1.5 * (density_sup * d_bl).sqrt()))
    } else {
        Ok(basic)
    }
}
