//! The sgn-bias transform `X ↦ X^(P)`, the symmetric equilibrium transform
//! `X ↦ X^L` (characterized by `E f(X) - f(0) = ½E[X²] E f''(X^L)`), and
//! the zero-bias transform, together with their moment, characteristic
//! function and density identities.
//!
//! Samplers are exact: `X^(P) = U₁·Y` and `X^L = U₂·Z` with the per-source
//! laws of `Y` and `Z` documented in [`crate::source`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, QuadOptions};
use crate::rng::{open01, stream, substream_seed, StreamRng};
use crate::source::SourceDistribution;
use crate::stats::{mean_and_se, MonteCarloEstimate};

/// Which transform produced a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    SgnBias,
    SymmetricEquilibrium,
    ZeroBias,
}

/// Draws from a transformed law, reproducible from `(source, provenance, seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSample {
    pub values: Vec<f64>,
    pub provenance: Transform,
    pub source: String,
    pub seed: u64,
}

fn draw_n(
    src: &SourceDistribution,
    n: usize,
    seed: u64,
    provenance: Transform,
    mut one: impl FnMut(&SourceDistribution, &mut StreamRng) -> Result<f64>,
) -> Result<TransformSample> {
    let mut rng = stream(seed);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(one(src, &mut rng)?);
    }
    if n == 0 {
        // Surface unsupported sources even for empty requests.
        one(src, &mut stream(seed))?;
    }
    Ok(TransformSample { values, provenance, source: src.label().to_string(), seed })
}

/// `n` draws of `X^(P) = U₁·Y`.
pub fn sgn_bias_sample(src: &SourceDistribution, n: usize, seed: u64) -> Result<TransformSample> {
    draw_n(src, n, seed, Transform::SgnBias, |s, rng| {
        let y = s.draw_sgn_bias_base(rng)?;
        Ok(open01(rng) * y)
    })
}

/// `n` draws of `X^L = U₂·Z`.
pub fn sym_equilibrium_sample(src: &SourceDistribution, n: usize, seed: u64) -> Result<TransformSample> {
    draw_n(src, n, seed, Transform::SymmetricEquilibrium, |s, rng| {
        let z = s.draw_equilibrium_base(rng)?;
        Ok(open01(rng) * z)
    })
}

/// `n` draws of the zero-bias variable `X^z`.
pub fn zero_bias_sample(src: &SourceDistribution, n: usize, seed: u64) -> Result<TransformSample> {
    draw_n(src, n, seed, Transform::ZeroBias, |s, rng| s.draw_zero_bias(rng))
}

/// `E[(X^L)^k] = μ_{k+2} / (b²(k+2)(k+1))` with `b² = E[X²]/2`.
pub fn equilibrium_moment(k: u32, src: &SourceDistribution) -> Result<f64> {
    let mu = src.moment(k + 2)?;
    let kf = f64::from(k);
    Ok(mu / (src.half_variance() * (kf + 2.0) * (kf + 1.0)))
}

/// Below this `|t|` the characteristic function switches to its series.
pub const CF_SERIES_CUTOFF: f64 = 1e-4;

/// `φ_{X^L}(t) = (1 - φ_X(t)) / (t² b²)`.
pub fn equilibrium_cf(t: f64, src: &SourceDistribution) -> Result<Complex64> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("t must be finite, got {t}")));
    }
    let b2 = src.half_variance();
    if t.abs() < CF_SERIES_CUTOFF {
        let m1 = equilibrium_moment(1, src)?;
        let m2 = equilibrium_moment(2, src)?;
        return Ok(Complex64::new(1.0 - 0.5 * t * t * m2, t * m1));
    }
    let phi = src.cf(t)?;
    Ok((Complex64::new(1.0, 0.0) - phi) / (t * t * b2))
}

/// Density of `X^L` at `s`.
///
/// Substituting `w = uv` and then `x = s/w` in the double-integral form
/// collapses it to the stop-loss transform
/// `f_{X^L}(s) = E[(X - s)⁺]/b²` for `s ≥ 0` and `E[(s - X)⁺]/b²` for
/// `s < 0`; this is what is evaluated here. Atom laws use the exact sum.
pub fn equilibrium_density(s: f64, src: &SourceDistribution) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::Domain(format!("s must be finite, got {s}")));
    }
    let b2 = src.half_variance();
    if let Some(atoms) = src.atom_list() {
        let stop_loss: f64 = atoms
            .iter()
            .map(|&(x, p)| if s >= 0.0 { p * (x - s).max(0.0) } else { p * (s - x).max(0.0) })
            .sum();
        return Ok(stop_loss / b2);
    }
    let ((lo, hi), kinks) = src.density_window()?;
    let opts = QuadOptions::default();
    let r = if s >= 0.0 {
        if s >= hi {
            return Ok(0.0);
        }
        let f = |x: f64| (x - s) * src.density(x).unwrap_or(0.0);
        integrate_with_breaks(f, s, hi, &kinks, &opts)?
    } else {
        if s <= lo {
            return Ok(0.0);
        }
        let f = |x: f64| (s - x) * src.density(x).unwrap_or(0.0);
        integrate_with_breaks(f, lo, s, &kinks, &opts)?
    };
    Ok(r.value / b2)
}

/// Density of `X^L` from the raw double integral
/// `(s²/b²) ∫₀¹∫₀¹ u⁻² v⁻³ f_X(s/(uv)) du dv`, by tensor-product adaptive
/// quadrature. Undefined at `s = 0` (use [`equilibrium_density`]).
pub fn equilibrium_density_double_integral(s: f64, src: &SourceDistribution) -> Result<f64> {
    if !s.is_finite() || s == 0.0 {
        return Err(Error::Domain(format!("double-integral form needs finite nonzero s, got {s}")));
    }
    let ((lo, hi), kinks) = src.density_window()?;
    let mut edges: Vec<f64> = kinks.into_iter().chain([lo, hi]).filter(|k| *k != 0.0 && k.signum() == s.signum()).collect();
    edges.sort_by(f64::total_cmp);
    let opts = QuadOptions { abs_tol: 1e-300, rel_tol: 1e-10, max_intervals: 4000 };
    let inner_fail = std::cell::Cell::new(None);
    let inner = |v: f64| -> f64 {
        if v == 0.0 {
            return 0.0;
        }
        let breaks: Vec<f64> = edges.iter().map(|k| s / (k * v)).collect();
        let f = |u: f64| {
            if u == 0.0 {
                0.0
            } else {
                src.density(s / (u * v)).unwrap_or(0.0) / (u * u)
            }
        };
        match integrate_with_breaks(f, 0.0, 1.0, &breaks, &opts) {
            Ok(r) => r.value / (v * v * v),
            Err(e) => {
                inner_fail.set(Some(e));
                0.0
            }
        }
    };
    let outer_breaks: Vec<f64> = edges.iter().map(|k| s / k).collect();
    let r = integrate_with_breaks(inner, 0.0, 1.0, &outer_breaks, &opts)?;
    if let Some(e) = inner_fail.into_inner() {
        return Err(e);
    }
    Ok(s * s / src.half_variance() * r.value)
}

/// `∫ f_{X^L}` over the real line (should be 1).
pub fn equilibrium_density_mass(src: &SourceDistribution) -> Result<f64> {
    let (window, mut breaks) = match src.atom_list() {
        Some(atoms) => {
            let m = atoms.iter().map(|a| a.0.abs()).fold(0.0, f64::max);
            ((-m, m), atoms.iter().map(|a| a.0).collect::<Vec<_>>())
        }
        None => src.density_window()?,
    };
    breaks.push(0.0);
    let fail = std::cell::Cell::new(None);
    let r = integrate_with_breaks(
        |s| match equilibrium_density(s, src) {
            Ok(v) => v,
            Err(e) => {
                fail.set(Some(e));
                0.0
            }
        },
        window.0,
        window.1,
        &breaks,
        &QuadOptions::default().with_abs_tol(1e-11),
    )?;
    match fail.into_inner() {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

/// Monte Carlo estimate of `½E[f''(X^L)] - E[U f''(U X^z)]`, zero by the
/// zero-bias relation. The two sides use independent substreams of `seed`.
pub fn verify_zero_bias_relation(
    src: &SourceDistribution,
    f2: &dyn Fn(f64) -> f64,
    n: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two draws per side".into()));
    }
    let xl = sym_equilibrium_sample(src, n, substream_seed(seed, "zero-bias-relation/equilibrium", 0))?;
    let mut rng = stream(substream_seed(seed, "zero-bias-relation/zero-bias", 0));
    let mut rhs = Vec::with_capacity(n);
    for _ in 0..n {
        let xz = src.draw_zero_bias(&mut rng)?;
        let u = open01(&mut rng);
        rhs.push(u * f2(u * xz));
    }
    let lhs = mean_and_se(&xl.values, |x| 0.5 * f2(x));
    let rhs = mean_and_se(&rhs, |y| y);
    Ok(MonteCarloEstimate {
        value: lhs.value - rhs.value,
        std_error: lhs.std_error.hypot(rhs.std_error),
    })
}

/// `E|X - X^L|` under the independent coupling.
pub fn equilibrium_gap(src: &SourceDistribution, n: usize, seed: u64) -> Result<MonteCarloEstimate> {
    let xl = sym_equilibrium_sample(src, n, substream_seed(seed, "gap/equilibrium", 0))?;
    let mut rng = stream(substream_seed(seed, "gap/source", 0));
    let diffs: Vec<f64> = xl.values.iter().map(|&l| (src.draw(&mut rng) - l).abs()).collect();
    Ok(mean_and_se(&diffs, |d| d))
}

/// `E|X| + E|X|³/(6b²)`, the upper bound on `E|X - X^L|` for any coupling.
pub fn equilibrium_gap_bound(src: &SourceDistribution) -> f64 {
    src.abs_mean() + src.abs_third() / (6.0 * src.half_variance())
}

/// `d_BL(L(X), Laplace(0, b)) ≤ ((b+2)/b) E|X - X^L|`, `2b² = E[X²]`.
pub fn equilibrium_distance_bound(src: &SourceDistribution, gap: f64) -> f64 {
    let b = src.half_variance().sqrt();
    (b + 2.0) / b * gap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplace::LaplaceParams;
    use approx::assert_abs_diff_eq;

    fn rad() -> SourceDistribution {
        SourceDistribution::rademacher(2.0f64.sqrt()).unwrap()
    }

    #[test]
    fn empty_samples() {
        for s in [
            sgn_bias_sample(&rad(), 0, 1).unwrap(),
            sym_equilibrium_sample(&rad(), 0, 1).unwrap(),
            zero_bias_sample(&rad(), 0, 1).unwrap(),
        ] {
            assert!(s.values.is_empty());
        }
    }

    #[test]
    fn unsupported_source_errors() {
        let c = SourceDistribution::custom("opaque", |_| 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(sgn_bias_sample(&c, 0, 1), Err(Error::Unsupported(_))));
        assert!(matches!(sym_equilibrium_sample(&c, 5, 1), Err(Error::Unsupported(_))));
        assert!(matches!(zero_bias_sample(&c, 5, 1), Err(Error::Unsupported(_))));
        assert!(matches!(equilibrium_moment(2, &c), Err(Error::Unsupported(_))));
    }

    #[test]
    fn samples_are_reproducible() {
        let a = sym_equilibrium_sample(&rad(), 1000, 9).unwrap();
        let b = sym_equilibrium_sample(&rad(), 1000, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.provenance, Transform::SymmetricEquilibrium);
    }

    #[test]
    fn rademacher_sgn_bias_is_uniform() {
        // Kolmogorov distance to Uniform(-c, c).
        let c = 1.5;
        let mut v = sgn_bias_sample(&SourceDistribution::rademacher(c).unwrap(), 100_000, 4).unwrap().values;
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let d = v
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = (x + c) / (2.0 * c);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d <= 1.63 / n.sqrt(), "d_K {d}");
    }

    #[test]
    fn laplace_sgn_bias_has_balanced_signs() {
        let s = sgn_bias_sample(&SourceDistribution::laplace(1.0).unwrap(), 100_000, 2).unwrap();
        let e = mean_and_se(&s.values, f64::signum);
        assert!(e.within(0.0, 4.0));
    }

    #[test]
    fn equilibrium_moment_examples() {
        let b = 1.3;
        let l = SourceDistribution::laplace(b).unwrap();
        assert_abs_diff_eq!(equilibrium_moment(2, &l).unwrap(), 2.0 * b * b, epsilon = 1e-13);
        assert_eq!(equilibrium_moment(1, &rad()).unwrap(), 0.0);
        let r = SourceDistribution::rademacher(2.0f64.sqrt() * b).unwrap();
        assert_abs_diff_eq!(equilibrium_moment(2, &r).unwrap(), b * b / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn equilibrium_cf_examples() {
        let l = SourceDistribution::laplace(1.0).unwrap();
        assert_abs_diff_eq!(equilibrium_cf(1.0, &l).unwrap().re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(equilibrium_cf(0.0, &l).unwrap().re, 1.0, epsilon = 1e-15);
        // 1 - cos(√2), with cos(√2) = 0.15594369476537447...
        let v = equilibrium_cf(1.0, &rad()).unwrap();
        assert_abs_diff_eq!(v.re, 0.844_056_305_234_625_5, epsilon = 1e-15);
        assert_eq!(v.im, 0.0);
        // Series and closed form agree across the switchover.
        for src in [rad(), SourceDistribution::uniform(1.0).unwrap(), SourceDistribution::skewed_atoms(1.0).unwrap()] {
            let below = equilibrium_cf(0.999 * CF_SERIES_CUTOFF, &src).unwrap();
            let above = equilibrium_cf(1.001 * CF_SERIES_CUTOFF, &src).unwrap();
            assert!((below - above).norm() < 1e-7, "{}", src.label());
        }
    }

    #[test]
    fn laplace_is_a_fixed_point_of_the_cf_map() {
        for b in [0.5, 1.0, 2.0] {
            let src = SourceDistribution::laplace(b).unwrap();
            let lap = LaplaceParams::centered(b).unwrap();
            for t in [0.1, 0.5, 1.0, 3.0] {
                assert_abs_diff_eq!(equilibrium_cf(t, &src).unwrap().re, lap.char_fn(t).unwrap(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn equilibrium_density_examples() {
        let l = SourceDistribution::laplace(1.0).unwrap();
        assert_abs_diff_eq!(equilibrium_density(0.0, &l).unwrap(), 0.5, epsilon = 1e-12);
        let lap = LaplaceParams::centered(1.0).unwrap();
        for s in [-3.0, -0.4, 0.7, 2.0] {
            assert_abs_diff_eq!(equilibrium_density(s, &l).unwrap(), lap.pdf(s).unwrap(), epsilon = 1e-12);
        }
        let r = SourceDistribution::rademacher(1.0).unwrap();
        assert_eq!(equilibrium_density(1.5, &r).unwrap(), 0.0);
        assert_eq!(equilibrium_density(-1.0, &r).unwrap(), 0.0);
        let u = SourceDistribution::uniform(1.0).unwrap();
        assert_eq!(equilibrium_density(1.2, &u).unwrap(), 0.0);
        // Triangular density for Rademacher(±c): (c - |s|)/c².
        assert_abs_diff_eq!(equilibrium_density(0.25, &r).unwrap(), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn double_integral_form_matches_stop_loss_form() {
        let cases = [
            (SourceDistribution::laplace(1.0).unwrap(), vec![-2.0, -0.5, 0.3, 1.0, 4.0]),
            (SourceDistribution::uniform(1.5).unwrap(), vec![-1.2, -0.2, 0.6, 1.4]),
        ];
        for (src, points) in cases {
            for s in points {
                let a = equilibrium_density(s, &src).unwrap();
                let b = equilibrium_density_double_integral(s, &src).unwrap();
                assert!((a - b).abs() <= 1e-7, "{} s={s}: {a} vs {b}", src.label());
            }
        }
        let l = SourceDistribution::laplace(1.0).unwrap();
        assert!(equilibrium_density_double_integral(0.0, &l).is_err());
        // Close to the origin the double integral approaches pdf(0) = 1/2.
        let near = equilibrium_density_double_integral(1e-3, &l).unwrap();
        assert!((near - 0.5).abs() <= 1e-3);
        assert!(equilibrium_density_double_integral(0.5, &rad()).is_err());
    }

    #[test]
    fn equilibrium_density_integrates_to_one() {
        for src in [
            SourceDistribution::laplace(1.0).unwrap(),
            SourceDistribution::uniform(2.0).unwrap(),
            rad(),
            SourceDistribution::skewed_atoms(1.0).unwrap(),
        ] {
            let m = equilibrium_density_mass(&src).unwrap();
            assert!((m - 1.0).abs() <= 1e-6, "{}: {m}", src.label());
        }
    }

    #[test]
    fn equilibrium_density_mean_matches_moment_formula_for_skewed_source() {
        let src = SourceDistribution::skewed_atoms(1.0).unwrap();
        let r = integrate_with_breaks(
            |s| s * equilibrium_density(s, &src).unwrap(),
            -2.0,
            3.0,
            &[-2.0, 0.0, 1.0, 3.0],
            &QuadOptions::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(r.value, equilibrium_moment(1, &src).unwrap(), epsilon = 1e-10);
    }

    #[test]
    fn zero_bias_relation_trivial_case() {
        let e = verify_zero_bias_relation(&rad(), &|_| 1.0, 10_000, 5).unwrap();
        // ½ - E[U] with E[U] estimated; within noise of zero.
        assert!(e.within(0.0, 4.0));
        assert!(verify_zero_bias_relation(&rad(), &|_| 1.0, 1, 5).is_err());
    }

    #[test]
    fn gap_bound_formula() {
        // Rademacher(±√2): E|X| = √2, ρ = 2√2, b² = 1.
        let b = equilibrium_gap_bound(&rad());
        assert_abs_diff_eq!(b, 2.0f64.sqrt() + 2.0 * 2.0f64.sqrt() / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(equilibrium_distance_bound(&rad(), 1.0), 3.0, epsilon = 1e-15);
    }
}
