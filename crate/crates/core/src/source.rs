//! Summand laws: mean zero, `P{X<0} = P{X>0} = 1/2`, finite variance.
//!
//! For each built-in law the sgn-bias variable `Y` (density `|y| f_X(y)/E|X|`),
//! the equilibrium reweighting `Z` (density `|z| f_{X^(P)}(z)/E|X^(P)|`) and
//! the zero-bias law are derived in closed form:
//!
//! | law              | `Y`                 | `Z`                       | zero bias                    |
//! |------------------|---------------------|---------------------------|------------------------------|
//! | atoms `x_k, p_k` | `x_k` w.p. `∝ p_k|x_k|` | `x_k √V` w.p. `∝ p_k x_k²` | `x_k U` w.p. `∝ p_k x_k²`  |
//! | Uniform(-c, c)   | `±c √V`             | `±c B`, `B ~ Beta(2,2)`   | `c (2B - 1)`                 |
//! | Laplace(0, b)    | `±Γ(2, b)`          | `±Γ(2, b)`                | `½ Laplace(0,b) + ½ (±Γ(2,b))` |
//!
//! (`U, V ~ Uniform(0,1)`.) For atoms, `X^(P) = U₁Y` is a mixture of
//! uniforms on `(0, x_k)`, which is what makes the `|z|` reweighting
//! well defined even though `X` itself has no density.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::laplace::TAIL_WIDTH;
use crate::rng::{open01, StreamRng};

type Sampler = Arc<dyn Fn(&mut StreamRng) -> f64 + Send + Sync>;

/// Tolerance for the sign-balance and mean-zero checks on atom lists.
const ATOM_TOL: f64 = 1e-12;

#[derive(Clone)]
enum Law {
    Atoms {
        atoms: Vec<(f64, f64)>,
        cum_prob: Vec<f64>,
        cum_abs: Vec<f64>,
        cum_sq: Vec<f64>,
    },
    Uniform { c: f64 },
    Laplace { b: f64 },
    Custom { sampler: Sampler },
}

/// Shape of a built-in law, rescaled to a requested variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceShape {
    Rademacher,
    Uniform,
    Laplace,
}

/// A summand law together with `E[X²]`, `E|X|` and `E|X|³`.
#[derive(Clone)]
pub struct SourceDistribution {
    label: String,
    law: Law,
    sigma2: f64,
    abs_mean: f64,
    abs_third: f64,
}

impl fmt::Debug for SourceDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceDistribution")
            .field("label", &self.label)
            .field("sigma2", &self.sigma2)
            .field("abs_mean", &self.abs_mean)
            .field("abs_third", &self.abs_third)
            .finish()
    }
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    if let Some(last) = out.last().copied() {
        for v in &mut out {
            *v /= last;
        }
    }
    out
}

fn pick(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&c| c < u).min(cum.len() - 1)
}

fn positive(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::InvalidParameter(format!("{what} must be positive and finite, got {x}")))
    }
}

impl SourceDistribution {
    /// `±c` with probability ½ each.
    pub fn rademacher(c: f64) -> Result<Self> {
        let c = positive(c, "Rademacher magnitude")?;
        let mut s = Self::atoms(vec![(-c, 0.5), (c, 0.5)])?;
        s.label = format!("rademacher({c})");
        Ok(s)
    }

    /// Finitely many atoms `(value, probability)`. The law must have mean
    /// zero, no mass at zero and probability ½ on each side of zero.
    pub fn atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("atom list is empty".into()));
        }
        if atoms.iter().any(|&(x, p)| !(x.is_finite() && x != 0.0 && p.is_finite() && p > 0.0)) {
            return Err(Error::InvalidParameter("atoms need nonzero finite values and positive probabilities".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let neg: f64 = atoms.iter().filter(|a| a.0 < 0.0).map(|a| a.1).sum();
        let mean: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
        let scale: f64 = atoms.iter().map(|a| a.0.abs() * a.1).sum();
        if (total - 1.0).abs() > ATOM_TOL {
            return Err(Error::InvalidParameter(format!("atom probabilities sum to {total}")));
        }
        if (neg - 0.5).abs() > ATOM_TOL {
            return Err(Error::InvalidParameter(format!("P{{X<0}} = {neg}, must be 1/2")));
        }
        if mean.abs() > ATOM_TOL * scale.max(1.0) {
            return Err(Error::InvalidParameter(format!("atom law has mean {mean}, must be 0")));
        }
        let sigma2 = atoms.iter().map(|a| a.1 * a.0 * a.0).sum();
        let abs_mean = scale;
        let abs_third = atoms.iter().map(|a| a.1 * a.0.abs().powi(3)).sum();
        let cum_prob = cumulative(atoms.iter().map(|a| a.1));
        let cum_abs = cumulative(atoms.iter().map(|a| a.1 * a.0.abs()));
        let cum_sq = cumulative(atoms.iter().map(|a| a.1 * a.0 * a.0));
        let label = format!(
            "atoms[{}]",
            atoms.iter().map(|(x, p)| format!("{x}:{p}")).collect::<Vec<_>>().join(",")
        );
        Ok(Self {
            label,
            law: Law::Atoms { atoms, cum_prob, cum_abs, cum_sq },
            sigma2,
            abs_mean,
            abs_third,
        })
    }

    /// A sign-balanced but asymmetric three-atom law:
    /// `-2c` w.p. ½, `c` w.p. ¼, `3c` w.p. ¼.
    pub fn skewed_atoms(c: f64) -> Result<Self> {
        let c = positive(c, "atom scale")?;
        let mut s = Self::atoms(vec![(-2.0 * c, 0.5), (c, 0.25), (3.0 * c, 0.25)])?;
        s.label = format!("skewed({c})");
        Ok(s)
    }

    /// Uniform on `(-c, c)`.
    pub fn uniform(c: f64) -> Result<Self> {
        let c = positive(c, "uniform half-width")?;
        Ok(Self {
            label: format!("uniform({c})"),
            law: Law::Uniform { c },
            sigma2: c * c / 3.0,
            abs_mean: c / 2.0,
            abs_third: c.powi(3) / 4.0,
        })
    }

    /// Laplace(0, b).
    pub fn laplace(b: f64) -> Result<Self> {
        let b = positive(b, "Laplace scale")?;
        Ok(Self {
            label: format!("laplace({b})"),
            law: Law::Laplace { b },
            sigma2: 2.0 * b * b,
            abs_mean: b,
            abs_third: 6.0 * b.powi(3),
        })
    }

    /// Built-in shape rescaled so that `E[X²] = variance`.
    pub fn with_variance(shape: SourceShape, variance: f64) -> Result<Self> {
        let v = positive(variance, "variance")?;
        match shape {
            SourceShape::Rademacher => Self::rademacher(v.sqrt()),
            SourceShape::Uniform => Self::uniform((3.0 * v).sqrt()),
            SourceShape::Laplace => Self::laplace((v / 2.0).sqrt()),
        }
    }

    /// A law known only through a sampler and its moments. Transform
    /// samplers reject such sources.
    pub fn custom(
        label: impl Into<String>,
        sampler: impl Fn(&mut StreamRng) -> f64 + Send + Sync + 'static,
        sigma2: f64,
        abs_mean: f64,
        abs_third: f64,
    ) -> Result<Self> {
        positive(sigma2, "sigma2")?;
        positive(abs_mean, "abs_mean")?;
        if abs_third.is_nan() || abs_third <= 0.0 {
            return Err(Error::InvalidParameter("abs_third must be positive (or +inf)".into()));
        }
        Ok(Self {
            label: label.into(),
            law: Law::Custom { sampler: Arc::new(sampler) },
            sigma2,
            abs_mean,
            abs_third,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `E[X²]`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `α = E|X|`.
    pub fn abs_mean(&self) -> f64 {
        self.abs_mean
    }

    /// `ρ = E|X|³`.
    pub fn abs_third(&self) -> f64 {
        self.abs_third
    }

    /// `β = E[X²]/(2α) = E|X^(P)|`.
    pub fn beta(&self) -> f64 {
        self.sigma2 / (2.0 * self.abs_mean)
    }

    /// `b² = E[X²]/2`, the squared scale of the matching Laplace law.
    pub fn half_variance(&self) -> f64 {
        self.sigma2 / 2.0
    }

    /// Whether the law is symmetric about zero (so its characteristic
    /// function is real).
    pub fn is_symmetric(&self) -> bool {
        match &self.law {
            Law::Atoms { atoms, .. } => atoms.iter().all(|&(x, p)| {
                atoms.iter().any(|&(y, q)| (y + x).abs() <= ATOM_TOL * x.abs() && (p - q).abs() <= ATOM_TOL)
            }),
            Law::Uniform { .. } | Law::Laplace { .. } => true,
            Law::Custom { .. } => false,
        }
    }

    pub fn draw(&self, rng: &mut StreamRng) -> f64 {
        match &self.law {
            Law::Atoms { atoms, cum_prob, .. } => atoms[pick(cum_prob, open01(rng))].0,
            Law::Uniform { c } => c * (2.0 * open01(rng) - 1.0),
            Law::Laplace { b } => {
                let u = open01(rng);
                if u <= 0.5 {
                    b * (2.0 * u).ln()
                } else {
                    -b * (2.0 * (1.0 - u)).ln()
                }
            }
            Law::Custom { sampler } => sampler(rng),
        }
    }

    fn unsupported(&self, what: &str) -> Error {
        Error::Unsupported(format!("{what} is not available for source {}", self.label))
    }

    /// `E[X^k]`, when known.
    pub fn moment(&self, k: u32) -> Result<f64> {
        match &self.law {
            Law::Atoms { atoms, .. } => Ok(atoms.iter().map(|&(x, p)| p * x.powi(k as i32)).sum()),
            Law::Uniform { c } => Ok(if k % 2 == 1 { 0.0 } else { c.powi(k as i32) / f64::from(k + 1) }),
            Law::Laplace { b } => {
                if k % 2 == 1 {
                    Ok(0.0)
                } else {
                    Ok(b.powi(k as i32) * (1..=k).map(f64::from).product::<f64>())
                }
            }
            Law::Custom { .. } => Err(self.unsupported("moment table")),
        }
    }

    /// Characteristic function `E[e^{itX}]`, when known.
    pub fn cf(&self, t: f64) -> Result<Complex64> {
        match &self.law {
            Law::Atoms { atoms, .. } => Ok(atoms
                .iter()
                .map(|&(x, p)| Complex64::new((t * x).cos(), (t * x).sin()) * p)
                .sum()),
            Law::Uniform { c } => {
                let z = t * c;
                let re = if z.abs() < 1e-4 { 1.0 - z * z / 6.0 } else { z.sin() / z };
                Ok(Complex64::new(re, 0.0))
            }
            Law::Laplace { b } => Ok(Complex64::new(1.0 / (1.0 + b * b * t * t), 0.0)),
            Law::Custom { .. } => Err(self.unsupported("characteristic function")),
        }
    }

    /// Density at `x`, for absolutely continuous built-ins.
    pub fn density(&self, x: f64) -> Result<f64> {
        match &self.law {
            Law::Uniform { c } => Ok(if x.abs() < *c { 0.5 / c } else { 0.0 }),
            Law::Laplace { b } => Ok(0.5 / b * (-x.abs() / b).exp()),
            _ => Err(self.unsupported("density")),
        }
    }

    /// Quadrature window and kink points of the density.
    pub(crate) fn density_window(&self) -> Result<((f64, f64), Vec<f64>)> {
        match &self.law {
            Law::Uniform { c } => Ok(((-c, *c), vec![0.0])),
            Law::Laplace { b } => Ok(((-TAIL_WIDTH * b, TAIL_WIDTH * b), vec![0.0])),
            _ => Err(self.unsupported("density")),
        }
    }

    pub(crate) fn atom_list(&self) -> Option<&[(f64, f64)]> {
        match &self.law {
            Law::Atoms { atoms, .. } => Some(atoms),
            _ => None,
        }
    }

    /// One draw of `Y`, density `|y| f_X(y) / E|X|`.
    pub fn draw_sgn_bias_base(&self, rng: &mut StreamRng) -> Result<f64> {
        match &self.law {
            Law::Atoms { atoms, cum_abs, .. } => Ok(atoms[pick(cum_abs, open01(rng))].0),
            Law::Uniform { c } => Ok(random_sign(rng) * c * open01(rng).sqrt()),
            Law::Laplace { b } => Ok(random_sign(rng) * gamma2(rng, *b)),
            Law::Custom { .. } => Err(self.unsupported("sgn-bias recipe")),
        }
    }

    /// One draw of `Z`, the `|z|`-reweighting of `X^(P)`.
    pub fn draw_equilibrium_base(&self, rng: &mut StreamRng) -> Result<f64> {
        match &self.law {
            Law::Atoms { atoms, cum_sq, .. } => {
                let x = atoms[pick(cum_sq, open01(rng))].0;
                Ok(x * open01(rng).sqrt())
            }
            Law::Uniform { c } => Ok(random_sign(rng) * c * beta22(rng)),
            Law::Laplace { b } => Ok(random_sign(rng) * gamma2(rng, *b)),
            Law::Custom { .. } => Err(self.unsupported("equilibrium recipe")),
        }
    }

    /// One draw of the zero-bias variable `X^z`.
    pub fn draw_zero_bias(&self, rng: &mut StreamRng) -> Result<f64> {
        match &self.law {
            Law::Atoms { atoms, cum_sq, .. } => {
                let x = atoms[pick(cum_sq, open01(rng))].0;
                Ok(x * open01(rng))
            }
            Law::Uniform { c } => Ok(c * (2.0 * beta22(rng) - 1.0)),
            Law::Laplace { b } => {
                if rng.random::<bool>() {
                    let u = open01(rng);
                    Ok(if u <= 0.5 { b * (2.0 * u).ln() } else { -b * (2.0 * (1.0 - u)).ln() })
                } else {
                    Ok(random_sign(rng) * gamma2(rng, *b))
                }
            }
            Law::Custom { .. } => Err(self.unsupported("zero-bias recipe")),
        }
    }
}

#[inline]
fn random_sign(rng: &mut StreamRng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Gamma(2, b) as a sum of two exponentials.
#[inline]
fn gamma2(rng: &mut StreamRng, b: f64) -> f64 {
    -b * (open01(rng).ln() + open01(rng).ln())
}

/// Beta(2, 2) as the median of three uniforms.
#[inline]
fn beta22(rng: &mut StreamRng) -> f64 {
    let (a, b, c) = (open01(rng), open01(rng), open01(rng));
    a.max(b).min(a.min(b).max(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn atom_validation() {
        assert!(SourceDistribution::atoms(vec![]).is_err());
        assert!(SourceDistribution::atoms(vec![(-1.0, 0.5), (2.0, 0.5)]).is_err());
        assert!(SourceDistribution::atoms(vec![(-1.0, 0.25), (1.0, 0.75)]).is_err());
        assert!(SourceDistribution::atoms(vec![(0.0, 0.5), (1.0, 0.5)]).is_err());
        assert!(SourceDistribution::skewed_atoms(1.0).is_ok());
        assert!(SourceDistribution::rademacher(-1.0).is_err());
    }

    #[test]
    fn summary_moments() {
        let r = SourceDistribution::rademacher(2.0f64.sqrt()).unwrap();
        assert_abs_diff_eq!(r.sigma2(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.abs_third(), 2.0 * 2.0f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.beta(), 2.0 / (2.0 * 2.0f64.sqrt()), epsilon = 1e-15);
        let u = SourceDistribution::uniform(3.0).unwrap();
        assert_abs_diff_eq!(u.moment(2).unwrap(), u.sigma2(), epsilon = 1e-15);
        let l = SourceDistribution::laplace(0.5).unwrap();
        assert_abs_diff_eq!(l.moment(4).unwrap(), 24.0 * 0.0625, epsilon = 1e-15);
        for shape in [SourceShape::Rademacher, SourceShape::Uniform, SourceShape::Laplace] {
            let s = SourceDistribution::with_variance(shape, 3.5).unwrap();
            assert_abs_diff_eq!(s.sigma2(), 3.5, epsilon = 1e-14);
            assert_abs_diff_eq!(s.moment(2).unwrap(), 3.5, epsilon = 1e-13);
        }
    }

    #[test]
    fn symmetry_flags() {
        assert!(SourceDistribution::rademacher(1.0).unwrap().is_symmetric());
        assert!(!SourceDistribution::skewed_atoms(1.0).unwrap().is_symmetric());
    }

    #[test]
    fn built_in_sources_are_sign_balanced() {
        for src in [
            SourceDistribution::rademacher(1.3).unwrap(),
            SourceDistribution::uniform(2.0).unwrap(),
            SourceDistribution::laplace(0.7).unwrap(),
            SourceDistribution::skewed_atoms(0.5).unwrap(),
        ] {
            let mut rng = stream(11);
            let xs: Vec<f64> = (0..200_000).map(|_| src.draw(&mut rng)).collect();
            let signs: Vec<f64> = xs.iter().map(|x| x.signum()).collect();
            let (ms, ses) = mean_se(&signs);
            assert!(ms.abs() <= 4.0 * ses, "{}: sign mean {ms}", src.label());
            let (m, se) = mean_se(&xs);
            assert!(m.abs() <= 4.0 * se, "{}: mean {m}", src.label());
            let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
            let (m2, se2) = mean_se(&sq);
            assert!((m2 - src.sigma2()).abs() <= 4.0 * se2 + 1e-9, "{}: E X^2 {m2}", src.label());
        }
    }

    #[test]
    fn beta22_has_right_moments() {
        let mut rng = stream(3);
        let xs: Vec<f64> = (0..200_000).map(|_| beta22(&mut rng)).collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 0.5).abs() <= 4.0 * se);
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (m2, se2) = mean_se(&sq);
        assert!((m2 - 0.3).abs() <= 4.0 * se2);
    }

    #[test]
    fn custom_source_has_no_recipes() {
        let s = SourceDistribution::custom("coin", |r| if r.random::<bool>() { 1.0 } else { -1.0 }, 1.0, 1.0, 1.0).unwrap();
        let mut rng = stream(1);
        assert!(matches!(s.draw_sgn_bias_base(&mut rng), Err(Error::Unsupported(_))));
        assert!(matches!(s.draw_equilibrium_base(&mut rng), Err(Error::Unsupported(_))));
        assert!(matches!(s.draw_zero_bias(&mut rng), Err(Error::Unsupported(_))));
        assert!(s.moment(2).is_err());
    }

    #[test]
    fn uniform_cf_near_zero_is_continuous() {
        let u = SourceDistribution::uniform(1.0).unwrap();
        for t in [0.999e-4, 1.001e-4] {
            assert!((u.cf(t).unwrap().re - t.sin() / t).abs() < 1e-15);
        }
    }
}
