//! The Laplace(a, b) law: density, distribution function, quantile,
//! inverse-transform sampling, central moments and characteristic function.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::quadrature::{integrate_with_breaks, QuadOptions};
use crate::rng::{open01, stream};

/// Half-width, in units of `b`, beyond which Laplace mass is ignored by
/// quadrature (the remaining mass is `exp(-40) ≈ 4.2e-18`).
pub const TAIL_WIDTH: f64 = 40.0;

/// Location/scale parameters of a Laplace law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceParams {
    a: f64,
    b: f64,
}

impl LaplaceParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidParameter(format!("location must be finite, got {a}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParameter(format!("scale must be positive and finite, got {b}")));
        }
        Ok(Self { a, b })
    }

    /// Laplace(0, b).
    pub fn centered(b: f64) -> Result<Self> {
        Self::new(0.0, b)
    }

    pub fn location(&self) -> f64 {
        self.a
    }

    pub fn scale(&self) -> f64 {
        self.b
    }

    pub fn variance(&self) -> f64 {
        2.0 * self.b * self.b
    }

    /// Supremum of the density, `1/(2b)`.
    pub fn density_sup(&self) -> f64 {
        0.5 / self.b
    }

    pub fn pdf(&self, w: f64) -> Result<f64> {
        ensure_finite(w, "w")?;
        Ok(self.pdf_unchecked(w))
    }

    #[inline]
    pub(crate) fn pdf_unchecked(&self, w: f64) -> f64 {
        0.5 / self.b * (-(w - self.a).abs() / self.b).exp()
    }

    pub fn cdf(&self, w: f64) -> Result<f64> {
        ensure_finite(w, "w")?;
        Ok(self.cdf_unchecked(w))
    }

    #[inline]
    pub(crate) fn cdf_unchecked(&self, w: f64) -> f64 {
        let z = (w - self.a) / self.b;
        if z <= 0.0 {
            0.5 * z.exp()
        } else {
            1.0 - 0.5 * (-z).exp()
        }
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {q}")));
        }
        Ok(self.quantile_unchecked(q))
    }

    #[inline]
    pub(crate) fn quantile_unchecked(&self, q: f64) -> f64 {
        if q <= 0.5 {
            self.a + self.b * (2.0 * q).ln()
        } else {
            self.a - self.b * (2.0 * (1.0 - q)).ln()
        }
    }

    /// `∫_0^u Q(v) dv`, the antiderivative of the quantile function
    /// (`G(0) = 0`, `G(1) = a`).
    pub(crate) fn quantile_antiderivative(&self, u: f64) -> f64 {
        let m = u.min(1.0 - u);
        let tail = if m <= 0.0 { 0.0 } else { m * (2.0 * m).ln() - m };
        self.a * u + self.b * tail
    }

    /// One draw by inverse transform from an existing generator.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile_unchecked(open01(rng))
    }

    /// `n` i.i.d. draws; the stream depends only on `seed`, so at `a = 0`
    /// draws for scale `c·b` are exactly `c` times those for `b`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed);
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }

    /// Central moment `E[W^k]`: zero for odd `k`, `b^k k!` for even `k`.
    pub fn moment(&self, k: u32) -> Result<f64> {
        if self.a != 0.0 {
            return Err(Error::Unsupported("moments are only provided for location 0".into()));
        }
        if k % 2 == 1 {
            return Ok(0.0);
        }
        let factorial: f64 = (1..=k).map(f64::from).product();
        Ok(self.b.powi(k as i32) * factorial)
    }

    /// Characteristic function `1/(1 + b²t²)` (location 0 only).
    pub fn char_fn(&self, t: f64) -> Result<f64> {
        if self.a != 0.0 {
            return Err(Error::Unsupported("characteristic function is only provided for location 0".into()));
        }
        ensure_finite(t, "t")?;
        Ok(1.0 / (1.0 + self.b * self.b * t * t))
    }

    /// `E[f(W)]` by adaptive quadrature over `a ± 40b`, split at `a` and at
    /// the supplied kink points.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F, kinks: &[f64], opts: &QuadOptions) -> Result<f64> {
        let lo = self.a - TAIL_WIDTH * self.b;
        let hi = self.a + TAIL_WIDTH * self.b;
        let mut breaks = kinks.to_vec();
        breaks.push(self.a);
        let r = integrate_with_breaks(|w| f(w) * self.pdf_unchecked(w), lo, hi, &breaks, opts)?;
        Ok(r.value)
    }
}
