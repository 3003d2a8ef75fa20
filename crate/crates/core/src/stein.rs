//! The second-order Stein equation `g(x) - b² g''(x) = h(x) - E[h(W)]`,
//! `g(0) = 0`, for `W ~ Laplace(0, b)` and bounded-Lipschitz test functions.
//!
//! The bounded solution is
//!
//! ```text
//! g(x) = v¹(x) e^{x/b} + v²(x) e^{-x/b}
//! v¹(x) e^{x/b}  = (1/2b) ∫_x^∞  e^{-(y-x)/b} h̃(y) dy
//! v²(x) e^{-x/b} = (1/2b) ∫_-∞^x e^{-(x-y)/b} h̃(y) dy
//! ```
//!
//! Both tails are integrated with the exponential factor already folded in,
//! so no `e^{±x/b}` is ever formed on its own.
//!
//! Note: one of the published bound statements names the metric `d_BW`; the
//! surrounding argument is about `d_BL`, which is what this crate uses.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::laplace::{LaplaceParams, TAIL_WIDTH};
use crate::quadrature::{integrate_with_breaks, QuadOptions};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A member of the bounded-Lipschitz ball: `‖h‖∞ ≤ 1`, `Lip(h) ≤ 1`.
///
/// Besides `h` itself a test function carries its almost-everywhere
/// derivative and the points where that derivative jumps; quadrature splits
/// at those points.
#[derive(Clone)]
pub struct TestFunction {
    label: String,
    eval: RealFn,
    deriv: RealFn,
    sup_bound: f64,
    lip_const: f64,
    kinks: Vec<f64>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("label", &self.label)
            .field("sup_bound", &self.sup_bound)
            .field("lip_const", &self.lip_const)
            .field("kinks", &self.kinks)
            .finish()
    }
}

impl TestFunction {
    /// Wrap a function with its declared sup-norm and Lipschitz bounds.
    /// Fails unless both bounds are at most 1.
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sup_bound: f64,
        lip_const: f64,
        kinks: Vec<f64>,
    ) -> Result<Self> {
        let label = label.into();
        if !(sup_bound.is_finite() && (0.0..=1.0).contains(&sup_bound)) {
            return Err(Error::Contract(format!("{label}: sup bound {sup_bound} exceeds 1")));
        }
        if !(lip_const.is_finite() && (0.0..=1.0).contains(&lip_const)) {
            return Err(Error::Contract(format!("{label}: Lipschitz constant {lip_const} exceeds 1")));
        }
        if kinks.iter().any(|k| !k.is_finite()) {
            return Err(Error::Contract(format!("{label}: kink points must be finite")));
        }
        Ok(Self {
            label,
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
            sup_bound,
            lip_const,
            kinks,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn lip_const(&self) -> f64 {
        self.lip_const
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        (self.deriv)(x)
    }

    /// Checks the declared bounds against values on a grid. Returns the
    /// observed (sup, Lipschitz) pair.
    pub fn probe_bounds(&self, grid: &[f64]) -> (f64, f64) {
        let mut sup: f64 = 0.0;
        let mut lip: f64 = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        for &x in grid {
            let y = self.eval(x);
            sup = sup.max(y.abs());
            if let Some((px, py)) = prev {
                if x > px {
                    lip = lip.max((y - py).abs() / (x - px));
                }
            }
            prev = Some((x, y));
        }
        (sup, lip)
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(format!("const({c})"), move |_| c, |_| 0.0, c.abs(), 0.0, vec![])
    }

    pub fn sine() -> Self {
        Self::new("sin", f64::sin, f64::cos, 1.0, 1.0, vec![]).expect("sin is in the ball")
    }

    pub fn cosine() -> Self {
        Self::new("cos", f64::cos, |x: f64| -x.sin(), 1.0, 1.0, vec![]).expect("cos is in the ball")
    }

    /// `sin(ω x + φ)` for `|ω| ≤ 1`.
    pub fn sinusoid(omega: f64, phase: f64) -> Result<Self> {
        Self::new(
            format!("sin({omega}x+{phase})"),
            move |x| (omega * x + phase).sin(),
            move |x| omega * (omega * x + phase).cos(),
            1.0,
            omega.abs(),
            vec![],
        )
    }

    pub fn tanh() -> Self {
        Self::new("tanh", f64::tanh, |x: f64| 1.0 / x.cosh().powi(2), 1.0, 1.0, vec![])
            .expect("tanh is in the ball")
    }

    /// `clamp(x - c, -1, 1)`.
    pub fn shifted_clamp(c: f64) -> Self {
        Self::new(
            format!("clamp(x-{c})"),
            move |x| (x - c).clamp(-1.0, 1.0),
            move |x| if (x - c).abs() < 1.0 { 1.0 } else { 0.0 },
            1.0,
            1.0,
            vec![c - 1.0, c + 1.0],
        )
        .expect("clamp is in the ball")
    }

    pub fn clamp_unit() -> Self {
        let mut h = Self::shifted_clamp(0.0);
        h.label = "clamp".into();
        h
    }

    /// `ε·h_{x,ε}`: the smoothed indicator of `(-∞, x]` with a linear ramp
    /// on `(x, x+ε]`, scaled by `ε` so that it is 1-Lipschitz. Requires
    /// `0 < ε ≤ 1`.
    pub fn smoothed_indicator(x0: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0 && x0.is_finite()) {
            return Err(Error::InvalidParameter(format!("smoothed indicator needs 0 < eps <= 1, got {eps}")));
        }
        Self::new(
            format!("ramp({x0},{eps})"),
            move |z| (x0 + eps - z).clamp(0.0, eps),
            move |z| if z > x0 && z < x0 + eps { -1.0 } else { 0.0 },
            eps,
            1.0,
            vec![x0, x0 + eps],
        )
    }

    /// The family used to exercise the Stein solution: constants, `sin`,
    /// `cos`, `tanh`, `clamp`, and ramps at `x ∈ {-2..2}`, `ε ∈ {0.1, 0.5, 1}`.
    pub fn stein_family() -> Vec<Self> {
        let mut family = vec![
            Self::constant(1.0).expect("valid"),
            Self::constant(-0.5).expect("valid"),
            Self::sine(),
            Self::cosine(),
            Self::tanh(),
            Self::clamp_unit(),
        ];
        for x0 in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            for eps in [0.1, 0.5, 1.0] {
                family.push(Self::smoothed_indicator(x0, eps).expect("valid"));
            }
        }
        family
    }

    /// A larger family for lower-bounding `d_BL` against Laplace(0, b):
    /// ramps and shifted clamps on a grid scaled by `b`, plus sinusoids.
    pub fn bl_family(b: f64) -> Vec<Self> {
        let mut family = vec![Self::tanh(), Self::clamp_unit()];
        for i in -16..=16 {
            let c = 0.25 * f64::from(i) * b;
            family.push(Self::shifted_clamp(c));
            for eps in [0.25, 0.5, 1.0] {
                family.push(Self::smoothed_indicator(c, eps).expect("valid"));
            }
        }
        for omega in [0.25, 0.5, 0.75, 1.0] {
            family.push(Self::sinusoid(omega, 0.0).expect("valid"));
            family.push(Self::sinusoid(omega, std::f64::consts::FRAC_PI_2).expect("valid"));
        }
        family
    }
}

/// `E[h(W)]` for `W ~ Laplace(0, b)`.
pub fn target_expectation(h: &TestFunction, b: f64) -> Result<f64> {
    target_expectation_with(h, b, &QuadOptions::default())
}

fn target_expectation_with(h: &TestFunction, b: f64, opts: &QuadOptions) -> Result<f64> {
    let lap = LaplaceParams::centered(b)?;
    // Normalise by the mass kept inside the truncation window.
    let num = lap.expectation(|w| h.eval(w), h.kinks(), opts)?;
    let mass = lap.expectation(|_| 1.0, &[], opts)?;
    Ok(num / mass)
}

/// Values of the solution and its first three derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteinValues {
    pub g: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

/// Bounded solution of the Stein equation for a fixed `(h, b)`.
#[derive(Debug, Clone)]
pub struct SteinSolution {
    h: TestFunction,
    b: f64,
    wh: f64,
    opts: QuadOptions,
}

/// Solve the Stein equation for `h` and scale `b`.
pub fn solve(h: &TestFunction, b: f64) -> Result<SteinSolution> {
    let opts = QuadOptions::default();
    let wh = target_expectation_with(h, b, &opts)?;
    Ok(SteinSolution { h: h.clone(), b, wh, opts })
}

impl SteinSolution {
    pub fn test_function(&self) -> &TestFunction {
        &self.h
    }

    pub fn scale(&self) -> f64 {
        self.b
    }

    /// `E[h(W)]`.
    pub fn target_value(&self) -> f64 {
        self.wh
    }

    #[inline]
    pub fn h_tilde(&self, x: f64) -> f64 {
        self.h.eval(x) - self.wh
    }

    /// `(v¹(x)e^{x/b}, v²(x)e^{-x/b})`, each as `½∫_0^40 e^{-s} h̃(x ± b s) ds`.
    fn tails(&self, x: f64) -> Result<(f64, f64)> {
        let b = self.b;
        let upper_breaks: Vec<f64> = self.h.kinks().iter().map(|k| (k - x) / b).collect();
        let lower_breaks: Vec<f64> = self.h.kinks().iter().map(|k| (x - k) / b).collect();
        let up = integrate_with_breaks(
            |s| (-s).exp() * self.h_tilde(x + b * s),
            0.0,
            TAIL_WIDTH,
            &upper_breaks,
            &self.opts,
        )?;
        let down = integrate_with_breaks(
            |s| (-s).exp() * self.h_tilde(x - b * s),
            0.0,
            TAIL_WIDTH,
            &lower_breaks,
            &self.opts,
        )?;
        Ok((0.5 * up.value, 0.5 * down.value))
    }

    /// `g, g', g'', g'''` at `x`.
    pub fn evaluate(&self, x: f64) -> Result<SteinValues> {
        let (upper, lower) = self.tails(x)?;
        let b = self.b;
        let b2 = b * b;
        Ok(SteinValues {
            g: upper + lower,
            g1: (upper - lower) / b,
            g2: (-self.h_tilde(x) + upper + lower) / b2,
            g3: -self.h.deriv(x) / b2 + (upper - lower) / (b2 * b),
        })
    }

    pub fn g(&self, x: f64) -> Result<f64> {
        self.evaluate(x).map(|v| v.g)
    }

    pub fn g1(&self, x: f64) -> Result<f64> {
        self.evaluate(x).map(|v| v.g1)
    }

    pub fn g2(&self, x: f64) -> Result<f64> {
        self.evaluate(x).map(|v| v.g2)
    }

    pub fn g3(&self, x: f64) -> Result<f64> {
        self.evaluate(x).map(|v| v.g3)
    }
}

/// `g(x) - b² g''(x) - h̃(x)`.
pub fn residual(sol: &SteinSolution, x: f64) -> Result<f64> {
    let v = sol.evaluate(x)?;
    Ok(v.g - sol.b * sol.b * v.g2 - sol.h_tilde(x))
}

/// Grid over `[-40b, 40b]` with step `b/20`.
pub fn standard_grid(b: f64) -> Vec<f64> {
    let steps = (2.0 * TAIL_WIDTH * 20.0) as i64;
    (0..=steps).map(|i| b * (-TAIL_WIDTH + i as f64 / 20.0)).collect()
}

/// Observed maxima of the solution on a grid, compared against the
/// sup-norm limits `2`, `2/b`, `4/b²` and the Lipschitz limit `(b+2)/b³` of
/// `g''`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCertificate {
    pub label: String,
    pub b: f64,
    pub g_at_zero: f64,
    pub max_abs_g: f64,
    pub max_abs_g1: f64,
    pub max_abs_g2: f64,
    pub max_g2_slope: f64,
    pub max_abs_residual: f64,
    pub limit_g: f64,
    pub limit_g1: f64,
    pub limit_g2: f64,
    pub limit_g2_lip: f64,
    pub pass: bool,
}

/// Slack added to every certificate limit.
pub const CERTIFICATE_SLACK: f64 = 1e-9;

pub fn certify_bounds(sol: &SteinSolution, grid: &[f64]) -> Result<BoundCertificate> {
    let b = sol.b;
    let (Some(&first), Some(&last)) = (grid.first(), grid.last()) else {
        return Err(Error::Contract("certificate grid is empty".into()));
    };
    let span = TAIL_WIDTH * b;
    if first > -span * (1.0 - 1e-12) || last < span * (1.0 - 1e-12) {
        return Err(Error::Contract(format!("grid must span [-{span}, {span}]")));
    }
    // Negated form also rejects NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    let bad = grid.windows(2).any(|w| !(w[1] > w[0]) || w[1] - w[0] > b / 10.0 * (1.0 + 1e-12));
    if bad {
        return Err(Error::Contract(format!("grid must increase with step at most {}", b / 10.0)));
    }

    let mut max_g: f64 = 0.0;
    let mut max_g1: f64 = 0.0;
    let mut max_g2: f64 = 0.0;
    let mut max_slope: f64 = 0.0;
    let mut max_res: f64 = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &x in grid {
        let v = sol.evaluate(x)?;
        max_g = max_g.max(v.g.abs());
        max_g1 = max_g1.max(v.g1.abs());
        max_g2 = max_g2.max(v.g2.abs());
        max_res = max_res.max((v.g - b * b * v.g2 - sol.h_tilde(x)).abs());
        if let Some((px, pg2)) = prev {
            max_slope = max_slope.max((v.g2 - pg2).abs() / (x - px));
        }
        prev = Some((x, v.g2));
    }
    let g0 = sol.g(0.0)?;
    let limit_g = 2.0;
    let limit_g1 = 2.0 / b;
    let limit_g2 = 4.0 / (b * b);
    let limit_g2_lip = (b + 2.0) / (b * b * b);
    let pass = max_g <= limit_g + CERTIFICATE_SLACK
        && max_g1 <= limit_g1 + CERTIFICATE_SLACK
        && max_g2 <= limit_g2 + CERTIFICATE_SLACK
        && max_slope <= limit_g2_lip + CERTIFICATE_SLACK;
    Ok(BoundCertificate {
        label: sol.h.label().to_string(),
        b,
        g_at_zero: g0,
        max_abs_g: max_g,
        max_abs_g1: max_g1,
        max_abs_g2: max_g2,
        max_g2_slope: max_slope,
        max_abs_residual: max_res,
        limit_g,
        limit_g1,
        limit_g2,
        limit_g2_lip,
        pass,
    })
}

/// `E[g(W)] - g(0) - b² E[g''(W)]` for `W ~ Laplace(0, b)`; zero for every
/// admissible `g`.
pub fn verify_characterization(g: &dyn Fn(f64) -> f64, g2: &dyn Fn(f64) -> f64, b: f64) -> Result<f64> {
    let lap = LaplaceParams::centered(b)?;
    let opts = QuadOptions::default();
    let eg = lap.expectation(g, &[], &opts)?;
    let eg2 = lap.expectation(g2, &[], &opts)?;
    Ok(eg - g(0.0) - b * b * eg2)
}

/// `E[g'(W)] - (1/b) E[sgn(W) g(W)]`; zero for every admissible `g`.
pub fn verify_first_order(g: &dyn Fn(f64) -> f64, g1: &dyn Fn(f64) -> f64, b: f64) -> Result<f64> {
    let lap = LaplaceParams::centered(b)?;
    let opts = QuadOptions::default();
    let eg1 = lap.expectation(g1, &[], &opts)?;
    let esg = lap.expectation(|w| sgn(w) * g(w), &[], &opts)?;
    Ok(eg1 - esg / b)
}

/// Sign with `sgn(0) = 0`.
#[inline]
pub(crate) fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
