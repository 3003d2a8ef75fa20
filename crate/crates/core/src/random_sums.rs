//! Random sums `S = X_1 + … + X_N` with the index `N` independent of the
//! summands: simulation, the auxiliary index law `M`, and the explicit
//! bounded-Lipschitz bounds for the normalized sum `μ^{-1/2} S`.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace::LaplaceParams;
use crate::metrics::{
    bl_lower_bound, dkw_band, kolmogorov_empirical, kolmogorov_from_bl, wasserstein_empirical, DistanceEstimate,
    EmpiricalSample,
};
use crate::rng::{open01, stream, substream_seed, StreamRng};
use crate::source::{SourceDistribution, SourceShape};
use crate::stats::{mean_and_se, ols_slope, MonteCarloEstimate};
use crate::stein::TestFunction;

/// Trivial bound on `d_BL`: test functions are bounded by 1.
pub const BOUND_CAP: f64 = 2.0;

/// Largest tail mass a truncated pmf may drop.
pub const TAIL_LIMIT: f64 = 1e-10;

const PMF_SUM_TOL: f64 = 1e-12;
const SAMPLE_CHUNK: usize = 1024;
const EXACT_PAIR_LIMIT: usize = 4_000_000;
const COUPLING_MC_DRAWS: usize = 200_000;

/// Law of the number of terms `N ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IndexLaw {
    /// `P{N = n} = p(1-p)^{n-1}`, `p ∈ (0, 1]`.
    Geometric(f64),
    /// `pmf[i] = P{N = i + 1}`.
    Pmf(Vec<f64>),
    /// `N ≡ k`.
    Deterministic(usize),
}

impl IndexLaw {
    fn validate(&self) -> Result<()> {
        match self {
            Self::Geometric(p) => {
                if !(p.is_finite() && *p > 0.0 && *p <= 1.0) {
                    return Err(Error::InvalidParameter(format!("geometric p must lie in (0, 1], got {p}")));
                }
            }
            Self::Pmf(w) => {
                if w.is_empty() || w.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
                    return Err(Error::InvalidParameter("index pmf must be a nonempty list of nonnegative weights".into()));
                }
                let total: f64 = w.iter().sum();
                if (total - 1.0).abs() > PMF_SUM_TOL {
                    return Err(Error::InvalidParameter(format!("index pmf sums to {total}, not 1")));
                }
            }
            Self::Deterministic(k) => {
                if *k == 0 {
                    return Err(Error::InvalidParameter("deterministic index must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    /// `μ = E N`.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Geometric(p) => 1.0 / p,
            Self::Pmf(w) => w.iter().enumerate().map(|(i, &x)| (i + 1) as f64 * x).sum(),
            Self::Deterministic(k) => *k as f64,
        }
    }

    /// `P{N = n}`.
    pub fn pmf(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match self {
            Self::Geometric(p) => p * (1.0 - p).powi((n - 1) as i32),
            Self::Pmf(w) => w.get(n - 1).copied().unwrap_or(0.0),
            Self::Deterministic(k) => f64::from(u8::from(n == *k)),
        }
    }

    /// `P{N ≥ n}`.
    pub fn survival(&self, n: usize) -> f64 {
        if n <= 1 {
            return 1.0;
        }
        match self {
            Self::Geometric(p) => (1.0 - p).powi((n - 1) as i32),
            Self::Pmf(w) => w.iter().skip(n - 1).sum(),
            Self::Deterministic(k) => f64::from(u8::from(n <= *k)),
        }
    }

    /// Last atom of a finitely supported law.
    fn support_end(&self) -> Option<usize> {
        match self {
            Self::Geometric(p) if *p == 1.0 => Some(1),
            Self::Geometric(_) => None,
            Self::Pmf(w) => Some(w.len()),
            Self::Deterministic(k) => Some(*k),
        }
    }

    /// `P{N > t}`.
    fn tail_after(&self, t: usize) -> f64 {
        self.survival(t + 1)
    }

    /// `E[(N - t)^+] = Σ_{m > t} P{N ≥ m}`.
    fn excess_mean(&self, t: usize) -> f64 {
        match self {
            Self::Geometric(p) => (1.0 - p).powi(t as i32) / p,
            Self::Pmf(w) => w.iter().enumerate().map(|(i, &x)| (i + 1).saturating_sub(t) as f64 * x).sum(),
            Self::Deterministic(k) => k.saturating_sub(t) as f64,
        }
    }

    fn draw(&self, rng: &mut StreamRng, cum: &[f64]) -> usize {
        match self {
            Self::Geometric(p) => {
                if *p == 1.0 {
                    1
                } else {
                    let g = Geometric::new(*p).expect("validated p");
                    g.sample(rng) as usize + 1
                }
            }
            Self::Pmf(_) => {
                let u = open01(rng);
                cum.partition_point(|&c| c < u).min(cum.len() - 1) + 1
            }
            Self::Deterministic(k) => *k,
        }
    }
}

/// Per-index summand variances: `σ_i² = head[i-1]` for `i ≤ head.len()`,
/// `tail` afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSequence {
    pub head: Vec<f64>,
    pub tail: f64,
}

impl VarianceSequence {
    pub fn constant(v: f64) -> Self {
        Self { head: Vec::new(), tail: v }
    }

    pub fn at(&self, i: usize) -> f64 {
        self.head.get(i - 1).copied().unwrap_or(self.tail)
    }

    pub fn sup(&self) -> f64 {
        self.head.iter().copied().fold(self.tail, f64::max)
    }

    fn is_constant(&self) -> bool {
        self.head.iter().all(|&v| v == self.tail)
    }
}

#[derive(Debug, Clone)]
pub enum Summands {
    Iid(SourceDistribution),
    /// Independent `X_i = σ_i U_i` with `U_i` i.i.d. of unit variance.
    Varying { variances: VarianceSequence, shape: SourceShape },
}

/// A random-sum experiment, normalized by `μ^{-1/2}`.
#[derive(Debug, Clone)]
pub struct RandomSumSpec {
    index: IndexLaw,
    summands: Summands,
    unit: Option<SourceDistribution>,
    index_cum: Vec<f64>,
}

impl RandomSumSpec {
    pub fn new(index: IndexLaw, summands: Summands) -> Result<Self> {
        index.validate()?;
        let unit = match &summands {
            Summands::Iid(_) => None,
            Summands::Varying { variances, shape } => {
                if variances.head.iter().chain(std::iter::once(&variances.tail)).any(|&v| !(v.is_finite() && v >= 0.0)) {
                    return Err(Error::InvalidParameter("summand variances must be finite and nonnegative".into()));
                }
                Some(SourceDistribution::with_variance(*shape, 1.0)?)
            }
        };
        let index_cum = match &index {
            IndexLaw::Pmf(w) => {
                let mut acc = 0.0;
                w.iter()
                    .map(|&x| {
                        acc += x;
                        acc
                    })
                    .collect()
            }
            _ => Vec::new(),
        };
        let spec = Self { index, summands, unit, index_cum };
        // Negated form also rejects NaN.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(spec.sigma2() > 0.0) {
            return Err(Error::InvalidParameter("random sum has zero variance".into()));
        }
        Ok(spec)
    }

    /// Geometric index with i.i.d. summands.
    pub fn geometric(p: f64, source: SourceDistribution) -> Result<Self> {
        Self::new(IndexLaw::Geometric(p), Summands::Iid(source))
    }

    pub fn index(&self) -> &IndexLaw {
        &self.index
    }

    pub fn summands(&self) -> &Summands {
        &self.summands
    }

    pub fn is_iid(&self) -> bool {
        matches!(self.summands, Summands::Iid(_))
    }

    pub fn mu(&self) -> f64 {
        self.index.mean()
    }

    /// Multiplier applied to the raw sum.
    pub fn scaling(&self) -> f64 {
        self.mu().powf(-0.5)
    }

    /// `σ_i²`.
    pub fn variance_at(&self, i: usize) -> f64 {
        match &self.summands {
            Summands::Iid(s) => s.sigma2(),
            Summands::Varying { variances, .. } => variances.at(i),
        }
    }

    /// `sup_i σ_i`.
    pub fn sup_sigma(&self) -> f64 {
        match &self.summands {
            Summands::Iid(s) => s.sigma2().sqrt(),
            Summands::Varying { variances, .. } => variances.sup().sqrt(),
        }
    }

    /// `E|X_i|`.
    pub fn abs_mean_at(&self, i: usize) -> f64 {
        match (&self.summands, &self.unit) {
            (Summands::Iid(s), _) => s.abs_mean(),
            (Summands::Varying { variances, .. }, Some(u)) => variances.at(i).sqrt() * u.abs_mean(),
            _ => unreachable!("varying summands carry a unit law"),
        }
    }

    /// `E|X_i|³`.
    pub fn abs_third_at(&self, i: usize) -> f64 {
        match (&self.summands, &self.unit) {
            (Summands::Iid(s), _) => s.abs_third(),
            (Summands::Varying { variances, .. }, Some(u)) => variances.at(i).powf(1.5) * u.abs_third(),
            _ => unreachable!("varying summands carry a unit law"),
        }
    }

    /// `Σ_{m ≥ from} σ_m² P{N ≥ m}`, in closed form beyond the variance head.
    fn variance_mass_from(&self, from: usize) -> f64 {
        let from = from.max(1);
        let (head_len, tail) = match &self.summands {
            Summands::Iid(s) => (0, s.sigma2()),
            Summands::Varying { variances, .. } => (variances.head.len(), variances.tail),
        };
        let mut acc = 0.0;
        for m in from..=head_len {
            acc += self.variance_at(m) * self.index.survival(m);
        }
        let start = from.max(head_len + 1);
        acc + tail * self.index.excess_mean(start - 1)
    }

    /// `σ² = E[(Σ_{i≤N} X_i)²] = Σ_m σ_m² P{N ≥ m}`.
    pub fn sigma2(&self) -> f64 {
        self.variance_mass_from(1)
    }

    /// Scale `b` of the Laplace law with the variance of `μ^{-1/2} S`.
    pub fn limit_scale(&self) -> f64 {
        (self.sigma2() / (2.0 * self.mu())).sqrt()
    }

    fn draw_summand(&self, i: usize, rng: &mut StreamRng) -> f64 {
        match (&self.summands, &self.unit) {
            (Summands::Iid(s), _) => s.draw(rng),
            (Summands::Varying { variances, .. }, Some(u)) => {
                let v = variances.at(i);
                if v == 0.0 {
                    0.0
                } else {
                    v.sqrt() * u.draw(rng)
                }
            }
            _ => unreachable!("varying summands carry a unit law"),
        }
    }

    fn draw_sum(&self, rng: &mut StreamRng) -> f64 {
        let n = self.index.draw(rng, &self.index_cum);
        (1..=n).map(|i| self.draw_summand(i, rng)).sum()
    }
}

/// `n` independent draws of `μ^{-1/2}(X_1 + … + X_N)`. Blocks of draws use
/// their own substreams, so the output does not depend on thread count.
pub fn random_sum_sample(spec: &RandomSumSpec, n: usize, seed: u64) -> Result<EmpiricalSample> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    let scale = spec.scaling();
    let chunks = n.div_ceil(SAMPLE_CHUNK);
    let values: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let len = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
            let mut rng = stream(substream_seed(seed, "random-sum", c as u64));
            (0..len).map(move |_| scale * spec.draw_sum(&mut rng)).collect::<Vec<_>>()
        })
        .collect();
    EmpiricalSample::new(values)
}

/// Law of the auxiliary index `M`: `P{M = m} = σ_m² P{N ≥ m} / σ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MDistribution {
    /// `pmf[i] = P{M = i + 1}`.
    pub pmf: Vec<f64>,
    /// Mass beyond the last listed atom.
    pub tail_mass: f64,
}

impl MDistribution {
    pub fn get(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.pmf.get(m - 1).copied().unwrap_or(0.0)
        }
    }

    /// `Σ_m m^0 pmf(m)` over the listed atoms.
    pub fn total(&self) -> f64 {
        self.pmf.iter().sum()
    }

    /// Total variation against the first atoms of `other` (`other(m)` for
    /// `m = 1..=atoms`).
    pub fn total_variation(&self, atoms: usize, other: impl Fn(usize) -> f64) -> f64 {
        0.5 * (1..=atoms).map(|m| (self.get(m) - other(m)).abs()).sum::<f64>()
    }
}

/// The `M` law on `{1, …, truncation}`. A geometric index with constant
/// variances yields the index law itself.
pub fn m_distribution(spec: &RandomSumSpec, truncation: usize) -> Result<MDistribution> {
    if truncation == 0 {
        return Err(Error::InvalidParameter("truncation must be at least 1".into()));
    }
    let truncation = spec.index.support_end().map_or(truncation, |e| truncation.min(e));
    let sigma2 = spec.sigma2();
    let constant = match &spec.summands {
        Summands::Iid(_) => true,
        Summands::Varying { variances, .. } => variances.is_constant(),
    };
    let pmf: Vec<f64> = if constant && matches!(spec.index, IndexLaw::Geometric(_)) {
        (1..=truncation).map(|m| spec.index.pmf(m)).collect()
    } else {
        (1..=truncation).map(|m| spec.variance_at(m) * spec.index.survival(m) / sigma2).collect()
    };
    let tail_mass = spec.variance_mass_from(truncation + 1) / sigma2;
    if tail_mass > TAIL_LIMIT {
        return Err(Error::Truncation { truncation, tail_mass, limit: TAIL_LIMIT });
    }
    Ok(MDistribution { pmf, tail_mass })
}

/// The `M` law truncated at the first point where the dropped mass is at
/// most [`TAIL_LIMIT`].
pub fn m_distribution_auto(spec: &RandomSumSpec) -> Result<MDistribution> {
    let t = certified_truncation(spec, |t| spec.variance_mass_from(t + 1) / spec.sigma2())?;
    m_distribution(spec, t)
}

/// Smallest `t` with `tail(t) ≤ TAIL_LIMIT`, by doubling then bisection.
fn certified_truncation(spec: &RandomSumSpec, tail: impl Fn(usize) -> f64) -> Result<usize> {
    if let Some(end) = spec.index.support_end() {
        return Ok(end);
    }
    let mut hi = 1usize;
    while tail(hi) > TAIL_LIMIT {
        hi = hi.checked_mul(2).filter(|&h| h <= 1 << 40).ok_or(Error::Truncation {
            truncation: hi,
            tail_mass: tail(hi),
            limit: TAIL_LIMIT,
        })?;
    }
    let mut lo = hi / 2;
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if tail(mid) > TAIL_LIMIT {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Joint law of `(N, M)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// `N = F_N⁻¹(U)`, `M = F_M⁻¹(U)` from one uniform.
    #[default]
    Comonotone,
    Independent,
    /// `M = N`; valid only when the two laws agree.
    Identity,
}

/// `E|N - M|^{1/2}` under a coupling; the standard error is zero when the
/// value is an exact finite sum.
pub fn index_gap_half_moment(spec: &RandomSumSpec, m: &MDistribution, coupling: Coupling, seed: u64) -> Result<MonteCarloEstimate> {
    let n_len = certified_truncation(spec, |t| spec.index.tail_after(t))?;
    let pn: Vec<f64> = (1..=n_len).map(|k| spec.index.pmf(k)).collect();
    let pm = &m.pmf;
    let exact = |value| Ok(MonteCarloEstimate { value, std_error: 0.0 });
    match coupling {
        Coupling::Identity => {
            let len = pn.len().max(pm.len());
            let tv = 0.5 * (1..=len).map(|k| (pn.get(k - 1).unwrap_or(&0.0) - m.get(k)).abs()).sum::<f64>();
            if tv > PMF_SUM_TOL {
                return Err(Error::Contract(format!("identity coupling needs M = N in law; total variation is {tv:e}")));
            }
            exact(0.0)
        }
        Coupling::Comonotone => exact(comonotone_half_moment(&pn, pm)),
        Coupling::Independent if pn.len().saturating_mul(pm.len()) <= EXACT_PAIR_LIMIT => {
            let mut acc = 0.0;
            for (i, &a) in pn.iter().enumerate() {
                for (j, &b) in pm.iter().enumerate() {
                    acc += a * b * (i.abs_diff(j) as f64).sqrt();
                }
            }
            exact(acc)
        }
        Coupling::Independent => {
            let cn = running_sum(&pn);
            let cm = running_sum(pm);
            let mut rng = stream(substream_seed(seed, "index-coupling", 0));
            let gaps: Vec<f64> = (0..COUPLING_MC_DRAWS)
                .map(|_| {
                    let i = cn.partition_point(|&c| c < open01(&mut rng));
                    let j = cm.partition_point(|&c| c < open01(&mut rng));
                    i.abs_diff(j) as f64
                })
                .collect();
            Ok(mean_and_se(&gaps, f64::sqrt))
        }
    }
}

fn running_sum(w: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    w.iter()
        .map(|&x| {
            acc += x;
            acc
        })
        .collect()
}

/// Merge the two quantile functions level by level.
fn comonotone_half_moment(pn: &[f64], pm: &[f64]) -> f64 {
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ri, mut rj) = (pn[0], pm[0]);
    let mut acc = 0.0;
    loop {
        let gap = (i.abs_diff(j) as f64).sqrt();
        if ri <= rj {
            acc += ri * gap;
            rj -= ri;
            i += 1;
            match pn.get(i) {
                Some(&x) => ri = x,
                None => break,
            }
        } else {
            acc += rj * gap;
            ri -= rj;
            j += 1;
            match pm.get(j) {
                Some(&x) => rj = x,
                None => break,
            }
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundKind {
    Thm6,
    Cor1,
    Thm7,
    #[serde(rename = "Prop1-composite")]
    Prop1Composite,
}

/// A bound with its named inputs. `value` is always the documented formula
/// applied to `components`, so [`BoundReport::recompute`] reproduces it bit
/// for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub value: f64,
    /// `min(value, cap)` with cap 2 for `d_BL` bounds and 1 for `d_K`.
    pub capped: f64,
    pub components: BTreeMap<String, f64>,
    pub empirical: Vec<DistanceEstimate>,
    /// Whether every attached empirical estimate respects the bound.
    pub verdict: bool,
}

fn component(c: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    c.get(key).copied().ok_or_else(|| Error::Contract(format!("bound report lacks component {key}")))
}

impl BoundReport {
    fn from_components(kind: BoundKind, components: BTreeMap<String, f64>) -> Result<Self> {
        let value = Self::formula(kind, &components)?;
        let cap = if kind == BoundKind::Prop1Composite { 1.0 } else { BOUND_CAP };
        Ok(Self { kind, value, capped: value.min(cap), components, empirical: Vec::new(), verdict: true })
    }

    fn formula(kind: BoundKind, c: &BTreeMap<String, f64>) -> Result<f64> {
        let g = |k: &str| component(c, k);
        Ok(match kind {
            BoundKind::Thm7 => {
                let (p, b, rho) = (g("p")?, g("b")?, g("rho")?);
                p.sqrt() * ((b + 2.0) / b) * (b * 2f64.sqrt() + rho / (6.0 * b * b))
            }
            BoundKind::Cor1 => {
                let (mu, b) = (g("mu")?, g("b")?);
                (b + 2.0) / (b * mu.sqrt())
                    * (g("abs_mean")? + g("rho")? / (6.0 * b * b) + b * 2f64.sqrt() * g("index_gap")?)
            }
            BoundKind::Thm6 => {
                (g("mu")?.powf(-0.5) + 8f64.sqrt() / g("sigma2")?.sqrt())
                    * (g("abs_mean_m")? + g("cubic_ratio_m")? / 3.0 + g("sup_sigma")? * g("index_gap")?)
            }
            BoundKind::Prop1Composite => kolmogorov_from_bl(g("d_bl_bound")?, g("density_sup")?)?,
        })
    }

    /// The documented formula re-evaluated from `components`.
    pub fn recompute(&self) -> Result<f64> {
        Self::formula(self.kind, &self.components)
    }

    /// Attach an empirical lower estimate and fold `estimate ≤ capped +
    /// slack` into the verdict.
    pub fn certify(&mut self, estimate: DistanceEstimate, slack: f64) {
        self.verdict &= estimate.value <= self.capped + slack;
        self.empirical.push(estimate);
    }
}

fn components<const K: usize>(pairs: [(&str, f64); K]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// `√p ((b+2)/b)(b√2 + ρ/(6b²))` for a geometric sum with summand variance
/// `2b²` and `E|X|³ ≤ ρ`.
pub fn theorem7_bound(p: f64, b: f64, rho: f64) -> Result<BoundReport> {
    if !(p.is_finite() && p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("p must lie in (0, 1], got {p}")));
    }
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::Domain(format!("b must be positive, got {b}")));
    }
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::Domain(format!("rho must be nonnegative, got {rho}")));
    }
    BoundReport::from_components(BoundKind::Thm7, components([("p", p), ("b", b), ("rho", rho)]))
}

/// Kolmogorov bound obtained by feeding a `d_BL` bound through the
/// smoothing inequality for a target density bounded by `density_sup`.
pub fn prop1_composite(d_bl_bound: f64, density_sup: f64) -> Result<BoundReport> {
    BoundReport::from_components(
        BoundKind::Prop1Composite,
        components([("d_bl_bound", d_bl_bound), ("density_sup", density_sup)]),
    )
}

/// `(b+2)/(b√μ) (E|X_1| + ρ/(6b²) + b√2 E|N-M|^{1/2})` for i.i.d. summands
/// with `E X_1² = 2b²`.
pub fn corollary1_bound(spec: &RandomSumSpec, coupling: Coupling, seed: u64) -> Result<BoundReport> {
    let Summands::Iid(src) = &spec.summands else {
        return Err(Error::Unsupported("corollary bound needs i.i.d. summands; use theorem6_bound".into()));
    };
    let m = m_distribution_auto(spec)?;
    let gap = index_gap_half_moment(spec, &m, coupling, seed)?;
    let mut r = BoundReport::from_components(
        BoundKind::Cor1,
        components([
            ("mu", spec.mu()),
            ("b", (src.sigma2() / 2.0).sqrt()),
            ("abs_mean", src.abs_mean()),
            ("rho", src.abs_third()),
            ("index_gap", gap.value),
        ]),
    )?;
    r.components.insert("index_gap_se".into(), gap.std_error);
    Ok(r)
}

/// `(μ^{-1/2} + √8/σ)(E|X_M| + E[|X_M|³/σ_M²]/3 + sup_i σ_i E|N-M|^{1/2})`.
pub fn theorem6_bound(spec: &RandomSumSpec, coupling: Coupling, seed: u64) -> Result<BoundReport> {
    let m = m_distribution_auto(spec)?;
    let mut abs_mean_m = 0.0;
    let mut cubic_ratio_m = 0.0;
    for (i, &w) in m.pmf.iter().enumerate() {
        if w > 0.0 {
            let idx = i + 1;
            abs_mean_m += w * spec.abs_mean_at(idx);
            cubic_ratio_m += w * spec.abs_third_at(idx) / spec.variance_at(idx);
        }
    }
    // Dropped atoms: exact once past the variance head, else bounded by the
    // largest per-index value.
    let t = m.pmf.len() + 1;
    let head_len = match &spec.summands {
        Summands::Iid(_) => 0,
        Summands::Varying { variances, .. } => variances.head.len(),
    };
    if m.tail_mass > 0.0 {
        let (a, c) = match &spec.unit {
            Some(u) if t <= head_len => (spec.sup_sigma() * u.abs_mean(), spec.sup_sigma() * u.abs_third()),
            _ => (spec.abs_mean_at(t), spec.abs_third_at(t) / spec.variance_at(t)),
        };
        abs_mean_m += m.tail_mass * a;
        cubic_ratio_m += m.tail_mass * c;
    }
    let gap = index_gap_half_moment(spec, &m, coupling, seed)?;
    let mut r = BoundReport::from_components(
        BoundKind::Thm6,
        components([
            ("mu", spec.mu()),
            ("sigma2", spec.sigma2()),
            ("abs_mean_m", abs_mean_m),
            ("cubic_ratio_m", cubic_ratio_m),
            ("sup_sigma", spec.sup_sigma()),
            ("index_gap", gap.value),
        ]),
    )?;
    r.components.insert("index_gap_se".into(), gap.std_error);
    Ok(r)
}

/// Inputs of a geometric convergence sweep.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub source: SourceDistribution,
    /// Target scale; must satisfy `E X² = 2b²`.
    pub b: f64,
    /// Strictly decreasing values in `(0, 1]`.
    pub p_grid: Vec<f64>,
    pub n: usize,
    pub seed: u64,
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: f64,
    pub n: usize,
    pub b: f64,
    pub rho: f64,
    pub d_k: DistanceEstimate,
    pub d_k_band: f64,
    pub d_bl_lower: DistanceEstimate,
    pub d_w_upper: DistanceEstimate,
    pub thm7: BoundReport,
    pub prop1: BoundReport,
    pub verdict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Least-squares slope of `ln d_W` on `ln p`; absent with fewer than two
    /// usable points.
    pub slope: Option<f64>,
}

const VARIANCE_MATCH_TOL: f64 = 1e-6;

impl SweepSpec {
    fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::InvalidParameter(format!("b must be positive, got {}", self.b)));
        }
        let v = 2.0 * self.b * self.b;
        if ((self.source.sigma2() - v) / v).abs() > VARIANCE_MATCH_TOL {
            return Err(Error::InvalidParameter(format!(
                "source variance {} does not match 2b² = {v}",
                self.source.sigma2()
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        for (i, &p) in self.p_grid.iter().enumerate() {
            if !(p.is_finite() && p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidParameter(format!("p must lie in (0, 1], got {p}")));
            }
            if i > 0 && p >= self.p_grid[i - 1] {
                return Err(Error::InvalidParameter("p grid must be strictly decreasing".into()));
            }
        }
        Ok(())
    }
}

/// Empirical distances and bounds at each `p`, points in parallel with
/// per-point substreams.
pub fn convergence_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let target = LaplaceParams::centered(spec.b)?;
    let family = TestFunction::bl_family(spec.b);
    let rho = spec.source.abs_third();
    let points: Vec<SweepPoint> = spec
        .p_grid
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let rs = RandomSumSpec::geometric(p, spec.source.clone())?;
            let sample = random_sum_sample(&rs, spec.n, substream_seed(spec.seed, "sweep", i as u64))?;
            let d_k = kolmogorov_empirical(&sample, &target);
            let d_k_band = dkw_band(spec.n);
            let d_bl_lower = bl_lower_bound(&sample, &target, &family)?;
            let d_w_upper = wasserstein_empirical(&sample, &target);
            let mut thm7 = theorem7_bound(p, spec.b, rho)?;
            thm7.certify(d_bl_lower.clone(), 4.0 * d_bl_lower.std_error);
            let mut prop1 = prop1_composite(thm7.capped, target.density_sup())?;
            prop1.certify(d_k.clone(), d_k_band);
            let verdict = thm7.verdict && prop1.verdict;
            Ok(SweepPoint { p, n: spec.n, b: spec.b, rho, d_k, d_k_band, d_bl_lower, d_w_upper, thm7, prop1, verdict })
        })
        .collect::<Result<_>>()?;
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        points.iter().filter(|pt| pt.d_w_upper.value > 0.0).map(|pt| (pt.p.ln(), pt.d_w_upper.value.ln())).unzip();
    let slope = (lx.len() >= 2).then(|| ols_slope(&lx, &ly));
    Ok(SweepResult { points, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rad() -> SourceDistribution {
        SourceDistribution::rademacher(2f64.sqrt()).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(RandomSumSpec::geometric(0.0, rad()).is_err());
        assert!(RandomSumSpec::geometric(1.5, rad()).is_err());
        assert!(RandomSumSpec::new(IndexLaw::Pmf(vec![0.5, 0.4]), Summands::Iid(rad())).is_err());
        assert!(RandomSumSpec::new(IndexLaw::Deterministic(0), Summands::Iid(rad())).is_err());
        let zero = Summands::Varying { variances: VarianceSequence::constant(0.0), shape: SourceShape::Rademacher };
        assert!(RandomSumSpec::new(IndexLaw::Deterministic(3), zero).is_err());
    }

    #[test]
    fn p_one_gives_single_summands() {
        let spec = RandomSumSpec::geometric(1.0, rad()).unwrap();
        let s = random_sum_sample(&spec, 1000, 4).unwrap();
        assert!(s.values().iter().all(|&x| (x.abs() - 2f64.sqrt()).abs() < 1e-15));
    }

    #[test]
    fn scaled_sum_moments() {
        let spec = RandomSumSpec::geometric(0.01, rad()).unwrap();
        let s = random_sum_sample(&spec, 100_000, 11).unwrap();
        let mean = mean_and_se(s.values(), |x| x);
        assert!(mean.within(0.0, 4.0), "{mean:?}");
        let var = mean_and_se(s.values(), |x| x * x);
        assert!(var.within(2.0, 4.0), "{var:?}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = RandomSumSpec::geometric(0.2, SourceDistribution::uniform(1.0).unwrap()).unwrap();
        let a = random_sum_sample(&spec, 5000, 9).unwrap();
        let b = random_sum_sample(&spec, 5000, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_sum_sample(&spec, 5000, 10).unwrap());
    }

    #[test]
    fn sigma2_identities() {
        let spec = RandomSumSpec::geometric(0.25, rad()).unwrap();
        assert_abs_diff_eq!(spec.sigma2(), 8.0, epsilon = 1e-12);
        let v = Summands::Varying { variances: VarianceSequence { head: vec![1.0, 4.0], tail: 9.0 }, shape: SourceShape::Uniform };
        let spec = RandomSumSpec::new(IndexLaw::Geometric(0.5), v).unwrap();
        // 1·1 + 4·½ + 9·Σ_{m≥3} 2^{1-m} = 1 + 2 + 9·½.
        assert_abs_diff_eq!(spec.sigma2(), 7.5, epsilon = 1e-12);
    }

    #[test]
    fn m_law_geometric_is_index_law() {
        for p in [0.5, 0.1, 0.01] {
            let spec = RandomSumSpec::geometric(p, rad()).unwrap();
            let m = m_distribution(&spec, 10_000).unwrap();
            let mut oracle = p;
            let mut tv = 0.0;
            for k in 1..=10_000 {
                tv += (m.get(k) - oracle).abs();
                oracle *= 1.0 - p;
            }
            assert!(0.5 * tv <= 1e-12, "p={p}: {tv}");
            assert!((m.total() + m.tail_mass - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn m_law_truncation_error() {
        let spec = RandomSumSpec::geometric(0.001, rad()).unwrap();
        assert!(matches!(m_distribution(&spec, 10_000), Err(Error::Truncation { .. })));
        let m = m_distribution_auto(&spec).unwrap();
        assert!(m.tail_mass <= TAIL_LIMIT);
        assert!((m.total() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn m_law_deterministic_is_uniform() {
        for k in [1, 2, 7, 50] {
            let spec = RandomSumSpec::new(IndexLaw::Deterministic(k), Summands::Iid(rad())).unwrap();
            let m = m_distribution(&spec, 1000).unwrap();
            assert_eq!(m.pmf.len(), k);
            assert!(m.pmf.iter().all(|&w| w == 1.0 / k as f64));
            assert_eq!(m.tail_mass, 0.0);
        }
    }

    #[test]
    fn m_law_zero_variance_atom() {
        let v = Summands::Varying { variances: VarianceSequence { head: vec![1.0, 0.0, 2.0], tail: 1.0 }, shape: SourceShape::Rademacher };
        let spec = RandomSumSpec::new(IndexLaw::Geometric(0.3), v).unwrap();
        let m = m_distribution_auto(&spec).unwrap();
        assert_eq!(m.get(2), 0.0);
        assert!((m.total() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn geometric_bound_examples() {
        let r = theorem7_bound(0.01, 1.0, 2.0 * 2f64.sqrt()).unwrap();
        assert_abs_diff_eq!(r.value, 0.1 * 3.0 * (2f64.sqrt() + 2.0 * 2f64.sqrt() / 6.0), epsilon = 1e-15);
        assert_abs_diff_eq!(r.value, 0.565_685_424_949_238, epsilon = 1e-12);
        assert_eq!(r.recompute().unwrap(), r.value);
        let r = theorem7_bound(1.0, 1.0, 2.0 * 2f64.sqrt()).unwrap();
        assert_abs_diff_eq!(r.value, 5.656_854_249_492_38, epsilon = 1e-12);
        assert_eq!(r.capped, 2.0);
        let r = theorem7_bound(0.04, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(r.value, 0.2 * 3.0 * 2f64.sqrt(), epsilon = 1e-15);
        assert!(theorem7_bound(0.0, 1.0, 1.0).is_err());
        assert!(theorem7_bound(0.5, -1.0, 1.0).is_err());
        assert!(theorem7_bound(0.5, 1.0, -1.0).is_err());
    }

    #[test]
    fn iid_bound_geometric_matches_closed_form() {
        let spec = RandomSumSpec::geometric(0.01, rad()).unwrap();
        for coupling in [Coupling::Comonotone, Coupling::Identity] {
            let c = corollary1_bound(&spec, coupling, 0).unwrap();
            assert_eq!(c.components["index_gap"], 0.0);
            let t = theorem7_bound(0.01, 1.0, 2.0 * 2f64.sqrt()).unwrap();
            assert_abs_diff_eq!(c.value, t.value, epsilon = 1e-12);
            assert_eq!(c.recompute().unwrap(), c.value);
        }
        let ind = corollary1_bound(&spec, Coupling::Independent, 5).unwrap();
        assert!(ind.components["index_gap"] > 0.0);
    }

    #[test]
    fn iid_bound_deterministic_index() {
        for k in [1usize, 3, 10, 40] {
            let spec = RandomSumSpec::new(IndexLaw::Deterministic(k), Summands::Iid(rad())).unwrap();
            let c = corollary1_bound(&spec, Coupling::Comonotone, 0).unwrap();
            let oracle: f64 = (1..=k).map(|m| ((k - m) as f64).sqrt()).sum::<f64>() / k as f64;
            assert_abs_diff_eq!(c.components["index_gap"], oracle, epsilon = 1e-13);
            // First term with E|X_1| = √2 b, b = 1.
            let first = 3.0 / (k as f64).sqrt() * 2f64.sqrt();
            let rest = 3.0 / (k as f64).sqrt() * (2.0 * 2f64.sqrt() / 6.0 + 2f64.sqrt() * oracle);
            assert_abs_diff_eq!(c.value, first + rest, epsilon = 1e-12);
        }
    }

    #[test]
    fn iid_bound_rejects_varying() {
        let v = Summands::Varying { variances: VarianceSequence::constant(1.0), shape: SourceShape::Rademacher };
        let spec = RandomSumSpec::new(IndexLaw::Deterministic(2), v).unwrap();
        assert!(matches!(corollary1_bound(&spec, Coupling::Comonotone, 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn identity_coupling_needs_equal_laws() {
        let spec = RandomSumSpec::new(IndexLaw::Deterministic(3), Summands::Iid(rad())).unwrap();
        assert!(matches!(corollary1_bound(&spec, Coupling::Identity, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn general_bound_reduces_to_iid_bound() {
        for p in [0.5, 0.05] {
            let spec = RandomSumSpec::geometric(p, rad()).unwrap();
            let t6 = theorem6_bound(&spec, Coupling::Comonotone, 0).unwrap();
            let c1 = corollary1_bound(&spec, Coupling::Comonotone, 0).unwrap();
            assert_abs_diff_eq!(t6.value, c1.value, epsilon = 1e-12 * c1.value);
        }
        let v = Summands::Varying { variances: VarianceSequence::constant(2.0), shape: SourceShape::Rademacher };
        let spec = RandomSumSpec::new(IndexLaw::Geometric(0.1), v).unwrap();
        let t6 = theorem6_bound(&spec, Coupling::Comonotone, 0).unwrap();
        let t7 = theorem7_bound(0.1, 1.0, 2.0 * 2f64.sqrt()).unwrap();
        assert_abs_diff_eq!(t6.value, t7.value, epsilon = 1e-12);
    }

    #[test]
    fn general_bound_two_block_by_hand() {
        // σ² ∈ {1, 4}, N ≡ 2, Rademacher summands ±1 and ±2.
        let v = Summands::Varying { variances: VarianceSequence { head: vec![1.0, 4.0], tail: 4.0 }, shape: SourceShape::Rademacher };
        let spec = RandomSumSpec::new(IndexLaw::Deterministic(2), v).unwrap();
        let r = theorem6_bound(&spec, Coupling::Comonotone, 0).unwrap();
        // σ² = 5, M = 1 w.p. 1/5 and 2 w.p. 4/5.
        let abs_mean_m = 0.2 * 1.0 + 0.8 * 2.0;
        let cubic = 0.2 * 1.0 + 0.8 * 2.0;
        // Comonotone: N ≡ 2, so E|N - M|^{1/2} = P{M = 1}.
        let gap = 0.2;
        let value = (0.5f64.sqrt() + 8f64.sqrt() / 5f64.sqrt()) * (abs_mean_m + cubic / 3.0 + 2.0 * gap);
        assert_abs_diff_eq!(r.components["abs_mean_m"], abs_mean_m, epsilon = 1e-15);
        assert_abs_diff_eq!(r.components["cubic_ratio_m"], cubic, epsilon = 1e-15);
        assert_abs_diff_eq!(r.components["index_gap"], gap, epsilon = 1e-15);
        assert_abs_diff_eq!(r.value, value, epsilon = 1e-14);
        assert_eq!(r.recompute().unwrap(), r.value);
    }

    #[test]
    fn independent_coupling_exact_and_mc_agree() {
        let spec = RandomSumSpec::geometric(0.2, rad()).unwrap();
        let m = m_distribution_auto(&spec).unwrap();
        let exact = index_gap_half_moment(&spec, &m, Coupling::Independent, 0).unwrap();
        assert_eq!(exact.std_error, 0.0);
        // Monte Carlo oracle with the sampling path forced.
        let mut rng = stream(123);
        let g = Geometric::new(0.2).unwrap();
        let draws: Vec<f64> = (0..400_000).map(|_| (g.sample(&mut rng) as f64 - g.sample(&mut rng) as f64).abs()).collect();
        let mc = mean_and_se(&draws, f64::sqrt);
        assert!(mc.within(exact.value, 4.0), "{mc:?} vs {}", exact.value);
    }

    #[test]
    fn bound_report_round_trip() {
        let r = theorem7_bound(0.03, 1.0, 2.0).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: BoundReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.recompute().unwrap(), back.value);
    }

    #[test]
    fn sweep_validation() {
        let mk = |grid: Vec<f64>, b: f64| SweepSpec { source: rad(), b, p_grid: grid, n: 100, seed: 1 };
        assert!(convergence_sweep(&mk(vec![0.1, 0.2], 1.0)).is_err());
        assert!(convergence_sweep(&mk(vec![0.1], 2.0)).is_err());
        let empty = convergence_sweep(&mk(vec![], 1.0)).unwrap();
        assert!(empty.points.is_empty() && empty.slope.is_none());
    }

    #[test]
    fn sweep_p_one_is_two_point_law() {
        let spec = SweepSpec { source: rad(), b: 1.0, p_grid: vec![1.0], n: 2000, seed: 5 };
        let r = convergence_sweep(&spec).unwrap();
        let pt = &r.points[0];
        // Sample of ±√2 only: F_n is 0, q, 1 on the three pieces.
        let rs = RandomSumSpec::geometric(1.0, rad()).unwrap();
        let s = random_sum_sample(&rs, 2000, substream_seed(5, "sweep", 0)).unwrap();
        let q = s.values().iter().filter(|&&x| x < 0.0).count() as f64 / 2000.0;
        let f = |x: f64| LaplaceParams::centered(1.0).unwrap().cdf(x).unwrap();
        let r2 = 2f64.sqrt();
        let oracle = [f(-r2), (q - f(-r2)).abs(), (q - f(r2)).abs(), 1.0 - f(r2)].into_iter().fold(0.0, f64::max);
        assert_abs_diff_eq!(pt.d_k.value, oracle, epsilon = 1e-12);
        assert!(pt.verdict);
    }
}
