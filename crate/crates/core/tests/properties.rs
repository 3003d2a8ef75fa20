//! Statistical and structural invariants across modules, at full sample
//! sizes.

use laplace_stein::laplace::LaplaceParams;
use laplace_stein::metrics::{
    bl_lower_bound, dkw_band, kolmogorov_empirical, kolmogorov_from_bl, wasserstein_empirical, EmpiricalSample,
};
use laplace_stein::random_sums::{
    convergence_sweep, corollary1_bound, m_distribution_auto, random_sum_sample, theorem6_bound, theorem7_bound,
    Coupling, IndexLaw, RandomSumSpec, Summands, SweepSpec, VarianceSequence,
};
use laplace_stein::rng::stream;
use laplace_stein::source::{SourceDistribution, SourceShape};
use laplace_stein::stats::mean_and_se;
use laplace_stein::stein::{solve, standard_grid, verify_characterization, TestFunction};
use laplace_stein::transforms::{
    equilibrium_cf, equilibrium_gap, equilibrium_gap_bound, equilibrium_moment, sym_equilibrium_sample,
};

fn sources() -> Vec<SourceDistribution> {
    vec![
        SourceDistribution::rademacher(2f64.sqrt()).unwrap(),
        SourceDistribution::uniform(1.5).unwrap(),
        SourceDistribution::laplace(0.8).unwrap(),
        SourceDistribution::skewed_atoms(0.6).unwrap(),
    ]
}

fn draws(src: &SourceDistribution, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed);
    (0..n).map(|_| src.draw(&mut rng)).collect()
}

#[test]
fn laplace_empirical_cf() {
    for b in [0.5, 1.0, 2.0] {
        let lap = LaplaceParams::centered(b).unwrap();
        let xs = lap.sample(1_000_000, 42);
        for t in [0.5, 1.0, 2.0] {
            let e = mean_and_se(&xs, |x| (t * x).cos());
            assert!(e.within(lap.char_fn(t).unwrap(), 4.0), "b={b} t={t}: {e:?}");
        }
    }
}

#[test]
fn stein_solutions_vanish_at_origin_for_bl_family() {
    for b in [0.5, 1.0, 2.0] {
        for h in TestFunction::bl_family(b) {
            let g0 = solve(&h, b).unwrap().g(0.0).unwrap();
            assert!(g0.abs() <= 1e-12, "{} b={b}: g(0) = {g0:e}", h.label());
        }
    }
}

#[test]
fn second_derivative_against_central_difference_for_family() {
    for b in [0.5, 1.0, 2.0] {
        let step = 1e-4 * b;
        for h in TestFunction::stein_family() {
            let sol = solve(&h, b).unwrap();
            for &x in standard_grid(b).iter().step_by(7) {
                // Central differences of g' straddling a kink of h carry an
                // O(step) error; skip those points.
                if h.kinks().iter().any(|&k| (x - k).abs() <= 2.0 * step) {
                    continue;
                }
                let fd = (sol.g1(x + step).unwrap() - sol.g1(x - step).unwrap()) / (2.0 * step);
                let g2 = sol.g2(x).unwrap();
                assert!((fd - g2).abs() <= 1e-5, "{} b={b} x={x}: {fd} vs {g2}", h.label());
            }
        }
    }
}

#[test]
fn gaussian_bump_characterization() {
    // g = x e^{-x²}, g'' = (4x³ - 6x) e^{-x²}.
    let g = |x: f64| x * (-x * x).exp();
    let g2 = |x: f64| (4.0 * x.powi(3) - 6.0 * x) * (-x * x).exp();
    for b in [0.5, 1.0, 2.0] {
        assert!(verify_characterization(&g, &g2, b).unwrap().abs() <= 1e-8);
    }
}

#[test]
fn equilibrium_fixed_point_at_99_band() {
    let n = 100_000;
    for (i, b) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let src = SourceDistribution::laplace(b).unwrap();
        let xl = sym_equilibrium_sample(&src, n, 60 + i as u64).unwrap();
        let d = kolmogorov_empirical(&EmpiricalSample::new(xl.values).unwrap(), &LaplaceParams::centered(b).unwrap());
        assert!(d.value <= 1.63 / (n as f64).sqrt(), "b={b}: {}", d.value);
    }
}

#[test]
fn equilibrium_cf_and_moments_for_all_sources() {
    for (i, src) in sources().into_iter().enumerate() {
        let xs = sym_equilibrium_sample(&src, 1_000_000, 70 + i as u64).unwrap().values;
        for t in [0.5, 1.0, 2.0] {
            let phi = equilibrium_cf(t, &src).unwrap();
            let re = mean_and_se(&xs, |x| (t * x).cos());
            let im = mean_and_se(&xs, |x| (t * x).sin());
            assert!(re.within(phi.re, 4.0), "{} t={t}: {re:?} vs {}", src.label(), phi.re);
            assert!(im.within(phi.im, 4.0), "{} t={t}: {im:?} vs {}", src.label(), phi.im);
        }
        for k in [2, 4] {
            let e = mean_and_se(&xs, |x| x.powi(k));
            let m = equilibrium_moment(k as u32, &src).unwrap();
            assert!(e.within(m, 4.0), "{} k={k}: {e:?} vs {m}", src.label());
        }
    }
}

#[test]
fn cubic_equilibrium_chain() {
    // E f(X) - f(0) = ½ E X² · E f''(X^L) with f = x³, both sides from
    // independent samples.
    let n = 1_000_000;
    for (i, src) in [
        SourceDistribution::rademacher(1.2).unwrap(),
        SourceDistribution::uniform(2.0).unwrap(),
        SourceDistribution::skewed_atoms(0.7).unwrap(),
    ]
    .into_iter()
    .enumerate()
    {
        let lhs = mean_and_se(&draws(&src, n, 80 + i as u64), |x| x.powi(3));
        let xl = sym_equilibrium_sample(&src, n, 90 + i as u64).unwrap().values;
        let rhs = mean_and_se(&xl, |x| 0.5 * src.sigma2() * 6.0 * x);
        let se = lhs.std_error.hypot(rhs.std_error);
        assert!((lhs.value - rhs.value).abs() <= 4.0 * se, "{}: {lhs:?} vs {rhs:?}", src.label());
    }
}

#[test]
fn equilibrium_gap_within_bound() {
    for (i, src) in sources().into_iter().enumerate() {
        let gap = equilibrium_gap(&src, 500_000, 110 + i as u64).unwrap();
        let bound = equilibrium_gap_bound(&src);
        assert!(gap.value <= bound + 4.0 * gap.std_error, "{}: {gap:?} vs {bound}", src.label());
        // The bound is E|X| + E|X^L|, since E|X^L| = E|X|³/(6b²).
        let xl = sym_equilibrium_sample(&src, 500_000, 120 + i as u64).unwrap().values;
        let abs_l = mean_and_se(&xl, f64::abs);
        assert!(abs_l.within(bound - src.abs_mean(), 4.0), "{}: {abs_l:?}", src.label());
    }
}

#[test]
fn bl_lower_never_exceeds_wasserstein() {
    let family = TestFunction::bl_family(1.0);
    let target = LaplaceParams::centered(1.0).unwrap();
    for (i, src) in sources().into_iter().enumerate() {
        let s = EmpiricalSample::new(draws(&src, 20_000, 130 + i as u64)).unwrap();
        let bl = bl_lower_bound(&s, &target, &family).unwrap();
        let w = wasserstein_empirical(&s, &target);
        assert!(bl.value <= w.value + 4.0 * bl.std_error, "{}", src.label());
    }
}

#[test]
fn kolmogorov_scale_equivariance() {
    let s = EmpiricalSample::new(draws(&SourceDistribution::uniform(1.0).unwrap(), 10_000, 140)).unwrap();
    let base = kolmogorov_empirical(&s, &LaplaceParams::centered(0.7).unwrap()).value;
    for c in [0.1, 3.0, 17.0] {
        let scaled = kolmogorov_empirical(&s.scaled(c).unwrap(), &LaplaceParams::centered(0.7 * c).unwrap()).value;
        assert!((scaled - base).abs() <= 1e-12, "c={c}");
    }
}

#[test]
fn smoothing_chain_on_geometric_sums() {
    let target = LaplaceParams::centered(1.0).unwrap();
    for (i, p) in [0.3, 0.05, 0.005].into_iter().enumerate() {
        for src in [SourceDistribution::rademacher(2f64.sqrt()).unwrap(), SourceDistribution::uniform(6f64.sqrt()).unwrap()] {
            let spec = RandomSumSpec::geometric(p, src).unwrap();
            let s = random_sum_sample(&spec, 50_000, 150 + i as u64).unwrap();
            let dk = kolmogorov_empirical(&s, &target).value;
            let dw = wasserstein_empirical(&s, &target).value;
            assert!(dk <= kolmogorov_from_bl(dw, target.density_sup()).unwrap(), "p={p}");
        }
    }
}

#[test]
fn m_law_sums_to_one() {
    let rad = SourceDistribution::rademacher(1.0).unwrap();
    let specs = vec![
        RandomSumSpec::geometric(0.37, rad.clone()).unwrap(),
        RandomSumSpec::new(IndexLaw::Pmf(vec![0.2, 0.3, 0.1, 0.4]), Summands::Iid(rad.clone())).unwrap(),
        RandomSumSpec::new(IndexLaw::Deterministic(9), Summands::Iid(rad)).unwrap(),
        RandomSumSpec::new(
            IndexLaw::Geometric(0.05),
            Summands::Varying { variances: VarianceSequence { head: vec![0.5, 3.0, 0.0, 1.0], tail: 2.0 }, shape: SourceShape::Uniform },
        )
        .unwrap(),
        RandomSumSpec::new(
            IndexLaw::Pmf(vec![0.5, 0.25, 0.25]),
            Summands::Varying { variances: VarianceSequence { head: vec![1.0, 4.0], tail: 9.0 }, shape: SourceShape::Laplace },
        )
        .unwrap(),
    ];
    for spec in &specs {
        let m = m_distribution_auto(spec).unwrap();
        assert!((m.total() - 1.0).abs() <= 1e-10, "{spec:?}: {}", m.total());
        let t6 = theorem6_bound(spec, Coupling::Comonotone, 1).unwrap();
        assert_eq!(t6.recompute().unwrap().to_bits(), t6.value.to_bits());
        if spec.is_iid() {
            for coupling in [Coupling::Comonotone, Coupling::Independent] {
                let c1 = corollary1_bound(spec, coupling, 2).unwrap();
                assert_eq!(c1.recompute().unwrap().to_bits(), c1.value.to_bits());
            }
        }
    }
}

#[test]
fn comonotone_coupling_beats_independent() {
    for k in [3usize, 8] {
        let spec = RandomSumSpec::new(IndexLaw::Deterministic(k), Summands::Iid(SourceDistribution::uniform(1.0).unwrap())).unwrap();
        let a = corollary1_bound(&spec, Coupling::Comonotone, 0).unwrap();
        let b = corollary1_bound(&spec, Coupling::Independent, 0).unwrap();
        assert!(a.components["index_gap"] <= b.components["index_gap"]);
    }
    let spec = RandomSumSpec::new(IndexLaw::Pmf(vec![0.1, 0.6, 0.3]), Summands::Iid(SourceDistribution::uniform(1.0).unwrap())).unwrap();
    let a = corollary1_bound(&spec, Coupling::Comonotone, 0).unwrap();
    let b = corollary1_bound(&spec, Coupling::Independent, 0).unwrap();
    assert!(a.value <= b.value);
}

#[test]
fn sweep_certification_with_wide_bands() {
    for (src, b) in [
        (SourceDistribution::rademacher(2f64.sqrt()).unwrap(), 1.0),
        (SourceDistribution::uniform(6f64.sqrt() * 0.5).unwrap(), 0.5),
        (SourceDistribution::skewed_atoms(2.0 * 2.0 / 3.0).unwrap(), 2.0),
    ] {
        let spec = SweepSpec { source: src.clone(), b, p_grid: vec![0.2, 0.02, 0.002], n: 40_000, seed: 3 };
        let r = convergence_sweep(&spec).unwrap();
        for pt in &r.points {
            let t7 = theorem7_bound(pt.p, b, src.abs_third()).unwrap();
            assert!(pt.d_bl_lower.value <= t7.value + 4.0 * pt.d_bl_lower.std_error);
            let kb = kolmogorov_from_bl(t7.value.min(2.0), 1.0 / (2.0 * b)).unwrap();
            assert!(pt.d_k.value <= kb + 4.0 * dkw_band(pt.n), "{} p={}", src.label(), pt.p);
            assert_eq!(pt.thm7.recompute().unwrap().to_bits(), pt.thm7.value.to_bits());
            assert_eq!(pt.prop1.recompute().unwrap().to_bits(), pt.prop1.value.to_bits());
        }
    }
}

#[test]
fn scaled_sum_variance_is_two_b_squared() {
    for (i, (src, p)) in [
        (SourceDistribution::rademacher(2f64.sqrt()).unwrap(), 0.05),
        (SourceDistribution::uniform(6f64.sqrt()).unwrap(), 0.01),
        (SourceDistribution::laplace(1.0).unwrap(), 0.2),
    ]
    .into_iter()
    .enumerate()
    {
        let spec = RandomSumSpec::geometric(p, src).unwrap();
        let s = random_sum_sample(&spec, 200_000, 170 + i as u64).unwrap();
        let v = mean_and_se(s.values(), |x| x * x);
        assert!(v.within(2.0, 4.0), "{v:?}");
    }
}
