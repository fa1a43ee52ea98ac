use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::Config;
use revwel::anticonc::{central_binomial, interval_count_signed_sums, RandomVariableModel, SignProfileTable};
use revwel::cheby::{weighted_ratio_inequality, MonotoneTriple, RealFn};
use revwel::dist::{classify, VirtualValueCurve};
use revwel::{AgentSet, Distribution, FeasibilityEnvironment};

fn kinds() -> Vec<Distribution> {
    vec![
        Distribution::uniform(0.0, 1.0).unwrap(),
        Distribution::uniform(1.0, 3.0).unwrap(),
        Distribution::exponential(1.0).unwrap(),
        Distribution::exponential(2.5).unwrap(),
        Distribution::pareto(2.0, 1.0).unwrap(),
        Distribution::pareto(3.5, 2.0).unwrap(),
        Distribution::equal_revenue(),
        Distribution::counterexample(),
    ]
}

fn cases(n: u32) -> Config {
    Config::with_cases(n)
}

proptest! {
    #![proptest_config(cases(1000))]

    #[test]
    fn cdf_inverts_quantile(k in 0..8usize, q in 0.0..1.0f64) {
        let d = &kinds()[k];
        let x = d.quantile(q).unwrap();
        prop_assert!((d.cdf(x) - q).abs() <= 1e-8, "{d:?} q={q} x={x}");
    }

    #[test]
    fn quantile_inverts_cdf(k in 0..8usize, t in 0.0..1.0f64) {
        let d = &kinds()[k];
        let x = d.support_lo() + t * (d.quantile(0.99).unwrap() - d.support_lo());
        prop_assert!((d.quantile(d.cdf(x)).unwrap() - x).abs() <= 1e-8, "{d:?} x={x}");
    }

    #[test]
    fn empirical_quantile_is_smallest_covering_sample(
        samples in prop::collection::vec(0.0..10.0f64, 1..40),
        q in 0.0..1.0f64,
    ) {
        let d = Distribution::empirical(samples).unwrap();
        let x = d.quantile(q).unwrap();
        prop_assert!(d.cdf(x) >= q);
        prop_assert!(d.cdf(x - 1e-9 * (1.0 + x)) < q || x == d.support_lo());
    }

    #[test]
    fn cdf_is_monotone(k in 0..8usize, a in 0.0..50.0f64, b in 0.0..50.0f64) {
        let d = &kinds()[k];
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(d.cdf(lo) <= d.cdf(hi));
        prop_assert!((0.0..=1.0).contains(&d.cdf(lo)));
    }

    #[test]
    fn monopoly_revenue_dominates_every_price(k in 0..8usize, q in 0.0..1.0f64) {
        let d = &kinds()[k];
        let curve = VirtualValueCurve::new(d, 1024).unwrap();
        let x = d.quantile(q).unwrap();
        let r = x * d.accept_probability(x);
        prop_assert!(curve.monopoly_revenue >= r - 1e-12 * (1.0 + r), "{d:?} x={x}");
    }
}

#[test]
fn ironed_curve_is_non_decreasing_for_every_kind() {
    let mut all = kinds();
    all.push(Distribution::empirical(vec![0.1, 0.2, 0.2, 0.9, 3.0, 3.5, 8.0]).unwrap());
    // A bimodal sample whose revenue curve is not concave.
    all.push(Distribution::empirical((0..200).map(|i| if i % 2 == 0 { 1.0 + i as f64 * 1e-3 } else { 10.0 + i as f64 * 1e-3 }).collect()).unwrap());
    for d in &all {
        let curve = VirtualValueCurve::new(d, 4096).unwrap();
        for w in curve.ironed.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-9 * (1.0 + w[0].1.abs()), "{d:?}: {w:?}");
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 0..500 {
            let x = d.quantile(k as f64 / 500.0).unwrap();
            let v = curve.ironed_value(x);
            assert!(v >= prev - 1e-9 * (1.0 + prev.abs()), "{d:?} at {x}");
            prev = v;
        }
    }
}

proptest! {
    #![proptest_config(cases(200))]

    #[test]
    fn classification_chain_holds(
        k in 0..8usize,
        c in 0.5..20.0f64,
        lo in 0.0..3.0f64,
        width in 0.1..5.0f64,
        rate in 0.1..5.0f64,
        alpha in 1.1..6.0f64,
    ) {
        let d = match k {
            0 => Distribution::uniform(lo, lo + width).unwrap(),
            1 => Distribution::exponential(rate).unwrap(),
            2 => Distribution::pareto(alpha, width).unwrap(),
            _ => kinds()[k].clone(),
        };
        let r = classify(&d, c, 256).unwrap();
        prop_assert!(!r.mhr || r.hyper_regular);
        prop_assert!(!r.hyper_regular || r.regular);
        prop_assert!(!r.strongly_c_bounded || r.c_bounded);
        prop_assert_eq!(r.c_bounded, r.mean.is_finite() && c * r.rho >= r.mean - 1e-9 * (1.0 + r.mean.abs()));
    }
}

// env

fn explicit_family(n: usize, masks: &[u64]) -> FeasibilityEnvironment {
    let limit = 1u64 << n;
    let mut sets: Vec<AgentSet> = masks.iter().map(|m| AgentSet(m % limit)).collect();
    sets.push(AgentSet(masks[0] % limit));
    FeasibilityEnvironment::explicit(n, sets).unwrap()
}

fn brute_force(e: &FeasibilityEnvironment, w: &[f64]) -> (AgentSet, f64) {
    let mut best = (AgentSet::EMPTY, f64::NEG_INFINITY);
    for m in 0..1u64 << e.n() {
        let s = AgentSet(m);
        if e.is_feasible(s) {
            let total = s.weight(w);
            if total > best.1 {
                best = (s, total);
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(cases(500))]

    #[test]
    fn max_weight_matches_enumeration(
        n in 1..=12usize,
        masks in prop::collection::vec(any::<u64>(), 1..200),
        w in prop::collection::vec(-1.0..1.0f64, 12),
    ) {
        let e = explicit_family(n, &masks);
        let w = &w[..n];
        let got = e.max_weight_set(w).unwrap();
        let want = brute_force(&e, w);
        prop_assert_eq!(got.0, want.0);
        prop_assert!((got.1 - want.1).abs() < 1e-12);
    }

    #[test]
    fn closure_is_downward_closed_and_idempotent(
        n in 1..=10usize,
        masks in prop::collection::vec(any::<u64>(), 1..30),
    ) {
        let e = explicit_family(n, &masks);
        let closed = e.downward_closure().unwrap();
        prop_assert!(closed.is_downward_closed());
        for s in e.feasible_sets().unwrap() {
            prop_assert!(closed.is_feasible(s));
        }
        prop_assert_eq!(closed.downward_closure().unwrap(), closed);
    }

    #[test]
    fn raising_a_weight_never_lowers_the_optimum(
        n in 1..=8usize,
        masks in prop::collection::vec(any::<u64>(), 1..30),
        w in prop::collection::vec(0.0..1.0f64, 8),
        i in 0..8usize,
        bump in 0.0..1.0f64,
    ) {
        let e = explicit_family(n, &masks).downward_closure().unwrap();
        let mut w = w[..n].to_vec();
        let before = e.max_weight_set(&w).unwrap().1;
        w[i % n] += bump;
        prop_assert!(e.max_weight_set(&w).unwrap().1 >= before);
    }

    #[test]
    fn built_in_kinds_match_enumeration(
        n in 1..=10usize,
        k in 1..=10usize,
        w in prop::collection::vec(-1.0..1.0f64, 10),
    ) {
        let w = &w[..n];
        for e in [
            FeasibilityEnvironment::public_project(n).unwrap(),
            FeasibilityEnvironment::single_item(n).unwrap(),
            FeasibilityEnvironment::k_uniform(n, k.min(n)).unwrap(),
        ] {
            let got = e.max_weight_set(w).unwrap();
            let want = brute_force(&e, w);
            prop_assert!((got.1 - want.1).abs() < 1e-12, "{e:?}");
            prop_assert!(e.is_feasible(got.0));
        }
    }
}

// anticonc

fn atoms_strategy(max_atoms: usize) -> impl Strategy<Value = RandomVariableModel> {
    prop::collection::vec((-5.0..5.0f64, 0.01..1.0f64), 1..=max_atoms).prop_map(|raw| {
        let total: f64 = raw.iter().map(|a| a.1).sum();
        RandomVariableModel::finite(raw.into_iter().map(|(x, p)| (x, p / total)).collect()).unwrap()
    })
}

/// Models with at least two atoms, rescaled so that `MDM ≥ 1`.
fn spread_strategy() -> impl Strategy<Value = RandomVariableModel> {
    (atoms_strategy(5), 1.0..2.0f64)
        .prop_filter("needs two atoms", |(x, _)| x.support_size().unwrap() >= 2)
        .prop_map(|(x, stretch)| {
            let mdm = x.median_md_mdm().unwrap().2;
            x.affine(0.0, stretch / mdm)
        })
}

proptest! {
    #![proptest_config(cases(200))]

    #[test]
    fn md_mdm_chain_and_shift_invariance(x in atoms_strategy(8), a in -10.0..10.0f64, seed in any::<u64>()) {
        prop_assert!(revwel::anticonc::mdm_md_relation_check(&x, seed).unwrap());
        let (_, md, mdm) = x.median_md_mdm().unwrap();
        for y in [x.affine(-a, 1.0), x.affine(a, -1.0)] {
            let (_, md2, mdm2) = y.median_md_mdm().unwrap();
            prop_assert!((mdm2 - mdm).abs() <= 1e-9 && (md2 - md).abs() <= 1e-9);
        }
    }

    #[test]
    fn mdm_does_not_depend_on_median_choice(lo in -5.0..0.0f64, hi in 0.0..5.0f64, extra in 0.0..5.0f64) {
        // Half the mass at or below `lo`, half at or above `hi`: every point
        // of [lo, hi] is a median.
        let x = RandomVariableModel::finite(vec![(lo - extra, 0.25), (lo, 0.25), (hi, 0.3), (hi + extra, 0.2)]).unwrap();
        let (l, u) = (x.lower_median().unwrap(), x.upper_median().unwrap());
        prop_assert!(l < u);
        let at_l = x.abs_deviation(l).unwrap();
        prop_assert!((at_l - x.abs_deviation(u).unwrap()).abs() <= 1e-9);
        prop_assert!((at_l - x.abs_deviation(0.5 * (l + u)).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn sign_table_comparable_gap_at_least_two(xs in prop::collection::vec(spread_strategy(), 1..=8)) {
        let t = SignProfileTable::new(&xs).unwrap();
        prop_assert!(t.coupling_identity_holds());
        prop_assert!(t.min_comparable_gap() >= 2.0 - 1e-9, "{}", t.min_comparable_gap());
    }
}

fn signed_sum_count(xs: &[f64], a: f64) -> usize {
    (0..1u32 << xs.len())
        .filter(|m| {
            let s: f64 = xs.iter().enumerate().map(|(i, x)| if m >> i & 1 == 1 { *x } else { -x }).sum();
            s > a && s <= a + 2.0
        })
        .count()
}

proptest! {
    #![proptest_config(cases(500))]

    #[test]
    fn signed_sum_interval_counts(
        xs in prop::collection::vec(1.0..4.0f64, 1..=10),
        snap in any::<bool>(),
        shifts in prop::collection::vec(-1.0..1.0f64, 20),
    ) {
        // Snapping to whole numbers makes many sums collide, the hard case.
        let xs: Vec<f64> = if snap { xs.iter().map(|x| x.floor()).collect() } else { xs };
        let span: f64 = xs.iter().sum();
        for s in shifts {
            let a = s * (span + 2.0) - 1.0;
            let c = interval_count_signed_sums(&xs, a).unwrap();
            prop_assert_eq!(c.count, signed_sum_count(&xs, a));
            prop_assert_eq!(c.bound, central_binomial(xs.len()));
            prop_assert!(c.ok, "{xs:?} a={a} count={}", c.count);
        }
    }

    #[test]
    fn sign_table_interval_counts(xs in prop::collection::vec(spread_strategy(), 1..=10), a in -20.0..20.0f64) {
        let t = SignProfileTable::new(&xs).unwrap();
        let c = t.interval_count(a);
        let brute = t.means.iter().filter(|&&e| e > a && e <= a + 2.0).count();
        prop_assert_eq!(c.count, brute);
        prop_assert!(c.ok && c.bound == central_binomial(xs.len()));
    }
}

#[test]
fn signed_sums_reject_small_terms() {
    assert!(interval_count_signed_sums(&[1.0, 0.5], 0.0).is_err());
}

// cheby

fn interpolate(knots: &[(f64, f64)], x: f64) -> f64 {
    if x <= knots[0].0 {
        return knots[0].1;
    }
    for w in knots.windows(2) {
        if x <= w[1].0 {
            let t = (x - w[0].0) / (w[1].0 - w[0].0).max(f64::MIN_POSITIVE);
            return w[0].1 + t * (w[1].1 - w[0].1);
        }
    }
    knots[knots.len() - 1].1
}

/// Piecewise-linear function through sorted knots on `[-3, 3]`; with
/// `monotone` the knot values are running sums of non-negative steps.
fn piecewise(monotone: bool, non_negative: bool) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-3.0..3.0f64, -2.0..2.0f64), 2..8).prop_map(move |raw| {
        let mut xs: Vec<f64> = raw.iter().map(|r| r.0).collect();
        xs.sort_by(f64::total_cmp);
        let mut level = raw[0].1;
        xs.iter()
            .zip(&raw)
            .map(|(&x, &(_, y))| {
                let v = if monotone {
                    level += y.abs();
                    level
                } else if non_negative {
                    y.abs()
                } else {
                    y
                };
                (x, v)
            })
            .collect()
    })
}

fn to_fn(knots: Vec<(f64, f64)>) -> RealFn {
    Arc::new(move |x| interpolate(&knots, x))
}

fn model_in_range() -> impl Strategy<Value = RandomVariableModel> {
    atoms_strategy(12).prop_map(|x| x.affine(0.0, 0.6))
}

proptest! {
    #![proptest_config(cases(1000))]

    #[test]
    fn chebyshev_ratio_inequality(
        f in piecewise(true, false),
        g in piecewise(true, false),
        h in piecewise(false, true),
        x in model_in_range(),
    ) {
        let RandomVariableModel::Finite { atoms } = &x else { unreachable!() };
        let hv = |z: f64| interpolate(&h, z);
        let eh: f64 = atoms.iter().map(|&(z, p)| p * hv(z)).sum();
        prop_assume!(eh > 1e-6);
        // Shifting g by a constant keeps it monotone; push E[gh] above zero.
        let egh: f64 = atoms.iter().map(|&(z, p)| p * interpolate(&g, z) * hv(z)).sum();
        let lift = if egh / eh < 0.1 { 0.1 - egh / eh } else { 0.0 };
        let g: Vec<(f64, f64)> = g.into_iter().map(|(z, v)| (z, v + lift)).collect();
        let t = MonotoneTriple::new(to_fn(f), to_fn(g), to_fn(h), x, 64).unwrap();
        let r = weighted_ratio_inequality(&t, 64).unwrap();
        prop_assert!(r.ok, "{r:?}");
    }
}

#[test]
fn decreasing_f_is_caught() {
    let x = RandomVariableModel::finite(vec![(1.0, 1.0 / 3.0), (2.0, 1.0 / 3.0), (3.0, 1.0 / 3.0)]).unwrap();
    let (f, g, h): (RealFn, RealFn, RealFn) = (Arc::new(|x| -x), Arc::new(|x| x), Arc::new(|_| 1.0));
    assert!(MonotoneTriple::new(f.clone(), g.clone(), h.clone(), x.clone(), 16).is_err());
    let r = weighted_ratio_inequality(&MonotoneTriple::new_unchecked(f, g, h, x), 16).unwrap();
    assert!(!r.ok && (r.lhs + 7.0 / 3.0).abs() < 1e-12 && (r.rhs + 2.0).abs() < 1e-12);
}
