//! Frozen example values, each checked against an oracle computed here
//! without going through the library's own numerics.

use revwel::anticonc::{interval_count_signed_sums, RandomVariableModel, SignProfileTable};
use revwel::cheby::{weighted_ratio_inequality, MonotoneTriple, RealFn};
use revwel::dist::{classify, counterexample_delta, ironed_virtual_value, monopoly};
use revwel::mech::{Market, MechanismId};
use revwel::sim::{counterexample_exact_moments, counterexample_upper_bound, public_project_quadrature};
use revwel::{AgentSet, Distribution, FeasibilityEnvironment};
use std::sync::Arc;

fn uniform() -> Distribution {
    Distribution::uniform(0.0, 1.0).unwrap()
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Composite Simpson's rule.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / (2 * panels) as f64;
    let mut s = f(a) + f(b);
    for k in 1..2 * panels {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn delta_oracle() -> f64 {
    bisect(1.5, 2.5, |d| d * d.ln().powi(2) - 1.0)
}

fn set(agents: &[usize]) -> AgentSet {
    AgentSet::from_agents(agents.iter().map(|a| a - 1))
}

// dist

#[test]
fn cdf_examples() {
    assert_eq!(uniform().cdf(0.5), 0.5);
    assert!((Distribution::equal_revenue().cdf(4.0) - 0.75).abs() < 1e-15);
    assert!(Distribution::counterexample().cdf(0.0).abs() < 1e-12);
}

#[test]
fn quantile_examples() {
    assert_eq!(uniform().quantile(0.25).unwrap(), 0.25);
    let er = Distribution::equal_revenue();
    let oracle = bisect(1.0, 1e6, |x| er.cdf(x) - 0.75);
    let q = er.quantile(0.75).unwrap();
    assert!((q - 4.0).abs() < 1e-12 && (q - oracle).abs() < 1e-9);
    assert_eq!(Distribution::counterexample().quantile(0.0).unwrap(), 0.0);
}

#[test]
fn delta_matches_independent_bisection() {
    let d = delta_oracle();
    assert!((counterexample_delta() - d).abs() < 1e-12);
    assert!((d - 2.02).abs() < 0.01);
}

#[test]
fn virtual_value_examples() {
    assert!((uniform().virtual_value(0.75).unwrap() - 0.5).abs() < 1e-15);
    assert!(uniform().virtual_value(0.5).unwrap().abs() < 1e-15);
    let delta = delta_oracle();
    let e = std::f64::consts::E;
    let phi = Distribution::counterexample().virtual_value(e - delta).unwrap();
    assert!((phi - (-delta + 2.0 * e / 3.0)).abs() < 1e-9);
}

#[test]
fn counterexample_virtual_value_matches_finite_difference_density() {
    let d = Distribution::counterexample();
    let delta = delta_oracle();
    let survival = |t: f64| {
        let x = t + delta;
        1.0 / (x * x.ln().powi(2))
    };
    for t in [0.3, 1.0, 5.0, 40.0] {
        let h = 1e-5 * (1.0 + t);
        let f = (survival(t - h) - survival(t + h)) / (2.0 * h);
        let phi = t - survival(t) / f;
        assert!((d.virtual_value(t).unwrap() - phi).abs() < 1e-6 * (1.0 + t));
    }
}

#[test]
fn ironed_examples() {
    assert!((ironed_virtual_value(&uniform(), 0.75, 1024).unwrap() - 0.5).abs() < 1e-3);
    let pareto = Distribution::pareto(2.0, 1.0).unwrap();
    // φ(x) = x − x/α for a Pareto tail.
    assert!((ironed_virtual_value(&pareto, 2.0, 1024).unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn monopoly_matches_price_grid_search() {
    let grid_best = |d: &Distribution, hi: f64| {
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..=200_000 {
            let p = hi * k as f64 / 200_000.0;
            let r = p * d.accept_probability(p);
            if r > best.1 + 1e-12 {
                best = (p, r);
            }
        }
        best
    };
    let (p, r) = monopoly(&uniform()).unwrap();
    let (gp, gr) = grid_best(&uniform(), 1.0);
    assert!((p - 0.5).abs() < 1e-6 && (r - 0.25).abs() < 1e-12);
    assert!((p - gp).abs() < 1e-4 && (r - gr).abs() < 1e-9);

    let pareto = Distribution::pareto(2.0, 1.0).unwrap();
    let (p, r) = monopoly(&pareto).unwrap();
    let (gp, gr) = grid_best(&pareto, 50.0);
    assert!((p - 1.0).abs() < 1e-9 && (r - 1.0).abs() < 1e-9);
    assert!((p - gp).abs() < 1e-3 && (r - gr).abs() < 1e-9);

    let (p, r) = monopoly(&Distribution::equal_revenue()).unwrap();
    assert!((p - 1.0).abs() < 1e-9 && (r - 1.0).abs() < 1e-9);
}

#[test]
fn counterexample_mean_is_reciprocal_log_delta() {
    let d = Distribution::counterexample();
    let delta = delta_oracle();
    // ∫ S(t) dt with t = e^y − δ, so dt = e^y dy and S = 1/(e^y y²).
    let body = simpson(|y| 1.0 / (y * y), delta.ln(), 200.0, 200_000);
    let tail = 1.0 / 200.0;
    assert!((body + tail - 1.0 / delta.ln()).abs() < 1e-9);
    assert!((d.mean() - 1.0 / delta.ln()).abs() < 1e-12);
}

#[test]
fn classify_examples() {
    let u2 = classify(&uniform(), 2.0, 1024).unwrap();
    assert!(u2.c_bounded && !u2.strongly_c_bounded);
    assert!((u2.rho - 0.25).abs() < 1e-9 && (u2.mean - 0.5).abs() < 1e-12);
    assert!(classify(&uniform(), 4.0, 1024).unwrap().strongly_c_bounded);

    let ce = classify(&Distribution::counterexample(), 6.0, 1024).unwrap();
    assert!(ce.c_bounded && ce.regular && !ce.hyper_regular);
    assert!(ce.rho > 0.25);

    let er = classify(&Distribution::equal_revenue(), 1e6, 1024).unwrap();
    assert!(!er.c_bounded && er.mean.is_infinite());
}

// env

#[test]
fn feasibility_examples() {
    assert!(!FeasibilityEnvironment::public_project(3).unwrap().is_feasible(set(&[1, 3])));
    assert!(FeasibilityEnvironment::single_item(3).unwrap().is_feasible(set(&[2])));
    let e = FeasibilityEnvironment::explicit(2, [set(&[]), set(&[1]), set(&[1, 2])]).unwrap();
    assert!(!e.is_feasible(set(&[2])));
}

#[test]
fn downward_closed_examples() {
    assert!(!FeasibilityEnvironment::public_project(2).unwrap().is_downward_closed());
    assert!(FeasibilityEnvironment::k_uniform(5, 2).unwrap().is_downward_closed());
    let e = FeasibilityEnvironment::explicit(2, [set(&[]), set(&[1, 2])]).unwrap();
    assert!(!e.is_downward_closed());
}

#[test]
fn max_weight_examples() {
    let brute = |e: &FeasibilityEnvironment, w: &[f64]| {
        let mut best = (AgentSet::EMPTY, f64::NEG_INFINITY);
        for m in 0..1u64 << e.n() {
            let s = AgentSet(m);
            let total: f64 = s.iter().map(|i| w[i]).sum();
            if e.is_feasible(s) && total > best.1 {
                best = (s, total);
            }
        }
        best
    };
    let cases = [
        (FeasibilityEnvironment::single_item(2).unwrap(), vec![0.3, 0.9], set(&[2]), 0.9),
        (FeasibilityEnvironment::public_project(2).unwrap(), vec![-0.6, -0.4], set(&[]), 0.0),
        (FeasibilityEnvironment::k_uniform(3, 2).unwrap(), vec![5.0, -1.0, 3.0], set(&[1, 3]), 8.0),
    ];
    for (e, w, s, total) in cases {
        let got = e.max_weight_set(&w).unwrap();
        assert_eq!(got, (s, total));
        assert_eq!(got, brute(&e, &w));
    }
}

#[test]
fn closure_examples() {
    let e = FeasibilityEnvironment::explicit(2, [set(&[]), set(&[1, 2])]).unwrap();
    let closed = e.downward_closure().unwrap();
    assert_eq!(closed.feasible_sets().unwrap(), vec![set(&[]), set(&[1]), set(&[2]), set(&[1, 2])]);
    assert_eq!(closed.downward_closure().unwrap(), closed);
    let top = FeasibilityEnvironment::explicit(3, [set(&[1, 2, 3])]).unwrap();
    assert_eq!(top.downward_closure().unwrap().feasible_sets().unwrap().len(), 8);
}

// mech

fn uniform_market(env: FeasibilityEnvironment) -> Market {
    Market::iid(env, uniform()).unwrap()
}

#[test]
fn efficient_examples() {
    let m = uniform_market(FeasibilityEnvironment::single_item(2).unwrap());
    let o = m.efficient_outcome(&[0.3, 0.9]).unwrap();
    assert_eq!(o.served, set(&[2]));
    assert_eq!(o.payments.unwrap(), vec![0.0, 0.3]);

    let m = uniform_market(FeasibilityEnvironment::public_project(2).unwrap());
    let o = m.efficient_outcome(&[0.3, 0.9]).unwrap();
    assert_eq!(o.served, set(&[1, 2]));
    assert_eq!(o.payments.unwrap(), vec![0.0, 0.0]);

    let m = uniform_market(FeasibilityEnvironment::k_uniform(1, 1).unwrap());
    let o = m.efficient_outcome(&[0.7]).unwrap();
    assert_eq!(o.served, set(&[1]));
    assert_eq!(o.payments.unwrap(), vec![0.0]);
}

#[test]
fn optimal_examples() {
    let m = uniform_market(FeasibilityEnvironment::public_project(2).unwrap());
    let o = m.optimal_outcome(&[0.3, 0.9]).unwrap();
    assert_eq!(o.served, set(&[1, 2]));
    assert!((o.virtual_revenue - 0.4).abs() < 1e-12);
    let o = m.optimal_outcome(&[0.2, 0.3]).unwrap();
    assert_eq!(o.served, AgentSet::EMPTY);
    assert_eq!(o.virtual_revenue, 0.0);

    let m = uniform_market(FeasibilityEnvironment::single_item(2).unwrap());
    assert_eq!(m.optimal_outcome(&[0.4, 0.45]).unwrap().served, AgentSet::EMPTY);
}

#[test]
fn vcg_l_examples() {
    let m = uniform_market(FeasibilityEnvironment::single_item(2).unwrap());
    let o = m.vcg_l_outcome(&[0.4, 0.8]).unwrap();
    assert_eq!(o.served, set(&[2]));
    assert!((o.payments.unwrap()[1] - 0.5).abs() < 1e-6);
    let o = m.vcg_l_outcome(&[0.4, 0.45]).unwrap();
    assert_eq!(o.served, AgentSet::EMPTY);
    assert_eq!(o.revenue(), 0.0);

    let m = uniform_market(FeasibilityEnvironment::k_uniform(3, 2).unwrap());
    let o = m.vcg_l_outcome(&[0.6, 0.7, 0.2]).unwrap();
    assert_eq!(o.served, set(&[1, 2]));
    let p = o.payments.unwrap();
    assert!((p[0] - 0.5).abs() < 1e-6 && (p[1] - 0.5).abs() < 1e-6 && p[2] == 0.0);
}

#[test]
fn payment_audit_examples() {
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-6);
    let m = uniform_market(FeasibilityEnvironment::single_item(2).unwrap());
    assert!(close(&m.payment_audit(MechanismId::Efficient, &[0.3, 0.9]).unwrap(), &[0.0, 0.3]));
    assert!(close(&m.payment_audit(MechanismId::Optimal, &[0.4, 0.8]).unwrap(), &[0.0, 0.5]));
    let m = uniform_market(FeasibilityEnvironment::public_project(1).unwrap());
    assert!(close(&m.payment_audit(MechanismId::Optimal, &[0.8]).unwrap(), &[0.5]));
}

// sim

#[test]
fn uniform_public_project_matches_convolution_oracle() {
    // φ = 2v − 1 is uniform on [−1, 1]; tabulate E[(φ₁ + φ₂)⁺] on a midpoint grid.
    let k = 4000;
    let mids: Vec<f64> = (0..k).map(|j| -1.0 + 2.0 * (j as f64 + 0.5) / k as f64).collect();
    let mut two = 0.0;
    for a in &mids {
        for b in &mids {
            two += (a + b).max(0.0);
        }
    }
    two /= (k * k) as f64;
    let one = mids.iter().map(|a| a.max(0.0)).sum::<f64>() / k as f64;

    let q1 = public_project_quadrature(&[uniform()]).unwrap();
    let q2 = public_project_quadrature(&[uniform(), uniform()]).unwrap();
    assert!((q1.revenue - one).abs() < 1e-6 && (q1.revenue - 0.25).abs() < 1e-9);
    assert!((q2.revenue - two).abs() < 1e-6 && (q2.revenue - 1.0 / 3.0).abs() < 1e-9);
    assert!((q1.ratio - 0.5).abs() < 1e-9 && (q2.ratio - 1.0 / 3.0).abs() < 1e-9);
}

#[test]
fn counterexample_bound_value_at_one_thousand() {
    let n = 1000f64;
    let e = std::f64::consts::E;
    let oracle = e / (e - 1.0) * 2.0 / ((n / (n.ln() * n.ln())).ln() + 2.0);
    assert!((counterexample_upper_bound(1000).unwrap() - oracle).abs() < 1e-15);
    assert!(counterexample_upper_bound(1).is_none());
}

#[test]
fn counterexample_single_agent_ratio_is_rho_over_mean() {
    let d = Distribution::counterexample();
    let (_, rho) = monopoly(&d).unwrap();
    let (rev, wel) = counterexample_exact_moments(1).unwrap();
    assert!((rev - rho).abs() < 1e-7, "{rev} vs {rho}");
    assert!((wel - 1.0 / delta_oracle().ln()).abs() < 1e-9);
    let ratio = rev / wel;
    assert!(ratio > 0.25 / 1.43 && ratio < 0.2);
}

// anticonc

#[test]
fn md_mdm_examples() {
    let (m, md, mdm) = RandomVariableModel::rademacher().median_md_mdm().unwrap();
    assert_eq!((m, md, mdm), (-1.0, 1.0, 1.0));
    assert_eq!(RandomVariableModel::constant(3.0).median_md_mdm().unwrap(), (3.0, 0.0, 0.0));
    let u = RandomVariableModel::analytic(uniform());
    let (m, md, mdm) = u.median_md_mdm().unwrap();
    assert!((m - 0.5).abs() < 1e-12 && (md - 0.25).abs() < 1e-9 && (mdm - 0.25).abs() < 1e-9);
}

#[test]
fn skewed_atoms_md_is_twice_excess_over_mean() {
    let x = RandomVariableModel::finite(vec![(0.0, 0.9), (10.0, 0.1)]).unwrap();
    let (m, md, mdm) = x.median_md_mdm().unwrap();
    // Mean 1: MD = 0.9·1 + 0.1·9 = 1.8; median 0 gives MDM = 1.
    assert_eq!(m, 0.0);
    assert!((md - 1.8).abs() < 1e-12 && (mdm - 1.0).abs() < 1e-12);
    assert!((md - 2.0 * x.excess_over(1.0).unwrap()).abs() < 1e-12);
}

#[test]
fn sign_table_examples() {
    let t = SignProfileTable::new(&[RandomVariableModel::rademacher()]).unwrap();
    let mut means = t.means.clone();
    means.sort_by(f64::total_cmp);
    assert_eq!(means, vec![-1.0, 1.0]);

    let r = RandomVariableModel::rademacher();
    let t = SignProfileTable::new(&[r.clone(), r]).unwrap();
    let mut means = t.means.clone();
    means.sort_by(f64::total_cmp);
    assert_eq!(means, vec![-2.0, 0.0, 0.0, 2.0]);

    let t = SignProfileTable::new(&[RandomVariableModel::constant(1.5)]).unwrap();
    assert_eq!(t.means[0], t.means[1]);
}

#[test]
fn interval_count_examples() {
    let brute = |xs: &[f64], a: f64| {
        (0..1u32 << xs.len())
            .filter(|m| {
                let s: f64 = xs.iter().enumerate().map(|(i, x)| if m >> i & 1 == 1 { *x } else { -x }).sum();
                s > a && s <= a + 2.0
            })
            .count()
    };
    let c = interval_count_signed_sums(&[1.0; 4], -1.0).unwrap();
    assert_eq!((c.count, c.bound, c.ok), (6, 6, true));
    assert_eq!(brute(&[1.0; 4], -1.0), 6);
    let xs = [1.0, 1.5, 3.0];
    let c = interval_count_signed_sums(&xs, -1.0).unwrap();
    assert!(c.ok && c.count <= 3 && c.count == brute(&xs, -1.0));
    let c = interval_count_signed_sums(&[1.0], 0.0).unwrap();
    assert_eq!((c.count, c.bound), (1, 1));
}

// cheby

fn func(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> RealFn {
    Arc::new(f)
}

#[test]
fn chebyshev_examples() {
    let x = RandomVariableModel::analytic(uniform());
    let t = MonotoneTriple::new(func(|x| x), func(|x| x), func(|_| 1.0), x.clone(), 256).unwrap();
    let r = weighted_ratio_inequality(&t, 256).unwrap();
    assert!((r.lhs - 2.0 / 3.0).abs() < 1e-9 && (r.rhs - 0.5).abs() < 1e-9 && r.ok);

    let t = MonotoneTriple::new(func(|_| 2.5), func(|x| x * x), func(|x| 1.0 + x), x.clone(), 256).unwrap();
    let r = weighted_ratio_inequality(&t, 256).unwrap();
    assert!((r.lhs - r.rhs).abs() < 1e-12 && r.ok);

    let f = func(|x: f64| if x > 0.0 { (2.0 * x - 1.0).max(0.0) / x } else { 0.0 });
    let g = func(|x: f64| if x >= 0.7 { 1.0 } else { 0.2 });
    let t = MonotoneTriple::new(f, g, func(|x| x), x, 256).unwrap();
    let r = weighted_ratio_inequality(&t, 256).unwrap();
    assert!(r.ok && (r.rhs - 0.5).abs() < 1e-6, "{r:?}");
}
