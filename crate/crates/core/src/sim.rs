//! Seeded Monte Carlo and quadrature estimates of expected revenue, expected
//! welfare, and their ratio.
//!
//! Agent `i`'s value in sample `s` is `Q_i(u)` with
//! `u = uniform_at(stream_key(seed, i), s)`, so every mechanism evaluated
//! under one seed sees the same value profiles. Unbounded distributions are
//! sampled with `u` clipped at `1 − TRUNCATION_TAIL`.

use serde::Serialize;

use crate::dist::{
    classify, counterexample_delta, ClassificationReport, Distribution, DistributionKind, VirtualValueCurve,
    DEFAULT_IRONING_GRID, TRUNCATION_TAIL,
};
use crate::env::EnvKind;
use crate::error::{Error, Result};
use crate::mech::{Market, MechanismId};
use crate::quad;
use crate::rng::{stream_key, uniform_at};
use crate::stats::{chunked_reduce, EstimateWithCI, PairMoments};

pub const MIN_SAMPLES: u64 = 1000;

/// Grid used when checking distribution hypotheses for an audit.
pub const AUDIT_CLASSIFY_GRID: usize = 1024;

#[derive(Clone, Debug, Serialize)]
pub struct RatioReport {
    pub n: usize,
    pub c: f64,
    pub mechanism: MechanismId,
    pub revenue: EstimateWithCI,
    pub welfare: EstimateWithCI,
    pub ratio: f64,
    pub ratio_se: f64,
    pub bound: f64,
    pub bound_satisfied: bool,
}

impl RatioReport {
    fn from_moments(m: &PairMoments, n: usize, c: f64, mechanism: MechanismId, bound: f64, seed: u64) -> Self {
        let (ratio, ratio_se) = m.ratio();
        Self {
            n,
            c,
            mechanism,
            revenue: m.estimate_a(seed),
            welfare: m.estimate_b(seed),
            ratio,
            ratio_se,
            bound,
            bound_satisfied: ratio >= bound - 3.0 * ratio_se,
        }
    }

    /// Re-evaluates the report against a different lower bound.
    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = bound;
        self.bound_satisfied = self.ratio >= bound - 3.0 * self.ratio_se;
        self
    }
}

fn check_samples(n_samples: u64) -> Result<()> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    Ok(())
}

fn check_finite_means(dists: &[Distribution]) -> Result<()> {
    if dists.iter().any(|d| !d.mean().is_finite()) {
        return Err(Error::InfiniteMean);
    }
    Ok(())
}

/// Highest uniform level used when sampling `dist`.
fn sampling_cap(dist: &Distribution) -> f64 {
    if dist.support_hi().is_finite() {
        1.0
    } else {
        1.0 - TRUNCATION_TAIL
    }
}

/// Fills `v` with the value profile of sample `s`.
fn draw_profile(dists: &[Distribution], keys: &[u64], caps: &[f64], s: u64, v: &mut [f64]) {
    for (i, slot) in v.iter_mut().enumerate() {
        let u = uniform_at(keys[i], s).min(caps[i]);
        *slot = dists[i].quantile(u).expect("clipped level is a valid quantile");
    }
}

/// Runs `per_profile` on `n_samples` seeded profiles and accumulates the
/// returned `(a, b)` pairs.
pub fn simulate_profiles<F>(dists: &[Distribution], n_samples: u64, seed: u64, per_profile: F) -> PairMoments
where
    F: Fn(&[f64]) -> (f64, f64) + Sync + Send,
{
    let keys: Vec<u64> = (0..dists.len() as u64).map(|i| stream_key(seed, i)).collect();
    let caps: Vec<f64> = dists.iter().map(sampling_cap).collect();
    chunked_reduce(n_samples, |start, len| {
        let mut acc = PairMoments::default();
        let mut v = vec![0.0; dists.len()];
        for s in start..start + len {
            draw_profile(dists, &keys, &caps, s, &mut v);
            let (a, b) = per_profile(&v);
            acc.push(a, b);
        }
        acc
    })
}

/// Expected revenue of `mechanism` and expected welfare of the efficient
/// allocation, with a vacuous zero lower bound.
pub fn estimate_revenue_welfare(
    market: &Market,
    mechanism: MechanismId,
    n_samples: u64,
    seed: u64,
) -> Result<RatioReport> {
    check_samples(n_samples)?;
    check_finite_means(market.dists())?;
    if mechanism == MechanismId::VcgL && !market.env().is_downward_closed() {
        return Err(Error::NotDownwardClosed);
    }
    let moments = simulate_profiles(market.dists(), n_samples, seed, |v| {
        let revenue = market
            .outcome(mechanism, v)
            .expect("profile and environment were validated")
            .revenue();
        let welfare = market.env().max_weight_set(v).expect("profile length matches").1;
        (revenue, welfare)
    });
    Ok(RatioReport::from_moments(&moments, market.n(), f64::NAN, mechanism, 0.0, seed))
}

/// Exact revenue and welfare of the optimal public-project mechanism for one
/// or two agents with regular distributions, by nested quadrature.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuadratureReport {
    pub revenue: f64,
    pub welfare: f64,
    pub ratio: f64,
    pub abs_error: f64,
}

/// Per-agent helpers in upper-tail-probability coordinates `s = Pr(X > x)`.
struct TailView<'a> {
    dist: &'a Distribution,
}

impl TailView<'_> {
    fn x(&self, s: f64) -> f64 {
        self.dist.inverse_survival(s.clamp(f64::MIN_POSITIVE, 1.0)).expect("s in (0, 1]")
    }

    fn phi(&self, s: f64) -> f64 {
        self.dist.virtual_value(self.x(s)).expect("inside the support")
    }

    /// Revenue curve `R(s) = s · x(s)`, which integrates `φ` over the top
    /// `s` of the distribution.
    fn revenue_curve(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            s * self.x(s)
        }
    }

    /// Largest `s` with `φ(x(s)) ≥ level`, i.e. the mass where `φ ≥ level`.
    fn mass_above(&self, level: f64) -> f64 {
        let lo = self.dist.support_lo();
        if self.dist.virtual_value(lo).expect("support_lo is in the support") >= level {
            return 1.0;
        }
        let (mut a, mut b) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.phi(mid) >= level {
                a = mid;
            } else {
                b = mid;
            }
        }
        a
    }
}

pub fn public_project_quadrature(dists: &[Distribution]) -> Result<QuadratureReport> {
    if dists.is_empty() || dists.len() > 2 {
        return Err(Error::TooManyAgents { n: dists.len(), max: 2 });
    }
    check_finite_means(dists)?;
    for d in dists {
        if !VirtualValueCurve::new(d, DEFAULT_IRONING_GRID)?.is_regular() {
            return Err(Error::InvalidParameter(
                "public-project quadrature needs regular distributions with a density".into(),
            ));
        }
    }
    let welfare: f64 = dists.iter().map(Distribution::mean).sum();
    let first = TailView { dist: &dists[0] };
    let (revenue, abs_error) = if dists.len() == 1 {
        (first.revenue_curve(first.mass_above(0.0)), 1e-15)
    } else {
        let second = TailView { dist: &dists[1] };
        // For agent 1 at tail level s1 with φ₁ = a, agent 2 must contribute
        // φ₂ ≥ −a, which happens on its top s* = mass_above(−a). The inner
        // integral of (a + φ₂)⁺ is then a·s* + R₂(s*).
        let inner = |s1: f64| {
            let a = first.phi(s1);
            let s_star = second.mass_above(-a);
            (a * s_star + second.revenue_curve(s_star)).max(0.0)
        };
        // s1 = e^{-w} tames the growth of φ₁ near the top of the support.
        let r = quad::integrate(
            |w| {
                let s1 = (-w).exp();
                inner(s1) * s1
            },
            0.0,
            60.0,
            1e-11,
            1e-11,
        );
        (r.value, r.abs_error)
    };
    Ok(QuadratureReport {
        revenue,
        welfare,
        ratio: revenue / welfare,
        abs_error,
    })
}

/// One row of the public-project asymptotics table.
#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticRow {
    pub n: usize,
    pub report: RatioReport,
    /// `ratio · √n`.
    pub scaled: f64,
    pub scaled_se: f64,
}

/// `√(2 / (3π))`, the limit of `ratio · √n` for uniform public projects.
pub fn uniform_public_project_constant() -> f64 {
    (2.0 / (3.0 * std::f64::consts::PI)).sqrt()
}

/// Maps a uniform level to `(value, ironed virtual value)`, with closed
/// forms for the cheap kinds.
struct ValuePhi {
    dist: Distribution,
    curve: VirtualValueCurve,
    cap: f64,
}

impl ValuePhi {
    fn new(dist: &Distribution) -> Result<Self> {
        Ok(Self {
            dist: dist.clone(),
            curve: VirtualValueCurve::new(dist, DEFAULT_IRONING_GRID)?,
            cap: sampling_cap(dist),
        })
    }

    #[inline]
    fn at(&self, u: f64) -> (f64, f64) {
        match *self.dist.kind() {
            DistributionKind::Uniform { lo, hi } => {
                let v = lo + u * (hi - lo);
                (v, 2.0 * v - hi)
            }
            DistributionKind::Exponential { rate } => {
                let v = -(-u.min(self.cap)).ln_1p() / rate;
                (v, v - 1.0 / rate)
            }
            _ => {
                let v = self.dist.quantile(u.min(self.cap)).expect("valid level");
                (v, self.curve.ironed_value(v))
            }
        }
    }
}

/// Optimal-mechanism revenue-to-welfare ratio for `n` i.i.d. agents facing
/// a public project, for each `n` in `n_list`. Serves everyone iff the
/// ironed virtual values sum to at least zero, so large `n` is cheap.
pub fn public_project_asymptotics(
    dist: &Distribution,
    n_list: &[usize],
    n_samples: u64,
    seed: u64,
) -> Result<Vec<AsymptoticRow>> {
    check_samples(n_samples)?;
    check_finite_means(std::slice::from_ref(dist))?;
    let sampler = ValuePhi::new(dist)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(Error::InvalidParameter("agent count must be positive".into()));
        }
        let keys: Vec<u64> = (0..n as u64).map(|i| stream_key(seed, i)).collect();
        let moments = chunked_reduce(n_samples, |start, len| {
            let mut acc = PairMoments::default();
            for s in start..start + len {
                let (mut welfare, mut surplus) = (0.0, 0.0);
                for &key in &keys {
                    let (v, phi) = sampler.at(uniform_at(key, s));
                    welfare += v;
                    surplus += phi;
                }
                acc.push(if surplus >= 0.0 { surplus } else { 0.0 }, welfare);
            }
            acc
        });
        let report = RatioReport::from_moments(&moments, n, f64::NAN, MechanismId::Optimal, 0.0, seed);
        let root = (n as f64).sqrt();
        rows.push(AsymptoticRow {
            n,
            scaled: report.ratio * root,
            scaled_se: report.ratio_se * root,
            report,
        });
    }
    Ok(rows)
}

/// Which revenue-to-welfare guarantee an audit is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundPath {
    /// Downward-closed environment, hyper-regular c-bounded agents: `1/c`.
    HyperRegular,
    /// Public project, c-bounded agents: `1/(96 c √n)`.
    PublicProject,
    /// Any environment, strongly c-bounded agents: `1/(96 c √n)`.
    StronglyBounded,
}

impl BoundPath {
    pub fn bound(self, c: f64, n: usize) -> f64 {
        match self {
            Self::HyperRegular => 1.0 / c,
            Self::PublicProject | Self::StronglyBounded => 1.0 / (96.0 * c * (n as f64).sqrt()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundAudit {
    pub report: RatioReport,
    pub path: BoundPath,
    /// Whether every agent meets the hypotheses of `path`.
    pub hypotheses_met: bool,
    pub classifications: Vec<ClassificationReport>,
}

/// Picks the guarantee whose hypotheses the market meets, falling back to
/// the one matching the environment's shape when none is met.
pub fn select_bound_path(market: &Market, classes: &[ClassificationReport]) -> (BoundPath, bool) {
    let all = |p: fn(&ClassificationReport) -> bool| classes.iter().all(p);
    let downward = market.env().is_downward_closed();
    let public = matches!(market.env().kind(), EnvKind::PublicProject);
    if downward && all(|c| c.hyper_regular && c.c_bounded) {
        (BoundPath::HyperRegular, true)
    } else if public && all(|c| c.c_bounded) {
        (BoundPath::PublicProject, true)
    } else if all(|c| c.strongly_c_bounded) {
        (BoundPath::StronglyBounded, true)
    } else if downward {
        (BoundPath::HyperRegular, false)
    } else if public {
        (BoundPath::PublicProject, false)
    } else {
        (BoundPath::StronglyBounded, false)
    }
}

/// Estimates the ratio of `mechanism` and checks it against the applicable
/// lower bound at `c`.
pub fn bound_audit(market: &Market, c: f64, mechanism: MechanismId, n_samples: u64, seed: u64) -> Result<BoundAudit> {
    let classifications = market
        .dists()
        .iter()
        .map(|d| classify(d, c, AUDIT_CLASSIFY_GRID))
        .collect::<Result<Vec<_>>>()?;
    let (path, hypotheses_met) = select_bound_path(market, &classifications);
    let mut report = estimate_revenue_welfare(market, mechanism, n_samples, seed)?.with_bound(path.bound(c, market.n()));
    report.c = c;
    Ok(BoundAudit {
        report,
        path,
        hypotheses_met,
        classifications,
    })
}

/// Upper bound on the counterexample's ratio for `n ≥ 2` agents:
/// `e/(e−1) · 2/(ln(n / ln² n) + 2)`.
pub fn counterexample_upper_bound(n: usize) -> Option<f64> {
    if n < 2 {
        return None;
    }
    let e = std::f64::consts::E;
    let n = n as f64;
    Some(e / (e - 1.0) * 2.0 / ((n / n.ln().powi(2)).ln() + 2.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleRow {
    pub n: usize,
    /// Monte Carlo estimate of `E[φ(X*)⁺] / E[X*]`, `X*` the highest of `n`
    /// values, sampled with the truncation clip.
    pub report: RatioReport,
    /// Quadrature value of the same clipped ratio.
    pub clipped_ratio: f64,
    /// Quadrature value of the untruncated ratio.
    pub exact_ratio: f64,
    pub upper_bound: Option<f64>,
    /// `ratio ≤ upper_bound + 3 SE`, vacuously true without a bound.
    pub below_upper_bound: bool,
}

/// `(1 − (1 − S)^n) / S`, stable for tiny `S`.
fn max_tail_ratio(s: f64, n: f64) -> f64 {
    if s < 1e-300 {
        return n;
    }
    -(n * (-s).ln_1p()).exp_m1() / s
}

/// Untruncated `(E[φ(X*)⁺], E[X*])` for the highest of `n` counterexample
/// values.
///
/// With `x = t + δ = e^{1/τ}`, both tail integrals become bounded integrands
/// on a finite `τ` interval.
pub fn counterexample_exact_moments(n: usize) -> Result<(f64, f64)> {
    let delta = counterexample_delta();
    let nf = n as f64;
    let tail = |tau: f64| tau * tau * (-1.0 / tau).exp();
    let welfare = quad::integrate(
        |tau| if tau <= 0.0 { nf } else { max_tail_ratio(tail(tau), nf) },
        0.0,
        1.0 / delta.ln(),
        1e-13,
        1e-13,
    );
    let (r_star, _) = crate::dist::monopoly(&Distribution::counterexample())?;
    // E[φ⁺(X*)] = ∫_{r*}^∞ φ'(t) Pr(X* > t) dt.
    let revenue = quad::integrate(
        |tau| {
            if tau <= 0.0 {
                return 0.0;
            }
            let l = 1.0 / tau;
            let dphi = 2.0 * (l + 1.0) / (l + 2.0).powi(2);
            dphi * max_tail_ratio(tail(tau), nf)
        },
        0.0,
        1.0 / (r_star + delta).ln(),
        1e-13,
        1e-13,
    );
    Ok((revenue.value, welfare.value))
}

/// `(E[φ(X*)⁺], E[X*])` with `X*` clipped at the `1 − TRUNCATION_TAIL`
/// quantile of the maximum, the quantity the Monte Carlo estimates.
pub fn counterexample_clipped_moments(n: usize) -> Result<(f64, f64)> {
    let d = Distribution::counterexample();
    let nf = n as f64;
    // Tail mass s* = 1 − U^{1/n} has density n(1 − s)^{n−1}; s = e^{-w}.
    let floor = TRUNCATION_TAIL;
    let cap = d.inverse_survival(floor)?;
    let weight_below_floor = -(nf * (-floor).ln_1p()).exp_m1();
    let expect = |g: &dyn Fn(f64) -> f64| {
        let body = quad::integrate(
            |w| {
                let s = (-w).exp();
                let x = d.inverse_survival(s).unwrap_or(cap);
                g(x) * nf * ((nf - 1.0) * (-s).ln_1p()).exp() * s
            },
            0.0,
            -floor.ln(),
            1e-13,
            1e-12,
        );
        body.value + g(cap) * weight_below_floor
    };
    let phi_plus = |x: f64| d.virtual_value(x).map_or(0.0, |p| p.max(0.0));
    Ok((expect(&phi_plus), expect(&|x| x)))
}

/// The counterexample's ratio `E[φ(X*)⁺] / E[X*]` across `n_list`.
pub fn counterexample_curve(n_list: &[usize], n_samples: u64, seed: u64) -> Result<Vec<CounterexampleRow>> {
    check_samples(n_samples)?;
    let d = Distribution::counterexample();
    let key = stream_key(seed, 0);
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(Error::InvalidParameter("agent count must be positive".into()));
        }
        let nf = n as f64;
        // The top of n uniforms is U^{1/n}; its upper-tail mass is
        // 1 − U^{1/n}, clipped below at the truncation tail.
        let moments = chunked_reduce(n_samples, |start, len| {
            let mut acc = PairMoments::default();
            for s in start..start + len {
                let u = uniform_at(key, s);
                let tail = (-(u.ln() / nf).exp_m1()).max(TRUNCATION_TAIL);
                let x = d.inverse_survival(tail).expect("tail in (0, 1]");
                let phi = d.virtual_value(x).expect("inside the support");
                acc.push(phi.max(0.0), x);
            }
            acc
        });
        let upper_bound = counterexample_upper_bound(n);
        let report = RatioReport::from_moments(&moments, n, f64::NAN, MechanismId::Optimal, f64::NAN, seed);
        let below_upper_bound = upper_bound.is_none_or(|b| report.ratio <= b + 3.0 * report.ratio_se);
        let (cr, cw) = counterexample_clipped_moments(n)?;
        let (er, ew) = counterexample_exact_moments(n)?;
        rows.push(CounterexampleRow {
            n,
            report: RatioReport {
                bound: upper_bound.unwrap_or(f64::NAN),
                bound_satisfied: below_upper_bound,
                ..report
            },
            clipped_ratio: cr / cw,
            exact_ratio: er / ew,
            upper_bound,
            below_upper_bound,
        });
    }
    Ok(rows)
}

/// Whether each ratio exceeds the next by more than three combined
/// standard errors.
pub fn strictly_decreasing(rows: &[CounterexampleRow]) -> bool {
    rows.windows(2).all(|w| {
        let (a, b) = (&w[0].report, &w[1].report);
        a.ratio - b.ratio > 3.0 * a.ratio_se.hypot(b.ratio_se)
    })
}
