//! The weighted Chebyshev ratio inequality
//! `E[fgh] / E[gh] ≥ E[fh] / E[h]` for non-decreasing `f`, `g` and
//! non-negative `h`, and the per-bidder audit built on it.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::anticonc::RandomVariableModel;
use crate::dist::{classify, TRUNCATION_TAIL};
use crate::error::{Error, Result};
use crate::mech::Market;
use crate::quad::gauss_legendre_nodes;
use crate::rng::{stream_key, uniform_at};
use crate::sim::AUDIT_CLASSIFY_GRID;
use crate::stats::{chunked_reduce, Merge, PairMoments};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Number of value bins used to estimate `Pr(i ∈ opt | v_i)`.
pub const G_BINS: usize = 32;

#[derive(Clone)]
pub struct MonotoneTriple {
    f: RealFn,
    g: RealFn,
    h: RealFn,
    x: RandomVariableModel,
}

impl fmt::Debug for MonotoneTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneTriple").field("x", &self.x).finish_non_exhaustive()
    }
}

/// Weighted evaluation points `(x, probability)` for `x`: the atoms of a
/// finite model, or composite Gauss–Legendre nodes in quantile space.
pub fn evaluation_nodes(x: &RandomVariableModel, grid_size: usize) -> Vec<(f64, f64)> {
    match x {
        RandomVariableModel::Finite { atoms } => atoms.clone(),
        RandomVariableModel::Analytic { .. } => gauss_legendre_nodes(0.0, 1.0, grid_size.div_ceil(5).max(1))
            .into_iter()
            .map(|(u, w)| (x.quantile(u.min(1.0 - TRUNCATION_TAIL)), w))
            .collect(),
    }
}

impl MonotoneTriple {
    /// Validates that `f` and `g` are non-decreasing, `h ≥ 0`, and
    /// `E[h(X)] > 0` on the evaluation grid.
    pub fn new(f: RealFn, g: RealFn, h: RealFn, x: RandomVariableModel, grid_size: usize) -> Result<Self> {
        let t = Self::new_unchecked(f, g, h, x);
        let mut nodes = evaluation_nodes(&t.x, grid_size);
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (name, fun) in [("f", &t.f), ("g", &t.g)] {
            let mut prev = f64::NEG_INFINITY;
            for &(x, _) in &nodes {
                let v = fun(x);
                if v < prev - 1e-9 * (1.0 + prev.abs()) {
                    return Err(Error::InvalidParameter(format!("{name} decreases at x = {x}")));
                }
                prev = v;
            }
        }
        if let Some(&(x, _)) = nodes.iter().find(|(x, _)| (t.h)(*x) < 0.0) {
            return Err(Error::InvalidParameter(format!("h is negative at x = {x}")));
        }
        if nodes.iter().map(|&(x, w)| (t.h)(x) * w).sum::<f64>() <= 0.0 {
            return Err(Error::DegenerateDenominator("E[h(X)]"));
        }
        Ok(t)
    }

    /// Skips validation, for checking that the inequality can fail.
    pub fn new_unchecked(f: RealFn, g: RealFn, h: RealFn, x: RandomVariableModel) -> Self {
        Self { f, g, h, x }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// `E[fgh] / E[gh]` against `E[fh] / E[h]`, all four expectations taken
/// over the same evaluation nodes.
pub fn weighted_ratio_inequality(t: &MonotoneTriple, grid_size: usize) -> Result<InequalityReport> {
    let (mut fgh, mut gh, mut fh, mut h) = (0.0, 0.0, 0.0, 0.0);
    for (x, w) in evaluation_nodes(&t.x, grid_size) {
        let (fv, gv, hv) = ((t.f)(x), (t.g)(x), (t.h)(x));
        fgh += w * fv * gv * hv;
        gh += w * gv * hv;
        fh += w * fv * hv;
        h += w * hv;
    }
    if !(gh > 0.0) {
        return Err(Error::DegenerateDenominator("E[g(X)h(X)]"));
    }
    if !(h > 0.0) {
        return Err(Error::DegenerateDenominator("E[h(X)]"));
    }
    let (lhs, rhs) = (fgh / gh, fh / h);
    Ok(InequalityReport {
        lhs,
        rhs,
        ok: lhs >= rhs - 1e-9 * (1.0 + rhs.abs()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AgentAudit {
    /// `E[φ_i(v_i)⁺ 1{i ∈ opt}]`.
    pub lhs: f64,
    /// `E[v_i 1{i ∈ opt}] / c`.
    pub rhs: f64,
    /// Standard error of `lhs − rhs`.
    pub se: f64,
    pub ok: bool,
    /// Estimated `Pr(i ∈ opt | v_i in bin b)` over equal-probability bins;
    /// NaN for empty bins.
    pub g_bins: Vec<f64>,
    pub g_monotone: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HyperRegularAudit {
    pub n: usize,
    pub c: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// Set when the hypotheses fail and nothing was estimated.
    pub skipped_reason: Option<String>,
    pub agents: Vec<AgentAudit>,
    /// `E[φ⁺(opt)]` and `E[v(opt)]`.
    pub revenue: f64,
    pub welfare: f64,
    pub revenue_se: f64,
    pub welfare_se: f64,
    /// Standard error of `E[φ⁺(opt)] − E[v(opt)]/c`.
    pub diff_se: f64,
    pub ok: bool,
}

#[derive(Clone, Default)]
struct AuditAcc {
    total: PairMoments,
    per_agent: Vec<PairMoments>,
    bin_hits: Vec<u64>,
    bin_counts: Vec<u64>,
}

impl Merge for AuditAcc {
    fn merge_from(&mut self, other: &Self) {
        self.total.merge(&other.total);
        self.per_agent.merge_from(&other.per_agent);
        if self.bin_hits.is_empty() {
            self.bin_hits.clone_from(&other.bin_hits);
            self.bin_counts.clone_from(&other.bin_counts);
        } else {
            for (a, b) in self.bin_hits.iter_mut().zip(&other.bin_hits) {
                *a += b;
            }
            for (a, b) in self.bin_counts.iter_mut().zip(&other.bin_counts) {
                *a += b;
            }
        }
    }
}

/// Checks `E[φ_i⁺ 1{i ∈ opt}] ≥ E[v_i 1{i ∈ opt}] / c` for each agent and in
/// aggregate, where `opt` is the welfare-maximizing set, and that
/// `Pr(i ∈ opt | v_i)` is non-decreasing within noise.
pub fn hyper_regular_audit(market: &Market, c: f64, n_samples: u64, seed: u64) -> Result<HyperRegularAudit> {
    if !market.env().is_downward_closed() {
        return Err(Error::NotDownwardClosed);
    }
    let n = market.n();
    let mut audit = HyperRegularAudit {
        n,
        c,
        n_samples,
        seed,
        skipped_reason: None,
        agents: Vec::new(),
        revenue: f64::NAN,
        welfare: f64::NAN,
        revenue_se: f64::NAN,
        welfare_se: f64::NAN,
        diff_se: f64::NAN,
        ok: false,
    };
    for (i, d) in market.dists().iter().enumerate() {
        let class = classify(d, c, AUDIT_CLASSIFY_GRID)?;
        if !(class.hyper_regular && class.c_bounded) {
            audit.skipped_reason = Some(format!(
                "agent {} is not a {c}-bounded hyper-regular distribution",
                i + 1
            ));
            return Ok(audit);
        }
    }

    let keys: Vec<u64> = (0..n as u64).map(|i| stream_key(seed, i)).collect();
    let caps: Vec<f64> = market
        .dists()
        .iter()
        .map(|d| if d.support_hi().is_finite() { 1.0 } else { 1.0 - TRUNCATION_TAIL })
        .collect();
    let acc: AuditAcc = chunked_reduce(n_samples, |start, len| {
        let mut acc = AuditAcc {
            per_agent: vec![PairMoments::default(); n],
            bin_hits: vec![0; n * G_BINS],
            bin_counts: vec![0; n * G_BINS],
            ..Default::default()
        };
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        for s in start..start + len {
            for i in 0..n {
                u[i] = uniform_at(keys[i], s).min(caps[i]);
                v[i] = market.dists()[i].quantile(u[i]).expect("valid level");
            }
            let (opt, _) = market.env().max_weight_set(&v).expect("profile length matches");
            let (mut phi_opt, mut v_opt) = (0.0, 0.0);
            for i in 0..n {
                let served = opt.contains(i);
                let phi_plus = market.curve(i).ironed_value(v[i]).max(0.0);
                let (a, b) = if served { (phi_plus, v[i]) } else { (0.0, 0.0) };
                acc.per_agent[i].push(a, b);
                phi_opt += a;
                v_opt += b;
                let bin = i * G_BINS + ((u[i] * G_BINS as f64) as usize).min(G_BINS - 1);
                acc.bin_counts[bin] += 1;
                acc.bin_hits[bin] += served as u64;
            }
            acc.total.push(phi_opt, v_opt);
        }
        acc
    });

    let inv_c = 1.0 / c;
    audit.agents = (0..n)
        .map(|i| {
            let m = &acc.per_agent[i];
            let se = m.se_diff(inv_c);
            let (lhs, rhs) = (m.mean_a, inv_c * m.mean_b);
            let bins = &acc.bin_hits[i * G_BINS..(i + 1) * G_BINS];
            let counts = &acc.bin_counts[i * G_BINS..(i + 1) * G_BINS];
            let g_bins: Vec<f64> = bins
                .iter()
                .zip(counts)
                .map(|(&h, &k)| if k == 0 { f64::NAN } else { h as f64 / k as f64 })
                .collect();
            let bin_se = |b: usize| {
                let p = g_bins[b];
                (p * (1.0 - p) / counts[b].max(1) as f64).sqrt()
            };
            let g_monotone = (1..G_BINS).all(|b| {
                let (lo, hi) = (g_bins[b - 1], g_bins[b]);
                lo.is_nan() || hi.is_nan() || hi >= lo - 2.0 * bin_se(b - 1).hypot(bin_se(b))
            });
            AgentAudit {
                lhs,
                rhs,
                se,
                ok: lhs >= rhs - 3.0 * se,
                g_bins,
                g_monotone,
            }
        })
        .collect();
    let t = &acc.total;
    audit.revenue = t.mean_a;
    audit.welfare = t.mean_b;
    audit.revenue_se = t.se_a();
    audit.welfare_se = t.se_b();
    audit.diff_se = t.se_diff(inv_c);
    audit.ok = t.mean_a >= inv_c * t.mean_b - 3.0 * audit.diff_se
        && audit.agents.iter().all(|a| a.ok && a.g_monotone);
    Ok(audit)
}
