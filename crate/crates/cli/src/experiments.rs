use std::sync::Arc;

use anyhow::{bail, Result};
use revwel::anticonc::{
    central_binomial, interval_count_signed_sums, mdm_md_relation_check, mdm_of_sum_check, mean_zero_check,
    positive_mean_check, PositivePartReport, RandomVariableModel,
};
use revwel::cheby::{hyper_regular_audit, weighted_ratio_inequality, MonotoneTriple, RealFn};
use revwel::dist::classify;
use revwel::mech::{Market, MechanismId};
use revwel::report::CsvRow;
use revwel::rng::CounterRng;
use revwel::sim::{
    bound_audit, counterexample_curve, estimate_revenue_welfare, public_project_asymptotics, strictly_decreasing,
    uniform_public_project_constant,
};
use revwel::{Distribution, DistributionKind, FeasibilityEnvironment};

use crate::config::{Experiment, ExperimentConfig, MechanismChoice};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
    Note,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::Skip => "SKIP",
            Self::Note => "NOTE",
        }
    }

    fn of(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }
}

/// CSV rows plus checks and remarks that do not fit the row schema.
#[derive(Default)]
pub struct RunOutput {
    pub rows: Vec<CsvRow>,
    pub extra: Vec<(Status, String)>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.bound_satisfied) && self.extra.iter().all(|e| e.0 != Status::Fail)
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.experiment() {
        Experiment::Classify => classify_rows(cfg),
        Experiment::Ratio => ratio(cfg),
        Experiment::Audit => audit(cfg),
        Experiment::Asymptotics => asymptotics(cfg),
        Experiment::Counterexample => counterexample(cfg),
        Experiment::Anticoncentration => anticoncentration(cfg),
        Experiment::Chebyshev => chebyshev(cfg),
    }
}

fn market(cfg: &ExperimentConfig) -> Result<Market> {
    let env = cfg.require_env()?.clone();
    let dists = cfg.agent_dists(env.n())?;
    Ok(Market::new(env, dists)?)
}

fn mechanisms(cfg: &ExperimentConfig, env: &FeasibilityEnvironment) -> Vec<MechanismId> {
    match cfg.mechanism.unwrap_or(MechanismChoice::One(MechanismId::Optimal)) {
        MechanismChoice::One(id) => vec![id],
        MechanismChoice::All => MechanismId::ALL
            .into_iter()
            .filter(|&id| id != MechanismId::VcgL || env.is_downward_closed())
            .collect(),
    }
}

/// One row per distribution: revenue holds ρ, welfare the mean, and the
/// row passes iff the distribution is c-bounded (ratio ≥ 1/c).
fn classify_rows(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let c = cfg.require_c()?;
    if cfg.dists.is_empty() {
        bail!("`classify` needs --dist");
    }
    let grid = cfg.grid.unwrap_or(revwel::dist::DEFAULT_IRONING_GRID);
    let mut out = RunOutput::default();
    for (i, d) in cfg.dists.iter().enumerate() {
        let r = classify(d, c, grid)?;
        out.rows.push(CsvRow {
            experiment: "classify".into(),
            n: i + 1,
            c,
            mechanism: format!(
                "regular={};hyper_regular={};mhr={};strongly_c_bounded={}",
                r.regular, r.hyper_regular, r.mhr, r.strongly_c_bounded
            ),
            revenue: r.rho,
            rev_se: 0.0,
            welfare: r.mean,
            wel_se: 0.0,
            ratio: r.rho / r.mean,
            bound: 1.0 / c,
            bound_satisfied: r.c_bounded,
            seed: cfg.seed(),
            samples: 0,
        });
        out.extra.push((
            Status::Note,
            format!(
                "{}: regular={} hyper_regular={} mhr={} c_bounded={} strongly_c_bounded={} monopoly price {:.6}",
                serde_json::to_string(d)?,
                r.regular,
                r.hyper_regular,
                r.mhr,
                r.c_bounded,
                r.strongly_c_bounded,
                r.monopoly_price
            ),
        ));
    }
    Ok(out)
}

fn ratio(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let market = market(cfg)?;
    let mut out = RunOutput::default();
    for id in mechanisms(cfg, market.env()) {
        let r = estimate_revenue_welfare(&market, id, cfg.samples(), cfg.seed())?;
        out.rows.push(CsvRow::from_ratio("ratio", &r));
    }
    Ok(out)
}

fn audit(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let c = cfg.require_c()?;
    let market = market(cfg)?;
    let mut out = RunOutput::default();
    let ids = match cfg.mechanism {
        // The lower bounds cover the optimal auction and VCG-L only.
        Some(MechanismChoice::All) => mechanisms(cfg, market.env())
            .into_iter()
            .filter(|&id| id != MechanismId::Efficient)
            .collect(),
        _ => mechanisms(cfg, market.env()),
    };
    for id in ids {
        if id == MechanismId::Efficient {
            out.extra.push((Status::Note, format!("{id}: no lower bound is known for VCG without reserves")));
        }
        let a = bound_audit(&market, c, id, cfg.samples(), cfg.seed())?;
        out.rows.push(CsvRow::from_ratio("audit", &a.report));
        if !a.hypotheses_met {
            out.extra.push((
                Status::Note,
                format!("{id}: agents do not meet the hypotheses of the {:?} bound", a.path),
            ));
        }
    }
    Ok(out)
}

fn asymptotics(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let dist = match cfg.dists.as_slice() {
        [] => Distribution::uniform(0.0, 1.0)?,
        [d] => d.clone(),
        _ => bail!("`asymptotics` takes a single i.i.d. distribution"),
    };
    let n_list = if cfg.n_list.is_empty() {
        vec![1, 2, 100, 10_000]
    } else {
        cfg.n_list.clone()
    };
    let mut out = RunOutput::default();
    for row in public_project_asymptotics(&dist, &n_list, cfg.samples(), cfg.seed())? {
        out.rows.push(CsvRow::from_ratio("asymptotics", &row.report));
        out.extra.push((
            Status::Note,
            format!("n={} ratio·√n {:.5} ± {:.5}", row.n, row.scaled, row.scaled_se),
        ));
    }
    if matches!(dist.kind(), DistributionKind::Uniform { .. }) {
        out.extra.push((
            Status::Note,
            format!("ratio·√n limit for uniform values: {:.5}", uniform_public_project_constant()),
        ));
    }
    Ok(out)
}

/// Rows carry the ratio's upper-bound curve in the bound column; they pass
/// when the ratio stays below it.
fn counterexample(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let n_list = if cfg.n_list.is_empty() {
        vec![1, 10, 100, 1000]
    } else {
        cfg.n_list.clone()
    };
    let rows = counterexample_curve(&n_list, cfg.samples(), cfg.seed())?;
    let mut out = RunOutput::default();
    for r in &rows {
        out.rows.push(CsvRow::from_ratio("counterexample", &r.report));
        out.extra.push((
            Status::Note,
            format!(
                "n={} quadrature ratio {:.5}, with sampling clip {:.5}",
                r.n, r.exact_ratio, r.clipped_ratio
            ),
        ));
    }
    if rows.len() > 1 {
        out.extra.push((
            Status::of(strictly_decreasing(&rows)),
            "ratio strictly decreasing in n beyond 3 standard errors".into(),
        ));
    }
    Ok(out)
}

/// Draws from a counter-based stream.
struct Draw(CounterRng);

impl Draw {
    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.0.next_open01()
    }

    fn index(&mut self, lo: usize, hi: usize) -> usize {
        (lo + (self.0.next_open01() * (hi - lo + 1) as f64) as usize).min(hi)
    }

    fn finite(&mut self, max_atoms: usize, lo: f64, hi: f64) -> Result<RandomVariableModel> {
        let k = self.index(1, max_atoms);
        let raw: Vec<(f64, f64)> = (0..k).map(|_| (self.uniform(lo, hi), self.uniform(0.01, 1.0))).collect();
        let total: f64 = raw.iter().map(|a| a.1).sum();
        Ok(RandomVariableModel::finite(raw.into_iter().map(|(x, p)| (x, p / total)).collect())?)
    }
}

fn positive_part_row(r: &PositivePartReport, seed: u64, samples: u64) -> CsvRow {
    let samples = if r.exact { 0 } else { samples };
    CsvRow::inequality("anticoncentration", r.check.as_str(), r.n, r.lhs, r.lhs_se, r.rhs, r.ok == Some(true))
        .with_sampling(seed, samples)
}

fn push_positive_part(out: &mut RunOutput, r: PositivePartReport, seed: u64, samples: u64) {
    match &r.skipped_reason {
        Some(reason) => out.extra.push((Status::Skip, format!("{}: {reason}", r.check.as_str()))),
        None => out.rows.push(positive_part_row(&r, seed, samples)),
    }
}

fn anticoncentration(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (seed, samples) = (cfg.seed(), cfg.samples());
    let n_list = if cfg.n_list.is_empty() { vec![100] } else { cfg.n_list.clone() };
    let mut out = RunOutput::default();

    for &n in &n_list {
        let rademachers = vec![RandomVariableModel::rademacher(); n];
        push_positive_part(&mut out, mdm_of_sum_check(&rademachers, samples, seed)?, seed, samples);
        let centred = vec![RandomVariableModel::uniform_interval(-1.0, 1.0)?; n];
        push_positive_part(&mut out, mean_zero_check(&centred, samples, seed)?, seed, samples);
        let shifted = vec![RandomVariableModel::uniform_interval(-0.9, 1.1)?; n];
        push_positive_part(&mut out, positive_mean_check(&shifted, samples, seed)?, seed, samples);
    }
    if !cfg.models.is_empty() {
        push_positive_part(&mut out, mdm_of_sum_check(&cfg.models, samples, seed)?, seed, samples);
        push_positive_part(&mut out, mean_zero_check(&cfg.models, samples, seed)?, seed, samples);
        push_positive_part(&mut out, positive_mean_check(&cfg.models, samples, seed)?, seed, samples);
    }

    let trials = cfg.trials.unwrap_or(500);
    let mut draw = Draw(CounterRng::new(seed, 0));

    // MD/MDM chain on random models: the row's lhs is the smallest slack
    // in `MDM ≤ MD ≤ 2 MDM`.
    let mut slack = f64::INFINITY;
    let mut chain_ok = true;
    for k in 0..trials {
        let x = draw.finite(8, -5.0, 5.0)?;
        let (_, md, mdm) = x.median_md_mdm()?;
        slack = slack.min(md - mdm).min(2.0 * mdm - md);
        chain_ok &= mdm_md_relation_check(&x, seed.wrapping_add(k as u64))?;
    }
    if trials > 0 {
        out.rows.push(CsvRow::inequality("anticoncentration", "md_mdm_chain", trials, slack, 0.0, 0.0, chain_ok).with_sampling(seed, 0));
    }

    // Signed-sum counts in length-2 intervals, worst count per tuple size.
    let mut worst = [0usize; 11];
    let mut counts_ok = [true; 11];
    for _ in 0..trials {
        let n = draw.index(1, 10);
        let snap = draw.uniform(0.0, 1.0) < 0.5;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let x = draw.uniform(1.0, 4.0);
                if snap { x.floor() } else { x }
            })
            .collect();
        let span: f64 = xs.iter().sum();
        for _ in 0..20 {
            let c = interval_count_signed_sums(&xs, draw.uniform(-span - 2.0, span))?;
            worst[n] = worst[n].max(c.count);
            counts_ok[n] &= c.ok;
        }
    }
    for n in 1..=10 {
        if worst[n] > 0 {
            let bound = central_binomial(n) as f64;
            out.rows.push(
                CsvRow::inequality("anticoncentration", "interval_count", n, bound, 0.0, worst[n] as f64, counts_ok[n])
                    .with_sampling(seed, 0),
            );
        }
    }
    let tight = interval_count_signed_sums(&[1.0; 4], -1.0)?;
    out.rows.push(
        CsvRow::inequality("anticoncentration", "interval_count_tight", 4, tight.bound as f64, 0.0, tight.count as f64, tight.ok)
            .with_sampling(seed, 0),
    );
    out.extra.push((Status::Note, format!("tight case x=(1,1,1,1): {} sign vectors in (−1, 1]", tight.count)));
    Ok(out)
}

fn piecewise_linear(knots: Vec<(f64, f64)>) -> RealFn {
    Arc::new(move |x| {
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
    })
}

fn random_knots(draw: &mut Draw, monotone: bool) -> Vec<(f64, f64)> {
    let k = draw.index(2, 7);
    let mut xs: Vec<f64> = (0..k).map(|_| draw.uniform(-3.0, 3.0)).collect();
    xs.sort_by(f64::total_cmp);
    let mut level = draw.uniform(-2.0, 2.0);
    xs.into_iter()
        .map(|x| {
            let y = if monotone {
                level += draw.uniform(0.0, 2.0);
                level
            } else {
                draw.uniform(0.0, 2.0)
            };
            (x, y)
        })
        .collect()
}

fn chebyshev(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (seed, samples) = (cfg.seed(), cfg.samples());
    let mut out = RunOutput::default();
    let trials = cfg.trials.unwrap_or(1000);
    let mut draw = Draw(CounterRng::new(seed, 1));
    let (mut checked, mut margin, mut all_ok) = (0, f64::INFINITY, true);
    while checked < trials {
        let x = draw.finite(12, -3.0, 3.0)?;
        let f = piecewise_linear(random_knots(&mut draw, true));
        let g = piecewise_linear(random_knots(&mut draw, true));
        let h = piecewise_linear(random_knots(&mut draw, false));
        let Ok(t) = MonotoneTriple::new(f, g, h, x, 64) else {
            continue;
        };
        // Draws with E[gh] ≤ 0 are outside the inequality's domain.
        let Ok(r) = weighted_ratio_inequality(&t, 64) else {
            continue;
        };
        checked += 1;
        margin = margin.min(r.lhs - r.rhs);
        all_ok &= r.ok;
    }
    if trials > 0 {
        out.rows.push(CsvRow {
            experiment: "chebyshev".into(),
            n: trials,
            c: f64::NAN,
            mechanism: "random_triples".into(),
            revenue: margin,
            rev_se: 0.0,
            welfare: 0.0,
            wel_se: 0.0,
            ratio: f64::NAN,
            bound: 0.0,
            bound_satisfied: all_ok,
            seed,
            samples: 0,
        });
        out.extra.push((Status::Note, format!("smallest E[fgh]/E[gh] − E[fh]/E[h] over {trials} triples: {margin:.3e}")));
    }

    let markets = if cfg.env.is_some() {
        vec![(market(cfg)?, cfg.require_c()?)]
    } else {
        vec![
            (Market::iid(FeasibilityEnvironment::single_item(2)?, Distribution::uniform(0.0, 1.0)?)?, 2.0),
            (Market::iid(FeasibilityEnvironment::k_uniform(3, 2)?, Distribution::pareto(2.0, 1.0)?)?, 2.0),
        ]
    };
    for (market, c) in markets {
        let a = hyper_regular_audit(&market, c, samples, seed)?;
        if let Some(reason) = a.skipped_reason {
            out.extra.push((Status::Skip, format!("hyper-regular audit: {reason}")));
            continue;
        }
        out.rows.push(CsvRow {
            experiment: "hyper_regular_audit".into(),
            n: a.n,
            c,
            mechanism: "optimal".into(),
            revenue: a.revenue,
            rev_se: a.revenue_se,
            welfare: a.welfare,
            wel_se: a.welfare_se,
            ratio: a.revenue / a.welfare,
            bound: 1.0 / c,
            bound_satisfied: a.ok,
            seed,
            samples,
        });
        for (i, g) in a.agents.iter().enumerate() {
            if !g.g_monotone {
                out.extra.push((Status::Fail, format!("agent {}: Pr(served | value) decreases", i + 1)));
            }
        }
    }
    Ok(out)
}
