//! Anti-concentration toolkit: mean and median absolute deviations, medially
//! coupled signs, signed-sum interval counts, and lower bounds on the
//! positive part of a sum of independent variables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{Distribution, TRUNCATION_TAIL};
use crate::error::{Error, Result};
use crate::rng::{stream_key, uniform_at, CounterRng};

const PROB_TOLERANCE: f64 = 1e-12;
const EXACT_TOLERANCE: f64 = 1e-9;

/// Largest product of support sizes handled by exact convolution.
pub const MAX_EXACT_SUPPORT: f64 = 1e6;
/// Largest `n` for a [`SignProfileTable`].
pub const MAX_TABLE_AGENTS: usize = 16;
/// Largest `n` for exhaustive signed-sum enumeration.
pub const MAX_SIGNED_SUM_TERMS: usize = 20;

/// A real random variable: an affine image `shift + scale · X` of a value
/// distribution, or finitely many atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RandomVariableModel {
    Analytic { dist: Distribution, shift: f64, scale: f64 },
    /// `(value, probability)` pairs, sorted by value with no repeats.
    Finite { atoms: Vec<(f64, f64)> },
}

impl RandomVariableModel {
    pub fn analytic(dist: Distribution) -> Self {
        Self::Analytic {
            dist,
            shift: 0.0,
            scale: 1.0,
        }
    }

    pub fn finite(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("finite model needs at least one atom".into()));
        }
        if let Some(a) = atoms.iter().find(|(x, p)| !x.is_finite() || !(*p >= 0.0)) {
            return Err(Error::InvalidParameter(format!("invalid atom {a:?}")));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidParameter(format!("atom probabilities sum to {total}")));
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += p,
                _ => merged.push((x, p)),
            }
        }
        Ok(Self::Finite { atoms: merged })
    }

    /// `±1` with probability ½ each.
    pub fn rademacher() -> Self {
        Self::Finite {
            atoms: vec![(-1.0, 0.5), (1.0, 0.5)],
        }
    }

    pub fn constant(a: f64) -> Self {
        Self::Finite { atoms: vec![(a, 1.0)] }
    }

    /// Uniform on `[lo, hi]`, as an affine image of `U(0, 1)`.
    pub fn uniform_interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Self::analytic(Distribution::uniform(0.0, 1.0)?).affine(lo, hi - lo))
    }

    /// The model of `a + b · self`.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        match self {
            Self::Analytic { dist, shift, scale } => Self::Analytic {
                dist: dist.clone(),
                shift: a + b * shift,
                scale: b * scale,
            },
            Self::Finite { atoms } => {
                if b == 0.0 {
                    return Self::constant(a);
                }
                let mut mapped: Vec<(f64, f64)> = atoms.iter().map(|&(x, p)| (a + b * x, p)).collect();
                if b < 0.0 {
                    mapped.reverse();
                }
                Self::Finite { atoms: mapped }
            }
        }
    }

    pub fn mean(&self) -> Result<f64> {
        match self {
            Self::Analytic { dist, shift, scale } => {
                let mu = dist.mean();
                if !mu.is_finite() {
                    return Err(Error::InfiniteMean);
                }
                Ok(shift + scale * mu)
            }
            Self::Finite { atoms } => Ok(atoms.iter().map(|(x, p)| x * p).sum()),
        }
    }

    /// Support size, or `None` for a continuous model.
    pub fn support_size(&self) -> Option<usize> {
        match self {
            Self::Analytic { .. } => None,
            Self::Finite { atoms } => Some(atoms.len()),
        }
    }

    /// Smallest `m` with `Pr(X < m) ≤ ½` and `Pr(X > m) ≤ ½`.
    pub fn lower_median(&self) -> Result<f64> {
        match self {
            Self::Analytic { .. } => self.continuous_median(),
            Self::Finite { atoms } => {
                let mut cum = 0.0;
                for &(x, p) in atoms {
                    cum += p;
                    if cum >= 0.5 - PROB_TOLERANCE {
                        return Ok(x);
                    }
                }
                Ok(atoms[atoms.len() - 1].0)
            }
        }
    }

    /// Largest `m` with `Pr(X < m) ≤ ½` and `Pr(X > m) ≤ ½`.
    pub fn upper_median(&self) -> Result<f64> {
        match self {
            Self::Analytic { .. } => self.continuous_median(),
            Self::Finite { atoms } => {
                let mut cum = 0.0;
                for &(x, p) in atoms.iter().rev() {
                    cum += p;
                    if cum >= 0.5 - PROB_TOLERANCE {
                        return Ok(x);
                    }
                }
                Ok(atoms[0].0)
            }
        }
    }

    fn continuous_median(&self) -> Result<f64> {
        let Self::Analytic { dist, shift, scale } = self else {
            unreachable!()
        };
        Ok(shift + scale * dist.quantile(0.5)?)
    }

    /// `E[(X − c)⁺]`.
    pub fn excess_over(&self, c: f64) -> Result<f64> {
        match self {
            Self::Finite { atoms } => Ok(atoms.iter().map(|&(x, p)| (x - c).max(0.0) * p).sum()),
            Self::Analytic { dist, shift, scale } => {
                if *scale == 0.0 {
                    return Ok((shift - c).max(0.0));
                }
                let t = (c - shift) / scale;
                if *scale > 0.0 {
                    Ok(scale * dist.expected_excess(t)?)
                } else {
                    if !dist.mean().is_finite() {
                        return Err(Error::InfiniteMean);
                    }
                    Ok(-scale * dist.expected_shortfall(t)?)
                }
            }
        }
    }

    /// `E|X − c|`.
    pub fn abs_deviation(&self, c: f64) -> Result<f64> {
        // E|X − c| = 2 E[(X − c)⁺] − (E[X] − c)
        let mean = self.mean()?;
        Ok((2.0 * self.excess_over(c)? - (mean - c)).max(0.0))
    }

    /// Lower median, `MD = E|X − E X|`, and `MDM = E|X − m|`.
    pub fn median_md_mdm(&self) -> Result<(f64, f64, f64)> {
        let mean = self.mean()?;
        let m = self.lower_median()?;
        Ok((m, self.abs_deviation(mean)?, self.abs_deviation(m)?))
    }

    /// The `u`-quantile, clipping unbounded tails at `TRUNCATION_TAIL`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Self::Finite { atoms } => {
                let mut cum = 0.0;
                for &(x, p) in atoms {
                    cum += p;
                    if cum >= u {
                        return x;
                    }
                }
                atoms[atoms.len() - 1].0
            }
            Self::Analytic { dist, shift, scale } => {
                let level = if *scale >= 0.0 { u } else { 1.0 - u };
                let level = level.clamp(0.0, 1.0 - TRUNCATION_TAIL);
                shift + scale * dist.quantile(level).expect("clamped level")
            }
        }
    }
}

/// Checks `MDM ≤ MD ≤ 2 MDM` and the invariance of `MDM` under `X − a` and
/// `a − X` for 20 seeded random shifts `a`.
pub fn mdm_md_relation_check(x: &RandomVariableModel, seed: u64) -> Result<bool> {
    let close = |a: f64, b: f64| (a - b).abs() <= EXACT_TOLERANCE * (1.0 + a.abs().max(b.abs()));
    let (_, md, mdm) = x.median_md_mdm()?;
    if mdm > md + EXACT_TOLERANCE * (1.0 + md) || md > 2.0 * mdm + EXACT_TOLERANCE * (1.0 + mdm) {
        return Ok(false);
    }
    let mut rng = CounterRng::new(seed, 0);
    for _ in 0..20 {
        let a = 20.0 * rng.next_open01() - 10.0;
        let (_, md_s, mdm_s) = x.affine(-a, 1.0).median_md_mdm()?;
        let (_, md_r, mdm_r) = x.affine(a, -1.0).median_md_mdm()?;
        if !(close(mdm_s, mdm) && close(mdm_r, mdm) && close(md_s, md) && close(md_r, md)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Conditional means of a sum of independent finite variables given the
/// medially coupled signs `σ ∈ {±1}ⁿ`; bit `i` of the index set means
/// `σ_i = +1`.
#[derive(Clone, Debug)]
pub struct SignProfileTable {
    pub n: usize,
    pub means: Vec<f64>,
    /// `E[X_i | ε_i = +1]` and `E[X_i | ε_i = −1]`.
    pub conditional: Vec<(f64, f64)>,
    pub mdm: Vec<f64>,
}

/// `(E[X | ε = +1], E[X | ε = −1])` for the fair sign `ε` with
/// `ε (X − m) ≥ 0`, splitting any atom at the median between the two signs.
pub fn medially_coupled_means(x: &RandomVariableModel) -> Result<(f64, f64)> {
    let RandomVariableModel::Finite { atoms } = x else {
        return Err(Error::InvalidParameter("medially coupled signs need a finite model".into()));
    };
    let m = x.lower_median()?;
    let (mut p_hi, mut s_hi, mut p_lo, mut s_lo) = (0.0, 0.0, 0.0, 0.0);
    for &(v, p) in atoms {
        if v > m {
            p_hi += p;
            s_hi += v * p;
        } else if v < m {
            p_lo += p;
            s_lo += v * p;
        }
    }
    if p_hi > 0.5 + PROB_TOLERANCE || p_lo > 0.5 + PROB_TOLERANCE {
        return Err(Error::CouplingInfeasible);
    }
    let plus = 2.0 * (s_hi + m * (0.5 - p_hi).max(0.0));
    let minus = 2.0 * (s_lo + m * (0.5 - p_lo).max(0.0));
    Ok((plus, minus))
}

impl SignProfileTable {
    pub fn new(xs: &[RandomVariableModel]) -> Result<Self> {
        let n = xs.len();
        if n > MAX_TABLE_AGENTS {
            return Err(Error::TooManyAgents {
                n,
                max: MAX_TABLE_AGENTS,
            });
        }
        let conditional = xs.iter().map(medially_coupled_means).collect::<Result<Vec<_>>>()?;
        let mdm = xs.iter().map(|x| Ok(x.median_md_mdm()?.2)).collect::<Result<Vec<_>>>()?;
        let means = (0..1usize << n)
            .map(|sigma| {
                conditional
                    .iter()
                    .enumerate()
                    .map(|(i, &(plus, minus))| if sigma >> i & 1 == 1 { plus } else { minus })
                    .sum()
            })
            .collect();
        Ok(Self {
            n,
            means,
            conditional,
            mdm,
        })
    }

    /// Whether `E[X_i | ε_i = +1] − E[X_i | ε_i = −1] = 2 MDM(X_i)` for
    /// every coordinate.
    pub fn coupling_identity_holds(&self) -> bool {
        self.conditional
            .iter()
            .zip(&self.mdm)
            .all(|(&(plus, minus), &mdm)| ((plus - minus) - 2.0 * mdm).abs() <= EXACT_TOLERANCE * (1.0 + mdm))
    }

    /// Smallest `E(σ) − E(σ′)` over comparable `σ ≻ σ′`. Gaps add along
    /// chains, so covering pairs (one coordinate flipped) suffice.
    pub fn min_comparable_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for sigma in 0..self.means.len() {
            for i in 0..self.n {
                if sigma >> i & 1 == 1 {
                    gap = gap.min(self.means[sigma] - self.means[sigma & !(1 << i)]);
                }
            }
        }
        gap
    }

    /// Number of sign profiles with `E(σ) ∈ (a, a + 2]`.
    pub fn interval_count(&self, a: f64) -> IntervalCount {
        IntervalCount::new(self.n, self.means.iter().filter(|&&e| e > a && e <= a + 2.0).count())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IntervalCount {
    pub count: usize,
    /// `C(n, ⌊n/2⌋)`.
    pub bound: u64,
    pub ok: bool,
}

impl IntervalCount {
    fn new(n: usize, count: usize) -> Self {
        let bound = central_binomial(n);
        Self {
            count,
            bound,
            ok: count as u64 <= bound,
        }
    }
}

/// `C(n, ⌊n/2⌋)`.
pub fn central_binomial(n: usize) -> u64 {
    let k = n / 2;
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Number of sign vectors `ε` with `Σ ε_i x_i ∈ (a, a + 2]`, for `x_i ≥ 1`.
pub fn interval_count_signed_sums(xs: &[f64], a: f64) -> Result<IntervalCount> {
    let n = xs.len();
    if n > MAX_SIGNED_SUM_TERMS {
        return Err(Error::TooManyAgents {
            n,
            max: MAX_SIGNED_SUM_TERMS,
        });
    }
    if let Some(x) = xs.iter().find(|x| !(**x >= 1.0)) {
        return Err(Error::InvalidParameter(format!("signed-sum terms must be at least 1, got {x}")));
    }
    let total: f64 = xs.iter().sum();
    let count = (0..1u32 << n)
        .into_par_iter()
        .filter(|&sigma| {
            // Σ ε x = 2 Σ_{ε=+1} x − Σ x
            let plus: f64 = (0..n).filter(|i| sigma >> i & 1 == 1).map(|i| xs[i]).sum();
            let s = 2.0 * plus - total;
            s > a && s <= a + 2.0
        })
        .count();
    Ok(IntervalCount::new(n, count))
}

/// Which positive-part inequality a [`PositivePartReport`] checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivePartCheck {
    /// `MDM(X₁ + ⋯ + Xₙ) ≥ √n / 12` when every `MDM(X_i) ≥ 1`.
    MdmOfSum,
    /// `E[(ΣY)⁺] ≥ Σ E[Y_i⁺] / (48 √n)` for mean-zero `Y_i`.
    MeanZero,
    /// `E[(ΣY)⁺] ≥ Σ E[Y_i⁺] / (96 √n)` for positive-mean `Y_i`.
    PositiveMean,
}

impl PositivePartCheck {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::MdmOfSum => "mdm_of_sum",
            Self::MeanZero => "mean_zero_positive_part",
            Self::PositiveMean => "positive_mean_positive_part",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositivePartReport {
    pub check: PositivePartCheck,
    pub n: usize,
    pub lhs: f64,
    /// Zero on the exact path.
    pub lhs_se: f64,
    pub rhs: f64,
    pub exact: bool,
    /// `None` when a hypothesis fails and the check was skipped.
    pub ok: Option<bool>,
    pub skipped_reason: Option<String>,
}

impl PositivePartReport {
    fn skipped(check: PositivePartCheck, n: usize, reason: String) -> Self {
        Self {
            check,
            n,
            lhs: f64::NAN,
            lhs_se: f64::NAN,
            rhs: f64::NAN,
            exact: false,
            ok: None,
            skipped_reason: Some(reason),
        }
    }
}

/// The distribution of `Σ X_i`, or `None` if it is too large to tabulate.
fn exact_sum(xs: &[RandomVariableModel]) -> Option<RandomVariableModel> {
    let mut product = 1.0;
    for x in xs {
        product *= x.support_size()? as f64;
    }
    if product > MAX_EXACT_SUPPORT {
        return None;
    }
    let mut acc = vec![(0.0, 1.0)];
    for x in xs {
        let RandomVariableModel::Finite { atoms } = x else {
            unreachable!()
        };
        let mut next = Vec::with_capacity(acc.len() * atoms.len());
        for &(s, p) in &acc {
            for &(v, q) in atoms {
                next.push((s + v, p * q));
            }
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        acc.clear();
        for (v, p) in next {
            match acc.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => acc.push((v, p)),
            }
        }
    }
    Some(RandomVariableModel::Finite { atoms: acc })
}

/// Seeded samples of `Σ X_i`, one stream per term.
fn sampled_sums(xs: &[RandomVariableModel], n_samples: u64, seed: u64) -> Vec<f64> {
    let keys: Vec<u64> = (0..xs.len() as u64).map(|i| stream_key(seed, i)).collect();
    (0..n_samples)
        .into_par_iter()
        .map(|s| xs.iter().zip(&keys).map(|(x, &k)| x.quantile(uniform_at(k, s))).sum())
        .collect()
}

fn mean_and_se(values: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn finish(check: PositivePartCheck, n: usize, lhs: f64, lhs_se: f64, rhs: f64, exact: bool) -> PositivePartReport {
    let slack = if exact {
        EXACT_TOLERANCE * (1.0 + rhs.abs())
    } else {
        3.0 * lhs_se
    };
    PositivePartReport {
        check,
        n,
        lhs,
        lhs_se,
        rhs,
        exact,
        ok: Some(lhs >= rhs - slack),
        skipped_reason: None,
    }
}

/// Checks `MDM(X₁ + ⋯ + Xₙ) ≥ √n / 12`, skipped unless every `MDM(X_i) ≥ 1`.
pub fn mdm_of_sum_check(xs: &[RandomVariableModel], n_samples: u64, seed: u64) -> Result<PositivePartReport> {
    let check = PositivePartCheck::MdmOfSum;
    let n = xs.len();
    for (i, x) in xs.iter().enumerate() {
        let mdm = x.median_md_mdm()?.2;
        if mdm < 1.0 - EXACT_TOLERANCE {
            return Ok(PositivePartReport::skipped(check, n, format!("MDM(X_{}) = {mdm} < 1", i + 1)));
        }
    }
    let rhs = (n as f64).sqrt() / 12.0;
    if let Some(sum) = exact_sum(xs) {
        return Ok(finish(check, n, sum.median_md_mdm()?.2, 0.0, rhs, true));
    }
    let mut sums = sampled_sums(xs, n_samples, seed);
    sums.sort_by(f64::total_cmp);
    let m = sums[(sums.len() - 1) / 2];
    let (lhs, se) = mean_and_se(sums.iter().map(|s| (s - m).abs()));
    Ok(finish(check, n, lhs, se, rhs, false))
}

fn positive_part_check(
    check: PositivePartCheck,
    ys: &[RandomVariableModel],
    divisor: f64,
    n_samples: u64,
    seed: u64,
) -> Result<PositivePartReport> {
    let n = ys.len();
    for (i, y) in ys.iter().enumerate() {
        let mean = y.mean()?;
        let violated = match check {
            PositivePartCheck::MeanZero => mean.abs() > EXACT_TOLERANCE,
            _ => mean <= 0.0,
        };
        if violated {
            let want = if check == PositivePartCheck::MeanZero {
                "zero"
            } else {
                "positive"
            };
            return Ok(PositivePartReport::skipped(
                check,
                n,
                format!("E[Y_{}] = {mean} is not {want}", i + 1),
            ));
        }
    }
    let z: f64 = ys.iter().map(|y| y.excess_over(0.0)).sum::<Result<f64>>()?;
    let rhs = z / (divisor * (n as f64).sqrt());
    if let Some(sum) = exact_sum(ys) {
        return Ok(finish(check, n, sum.excess_over(0.0)?, 0.0, rhs, true));
    }
    let sums = sampled_sums(ys, n_samples, seed);
    let (lhs, se) = mean_and_se(sums.iter().map(|s| s.max(0.0)));
    Ok(finish(check, n, lhs, se, rhs, false))
}

/// Checks `E[(ΣY)⁺] ≥ Σ E[Y_i⁺] / (48 √n)`, skipped unless every `E[Y_i] = 0`.
pub fn mean_zero_check(ys: &[RandomVariableModel], n_samples: u64, seed: u64) -> Result<PositivePartReport> {
    positive_part_check(PositivePartCheck::MeanZero, ys, 48.0, n_samples, seed)
}

/// Checks `E[(ΣY)⁺] ≥ Σ E[Y_i⁺] / (96 √n)`, skipped unless every `E[Y_i] > 0`.
pub fn positive_mean_check(ys: &[RandomVariableModel], n_samples: u64, seed: u64) -> Result<PositivePartReport> {
    positive_part_check(PositivePartCheck::PositiveMean, ys, 96.0, n_samples, seed)
}
