//! The efficient (VCG), revenue-optimal, and lazy-reserve VCG mechanisms,
//! evaluated on one value profile at a time.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::{Distribution, VirtualValueCurve, DEFAULT_IRONING_GRID};
use crate::env::{AgentSet, EnvKind, FeasibilityEnvironment};
use crate::error::{Error, Result};

/// Bisection steps for threshold payments.
pub const THRESHOLD_STEPS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismId {
    Efficient,
    Optimal,
    VcgL,
}

impl MechanismId {
    pub const ALL: [Self; 3] = [Self::Efficient, Self::Optimal, Self::VcgL];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Efficient => "efficient",
            Self::Optimal => "optimal",
            Self::VcgL => "vcg_l",
        }
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMechanism(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MechanismOutcome {
    pub served: AgentSet,
    /// Per-agent payments; `None` when revenue is accounted through the
    /// virtual surplus instead.
    pub payments: Option<Vec<f64>>,
    pub welfare: f64,
    pub virtual_revenue: f64,
}

impl MechanismOutcome {
    /// Total payments if present, else the ironed virtual surplus.
    pub fn revenue(&self) -> f64 {
        match &self.payments {
            Some(p) => p.iter().sum(),
            None => self.virtual_revenue,
        }
    }
}

/// An environment together with each agent's value distribution and the
/// derived ironed virtual value curves and reserve prices.
#[derive(Clone, Debug)]
pub struct Market {
    env: FeasibilityEnvironment,
    dists: Vec<Distribution>,
    curves: Vec<Arc<VirtualValueCurve>>,
}

impl Market {
    pub fn new(env: FeasibilityEnvironment, dists: Vec<Distribution>) -> Result<Self> {
        if dists.len() != env.n() {
            return Err(Error::ProfileLength {
                expected: env.n(),
                got: dists.len(),
            });
        }
        let mut curves: Vec<Arc<VirtualValueCurve>> = Vec::with_capacity(dists.len());
        for (i, d) in dists.iter().enumerate() {
            let shared = dists[..i].iter().position(|other| other == d);
            curves.push(match shared {
                Some(j) => Arc::clone(&curves[j]),
                None => Arc::new(VirtualValueCurve::new(d, DEFAULT_IRONING_GRID)?),
            });
        }
        Ok(Self { env, dists, curves })
    }

    /// `n` agents sharing one distribution.
    pub fn iid(env: FeasibilityEnvironment, dist: Distribution) -> Result<Self> {
        let n = env.n();
        Self::new(env, vec![dist; n])
    }

    pub fn env(&self) -> &FeasibilityEnvironment {
        &self.env
    }

    pub fn dists(&self) -> &[Distribution] {
        &self.dists
    }

    pub fn n(&self) -> usize {
        self.env.n()
    }

    pub fn curve(&self, i: usize) -> &VirtualValueCurve {
        &self.curves[i]
    }

    /// Monopoly reserve price of agent `i`.
    pub fn reserve(&self, i: usize) -> f64 {
        self.curves[i].monopoly_price
    }

    pub fn ironed_values(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.curves).map(|(&x, c)| c.ironed_value(x)).collect()
    }

    fn check_profile(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n() {
            return Err(Error::ProfileLength {
                expected: self.n(),
                got: v.len(),
            });
        }
        if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidParameter(format!("values must be finite and non-negative, got {x}")));
        }
        Ok(())
    }

    fn outcome_for(&self, served: AgentSet, payments: Option<Vec<f64>>, v: &[f64], phi: Option<&[f64]>) -> MechanismOutcome {
        let virtual_revenue = match phi {
            Some(phi) => served.weight(phi),
            None => served.iter().map(|i| self.curves[i].ironed_value(v[i])).sum(),
        };
        MechanismOutcome {
            served,
            payments,
            welfare: served.weight(v),
            virtual_revenue,
        }
    }

    /// Welfare-maximizing allocation with Clarke pivot payments.
    pub fn efficient_outcome(&self, v: &[f64]) -> Result<MechanismOutcome> {
        self.check_profile(v)?;
        let (served, payments) = self.clarke(v)?;
        Ok(self.outcome_for(served, Some(payments), v, None))
    }

    fn clarke(&self, v: &[f64]) -> Result<(AgentSet, Vec<f64>)> {
        let (served, _) = self.env.max_weight_set(v)?;
        let mut payments = vec![0.0; v.len()];
        let mut without = v.to_vec();
        for i in served.iter() {
            without[i] = 0.0;
            let (_, others_best) = self.env.max_weight_set(&without)?;
            without[i] = v[i];
            let others_here: f64 = served.iter().filter(|&j| j != i).map(|j| v[j]).sum();
            payments[i] = (others_best - others_here).clamp(0.0, v[i]);
        }
        Ok((served, payments))
    }

    fn optimal_set(&self, phi: &[f64]) -> Result<AgentSet> {
        if let EnvKind::PublicProject = self.env.kind() {
            // Zero virtual surplus still serves.
            let total: f64 = phi.iter().sum();
            return Ok(if total >= 0.0 {
                AgentSet::full(self.n())
            } else {
                AgentSet::EMPTY
            });
        }
        Ok(self.env.max_weight_set(phi)?.0)
    }

    /// Ironed virtual surplus maximization; payments are left empty.
    pub fn optimal_outcome(&self, v: &[f64]) -> Result<MechanismOutcome> {
        self.check_profile(v)?;
        let phi = self.ironed_values(v);
        let served = self.optimal_set(&phi)?;
        Ok(self.outcome_for(served, None, v, Some(&phi)))
    }

    /// VCG, then drop winners below their reserve; survivors pay the larger
    /// of reserve and Clarke payment.
    pub fn vcg_l_outcome(&self, v: &[f64]) -> Result<MechanismOutcome> {
        self.check_profile(v)?;
        let (preliminary, clarke) = self.clarke(v)?;
        let mut served = preliminary;
        let mut payments = vec![0.0; v.len()];
        for i in preliminary.iter() {
            let r = self.reserve(i);
            if v[i] < r {
                served.remove(i);
            } else {
                payments[i] = r.max(clarke[i]);
            }
        }
        if !self.env.is_feasible(served) {
            return Err(Error::NotDownwardClosed);
        }
        Ok(self.outcome_for(served, Some(payments), v, None))
    }

    pub fn outcome(&self, id: MechanismId, v: &[f64]) -> Result<MechanismOutcome> {
        match id {
            MechanismId::Efficient => self.efficient_outcome(v),
            MechanismId::Optimal => self.optimal_outcome(v),
            MechanismId::VcgL => self.vcg_l_outcome(v),
        }
    }

    /// The served set alone, skipping payment computation.
    pub fn allocation(&self, id: MechanismId, v: &[f64]) -> Result<AgentSet> {
        match id {
            MechanismId::Efficient => Ok(self.env.max_weight_set(v)?.0),
            MechanismId::Optimal => self.optimal_set(&self.ironed_values(v)),
            MechanismId::VcgL => {
                let (mut served, _) = self.env.max_weight_set(v)?;
                for i in served.iter() {
                    if v[i] < self.reserve(i) {
                        served.remove(i);
                    }
                }
                if !self.env.is_feasible(served) {
                    return Err(Error::NotDownwardClosed);
                }
                Ok(served)
            }
        }
    }

    /// Threshold-bid payments: each winner pays the lowest bid at which it
    /// would still be served, holding the other bids fixed.
    pub fn payment_audit(&self, id: MechanismId, v: &[f64]) -> Result<Vec<f64>> {
        self.check_profile(v)?;
        let served = self.allocation(id, v)?;
        let mut payments = vec![0.0; v.len()];
        let mut bids = v.to_vec();
        for i in served.iter() {
            let mut wins = |b: f64| -> Result<bool> {
                bids[i] = b;
                let s = self.allocation(id, &bids)?;
                Ok(s.contains(i))
            };
            let (mut lo, mut hi) = (0.0, v[i]);
            let threshold = if wins(lo)? {
                lo
            } else {
                for _ in 0..THRESHOLD_STEPS {
                    let mid = 0.5 * (lo + hi);
                    if wins(mid)? {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            };
            // A monotone rule serves every bid above the threshold and none
            // strictly below it.
            for k in 1..=16 {
                let b = v[i] * k as f64 / 16.0;
                if b > threshold && !wins(b)? {
                    return Err(Error::NonMonotoneAllocation(i));
                }
                let below = threshold * k as f64 / 17.0;
                if below < lo && wins(below)? {
                    return Err(Error::NonMonotoneAllocation(i));
                }
            }
            bids[i] = v[i];
            payments[i] = threshold;
        }
        Ok(payments)
    }
}
