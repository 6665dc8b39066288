//! Monetary and volumetric arithmetic: yields, revenues, premiums, cash flows and NPV.
//!
//! Volumes are kept as exact rationals so that revenue is rounded exactly once,
//! at the very end, to whole euros (half-up).

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::game::GamePhase;

/// Cubic metres, held exactly.
pub type Volume = Ratio<i64>;

/// Nominal per-hectare figures for one harvest phase of a fully stocked stand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseYield {
    /// Trees per hectare expected to be standing when the phase begins.
    pub standing_before: u32,
    /// Trees per hectare removed by the harvest.
    pub removal: u32,
    pub pulp_m3: u32,
    pub saw_m3: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YieldSchedule {
    pub first_thinning: PhaseYield,
    pub second_thinning: PhaseYield,
    pub final_felling: PhaseYield,
}

impl Default for YieldSchedule {
    fn default() -> Self {
        Self {
            first_thinning: PhaseYield {
                standing_before: 2000,
                removal: 1000,
                pulp_m3: 50,
                saw_m3: 0,
            },
            second_thinning: PhaseYield {
                standing_before: 1000,
                removal: 600,
                pulp_m3: 50,
                saw_m3: 50,
            },
            final_felling: PhaseYield {
                standing_before: 400,
                removal: 400,
                pulp_m3: 50,
                saw_m3: 150,
            },
        }
    }
}

impl YieldSchedule {
    pub fn for_phase(&self, phase: GamePhase) -> Option<&PhaseYield> {
        match phase {
            GamePhase::Y30Thinning => Some(&self.first_thinning),
            GamePhase::Y45Thinning => Some(&self.second_thinning),
            GamePhase::Y60Felling => Some(&self.final_felling),
            _ => None,
        }
    }

    /// Whether the phase's nominal harvest carries any sawwood.
    pub fn bears_sawwood(&self, phase: GamePhase) -> bool {
        self.for_phase(phase).is_some_and(|y| y.saw_m3 > 0)
    }
}

/// Base unit prices in euros per cubic metre.
///
/// Saw prices are stored per phase: the final-felling price of 60 €/m³ is the
/// one that reproduces the 9,000 € sawwood revenue for 150 m³.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceTable {
    pub pulp: i64,
    pub saw_first_thinning: i64,
    pub saw_second_thinning: i64,
    pub saw_final_felling: i64,
}

impl Default for PriceTable {
    fn default() -> Self {
        Self {
            pulp: 20,
            saw_first_thinning: 50,
            saw_second_thinning: 50,
            saw_final_felling: 60,
        }
    }
}

/// Unit prices after the market modifier, never negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EffectivePrices {
    pub pulp: i64,
    pub saw: i64,
}

impl PriceTable {
    pub fn base_saw(&self, phase: GamePhase) -> i64 {
        match phase {
            GamePhase::Y30Thinning => self.saw_first_thinning,
            GamePhase::Y45Thinning => self.saw_second_thinning,
            GamePhase::Y60Felling => self.saw_final_felling,
            _ => 0,
        }
    }

    pub fn effective(&self, phase: GamePhase, modifier: i64) -> EffectivePrices {
        EffectivePrices {
            pulp: (self.pulp + modifier).max(0),
            saw: (self.base_saw(phase) + modifier).max(0),
        }
    }
}

/// Insurance premium schedule keyed by the decision phase of purchase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsurancePremiums {
    pub planting: i64,
    pub first_thinning: i64,
    pub second_thinning: i64,
}

impl Default for InsurancePremiums {
    fn default() -> Self {
        Self {
            planting: 500,
            first_thinning: 1000,
            second_thinning: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CashFlowKind {
    Planting,
    Insurance,
    Lease,
    ParcelPurchase,
    HarvestRevenue,
}

/// One signed cash movement in a player's ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CashFlow {
    pub year: u32,
    pub amount: i64,
    pub kind: CashFlowKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestResult {
    pub trees_removed: u32,
    pub pulp: Volume,
    pub saw: Volume,
    pub revenue: i64,
}

impl HarvestResult {
    pub fn zero() -> Self {
        Self {
            trees_removed: 0,
            pulp: Volume::from_integer(0),
            saw: Volume::from_integer(0),
            revenue: 0,
        }
    }

    pub fn total_volume(&self) -> Volume {
        self.pulp + self.saw
    }
}

/// Current trees relative to the nominal stand density at the start of `phase`,
/// capped at one. Returns `None` outside the three harvest phases.
pub fn stocking_fraction(schedule: &YieldSchedule, trees: u32, phase: GamePhase) -> Option<Ratio<i64>> {
    let nominal = schedule.for_phase(phase)?;
    if nominal.standing_before == 0 {
        return Some(Ratio::from_integer(0));
    }
    let f = Ratio::new(i64::from(trees), i64::from(nominal.standing_before));
    Some(f.min(Ratio::from_integer(1)))
}

/// Volumes and trees removed by harvesting a parcel holding `trees` in `phase`.
///
/// Unplanted parcels and non-harvest phases yield the zero result. Revenue is
/// left at zero; see [`harvest_revenue`].
pub fn harvest_yield(schedule: &YieldSchedule, trees: u32, planted: bool, phase: GamePhase) -> HarvestResult {
    let (Some(nominal), Some(f)) = (schedule.for_phase(phase), stocking_fraction(schedule, trees, phase)) else {
        return HarvestResult::zero();
    };
    if !planted || trees == 0 {
        return HarvestResult::zero();
    }
    let removed = (f * i64::from(nominal.removal)).floor().to_integer();
    HarvestResult {
        trees_removed: u32::try_from(removed).unwrap_or(0).min(trees),
        pulp: f * i64::from(nominal.pulp_m3),
        saw: f * i64::from(nominal.saw_m3),
        revenue: 0,
    }
}

/// Euro revenue for harvested volumes. Downgraded sawwood sells at the pulp price.
pub fn harvest_revenue(
    result: &HarvestResult,
    phase: GamePhase,
    prices: &PriceTable,
    modifier: i64,
    downgraded: bool,
) -> i64 {
    let eff = prices.effective(phase, modifier);
    let saw_price = if downgraded { eff.pulp } else { eff.saw };
    let exact = result.pulp * eff.pulp + result.saw * saw_price;
    round_half_up(exact)
}

pub fn round_half_up(x: Ratio<i64>) -> i64 {
    (x + Ratio::new(1, 2)).floor().to_integer()
}

/// Premium for insuring one parcel when bought in `phase`. `None` means no
/// purchase is possible in that phase.
pub fn insurance_premium(premiums: &InsurancePremiums, phase: GamePhase) -> Option<i64> {
    match phase {
        GamePhase::Y0Planting => Some(premiums.planting),
        GamePhase::Y30Thinning => Some(premiums.first_thinning),
        GamePhase::Y45Thinning => Some(premiums.second_thinning),
        _ => None,
    }
}

/// Unrounded sum of `flows` discounted annually at `rate`.
pub fn discounted_sum(flows: &[CashFlow], rate: f64) -> f64 {
    flows
        .iter()
        .map(|f| f.amount as f64 / (1.0 + rate).powi(f.year as i32))
        .sum()
}

/// Net present value of `flows` discounted annually at `rate`, rounded to cents.
pub fn npv(flows: &[CashFlow], rate: f64) -> f64 {
    // Adding 0.0 turns a rounded -0.0 into 0.0.
    (discounted_sum(flows, rate) * 100.0).round() / 100.0 + 0.0
}
