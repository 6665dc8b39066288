use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{play_policies, Policy, StrategyError};
use crate::economics::npv;
use crate::game::{GameConfig, GamePhase, GameState, PlayerId};
use crate::outcomes::{indicators_from_state, Indicator, IndicatorVector};
use crate::seed::mix_seed;

/// Largest number of draw orderings [`enumerate_exact`] will play.
pub const MAX_ORDERINGS: u128 = 1_000_000;

const Z95: f64 = 1.96;

/// Seed of rollout `index` under `master`. Every candidate evaluated with the
/// same master seed sees the same card sequence at the same index.
pub fn rollout_seed(master: u64, index: u64) -> u64 {
    mix_seed(master, index)
}

#[derive(Debug, Clone)]
struct SeatOutcome {
    net_cash: i64,
    npv: f64,
    indicators: IndicatorVector,
}

fn seat_outcomes(state: &GameState) -> Vec<SeatOutcome> {
    let indicators = indicators_from_state(state, &state.config.coefficients);
    state
        .players
        .iter()
        .zip(indicators)
        .map(|(p, indicators)| SeatOutcome {
            net_cash: state.net_cash(p.id),
            npv: npv(&p.ledger, state.config.discount_rate),
            indicators,
        })
        .collect()
}

fn check_policies(policies: &[Policy], config: &GameConfig) -> Result<(), StrategyError> {
    config.validate()?;
    if policies.len() != usize::from(config.player_count) {
        return Err(StrategyError::PolicyCount {
            expected: usize::from(config.player_count),
            found: policies.len(),
        });
    }
    policies.iter().try_for_each(Policy::validate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeatStats {
    pub mean_net_cash: f64,
    pub variance_net_cash: f64,
    /// 95% confidence half-width, 1.96 × sqrt(variance / samples).
    pub ci_net_cash: f64,
    pub mean_npv: f64,
    pub variance_npv: f64,
    pub ci_npv: f64,
    pub indicator_means: IndicatorVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub samples: u64,
    pub master_seed: u64,
    pub seats: Vec<SeatStats>,
}

/// Mean and sample variance (n − 1 denominator; zero for one sample).
fn mean_var(xs: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = xs.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1) as f64)
}

fn indicator_means<'a>(items: impl Iterator<Item = &'a IndicatorVector> + Clone, n: usize) -> IndicatorVector {
    let mut out = IndicatorVector::default();
    for i in Indicator::ALL {
        out.set(i, items.clone().map(|v| v.get(i)).sum::<f64>() / n as f64);
    }
    out
}

/// Estimate per-seat outcomes from `samples` independent rollouts seeded by
/// [`rollout_seed`]`(master_seed, index)`.
pub fn evaluate_mc(
    policies: &[Policy],
    config: &GameConfig,
    samples: u64,
    master_seed: u64,
) -> Result<EvaluationResult, StrategyError> {
    if samples == 0 {
        return Err(StrategyError::NoSamples);
    }
    check_policies(policies, config)?;
    let runs: Vec<Vec<SeatOutcome>> = (0..samples)
        .into_par_iter()
        .map(|index| {
            let cfg = GameConfig {
                seed: rollout_seed(master_seed, index),
                ..config.clone()
            };
            GameState::new(cfg)
                .map_err(StrategyError::from)
                .and_then(|s| play_policies(s, policies))
                .map(|end| seat_outcomes(&end))
                .map_err(|e| StrategyError::Rollout {
                    index,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_, _>>()?;

    let n = runs.len();
    let seats = (0..policies.len())
        .map(|seat| {
            let col = runs.iter().map(move |r| &r[seat]);
            // Cash is integral, so its mean is exact regardless of summation order.
            let cash_total: i128 = col.clone().map(|o| i128::from(o.net_cash)).sum();
            let mean_net_cash = cash_total as f64 / n as f64;
            let (_, variance_net_cash) = mean_var(col.clone().map(|o| o.net_cash as f64), n);
            let (mean_npv, variance_npv) = mean_var(col.clone().map(|o| o.npv), n);
            SeatStats {
                mean_net_cash,
                variance_net_cash,
                ci_net_cash: Z95 * (variance_net_cash / n as f64).sqrt(),
                mean_npv,
                variance_npv,
                ci_npv: Z95 * (variance_npv / n as f64).sqrt(),
                indicator_means: indicator_means(col.map(|o| &o.indicators), n),
            }
        })
        .collect();
    Ok(EvaluationResult {
        samples,
        master_seed,
        seats,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeatExpectation {
    pub mean_net_cash: f64,
    /// Population variance over all orderings.
    pub variance_net_cash: f64,
    pub mean_npv: f64,
    pub indicator_means: IndicatorVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    /// Number of equally likely draw sequences played.
    pub orderings: u64,
    pub seats: Vec<SeatExpectation>,
}

fn draws_per_game(config: &GameConfig) -> usize {
    let risk_phases = std::iter::successors(Some(GamePhase::Y0Planting), |p| p.next())
        .filter(|p| p.is_risk())
        .count();
    risk_phases * usize::from(config.player_count)
}

/// Exact expected outcomes over every ordering of a small deck.
///
/// The deck is dealt as a uniformly random permutation and, when exhausted,
/// reshuffled uniformly; the enumeration therefore covers one permutation per
/// pass through the deck, each combination equally likely.
pub fn enumerate_exact(policies: &[Policy], config: &GameConfig) -> Result<Expectation, StrategyError> {
    check_policies(policies, config)?;
    let cards = config.deck.cards();
    let n = cards.len();
    if n > 6 {
        return Err(StrategyError::DeckTooLarge(n));
    }
    let draws = draws_per_game(config);
    let passes = draws.div_ceil(n) as u32;
    let perms: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let orderings = (perms.len() as u128).pow(passes);
    if orderings > MAX_ORDERINGS {
        return Err(StrategyError::StateSpace(orderings));
    }

    let runs: Vec<Vec<SeatOutcome>> = (0..orderings as u64)
        .into_par_iter()
        .map(|mut k| {
            let mut sequence = Vec::with_capacity(passes as usize * n);
            for _ in 0..passes {
                let perm = &perms[(k % perms.len() as u64) as usize];
                k /= perms.len() as u64;
                sequence.extend(perm.iter().map(|&i| cards[i]));
            }
            sequence.truncate(draws);
            let state = GameState::with_stacked_deck(config.clone(), sequence)?;
            Ok(seat_outcomes(&play_policies(state, policies)?))
        })
        .collect::<Result<_, StrategyError>>()?;

    let count = runs.len();
    let seats = (0..policies.len())
        .map(|seat| {
            let col = runs.iter().map(move |r| &r[seat]);
            let cash_total: i128 = col.clone().map(|o| i128::from(o.net_cash)).sum();
            let mean_net_cash = cash_total as f64 / count as f64;
            let variance_net_cash = col
                .clone()
                .map(|o| (o.net_cash as f64 - mean_net_cash).powi(2))
                .sum::<f64>()
                / count as f64;
            SeatExpectation {
                mean_net_cash,
                variance_net_cash,
                mean_npv: col.clone().map(|o| o.npv).sum::<f64>() / count as f64,
                indicator_means: indicator_means(col.map(|o| &o.indicators), count),
            }
        })
        .collect();
    Ok(Expectation {
        orderings: orderings as u64,
        seats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    MeanNpv,
    MeanNetCash,
}

impl Objective {
    fn of(self, s: &SeatStats) -> (f64, f64) {
        match self {
            Objective::MeanNpv => (s.mean_npv, s.variance_npv),
            Objective::MeanNetCash => (s.mean_net_cash, s.variance_net_cash),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPolicy {
    pub rank: u32,
    pub policy: Policy,
    pub objective: f64,
    pub variance: f64,
    pub result: EvaluationResult,
}

/// Evaluate every candidate at seat 0 (other seats play `background`, or the
/// candidate itself) with common random numbers, then rank by the objective,
/// lower variance, and policy id.
pub fn search_policies(
    space: &[Policy],
    background: Option<&Policy>,
    config: &GameConfig,
    budget: u64,
    master_seed: u64,
    objective: Objective,
) -> Result<Vec<RankedPolicy>, StrategyError> {
    if space.is_empty() {
        return Err(StrategyError::EmptySpace);
    }
    if budget == 0 {
        return Err(StrategyError::NoSamples);
    }
    let mut ranked = space
        .iter()
        .map(|candidate| {
            let others = background.unwrap_or(candidate);
            let seats: Vec<Policy> = (0..config.player_count)
                .map(|s| if s == 0 { candidate.clone() } else { others.clone() })
                .collect();
            let result = evaluate_mc(&seats, config, budget, master_seed)?;
            let (objective, variance) = objective.of(&result.seats[PlayerId(0).index()]);
            Ok(RankedPolicy {
                rank: 0,
                policy: candidate.clone(),
                objective,
                variance,
                result,
            })
        })
        .collect::<Result<Vec<_>, StrategyError>>()?;
    ranked.sort_by(|a, b| {
        b.objective
            .total_cmp(&a.objective)
            .then(a.variance.total_cmp(&b.variance))
            .then_with(|| a.policy.id.cmp(&b.policy.id))
    });
    for (i, r) in ranked.iter_mut().enumerate() {
        r.rank = i as u32 + 1;
    }
    Ok(ranked)
}
