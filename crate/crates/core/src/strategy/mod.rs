//! Scripted policies, rollouts, Monte Carlo evaluation, exhaustive
//! enumeration over small decks, and grid search over policies.

mod eval;
mod experiment;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{
    Action, ActionKind, ConfigError, DecisionLog, GameConfig, GamePhase, GameState, PlayerId, RuleError, Species,
};
use crate::outcomes::{score_state, Directions, ScoreReport};

pub use eval::{
    enumerate_exact, evaluate_mc, rollout_seed, search_policies, EvaluationResult, Expectation, Objective,
    RankedPolicy, SeatExpectation, SeatStats, MAX_ORDERINGS,
};
pub use experiment::{Experiment, ExperimentResults, PolicyGrid, EXPERIMENT_FORMAT, RESULTS_FORMAT};

/// Upper bound on player moves in one game; a policy exceeding it is faulty.
pub const STEP_LIMIT: usize = 10_000;

/// Anything that can choose a move for a seat from the public state.
pub trait Agent {
    fn act(&mut self, state: &GameState, seat: PlayerId) -> Action;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("policy for {seat} made an illegal move in {phase:?}: {action:?}: {source}")]
    PolicyFault {
        seat: PlayerId,
        phase: GamePhase,
        action: Action,
        #[source]
        source: RuleError,
    },
    #[error("game did not finish within {0} moves")]
    StepLimit(usize),
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("expected {expected} policies, got {found}")]
    PolicyCount { expected: usize, found: usize },
    #[error("policy {0:?} has an empty species plan")]
    EmptySpeciesPlan(String),
    #[error("rollout {index}: {source}")]
    Rollout {
        index: u64,
        #[source]
        source: Box<StrategyError>,
    },
    #[error("at least one sample is required")]
    NoSamples,
    #[error("policy space is empty")]
    EmptySpace,
    #[error("deck has {0} cards; exhaustive enumeration supports at most 6")]
    DeckTooLarge(usize),
    #[error("{0} draw orderings exceed the enumeration bound")]
    StateSpace(u128),
    #[error("invalid experiment: {0}")]
    Experiment(String),
}

/// Species for the k-th parcel a player plants, cycling through the list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeciesPlan(pub Vec<Species>);

impl Default for SpeciesPlan {
    fn default() -> Self {
        SpeciesPlan(vec![Species::ScotsPine])
    }
}

impl SpeciesPlan {
    pub fn single(species: Species) -> Self {
        SpeciesPlan(vec![species])
    }

    fn pick(&self, k: usize) -> Species {
        self.0[k % self.0.len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PlantRule {
    Nothing,
    /// Plant up to this many parcels, as cash allows.
    Count {
        parcels: u8,
    },
    /// Plant every managed parcel the budget covers.
    #[default]
    AllAffordable,
    /// Keep at least this much cash in hand after each planting.
    Reserve {
        cash: i64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum InsuranceRule {
    #[default]
    Never,
    AlwaysAtY0,
    SpeciesAtY0 {
        species: Vec<Species>,
    },
}

impl InsuranceRule {
    fn covers(&self, species: Species) -> bool {
        match self {
            InsuranceRule::Never => false,
            InsuranceRule::AlwaysAtY0 => true,
            InsuranceRule::SpeciesAtY0 { species: list } => list.contains(&species),
        }
    }
}

/// Harvest or skip, per yield phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarvestRule {
    pub first_thinning: bool,
    pub second_thinning: bool,
    pub final_felling: bool,
}

impl Default for HarvestRule {
    fn default() -> Self {
        Self {
            first_thinning: true,
            second_thinning: true,
            final_felling: true,
        }
    }
}

impl HarvestRule {
    fn harvests(&self, phase: GamePhase) -> bool {
        match phase {
            GamePhase::Y30Thinning => self.first_thinning,
            GamePhase::Y45Thinning => self.second_thinning,
            GamePhase::Y60Felling => self.final_felling,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LeaseRule {
    #[default]
    None,
    /// Offer the highest-numbered `parcels` owned parcels at `price` each and leave them unplanted.
    Offer { parcels: u8, price: i64 },
    /// Accept any offer from another player at or below `max_price`.
    Accept { max_price: i64 },
}

/// A deterministic strategy that sees only the public state.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Policy {
    pub id: String,
    pub species: SpeciesPlan,
    pub plant: PlantRule,
    pub insurance: InsuranceRule,
    pub harvest: HarvestRule,
    pub lease: LeaseRule,
}

impl Policy {
    pub fn named(id: &str) -> Self {
        Policy {
            id: id.to_owned(),
            ..Policy::default()
        }
    }

    pub fn plant_nothing() -> Self {
        Policy {
            plant: PlantRule::Nothing,
            ..Policy::named("plant-nothing")
        }
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        if self.species.0.is_empty() {
            return Err(StrategyError::EmptySpeciesPlan(self.id.clone()));
        }
        Ok(())
    }

    fn lease_reserved(&self, state: &GameState, seat: PlayerId) -> Vec<u8> {
        match self.lease {
            LeaseRule::Offer { parcels, .. } => {
                let mut owned: Vec<u8> = state.owned_parcels(seat).map(|p| p.id).collect();
                owned.reverse();
                owned.truncate(usize::from(parcels));
                owned
            }
            _ => Vec::new(),
        }
    }

    fn planting_move(&self, state: &GameState, seat: PlayerId) -> Option<ActionKind> {
        let cfg = &state.config;
        let cash = state.player(seat)?.cash;

        if let LeaseRule::Accept { max_price } = self.lease {
            if let Some(offer) = state
                .lease_offers
                .iter()
                .find(|o| o.lessor != seat && o.price <= max_price && o.price <= cash)
            {
                return Some(ActionKind::LeaseAccept { offer_id: offer.id });
            }
        }

        let reserved = self.lease_reserved(state, seat);
        if let LeaseRule::Offer { price, .. } = self.lease {
            let pending = |id: u8| state.lease_offers.iter().any(|o| o.parcel == id);
            if let Some(&parcel) = reserved.iter().find(|&&id| {
                state
                    .parcel(id)
                    .is_some_and(|p| p.manager == Some(seat) && !p.is_planted() && !pending(id))
            }) {
                return Some(ActionKind::LeaseOffer { parcel, price });
            }
        }

        let premium = cfg.premiums.planting;
        if let Some(p) = state.managed_parcels(seat).find(|p| {
            p.is_planted() && p.trees > 0 && !p.insured && p.species.is_some_and(|s| self.insurance.covers(s))
        }) {
            if cash >= premium {
                return Some(ActionKind::BuyInsurance { parcel: p.id });
            }
        }

        let planted = state.managed_parcels(seat).filter(|p| p.is_planted()).count();
        let target = match self.plant {
            PlantRule::Nothing => 0,
            PlantRule::Count { parcels } => usize::from(parcels),
            PlantRule::AllAffordable | PlantRule::Reserve { .. } => usize::MAX,
        };
        if planted >= target {
            return None;
        }
        let species = self.species.pick(planted);
        let cost = cfg.planting_cost + if self.insurance.covers(species) { premium } else { 0 };
        let floor = match self.plant {
            PlantRule::Reserve { cash } => cash,
            _ => 0,
        };
        if cash - cost < floor {
            return None;
        }
        let pending = |id: u8| state.lease_offers.iter().any(|o| o.parcel == id);
        state
            .managed_parcels(seat)
            .find(|p| !p.is_planted() && !reserved.contains(&p.id) && !pending(p.id))
            .map(|p| ActionKind::Plant { parcel: p.id, species })
    }
}

impl Agent for Policy {
    fn act(&mut self, state: &GameState, seat: PlayerId) -> Action {
        let phase = state.phase;
        let kind = match phase {
            GamePhase::Y0Planting => self.planting_move(state, seat),
            _ if phase.is_yield() => state.undecided_parcels(seat).first().map(|&parcel| {
                if self.harvest.harvests(phase) {
                    ActionKind::Harvest { parcel }
                } else {
                    ActionKind::Skip { parcel }
                }
            }),
            _ => None,
        };
        Action::new(seat, phase, kind.unwrap_or(ActionKind::Pass))
    }
}

/// Uniformly random legal moves; lease offers get a random price.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        RandomAgent {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent for RandomAgent {
    fn act(&mut self, state: &GameState, seat: PlayerId) -> Action {
        let legal = state.legal_actions(seat);
        if legal.is_empty() {
            return Action::new(seat, state.phase, ActionKind::Pass);
        }
        let mut action = legal[self.rng.random_range(0..legal.len())];
        if let ActionKind::LeaseOffer { parcel, .. } = action.kind {
            let price = self.rng.random_range(0..=20) * 100;
            action.kind = ActionKind::LeaseOffer { parcel, price };
        }
        action
    }
}

/// Drive `state` to the end, asking the seat's agent whenever a decision is
/// due. `observe` sees the state after every move and phase advance.
pub fn play(
    mut state: GameState,
    agents: &mut [&mut dyn Agent],
    mut observe: impl FnMut(&GameState),
) -> Result<GameState, StrategyError> {
    if agents.len() != state.players.len() {
        return Err(StrategyError::PolicyCount {
            expected: state.players.len(),
            found: agents.len(),
        });
    }
    let mut steps = 0;
    while !state.is_finished() {
        match state.current_actor() {
            Some(seat) => {
                steps += 1;
                if steps > STEP_LIMIT {
                    return Err(StrategyError::StepLimit(STEP_LIMIT));
                }
                let action = agents[seat.index()].act(&state, seat);
                state.apply(action).map_err(|source| StrategyError::PolicyFault {
                    seat,
                    phase: state.phase,
                    action,
                    source,
                })?;
            }
            None => {
                state.advance_phase().expect("no seat left to act");
            }
        }
        observe(&state);
    }
    Ok(state)
}

pub(crate) fn play_policies(state: GameState, policies: &[Policy]) -> Result<GameState, StrategyError> {
    for p in policies {
        p.validate()?;
    }
    let mut owned: Vec<Policy> = policies.to_vec();
    let mut agents: Vec<&mut dyn Agent> = owned.iter_mut().map(|p| p as &mut dyn Agent).collect();
    play(state, &mut agents, |_| {})
}

/// Play one complete game with `policies[seat]` at each seat.
pub fn rollout(
    policies: &[Policy],
    config: &GameConfig,
    seed: u64,
) -> Result<(DecisionLog, ScoreReport), StrategyError> {
    let config = GameConfig { seed, ..config.clone() };
    let state = play_policies(GameState::new(config)?, policies)?;
    let report = score_state(&state, &state.config.coefficients, &Directions::default());
    Ok((state.export_log(), report))
}
