//! Deterministic rules engine for the 60-year forest management cycle.
//!
//! A [`GameState`] is mutated only through [`GameState::apply`] and
//! [`GameState::advance_phase`]; both append to the state's [`DecisionLog`], and
//! [`replay`] rebuilds an identical state from that log.

mod log;
mod rules;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::economics::{CashFlow, InsurancePremiums, PriceTable, Volume, YieldSchedule};
use crate::outcomes::CoefficientTable;
use crate::risk::{build_deck, Deck, DeckSpec};

pub use log::{replay, DecisionLog, LogEvent, LogHeader, ReplayError, LOG_FORMAT, LOG_VERSION};

/// Number of one-hectare parcels on the board.
pub const BOARD_SIZE: usize = 40;
/// Trees per hectare represented by one pin on the physical board.
pub const TREES_PER_PIN: u32 = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    ScotsPine,
    NorwaySpruce,
    SilverBirch,
}

impl Species {
    pub const ALL: [Species; 3] = [Species::ScotsPine, Species::NorwaySpruce, Species::SilverBirch];

    /// Pin colour used on the board.
    pub fn pin_color(self) -> &'static str {
        match self {
            Species::ScotsPine => "red",
            Species::NorwaySpruce => "green",
            Species::SilverBirch => "white",
        }
    }
}

/// Seat index of a player; seat 0 acts first in every phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub u8);

impl PlayerId {
    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

impl std::fmt::Display for PlayerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "seat {}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GamePhase {
    Setup,
    Y0Planting,
    Risk0,
    Y30Thinning,
    Risk30,
    Y45Thinning,
    Risk45,
    Y60Felling,
    Scoring,
    Finished,
}

impl GamePhase {
    pub fn next(self) -> Option<GamePhase> {
        use GamePhase::*;
        Some(match self {
            Setup => Y0Planting,
            Y0Planting => Risk0,
            Risk0 => Y30Thinning,
            Y30Thinning => Risk30,
            Risk30 => Y45Thinning,
            Y45Thinning => Risk45,
            Risk45 => Y60Felling,
            Y60Felling => Scoring,
            Scoring => Finished,
            Finished => return None,
        })
    }

    pub fn is_decision(self) -> bool {
        matches!(
            self,
            GamePhase::Y0Planting | GamePhase::Y30Thinning | GamePhase::Y45Thinning | GamePhase::Y60Felling
        )
    }

    pub fn is_yield(self) -> bool {
        matches!(
            self,
            GamePhase::Y30Thinning | GamePhase::Y45Thinning | GamePhase::Y60Felling
        )
    }

    pub fn is_risk(self) -> bool {
        matches!(self, GamePhase::Risk0 | GamePhase::Risk30 | GamePhase::Risk45)
    }

    /// Stand age in years at this point of the cycle.
    pub fn year(self) -> u32 {
        use GamePhase::*;
        match self {
            Setup | Y0Planting | Risk0 => 0,
            Y30Thinning | Risk30 => 30,
            Y45Thinning | Risk45 => 45,
            Y60Felling | Scoring | Finished => 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossCause {
    Mammal,
    Storm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossRecord {
    /// Risk phase in which the loss happened.
    pub band: GamePhase,
    pub trees: u32,
    pub cause: LossCause,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestRecord {
    pub phase: GamePhase,
    pub harvester: PlayerId,
    pub trees_removed: u32,
    pub pulp: Volume,
    pub saw: Volume,
    pub revenue: i64,
    pub downgraded: bool,
}

impl HarvestRecord {
    pub fn volume(&self) -> Volume {
        self.pulp + self.saw
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parcel {
    pub id: u8,
    pub owner: Option<PlayerId>,
    /// Lessee if leased, otherwise the owner.
    pub manager: Option<PlayerId>,
    pub species: Option<Species>,
    pub trees: u32,
    pub planted_trees: u32,
    pub harvested_trees: u32,
    pub insured: bool,
    /// Sawwood is sold at the pulp price at the next sawwood-bearing harvest.
    pub pending_downgrade: bool,
    /// Sawwood is sold at the pulp price at final felling.
    pub rot_downgrade: bool,
    pub loss_history: Vec<LossRecord>,
    pub harvests: Vec<HarvestRecord>,
}

impl Parcel {
    fn new(id: u8, owner: Option<PlayerId>) -> Self {
        Self {
            id,
            owner,
            manager: owner,
            species: None,
            trees: 0,
            planted_trees: 0,
            harvested_trees: 0,
            insured: false,
            pending_downgrade: false,
            rot_downgrade: false,
            loss_history: Vec::new(),
            harvests: Vec::new(),
        }
    }

    pub fn is_planted(&self) -> bool {
        self.species.is_some()
    }

    pub fn is_leased(&self) -> bool {
        self.owner.is_some() && self.owner != self.manager
    }

    pub fn lost_trees(&self) -> u32 {
        self.loss_history.iter().map(|l| l.trees).sum()
    }

    /// Whole pins shown on the board for the standing trees.
    pub fn pins(&self) -> u32 {
        self.trees / TREES_PER_PIN
    }

    pub(crate) fn record_loss(&mut self, record: LossRecord) {
        let trees = record.trees.min(self.trees);
        self.trees -= trees;
        self.loss_history.push(LossRecord { trees, ..record });
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Player {
    pub id: PlayerId,
    pub name: String,
    pub cash: i64,
    pub ledger: Vec<CashFlow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaseOffer {
    pub id: u32,
    pub parcel: u8,
    pub lessor: PlayerId,
    pub price: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActionKind {
    Plant { parcel: u8, species: Species },
    BuyInsurance { parcel: u8 },
    LeaseOffer { parcel: u8, price: i64 },
    LeaseAccept { offer_id: u32 },
    BuyParcel { parcel: u8 },
    Harvest { parcel: u8 },
    Skip { parcel: u8 },
    Pass,
}

/// A player decision stamped with its actor and the phase it was made in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub actor: PlayerId,
    pub phase: GamePhase,
    #[serde(rename = "action")]
    pub kind: ActionKind,
}

impl Action {
    pub fn new(actor: PlayerId, phase: GamePhase, kind: ActionKind) -> Self {
        Self { actor, phase, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    pub player_count: u8,
    pub start_cash: i64,
    pub parcels_per_player: u8,
    pub planting_cost: i64,
    pub planting_density: u32,
    pub unowned_parcel_price: i64,
    pub discount_rate: f64,
    pub deck: DeckSpec,
    pub storm_severity_percent: u32,
    pub mammal_loss_percent: u32,
    pub premiums: InsurancePremiums,
    pub prices: PriceTable,
    pub yields: YieldSchedule,
    pub coefficients: CoefficientTable,
    pub seed: u64,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            player_count: 4,
            start_cash: 8000,
            parcels_per_player: 10,
            planting_cost: 1000,
            planting_density: 2000,
            unowned_parcel_price: 1500,
            discount_rate: 0.03,
            deck: DeckSpec::default(),
            storm_severity_percent: 40,
            mammal_loss_percent: 40,
            premiums: InsurancePremiums::default(),
            prices: PriceTable::default(),
            yields: YieldSchedule::default(),
            coefficients: CoefficientTable::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("player count {0} outside 2..=4")]
    PlayerCount(u8),
    #[error("{players} players x {per_player} parcels exceeds the {BOARD_SIZE}-parcel board")]
    BoardTooSmall { players: u8, per_player: u8 },
    #[error("risk deck is empty")]
    EmptyDeck,
    #[error("{0} must not be negative")]
    Negative(&'static str),
    #[error("{0} must be a percentage in 0..=100")]
    Percent(&'static str),
    #[error("roster has {got} names for {expected} players")]
    Roster { expected: u8, got: usize },
}

impl GameConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(2..=4).contains(&self.player_count) {
            return Err(ConfigError::PlayerCount(self.player_count));
        }
        if usize::from(self.player_count) * usize::from(self.parcels_per_player) > BOARD_SIZE {
            return Err(ConfigError::BoardTooSmall {
                players: self.player_count,
                per_player: self.parcels_per_player,
            });
        }
        if self.deck.total() == 0 {
            return Err(ConfigError::EmptyDeck);
        }
        for (name, v) in [
            ("start_cash", self.start_cash),
            ("planting_cost", self.planting_cost),
            ("unowned_parcel_price", self.unowned_parcel_price),
            ("premiums.planting", self.premiums.planting),
            ("premiums.first_thinning", self.premiums.first_thinning),
            ("premiums.second_thinning", self.premiums.second_thinning),
            ("prices.pulp", self.prices.pulp),
            ("prices.saw_first_thinning", self.prices.saw_first_thinning),
            ("prices.saw_second_thinning", self.prices.saw_second_thinning),
            ("prices.saw_final_felling", self.prices.saw_final_felling),
        ] {
            if v < 0 {
                return Err(ConfigError::Negative(name));
            }
        }
        if !(self.discount_rate >= 0.0 && self.discount_rate.is_finite()) {
            return Err(ConfigError::Negative("discount_rate"));
        }
        if self.storm_severity_percent > 100 {
            return Err(ConfigError::Percent("storm_severity_percent"));
        }
        if self.mammal_loss_percent > 100 {
            return Err(ConfigError::Percent("mammal_loss_percent"));
        }
        if !self.coefficients.is_valid() {
            return Err(ConfigError::Negative("coefficients"));
        }
        Ok(())
    }
}

/// Rejection reasons for actions and phase advances. The state is unchanged
/// whenever one of these is returned.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum RuleError {
    #[error("game finished")]
    GameFinished,
    #[error("illegal phase: action not allowed during {phase:?}")]
    WrongPhase { phase: GamePhase },
    #[error("unknown player {0}")]
    UnknownPlayer(PlayerId),
    #[error("out of turn: {actor} acted while {expected:?} is to move")]
    NotYourTurn {
        actor: PlayerId,
        expected: Option<PlayerId>,
    },
    #[error("unknown parcel {0}")]
    NoSuchParcel(u8),
    #[error("not manager of parcel {0}")]
    NotManager(u8),
    #[error("not owner of parcel {0}")]
    NotOwner(u8),
    #[error("insufficient funds: need {needed}, have {available}")]
    InsufficientFunds { needed: i64, available: i64 },
    #[error("already planted")]
    AlreadyPlanted(u8),
    #[error("not planted")]
    NotPlanted(u8),
    #[error("already insured")]
    AlreadyInsured(u8),
    #[error("insurance unavailable in final felling")]
    InsuranceUnavailable,
    #[error("double decision on parcel {0}")]
    DoubleDecision(u8),
    #[error("parcel {0} is already owned")]
    NotForSale(u8),
    #[error("parcel {0} already has an open lease offer")]
    OfferPending(u8),
    #[error("no lease offer {0}")]
    NoSuchOffer(u32),
    #[error("cannot accept own lease offer {0}")]
    OwnOffer(u32),
    #[error("negative price {0}")]
    NegativePrice(i64),
    #[error("undecided parcels remain: {0:?}")]
    UndecidedParcels(Vec<u8>),
    #[error("players still to act: {0:?}")]
    PlayersUndecided(Vec<PlayerId>),
}

impl RuleError {
    /// Stable machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            RuleError::GameFinished => "game_finished",
            RuleError::WrongPhase { .. } => "illegal_phase",
            RuleError::UnknownPlayer(_) => "unknown_player",
            RuleError::NotYourTurn { .. } => "out_of_turn",
            RuleError::NoSuchParcel(_) => "no_such_parcel",
            RuleError::NotManager(_) => "not_manager",
            RuleError::NotOwner(_) => "not_owner",
            RuleError::InsufficientFunds { .. } => "insufficient_funds",
            RuleError::AlreadyPlanted(_) => "already_planted",
            RuleError::NotPlanted(_) => "not_planted",
            RuleError::AlreadyInsured(_) => "already_insured",
            RuleError::InsuranceUnavailable => "insurance_unavailable",
            RuleError::DoubleDecision(_) => "double_decision",
            RuleError::NotForSale(_) => "not_for_sale",
            RuleError::OfferPending(_) => "offer_pending",
            RuleError::NoSuchOffer(_) => "no_such_offer",
            RuleError::OwnOffer(_) => "own_offer",
            RuleError::NegativePrice(_) => "negative_price",
            RuleError::UndecidedParcels(_) => "undecided_parcels",
            RuleError::PlayersUndecided(_) => "players_undecided",
        }
    }
}

/// Complete authoritative snapshot of one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub config: GameConfig,
    pub phase: GamePhase,
    pub players: Vec<Player>,
    pub parcels: Vec<Parcel>,
    pub deck: Deck,
    /// Cumulative market modifier in €/m³, applied to both assortments.
    pub price_modifier: i64,
    pub lease_offers: Vec<LeaseOffer>,
    pub next_offer_id: u32,
    /// Seats that have passed in the current decision phase.
    pub passed: Vec<bool>,
    /// Parcels with a harvest/skip decision in the current yield phase.
    pub decided: Vec<u8>,
    pub log: DecisionLog,
}

impl GameState {
    /// Start a game with default player names.
    pub fn new(config: GameConfig) -> Result<GameState, ConfigError> {
        let roster = (1..=config.player_count).map(|i| format!("Player {i}")).collect();
        Self::with_roster(config, roster)
    }

    pub fn with_roster(config: GameConfig, roster: Vec<String>) -> Result<GameState, ConfigError> {
        config.validate()?;
        let deck = build_deck(&config.deck, config.seed)?;
        Self::assemble(config, roster, deck)
    }

    /// Start a game whose risk deck deals `cards` in the given order.
    pub fn with_stacked_deck(config: GameConfig, cards: Vec<crate::risk::RiskCard>) -> Result<GameState, ConfigError> {
        config.validate()?;
        let deck = Deck::stacked(cards, config.seed)?;
        let roster = (1..=config.player_count).map(|i| format!("Player {i}")).collect();
        Self::assemble(config, roster, deck)
    }

    fn assemble(config: GameConfig, roster: Vec<String>, deck: Deck) -> Result<GameState, ConfigError> {
        if roster.len() != usize::from(config.player_count) {
            return Err(ConfigError::Roster {
                expected: config.player_count,
                got: roster.len(),
            });
        }
        let per = usize::from(config.parcels_per_player);
        let parcels = (0..BOARD_SIZE)
            .map(|i| {
                let seat = i / per;
                let owner = (seat < usize::from(config.player_count)).then_some(PlayerId(seat as u8));
                Parcel::new(i as u8, owner)
            })
            .collect();
        let players = roster
            .iter()
            .enumerate()
            .map(|(i, name)| Player {
                id: PlayerId(i as u8),
                name: name.clone(),
                cash: config.start_cash,
                ledger: Vec::new(),
            })
            .collect();
        let log = DecisionLog::new(LogHeader::new(config.clone(), roster));
        Ok(GameState {
            passed: vec![false; usize::from(config.player_count)],
            config,
            phase: GamePhase::Y0Planting,
            players,
            parcels,
            deck,
            price_modifier: 0,
            lease_offers: Vec::new(),
            next_offer_id: 0,
            decided: Vec::new(),
            log,
        })
    }

    pub fn player(&self, id: PlayerId) -> Option<&Player> {
        self.players.get(id.index())
    }

    pub fn parcel(&self, id: u8) -> Option<&Parcel> {
        self.parcels.get(usize::from(id))
    }

    pub fn owned_parcels(&self, id: PlayerId) -> impl Iterator<Item = &Parcel> + '_ {
        self.parcels.iter().filter(move |p| p.owner == Some(id))
    }

    pub fn managed_parcels(&self, id: PlayerId) -> impl Iterator<Item = &Parcel> + '_ {
        self.parcels.iter().filter(move |p| p.manager == Some(id))
    }

    /// Seat expected to act next, if the phase takes player decisions.
    pub fn current_actor(&self) -> Option<PlayerId> {
        if !self.phase.is_decision() {
            return None;
        }
        self.passed.iter().position(|p| !p).map(|i| PlayerId(i as u8))
    }

    /// Parcels managed by `player` still needing a harvest/skip decision this phase.
    pub fn undecided_parcels(&self, player: PlayerId) -> Vec<u8> {
        if !self.phase.is_yield() {
            return Vec::new();
        }
        self.managed_parcels(player)
            .filter(|p| p.is_planted() && p.trees > 0 && !self.decided.contains(&p.id))
            .map(|p| p.id)
            .collect()
    }

    pub fn is_finished(&self) -> bool {
        self.phase == GamePhase::Finished
    }

    /// Total cash held by players at the start of the game.
    pub fn initial_money(&self) -> i64 {
        self.config.start_cash * i64::from(self.config.player_count)
    }

    pub fn net_cash(&self, id: PlayerId) -> i64 {
        self.player(id).map_or(0, |p| p.cash - self.config.start_cash)
    }

    pub fn digest(&self) -> String {
        state_digest(self)
    }

    /// A copy of the log stamped with this state's digest, ready to persist.
    pub fn export_log(&self) -> DecisionLog {
        let mut log = self.log.clone();
        log.digest = Some(self.digest());
        log
    }
}

#[derive(Serialize)]
struct DigestView<'a> {
    config: &'a GameConfig,
    phase: GamePhase,
    players: &'a [Player],
    parcels: &'a [Parcel],
    deck: &'a Deck,
    price_modifier: i64,
    lease_offers: &'a [LeaseOffer],
    next_offer_id: u32,
    passed: &'a [bool],
    decided: &'a [u8],
    event_count: usize,
}

/// SHA-256 over the canonical encoding of everything in the state except the
/// log body, which is represented by its length.
pub fn state_digest(state: &GameState) -> String {
    let view = DigestView {
        config: &state.config,
        phase: state.phase,
        players: &state.players,
        parcels: &state.parcels,
        deck: &state.deck,
        price_modifier: state.price_modifier,
        lease_offers: &state.lease_offers,
        next_offer_id: state.next_offer_id,
        passed: &state.passed,
        decided: &state.decided,
        event_count: state.log.events.len(),
    };
    let bytes = crate::canonical::to_canonical_string(&view).expect("state serializes");
    crate::canonical::sha256_hex(bytes.as_bytes())
}
