//! Multi-risk card deck: construction, seeded shuffling, drawing and card effects.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::game::{ConfigError, GamePhase, GameState, LossCause, LossRecord, PlayerId, RuleError, Species};
use crate::seed::mix_seed;

/// Price change per market card, in euros per cubic metre.
pub const MARKET_STEP: i64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskCard {
    MammalDamage,
    BarkBeetle,
    StormDamage,
    RootRot,
    PriceUp,
    PriceDown,
}

impl RiskCard {
    pub const ALL: [RiskCard; 6] = [
        RiskCard::MammalDamage,
        RiskCard::BarkBeetle,
        RiskCard::StormDamage,
        RiskCard::RootRot,
        RiskCard::PriceUp,
        RiskCard::PriceDown,
    ];

    pub fn is_market(self) -> bool {
        matches!(self, RiskCard::PriceUp | RiskCard::PriceDown)
    }

    pub fn key(self) -> &'static str {
        match self {
            RiskCard::MammalDamage => "mammal_damage",
            RiskCard::BarkBeetle => "bark_beetle",
            RiskCard::StormDamage => "storm_damage",
            RiskCard::RootRot => "root_rot",
            RiskCard::PriceUp => "price_up",
            RiskCard::PriceDown => "price_down",
        }
    }
}

const CARD_TEXT_EN: &str = include_str!("../locales/cards.en.json");

/// Player-facing title and description for a card, from the bundled English locale.
pub fn card_text(card: RiskCard) -> (String, String) {
    let doc: serde_json::Value = serde_json::from_str(CARD_TEXT_EN).expect("bundled locale is valid JSON");
    let entry = &doc["cards"][card.key()];
    (
        entry["title"].as_str().unwrap_or(card.key()).to_owned(),
        entry["text"].as_str().unwrap_or_default().to_owned(),
    )
}

/// Card kind to number of copies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeckSpec(pub BTreeMap<RiskCard, u32>);

impl Default for DeckSpec {
    fn default() -> Self {
        Self(BTreeMap::from([
            (RiskCard::MammalDamage, 4),
            (RiskCard::BarkBeetle, 4),
            (RiskCard::StormDamage, 3),
            (RiskCard::RootRot, 3),
            (RiskCard::PriceUp, 3),
            (RiskCard::PriceDown, 3),
        ]))
    }
}

impl DeckSpec {
    pub fn only(card: RiskCard, count: u32) -> Self {
        Self(BTreeMap::from([(card, count)]))
    }

    pub fn total(&self) -> u32 {
        self.0.values().sum()
    }

    /// Cards in canonical (kind-ordered) sequence, before shuffling.
    pub fn cards(&self) -> Vec<RiskCard> {
        self.0
            .iter()
            .flat_map(|(&card, &n)| std::iter::repeat_n(card, n as usize))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deck {
    cards: Vec<RiskCard>,
    cursor: usize,
    discard: Vec<RiskCard>,
    seed: u64,
    reshuffles: u32,
}

fn shuffle(cards: &mut [RiskCard], seed: u64, stream: u32) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, u64::from(stream)));
    for i in (1..cards.len()).rev() {
        let j = rng.random_range(0..=i);
        cards.swap(i, j);
    }
}

/// Build the multiset described by `composition` and shuffle it with `seed`.
pub fn build_deck(composition: &DeckSpec, seed: u64) -> Result<Deck, ConfigError> {
    let mut cards = composition.cards();
    if cards.is_empty() {
        return Err(ConfigError::EmptyDeck);
    }
    shuffle(&mut cards, seed, 0);
    Ok(Deck {
        cards,
        cursor: 0,
        discard: Vec::new(),
        seed,
        reshuffles: 0,
    })
}

impl Deck {
    /// A deck that deals `cards` in exactly the given order. Used by exhaustive
    /// enumeration; reshuffles still follow `seed`.
    pub fn stacked(cards: Vec<RiskCard>, seed: u64) -> Result<Deck, ConfigError> {
        if cards.is_empty() {
            return Err(ConfigError::EmptyDeck);
        }
        Ok(Deck {
            cards,
            cursor: 0,
            discard: Vec::new(),
            seed,
            reshuffles: 0,
        })
    }

    pub fn remaining(&self) -> usize {
        self.cards.len() - self.cursor
    }

    pub fn discard(&self) -> &[RiskCard] {
        &self.discard
    }

    pub fn reshuffles(&self) -> u32 {
        self.reshuffles
    }

    #[cfg(test)]
    fn peek(&self) -> RiskCard {
        if self.cursor < self.cards.len() {
            self.cards[self.cursor]
        } else {
            let mut next = self.discard.clone();
            shuffle(&mut next, self.seed, self.reshuffles + 1);
            next[0]
        }
    }

    pub fn draw(mut self) -> (RiskCard, Deck) {
        let card = self.draw_mut();
        (card, self)
    }

    pub(crate) fn draw_mut(&mut self) -> RiskCard {
        if self.cursor >= self.cards.len() {
            self.reshuffles += 1;
            let mut next = std::mem::take(&mut self.discard);
            shuffle(&mut next, self.seed, self.reshuffles);
            self.cards = next;
            self.cursor = 0;
        }
        let card = self.cards[self.cursor];
        self.cursor += 1;
        self.discard.push(card);
        card
    }
}

/// Parcels changed by one card.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CardEffect {
    pub damaged: Vec<u8>,
    pub flagged: Vec<u8>,
    pub protected: Vec<u8>,
    pub price_modifier: i64,
}

fn loss(trees: u32, percent: u32) -> u32 {
    (u64::from(trees) * u64::from(percent) / 100) as u32
}

/// Apply `card` drawn by `drawer` to `state` in place.
pub(crate) fn apply_card_mut(state: &mut GameState, drawer: PlayerId, card: RiskCard) -> Result<CardEffect, RuleError> {
    let phase = state.phase;
    if !phase.is_risk() {
        return Err(RuleError::WrongPhase { phase });
    }
    let mammal_percent = state.config.mammal_loss_percent;
    let storm_percent = state.config.storm_severity_percent;
    let mut effect = CardEffect::default();

    if card.is_market() {
        state.price_modifier += if card == RiskCard::PriceUp {
            MARKET_STEP
        } else {
            -MARKET_STEP
        };
        effect.price_modifier = state.price_modifier;
        return Ok(effect);
    }

    for parcel in state.parcels.iter_mut().filter(|p| p.manager == Some(drawer)) {
        let Some(species) = parcel.species else { continue };
        if parcel.trees == 0 {
            continue;
        }
        match card {
            RiskCard::MammalDamage => {
                if phase != GamePhase::Risk0 || species == Species::NorwaySpruce {
                    continue;
                }
                let lost = loss(parcel.trees, mammal_percent);
                parcel.record_loss(LossRecord {
                    band: phase,
                    trees: lost,
                    cause: LossCause::Mammal,
                });
                effect.damaged.push(parcel.id);
            }
            RiskCard::StormDamage => {
                if parcel.insured {
                    effect.protected.push(parcel.id);
                    continue;
                }
                let lost = loss(parcel.trees, storm_percent);
                parcel.record_loss(LossRecord {
                    band: phase,
                    trees: lost,
                    cause: LossCause::Storm,
                });
                effect.damaged.push(parcel.id);
            }
            RiskCard::BarkBeetle | RiskCard::RootRot => {
                if species != Species::NorwaySpruce {
                    continue;
                }
                if parcel.insured {
                    effect.protected.push(parcel.id);
                    continue;
                }
                if card == RiskCard::BarkBeetle {
                    parcel.pending_downgrade = true;
                } else {
                    parcel.rot_downgrade = true;
                }
                effect.flagged.push(parcel.id);
            }
            RiskCard::PriceUp | RiskCard::PriceDown => unreachable!(),
        }
    }
    effect.price_modifier = state.price_modifier;
    Ok(effect)
}

/// Pure form of card application: returns the successor state.
pub fn apply_card(state: &GameState, drawer: PlayerId, card: RiskCard) -> Result<GameState, RuleError> {
    let mut next = state.clone();
    apply_card_mut(&mut next, drawer, card)?;
    Ok(next)
}
