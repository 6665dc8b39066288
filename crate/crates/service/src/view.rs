use forestplay_core::game::{Action, GameConfig, GamePhase, LeaseOffer, Parcel, Player, PlayerId};
use forestplay_core::risk::RiskCard;
use serde::Serialize;
use serde_json::Value;

use crate::session::{Snapshot, Status};

/// The config without its seed: the seed and the deck composition together
/// would reveal the draw order.
pub fn public_config(config: &GameConfig) -> Value {
    let mut v = serde_json::to_value(config).expect("config serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("seed");
    }
    v
}

#[derive(Debug, Serialize)]
pub struct SeatView {
    pub seat: PlayerId,
    pub name: Option<String>,
}

/// Public deck information: the cards already dealt and how many remain.
#[derive(Debug, Serialize)]
pub struct DeckView {
    pub remaining: usize,
    pub drawn: Vec<RiskCard>,
    pub reshuffles: u32,
}

#[derive(Debug, Serialize)]
pub struct GameView<'a> {
    pub phase: GamePhase,
    pub players: &'a [Player],
    pub parcels: &'a [Parcel],
    pub price_modifier: i64,
    pub lease_offers: &'a [LeaseOffer],
    pub deck: DeckView,
    pub current_actor: Option<PlayerId>,
    pub players_to_act: Vec<PlayerId>,
    pub event_count: usize,
    pub digest: String,
}

/// Full public state of a session. Legal actions are listed for the
/// requesting seat, or for the seat to move when no seat is given.
#[derive(Debug, Serialize)]
pub struct StateView<'a> {
    pub id: &'a str,
    pub status: Status,
    pub config: Value,
    pub seats: Vec<SeatView>,
    pub your_seat: Option<PlayerId>,
    pub game: Option<GameView<'a>>,
    pub legal_actions: Vec<Action>,
}

impl<'a> StateView<'a> {
    pub fn new(snap: &'a Snapshot, seat: Option<PlayerId>) -> Self {
        let seats = (0..snap.config.player_count)
            .map(|i| SeatView {
                seat: PlayerId(i),
                name: snap.names.get(usize::from(i)).cloned(),
            })
            .collect();
        let game = snap.state.as_ref().map(|s| GameView {
            phase: s.phase,
            players: &s.players,
            parcels: &s.parcels,
            price_modifier: s.price_modifier,
            lease_offers: &s.lease_offers,
            deck: DeckView {
                remaining: s.deck.remaining(),
                drawn: s.deck.discard().to_vec(),
                reshuffles: s.deck.reshuffles(),
            },
            current_actor: s.current_actor(),
            players_to_act: s.players_to_act(),
            event_count: s.log.events.len(),
            digest: s.digest(),
        });
        let legal_actions = match (&snap.state, seat) {
            (Some(s), Some(seat)) => s.legal_actions(seat),
            (Some(s), None) => s.current_actor().map(|a| s.legal_actions(a)).unwrap_or_default(),
            _ => Vec::new(),
        };
        StateView {
            id: &snap.id,
            status: snap.status,
            config: public_config(&snap.config),
            seats,
            your_seat: seat,
            game,
            legal_actions,
        }
    }
}
