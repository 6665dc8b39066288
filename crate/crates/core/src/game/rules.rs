//! Legal-move checks and state transitions.

use crate::economics::{harvest_revenue, harvest_yield, insurance_premium, CashFlow, CashFlowKind};
use crate::risk::{apply_card_mut, RiskCard};

use super::{
    Action, ActionKind, GamePhase, GameState, HarvestRecord, LeaseOffer, LogEvent, Parcel, PlayerId, RuleError, Species,
};

impl GameState {
    fn parcel_checked(&self, id: u8) -> Result<&Parcel, RuleError> {
        self.parcel(id).ok_or(RuleError::NoSuchParcel(id))
    }

    fn managed_by(&self, id: u8, actor: PlayerId) -> Result<&Parcel, RuleError> {
        let parcel = self.parcel_checked(id)?;
        if parcel.manager != Some(actor) {
            return Err(RuleError::NotManager(id));
        }
        Ok(parcel)
    }

    fn afford(&self, actor: PlayerId, amount: i64) -> Result<(), RuleError> {
        let cash = self.players[actor.index()].cash;
        if cash < amount {
            return Err(RuleError::InsufficientFunds {
                needed: amount,
                available: cash,
            });
        }
        Ok(())
    }

    fn require_phase(&self, ok: bool) -> Result<(), RuleError> {
        if ok {
            Ok(())
        } else {
            Err(RuleError::WrongPhase { phase: self.phase })
        }
    }

    /// Validate `action` against the current state without changing it.
    pub fn check(&self, action: &Action) -> Result<(), RuleError> {
        if self.phase == GamePhase::Finished {
            return Err(RuleError::GameFinished);
        }
        if !self.phase.is_decision() || action.phase != self.phase {
            return Err(RuleError::WrongPhase { phase: self.phase });
        }
        let actor = action.actor;
        if self.player(actor).is_none() {
            return Err(RuleError::UnknownPlayer(actor));
        }
        let expected = self.current_actor();
        if expected != Some(actor) {
            return Err(RuleError::NotYourTurn { actor, expected });
        }
        let planting = self.phase == GamePhase::Y0Planting;

        match action.kind {
            ActionKind::Plant { parcel, .. } => {
                self.require_phase(planting)?;
                let p = self.managed_by(parcel, actor)?;
                if p.is_planted() {
                    return Err(RuleError::AlreadyPlanted(parcel));
                }
                self.afford(actor, self.config.planting_cost)
            }
            ActionKind::BuyInsurance { parcel } => {
                if self.phase == GamePhase::Y60Felling {
                    return Err(RuleError::InsuranceUnavailable);
                }
                let premium = insurance_premium(&self.config.premiums, self.phase)
                    .ok_or(RuleError::WrongPhase { phase: self.phase })?;
                let p = self.managed_by(parcel, actor)?;
                if !p.is_planted() || p.trees == 0 {
                    return Err(RuleError::NotPlanted(parcel));
                }
                if p.insured {
                    return Err(RuleError::AlreadyInsured(parcel));
                }
                self.afford(actor, premium)
            }
            ActionKind::LeaseOffer { parcel, price } => {
                self.require_phase(planting)?;
                let p = self.parcel_checked(parcel)?;
                if p.owner != Some(actor) || p.manager != Some(actor) {
                    return Err(RuleError::NotOwner(parcel));
                }
                if p.is_planted() {
                    return Err(RuleError::AlreadyPlanted(parcel));
                }
                if price < 0 {
                    return Err(RuleError::NegativePrice(price));
                }
                if self.lease_offers.iter().any(|o| o.parcel == parcel) {
                    return Err(RuleError::OfferPending(parcel));
                }
                Ok(())
            }
            ActionKind::LeaseAccept { offer_id } => {
                self.require_phase(planting)?;
                let offer = self
                    .lease_offers
                    .iter()
                    .find(|o| o.id == offer_id)
                    .ok_or(RuleError::NoSuchOffer(offer_id))?;
                if offer.lessor == actor {
                    return Err(RuleError::OwnOffer(offer_id));
                }
                self.afford(actor, offer.price)
            }
            ActionKind::BuyParcel { parcel } => {
                self.require_phase(planting)?;
                if self.parcel_checked(parcel)?.owner.is_some() {
                    return Err(RuleError::NotForSale(parcel));
                }
                self.afford(actor, self.config.unowned_parcel_price)
            }
            ActionKind::Harvest { parcel } | ActionKind::Skip { parcel } => {
                self.require_phase(self.phase.is_yield())?;
                let p = self.managed_by(parcel, actor)?;
                if !p.is_planted() || p.trees == 0 {
                    return Err(RuleError::NotPlanted(parcel));
                }
                if self.decided.contains(&parcel) {
                    return Err(RuleError::DoubleDecision(parcel));
                }
                Ok(())
            }
            ActionKind::Pass => {
                let undecided = self.undecided_parcels(actor);
                if !undecided.is_empty() {
                    return Err(RuleError::UndecidedParcels(undecided));
                }
                Ok(())
            }
        }
    }

    fn pay(&mut self, player: PlayerId, amount: i64, kind: CashFlowKind) {
        let year = self.phase.year();
        let p = &mut self.players[player.index()];
        p.cash += amount;
        p.ledger.push(CashFlow { year, amount, kind });
    }

    /// Apply a legal action in place. On error the state is untouched.
    pub fn apply(&mut self, action: Action) -> Result<(), RuleError> {
        self.check(&action)?;
        let actor = action.actor;
        match action.kind {
            ActionKind::Plant { parcel, species } => self.plant(actor, parcel, species),
            ActionKind::BuyInsurance { parcel } => {
                let premium = insurance_premium(&self.config.premiums, self.phase).expect("checked");
                self.parcels[usize::from(parcel)].insured = true;
                self.pay(actor, -premium, CashFlowKind::Insurance);
            }
            ActionKind::LeaseOffer { parcel, price } => {
                let id = self.next_offer_id;
                self.next_offer_id += 1;
                self.lease_offers.push(LeaseOffer {
                    id,
                    parcel,
                    lessor: actor,
                    price,
                });
            }
            ActionKind::LeaseAccept { offer_id } => {
                let idx = self
                    .lease_offers
                    .iter()
                    .position(|o| o.id == offer_id)
                    .expect("checked");
                let offer = self.lease_offers.remove(idx);
                self.parcels[usize::from(offer.parcel)].manager = Some(actor);
                self.pay(actor, -offer.price, CashFlowKind::Lease);
                self.pay(offer.lessor, offer.price, CashFlowKind::Lease);
            }
            ActionKind::BuyParcel { parcel } => {
                let p = &mut self.parcels[usize::from(parcel)];
                p.owner = Some(actor);
                p.manager = Some(actor);
                self.pay(actor, -self.config.unowned_parcel_price, CashFlowKind::ParcelPurchase);
            }
            ActionKind::Harvest { parcel } => {
                self.harvest(actor, parcel);
                self.decided.push(parcel);
            }
            ActionKind::Skip { parcel } => self.decided.push(parcel),
            ActionKind::Pass => self.passed[actor.index()] = true,
        }
        self.log.events.push(LogEvent::Action(action));
        Ok(())
    }

    /// Pure form of [`GameState::apply`].
    pub fn apply_action(&self, action: Action) -> Result<GameState, RuleError> {
        let mut next = self.clone();
        next.apply(action)?;
        Ok(next)
    }

    fn plant(&mut self, actor: PlayerId, parcel: u8, species: Species) {
        let density = self.config.planting_density;
        let p = &mut self.parcels[usize::from(parcel)];
        p.species = Some(species);
        p.trees = density;
        p.planted_trees = density;
        self.pay(actor, -self.config.planting_cost, CashFlowKind::Planting);
    }

    fn harvest(&mut self, actor: PlayerId, parcel: u8) {
        let phase = self.phase;
        let bears_saw = self.config.yields.bears_sawwood(phase);
        let p = &self.parcels[usize::from(parcel)];
        let downgraded = bears_saw && (p.pending_downgrade || (phase == GamePhase::Y60Felling && p.rot_downgrade));
        let mut result = harvest_yield(&self.config.yields, p.trees, p.is_planted(), phase);
        result.revenue = harvest_revenue(&result, phase, &self.config.prices, self.price_modifier, downgraded);

        let p = &mut self.parcels[usize::from(parcel)];
        p.trees -= result.trees_removed;
        p.harvested_trees += result.trees_removed;
        if bears_saw {
            p.pending_downgrade = false;
        }
        if phase == GamePhase::Y60Felling {
            p.rot_downgrade = false;
        }
        p.harvests.push(HarvestRecord {
            phase,
            harvester: actor,
            trees_removed: result.trees_removed,
            pulp: result.pulp,
            saw: result.saw,
            revenue: result.revenue,
            downgraded,
        });
        self.pay(actor, result.revenue, CashFlowKind::HarvestRevenue);
    }

    /// Every action `player` may take now. Lease offers are listed once per
    /// eligible parcel with price 0; any non-negative price is equally legal.
    pub fn legal_actions(&self, player: PlayerId) -> Vec<Action> {
        if self.current_actor() != Some(player) {
            return Vec::new();
        }
        let phase = self.phase;
        let mut candidates = Vec::new();
        let managed: Vec<u8> = self.managed_parcels(player).map(|p| p.id).collect();
        if phase == GamePhase::Y0Planting {
            for &id in &managed {
                for species in Species::ALL {
                    candidates.push(ActionKind::Plant { parcel: id, species });
                }
                candidates.push(ActionKind::LeaseOffer { parcel: id, price: 0 });
            }
            for offer in &self.lease_offers {
                candidates.push(ActionKind::LeaseAccept { offer_id: offer.id });
            }
            for p in self.parcels.iter().filter(|p| p.owner.is_none()) {
                candidates.push(ActionKind::BuyParcel { parcel: p.id });
            }
        }
        if phase.is_yield() {
            for &id in &managed {
                candidates.push(ActionKind::Harvest { parcel: id });
                candidates.push(ActionKind::Skip { parcel: id });
            }
        }
        for &id in &managed {
            candidates.push(ActionKind::BuyInsurance { parcel: id });
        }
        candidates.push(ActionKind::Pass);

        candidates
            .into_iter()
            .map(|kind| Action::new(player, phase, kind))
            .filter(|a| self.check(a).is_ok())
            .collect()
    }

    /// Seats that still have to pass before the phase can advance.
    pub fn players_to_act(&self) -> Vec<PlayerId> {
        if !self.phase.is_decision() {
            return Vec::new();
        }
        self.passed
            .iter()
            .enumerate()
            .filter(|(_, p)| !**p)
            .map(|(i, _)| PlayerId(i as u8))
            .collect()
    }

    pub fn can_advance(&self) -> Result<(), RuleError> {
        if self.phase == GamePhase::Finished {
            return Err(RuleError::GameFinished);
        }
        let waiting = self.players_to_act();
        if !waiting.is_empty() {
            return Err(RuleError::PlayersUndecided(waiting));
        }
        Ok(())
    }

    /// Move to the next phase. Entering a risk phase draws and applies one card
    /// per player in seat order.
    pub fn advance_phase(&mut self) -> Result<Vec<(PlayerId, RiskCard)>, RuleError> {
        self.can_advance()?;
        let to = self.phase.next().ok_or(RuleError::GameFinished)?;
        if self.phase == GamePhase::Y0Planting {
            self.lease_offers.clear();
        }
        self.phase = to;
        self.passed.iter_mut().for_each(|p| *p = false);
        self.decided.clear();
        self.log.events.push(LogEvent::PhaseAdvanced { to });

        let mut draws = Vec::new();
        if to.is_risk() {
            for seat in 0..self.players.len() {
                let player = PlayerId(seat as u8);
                let card = self.deck.draw_mut();
                self.log.events.push(LogEvent::CardDrawn { player, card });
                apply_card_mut(self, player, card).expect("risk phase");
                draws.push((player, card));
            }
        }
        Ok(draws)
    }

    /// Pure form of [`GameState::advance_phase`].
    pub fn advanced(&self) -> Result<GameState, RuleError> {
        let mut next = self.clone();
        next.advance_phase()?;
        Ok(next)
    }

    /// Advance through phases that need no player input (risk draws, scoring)
    /// until someone has to act or the game is finished.
    pub fn advance_while_idle(&mut self) -> Result<(), RuleError> {
        while !self.is_finished() && self.can_advance().is_ok() {
            self.advance_phase()?;
        }
        Ok(())
    }
}
