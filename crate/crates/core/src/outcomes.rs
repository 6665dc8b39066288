//! Post-game outcome indicators, external indicator import, and 1–100 scaling.
//!
//! The carbon, deadwood and soil-water figures come from a coefficient
//! surrogate (see [`CoefficientTable`]), not from a process-based ecosystem
//! model. Reports always carry the coefficients used and whether the values
//! were computed here or imported from an external simulator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::economics::{npv, CashFlow, Volume};
use crate::game::{replay, DecisionLog, GamePhase, GameState, PlayerId, ReplayError};

pub const REPORT_FORMAT: &str = "forestplay-score-report";
pub const IMPORT_FORMAT: &str = "forestplay-indicator-import";
pub const SCHEMA_VERSION: u32 = 1;

/// Surrogate coefficients standing in for an external ecosystem simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoefficientTable {
    /// Tonnes of carbon per cubic metre of wood.
    pub carbon_per_m3: f64,
    /// Stem volume per tree at rotation age, m³.
    pub tree_volume_at_60: f64,
    /// Stem volume per sapling lost before the first thinning, m³.
    pub tree_volume_young: f64,
    /// Soil carbon per hectare before management effects, tC.
    pub soil_carbon_base: f64,
    pub soil_carbon_deadwood_gain: f64,
    pub soil_carbon_removal_loss: f64,
    pub soil_water_base: f64,
    pub soil_water_felling_penalty: f64,
}

impl Default for CoefficientTable {
    fn default() -> Self {
        Self {
            carbon_per_m3: 0.2,
            tree_volume_at_60: 0.5,
            tree_volume_young: 0.05,
            soil_carbon_base: 70.0,
            soil_carbon_deadwood_gain: 0.05,
            soil_carbon_removal_loss: 0.02,
            soil_water_base: 100.0,
            soil_water_felling_penalty: 5.0,
        }
    }
}

impl CoefficientTable {
    pub fn is_valid(&self) -> bool {
        [
            self.carbon_per_m3,
            self.tree_volume_at_60,
            self.tree_volume_young,
            self.soil_carbon_base,
            self.soil_carbon_deadwood_gain,
            self.soil_carbon_removal_loss,
            self.soil_water_base,
            self.soil_water_felling_penalty,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    TreeBiomassCarbon,
    TotalSoilCarbon,
    EcosystemCarbon,
    WoodProductsCarbon,
    Timber,
    Deadwood,
    SoilWater,
    NetPresentValue,
}

impl Indicator {
    pub const ALL: [Indicator; 8] = [
        Indicator::TreeBiomassCarbon,
        Indicator::TotalSoilCarbon,
        Indicator::EcosystemCarbon,
        Indicator::WoodProductsCarbon,
        Indicator::Timber,
        Indicator::Deadwood,
        Indicator::SoilWater,
        Indicator::NetPresentValue,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Indicator::TreeBiomassCarbon => "tree_biomass_carbon",
            Indicator::TotalSoilCarbon => "total_soil_carbon",
            Indicator::EcosystemCarbon => "ecosystem_carbon",
            Indicator::WoodProductsCarbon => "wood_products_carbon",
            Indicator::Timber => "timber",
            Indicator::Deadwood => "deadwood",
            Indicator::SoilWater => "soil_water",
            Indicator::NetPresentValue => "net_present_value",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Indicator::TreeBiomassCarbon
            | Indicator::TotalSoilCarbon
            | Indicator::EcosystemCarbon
            | Indicator::WoodProductsCarbon => "tC",
            Indicator::Timber | Indicator::Deadwood => "m3",
            Indicator::SoilWater => "index",
            Indicator::NetPresentValue => "EUR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IndicatorVector {
    pub tree_biomass_carbon: f64,
    pub total_soil_carbon: f64,
    pub ecosystem_carbon: f64,
    pub wood_products_carbon: f64,
    pub timber: f64,
    pub deadwood: f64,
    pub soil_water: f64,
    pub net_present_value: f64,
}

impl IndicatorVector {
    pub fn get(&self, i: Indicator) -> f64 {
        match i {
            Indicator::TreeBiomassCarbon => self.tree_biomass_carbon,
            Indicator::TotalSoilCarbon => self.total_soil_carbon,
            Indicator::EcosystemCarbon => self.ecosystem_carbon,
            Indicator::WoodProductsCarbon => self.wood_products_carbon,
            Indicator::Timber => self.timber,
            Indicator::Deadwood => self.deadwood,
            Indicator::SoilWater => self.soil_water,
            Indicator::NetPresentValue => self.net_present_value,
        }
    }

    pub fn set(&mut self, i: Indicator, v: f64) {
        match i {
            Indicator::TreeBiomassCarbon => self.tree_biomass_carbon = v,
            Indicator::TotalSoilCarbon => self.total_soil_carbon = v,
            Indicator::EcosystemCarbon => self.ecosystem_carbon = v,
            Indicator::WoodProductsCarbon => self.wood_products_carbon = v,
            Indicator::Timber => self.timber = v,
            Indicator::Deadwood => self.deadwood = v,
            Indicator::SoilWater => self.soil_water = v,
            Indicator::NetPresentValue => self.net_present_value = v,
        }
    }

    pub fn is_finite(&self) -> bool {
        Indicator::ALL.iter().all(|&i| self.get(i).is_finite())
    }
}

fn to_f64(v: Volume) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}

/// Surrogate indicators for every player, computed over the parcels each one
/// manages in `state`.
pub fn indicators_from_state(state: &GameState, coeffs: &CoefficientTable) -> Vec<IndicatorVector> {
    state
        .players
        .iter()
        .map(|player| {
            let mut timber = Volume::from_integer(0);
            let mut saw = Volume::from_integer(0);
            let mut standing: u64 = 0;
            let mut deadwood = 0.0;
            let mut soil_carbon = 0.0;
            let mut soil_water = 0.0;
            for parcel in state.managed_parcels(player.id) {
                let removed: Volume = parcel.harvests.iter().map(|h| h.volume()).sum();
                timber += removed;
                saw += parcel.harvests.iter().map(|h| h.saw).sum::<Volume>();
                standing += u64::from(parcel.trees);
                let parcel_deadwood: f64 = parcel
                    .loss_history
                    .iter()
                    .map(|l| {
                        let per_tree = if l.band < GamePhase::Y30Thinning {
                            coeffs.tree_volume_young
                        } else {
                            coeffs.tree_volume_at_60
                        };
                        f64::from(l.trees) * per_tree
                    })
                    .sum();
                deadwood += parcel_deadwood;
                soil_carbon += coeffs.soil_carbon_base + coeffs.soil_carbon_deadwood_gain * parcel_deadwood
                    - coeffs.soil_carbon_removal_loss * to_f64(removed);
                let felled_out = parcel.trees == 0 && parcel.harvested_trees > 0;
                soil_water += coeffs.soil_water_base
                    - if felled_out {
                        coeffs.soil_water_felling_penalty
                    } else {
                        0.0
                    };
            }
            let tree_biomass_carbon = coeffs.carbon_per_m3 * standing as f64 * coeffs.tree_volume_at_60;
            IndicatorVector {
                tree_biomass_carbon,
                total_soil_carbon: soil_carbon,
                ecosystem_carbon: tree_biomass_carbon + soil_carbon + coeffs.carbon_per_m3 * deadwood,
                wood_products_carbon: coeffs.carbon_per_m3 * to_f64(saw),
                timber: to_f64(timber),
                deadwood,
                soil_water,
                net_present_value: npv(&player.ledger, state.config.discount_rate),
            }
        })
        .collect()
}

/// Replay `log` and compute surrogate indicators for every player.
pub fn compute_indicators(log: &DecisionLog, coeffs: &CoefficientTable) -> Result<Vec<IndicatorVector>, ReplayError> {
    let state = replay(log)?;
    Ok(indicators_from_state(&state, coeffs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    HigherIsBetter,
    LowerIsBetter,
}

/// Per-indicator orientation used by [`scale_1_100`]. Missing entries are higher-is-better.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Directions(pub BTreeMap<Indicator, Direction>);

impl Directions {
    pub fn of(&self, i: Indicator) -> Direction {
        self.0.get(&i).copied().unwrap_or_default()
    }
}

/// Min–max scale `values` to [1, 100]. A degenerate range maps everything to 100.
pub fn scale_values(values: &[f64], direction: Direction) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Also catches NaN and empty input.
    if max.partial_cmp(&min) != Some(std::cmp::Ordering::Greater) {
        return vec![100.0; values.len()];
    }
    let range = max - min;
    values
        .iter()
        .map(|&v| {
            let r = match direction {
                Direction::HigherIsBetter => (v - min) / range,
                Direction::LowerIsBetter => (max - v) / range,
            };
            1.0 + 99.0 * r
        })
        .collect()
}

/// Scale each indicator independently across players.
pub fn scale_1_100(vectors: &[IndicatorVector], directions: &Directions) -> Vec<IndicatorVector> {
    let mut out = vec![IndicatorVector::default(); vectors.len()];
    for i in Indicator::ALL {
        let column: Vec<f64> = vectors.iter().map(|v| v.get(i)).collect();
        for (slot, s) in out.iter_mut().zip(scale_values(&column, directions.of(i))) {
            slot.set(i, s);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorSource {
    Surrogate,
    Imported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerScore {
    pub player: PlayerId,
    pub name: String,
    pub final_cash: i64,
    /// 1 = highest net present value; ties share a rank.
    pub economic_rank: u32,
    pub raw: IndicatorVector,
    pub scaled: IndicatorVector,
    pub ledger: Vec<CashFlow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub format: String,
    pub version: u32,
    pub source: IndicatorSource,
    pub log_digest: String,
    pub coefficients: CoefficientTable,
    pub discount_rate: f64,
    pub directions: Directions,
    pub players: Vec<PlayerScore>,
}

impl ScoreReport {
    pub fn to_document(&self) -> String {
        crate::canonical::to_canonical_pretty(self).expect("report serializes")
    }

    /// One row per player: raw then scaled values for every indicator.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("player,name,final_cash,economic_rank");
        for i in Indicator::ALL {
            out.push_str(&format!(",{}", i.key()));
        }
        for i in Indicator::ALL {
            out.push_str(&format!(",{}_scaled", i.key()));
        }
        out.push('\n');
        for p in &self.players {
            out.push_str(&format!(
                "{},{},{},{}",
                p.player.0,
                csv_field(&p.name),
                p.final_cash,
                p.economic_rank
            ));
            for i in Indicator::ALL {
                out.push_str(&format!(",{}", p.raw.get(i)));
            }
            for i in Indicator::ALL {
                out.push_str(&format!(",{}", p.scaled.get(i)));
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn economic_ranks(raw: &[IndicatorVector]) -> Vec<u32> {
    raw.iter()
        .map(|v| 1 + raw.iter().filter(|o| o.net_present_value > v.net_present_value).count() as u32)
        .collect()
}

fn build_report(
    state: &GameState,
    raw: Vec<IndicatorVector>,
    source: IndicatorSource,
    coeffs: &CoefficientTable,
    directions: &Directions,
) -> ScoreReport {
    let scaled = scale_1_100(&raw, directions);
    let ranks = economic_ranks(&raw);
    let players = state
        .players
        .iter()
        .zip(raw.into_iter().zip(scaled))
        .zip(ranks)
        .map(|((p, (raw, scaled)), economic_rank)| PlayerScore {
            player: p.id,
            name: p.name.clone(),
            final_cash: p.cash,
            economic_rank,
            raw,
            scaled,
            ledger: p.ledger.clone(),
        })
        .collect();
    ScoreReport {
        format: REPORT_FORMAT.to_owned(),
        version: SCHEMA_VERSION,
        source,
        log_digest: state.digest(),
        coefficients: *coeffs,
        discount_rate: state.config.discount_rate,
        directions: directions.clone(),
        players,
    }
}

/// Score a state with the surrogate coefficients.
pub fn score_state(state: &GameState, coeffs: &CoefficientTable, directions: &Directions) -> ScoreReport {
    build_report(
        state,
        indicators_from_state(state, coeffs),
        IndicatorSource::Surrogate,
        coeffs,
        directions,
    )
}

/// Replay `log` and score it with the surrogate coefficients.
pub fn score_log(
    log: &DecisionLog,
    coeffs: &CoefficientTable,
    directions: &Directions,
) -> Result<ScoreReport, ReplayError> {
    Ok(score_state(&replay(log)?, coeffs, directions))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImportError {
    #[error("malformed import document: {0}")]
    Malformed(String),
    #[error("unsupported import format {format:?} version {version}")]
    Version { format: String, version: u64 },
    #[error("player {player}: missing indicator `{field}`")]
    MissingIndicator { player: u64, field: &'static str },
    #[error("player {player}: indicator `{field}` has unit {found:?}, expected {expected:?}")]
    Unit {
        player: u64,
        field: &'static str,
        expected: &'static str,
        found: String,
    },
    #[error("player {player}: indicator `{field}` is not a finite number")]
    NotFinite { player: u64, field: &'static str },
    #[error("player {0} is not in the game")]
    UnknownPlayer(u64),
    #[error("player {0} appears more than once")]
    DuplicatePlayer(u64),
    #[error("no values for player {0}")]
    MissingPlayer(u8),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

/// Parse an indicator-import document into one vector per player in seat order.
pub fn import_external_indicators(document: &str, player_count: usize) -> Result<Vec<IndicatorVector>, ImportError> {
    let doc: Value = serde_json::from_str(document).map_err(|e| ImportError::Malformed(e.to_string()))?;
    let format = doc.get("format").and_then(Value::as_str).unwrap_or_default();
    let version = doc.get("version").and_then(Value::as_u64).unwrap_or(0);
    if format != IMPORT_FORMAT || version != u64::from(SCHEMA_VERSION) {
        return Err(ImportError::Version {
            format: format.to_owned(),
            version,
        });
    }
    let entries = doc
        .get("players")
        .and_then(Value::as_array)
        .ok_or_else(|| ImportError::Malformed("`players` must be an array".into()))?;

    let mut vectors: Vec<Option<IndicatorVector>> = vec![None; player_count];
    for entry in entries {
        let player = entry
            .get("player")
            .and_then(Value::as_u64)
            .ok_or_else(|| ImportError::Malformed("each entry needs an integer `player`".into()))?;
        let slot = usize::try_from(player)
            .ok()
            .filter(|&p| p < player_count)
            .ok_or(ImportError::UnknownPlayer(player))?;
        if vectors[slot].is_some() {
            return Err(ImportError::DuplicatePlayer(player));
        }
        let indicators = entry.get("indicators").and_then(Value::as_object);
        let mut v = IndicatorVector::default();
        for i in Indicator::ALL {
            let field = i.key();
            let item = indicators
                .and_then(|m| m.get(field))
                .ok_or(ImportError::MissingIndicator { player, field })?;
            let unit = item.get("unit").and_then(Value::as_str).unwrap_or_default();
            if unit != i.unit() {
                return Err(ImportError::Unit {
                    player,
                    field,
                    expected: i.unit(),
                    found: unit.to_owned(),
                });
            }
            let value = item
                .get("value")
                .and_then(Value::as_f64)
                .filter(|v| v.is_finite())
                .ok_or(ImportError::NotFinite { player, field })?;
            v.set(i, value);
        }
        vectors[slot] = Some(v);
    }
    vectors
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or(ImportError::MissingPlayer(i as u8)))
        .collect()
}

/// Replay `log` and build a report from externally simulated indicators.
pub fn score_imported(
    log: &DecisionLog,
    document: &str,
    coeffs: &CoefficientTable,
    directions: &Directions,
) -> Result<ScoreReport, ImportError> {
    let state = replay(log)?;
    let raw = import_external_indicators(document, state.players.len())?;
    Ok(build_report(&state, raw, IndicatorSource::Imported, coeffs, directions))
}

/// Import document for the given vectors, in the published schema.
pub fn import_document(vectors: &[IndicatorVector]) -> String {
    let players: Vec<Value> = vectors
        .iter()
        .enumerate()
        .map(|(p, v)| {
            let indicators: serde_json::Map<String, Value> = Indicator::ALL
                .iter()
                .map(|&i| {
                    (
                        i.key().to_owned(),
                        serde_json::json!({"value": v.get(i), "unit": i.unit()}),
                    )
                })
                .collect();
            serde_json::json!({"player": p, "indicators": indicators})
        })
        .collect();
    let doc = serde_json::json!({"format": IMPORT_FORMAT, "version": SCHEMA_VERSION, "players": players});
    crate::canonical::to_canonical_pretty(&doc).expect("import document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Action, ActionKind, GameConfig, Species};
    use crate::risk::{DeckSpec, RiskCard};

    fn play_single_hectare(deck: DeckSpec, species: Species) -> GameState {
        let mut s = GameState::new(GameConfig {
            player_count: 2,
            deck,
            ..GameConfig::default()
        })
        .unwrap();
        s.apply(Action::new(
            PlayerId(0),
            GamePhase::Y0Planting,
            ActionKind::Plant { parcel: 0, species },
        ))
        .unwrap();
        while !s.is_finished() {
            let phase = s.phase;
            if phase.is_yield() && s.parcels[0].trees > 0 {
                s.apply(Action::new(PlayerId(0), phase, ActionKind::Harvest { parcel: 0 }))
                    .unwrap();
            }
            if phase.is_decision() {
                for seat in 0..2 {
                    s.apply(Action::new(PlayerId(seat), phase, ActionKind::Pass)).unwrap();
                }
            }
            s.advance_phase().unwrap();
        }
        s
    }

    #[test]
    fn idle_player_has_base_soil_only() {
        let s = play_single_hectare(DeckSpec::only(RiskCard::BarkBeetle, 3), Species::ScotsPine);
        let v = indicators_from_state(&s, &CoefficientTable::default());
        let idle = v[1];
        assert_eq!(idle.timber, 0.0);
        assert_eq!(idle.deadwood, 0.0);
        assert_eq!(idle.net_present_value, 0.0);
        assert_eq!(idle.total_soil_carbon, 700.0);
        assert_eq!(idle.soil_water, 1000.0);
    }

    #[test]
    fn full_cycle_hectare_indicators() {
        let s = play_single_hectare(DeckSpec::only(RiskCard::BarkBeetle, 3), Species::ScotsPine);
        let v = indicators_from_state(&s, &CoefficientTable::default())[0];
        assert_eq!(v.timber, 350.0);
        assert!((v.wood_products_carbon - 40.0).abs() < 1e-9);
        assert_eq!(v.tree_biomass_carbon, 0.0);
        // One hectare lost 0.02 tC per harvested m³; nine idle hectares keep the base.
        assert!((v.total_soil_carbon - (700.0 - 0.02 * 350.0)).abs() < 1e-9);
        assert_eq!(v.soil_water, 1000.0 - 5.0);
        let ledger_npv = npv(&s.players[0].ledger, 0.03);
        assert_eq!(v.net_present_value, ledger_npv);
    }

    #[test]
    fn mammal_losses_become_young_deadwood() {
        let s = play_single_hectare(DeckSpec::only(RiskCard::MammalDamage, 6), Species::ScotsPine);
        assert_eq!(s.parcels[0].lost_trees(), 800);
        let v = indicators_from_state(&s, &CoefficientTable::default())[0];
        assert!((v.deadwood - 40.0).abs() < 1e-9);
        assert!(v.ecosystem_carbon >= v.tree_biomass_carbon);
        assert!(v.ecosystem_carbon >= v.total_soil_carbon);
    }

    #[test]
    fn scaling_examples() {
        assert_eq!(
            scale_values(&[10.0, 20.0, 30.0], Direction::HigherIsBetter),
            vec![1.0, 50.5, 100.0]
        );
        assert_eq!(
            scale_values(&[10.0, 20.0, 30.0], Direction::LowerIsBetter),
            vec![100.0, 50.5, 1.0]
        );
        assert_eq!(
            scale_values(&[4.0, 4.0, 4.0], Direction::HigherIsBetter),
            vec![100.0; 3]
        );
        assert_eq!(scale_values(&[-3.5], Direction::HigherIsBetter), vec![100.0]);
    }

    #[test]
    fn import_round_trips_and_reports_errors() {
        let vectors = vec![
            IndicatorVector {
                timber: 350.0,
                net_present_value: 2034.85,
                ..Default::default()
            },
            IndicatorVector {
                soil_water: 1000.0,
                ..Default::default()
            },
        ];
        let doc = import_document(&vectors);
        assert_eq!(import_external_indicators(&doc, 2).unwrap(), vectors);

        assert_eq!(
            import_external_indicators(&doc, 1).unwrap_err(),
            ImportError::UnknownPlayer(1)
        );
        assert_eq!(
            import_external_indicators(&doc, 3).unwrap_err(),
            ImportError::MissingPlayer(2)
        );

        let mut v: Value = serde_json::from_str(&doc).unwrap();
        v["players"][0]["indicators"]
            .as_object_mut()
            .unwrap()
            .remove("deadwood");
        assert_eq!(
            import_external_indicators(&v.to_string(), 2).unwrap_err(),
            ImportError::MissingIndicator {
                player: 0,
                field: "deadwood"
            }
        );

        let mut v: Value = serde_json::from_str(&doc).unwrap();
        v["players"][1]["indicators"]["timber"]["unit"] = Value::from("ft3");
        assert!(matches!(
            import_external_indicators(&v.to_string(), 2).unwrap_err(),
            ImportError::Unit {
                player: 1,
                field: "timber",
                ..
            }
        ));
    }

    #[test]
    fn report_marks_source_and_ranks_by_npv() {
        let s = play_single_hectare(DeckSpec::only(RiskCard::BarkBeetle, 3), Species::ScotsPine);
        let r = score_state(&s, &CoefficientTable::default(), &Directions::default());
        assert_eq!(r.source, IndicatorSource::Surrogate);
        assert_eq!(r.players[0].economic_rank, 1);
        assert_eq!(r.players[1].economic_rank, 2);
        assert_eq!(r.players[0].scaled.timber, 100.0);
        assert_eq!(r.players[1].scaled.timber, 1.0);
        assert_eq!(r.log_digest, s.digest());
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 3);

        let doc = import_document(&indicators_from_state(&s, &CoefficientTable::default()));
        let imported = score_imported(
            &s.export_log(),
            &doc,
            &CoefficientTable::default(),
            &Directions::default(),
        )
        .unwrap();
        assert_eq!(imported.source, IndicatorSource::Imported);
        assert_eq!(imported.players[0].raw, r.players[0].raw);
    }
}
