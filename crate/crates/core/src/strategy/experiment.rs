use std::collections::BTreeSet;

use itertools::iproduct;
use serde::{Deserialize, Serialize};

use super::{
    enumerate_exact, rollout, rollout_seed, search_policies, Expectation, HarvestRule, InsuranceRule, LeaseRule,
    Objective, PlantRule, Policy, RankedPolicy, SpeciesPlan, StrategyError,
};
use crate::canonical::{sha256_hex, to_canonical_pretty, to_canonical_string};
use crate::game::GameConfig;
use crate::outcomes::{Indicator, ScoreReport, SCHEMA_VERSION};

pub const EXPERIMENT_FORMAT: &str = "forestplay-experiment";
pub const RESULTS_FORMAT: &str = "forestplay-experiment-results";

/// Cartesian product of rule choices. An empty axis means the default rule.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyGrid {
    pub species: Vec<SpeciesPlan>,
    pub plant: Vec<PlantRule>,
    pub insurance: Vec<InsuranceRule>,
    pub harvest: Vec<HarvestRule>,
    pub lease: Vec<LeaseRule>,
}

fn or_default<T: Clone + Default>(axis: &[T]) -> Vec<T> {
    if axis.is_empty() {
        vec![T::default()]
    } else {
        axis.to_vec()
    }
}

impl PolicyGrid {
    /// Every combination, ids `grid-0000`, `grid-0001`, … in axis order.
    pub fn expand(&self) -> Vec<Policy> {
        iproduct!(
            or_default(&self.species),
            or_default(&self.plant),
            or_default(&self.insurance),
            or_default(&self.harvest),
            or_default(&self.lease)
        )
        .enumerate()
        .map(|(i, (species, plant, insurance, harvest, lease))| Policy {
            id: format!("grid-{i:04}"),
            species,
            plant,
            insurance,
            harvest,
            lease,
        })
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub config: GameConfig,
    pub samples: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub candidates: Vec<Policy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<PolicyGrid>,
    /// Policy for seats 1.., when absent every seat plays the candidate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<Policy>,
    /// Also compute exact expectations by enumeration (small decks only).
    #[serde(default)]
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactRow {
    pub policy_id: String,
    pub expectation: Expectation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub format: String,
    pub version: u32,
    pub experiment_digest: String,
    pub objective: Objective,
    pub samples: u64,
    pub master_seed: u64,
    pub ranking: Vec<RankedPolicy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exact: Vec<ExactRow>,
    /// Score report of the top-ranked policy's first rollout.
    pub best_report: ScoreReport,
}

impl Experiment {
    pub fn from_document(text: &str) -> Result<Self, StrategyError> {
        let e: Experiment = serde_json::from_str(text).map_err(|e| StrategyError::Experiment(e.to_string()))?;
        if e.format != EXPERIMENT_FORMAT || e.version != SCHEMA_VERSION {
            return Err(StrategyError::Experiment(format!(
                "unsupported format {:?} version {}",
                e.format, e.version
            )));
        }
        Ok(e)
    }

    /// Explicit candidates followed by the grid expansion. Ids must be unique.
    pub fn policy_space(&self) -> Result<Vec<Policy>, StrategyError> {
        let mut space = self.candidates.clone();
        if let Some(grid) = &self.grid {
            space.extend(grid.expand());
        }
        let mut seen = BTreeSet::new();
        for p in &space {
            if !seen.insert(p.id.as_str()) {
                return Err(StrategyError::Experiment(format!("duplicate policy id {:?}", p.id)));
            }
        }
        Ok(space)
    }

    pub fn run(&self) -> Result<ExperimentResults, StrategyError> {
        let space = self.policy_space()?;
        let ranking = search_policies(
            &space,
            self.background.as_ref(),
            &self.config,
            self.samples,
            self.master_seed,
            self.objective,
        )?;
        let seats = |candidate: &Policy| -> Vec<Policy> {
            let others = self.background.as_ref().unwrap_or(candidate);
            (0..self.config.player_count)
                .map(|s| if s == 0 { candidate.clone() } else { others.clone() })
                .collect()
        };
        let exact = if self.exact {
            ranking
                .iter()
                .map(|r| {
                    Ok(ExactRow {
                        policy_id: r.policy.id.clone(),
                        expectation: enumerate_exact(&seats(&r.policy), &self.config)?,
                    })
                })
                .collect::<Result<_, StrategyError>>()?
        } else {
            Vec::new()
        };
        let best = &ranking[0].policy;
        let (_, best_report) = rollout(&seats(best), &self.config, rollout_seed(self.master_seed, 0))?;
        Ok(ExperimentResults {
            format: RESULTS_FORMAT.to_owned(),
            version: SCHEMA_VERSION,
            experiment_digest: sha256_hex(to_canonical_string(self).expect("experiment serializes").as_bytes()),
            objective: self.objective,
            samples: self.samples,
            master_seed: self.master_seed,
            ranking,
            exact,
            best_report,
        })
    }
}

impl ExperimentResults {
    pub fn to_document(&self) -> String {
        to_canonical_pretty(self).expect("results serialize")
    }

    /// Ranked table, one row per policy, statistics for seat 0.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = [
            "rank",
            "policy_id",
            "objective",
            "samples",
            "mean_npv",
            "variance_npv",
            "ci_npv",
            "mean_net_cash",
            "variance_net_cash",
            "ci_net_cash",
        ]
        .map(String::from)
        .to_vec();
        header.extend(Indicator::ALL.iter().map(|i| format!("mean_{}", i.key())));
        w.write_record(&header).expect("in-memory write");
        for r in &self.ranking {
            let s = &r.result.seats[0];
            let mut row = vec![
                r.rank.to_string(),
                r.policy.id.clone(),
                r.objective.to_string(),
                r.result.samples.to_string(),
                s.mean_npv.to_string(),
                s.variance_npv.to_string(),
                s.ci_npv.to_string(),
                s.mean_net_cash.to_string(),
                s.variance_net_cash.to_string(),
                s.ci_net_cash.to_string(),
            ];
            row.extend(Indicator::ALL.iter().map(|&i| s.indicator_means.get(i).to_string()));
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}
