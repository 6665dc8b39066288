//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::{Duration, Instant};

use forestplay_core::economics::{npv, CashFlow, CashFlowKind};
use forestplay_core::game::{
    replay, Action, ActionKind, GameConfig, GamePhase, GameState, PlayerId, RuleError, Species,
};
use forestplay_core::outcomes::{scale_1_100, Directions, Indicator, IndicatorVector};
use forestplay_core::risk::{apply_card, DeckSpec, RiskCard};
use forestplay_core::strategy::{enumerate_exact, evaluate_mc, play, Agent, Policy, RandomAgent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(limit: Duration, elapsed: Duration) -> Result<(), String> {
    ensure(elapsed < limit, format!("took {elapsed:?}, limit {limit:?}"))
}

fn two_player(deck: DeckSpec) -> GameConfig {
    GameConfig {
        player_count: 2,
        deck,
        ..GameConfig::default()
    }
}

fn pass_all(s: &mut GameState) {
    let phase = s.phase;
    for seat in 0..s.players.len() {
        s.apply(Action::new(PlayerId(seat as u8), phase, ActionKind::Pass))
            .unwrap();
    }
}

/// Plant one parcel for seat 0 and harvest it at every yield phase; returns revenues.
fn single_hectare(deck: DeckSpec, species: Species, insure: bool) -> (GameState, Vec<i64>) {
    let mut s = GameState::new(two_player(deck)).unwrap();
    let y0 = GamePhase::Y0Planting;
    s.apply(Action::new(PlayerId(0), y0, ActionKind::Plant { parcel: 0, species }))
        .unwrap();
    if insure {
        s.apply(Action::new(PlayerId(0), y0, ActionKind::BuyInsurance { parcel: 0 }))
            .unwrap();
    }
    let mut revenues = Vec::new();
    while !s.is_finished() {
        let phase = s.phase;
        if phase.is_yield() {
            s.apply(Action::new(PlayerId(0), phase, ActionKind::Harvest { parcel: 0 }))
                .unwrap();
            revenues.push(s.parcels[0].harvests.last().unwrap().revenue);
        }
        if phase.is_decision() {
            pass_all(&mut s);
        }
        s.advance_phase().unwrap();
    }
    (s, revenues)
}

fn revenue_table() -> Outcome {
    let start = Instant::now();
    let (s, revenues) = single_hectare(DeckSpec::only(RiskCard::BarkBeetle, 6), Species::ScotsPine, false);
    let elapsed = start.elapsed();
    let volume: i64 = s.parcels[0].harvests.iter().map(|h| h.volume().to_integer()).sum();
    ensure(revenues == [1000, 3500, 10000], format!("revenues {revenues:?}"))?;
    ensure(volume == 350, format!("volume {volume} m3"))?;
    within(Duration::from_millis(1), elapsed)?;
    Ok(format!("revenues {revenues:?}, {volume} m3, {elapsed:?}"))
}

fn budget_constraint() -> Outcome {
    let mut s = GameState::new(GameConfig::default()).unwrap();
    let plant = |parcel| {
        Action::new(
            PlayerId(0),
            GamePhase::Y0Planting,
            ActionKind::Plant {
                parcel,
                species: Species::ScotsPine,
            },
        )
    };
    for parcel in 0..8 {
        s.apply(plant(parcel)).map_err(|e| format!("planting {parcel}: {e}"))?;
    }
    let ninth = s.apply(plant(8));
    ensure(
        matches!(
            ninth,
            Err(RuleError::InsufficientFunds {
                needed: 1000,
                available: 0
            })
        ),
        format!("ninth planting gave {ninth:?}"),
    )?;
    Ok("8 accepted, 9th insufficient funds".into())
}

fn risk_state(species: Species, insure: bool, phase: GamePhase) -> GameState {
    let mut s = GameState::new(two_player(DeckSpec::default())).unwrap();
    let y0 = GamePhase::Y0Planting;
    s.apply(Action::new(PlayerId(0), y0, ActionKind::Plant { parcel: 0, species }))
        .unwrap();
    if insure {
        s.apply(Action::new(PlayerId(0), y0, ActionKind::BuyInsurance { parcel: 0 }))
            .unwrap();
    }
    pass_all(&mut s);
    s.phase = phase;
    s
}

fn mammal_rule() -> Outcome {
    let s = risk_state(Species::ScotsPine, false, GamePhase::Risk0);
    let after = apply_card(&s, PlayerId(0), RiskCard::MammalDamage).map_err(|e| e.to_string())?;
    let trees = after.parcels[0].trees;
    ensure(trees == 1200, format!("{trees} trees left"))?;
    Ok("2000 -> 1200".into())
}

fn downgrade_rule() -> Outcome {
    let deck = DeckSpec::only(RiskCard::BarkBeetle, 6);
    let (_, bare) = single_hectare(deck.clone(), Species::NorwaySpruce, false);
    let (_, insured) = single_hectare(deck, Species::NorwaySpruce, true);
    ensure(bare[1] == 2000, format!("uninsured Y45 revenue {}", bare[1]))?;
    ensure(insured[1] == 3500, format!("insured Y45 revenue {}", insured[1]))?;
    Ok(format!("uninsured {}, insured {}", bare[1], insured[1]))
}

fn market_rule() -> Outcome {
    let (_, revenues) = single_hectare(DeckSpec::only(RiskCard::PriceUp, 1), Species::ScotsPine, false);
    // With a one-card deck both seats draw PriceUp before Y30; measure the single-card case directly.
    let s = risk_state(Species::ScotsPine, false, GamePhase::Risk0);
    let mut after = apply_card(&s, PlayerId(0), RiskCard::PriceUp).map_err(|e| e.to_string())?;
    after.phase = GamePhase::Y30Thinning;
    after.passed = vec![false; 2];
    after
        .apply(Action::new(
            PlayerId(0),
            GamePhase::Y30Thinning,
            ActionKind::Harvest { parcel: 0 },
        ))
        .map_err(|e| e.to_string())?;
    let revenue = after.parcels[0].harvests[0].revenue;
    ensure(revenue == 1500, format!("Y30 revenue after one PriceUp: {revenue}"))?;
    ensure(
        revenues[0] == 2000,
        format!("Y30 revenue after two PriceUp: {}", revenues[0]),
    )?;
    Ok(format!("one PriceUp -> {revenue}"))
}

fn insurance_premiums() -> Outcome {
    let mut paid = Vec::new();
    for phase in [GamePhase::Y0Planting, GamePhase::Y30Thinning, GamePhase::Y45Thinning] {
        let mut s = risk_state(Species::NorwaySpruce, false, phase);
        s.passed = vec![false; 2];
        let before = s.players[0].cash;
        s.apply(Action::new(PlayerId(0), phase, ActionKind::BuyInsurance { parcel: 0 }))
            .map_err(|e| e.to_string())?;
        paid.push(before - s.players[0].cash);
    }
    ensure(paid == [500, 1000, 2000], format!("premiums {paid:?}"))?;
    Ok(format!("{paid:?}"))
}

fn npv_oracle() -> Outcome {
    let (s, _) = single_hectare(DeckSpec::only(RiskCard::BarkBeetle, 6), Species::ScotsPine, false);
    let ledger = &s.players[0].ledger;
    let engine = npv(ledger, 0.03);
    // Independent closed form over the known per-hectare cycle.
    let oracle: f64 = [(0, -1000.0), (30, 1000.0), (45, 3500.0), (60, 10000.0)]
        .iter()
        .map(|&(t, x): &(i32, f64)| x * (-(t as f64) * 1.03f64.ln()).exp())
        .sum();
    ensure((engine - 2034.85).abs() <= 0.5, format!("engine NPV {engine}"))?;
    ensure((oracle - 2034.85).abs() <= 0.5, format!("oracle NPV {oracle}"))?;
    let cash_sum: i64 = ledger.iter().map(|f| f.amount).sum();
    ensure(
        npv(ledger, 0.0) == cash_sum as f64,
        format!("rate 0 NPV {} vs sum {cash_sum}", npv(ledger, 0.0)),
    )?;
    let synthetic = [CashFlow {
        year: 17,
        amount: 12345,
        kind: CashFlowKind::Lease,
    }];
    ensure(npv(&synthetic, 0.0) == 12345.0, "rate 0 on synthetic flow")?;
    Ok(format!("engine {engine:.2}, oracle {oracle:.4}, rate 0 = {cash_sum}"))
}

fn random_game(seed: u64, mut observe: impl FnMut(&GameState)) -> GameState {
    let players = 2 + (seed % 3) as u8;
    let cfg = GameConfig {
        player_count: players,
        seed,
        ..GameConfig::default()
    };
    let mut agents: Vec<RandomAgent> = (0..players)
        .map(|i| RandomAgent::new(seed ^ (u64::from(i) << 40)))
        .collect();
    let mut dyns: Vec<&mut dyn Agent> = agents.iter_mut().map(|a| a as &mut dyn Agent).collect();
    play(GameState::new(cfg).unwrap(), &mut dyns, &mut observe).unwrap()
}

fn replay_determinism() -> Outcome {
    let mut seeds = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    let mut matched = 0;
    for _ in 0..100 {
        let end = random_game(seeds.random(), |_| {});
        let replayed = replay(&end.export_log()).map_err(|e| e.to_string())?;
        if replayed.digest() == end.digest() {
            matched += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(matched == 100, format!("{matched}/100 digests matched"))?;
    within(Duration::from_secs(10), elapsed)?;
    Ok(format!("100/100 in {elapsed:?}"))
}

fn conservation_suite() -> Outcome {
    let mut seeds = ChaCha8Rng::seed_from_u64(77);
    let mut violations = 0;
    let mut checked = 0;
    for _ in 0..200 {
        random_game(seeds.random(), |s| {
            checked += 1;
            let cash: i64 = s.players.iter().map(|p| p.cash).sum();
            let flows: i64 = s.players.iter().flat_map(|p| &p.ledger).map(|f| f.amount).sum();
            if cash != s.initial_money() + flows {
                violations += 1;
            }
            for p in &s.parcels {
                let lost: u32 = p.loss_history.iter().map(|l| l.trees).sum();
                if p.planted_trees != p.trees + p.harvested_trees + lost {
                    violations += 1;
                }
            }
        });
    }
    ensure(violations == 0, format!("{violations} violations"))?;
    Ok(format!("0 violations over {checked} states"))
}

fn oracle_agreement() -> Outcome {
    let mut deck = DeckSpec::only(RiskCard::StormDamage, 1);
    deck.0.insert(RiskCard::MammalDamage, 1);
    deck.0.insert(RiskCard::PriceUp, 1);
    deck.0.insert(RiskCard::PriceDown, 1);
    let cfg = two_player(deck);
    let policies = vec![Policy::named("pine-all-affordable"); 2];
    let start = Instant::now();
    let exact = enumerate_exact(&policies, &cfg).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for master in 0..20 {
        let mc = evaluate_mc(&policies, &cfg, 10_000, master).map_err(|e| e.to_string())?;
        for (seat, (m, e)) in mc.seats.iter().zip(&exact.seats).enumerate() {
            let gap = (m.mean_net_cash - e.mean_net_cash).abs();
            ensure(m.ci_net_cash > 0.0, "degenerate confidence interval")?;
            worst = worst.max(gap / m.ci_net_cash);
            ensure(
                gap < 3.0 * m.ci_net_cash,
                format!("master {master} seat {seat}: gap {gap:.2} vs 3 x {:.2}", m.ci_net_cash),
            )?;
        }
    }
    let elapsed = start.elapsed();
    within(Duration::from_secs(60), elapsed)?;
    Ok(format!(
        "20 seeds, worst gap {worst:.2} half-widths, exact mean {:.2}, {elapsed:?}",
        exact.seats[0].mean_net_cash
    ))
}

fn scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..2000 {
        let players = rng.random_range(1..=6);
        let equal = trial % 10 == 0;
        let vectors: Vec<IndicatorVector> = (0..players)
            .map(|_| {
                let mut v = IndicatorVector::default();
                for i in Indicator::ALL {
                    v.set(i, if equal { 42.0 } else { rng.random_range(-1e5..1e5) });
                }
                v
            })
            .collect();
        let scaled = scale_1_100(&vectors, &Directions::default());
        let (a, b) = (rng.random_range(0.001..1000.0), rng.random_range(-1e5..1e5));
        let moved: Vec<IndicatorVector> = vectors
            .iter()
            .map(|v| {
                let mut m = *v;
                m.set(Indicator::Deadwood, a * v.get(Indicator::Deadwood) + b);
                m
            })
            .collect();
        let rescaled = scale_1_100(&moved, &Directions::default());
        for i in Indicator::ALL {
            let raw: Vec<f64> = vectors.iter().map(|v| v.get(i)).collect();
            let max = raw.iter().cloned().fold(f64::MIN, f64::max);
            let min = raw.iter().cloned().fold(f64::MAX, f64::min);
            for (r, s) in raw.iter().zip(scaled.iter().map(|v| v.get(i))) {
                ensure((1.0..=100.0).contains(&s), format!("trial {trial}: {s} out of range"))?;
                if max == min || *r == max {
                    ensure(s == 100.0, format!("trial {trial}: max/equal maps to {s}"))?;
                } else if *r == min {
                    ensure(s == 1.0, format!("trial {trial}: min maps to {s}"))?;
                }
            }
            for (x, y) in scaled.iter().zip(&rescaled) {
                ensure(
                    (x.get(i) - y.get(i)).abs() < 1e-6,
                    format!("trial {trial}: affine transform moved {}", i.key()),
                )?;
            }
        }
    }
    Ok("2000 random sets".into())
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("revenue table reproduction", revenue_table),
        ("budget constraint", budget_constraint),
        ("mammal rule", mammal_rule),
        ("downgrade rule", downgrade_rule),
        ("market rule", market_rule),
        ("insurance premiums", insurance_premiums),
        ("npv", npv_oracle),
        ("replay determinism", replay_determinism),
        ("conservation suite", conservation_suite),
        ("oracle agreement", oracle_agreement),
        ("scaling", scaling),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS {name}: {detail}"),
            Ok(Err(detail)) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {name}: panicked");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
