//! Hotseat play: scripted action files or numbered prompts on a terminal.

use std::io::{BufRead, Write};

use forestplay_core::game::{ActionKind, GameState, LogEvent};
use serde_json::Value;

use crate::CliError;

fn rule(e: impl std::fmt::Display) -> CliError {
    CliError::Rule(e.to_string())
}

/// Apply every action event in `text`; card and phase events are regenerated
/// by the engine and skipped. Accepts a bare event array or any document with
/// an `events` array, such as a decision log.
pub fn run_script(mut state: GameState, text: &str) -> Result<GameState, CliError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| CliError::Invalid(format!("script: {e}")))?;
    let events = match &doc {
        Value::Array(items) => items,
        Value::Object(obj) => obj
            .get("events")
            .and_then(Value::as_array)
            .ok_or_else(|| CliError::Invalid("script: missing `events` array".into()))?,
        _ => return Err(CliError::Invalid("script: expected an array or an object".into())),
    };
    state.advance_while_idle().map_err(rule)?;
    for (i, item) in events.iter().enumerate() {
        let event: LogEvent =
            serde_json::from_value(item.clone()).map_err(|e| CliError::Invalid(format!("script event {i}: {e}")))?;
        if let LogEvent::Action(action) = event {
            state
                .apply(action)
                .map_err(|e| rule(format!("script event {i}: {e}")))?;
            state.advance_while_idle().map_err(rule)?;
        }
    }
    Ok(state)
}

fn describe(kind: &ActionKind) -> String {
    match kind {
        ActionKind::Plant { parcel, species } => format!("plant {species:?} on parcel {parcel}"),
        ActionKind::BuyInsurance { parcel } => format!("insure parcel {parcel}"),
        ActionKind::LeaseOffer { parcel, .. } => format!("offer parcel {parcel} for lease"),
        ActionKind::LeaseAccept { offer_id } => format!("accept lease offer {offer_id}"),
        ActionKind::BuyParcel { parcel } => format!("buy parcel {parcel}"),
        ActionKind::Harvest { parcel } => format!("harvest parcel {parcel}"),
        ActionKind::Skip { parcel } => format!("skip parcel {parcel}"),
        ActionKind::Pass => "pass".into(),
    }
}

fn io(e: std::io::Error) -> CliError {
    CliError::Io {
        path: "<terminal>".into(),
        source: e,
    }
}

/// Prompt the seat to move for a numbered choice until the game ends or input runs out.
pub fn run_prompts(mut state: GameState, mut input: impl BufRead, mut out: impl Write) -> Result<GameState, CliError> {
    let mut line = String::new();
    loop {
        state.advance_while_idle().map_err(rule)?;
        let Some(seat) = state.current_actor() else {
            break;
        };
        let player = &state.players[seat.index()];
        writeln!(
            out,
            "\n{:?} | {} ({}) | cash {} | price modifier {:+}",
            state.phase, player.name, seat, player.cash, state.price_modifier
        )
        .map_err(io)?;
        let legal = state.legal_actions(seat);
        for (i, a) in legal.iter().enumerate() {
            writeln!(out, "  {i:>3}  {}", describe(&a.kind)).map_err(io)?;
        }
        write!(out, "choice> ").map_err(io)?;
        out.flush().map_err(io)?;
        line.clear();
        if input.read_line(&mut line).map_err(io)? == 0 {
            break;
        }
        let Some(mut action) = line.trim().parse::<usize>().ok().and_then(|i| legal.get(i).copied()) else {
            writeln!(out, "enter a number from the list").map_err(io)?;
            continue;
        };
        if let ActionKind::LeaseOffer { parcel, .. } = action.kind {
            write!(out, "price> ").map_err(io)?;
            out.flush().map_err(io)?;
            line.clear();
            if input.read_line(&mut line).map_err(io)? == 0 {
                break;
            }
            let Ok(price) = line.trim().parse::<i64>() else {
                writeln!(out, "price must be a whole number").map_err(io)?;
                continue;
            };
            action.kind = ActionKind::LeaseOffer { parcel, price };
        }
        if let Err(e) = state.apply(action) {
            writeln!(out, "rejected: {e}").map_err(io)?;
        }
    }
    Ok(state)
}
