use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use tslagent_runtime::session::Session;

use crate::error::CliError;

/// Reads one user prompt per line and prints each passage until end of input
/// or a line reading `quit`.
pub fn play(session: &mut Session, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("terminal: {e}"));
    writeln!(out, "state {}. Enter a prompt per line; `quit` or end of input stops.", session.state()).map_err(io)?;
    loop {
        write!(out, "turn {}> ", session.turn() + 1).map_err(io)?;
        out.flush().map_err(io)?;
        let mut line = String::new();
        if input.read_line(&mut line).map_err(io)? == 0 {
            writeln!(out).map_err(io)?;
            return Ok(());
        }
        let prompt = line.trim();
        if prompt == "quit" {
            return Ok(());
        }
        match session.step_turn(prompt) {
            Ok(r) => {
                let updates: BTreeMap<_, _> = r.updates.iter().filter(|(signal, term)| *term != *signal).collect();
                writeln!(out, "\n{}\n", r.passage).map_err(io)?;
                writeln!(out, "[state {} -> {}; {}]", r.state, r.next_state, updates.iter().map(|(s, t)| format!("{s} <- {t}")).collect::<Vec<_>>().join(", ")).map_err(io)?;
                for f in &r.faults {
                    writeln!(out, "[injected fault: {f}]").map_err(io)?;
                }
            }
            Err(e) => writeln!(out, "oracle error, turn not taken: {e}").map_err(io)?,
        }
    }
}
