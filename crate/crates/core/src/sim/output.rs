//! CSV writers for traces and per-run metrics.
//!
//! Trace rows hold `t,actions,match,utilities,moods`, where list-valued
//! columns are `|`-separated in proposer order and the match column lists
//! `proposer-acceptor` pairs.

use std::io::{self, Write};

use super::{Metrics, SimTrace, StepRecord};
use crate::market::Market;

pub const TRACE_CSV_HEADER: &str = "t,actions,match,utilities,moods";

pub const METRICS_CSV_HEADER: &str =
    "seed,epsilon,horizon,window_len,posm_frequency,time_to_first_posm,stable_frequency,mean_welfare,modal_match";

pub fn write_trace_csv<W: Write>(market: &Market, trace: &SimTrace, mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for (t, rec) in trace.records.iter().enumerate() {
        write_trace_row(market, t as u64 + 1, rec, &mut out)?;
    }
    Ok(())
}

/// One trace row; lets long runs stream through [`super::run_with`]
/// instead of keeping every record.
pub fn write_trace_row<W: Write>(market: &Market, t: u64, rec: &StepRecord, mut out: W) -> io::Result<()> {
    let actions: Vec<String> = rec.events.iter().map(|e| market.describe_action(e.action)).collect();
    let pairs: Vec<String> = rec
        .outcome
        .pairs()
        .map(|(i, j)| format!("{}-{}", market.proposer_name(i), market.acceptor_name(j)))
        .collect();
    let utilities: Vec<String> = rec.utilities.iter().map(|u| u.to_string()).collect();
    let moods: Vec<String> = rec.states.iter().map(|s| s.mood.letter().to_string()).collect();
    writeln!(
        out,
        "{t},{},{},{},{}",
        actions.join("|"),
        pairs.join("|"),
        utilities.join("|"),
        moods.join("|")
    )
}

pub fn write_metrics_csv<W: Write>(market: &Market, rows: &[Metrics], mut out: W) -> io::Result<()> {
    writeln!(out, "{METRICS_CSV_HEADER}")?;
    for m in rows {
        let modal = m
            .modal_match()
            .map(|mu| {
                mu.pairs()
                    .map(|(i, j)| format!("{}-{}", market.proposer_name(i), market.acceptor_name(j)))
                    .collect::<Vec<_>>()
                    .join("|")
            })
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            m.seed,
            m.epsilon,
            m.horizon,
            m.window_len,
            m.posm_frequency,
            m.time_to_first_posm.map(|t| t.to_string()).unwrap_or_default(),
            m.stable_frequency,
            m.mean_welfare,
            modal
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::market::{AcceptorId, Action, MatchOutcome};
    use crate::rule::{ProposerState, SelectionEvent};

    fn tiny_trace() -> SimTrace {
        let rec = StepRecord {
            events: vec![
                SelectionEvent::experiment(Action::Propose(AcceptorId(1))),
                SelectionEvent::baseline(Action::Single),
            ],
            outcome: MatchOutcome::from_pairs(2, 2, &[(0, 1)]),
            utilities: vec![0.5, 0.0],
            states: vec![
                ProposerState::content(Action::Propose(AcceptorId(1)), 0.5),
                ProposerState::discontent(),
            ],
        };
        SimTrace {
            records: vec![rec],
            final_states: vec![],
            metrics: Metrics {
                seed: 4,
                epsilon: 0.05,
                horizon: 1,
                window_len: 1,
                posm_frequency: 0.0,
                time_to_first_posm: None,
                stable_frequency: 0.0,
                mean_welfare: 0.5,
                match_visits: vec![(MatchOutcome::from_pairs(2, 2, &[(0, 1)]), 1)],
            },
        }
    }

    #[test]
    fn trace_csv_golden() {
        let mut buf = Vec::new();
        write_trace_csv(&fixtures::m2(), &tiny_trace(), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,actions,match,utilities,moods\n1,A2|-,P1-A2,0.5|0,C|D\n"
        );
    }

    #[test]
    fn metrics_csv_golden() {
        let mut buf = Vec::new();
        write_metrics_csv(&fixtures::m2(), &[tiny_trace().metrics], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{METRICS_CSV_HEADER}\n4,0.05,1,1,0,,0,0.5,P1-A2\n")
        );
    }
}
