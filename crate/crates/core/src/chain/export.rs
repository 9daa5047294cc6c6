use std::io::{self, Write};

use serde::Serialize;

use super::PerturbedChain;
use crate::rule::Mood;

pub fn write_triplets_csv<W: Write>(chain: &PerturbedChain, mut out: W) -> io::Result<()> {
    writeln!(out, "row,col,prob")?;
    for (r, c, p) in chain.triplets() {
        writeln!(out, "{r},{c},{p:e}")?;
    }
    Ok(())
}

pub fn write_pi_csv<W: Write>(pi: &[f64], mut out: W) -> io::Result<()> {
    writeln!(out, "index,probability")?;
    for (k, p) in pi.iter().enumerate() {
        writeln!(out, "{k},{p:e}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct LegendEntry {
    index: usize,
    moods: Vec<Mood>,
    baselines: Vec<String>,
    utilities: Vec<f64>,
}

/// JSON array mapping each state index to moods, baselines and utilities.
pub fn write_legend_json<W: Write>(chain: &PerturbedChain, out: W) -> io::Result<()> {
    let market = chain.market();
    let entries: Vec<LegendEntry> = (0..chain.len())
        .map(|k| {
            let s = chain.state(k);
            LegendEntry {
                index: k,
                moods: s.0.iter().map(|p| p.mood).collect(),
                baselines: s.0.iter().map(|p| market.describe_action(p.baseline)).collect(),
                utilities: s.0.iter().map(|p| p.baseline_utility).collect(),
            }
        })
        .collect();
    serde_json::to_writer_pretty(out, &entries).map_err(io::Error::other)
}
