//! Acceptance suite. Prints one `[PASS]` / `[FAIL]` line per check.
//!
//! Failures are reported but only abort the process when
//! `ACCEPTANCE_STRICT=1` is set, so the report always completes.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use uncoupled_match::chain::{
    build_chain, elementary_transitions, posm_mass, recurrence_report, resistance_slope, stationary_distribution,
    ResistanceKind,
};
use uncoupled_match::generate::MarketGenSpec;
use uncoupled_match::rule::{action_distribution, select_action, SelectionEvent};
use uncoupled_match::sim::{batch_run, median, run_with, SimConfig};
use uncoupled_match::{fixtures, AcceptorId, Action, Market, MatchOutcome, ProposerState, RuleParams};

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
            notes: Vec::new(),
        }
    }

    fn note(mut self, line: impl Into<String>) -> Self {
        self.notes.push(line.into());
        self
    }
}

fn random_market(seed: u64, max_side: usize) -> Market {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_side);
    let m = rng.gen_range(1..=max_side);
    MarketGenSpec::new(n, m, seed).generate().unwrap()
}

fn random_2x2(count: u64) -> Vec<(String, Market)> {
    (0..count)
        .map(|s| (format!("rand2x2#{s}"), MarketGenSpec::new(2, 2, s).generate().unwrap()))
        .collect()
}

fn gs_oracle() -> Outcome {
    let mut bad = Vec::new();
    for seed in 0..200 {
        let market = random_market(seed, 5);
        let gs = market.gale_shapley();
        let all = market.enumerate_stable_matches().unwrap();
        let ok = market.blocking_pairs(&gs).is_empty()
            && all.contains(&gs)
            && all.iter().all(|mu| market.proposer_weakly_prefers(&gs, mu));
        if !ok {
            bad.push(seed);
        }
    }
    Outcome::new(bad.is_empty(), format!("200 markets, failing seeds {bad:?}"))
}

fn selection_fidelity() -> Outcome {
    const DRAWS: usize = 1_000_000;
    let m = 3;
    let a1 = Action::Propose(AcceptorId(0));
    let states = [
        ("content/A1", ProposerState::content(a1, 0.5)),
        ("content/single", ProposerState::content(Action::Single, 0.0)),
        ("discontent", ProposerState::discontent()),
        ("watchful", ProposerState::watchful(a1, 0.5)),
    ];
    let mut worst: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for eps in [0.3, 0.1, 0.04] {
        let params = RuleParams::new(eps).unwrap();
        for (k, (_, state)) in states.iter().enumerate() {
            let dist = action_distribution(state, &params, m).unwrap();
            worst_sum = worst_sum.max((dist.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs());
            let mut rng = ChaCha8Rng::seed_from_u64(0xacce + k as u64);
            let mut counts: BTreeMap<SelectionEvent, usize> = BTreeMap::new();
            for _ in 0..DRAWS {
                *counts
                    .entry(select_action(state, &params, m, &mut rng).unwrap())
                    .or_default() += 1;
            }
            for (event, p) in &dist {
                let freq = counts.get(event).copied().unwrap_or(0) as f64 / DRAWS as f64;
                worst = worst.max((freq - p).abs());
            }
            let unexpected = counts.keys().any(|e| dist.iter().all(|(d, _)| d != e));
            if unexpected {
                worst = f64::INFINITY;
            }
        }
    }
    Outcome::new(
        worst <= 0.005 && worst_sum <= 1e-12,
        format!("max |freq - p| = {worst:.5} (tol 0.005), max |sum - 1| = {worst_sum:.1e}"),
    )
}

fn exact_stability_sweep() -> Outcome {
    let sweep = [0.2, 0.1, 0.05, 0.02, 0.005, 0.001];
    let mut markets = vec![("M2".to_string(), fixtures::m2()), ("M2b".to_string(), fixtures::m2b())];
    markets.extend(random_2x2(20));
    let mut monotone_fail = Vec::new();
    let mut threshold_fail = Vec::new();
    let mut lowest = (String::new(), 1.0);
    for (name, market) in &markets {
        let masses: Vec<f64> = sweep
            .iter()
            .map(|&eps| {
                let chain = build_chain(market, &RuleParams::new(eps).unwrap()).unwrap();
                posm_mass(&chain, &stationary_distribution(&chain).unwrap().pi)
            })
            .collect();
        if masses.windows(2).any(|w| w[1] < w[0] - 1e-9) {
            monotone_fail.push(name.clone());
        }
        let last = *masses.last().unwrap();
        if last < 0.9 {
            threshold_fail.push(format!("{name}={last:.3}"));
        }
        if last < lowest.1 {
            lowest = (name.clone(), last);
        }
    }
    let deep = markets.iter().find(|(n, _)| *n == lowest.0).map(|(_, m)| {
        [1e-5, 1e-8]
            .iter()
            .map(|&eps| {
                let chain = build_chain(m, &RuleParams::new(eps).unwrap()).unwrap();
                format!(
                    "{eps:e}: {:.4}",
                    posm_mass(&chain, &stationary_distribution(&chain).unwrap().pi)
                )
            })
            .collect::<Vec<_>>()
            .join(", ")
    });
    Outcome::new(
        monotone_fail.is_empty() && threshold_fail.is_empty(),
        format!(
            "{} markets; non-monotone: {}; below 0.9 at eps=1e-3: {}",
            markets.len(),
            monotone_fail.len(),
            threshold_fail.len()
        ),
    )
    .note(format!("below threshold: {}", threshold_fail.join(" ")))
    .note(format!(
        "lowest market {} further down the sweep: {}",
        lowest.0,
        deep.unwrap_or_default()
    ))
}

fn posm_median_modal(market: &Market, eps: f64, seeds: &[u64]) -> (bool, Vec<f64>) {
    let config = SimConfig::new(RuleParams::new(eps).unwrap(), 1_000_000, 0);
    let runs = batch_run(market, &config, seeds).unwrap();
    let matches: BTreeSet<&MatchOutcome> = runs
        .iter()
        .flat_map(|r| r.match_visits.iter().map(|(m, _)| m))
        .collect();
    let median_freq = |mu: &MatchOutcome| {
        let f: Vec<f64> = runs
            .iter()
            .map(|r| {
                let c = r.match_visits.iter().find(|(m, _)| m == mu).map_or(0, |(_, c)| *c);
                c as f64 / r.window_len as f64
            })
            .collect();
        median(&f).unwrap()
    };
    let posm = market.gale_shapley();
    let posm_med = median_freq(&posm);
    let modal = matches
        .iter()
        .filter(|mu| ***mu != posm)
        .all(|mu| median_freq(mu) < posm_med);
    (modal, runs.iter().map(|r| r.posm_frequency).collect())
}

fn monte_carlo_stability() -> Outcome {
    let seeds: Vec<u64> = (0..10).collect();
    let mal = fixtures::by_name("mal").unwrap();
    let randoms: Vec<Market> = (0..10)
        .map(|s| MarketGenSpec::new(3, 3, 1000 + s).generate().unwrap())
        .collect();
    let (mal_modal, mut low_all) = posm_median_modal(&mal, 0.05, &seeds);
    let (_, mut high_all) = posm_median_modal(&mal, 0.3, &seeds);
    let mut modal_count = 0;
    for market in &randoms {
        let (modal, low) = posm_median_modal(market, 0.05, &seeds);
        let (_, high) = posm_median_modal(market, 0.3, &seeds);
        modal_count += usize::from(modal);
        low_all.extend(low);
        high_all.extend(high);
    }
    let low = median(&low_all).unwrap();
    let high = median(&high_all).unwrap();
    Outcome::new(
        mal_modal && modal_count >= 8 && low > high,
        format!(
            "POSM modal on MAL: {mal_modal}, on {modal_count}/10 random 3x3; median posm_frequency {low:.3} at eps=0.05 vs {high:.3} at eps=0.3"
        ),
    )
}

fn resistance_scaling() -> Outcome {
    let m2 = fixtures::m2();
    let params = RuleParams::new(0.1).unwrap();
    let grid = [0.1, 0.05, 0.02, 0.01];
    let fits: Vec<_> = elementary_transitions(&m2, &params)
        .unwrap()
        .iter()
        .map(|t| resistance_slope(&m2, &params, t, &grid).unwrap())
        .collect();
    let worst = fits.iter().map(|f| f.abs_error).fold(0.0, f64::max);
    let slopes = |k: ResistanceKind| fits.iter().filter(move |f| f.kind == k).map(|f| f.slope);
    let max_content = slopes(ResistanceKind::ContentAdopt).fold(f64::NEG_INFINITY, f64::max);
    let min_disc = slopes(ResistanceKind::DiscontentAdopt).fold(f64::INFINITY, f64::min);
    let max_disc = slopes(ResistanceKind::DiscontentAdopt).fold(f64::NEG_INFINITY, f64::max);
    let min_two = slopes(ResistanceKind::ContentRemainSingle)
        .chain(slopes(ResistanceKind::DoubleExperiment))
        .fold(f64::INFINITY, f64::min);
    let every_kind = ResistanceKind::ALL.iter().all(|&k| fits.iter().any(|f| f.kind == k));
    let ordered = max_content < min_disc && max_disc < min_two.min(2.0);
    Outcome::new(
        every_kind && worst <= 0.1 && ordered,
        format!(
            "{} transitions, max |slope - theory| = {worst:.3}; content <= {max_content:.3} < discontent in [{min_disc:.3}, {max_disc:.3}] < two-experiment >= {min_two:.3}",
            fits.len()
        ),
    )
}

fn recurrence_structure() -> Outcome {
    let tol = 1e-4;
    let mut ok = true;
    let mut parts = Vec::new();
    let mut notes = Vec::new();
    for (name, market) in [("M2", fixtures::m2()), ("M2b", fixtures::m2b())] {
        let params = RuleParams::new(1e-6).unwrap();
        let chain = build_chain(&market, &params).unwrap();
        let support = stationary_distribution(&chain).unwrap().support;
        let r = recurrence_report(&chain, Some(&support));
        ok &= r.passed(tol);
        parts.push(format!(
            "{name}: min aligned self-loop {:.7}, max watchful leak {:.2e}",
            r.min_aligned_self_loop, r.max_watchful_leak
        ));
        if let Some(k) = r.worst_watchful.filter(|_| r.max_watchful_leak > tol) {
            notes.push(format!("{name} leaking state {}", chain.state(k).describe(&market)));
        }
        let variant = params.with_revert_keeps_baseline_utility(true);
        let vchain = build_chain(&market, &variant).unwrap();
        let vsupport = stationary_distribution(&vchain).unwrap().support;
        let v = recurrence_report(&vchain, Some(&vsupport));
        notes.push(format!(
            "{name} with revert-keeps-baseline-utility: passed={} (self-loop {:.7}, leak {:.2e})",
            v.passed(tol),
            v.min_aligned_self_loop,
            v.max_watchful_leak
        ));
    }
    let mut out = Outcome::new(ok, format!("eps=1e-6, recurrent class; {}", parts.join("; ")));
    out.notes = notes;
    out
}

fn nash_correspondence() -> Outcome {
    let mut bad = Vec::new();
    let mut profiles = 0;
    for seed in 0..20 {
        let market = random_market(seed, 3);
        let report = market.nash_and_welfare_check().unwrap();
        profiles += report.nash_profiles.len();
        if !report.passed() {
            bad.push(seed);
        }
    }
    Outcome::new(
        bad.is_empty(),
        format!("20 markets, {profiles} Nash profiles, failing seeds {bad:?}"),
    )
}

fn with_values(rankings_p: &[Vec<usize>], rankings_a: &[Vec<usize>], hi: f64, lo: f64) -> Market {
    let table = |rankings: &[Vec<usize>]| -> Vec<Vec<f64>> {
        rankings
            .iter()
            .map(|r| {
                let mut row = vec![0.0; r.len()];
                row[r[0]] = hi;
                row[r[1]] = lo;
                row
            })
            .collect()
    };
    let names = |p: &str| (1..=2).map(|i| format!("{p}{i}")).collect();
    Market::new(names("P"), names("A"), table(rankings_p), table(rankings_a)).unwrap()
}

fn ordinal_invariance() -> Outcome {
    let cases = [
        ("M2", vec![vec![0, 1], vec![0, 1]], vec![vec![1, 0], vec![0, 1]]),
        ("M2b", vec![vec![0, 1], vec![1, 0]], vec![vec![1, 0], vec![0, 1]]),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, rp, ra) in &cases {
        let mut induced = Vec::new();
        for (hi, lo) in [(1.0, 0.5), (0.9, 0.1)] {
            let market = with_values(rp, ra, hi, lo);
            let chain = build_chain(&market, &RuleParams::new(1e-3).unwrap()).unwrap();
            let st = stationary_distribution(&chain).unwrap();
            let top = chain.state(st.argmax());
            let mu = market.resolve_match(&top.baseline_profile());
            ok &= mu == market.gale_shapley();
            induced.push(market.describe_match(&mu));
        }
        ok &= induced[0] == induced[1];
        parts.push(format!("{name}: {} | {}", induced[0], induced[1]));
    }
    Outcome::new(ok, parts.join("; "))
}

fn exact_vs_monte_carlo() -> Outcome {
    let m2 = fixtures::m2();
    let params = RuleParams::new(0.05).unwrap();
    let chain = build_chain(&m2, &params).unwrap();
    let pi = stationary_distribution(&chain).unwrap().pi;
    let space = chain.space();
    // single runs are noisy at this horizon, so summarize a fixed seed block
    let tvs: Vec<f64> = (0..9u64)
        .into_par_iter()
        .map(|seed| {
            let config = SimConfig::new(params, 1_000_000, seed);
            let start = config.window_start();
            let mut counts = vec![0u64; chain.len()];
            run_with(&m2, &config, |t, rec| {
                if t >= start {
                    counts[space.index_of(&rec.states).expect("visited state is enumerated")] += 1;
                }
            })
            .unwrap();
            let total: u64 = counts.iter().sum();
            counts
                .iter()
                .zip(&pi)
                .map(|(&c, p)| (c as f64 / total as f64 - p).abs())
                .sum::<f64>()
                / 2.0
        })
        .collect();
    let med = median(&tvs).unwrap();
    let max = tvs.iter().copied().fold(0.0, f64::max);
    Outcome::new(
        med <= 0.02,
        format!("M2 eps=0.05 T=1e6, seeds 0..8: median total variation {med:.4} (tol 0.02), max {max:.4}"),
    )
}

fn main() {
    let checks: [Check; 9] = [
        ("gs-oracle-equivalence", gs_oracle),
        ("selection-law-fidelity", selection_fidelity),
        ("stochastic-stability-exact", exact_stability_sweep),
        ("stochastic-stability-monte-carlo", monte_carlo_stability),
        ("resistance-scaling", resistance_scaling),
        ("recurrence-structure", recurrence_structure),
        ("nash-stability-correspondence", nash_correspondence),
        ("ordinal-invariance", ordinal_invariance),
        ("exact-vs-monte-carlo", exact_vs_monte_carlo),
    ];
    let mut failed = 0;
    for (k, (name, check)) in checks.iter().enumerate() {
        let t0 = Instant::now();
        let out = check();
        let tag = if out.passed { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] {}. {name}: {} ({:.1}s)",
            k + 1,
            out.detail,
            t0.elapsed().as_secs_f64()
        );
        for n in &out.notes {
            println!("       {n}");
        }
        failed += usize::from(!out.passed);
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
