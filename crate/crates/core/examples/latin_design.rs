//! Latin-hypercube maximin designs: the effect of candidate rounds on the
//! minimum pairwise distance.
//!
//! ```text
//! cargo run --release --example latin_design -- 200 5
//! ```

use nirom::sampling::{lhs_maximin, maximin_score, LhsConfig};

fn main() -> nirom::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let dim: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let lower = vec![0.0; dim];
    let upper: Vec<f64> = (1..=dim).map(|k| k as f64).collect();

    println!("{count} points in {dim} dimensions");
    println!("{:>7} {:>12} {:>12} {:>8}", "rounds", "best score", "worst cand.", "winner");
    for rounds in [1, 4, 16, 64, 256] {
        let mut cfg = LhsConfig::new(count, lower.clone(), upper.clone(), 7);
        cfg.candidate_rounds = rounds;
        let design = lhs_maximin(&cfg)?;
        let worst = design.candidate_scores.iter().copied().fold(f64::INFINITY, f64::min);
        println!("{rounds:>7} {:>12.5} {:>12.5} {:>8}", design.score, worst, design.round);
        assert_eq!(maximin_score(&design.points, &lower, &upper), design.score);
    }
    Ok(())
}
