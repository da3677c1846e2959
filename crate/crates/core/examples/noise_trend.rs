//! CAN vs. a plain classifier on synthetic data under label shuffling.
//!
//! Usage: `cargo run --release --example noise_trend -- [features] [spread] [seeds]`

use noisycan_core::eval::{run_cell, SweepData};
use noisycan_core::TrainingConfig;

fn main() -> noisycan_core::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let data = SweepData {
        features: args.first().map_or(4, |s| s.parse().expect("features")),
        spread: args.get(1).map_or(1.0, |s| s.parse().expect("spread")),
        ..SweepData::default()
    };
    let seeds: u64 = args.get(2).map_or(5, |s| s.parse().expect("seeds"));
    let cfg = TrainingConfig::desk();
    println!("p_noise seed can_acc base_acc can_map base_map");
    for p_noise in [0.0, 0.4, 0.6] {
        for seed in 0..seeds {
            let r = run_cell(&data, p_noise, seed, &cfg)?;
            println!(
                "{p_noise} {seed} {:.4} {:.4} {:.4} {:.4}",
                r.can.accuracy, r.baseline.accuracy, r.can.map, r.baseline.map
            );
        }
    }
    Ok(())
}
