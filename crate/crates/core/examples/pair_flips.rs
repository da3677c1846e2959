//! Transition matrices after injecting flips between classes 0 and 1.
//!
//! Usage: `cargo run --release --example pair_flips -- [seed] [epochs] [lambda] [quality_dim]`

use noisycan_core::data::argmax;
use noisycan_core::eval::{diagnose, TransitionReport};
use noisycan_core::{gen_synthetic, inject_pair_flips, train, TrainingConfig};

fn main() -> noisycan_core::Result<()> {
    let arg = |i: usize| std::env::args().nth(i);
    let seed: u64 = arg(1).map_or(0, |s| s.parse().expect("seed"));
    let epochs: usize = arg(2).map_or(30, |s| s.parse().expect("epochs"));
    let lambda: f64 = arg(3).map_or(0.3, |s| s.parse().expect("lambda"));
    let ds = gen_synthetic(4, 4, 250, 1.0, seed)?;
    let ds = inject_pair_flips(&ds, 0, 1, 0.5, seed + 1)?;
    let mut cfg = TrainingConfig {
        seed,
        epochs,
        lambda,
        ..TrainingConfig::desk()
    };
    if let Some(d) = arg(4) {
        cfg.arch.quality_dim = d.parse().expect("quality dim");
    }
    let out = train(&ds, &cfg)?;
    let d = diagnose(&out.params, &ds, seed)?;
    let p = out.params.classifier.apply(&ds.features)?;
    let clean = ds.clean_labels.as_ref().expect("clean");
    let (mut n, mut q_true, mut q_noisy, mut p_true, mut p_noisy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in 0..ds.len() {
        let (c, y) = (argmax(clean.row(r)), argmax(ds.noisy_labels.row(r)));
        if c != y {
            n += 1.0;
            q_true += d.encoding.q_z.row(r)[c];
            q_noisy += d.encoding.q_z.row(r)[y];
            p_true += p.row(r)[c];
            p_noisy += p.row(r)[y];
        }
    }
    println!(
        "flipped rows {n}: q(true) {:.3} q(noisy) {:.3} P(true) {:.3} P(noisy) {:.3}",
        q_true / n,
        q_noisy / n,
        p_true / n,
        p_noisy / n
    );
    for (name, m) in [
        ("trustworthy", &d.report.trustworthy),
        ("non-trustworthy", &d.report.non_trustworthy),
    ] {
        println!("{name}: diagonal mass {:?}", TransitionReport::diagonal_mass(m));
        for row in m {
            println!("  {row:?}");
        }
    }
    if let Some(last) = out.log.last() {
        println!("last {last:?}");
    }
    Ok(())
}
