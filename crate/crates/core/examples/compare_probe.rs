//! Scratch harness for the architecture comparison defaults:
//!
//!   cargo run --release -p gcnl-core --example compare_probe [epochs] [per_class]

use gcnl_core::data::{split, synth_gestures, ShapeKind};
use gcnl_core::train::{compare_architectures, AlphaPolicy, LossMode, TrainConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(8);
    let per_class: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(200);

    let classes = [
        ShapeKind::Circle,
        ShapeKind::Cross,
        ShapeKind::DotGrid,
        ShapeKind::Vee,
    ];
    let ds = synth_gestures(42, &classes, per_class, 32, 0.5).unwrap();
    let (train_set, val_set) = split(&ds, 0.8, 7).unwrap();

    for seed in [1u64, 2, 3] {
        let cfg = TrainConfig {
            epochs,
            batch_size: 32,
            learning_rate: 0.002,
            momentum: 0.9,
            seed,
            loss_mode: LossMode::Focal {
                gamma: 2.0,
                alpha_policy: AlphaPolicy::ByFrequency,
            },
            eval_every: epochs,
        };
        let t0 = Instant::now();
        let report = compare_architectures(&train_set, &val_set, &cfg, None).unwrap();
        println!("seed {seed} ({:.1}s):", t0.elapsed().as_secs_f64());
        for e in &report.entries {
            println!(
                "  {:<14} auc {:.4} recall {:.4} acc {:.4}",
                e.name, e.auc, e.recall, e.accuracy
            );
        }
    }
}
