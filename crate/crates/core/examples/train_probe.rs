//! Scratch harness for tuning the default training hyperparameters against
//! the end-to-end synthetic benchmark:
//!
//!   cargo run --release -p gcnl-core --example train_probe [lr] [momentum] [epochs]

use gcnl_core::data::{split, synth_gestures, ShapeKind};
use gcnl_core::model::{plain_cnn, Model};
use gcnl_core::train::{train, AlphaPolicy, LossMode, TrainConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.05);
    let momentum: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.9);
    let epochs: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(15);

    let started = Instant::now();
    let classes = [
        ShapeKind::Circle,
        ShapeKind::Cross,
        ShapeKind::DotGrid,
        ShapeKind::Vee,
    ];
    let ds = synth_gestures(42, &classes, 200, 32, 0.5).unwrap();
    let (train_set, val_set) = split(&ds, 0.8, 7).unwrap();
    println!(
        "dataset: {} train / {} val ({:.2}s)",
        train_set.len(),
        val_set.len(),
        started.elapsed().as_secs_f64()
    );

    let cfg = TrainConfig {
        epochs,
        batch_size: 32,
        learning_rate: lr,
        momentum,
        seed: 7,
        loss_mode: LossMode::Focal {
            gamma: 2.0,
            alpha_policy: AlphaPolicy::ByFrequency,
        },
        eval_every: 1,
    };
    let model = Model::build(plain_cnn([1, 32, 32], 4, 7).unwrap()).unwrap();
    println!("model params: {}", model.param_count());
    let t0 = Instant::now();
    match train(model, &train_set, &val_set, &cfg) {
        Ok((_, history)) => {
            for r in &history.records {
                println!(
                    "epoch {:>2}  loss {:.10e}  auc {:.4}  recall {:.4}  acc {:.4}  ({:.2}s)",
                    r.epoch, r.train_loss, r.val_auc, r.val_recall, r.val_accuracy, r.seconds
                );
            }
            println!("total train time {:.1}s", t0.elapsed().as_secs_f64());
        }
        Err(e) => println!("error: {e}"),
    }
}
