//! Temporary: convergence check across all trainable benchmarks.

use exalign::gcn::{accuracy, train, GcnModel, TrainConfig};
use exalign::graph::{
    gen_ba_shapes, gen_infection, gen_mixmotif, gen_tree_grid, GenConfig,
};

fn main() -> exalign::Result<()> {
    let mix_cfg = GenConfig {
        seed: 1,
        mix_gamma: 0.0,
        ..GenConfig::default()
    };
    for (name, ds) in [
        ("ba-shapes", gen_ba_shapes(&GenConfig { seed: 1, ..GenConfig::default() })?),
        ("tree-grid", gen_tree_grid(&GenConfig { seed: 1, ..GenConfig::default() })?),
        ("infection", gen_infection(&GenConfig { seed: 1, ..GenConfig::default() })?),
        ("mixmotif", gen_mixmotif(&mix_cfg)?),
    ] {
        for lr in [0.005, 0.01] {
            for seed in [1u64, 2, 3] {
                let mut model =
                    GcnModel::new(ds.task, ds.feature_dim(), ds.num_classes, seed);
                let cfg = TrainConfig {
                    learning_rate: lr,
                    epochs: 400,
                    seed,
                    ..TrainConfig::default()
                };
                let t0 = std::time::Instant::now();
                let hist = train(&mut model, &ds, &cfg)?;
                let secs = t0.elapsed().as_secs_f64();
                let first = hist.test_acc.iter().position(|&a| a >= 0.95);
                let best = hist.test_acc.iter().cloned().fold(0.0f64, f64::max);
                let last = *hist.test_acc.last().unwrap();
                // Test accuracy of the delivered (best-train-epoch) weights.
                let delivered = accuracy(&model, &ds, &ds.split.test)?;
                println!(
                    "{name} lr={lr} seed={seed}: delivered {delivered:.3} best {best:.3} last {last:.3} first95 {first:?} ({secs:.0}s)"
                );
            }
        }
    }
    Ok(())
}
