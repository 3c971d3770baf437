//! Seeded generators for planted-redundancy instances: random base data
//! with duplicated feature groups and duplicated samples, so nontrivial
//! colorings are guaranteed while labels stay consistent with an exact
//! reduction.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::sparse::SparseMatrix;

/// Shape of a planted instance before duplication.
#[derive(Debug, Clone, Copy)]
pub struct PlantedConfig {
    pub base_rows: usize,
    pub base_cols: usize,
    /// Upper bound (inclusive) on per-column duplication; at least one
    /// column group is always duplicated.
    pub max_col_copies: usize,
    /// Upper bound (inclusive) on per-row duplication; at least one row
    /// group is always duplicated.
    pub max_row_copies: usize,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            base_rows: 12,
            base_cols: 5,
            max_col_copies: 3,
            max_row_copies: 3,
        }
    }
}

fn duplicated_counts(rng: &mut ChaCha8Rng, n: usize, max_copies: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=max_copies)).collect();
    if counts.iter().all(|&c| c == 1) {
        counts[0] = 2.max(max_copies.min(2));
    }
    counts
}

fn build(
    rng: &mut ChaCha8Rng,
    cfg: &PlantedConfig,
    base_targets: &[f64],
) -> (SparseMatrix, Vec<f64>) {
    let base: Vec<Vec<f64>> = (0..cfg.base_rows)
        .map(|_| {
            (0..cfg.base_cols)
                .map(|_| (rng.gen_range(-20i32..=20) as f64) / 4.0)
                .collect()
        })
        .collect();
    let col_copies = duplicated_counts(rng, cfg.base_cols, cfg.max_col_copies);
    let row_copies = duplicated_counts(rng, cfg.base_rows, cfg.max_row_copies);

    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (i, base_row) in base.iter().enumerate() {
        let widened: Vec<f64> = base_row
            .iter()
            .zip(&col_copies)
            .flat_map(|(&v, &c)| std::iter::repeat(v).take(c))
            .collect();
        for _ in 0..row_copies[i] {
            rows.push(widened.clone());
            targets.push(base_targets[i]);
        }
    }
    (
        SparseMatrix::from_dense(&rows).expect("generated rows are rectangular"),
        targets,
    )
}

/// Regression instance: duplicated rows share their target, so merged
/// samples reduce exactly.
pub fn planted_regression(seed: u64, cfg: &PlantedConfig) -> (SparseMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base_targets: Vec<f64> = (0..cfg.base_rows)
        .map(|_| (rng.gen_range(-12i32..=12) as f64) / 2.0)
        .collect();
    build(&mut rng, cfg, &base_targets)
}

/// Classification instance with labels in `0..n_classes`. With
/// `flip_labels`, some duplicated rows get a different label, exercising
/// per-label merging (several reduced rows per sample color).
pub fn planted_classification(
    seed: u64,
    cfg: &PlantedConfig,
    n_classes: usize,
    flip_labels: bool,
) -> (SparseMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base_targets: Vec<f64> = (0..cfg.base_rows)
        .map(|_| rng.gen_range(0..n_classes) as f64)
        .collect();
    let (x, mut y) = build(&mut rng, cfg, &base_targets);
    if flip_labels {
        // Flip a few labels; duplicated feature rows still merge, the
        // per-label split keeps the reduction exact.
        let flips = (y.len() / 6).max(1);
        for _ in 0..flips {
            let i = rng.gen_range(0..y.len());
            y[i] = ((y[i] as usize + 1) % n_classes) as f64;
        }
    }
    (x, y)
}
