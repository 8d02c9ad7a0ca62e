//! Shared fixtures for the integration suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use racorn::PriceRelativeSeries;

/// A seeded random-walk relatives panel: iid log-steps, entries near 1.
pub fn random_walk_relatives(seed: u64, periods: usize, assets: usize) -> PriceRelativeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..periods)
        .map(|_| {
            (0..assets)
                .map(|_| rng.random_range(-0.04..0.04f64).exp())
                .collect()
        })
        .collect();
    let names = (0..assets).map(|i| format!("A{i}")).collect();
    PriceRelativeSeries::from_rows(rows, names).expect("fixture is valid")
}

/// The fixture with one row rescaled, still a valid panel.
pub fn perturb_row(series: &PriceRelativeSeries, row: usize, factor: f64) -> PriceRelativeSeries {
    let mut rows: Vec<Vec<f64>> = series.relatives().to_vec();
    for v in &mut rows[row] {
        *v *= factor;
    }
    PriceRelativeSeries::new(
        rows,
        series.asset_names().to_vec(),
        series.period_labels().to_vec(),
    )
    .expect("perturbed fixture is valid")
}
