//! Pattern matching: find historical periods whose market window correlates
//! with the current window above a threshold.
//!
//! Index convention. Periods are zero-based rows of a [`PriceRelativeSeries`].
//! With one-based period numbers the candidate bound is `w < j < t`; after the
//! shift both the anchor and the candidates drop by one, so in zero-based form
//! a candidate `j` satisfies `w <= j < t`. The normative statement is the
//! same in both conventions: a matched period's own row and its full
//! `w`-row preceding window lie strictly in the past of the anchor.
//!
//! Correlation is computed on raw relatives (not log relatives): the window
//! vectors are compared exactly as stored. This matches the set-builder over
//! flattened windows; any discrepancy against OLPS-toolbox outputs should be
//! checked against this choice first.

use crate::error::{Error, Result};
use crate::market::PriceRelativeSeries;

/// Pearson correlation coefficient of two equal-length vectors.
///
/// Returns the degenerate sentinel `0.0` when either vector has zero
/// variance: a flat window carries no pattern information, and with the
/// strict `> rho` rule and non-negative thresholds it therefore never
/// matches.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::CorrelationInput {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Ok(0.0);
    }
    Ok((cov / (var_a * var_b).sqrt()).clamp(-1.0, 1.0))
}

/// The periods whose market window correlates with the anchor's window
/// strictly above `threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSet {
    pub anchor: usize,
    pub width: usize,
    pub threshold: f64,
    /// Zero-based matched periods, strictly increasing. Each index `j`
    /// satisfies `width <= j < anchor`.
    pub indices: Vec<usize>,
}

impl MatchSet {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    /// The matched price-relative rows, in index order.
    pub fn rows<'a>(&self, series: &'a PriceRelativeSeries) -> Vec<&'a [f64]> {
        self.indices.iter().map(|&j| series.row(j)).collect()
    }
}

/// Scan all admissible periods `j` and keep those whose window correlates
/// with the anchor's window strictly above `threshold`.
///
/// An empty result is not an error; the ensemble layer falls back to the
/// uniform portfolio.
pub fn find_matches(
    series: &PriceRelativeSeries,
    anchor: usize,
    width: usize,
    threshold: f64,
) -> Result<MatchSet> {
    let correlations = window_correlations(series, anchor, width)?;
    let indices = correlations
        .into_iter()
        .filter(|&(_, c)| c > threshold)
        .map(|(j, _)| j)
        .collect();
    Ok(MatchSet {
        anchor,
        width,
        threshold,
        indices,
    })
}

/// Correlation of every admissible candidate window against the anchor's
/// window, in ascending candidate order. Shared by all thresholds for a
/// given `(anchor, width)`, so the ensemble computes it once per width.
pub(crate) fn window_correlations(
    series: &PriceRelativeSeries,
    anchor: usize,
    width: usize,
) -> Result<Vec<(usize, f64)>> {
    let current = series.window(anchor, width)?;
    let mut out = Vec::new();
    for j in width..anchor {
        let candidate = series.window(j, width)?;
        let c = pearson(candidate.flat(), current.flat())?;
        out.push((j, c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn self_correlation_is_one() {
        let a = [1.0, 1.1, 0.9, 1.2];
        assert_eq!(pearson(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn perfect_anticorrelation() {
        assert_eq!(pearson(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn zero_variance_sentinel() {
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn length_errors() {
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    /// Two alternating rows: window width 1 makes every same-parity candidate
    /// correlate +1 with the anchor window and every opposite-parity
    /// candidate correlate -1. Enumerated by hand: for anchor 5 the
    /// candidates are j in {1,2,3,4} with windows rows 0..4; rows 0,2,4 equal
    /// (1.1,0.9) and rows 1,3 equal (0.95,1.05), so pearson is +1 for j in
    /// {1,3} and -1 for j in {2,4}.
    #[test]
    fn periodic_fixture_matches_by_parity() {
        let a = vec![1.1, 0.9];
        let b = vec![0.95, 1.05];
        let series = PriceRelativeSeries::from_rows(
            vec![a.clone(), b.clone(), a.clone(), b.clone(), a.clone(), b],
            vec!["X".into(), "Y".into()],
        )
        .unwrap();
        let ms = find_matches(&series, 5, 1, 0.5).unwrap();
        assert_eq!(ms.indices, vec![1, 3]);
        // anchor 4: window is row 3 = B; same-parity candidates j in {2, 4}
        // but 4 is excluded (j < anchor), so {2}.
        let ms4 = find_matches(&series, 4, 1, 0.5).unwrap();
        assert_eq!(ms4.indices, vec![2]);
    }

    #[test]
    fn earliest_admissible_anchor_is_empty() {
        let series = PriceRelativeSeries::from_rows(
            vec![vec![1.0, 1.1], vec![1.2, 0.9], vec![0.8, 1.0], vec![1.05, 1.0]],
            vec!["X".into(), "Y".into()],
        )
        .unwrap();
        for w in 1..=3usize {
            let ms = find_matches(&series, w, w, 0.0).unwrap();
            assert!(ms.is_empty());
        }
    }

    #[test]
    fn anchor_before_window_errors() {
        let series = PriceRelativeSeries::from_rows(
            vec![vec![1.0], vec![1.2], vec![0.8]],
            vec!["X".into()],
        )
        .unwrap();
        assert!(find_matches(&series, 1, 2, 0.0).is_err());
    }

    /// Brute-force oracle: independent pearson and candidate enumeration.
    fn brute_force_matches(
        series: &PriceRelativeSeries,
        anchor: usize,
        width: usize,
        threshold: f64,
    ) -> Vec<usize> {
        let flat = |j: usize| -> Vec<f64> {
            (j - width..j)
                .flat_map(|r| series.row(r).to_vec())
                .collect()
        };
        let cur = flat(anchor);
        let mut out = Vec::new();
        for j in width..anchor {
            let cand = flat(j);
            let n = cand.len() as f64;
            let ma = cand.iter().sum::<f64>() / n;
            let mb = cur.iter().sum::<f64>() / n;
            let va: f64 = cand.iter().map(|x| (x - ma) * (x - ma)).sum();
            let vb: f64 = cur.iter().map(|x| (x - mb) * (x - mb)).sum();
            let cov: f64 = cand
                .iter()
                .zip(&cur)
                .map(|(x, y)| (x - ma) * (y - mb))
                .sum();
            let c = if va == 0.0 || vb == 0.0 {
                0.0
            } else {
                cov / (va * vb).sqrt()
            };
            if c > threshold {
                out.push(j);
            }
        }
        out
    }

    fn pseudo_random_walk(seed: u64, periods: usize, assets: usize) -> PriceRelativeSeries {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..periods)
            .map(|_| {
                (0..assets)
                    .map(|_| (rng.random_range(-0.03..0.03f64)).exp())
                    .collect()
            })
            .collect();
        let names = (0..assets).map(|i| format!("A{i}")).collect();
        PriceRelativeSeries::from_rows(rows, names).unwrap()
    }

    #[test]
    fn high_threshold_on_noise_is_near_empty() {
        let series = pseudo_random_walk(7, 60, 30);
        let ms = find_matches(&series, 59, 5, 0.999).unwrap();
        let oracle = brute_force_matches(&series, 59, 5, 0.999);
        assert_eq!(ms.indices, oracle);
        assert!(ms.len() <= 1, "expected near-empty set, got {}", ms.len());
    }

    #[test]
    fn agrees_with_brute_force_across_anchors() {
        let series = pseudo_random_walk(11, 40, 3);
        for w in 1..=4usize {
            for anchor in w..=series.num_periods() {
                for rho in [0.0, 0.3, 0.7] {
                    let ms = find_matches(&series, anchor, w, rho).unwrap();
                    assert_eq!(ms.indices, brute_force_matches(&series, anchor, w, rho));
                }
            }
        }
    }

    #[test]
    fn threshold_monotonicity() {
        let series = pseudo_random_walk(3, 50, 4);
        let loose = find_matches(&series, 49, 2, 0.1).unwrap();
        let tight = find_matches(&series, 49, 2, 0.6).unwrap();
        assert!(tight.indices.iter().all(|j| loose.indices.contains(j)));
    }

    proptest! {
        #[test]
        fn pearson_symmetric(v in proptest::collection::vec((0.5f64..2.0, 0.5f64..2.0), 2..20)) {
            let a: Vec<f64> = v.iter().map(|p| p.0).collect();
            let b: Vec<f64> = v.iter().map(|p| p.1).collect();
            let ab = pearson(&a, &b).unwrap();
            let ba = pearson(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-14);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn pearson_affine_invariant(
            v in proptest::collection::vec((0.5f64..2.0, 0.5f64..2.0), 3..20),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
        ) {
            let a: Vec<f64> = v.iter().map(|p| p.0).collect();
            let b: Vec<f64> = v.iter().map(|p| p.1).collect();
            let mapped: Vec<f64> = a.iter().map(|x| scale * x + shift).collect();
            let base = pearson(&a, &b).unwrap();
            // Skip degenerate draws: affine invariance is stated for
            // non-degenerate inputs.
            let va: f64 = {
                let m = a.iter().sum::<f64>() / a.len() as f64;
                a.iter().map(|x| (x - m) * (x - m)).sum()
            };
            prop_assume!(va > 1e-9);
            let moved = pearson(&mapped, &b).unwrap();
            prop_assert!((base - moved).abs() <= 1e-10, "{base} vs {moved}");
        }
    }
}
