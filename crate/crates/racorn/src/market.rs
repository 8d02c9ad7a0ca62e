//! Market data: closing-price panels, price relatives, and market windows.
//!
//! A price relative is the ratio of consecutive closing prices of one asset,
//! i.e. the per-period growth factor. All pattern matching and optimization
//! downstream runs on price relatives; closing prices only exist at the
//! ingestion boundary.

use crate::error::{Error, Result};

/// A panel of strictly positive closing prices: one row per trading period,
/// one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    closes: Vec<Vec<f64>>,
    asset_names: Vec<String>,
    period_labels: Vec<String>,
}

impl PriceSeries {
    /// Build a validated panel. Requires at least two rows, rectangular shape,
    /// and every close strictly positive and finite.
    pub fn new(
        closes: Vec<Vec<f64>>,
        asset_names: Vec<String>,
        period_labels: Vec<String>,
    ) -> Result<Self> {
        if closes.len() < 2 {
            return Err(Error::InvalidSeries(format!(
                "need at least 2 price rows, got {}",
                closes.len()
            )));
        }
        let m = asset_names.len();
        if m == 0 {
            return Err(Error::InvalidSeries("no assets".into()));
        }
        if period_labels.len() != closes.len() {
            return Err(Error::InvalidSeries(format!(
                "{} period labels for {} rows",
                period_labels.len(),
                closes.len()
            )));
        }
        for (t, row) in closes.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidSeries(format!(
                    "row {t} has {} entries, expected {m}",
                    row.len()
                )));
            }
            for (i, &p) in row.iter().enumerate() {
                if !(p.is_finite() && p > 0.0) {
                    return Err(Error::InvalidSeries(format!(
                        "close at row {t}, column {i} must be a positive finite number, got {p}"
                    )));
                }
            }
        }
        Ok(Self {
            closes,
            asset_names,
            period_labels,
        })
    }

    /// Convenience constructor that labels rows "1".."n".
    pub fn from_rows(closes: Vec<Vec<f64>>, asset_names: Vec<String>) -> Result<Self> {
        let labels = (1..=closes.len()).map(|t| t.to_string()).collect();
        Self::new(closes, asset_names, labels)
    }

    pub fn num_periods(&self) -> usize {
        self.closes.len()
    }

    pub fn num_assets(&self) -> usize {
        self.asset_names.len()
    }

    pub fn closes(&self) -> &[Vec<f64>] {
        &self.closes
    }

    pub fn asset_names(&self) -> &[String] {
        &self.asset_names
    }

    pub fn period_labels(&self) -> &[String] {
        &self.period_labels
    }
}

/// A panel of price relatives: `relatives[t][i]` is the growth factor of
/// asset `i` over period `t`. Every entry is strictly positive and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceRelativeSeries {
    relatives: Vec<Vec<f64>>,
    asset_names: Vec<String>,
    period_labels: Vec<String>,
}

impl PriceRelativeSeries {
    pub fn new(
        relatives: Vec<Vec<f64>>,
        asset_names: Vec<String>,
        period_labels: Vec<String>,
    ) -> Result<Self> {
        if relatives.is_empty() {
            return Err(Error::InvalidSeries("need at least 1 relative row".into()));
        }
        let m = asset_names.len();
        if m == 0 {
            return Err(Error::InvalidSeries("no assets".into()));
        }
        if period_labels.len() != relatives.len() {
            return Err(Error::InvalidSeries(format!(
                "{} period labels for {} rows",
                period_labels.len(),
                relatives.len()
            )));
        }
        for (t, row) in relatives.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidSeries(format!(
                    "row {t} has {} entries, expected {m}",
                    row.len()
                )));
            }
            for (i, &x) in row.iter().enumerate() {
                if !(x.is_finite() && x > 0.0) {
                    return Err(Error::InvalidSeries(format!(
                        "relative at row {t}, column {i} must be a positive finite number, got {x}"
                    )));
                }
            }
        }
        Ok(Self {
            relatives,
            asset_names,
            period_labels,
        })
    }

    /// Convenience constructor that labels rows "1".."n".
    pub fn from_rows(relatives: Vec<Vec<f64>>, asset_names: Vec<String>) -> Result<Self> {
        let labels = (1..=relatives.len()).map(|t| t.to_string()).collect();
        Self::new(relatives, asset_names, labels)
    }

    pub fn num_periods(&self) -> usize {
        self.relatives.len()
    }

    pub fn num_assets(&self) -> usize {
        self.asset_names.len()
    }

    pub fn relatives(&self) -> &[Vec<f64>] {
        &self.relatives
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.relatives[t]
    }

    pub fn asset_names(&self) -> &[String] {
        &self.asset_names
    }

    pub fn period_labels(&self) -> &[String] {
        &self.period_labels
    }

    /// The market window for period `anchor`: the `width` rows immediately
    /// preceding it, flattened chronologically with each row's assets
    /// contiguous. Requires `anchor >= width` and `anchor <= n`.
    pub fn window(&self, anchor: usize, width: usize) -> Result<MarketWindow> {
        if width == 0 {
            return Err(Error::InvalidSeries("window width must be >= 1".into()));
        }
        if anchor < width || anchor > self.num_periods() {
            return Err(Error::WindowOutOfRange { anchor, width });
        }
        let mut flat = Vec::with_capacity(width * self.num_assets());
        for row in &self.relatives[anchor - width..anchor] {
            flat.extend_from_slice(row);
        }
        Ok(MarketWindow {
            flat,
            anchor,
            width,
        })
    }

    /// Keep only the first `periods` rows. Used by no-look-ahead checks.
    pub fn truncated(&self, periods: usize) -> Result<PriceRelativeSeries> {
        PriceRelativeSeries::new(
            self.relatives[..periods].to_vec(),
            self.asset_names.clone(),
            self.period_labels[..periods].to_vec(),
        )
    }
}

/// A flattened market window: the `width` price-relative rows preceding
/// period `anchor`, concatenated in chronological order. Owns its storage.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketWindow {
    flat: Vec<f64>,
    anchor: usize,
    width: usize,
}

impl MarketWindow {
    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

/// Derive price relatives from closing prices:
/// `relatives[t][i] = closes[t+1][i] / closes[t][i]`.
///
/// The relative row `t` carries the period label of the close row it ends at
/// (`t+1`), so labels line up with the period whose growth the row describes.
pub fn derive_relatives(prices: &PriceSeries) -> Result<PriceRelativeSeries> {
    let n = prices.num_periods() - 1;
    let m = prices.num_assets();
    let mut relatives = Vec::with_capacity(n);
    for t in 0..n {
        let mut row = Vec::with_capacity(m);
        for i in 0..m {
            row.push(prices.closes[t + 1][i] / prices.closes[t][i]);
        }
        relatives.push(row);
    }
    PriceRelativeSeries::new(
        relatives,
        prices.asset_names.clone(),
        prices.period_labels[1..].to_vec(),
    )
}
