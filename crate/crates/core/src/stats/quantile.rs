use serde::{Deserialize, Serialize};

/// Lower quartile, median and upper quartile of one stratum cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartileSummary {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    /// Number of defined observations behind the cell.
    pub count: usize,
}

/// Identifier recorded in run manifests.
pub const QUANTILE_METHOD: &str = "linear interpolation between closest ranks (R-7)";

/// Quantile of already-sorted values by linear interpolation at position
/// `(n - 1) * p`.
pub fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let (a, b) = (sorted[lo], sorted[hi]);
    let value = a + (pos - lo as f64) * (b - a);
    value.clamp(a, b)
}

/// Quartiles of a multiset. `None` for an empty input, which callers treat as
/// an empty stratum.
pub fn quantiles(values: &[f64]) -> Option<QuartileSummary> {
    let mut sorted = values.to_vec();
    quantiles_in_place(&mut sorted)
}

/// Like [`quantiles`] but sorts the caller's buffer.
pub fn quantiles_in_place(values: &mut [f64]) -> Option<QuartileSummary> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable_by(f64::total_cmp);
    Some(QuartileSummary {
        q1: sorted_quantile(values, 0.25),
        q2: sorted_quantile(values, 0.5),
        q3: sorted_quantile(values, 0.75),
        count: values.len(),
    })
}
