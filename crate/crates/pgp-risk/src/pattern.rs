//! Behavior patterns: standardized price windows and nearest-neighbor
//! training sets.
//!
//! Every window of `l` consecutive prices is reduced to a scale-free profile
//! by subtracting the window mean and dividing by the window standard
//! deviation (`l - 1` divisor). The training set for a forecast at time `t`
//! pairs the `k` historical profiles nearest to the current one (Euclidean
//! distance, ties broken toward earlier history) with the standardized value
//! each was followed by.

use thiserror::Error;

use crate::series::PriceSeries;

/// A window counts as degenerate when its standard deviation falls below
/// this fraction of `max(1, |mean|)`; dividing by it would manufacture
/// garbage profiles out of rounding noise.
pub const DEGENERACY_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PatternError {
    #[error("window of length {0} is too short to standardize (need >= 2)")]
    WindowTooShort(usize),
    #[error("window starting at index {start} is degenerate (std {std:e} below threshold)")]
    DegenerateWindow { start: usize, std: f64 },
    #[error("pattern lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error(
        "insufficient history: {available} usable candidate windows, need {needed}"
    )]
    InsufficientHistory { needed: usize, available: usize },
    #[error("invalid training set: {0}")]
    InvalidTrainingSet(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// An `l`-length standardized window plus what undoes the standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    values: Vec<f64>,
    source_start: usize,
    window_mean: f64,
    window_std: f64,
}

impl Pattern {
    /// Assembles a pattern from parts. `standardize_window` is the canonical
    /// producer; this exists for synthetic construction in tests and for the
    /// reference implementations.
    pub fn from_parts(
        values: Vec<f64>,
        source_start: usize,
        window_mean: f64,
        window_std: f64,
    ) -> Result<Self, PatternError> {
        if values.len() < 2 {
            return Err(PatternError::WindowTooShort(values.len()));
        }
        if !(window_std > 0.0 && window_std.is_finite()) {
            return Err(PatternError::InvalidTrainingSet("window_std must be > 0"));
        }
        Ok(Self {
            values,
            source_start,
            window_mean,
            window_std,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Standardized window values (zero mean, unit standard deviation).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the window's first price in the source series.
    pub fn source_start(&self) -> usize {
        self.source_start
    }

    /// Window mean, in price units.
    pub fn window_mean(&self) -> f64 {
        self.window_mean
    }

    /// Window standard deviation, in price units.
    pub fn window_std(&self) -> f64 {
        self.window_std
    }
}

fn window_moments(window: &[f64]) -> (f64, f64) {
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let ss = window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn is_degenerate(mean: f64, std: f64) -> bool {
    !(std > DEGENERACY_REL_TOL * mean.abs().max(1.0))
}

/// Standardizes `l >= 2` consecutive prices to zero mean and unit standard
/// deviation, remembering the mean and deviation for de-standardization.
///
/// `source_start` records where the window begins in its source series.
pub fn standardize_window(window: &[f64], source_start: usize) -> Result<Pattern, PatternError> {
    if window.len() < 2 {
        return Err(PatternError::WindowTooShort(window.len()));
    }
    let (mean, std) = window_moments(window);
    if is_degenerate(mean, std) {
        return Err(PatternError::DegenerateWindow {
            start: source_start,
            std,
        });
    }
    let values = window.iter().map(|v| (v - mean) / std).collect();
    Ok(Pattern {
        values,
        source_start,
        window_mean: mean,
        window_std: std,
    })
}

/// Euclidean distance between two standardized profiles.
pub fn pattern_distance(a: &Pattern, b: &Pattern) -> Result<f64, PatternError> {
    if a.len() != b.len() {
        return Err(PatternError::LengthMismatch(a.len(), b.len()));
    }
    let ss = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>();
    Ok(ss.sqrt())
}

/// The information set for one forecast: `k` nearest historical profiles,
/// the standardized value that followed each, and the query profile.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<Pattern>,
    targets: Vec<f64>,
    query: Pattern,
    distances: Vec<f64>,
}

impl TrainingSet {
    /// Validating constructor for synthetic sets; `build_training_set` is
    /// the canonical producer.
    pub fn from_parts(
        inputs: Vec<Pattern>,
        targets: Vec<f64>,
        query: Pattern,
        distances: Vec<f64>,
    ) -> Result<Self, PatternError> {
        if inputs.is_empty() {
            return Err(PatternError::InvalidTrainingSet("no inputs"));
        }
        if inputs.len() != targets.len() || inputs.len() != distances.len() {
            return Err(PatternError::InvalidTrainingSet(
                "inputs, targets, distances must have equal length",
            ));
        }
        if inputs.iter().any(|p| p.len() != query.len()) {
            return Err(PatternError::InvalidTrainingSet(
                "input length differs from query length",
            ));
        }
        for w in distances.windows(2) {
            if !(w[0] <= w[1]) {
                return Err(PatternError::InvalidTrainingSet(
                    "distances must be non-decreasing",
                ));
            }
        }
        for (pair, d) in inputs.windows(2).zip(distances.windows(2)) {
            if d[0] == d[1] && pair[0].source_start() > pair[1].source_start() {
                return Err(PatternError::InvalidTrainingSet(
                    "equal distances must order by source_start",
                ));
            }
        }
        Ok(Self {
            inputs,
            targets,
            query,
            distances,
        })
    }

    /// Neighbor count `k`.
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Pattern dimension `l`.
    pub fn dim(&self) -> usize {
        self.query.len()
    }

    pub fn inputs(&self) -> &[Pattern] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn query(&self) -> &Pattern {
        &self.query
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }
}

/// Builds the training set from the price prefix: standardizes the current
/// window, scans every historical window with an observed next value, and
/// keeps the `k` nearest non-degenerate ones.
///
/// The scan is a plain exhaustive pass; at the series lengths this method
/// targets, an index structure buys nothing and the linear version doubles
/// as its own reference.
pub fn build_training_set(
    prices: &PriceSeries,
    window_len: usize,
    neighbors: usize,
) -> Result<TrainingSet, PatternError> {
    if window_len < 2 {
        return Err(PatternError::InvalidParameter("window_len must be >= 2"));
    }
    if neighbors == 0 {
        return Err(PatternError::InvalidParameter("neighbors must be >= 1"));
    }
    let values = prices.prices();
    let t = values.len();
    let l = window_len;
    if t < 2 * l {
        return Err(PatternError::InsufficientHistory {
            needed: neighbors,
            available: 0,
        });
    }
    // Query window covers the last l prices; candidates are every earlier
    // window start whose next value is still inside the known prefix. The
    // query start itself can never be a candidate (its next value is the
    // unknown future), so overlap with the query is otherwise allowed.
    let query_start = t - l;
    let query = standardize_window(&values[query_start..], query_start)?;

    let mut candidates: Vec<(f64, Pattern, f64)> = Vec::with_capacity(t - l);
    for start in 0..query_start {
        let window = &values[start..start + l];
        let pattern = match standardize_window(window, start) {
            Ok(p) => p,
            Err(PatternError::DegenerateWindow { .. }) => continue,
            Err(e) => return Err(e),
        };
        let distance = pattern_distance(&query, &pattern)?;
        let target = (values[start + l] - pattern.window_mean()) / pattern.window_std();
        candidates.push((distance, pattern, target));
    }
    if candidates.len() < neighbors {
        return Err(PatternError::InsufficientHistory {
            needed: neighbors,
            available: candidates.len(),
        });
    }
    candidates.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| a.1.source_start().cmp(&b.1.source_start()))
    });
    candidates.truncate(neighbors);

    let mut inputs = Vec::with_capacity(neighbors);
    let mut targets = Vec::with_capacity(neighbors);
    let mut distances = Vec::with_capacity(neighbors);
    for (distance, pattern, target) in candidates {
        distances.push(distance);
        targets.push(target);
        inputs.push(pattern);
    }
    TrainingSet::from_parts(inputs, targets, query, distances)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizes_a_symmetric_progression() {
        let p = standardize_window(&[1.0, 2.0, 3.0], 0).unwrap();
        assert_eq!(p.values(), &[-1.0, 0.0, 1.0]);
        assert_eq!(p.window_mean(), 2.0);
        assert_eq!(p.window_std(), 1.0);
    }

    #[test]
    fn standardization_is_scale_free() {
        let p = standardize_window(&[10.0, 20.0, 30.0], 0).unwrap();
        assert_eq!(p.values(), &[-1.0, 0.0, 1.0]);
        assert_eq!(p.window_std(), 10.0);
    }

    #[test]
    fn constant_window_is_degenerate() {
        assert!(matches!(
            standardize_window(&[5.0, 5.0, 5.0], 7),
            Err(PatternError::DegenerateWindow { start: 7, .. })
        ));
    }

    #[test]
    fn standardized_moments_hold_tightly() {
        let window = [104.2, 101.9, 99.95, 103.3, 107.8, 102.2, 101.05];
        let p = standardize_window(&window, 0).unwrap();
        let (mean, std) = window_moments(p.values());
        assert!(mean.abs() < 1e-10);
        assert!((std - 1.0).abs() < 1e-10);
    }

    #[test]
    fn distance_identity_symmetry_and_value() {
        let a = standardize_window(&[1.0, 2.0, 3.0], 0).unwrap();
        let b = standardize_window(&[3.0, 2.0, 1.0], 1).unwrap();
        assert_eq!(pattern_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(
            pattern_distance(&a, &b).unwrap(),
            pattern_distance(&b, &a).unwrap()
        );
        // values (-1,0,1) vs (1,0,-1): distance sqrt(8)
        assert!((pattern_distance(&a, &b).unwrap() - 8.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn distance_rejects_length_mismatch() {
        let a = standardize_window(&[1.0, 2.0, 3.0], 0).unwrap();
        let b = standardize_window(&[1.0, 2.0, 3.0, 4.0], 0).unwrap();
        assert!(matches!(
            pattern_distance(&a, &b),
            Err(PatternError::LengthMismatch(3, 4))
        ));
    }

    #[test]
    fn exact_repetition_is_found_at_distance_zero() {
        // Two copies of the same 2l-block, l = 3: the window l steps before
        // the query is identical to it, and its observed continuation is the
        // standardized value right after that window.
        let block = [10.0, 11.0, 9.0, 12.0, 10.5, 11.5];
        let mut prices = block.to_vec();
        prices.extend_from_slice(&block);
        let series = PriceSeries::from_prices(prices.clone()).unwrap();
        let ts = build_training_set(&series, 3, 1).unwrap();
        assert_eq!(ts.len(), 1);
        assert!(ts.distances()[0] <= 1e-12);
        let hit = &ts.inputs()[0];
        assert_eq!(hit.source_start(), 3);
        let expected_target = (prices[6] - hit.window_mean()) / hit.window_std();
        assert!((ts.targets()[0] - expected_target).abs() < 1e-12);
    }

    #[test]
    fn too_many_neighbors_is_insufficient_history() {
        let series =
            PriceSeries::from_prices(vec![1.0, 2.0, 4.0, 3.0, 5.0, 4.5, 6.0, 5.5]).unwrap();
        // l = 3, t = 8: candidate starts 0..=4, so k = 6 cannot be met.
        match build_training_set(&series, 3, 6) {
            Err(PatternError::InsufficientHistory { needed, available }) => {
                assert_eq!(needed, 6);
                assert_eq!(available, 5);
            }
            other => panic!("expected InsufficientHistory, got {other:?}"),
        }
    }

    #[test]
    fn short_prefix_is_insufficient_history() {
        let series = PriceSeries::from_prices(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(matches!(
            build_training_set(&series, 3, 1),
            Err(PatternError::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn degenerate_query_is_a_hard_error() {
        let series =
            PriceSeries::from_prices(vec![1.0, 2.0, 3.0, 4.0, 7.0, 7.0, 7.0, 7.0]).unwrap();
        assert!(matches!(
            build_training_set(&series, 4, 1),
            Err(PatternError::DegenerateWindow { .. })
        ));
    }

    #[test]
    fn degenerate_candidates_are_skipped() {
        // A flat stretch early on must be skipped, not crash the scan.
        let series = PriceSeries::from_prices(vec![
            5.0, 5.0, 5.0, 5.0, 1.0, 2.0, 4.0, 3.0, 5.0, 4.5, 6.0, 5.5,
        ])
        .unwrap();
        let ts = build_training_set(&series, 3, 2).unwrap();
        assert_eq!(ts.len(), 2);
        for p in ts.inputs() {
            let (_, std) = window_moments(p.values());
            assert!(std.is_finite());
        }
    }

    #[test]
    fn distances_are_sorted_and_query_start_is_excluded() {
        let prices: Vec<f64> = (0..60)
            .map(|i| 100.0 + ((i * 37 + 11) % 17) as f64 * 0.7 + (i % 5) as f64)
            .collect();
        let series = PriceSeries::from_prices(prices).unwrap();
        let ts = build_training_set(&series, 5, 10).unwrap();
        let query_start = series.len() - 5;
        for w in ts.distances().windows(2) {
            assert!(w[0] <= w[1]);
        }
        for p in ts.inputs() {
            assert!(p.source_start() + 5 <= series.len() - 1);
            assert_ne!(p.source_start(), query_start);
        }
    }

    #[test]
    fn ties_prefer_earlier_history() {
        // Period-6 series: every window 6 apart is bit-identical, so the
        // query has many distance-0 matches; earlier starts must win.
        let block = [10.0, 12.0, 9.0, 11.0, 10.5, 12.5];
        let mut prices = Vec::new();
        for _ in 0..4 {
            prices.extend_from_slice(&block);
        }
        let series = PriceSeries::from_prices(prices).unwrap();
        let ts = build_training_set(&series, 3, 3).unwrap();
        assert!(ts.distances().iter().all(|&d| d <= 1e-12));
        let starts: Vec<usize> = ts.inputs().iter().map(|p| p.source_start()).collect();
        assert_eq!(starts, vec![3, 9, 15]);
    }

    #[test]
    fn affine_rescaling_preserves_patterns_and_selection() {
        let prices: Vec<f64> = (0..80)
            .map(|i| 50.0 + (i as f64 * 0.7).sin() * 8.0 + (i as f64 * 0.23).cos() * 3.0)
            .collect();
        let scaled: Vec<f64> = prices.iter().map(|v| 3.5 * v + 20.0).collect();
        let a = build_training_set(&PriceSeries::from_prices(prices).unwrap(), 6, 8).unwrap();
        let b = build_training_set(&PriceSeries::from_prices(scaled).unwrap(), 6, 8).unwrap();
        let starts_a: Vec<usize> = a.inputs().iter().map(|p| p.source_start()).collect();
        let starts_b: Vec<usize> = b.inputs().iter().map(|p| p.source_start()).collect();
        assert_eq!(starts_a, starts_b);
        for (da, db) in a.distances().iter().zip(b.distances()) {
            assert!((da - db).abs() < 1e-9);
        }
        for (ya, yb) in a.targets().iter().zip(b.targets()) {
            assert!((ya - yb).abs() < 1e-9);
        }
    }
}
