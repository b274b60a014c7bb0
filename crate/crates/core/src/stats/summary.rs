use std::collections::HashMap;
use std::fmt;

use super::{Metric, StatsError, StatsStore};

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub object: String,
    pub metric: Metric,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// nearest-rank
    pub p95: f64,
}

impl fmt::Display for SummaryRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} count={} min={:.6} max={:.6} mean={:.6} p95={:.6}",
            self.object, self.metric, self.count, self.min, self.max, self.mean, self.p95
        )
    }
}

fn row(object: String, metric: Metric, mut values: Vec<f64>) -> Option<SummaryRow> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    // 1-based rank ceil(0.95 n), in integers to stay exact
    let rank = (95 * n).div_ceil(100).max(1);
    let mean = values.iter().sum::<f64>() / n as f64;
    Some(SummaryRow {
        object,
        metric,
        count: n,
        min: values[0],
        max: values[n - 1],
        // clamp guards against summation rounding
        mean: mean.clamp(values[0], values[n - 1]),
        p95: values[rank - 1],
    })
}

/// Summary over every sample of `metric` whose object matches the glob
/// `pattern`, restricted to `window = (start, end)` inclusive when given.
pub fn summarize(
    store: &StatsStore,
    pattern: &str,
    metric: Metric,
    window: Option<(f64, f64)>,
) -> Result<SummaryRow, StatsError> {
    let matcher = glob::Pattern::new(pattern).ok();
    let values: Vec<f64> = store
        .samples()
        .iter()
        .filter(|s| s.metric == metric)
        .filter(|s| window.is_none_or(|(a, b)| s.time >= a && s.time <= b))
        .filter(|s| match &matcher {
            Some(m) => m.matches(&s.object),
            None => s.object == pattern,
        })
        .map(|s| s.value)
        .collect();
    row(pattern.to_string(), metric, values).ok_or(StatsError::NoData)
}

/// One row per (object, metric) pair, in order of first appearance.
pub fn summary_rows(store: &StatsStore) -> Vec<SummaryRow> {
    let mut order: Vec<(String, Metric)> = Vec::new();
    let mut groups: HashMap<(String, Metric), Vec<f64>> = HashMap::new();
    for s in store.samples() {
        let key = (s.object.clone(), s.metric);
        groups
            .entry(key)
            .or_insert_with_key(|k| {
                order.push(k.clone());
                Vec::new()
            })
            .push(s.value);
    }
    order
        .into_iter()
        .filter_map(|key| {
            let values = groups.remove(&key)?;
            row(key.0, key.1, values)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: &[f64]) -> StatsStore {
        let mut store = StatsStore::default();
        for (i, v) in values.iter().enumerate() {
            store.push(i as f64, "flow:1", Metric::FlowLatency, *v);
        }
        store
    }

    #[test]
    fn p95_of_one_to_hundred() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let r = summarize(&store_with(&values), "flow:*", Metric::FlowLatency, None).unwrap();
        assert_eq!(r.p95, 95.0);
        assert_eq!((r.min, r.max, r.mean, r.count), (1.0, 100.0, 50.5, 100));
    }

    #[test]
    fn single_value() {
        let r = summarize(&store_with(&[7.25]), "flow:1", Metric::FlowLatency, None).unwrap();
        assert_eq!((r.min, r.max, r.mean, r.p95), (7.25, 7.25, 7.25, 7.25));
    }

    #[test]
    fn empty_selection() {
        let store = store_with(&[1.0]);
        assert!(matches!(
            summarize(&store, "vm:*", Metric::FlowLatency, None),
            Err(StatsError::NoData)
        ));
        assert!(matches!(
            summarize(&store, "flow:*", Metric::FlowLatency, Some((5.0, 6.0))),
            Err(StatsError::NoData)
        ));
    }

    #[test]
    fn window_is_inclusive() {
        let store = store_with(&[1.0, 2.0, 3.0, 4.0]);
        let r = summarize(&store, "flow:1", Metric::FlowLatency, Some((1.0, 2.0))).unwrap();
        assert_eq!((r.count, r.min, r.max), (2, 2.0, 3.0));
    }

    #[test]
    fn rows_grouped_in_first_appearance_order() {
        let mut store = StatsStore::default();
        store.push(0.0, "b", Metric::QueueLen, 1.0);
        store.push(0.0, "a", Metric::QueueLen, 2.0);
        store.push(1.0, "b", Metric::QueueLen, 3.0);
        let rows = summary_rows(&store);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].object, "b");
        assert_eq!(rows[0].count, 2);
        assert_eq!(rows[1].object, "a");
    }
}
