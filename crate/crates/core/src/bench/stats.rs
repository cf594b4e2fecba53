use serde::{Deserialize, Serialize};

use crate::heuristics::RuleId;

/// z-value of a two-sided 95% normal interval.
pub const Z95: f64 = 1.96;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub makespans: Vec<u64>,
    pub mean: f64,
    /// Sample variance (n − 1 denominator; 0 for a single run).
    pub variance: f64,
    /// Half-width `1.96 · s / √n`.
    pub ci95: f64,
}

impl RunStats {
    pub fn from_makespans(makespans: Vec<u64>) -> Self {
        let n = makespans.len() as f64;
        let mean = makespans.iter().map(|&m| m as f64).sum::<f64>() / n;
        // Welford
        let mut m2 = 0.0;
        let mut mu = 0.0;
        for (k, &x) in makespans.iter().enumerate() {
            let x = x as f64;
            let d = x - mu;
            mu += d / (k + 1) as f64;
            m2 += d * (x - mu);
        }
        let variance = if makespans.len() > 1 { m2 / (n - 1.0) } else { 0.0 };
        Self {
            ci95: Z95 * variance.sqrt() / n.sqrt(),
            makespans,
            mean,
            variance,
        }
    }

    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// `(heuristic average − ours) / heuristic average × 100`.
pub fn gap_percent(heur_avg: f64, ours: f64) -> f64 {
    (heur_avg - ours) / heur_avg * 100.0
}

/// One results-table row: the twelve rule means in table order, their
/// average and minimum, the agent's mean and the gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub instance: String,
    pub rule_means: Vec<(RuleId, f64)>,
    pub heur_avg: f64,
    pub best_heur: f64,
    pub ours: Option<f64>,
    pub gap_pct: Option<f64>,
}

impl TableRow {
    /// `rule_means` in any order; must cover all twelve rules.
    pub fn new(instance: &str, rule_means: &[(RuleId, f64)], ours: Option<f64>) -> Option<Self> {
        let ordered: Option<Vec<(RuleId, f64)>> = RuleId::TABLE_ORDER
            .iter()
            .map(|r| rule_means.iter().find(|(q, _)| q == r).copied())
            .collect();
        let ordered = ordered?;
        let heur_avg = ordered.iter().map(|(_, m)| m).sum::<f64>() / ordered.len() as f64;
        let best_heur = ordered.iter().map(|(_, m)| *m).fold(f64::INFINITY, f64::min);
        Some(Self {
            instance: instance.to_string(),
            rule_means: ordered,
            heur_avg,
            best_heur,
            ours,
            gap_pct: ours.map(|o| gap_percent(heur_avg, o)),
        })
    }

    pub fn csv_header() -> Vec<String> {
        let mut h = vec!["instance".to_string()];
        h.extend(RuleId::TABLE_ORDER.iter().map(|r| r.name().to_string()));
        h.extend(["heur_avg", "best_heur", "ours", "gap_pct"].map(String::from));
        h
    }

    /// Values in [`csv_header`](Self::csv_header) order; `decimals` rounds for display.
    pub fn csv_record(&self, decimals: Option<usize>) -> Vec<String> {
        let f = |x: f64| match decimals {
            Some(d) => format!("{x:.d$}"),
            None => x.to_string(),
        };
        let mut r = vec![self.instance.clone()];
        r.extend(self.rule_means.iter().map(|(_, m)| f(*m)));
        r.push(f(self.heur_avg));
        r.push(f(self.best_heur));
        r.push(self.ours.map(f).unwrap_or_default());
        r.push(self.gap_pct.map(f).unwrap_or_default());
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_run_has_no_spread() {
        let s = RunStats::from_makespans(vec![42]);
        assert_eq!((s.mean, s.variance, s.ci95), (42.0, 0.0, 0.0));
    }

    #[test]
    fn known_sample() {
        let s = RunStats::from_makespans(vec![2, 4, 4, 4, 5, 5, 7, 9]);
        assert_eq!(s.mean, 5.0);
        assert!((s.variance - 32.0 / 7.0).abs() < 1e-12);
        assert!((s.ci95 - 1.96 * (32.0f64 / 7.0).sqrt() / 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn table_row_needs_every_rule() {
        let partial: Vec<(RuleId, f64)> = RuleId::ALL[..11].iter().map(|&r| (r, 1.0)).collect();
        assert!(TableRow::new("x", &partial, None).is_none());
        let full: Vec<(RuleId, f64)> = RuleId::ALL.iter().enumerate().map(|(i, &r)| (r, 10.0 + i as f64)).collect();
        let row = TableRow::new("x", &full, Some(12.0)).unwrap();
        assert_eq!(row.best_heur, 10.0);
        assert_eq!(row.rule_means.iter().map(|(r, _)| *r).collect::<Vec<_>>(), RuleId::TABLE_ORDER.to_vec());
        assert_eq!(TableRow::csv_header().len(), row.csv_record(None).len());
    }

    proptest! {
        #[test]
        fn matches_two_pass(xs in proptest::collection::vec(1u64..10_000, 1..200)) {
            let s = RunStats::from_makespans(xs.clone());
            let n = xs.len() as f64;
            let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
            let var = if xs.len() > 1 {
                xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else { 0.0 };
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
            prop_assert!(rel(s.mean, mean) < 1e-9);
            prop_assert!(s.variance == var || rel(s.variance, var) < 1e-9);
            let ci = 1.96 * var.sqrt() / n.sqrt();
            prop_assert!(s.ci95 == ci || rel(s.ci95, ci) < 1e-9);
        }
    }
}
