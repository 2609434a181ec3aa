use serde::Serialize;

use super::{evaluate, EvalReport};
use crate::adversary::AdversaryRegime;
use crate::error::{Error, Result};
use crate::learner::RiskParams;
use crate::market_sim::SimConfig;
use crate::policy::GaussianPolicy;

/// One cell: a trained market maker evaluated under one test regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossTestCell {
    pub report: EvalReport,
    /// Terminal-wealth variance relative to the same agent's Fixed-test
    /// cell; `None` when no Fixed column was evaluated.
    pub variance_ratio: Option<f64>,
}

impl CrossTestCell {
    /// Relative variance increase over the Fixed-test baseline (0.981 for
    /// a 98.1% increase).
    pub fn variance_increase(&self) -> Option<f64> {
        self.variance_ratio.map(|r| r - 1.0)
    }
}

/// Rows are agents (labelled by how they were trained), columns are test
/// regimes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossTestMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<CrossTestCell>>,
}

impl CrossTestMatrix {
    pub fn cell(&self, row: &str, column: &str) -> Option<&CrossTestCell> {
        let r = self.rows.iter().position(|x| x == row)?;
        let c = self.columns.iter().position(|x| x == column)?;
        Some(&self.cells[r][c])
    }

    /// Flattened `(agent, test regime, cell)` triples in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, &CrossTestCell)> {
        self.rows.iter().zip(&self.cells).flat_map(move |(r, row)| {
            self.columns.iter().zip(row).map(move |(c, cell)| (r.as_str(), c.as_str(), cell))
        })
    }
}

/// Evaluates every agent under every test regime with the same seed, so
/// each column sees identical episode streams across rows.
pub fn cross_test(
    agents: &[(String, GaussianPolicy)],
    regimes: &[AdversaryRegime],
    sim: &SimConfig,
    risk: &RiskParams,
    n_episodes: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<CrossTestMatrix> {
    if agents.is_empty() || regimes.is_empty() {
        return Err(Error::Config("cross-test needs at least one agent and one test regime".into()));
    }
    let baseline = regimes.iter().position(|r| matches!(r, AdversaryRegime::Fixed { .. }));
    let mut cells = Vec::with_capacity(agents.len());
    for (_, mm) in agents {
        let reports = regimes
            .iter()
            .map(|regime| evaluate(mm, regime, sim, risk, n_episodes, seed, workers))
            .collect::<Result<Vec<_>>>()?;
        let base = baseline.map(|b| reports[b].variance());
        let row = reports
            .iter()
            .enumerate()
            .map(|(j, report)| CrossTestCell {
                report: *report,
                variance_ratio: match (baseline, base) {
                    (Some(b), _) if b == j => Some(1.0),
                    (_, Some(v)) => Some(report.variance() / v),
                    _ => None,
                },
            })
            .collect();
        cells.push(row);
    }
    Ok(CrossTestMatrix {
        rows: agents.iter().map(|(name, _)| name.clone()).collect(),
        columns: regimes.iter().map(|r| r.name().to_string()).collect(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::FeatureBasis;

    fn agent() -> GaussianPolicy {
        let mut p = GaussianPolicy::zeros(FeatureBasis::new(50.0));
        p.mean_psi_weights_mut()[0] = 1.2;
        p
    }

    #[test]
    fn single_regime_matches_evaluate() {
        let sim = SimConfig::default();
        let risk = RiskParams::NEUTRAL;
        let m = cross_test(&[("a".into(), agent())], &[AdversaryRegime::random()], &sim, &risk, 64, 5, None).unwrap();
        let direct = evaluate(&agent(), &AdversaryRegime::random(), &sim, &risk, 64, 5, None).unwrap();
        assert_eq!(m.cells[0][0].report, direct);
        assert_eq!(m.cells[0][0].variance_ratio, None);
    }

    #[test]
    fn fixed_column_is_the_baseline() {
        let sim = SimConfig::default();
        let regimes = [AdversaryRegime::random(), AdversaryRegime::fixed()];
        let agents = [("a".to_string(), agent()), ("b".to_string(), GaussianPolicy::zeros(FeatureBasis::new(50.0)))];
        let m = cross_test(&agents, &regimes, &sim, &RiskParams::NEUTRAL, 64, 9, None).unwrap();
        assert_eq!(m.columns, ["random", "fixed"]);
        for row in &m.cells {
            assert_eq!(row[1].variance_ratio, Some(1.0));
            let expect = row[0].report.variance() / row[1].report.variance();
            assert_eq!(row[0].variance_ratio, Some(expect));
        }
        assert_eq!(m.cell("b", "fixed").unwrap().variance_increase(), Some(0.0));
        assert_eq!(m.entries().count(), 4);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let sim = SimConfig::default();
        assert!(cross_test(&[], &[AdversaryRegime::fixed()], &sim, &RiskParams::NEUTRAL, 1, 0, None).is_err());
        assert!(cross_test(&[("a".into(), agent())], &[], &sim, &RiskParams::NEUTRAL, 1, 0, None).is_err());
    }
}
