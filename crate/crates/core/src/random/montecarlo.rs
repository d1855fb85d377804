use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::problem::Problem;
use crate::random::ensemble::{Ensemble, Target};
use crate::spectra::eigen_test;
use crate::transfer::StepControl;

/// Quantile levels reported for the mismatch distribution.
pub const QUANTILE_LEVELS: [f64; 9] = [0.0, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistogramBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub energy: f64,
    pub target: Target,
    pub seed: u64,
    pub samples: usize,
    /// Samples with mismatch at most `epsilon`.
    pub hits: usize,
    /// Samples whose propagation failed; never counted as hits.
    pub failures: usize,
    pub epsilon: f64,
    /// `(level, value)` pairs over all successful samples.
    pub mismatch_quantiles: Vec<(f64, f64)>,
    /// Decade bins of the mismatch, from `[0, 1e-15)` up to `[0.1, pi/2]`.
    pub histogram: Vec<HistogramBin>,
}

impl MonteCarloReport {
    pub fn quantile(&self, level: f64) -> Option<f64> {
        self.mismatch_quantiles
            .iter()
            .find(|(q, _)| *q == level)
            .map(|(_, v)| *v)
    }
}

/// Lower nearest-rank quantile of sorted data.
fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let idx = (level * (sorted.len() - 1) as f64).floor() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

fn histogram(sorted: &[f64]) -> Vec<HistogramBin> {
    let mut edges = vec![0.0];
    edges.extend((-15..=-1).map(|e| 10f64.powi(e)));
    edges.push(std::f64::consts::FRAC_PI_2);
    edges
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let last = i + 2 == edges.len();
            let count = sorted
                .iter()
                .filter(|&&m| m >= w[0] && (m < w[1] || (last && m <= w[1])))
                .count();
            HistogramBin {
                bin_lo: w[0],
                bin_hi: w[1],
                count,
            }
        })
        .collect()
}

/// Estimate how often `energy` stays an eigenvalue when the ensemble's target
/// parameters are redrawn, the other two parameters keeping their template values.
pub fn monte_carlo(
    template: &Problem,
    energy: f64,
    ensemble: &Ensemble,
    n_samples: usize,
    epsilon: f64,
    control: &StepControl,
    exec: Execution,
) -> Result<MonteCarloReport> {
    ensemble.validate()?;
    let n_sites = template.interactions().len();
    if ensemble.sites.len() != n_sites {
        return Err(Error::InvalidEnsemble(format!(
            "ensemble has {} sites, problem has {n_sites} interactions",
            ensemble.sites.len()
        )));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    control.validate()?;
    let base: Vec<_> = template.interactions().iter().map(|s| s.params).collect();

    let outcomes: Vec<Result<Option<f64>>> = exec.map_indexed(n_samples, |i| {
        let values = ensemble.sample_realization(i as u64)?;
        let params = ensemble.apply(&base, &values)?;
        let mut problem = template.clone();
        problem.set_all_params(params);
        Ok(eigen_test(&problem, energy, control).ok().map(|r| r.mismatch))
    });

    let mut mismatches = Vec::with_capacity(n_samples);
    let mut failures = 0;
    for o in outcomes {
        match o? {
            Some(m) => mismatches.push(m),
            None => failures += 1,
        }
    }
    mismatches.sort_by(f64::total_cmp);
    let hits = mismatches.iter().filter(|&&m| m <= epsilon).count();
    let mismatch_quantiles = if mismatches.is_empty() {
        Vec::new()
    } else {
        QUANTILE_LEVELS
            .iter()
            .map(|&q| (q, quantile_sorted(&mismatches, q)))
            .collect()
    };

    Ok(MonteCarloReport {
        energy,
        target: ensemble.target,
        seed: ensemble.seed,
        samples: n_samples,
        hits,
        failures,
        epsilon,
        mismatch_quantiles,
        histogram: histogram(&mismatches),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_and_bins() {
        let data = [0.0, 1e-20, 5e-9, 0.2, 1.0];
        assert_eq!(quantile_sorted(&data, 0.0), 0.0);
        assert_eq!(quantile_sorted(&data, 0.5), 5e-9);
        assert_eq!(quantile_sorted(&data, 1.0), 1.0);
        let h = histogram(&data);
        assert_eq!(h.len(), 16);
        assert_eq!(h[0].count, 2);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 5);
        assert_eq!(h.last().unwrap().count, 2);
    }
}
