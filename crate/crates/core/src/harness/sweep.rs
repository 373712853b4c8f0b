//! The privacy-budget sweep over pooled and local statistics.

use rand::Rng;
use serde::Serialize;

use super::scenario::Consortium;
use super::{phase, HarnessError};
use crate::aggregation::LocalStats;
use crate::regression::{clinical_metrics, DoseModel, PrivacyBudget};
use crate::{par, seeds};

/// Confidence level of the bootstrap intervals.
pub const LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    /// Percentile bootstrap interval of the mean; absent for one run.
    pub ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub pooled: Summary,
    pub local: Summary,
    /// Local MAE minus pooled MAE, paired by repetition.
    pub advantage: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpTable {
    pub initiator: String,
    pub repetitions: usize,
    pub non_private_pooled_mae: f64,
    pub non_private_local_mae: f64,
    pub rows: Vec<SweepRow>,
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Percentile bootstrap interval for the mean of `values`.
pub fn bootstrap_ci<R: Rng + ?Sized>(
    values: &[f64],
    resamples: usize,
    level: f64,
    rng: &mut R,
) -> Option<(f64, f64)> {
    if values.len() < 2 || resamples == 0 {
        return None;
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Some((at(tail), at(1.0 - tail)))
}

fn summarize(values: &[f64], resamples: usize, seed: u64, label: &str) -> Summary {
    let mut rng = seeds::rng(seed, label);
    Summary {
        mean: mean(values),
        ci: bootstrap_ci(values, resamples, LEVEL, &mut rng),
    }
}

/// True when every step to a larger budget lowers the mean MAE or stays
/// within the two intervals' combined half-widths.
pub fn non_increasing_within_ci(rows: &[Summary]) -> bool {
    rows.windows(2).all(|w| {
        let half = |s: &Summary| s.ci.map_or(0.0, |(lo, hi)| (hi - lo) / 2.0);
        w[1].mean - w[0].mean <= half(&w[0]) + half(&w[1])
    })
}

/// Runs `repetitions` functional-mechanism fits per budget on the pooled and
/// on the initiator's local statistics, scoring each on the validation
/// cohort. Runs draw from streams derived from `seed`, budget and index.
#[allow(clippy::too_many_arguments)]
pub fn dp_sweep(
    c: &Consortium,
    initiator: &str,
    pooled: &LocalStats,
    local: &LocalStats,
    epsilons: &[f64],
    repetitions: usize,
    resamples: usize,
    seed: u64,
) -> Result<DpTable, HarnessError> {
    let budgets = epsilons
        .iter()
        .map(|&e| PrivacyBudget::new(e))
        .collect::<Result<Vec<_>, _>>()
        .map_err(phase("dp"))?;
    let truth = c.validation.target();
    let score = |m: &DoseModel| -> Result<f64, HarnessError> {
        let pred = m.predict(&c.validation).map_err(phase("dp"))?;
        Ok(clinical_metrics(&pred, truth).map_err(phase("dp"))?.mae)
    };
    let fit = |s: &LocalStats, b: PrivacyBudget, label: &str| -> Result<f64, HarnessError> {
        let mut rng = seeds::rng(seed, label);
        let m = DoseModel::fit_dp(&c.schema, &c.norm, &s.o, &s.v, s.n, b, &mut rng)
            .map_err(phase("dp"))?;
        score(&m)
    };

    let mut rows = Vec::with_capacity(budgets.len());
    for b in budgets {
        let eps = b.epsilon();
        let runs = par::map_range(repetitions, |r| -> Result<(f64, f64), HarnessError> {
            let p = fit(pooled, b, &format!("dp/{eps}/{r}/pooled"))?;
            let l = fit(local, b, &format!("dp/{eps}/{r}/local"))?;
            Ok((p, l))
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
        let p: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let l: Vec<f64> = runs.iter().map(|r| r.1).collect();
        let adv: Vec<f64> = runs.iter().map(|r| r.1 - r.0).collect();
        rows.push(SweepRow {
            epsilon: eps,
            pooled: summarize(&p, resamples, seed, &format!("boot/{eps}/pooled")),
            local: summarize(&l, resamples, seed, &format!("boot/{eps}/local")),
            advantage: summarize(&adv, resamples, seed, &format!("boot/{eps}/advantage")),
        });
    }
    Ok(DpTable {
        initiator: initiator.to_string(),
        repetitions,
        non_private_pooled_mae: score(&c.fit(pooled)?)?,
        non_private_local_mae: score(&c.fit(local)?)?,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;

    #[test]
    fn bootstrap_brackets_the_mean() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..200).map(|i| (i % 10) as f64).collect();
        let (lo, hi) = bootstrap_ci(&v, 1000, 0.95, &mut rng).unwrap();
        assert!(lo < 4.5 && 4.5 < hi);
        // standard error is about 2.87 / sqrt(200) = 0.2
        assert!(hi - lo > 0.5 && hi - lo < 1.2, "{lo} {hi}");
        assert!(bootstrap_ci(&[1.0], 1000, 0.95, &mut rng).is_none());
    }

    #[test]
    fn monotone_check() {
        let s = |mean, w: f64| Summary {
            mean,
            ci: Some((mean - w, mean + w)),
        };
        assert!(non_increasing_within_ci(&[
            s(5.0, 0.1),
            s(3.0, 0.1),
            s(3.1, 0.1)
        ]));
        assert!(!non_increasing_within_ci(&[s(3.0, 0.1), s(5.0, 0.1)]));
        assert!(non_increasing_within_ci(&[Summary {
            mean: 2.0,
            ci: None
        }]));
    }
}
