use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::AnalysisError;
use crate::task::{dist3, TrialRecord2D, DISTANCES_PX, WIDTHS_PX};

/// √(2πe): width of a uniform distribution with the same entropy as a
/// unit-variance Gaussian.
pub fn entropy_width_factor() -> f64 {
    (2.0 * PI * E).sqrt()
}

/// Shannon index of difficulty, bits.
pub fn nominal_id(distance: f64, width: f64) -> Result<f64, AnalysisError> {
    if !(width > 0.0) {
        return Err(AnalysisError::NonPositiveWidth(width));
    }
    if !(distance >= 0.0) {
        return Err(AnalysisError::NegativeDistance(distance));
    }
    Ok((distance / width + 1.0).log2())
}

/// Effective index of difficulty from the observed movement distance and
/// endpoint spread, bits.
pub fn effective_id(de: f64, sd: f64) -> Result<f64, AnalysisError> {
    if !(sd > 0.0) {
        return Err(AnalysisError::DegenerateSpread(sd));
    }
    if !(de >= 0.0) {
        return Err(AnalysisError::NegativeDistance(de));
    }
    Ok((de / (entropy_width_factor() * sd) + 1.0).log2())
}

/// Which reaches feed the per-condition statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReachSelection {
    #[default]
    Both,
    OutboundOnly,
}

impl ReachSelection {
    pub fn keeps(&self, t: &TrialRecord2D) -> bool {
        match self {
            ReachSelection::Both => true,
            ReachSelection::OutboundOnly => t.is_outbound(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionStats {
    pub distance: f64,
    pub width: f64,
    pub id: f64,
    /// Mean start-to-end distance, px.
    pub de: f64,
    /// Sample SD of endpoint-to-target-center distance, px.
    pub sd: f64,
    pub ide: f64,
    /// Mean selection time, s.
    pub ste: f64,
    pub trial_count: usize,
}

fn norm2(a: [f64; 2], b: [f64; 2]) -> f64 {
    dist3([a[0], a[1], 0.0], [b[0], b[1], 0.0])
}

/// Statistics of one (D, W) cell.
pub fn cell_stats(
    distance: f64,
    width: f64,
    trials: &[&TrialRecord2D],
) -> Result<ConditionStats, AnalysisError> {
    let n = trials.len();
    if n == 0 {
        return Err(AnalysisError::EmptyCell { distance, width });
    }
    let nf = n as f64;
    let de = trials
        .iter()
        .map(|t| norm2(t.end_pos, t.start_pos))
        .sum::<f64>()
        / nf;
    let w: Vec<f64> = trials
        .iter()
        .map(|t| norm2(t.end_pos, t.target_pos))
        .collect();
    let sd = if n < 2 {
        0.0
    } else {
        let mean = w.iter().sum::<f64>() / nf;
        (w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
    };
    let ste = trials.iter().map(|t| t.selection_time_s).sum::<f64>() / nf;
    Ok(ConditionStats {
        distance,
        width,
        id: nominal_id(distance, width)?,
        de,
        sd,
        ide: effective_id(de, sd)?,
        ste,
        trial_count: n,
    })
}

/// The six (D, W) cells, sorted by distance then width. Orientation is
/// collapsed; every cell must be populated.
pub fn condition_stats(
    trials: &[TrialRecord2D],
    selection: ReachSelection,
) -> Result<Vec<ConditionStats>, AnalysisError> {
    let mut out = Vec::with_capacity(DISTANCES_PX.len() * WIDTHS_PX.len());
    for &d in &DISTANCES_PX {
        for &w in &WIDTHS_PX {
            let cell: Vec<&TrialRecord2D> = trials
                .iter()
                .filter(|t| {
                    selection.keeps(t) && t.condition.distance == d && t.condition.width == w
                })
                .collect();
            out.push(cell_stats(d, w, &cell)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittsFit {
    /// Intercept, s.
    pub a: f64,
    /// Slope, s/bit.
    pub b: f64,
    pub a_se: f64,
    pub b_se: f64,
    pub r_squared: f64,
    pub f_stat: f64,
    pub df: (usize, usize),
    pub p_value: f64,
    pub n: usize,
}

/// Least-squares ST = a + b·ID, tested against the constant model.
pub fn fit_fitts(pairs: &[(f64, f64)]) -> Result<FittsFit, AnalysisError> {
    let n = pairs.len();
    if n < 3 {
        return Err(AnalysisError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 || pairs.iter().all(|p| p.0 == pairs[0].0) {
        return Err(AnalysisError::ConstantId);
    }
    let dof = n - 2;
    if pairs.iter().all(|p| p.1 == pairs[0].1) {
        return Ok(FittsFit {
            a: pairs[0].1,
            b: 0.0,
            a_se: 0.0,
            b_se: 0.0,
            r_squared: 0.0,
            f_stat: 0.0,
            df: (1, dof),
            p_value: 1.0,
            n,
        });
    }
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let sse: f64 = pairs.iter().map(|p| (p.1 - a - b * p.0).powi(2)).sum();
    let r_squared = ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0);
    let f_stat = if r_squared < 1.0 {
        r_squared * dof as f64 / (1.0 - r_squared)
    } else {
        f64::INFINITY
    };
    let s2 = if dof > 0 { sse / dof as f64 } else { f64::NAN };
    Ok(FittsFit {
        a,
        b,
        a_se: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        b_se: (s2 / sxx).sqrt(),
        r_squared,
        f_stat,
        df: (1, dof),
        p_value: f_survival(f_stat, 1.0, dof as f64),
        n,
    })
}

/// Upper tail of the F(d1, d2) distribution.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_infinite() {
        return 0.0;
    }
    if !(f > 0.0) || !(d2 > 0.0) {
        return 1.0;
    }
    FisherSnedecor::new(d1, d2).map_or(f64::NAN, |dist| dist.sf(f))
}

/// Mean over participants of the mean over conditions of IDe/STe, bits/s.
pub fn throughput(grid: &[Vec<(f64, f64)>]) -> Result<f64, AnalysisError> {
    Ok(per_participant_throughput(grid)?.iter().sum::<f64>() / grid.len() as f64)
}

pub fn per_participant_throughput(grid: &[Vec<(f64, f64)>]) -> Result<Vec<f64>, AnalysisError> {
    let m = grid.first().map_or(0, Vec::len);
    if m == 0 {
        return Err(AnalysisError::Empty);
    }
    grid.iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != m {
                return Err(AnalysisError::InconsistentGrid(format!(
                    "participant {i} has {} conditions, expected {m}",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for &(ide, ste) in row {
                if !(ste > 0.0) {
                    return Err(AnalysisError::NonPositiveTime(ste));
                }
                sum += ide / ste;
            }
            Ok(sum / m as f64)
        })
        .collect()
}

/// Percentage of trials with at least one click outside the target.
pub fn error_rate(trials: &[TrialRecord2D]) -> Result<f64, AnalysisError> {
    if trials.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let missed = trials.iter().filter(|t| !t.misclicks.is_empty()).count();
    Ok(100.0 * missed as f64 / trials.len() as f64)
}

/// Drops trials slower than `limit_s` (strictly greater). Returns the kept
/// trials and the percentage excluded.
pub fn exclusion_filter(trials: &[TrialRecord2D], limit_s: f64) -> (Vec<TrialRecord2D>, f64) {
    let kept: Vec<TrialRecord2D> = trials
        .iter()
        .filter(|t| !(t.selection_time_s > limit_s))
        .cloned()
        .collect();
    let excluded = if trials.is_empty() {
        0.0
    } else {
        100.0 * (trials.len() - kept.len()) as f64 / trials.len() as f64
    };
    (kept, excluded)
}
