//! Cohort-level tables: one regression per cohort over every
//! participant × condition cell, plus throughput, error rate and exclusion
//! percentage as mean ± SEM across participants.
//!
//! CSV columns, in order:
//!
//! ```text
//! cohort, exclude_over_s, a, a_se, b, b_se, r_squared, f_stat, n, df, p_value,
//! throughput, throughput_sem, error_rate, error_rate_sem,
//! excluded_percent, excluded_percent_sem, participants
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use super::fitts::{
    condition_stats, error_rate, exclusion_filter, fit_fitts, per_participant_throughput,
    ConditionStats, FittsFit, ReachSelection,
};
use super::wilcoxon::{rank_sum, signed_rank, TestResult, ZeroMethod};
use super::AnalysisError;
use crate::task::{SessionLog, TaskSetup, TrialRecord2D};

/// Published values for other interfaces, printed under the text report.
pub const REFERENCE_FOOTER: &str = "\
Published reference values (not computed here):
  Throughput, bits/s: isometric joystick 1.6-2.55; touchpad 0.99-2.9; mouse 3.7-4.9
  Tongue drive, tetraplegia, day 1: TP 0.29 ± 0.21 bits/s, error rate 64.68 ± 25.2 %
  Tongue drive, tetraplegia, day 6: TP 0.72 ± 0.41 bits/s, error rate 41.48 ± 26.0 %
  Intracortical BCI, days 999-1003: a 0.8 s, b 3.3 s/bit, false clicks 41 %, time-outs 8.1 %
";

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    /// Drop trials slower than this many seconds before analysis.
    pub exclude_over_s: Option<f64>,
    pub selection: ReachSelection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Participant {
    pub id: String,
    pub trials: Vec<TrialRecord2D>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub name: String,
    pub participants: Vec<Participant>,
}

/// Groups pointing logs by cohort, then by participant (the session id when
/// a log names no participant). Partial logs contribute their completed
/// trials. Non-pointing logs are skipped.
pub fn cohorts_from_logs(logs: &[SessionLog]) -> Vec<Cohort> {
    let mut map: BTreeMap<String, BTreeMap<String, Vec<TrialRecord2D>>> = BTreeMap::new();
    for log in logs {
        if !matches!(log.header.setup, TaskSetup::Pointing(_)) {
            continue;
        }
        let cohort = log.header.cohort.clone().unwrap_or_else(|| "all".into());
        let who = log
            .header
            .participant
            .clone()
            .unwrap_or_else(|| log.header.session_id.clone());
        map.entry(cohort)
            .or_default()
            .entry(who)
            .or_default()
            .extend(log.pointing_trials().cloned());
    }
    map.into_iter()
        .map(|(name, ps)| Cohort {
            name,
            participants: ps
                .into_iter()
                .map(|(id, trials)| Participant { id, trials })
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSummary {
    pub id: String,
    pub conditions: Vec<ConditionStats>,
    pub throughput: f64,
    pub error_rate: f64,
    pub excluded_percent: f64,
    pub trials_total: usize,
    pub trials_kept: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSummary {
    pub cohort: String,
    pub fit: FittsFit,
    pub throughput: f64,
    pub throughput_sem: f64,
    pub error_rate: f64,
    pub error_rate_sem: f64,
    pub excluded_percent: f64,
    pub excluded_percent_sem: f64,
    pub participants: Vec<ParticipantSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub first: String,
    pub second: String,
    /// Rank-sum for independent cohorts, signed-rank when both cohorts hold
    /// the same participants.
    pub paired: bool,
    pub throughput: TestResult,
    pub error_rate: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub options: ReportOptions,
    pub cohorts: Vec<PerformanceSummary>,
    pub comparisons: Vec<Comparison>,
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub cohort: String,
    pub exclude_over_s: Option<f64>,
    pub a: f64,
    pub a_se: f64,
    pub b: f64,
    pub b_se: f64,
    pub r_squared: f64,
    pub f_stat: f64,
    pub n: usize,
    pub df: usize,
    pub p_value: f64,
    pub throughput: f64,
    pub throughput_sem: f64,
    pub error_rate: f64,
    pub error_rate_sem: f64,
    pub excluded_percent: f64,
    pub excluded_percent_sem: f64,
    pub participants: usize,
}

/// Mean and standard error of the mean (n − 1 estimator). The SEM of a
/// single value is NaN.
pub fn mean_sem(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn summarize_participant(
    p: &Participant,
    options: &ReportOptions,
) -> Result<ParticipantSummary, AnalysisError> {
    let (kept, excluded_percent) = match options.exclude_over_s {
        Some(limit) => exclusion_filter(&p.trials, limit),
        None => (p.trials.clone(), 0.0),
    };
    let conditions = condition_stats(&kept, options.selection)?;
    let row: Vec<(f64, f64)> = conditions.iter().map(|c| (c.ide, c.ste)).collect();
    Ok(ParticipantSummary {
        id: p.id.clone(),
        throughput: per_participant_throughput(&[row])?[0],
        error_rate: error_rate(&kept)?,
        excluded_percent,
        trials_total: p.trials.len(),
        trials_kept: kept.len(),
        conditions,
    })
}

fn summarize_cohort(
    c: &Cohort,
    options: &ReportOptions,
) -> Result<PerformanceSummary, AnalysisError> {
    if c.participants.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let participants = c
        .participants
        .iter()
        .map(|p| {
            summarize_participant(p, options).map_err(|e| AnalysisError::Participant {
                participant: p.id.clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let m = participants[0].conditions.len();
    for p in &participants {
        let same_cells = p.conditions.len() == m
            && p.conditions
                .iter()
                .zip(&participants[0].conditions)
                .all(|(x, y)| x.distance == y.distance && x.width == y.width);
        if !same_cells {
            return Err(AnalysisError::InconsistentGrid(format!(
                "participant {} does not share the condition grid of {}",
                p.id, participants[0].id
            )));
        }
    }
    let pairs: Vec<(f64, f64)> = participants
        .iter()
        .flat_map(|p| p.conditions.iter().map(|c| (c.ide, c.ste)))
        .collect();
    let fit = fit_fitts(&pairs)?;
    let col = |f: fn(&ParticipantSummary) -> f64| {
        mean_sem(&participants.iter().map(f).collect::<Vec<_>>())
    };
    let (throughput, throughput_sem) = col(|p| p.throughput);
    let (error_rate, error_rate_sem) = col(|p| p.error_rate);
    let (excluded_percent, excluded_percent_sem) = col(|p| p.excluded_percent);
    Ok(PerformanceSummary {
        cohort: c.name.clone(),
        fit,
        throughput,
        throughput_sem,
        error_rate,
        error_rate_sem,
        excluded_percent,
        excluded_percent_sem,
        participants,
    })
}

fn compare(a: &PerformanceSummary, b: &PerformanceSummary) -> Option<Comparison> {
    let ids = |s: &PerformanceSummary| {
        s.participants
            .iter()
            .map(|p| p.id.clone())
            .collect::<Vec<_>>()
    };
    let paired = ids(a) == ids(b);
    let tp = |s: &PerformanceSummary| {
        s.participants
            .iter()
            .map(|p| p.throughput)
            .collect::<Vec<_>>()
    };
    let er = |s: &PerformanceSummary| {
        s.participants
            .iter()
            .map(|p| p.error_rate)
            .collect::<Vec<_>>()
    };
    let test = |x: Vec<f64>, y: Vec<f64>| {
        if paired {
            signed_rank(&x, &y, ZeroMethod::Drop)
        } else {
            rank_sum(&x, &y)
        }
    };
    Some(Comparison {
        first: a.cohort.clone(),
        second: b.cohort.clone(),
        paired,
        throughput: test(tp(a), tp(b)).ok()?,
        error_rate: test(er(a), er(b)).ok()?,
    })
}

pub fn build_report(cohorts: &[Cohort], options: ReportOptions) -> Result<Report, AnalysisError> {
    if cohorts.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let summaries = cohorts
        .iter()
        .map(|c| summarize_cohort(c, &options))
        .collect::<Result<Vec<_>, _>>()?;
    let mut comparisons = Vec::new();
    for (i, a) in summaries.iter().enumerate() {
        for b in &summaries[i + 1..] {
            comparisons.extend(compare(a, b));
        }
    }
    Ok(Report {
        options,
        cohorts: summaries,
        comparisons,
    })
}

impl Report {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.cohorts
            .iter()
            .map(|c| ReportRow {
                cohort: c.cohort.clone(),
                exclude_over_s: self.options.exclude_over_s,
                a: c.fit.a,
                a_se: c.fit.a_se,
                b: c.fit.b,
                b_se: c.fit.b_se,
                r_squared: c.fit.r_squared,
                f_stat: c.fit.f_stat,
                n: c.fit.n,
                df: c.fit.df.1,
                p_value: c.fit.p_value,
                throughput: c.throughput,
                throughput_sem: c.throughput_sem,
                error_rate: c.error_rate,
                error_rate_sem: c.error_rate_sem,
                excluded_percent: c.excluded_percent,
                excluded_percent_sem: c.excluded_percent_sem,
                participants: c.participants.len(),
            })
            .collect()
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<ReportRow>, csv::Error> {
        csv::Reader::from_reader(input).deserialize().collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match self.options.exclude_over_s {
            Some(l) => writeln!(
                s,
                "Fitts regression and performance, trials over {l} s excluded"
            ),
            None => writeln!(s, "Fitts regression and performance, all trials"),
        }
        .unwrap();
        let w = 24;
        write!(s, "{:<w$}", "").unwrap();
        for c in &self.cohorts {
            write!(s, "{:>w$}", c.cohort).unwrap();
        }
        s.push('\n');
        let mut line = |label: &str, f: &dyn Fn(&PerformanceSummary) -> String| {
            write!(s, "{label:<w$}").unwrap();
            for c in &self.cohorts {
                write!(s, "{:>w$}", f(c)).unwrap();
            }
            s.push('\n');
        };
        line("Intercept a (s)", &|c| {
            format!("{:.2} ± {:.2}", c.fit.a, c.fit.a_se)
        });
        line("Slope b (s/bit)", &|c| {
            format!("{:.2} ± {:.2}", c.fit.b, c.fit.b_se)
        });
        line("R-squared", &|c| format!("{:.2}", c.fit.r_squared));
        line("F vs constant model", &|c| format!("{:.1}", c.fit.f_stat));
        line("N", &|c| c.fit.n.to_string());
        line("d.f.", &|c| c.fit.df.1.to_string());
        line("p-value", &|c| format!("{:.2e}", c.fit.p_value));
        line("Throughput (bits/s)", &|c| {
            format!("{:.2} ± {:.2}", c.throughput, c.throughput_sem)
        });
        line("Error rate (%)", &|c| {
            format!("{:.2} ± {:.2}", c.error_rate, c.error_rate_sem)
        });
        line("Excluded (%)", &|c| {
            format!("{:.1} ± {:.1}", c.excluded_percent, c.excluded_percent_sem)
        });
        for cmp in &self.comparisons {
            let test = if cmp.paired {
                "signed-rank"
            } else {
                "rank-sum"
            };
            writeln!(
                s,
                "{} vs {} ({test}): throughput p = {:.4}, error rate p = {:.4}",
                cmp.first, cmp.second, cmp.throughput.p_value, cmp.error_rate.p_value
            )
            .unwrap();
        }
        s.push('\n');
        s.push_str(REFERENCE_FOOTER);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sem_of_known_values() {
        let (m, se) = mean_sem(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(mean_sem(&[1.0]).1.is_nan());
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(build_report(&[], ReportOptions::default()).is_err());
        let c = Cohort {
            name: "x".into(),
            participants: vec![],
        };
        assert!(build_report(&[c], ReportOptions::default()).is_err());
    }
}
