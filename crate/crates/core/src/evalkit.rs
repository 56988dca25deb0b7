//! Scoring and experiment drivers: precision/recall/F1 for both tasks, the
//! k-fold cross-validation loop, and the sense-count sweep.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{make_folds, CorpusError, PunInstance};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction for unknown id `{0}`")]
    UnknownId(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("fold {0}: {1}")]
    Fold(usize, String),
}

/// Precision/recall/F1 with the counts they came from.
///
/// precision = correct/attempted (0 when nothing was attempted), recall =
/// correct/total, f1 = 2PR/(P+R) (0 when P+R = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub attempted: usize,
    pub correct: usize,
    pub total: usize,
}

impl Prf {
    pub fn from_counts(correct: usize, attempted: usize, total: usize) -> Prf {
        let precision = if attempted == 0 {
            0.0
        } else {
            correct as f64 / attempted as f64
        };
        let recall = if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            attempted,
            correct,
            total,
        }
    }
}

/// Exact-match location scoring: a prediction is correct iff it names the
/// gold token id. Predicting on an id outside the gold set is an error.
pub fn location_prf(
    predictions: &BTreeMap<String, String>,
    gold: &BTreeMap<String, String>,
) -> Result<Prf, EvalError> {
    let mut correct = 0;
    for (text_id, token_id) in predictions {
        match gold.get(text_id) {
            None => return Err(EvalError::UnknownId(text_id.clone())),
            Some(gold_token) if gold_token == token_id => correct += 1,
            Some(_) => {}
        }
    }
    Ok(Prf::from_counts(correct, predictions.len(), gold.len()))
}

/// Interpretation scoring: a prediction is correct iff its two keys are
/// distinct and both belong to the gold key set. Abstaining instances are
/// simply absent from `predictions` (they count against recall only).
/// Duplicate predicted keys count as incorrect and are tallied.
pub fn interpretation_prf(
    predictions: &BTreeMap<String, (String, String)>,
    gold: &BTreeMap<String, BTreeSet<String>>,
) -> Result<(Prf, u64), EvalError> {
    let mut correct = 0;
    let mut duplicate_warnings = 0u64;
    for (token_id, (k1, k2)) in predictions {
        let Some(gold_keys) = gold.get(token_id) else {
            return Err(EvalError::UnknownId(token_id.clone()));
        };
        if k1 == k2 {
            duplicate_warnings += 1;
            continue;
        }
        if gold_keys.contains(k1) && gold_keys.contains(k2) {
            correct += 1;
        }
    }
    Ok((
        Prf::from_counts(correct, predictions.len(), gold.len()),
        duplicate_warnings,
    ))
}

/// Unweighted arithmetic mean of fold metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanPrf {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub task: String,
    pub per_fold: Vec<Prf>,
    pub mean: MeanPrf,
}

impl CvReport {
    pub fn from_folds(task: &str, per_fold: Vec<Prf>) -> CvReport {
        let n = per_fold.len().max(1) as f64;
        let mean = MeanPrf {
            p: per_fold.iter().map(|p| p.precision).sum::<f64>() / n,
            r: per_fold.iter().map(|p| p.recall).sum::<f64>() / n,
            f1: per_fold.iter().map(|p| p.f1).sum::<f64>() / n,
        };
        CvReport {
            task: task.to_string(),
            per_fold,
            mean,
        }
    }

    /// Fixed-width text table, one row per fold plus the mean.
    pub fn text_table(&self) -> String {
        let mut out = format!("task: {}\nfold       P       R      F1\n", self.task);
        for (i, prf) in self.per_fold.iter().enumerate() {
            out.push_str(&format!(
                "{i:>4}  {:.4}  {:.4}  {:.4}\n",
                prf.precision, prf.recall, prf.f1
            ));
        }
        out.push_str(&format!(
            "mean  {:.4}  {:.4}  {:.4}\n",
            self.mean.p, self.mean.r, self.mean.f1
        ));
        out
    }
}

/// Run `run_fold(fold_index, train, test)` over a seeded k-fold plan and
/// average the fold metrics. With `parallel` the folds run on scoped
/// threads; results are reduced in fold order either way.
pub fn cross_validate<F>(
    task: &str,
    instances: &[PunInstance],
    k: usize,
    seed: u64,
    parallel: bool,
    run_fold: F,
) -> Result<CvReport, EvalError>
where
    F: Fn(usize, &[&PunInstance], &[&PunInstance]) -> Result<Prf, EvalError> + Sync,
{
    let plan = make_folds(instances, k, seed)?;
    let splits: Vec<(Vec<&PunInstance>, Vec<&PunInstance>)> =
        (0..k).map(|fold| plan.split(instances, fold)).collect();
    for (fold, (_, test)) in splits.iter().enumerate() {
        if test.is_empty() {
            return Err(EvalError::Config(format!(
                "fold {fold} has an empty test split"
            )));
        }
    }

    let per_fold: Vec<Prf> = if parallel {
        let mut results: Vec<Option<Result<Prf, EvalError>>> = Vec::new();
        results.resize_with(k, || None);
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (fold, (train, test)) in splits.iter().enumerate() {
                let run = &run_fold;
                handles.push((
                    fold,
                    scope.spawn(move || run(fold, train.as_slice(), test.as_slice())),
                ));
            }
            for (fold, handle) in handles {
                results[fold] = Some(
                    handle
                        .join()
                        .unwrap_or_else(|_| Err(EvalError::Fold(fold, "panicked".into()))),
                );
            }
        });
        results
            .into_iter()
            .map(|r| r.expect("every fold ran"))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        let mut acc = Vec::with_capacity(k);
        for (fold, (train, test)) in splits.iter().enumerate() {
            acc.push(run_fold(fold, train.as_slice(), test.as_slice())?);
        }
        acc
    };

    Ok(CvReport::from_folds(task, per_fold))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub d_s: usize,
    pub f1: f64,
}

/// Evaluate `run(d_s)` for each cap value (ascending) with everything else
/// held fixed; collects the mean F1 per cap.
pub fn sense_count_sweep<F>(ds_values: &[usize], mut run: F) -> Result<Vec<SweepRow>, EvalError>
where
    F: FnMut(usize) -> Result<CvReport, EvalError>,
{
    if ds_values.is_empty() {
        return Err(EvalError::Config(
            "sweep needs at least one cap value".into(),
        ));
    }
    if ds_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::Config(
            "cap values must be strictly ascending".into(),
        ));
    }
    let mut rows = Vec::with_capacity(ds_values.len());
    for &d_s in ds_values {
        let report = run(d_s)?;
        rows.push(SweepRow {
            d_s,
            f1: report.mean.f1,
        });
    }
    Ok(rows)
}

/// `d_s,f1` CSV, one row per sweep point.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("d_s,f1\n");
    for row in rows {
        out.push_str(&format!("{},{}\n", row.d_s, row.f1));
    }
    out
}
