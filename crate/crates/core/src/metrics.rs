//! Confusion-matrix accounting and the G-mean score.
//!
//! Positive means "failed disk". G-mean is `sqrt(TPR * TNR)`; it is high only
//! when both classes are recognised, which is why it drives both the search
//! fitness and the final evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fn_, fp, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    fn require_both_classes(&self) -> Result<()> {
        if self.positives() == 0 || self.negatives() == 0 {
            return Err(Error::InvalidInput(format!(
                "rates undefined: {} positives, {} negatives",
                self.positives(),
                self.negatives()
            )));
        }
        Ok(())
    }

    pub fn tpr(&self) -> Result<f64> {
        self.require_both_classes()?;
        Ok(self.tp as f64 / self.positives() as f64)
    }

    pub fn tnr(&self) -> Result<f64> {
        self.require_both_classes()?;
        Ok(self.tn as f64 / self.negatives() as f64)
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

pub fn confusion_matrix(y_true: &[bool], y_pred: &[bool]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidInput(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

pub fn g_mean(cm: &ConfusionMatrix) -> Result<f64> {
    Ok((cm.tpr()? * cm.tnr()?).sqrt())
}

/// Confusion matrix plus derived rates, as reported per trained model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
    pub tpr: f64,
    pub tnr: f64,
    pub accuracy: f64,
    pub g_mean: f64,
}

impl MetricBundle {
    pub fn from_matrix(cm: &ConfusionMatrix) -> Result<Self> {
        Ok(MetricBundle {
            tp: cm.tp,
            fn_: cm.fn_,
            fp: cm.fp,
            tn: cm.tn,
            tpr: cm.tpr()?,
            tnr: cm.tnr()?,
            accuracy: cm.accuracy(),
            g_mean: g_mean(cm)?,
        })
    }

    pub fn score(y_true: &[bool], y_pred: &[bool]) -> Result<Self> {
        MetricBundle::from_matrix(&confusion_matrix(y_true, y_pred)?)
    }
}
