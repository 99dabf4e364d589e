use std::fmt;

use crate::data::{LABEL_DEFORESTATION, LABEL_PAST};
use crate::error::{Error, Result};

/// Pixel outcomes with deforestation as the positive class. Reference
/// pixels marked as past deforestation are not counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn from_labels(pred: &[u8], reference: &[u8]) -> Result<Self> {
        let mut c = ConfusionCounts::default();
        c.accumulate(pred, reference)?;
        Ok(c)
    }

    pub fn accumulate(&mut self, pred: &[u8], reference: &[u8]) -> Result<()> {
        if pred.len() != reference.len() {
            return Err(Error::dim("confusion", "pixel", reference.len(), pred.len()));
        }
        for (&p, &r) in pred.iter().zip(reference) {
            if r == LABEL_PAST {
                continue;
            }
            match (p == LABEL_DEFORESTATION, r == LABEL_DEFORESTATION) {
                (true, true) => self.tp += 1,
                (false, false) => self.tn += 1,
                (true, false) => self.fp += 1,
                (false, true) => self.fn_ += 1,
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn scores(&self) -> Scores {
        Scores::from_counts(self)
    }

    pub const CSV_HEADER: &'static str = "tp,tn,fp,fn";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.tp, self.tn, self.fp, self.fn_)
    }
}

/// Ratios with a zero-denominator convention: the value is 0 and the
/// matching flag is set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
    pub f1_degenerate: bool,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

impl Scores {
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        let tp = c.tp as f64;
        let (precision, precision_degenerate) = ratio(tp, tp + c.fp as f64);
        let (recall, recall_degenerate) = ratio(tp, tp + c.fn_ as f64);
        let (f1, f1_degenerate) = ratio(2.0 * precision * recall, precision + recall);
        Scores {
            precision,
            recall,
            f1,
            precision_degenerate,
            recall_degenerate,
            f1_degenerate,
        }
    }

    pub fn any_degenerate(&self) -> bool {
        self.precision_degenerate || self.recall_degenerate || self.f1_degenerate
    }
}

impl fmt::Display for Scores {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |d: bool| if d { " (undefined)" } else { "" };
        write!(
            f,
            "precision {:.4}{}  recall {:.4}{}  f1 {:.4}{}",
            self.precision,
            flag(self.precision_degenerate),
            self.recall,
            flag(self.recall_degenerate),
            self.f1,
            flag(self.f1_degenerate)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_enumerated_four_by_four() {
        // reference has deforestation at 0, 1, 5; prediction at 0, 1, 2
        let mut reference = vec![0u8; 16];
        let mut pred = vec![0u8; 16];
        for i in [0, 1, 5] {
            reference[i] = 1;
        }
        for i in [0, 1, 2] {
            pred[i] = 1;
        }
        let c = ConfusionCounts::from_labels(&pred, &reference).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 2, tn: 12, fp: 1, fn_: 1 });
        let s = c.scores();
        assert_eq!((s.precision, s.recall, s.f1), (2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0));
    }

    #[test]
    fn past_deforestation_is_skipped() {
        let c = ConfusionCounts::from_labels(&[1, 0, 1], &[2, 2, 2]).unwrap();
        assert_eq!(c.total(), 0);
    }

    #[test]
    fn degenerate_conventions() {
        let s = ConfusionCounts { tp: 0, tn: 5, fp: 0, fn_: 3 }.scores();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        assert!(s.precision_degenerate && !s.recall_degenerate && s.f1_degenerate);
        let p = ConfusionCounts { tp: 4, tn: 1, fp: 0, fn_: 0 }.scores();
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
    }
}
