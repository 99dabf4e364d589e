/// Outcome of one epoch's validation loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    /// New best; the caller should snapshot parameters.
    Improved,
    Continue,
    /// Patience exhausted.
    Stop,
}

/// Stops once validation loss has failed to improve for `patience`
/// consecutive epochs. Improvement means strictly lower than the best.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    since: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: None,
            since: 0,
        }
    }

    pub fn update(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = Some(epoch);
            self.since = 0;
            return StopDecision::Improved;
        }
        self.since += 1;
        if self.since >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn epochs_since_improvement(&self) -> usize {
        self.since
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_exactly_patience_epochs_after_best() {
        let mut es = EarlyStopping::new(10);
        let mut losses = vec![1.0, 0.9];
        losses.extend(std::iter::repeat_n(0.91, 12));
        let mut stopped = None;
        for (e, &l) in losses.iter().enumerate() {
            if es.update(e, l) == StopDecision::Stop {
                stopped = Some(e);
                break;
            }
            assert!(es.epochs_since_improvement() <= 10);
        }
        assert_eq!(es.best_epoch(), Some(1));
        assert_eq!(stopped, Some(11));
        assert_eq!(es.best(), 0.9);
    }
}
