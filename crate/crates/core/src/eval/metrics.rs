use super::Probe;
use crate::dataset::Label;
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Binary confusion counts with "defective" as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[Label], actual: &[Label]) -> Self {
        let mut c = Confusion::default();
        for (p, a) in predicted.iter().zip(actual) {
            match (p.is_defective(), a.is_defective()) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2PR / (P + R)`, or 0 when `P + R = 0`.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

pub fn evaluate(probe: &Probe, test: &EmbeddingMatrix, labels: &[Label]) -> Result<Metrics> {
    if test.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    if labels.len() != test.rows() {
        return Err(Error::InvalidData(format!(
            "{} labels for {} rows",
            labels.len(),
            test.rows()
        )));
    }
    if test.dim() != probe.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: probe.weights.len(),
            actual: test.dim(),
        });
    }
    let predicted: Vec<Label> = test.iter_rows().map(|row| probe.predict(row)).collect();
    let confusion = Confusion::from_predictions(&predicted, labels);
    Ok(Metrics {
        accuracy: confusion.accuracy(),
        f1: confusion.f1(),
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn confusion(tp: usize, fp: usize, fn_: usize, tn: usize) -> Confusion {
        Confusion { tp, fp, fn_, tn }
    }

    #[test]
    fn hand_case() {
        let c = confusion(3, 1, 1, 5);
        assert_eq!(c.accuracy(), 0.8);
        assert_eq!(c.f1(), 0.75);
    }

    #[test]
    fn degenerate_predictors() {
        let actual: Vec<Label> = (0..10).map(|i| Label::from(i % 2 == 0)).collect();
        let perfect = Confusion::from_predictions(&actual, &actual);
        assert_eq!((perfect.accuracy(), perfect.f1()), (1.0, 1.0));
        let negative = Confusion::from_predictions(&[Label::Clean; 10], &actual);
        assert_eq!((negative.accuracy(), negative.f1()), (0.5, 0.0));
    }

    #[test]
    fn evaluate_uses_half_threshold() {
        let probe = Probe {
            weights: vec![1.0],
            bias: 0.0,
            losses: vec![],
        };
        let x = EmbeddingMatrix::new(1, vec!["a".into(), "b".into(), "c".into()], vec![0.0, -1.0, 2.0], false).unwrap();
        let m = evaluate(&probe, &x, &[Label::Defective, Label::Clean, Label::Clean]).unwrap();
        // logit 0 is probability 0.5, which counts as defective
        assert_eq!(m.confusion, confusion(1, 1, 0, 1));
        let empty = EmbeddingMatrix::new(1, vec![], vec![], false).unwrap();
        assert!(evaluate(&probe, &empty, &[]).is_err());
    }
}
