use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Backtracking gives up on an epoch once the step falls below this share of
/// the configured learning rate.
const MIN_STEP_SHARE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_penalty: f64,
    /// Training itself is seed-free (zero initialization, full batches).
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 50,
            l2_penalty: 1e-4,
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::param("probe epochs must be >= 1"));
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return Err(Error::param(format!(
                "l2 penalty {} must be non-negative",
                self.l2_penalty
            )));
        }
        Ok(())
    }
}

/// Logistic-regression weights. The bias is not penalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Objective value after each epoch of the most recent training phase.
    pub losses: Vec<f64>,
}

impl Probe {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
            losses: Vec::new(),
        }
    }

    pub fn logit(&self, x: &[f32]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * *v as f64).sum::<f64>()
    }

    /// Defective iff the predicted probability is at least 0.5.
    pub fn predict(&self, x: &[f32]) -> Label {
        Label::from(self.logit(x) >= 0.0)
    }
}

/// `log(1 + e^z) - y z` without overflow.
fn cross_entropy(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct Objective<'a> {
    x: &'a EmbeddingMatrix,
    y: Vec<f64>,
    l2: f64,
}

impl Objective<'_> {
    fn loss(&self, w: &[f64], b: f64) -> f64 {
        let n = self.x.rows() as f64;
        let data: f64 = self
            .x
            .iter_rows()
            .zip(&self.y)
            .map(|(row, &y)| {
                let z = b + w.iter().zip(row).map(|(w, v)| w * *v as f64).sum::<f64>();
                cross_entropy(z, y)
            })
            .sum();
        data / n + 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let n = self.x.rows() as f64;
        let mut gw = vec![0.0; w.len()];
        let mut gb = 0.0;
        for (row, &y) in self.x.iter_rows().zip(&self.y) {
            let z = b + w.iter().zip(row).map(|(w, v)| w * *v as f64).sum::<f64>();
            let r = sigmoid(z) - y;
            gb += r;
            gw.iter_mut().zip(row).for_each(|(g, v)| *g += r * *v as f64);
        }
        gw.iter_mut().zip(w).for_each(|(g, w)| *g = *g / n + self.l2 * w);
        (gw, gb / n)
    }
}

fn check_training_set(x: &EmbeddingMatrix, labels: &[Label]) -> Result<()> {
    if labels.len() != x.rows() {
        return Err(Error::InvalidData(format!(
            "{} labels for {} rows",
            labels.len(),
            x.rows()
        )));
    }
    let positives = labels.iter().filter(|l| l.is_defective()).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::DegenerateTrainingSet(format!(
            "{} samples, {} defective: need at least one of each class",
            labels.len(),
            positives
        )));
    }
    Ok(())
}

/// Trains a fresh probe from zero weights.
pub fn train_probe(x: &EmbeddingMatrix, labels: &[Label], config: &ProbeConfig) -> Result<Probe> {
    continue_training(Probe::zeros(x.dim()), x, labels, config)
}

/// Full-batch gradient descent on mean cross-entropy plus
/// `l2_penalty / 2 * |w|^2`, starting from `probe`. Each epoch halves the
/// step until the objective does not increase; the reduced step carries over
/// to later epochs of the same call.
pub fn continue_training(
    mut probe: Probe,
    x: &EmbeddingMatrix,
    labels: &[Label],
    config: &ProbeConfig,
) -> Result<Probe> {
    config.validate()?;
    check_training_set(x, labels)?;
    if probe.weights.len() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: probe.weights.len(),
            actual: x.dim(),
        });
    }
    let objective = Objective {
        x,
        y: labels.iter().map(|l| l.as_u8() as f64).collect(),
        l2: config.l2_penalty,
    };

    let mut step = config.learning_rate;
    let mut loss = objective.loss(&probe.weights, probe.bias);
    if !loss.is_finite() {
        return Err(Error::NanLoss { epoch: 0 });
    }
    probe.losses.clear();
    for epoch in 1..=config.epochs {
        let (gw, gb) = objective.gradient(&probe.weights, probe.bias);
        loop {
            let w: Vec<f64> = probe.weights.iter().zip(&gw).map(|(w, g)| w - step * g).collect();
            let b = probe.bias - step * gb;
            let next = objective.loss(&w, b);
            if next.is_nan() {
                return Err(Error::NanLoss { epoch });
            }
            if next <= loss {
                probe.weights = w;
                probe.bias = b;
                loss = next;
                break;
            }
            step /= 2.0;
            if step < config.learning_rate * MIN_STEP_SHARE {
                break;
            }
        }
        probe.losses.push(loss);
    }
    Ok(probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Blobs at (+-2, 0) with unit noise, labelled by blob. Points that would
    /// cross the x = 0 margin are redrawn, so the set is separable by x.
    fn blobs(n: usize, seed: u64) -> (EmbeddingMatrix, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let positive = i % 2 == 0;
            let cx = if positive { 2.0 } else { -2.0 };
            let (x, y) = loop {
                let x: f64 = cx + Distribution::<f64>::sample(&StandardNormal, &mut rng);
                let y: f64 = StandardNormal.sample(&mut rng);
                if (x > 0.0) == positive {
                    break (x, y);
                }
            };
            data.extend([x as f32, y as f32]);
            labels.push(Label::from(positive));
        }
        let ids = (0..n).map(|i| format!("s{i}")).collect();
        (EmbeddingMatrix::new(2, ids, data, false).unwrap(), labels)
    }

    fn config(epochs: usize, l2: f64) -> ProbeConfig {
        ProbeConfig {
            learning_rate: 0.1,
            epochs,
            l2_penalty: l2,
            seed: 0,
        }
    }

    #[test]
    fn separable_blobs_fit() {
        let (x, y) = blobs(200, 1);
        let p = train_probe(&x, &y, &config(200, 0.0)).unwrap();
        let correct = x.iter_rows().zip(&y).filter(|(r, l)| p.predict(r) == **l).count();
        assert!(correct as f64 / 200.0 >= 0.99, "{correct}");
        assert!(p.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn flipped_labels_negate_weights() {
        let (x, y) = blobs(200, 2);
        let flipped: Vec<Label> = y.iter().map(|l| l.flipped()).collect();
        let a = train_probe(&x, &y, &config(200, 1e-3)).unwrap();
        let b = train_probe(&x, &flipped, &config(200, 1e-3)).unwrap();
        let dot: f64 = a.weights.iter().zip(&b.weights).map(|(p, q)| p * q).sum();
        let na: f64 = a.weights.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb: f64 = b.weights.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(dot / (na * nb) <= -0.99);
    }

    #[test]
    fn huge_penalty_shrinks_weights() {
        let (x, y) = blobs(200, 3);
        let p = train_probe(&x, &y, &config(200, 1e6)).unwrap();
        let norm: f64 = p.weights.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-2, "{norm}");
        assert!(p.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn single_class_is_degenerate() {
        let (x, _) = blobs(10, 4);
        let y = vec![Label::Clean; 10];
        assert!(matches!(
            train_probe(&x, &y, &config(5, 0.0)),
            Err(Error::DegenerateTrainingSet(_))
        ));
        let empty = EmbeddingMatrix::new(2, vec![], vec![], false).unwrap();
        assert!(matches!(
            train_probe(&empty, &[], &config(5, 0.0)),
            Err(Error::DegenerateTrainingSet(_))
        ));
    }

    #[test]
    fn deterministic_and_continuable() {
        let (x, y) = blobs(100, 5);
        let a = train_probe(&x, &y, &config(30, 1e-3)).unwrap();
        assert_eq!(a, train_probe(&x, &y, &config(30, 1e-3)).unwrap());
        let more = continue_training(a.clone(), &x, &y, &config(10, 1e-3)).unwrap();
        assert!(more.losses[9] <= a.losses[29]);
    }

    #[test]
    fn bad_inputs() {
        let (x, y) = blobs(10, 6);
        assert!(train_probe(&x, &y[..5], &config(5, 0.0)).is_err());
        assert!(train_probe(&x, &y, &config(0, 0.0)).is_err());
        // Logits overflow to +-inf and inf - inf poisons the loss.
        let start = Probe {
            weights: vec![1e308, 1e308],
            bias: 0.0,
            losses: vec![],
        };
        let big = EmbeddingMatrix::new(2, x.ids().to_vec(), vec![3e38; 20], false).unwrap();
        assert!(matches!(
            continue_training(start, &big, &y, &config(3, 0.0)),
            Err(Error::NanLoss { epoch: 0 })
        ));
    }

    #[test]
    fn cross_entropy_is_stable() {
        assert!((cross_entropy(0.0, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(cross_entropy(1000.0, 1.0) < 1e-300);
        assert!((cross_entropy(-1000.0, 1.0) - 1000.0).abs() < 1e-9);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }
}
