//! Mini-batch training with Adam, mixup and spectrum masking.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fusion::predict_label;
use super::loss::{add_l2_gradient, cross_entropy_loss, kl_mixup_loss};
use crate::augment::{mixup_batch, spec_augment, MixupConfig, SpecAugmentConfig};
use crate::error::{Error, Result};
use crate::frontend::Patch;
use crate::nn::{AdamConfig, AdamState, Mode, Network, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean cross-entropy against one-hot labels.
    CrossEntropy,
    /// Summed KL divergence against soft labels plus an L2 penalty.
    KlMixup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 100,
            l2_lambda: 1e-4,
            learning_rate: 1e-3,
            batch_size: 32,
            loss: LossKind::KlMixup,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::Config(format!("l2_lambda must be >= 0, got {}", self.l2_lambda)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Labelled patches sharing one `[bins × frames × channels]` shape.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchDataset {
    pub shape: [usize; 3],
    pub n_classes: usize,
    pub inputs: Vec<Vec<f32>>,
    pub labels: Vec<usize>,
}

impl PatchDataset {
    pub fn new(shape: [usize; 3], n_classes: usize) -> Self {
        PatchDataset {
            shape,
            n_classes,
            inputs: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, values: Vec<f32>, label: usize) -> Result<()> {
        let expected = self.shape.iter().product::<usize>();
        if values.len() != expected {
            return Err(Error::shape("training patch", &[values.len()], &[expected]));
        }
        if label >= self.n_classes {
            return Err(Error::Validation(format!(
                "label {label} out of range for {} classes",
                self.n_classes
            )));
        }
        self.inputs.push(values);
        self.labels.push(label);
        Ok(())
    }

    /// Every patch inherits its recording's label.
    pub fn push_patches(&mut self, patches: Vec<Patch>, label: usize) -> Result<()> {
        for p in patches {
            if p.shape() != self.shape {
                return Err(Error::shape(format!("patch {} of {}", p.index, p.source_id), &p.shape(), &self.shape));
            }
            self.push(p.values, label)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Fraction of training patches whose arg-max matched the dominant target class.
    pub train_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub epochs: Vec<EpochStats>,
}

impl LossCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss,train_acc\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{:.8},{:.6}\n", e.epoch, e.mean_loss, e.train_acc));
        }
        out
    }

    pub fn first(&self) -> Option<&EpochStats> {
        self.epochs.first()
    }

    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn one_hot<T: Scalar>(labels: &[usize], n_classes: usize) -> Tensor<T> {
    let mut y = Tensor::zeros(&[labels.len(), n_classes]);
    for (i, &l) in labels.iter().enumerate() {
        y.data_mut()[i * n_classes + l] = T::one();
    }
    y
}

fn row_argmax<T: Scalar>(t: &Tensor<T>, row: usize) -> usize {
    let c = t.item_len();
    let scores: Vec<f64> = t.data()[row * c..(row + 1) * c].iter().map(|v| v.f64()).collect();
    predict_label(&scores).unwrap_or(0)
}

fn gather<T: Scalar>(data: &PatchDataset, idx: &[usize]) -> Result<Tensor<T>> {
    let [h, w, c] = data.shape;
    let values = idx
        .iter()
        .flat_map(|&i| data.inputs[i].iter().map(|&v| T::lit(v as f64)))
        .collect();
    Tensor::from_vec(&[idx.len(), h, w, c], values)
}

/// Trains `net` in place and returns the per-epoch loss curve.
///
/// Each epoch reshuffles the patches; every batch draws its masks, mixup
/// coefficient and dropout from its own generator derived from the seed,
/// epoch and batch index.
pub fn train<T: Scalar>(
    net: &mut Network<T>,
    data: &PatchDataset,
    cfg: &TrainingConfig,
    mixup: &MixupConfig,
    masking: &SpecAugmentConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<LossCurve> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    let [h, w, c] = data.shape;
    if net.input_shape() != [h, w, c] {
        return Err(Error::shape("training patches vs model input", &data.shape, net.input_shape()));
    }
    if mixup.enabled {
        mixup.validate()?;
        if cfg.loss == LossKind::CrossEntropy {
            return Err(Error::Config(
                "cross-entropy expects one-hot labels; disable mixup or use kl_mixup".into(),
            ));
        }
    }
    if masking.enabled {
        masking.validate_for(h, w)?;
    }

    let adam_cfg = AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(adam_cfg, &net.params());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = LossCurve::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng_for(cfg.seed, u64::MAX - epoch as u64));
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut hits = 0usize;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let mut rng = rng_for(cfg.seed, ((epoch as u64) << 32) | b as u64);
            let mut x: Tensor<T> = gather(data, idx)?;
            if masking.enabled {
                let item = h * w * c;
                let mut vals = x.to_f32_vec();
                for chunk in vals.chunks_mut(item) {
                    spec_augment(chunk, data.shape, masking, &mut rng);
                }
                x = Tensor::from_f32(x.shape(), &vals)?;
            }
            let labels: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
            let mut y: Tensor<T> = one_hot(&labels, data.n_classes);
            if mixup.enabled {
                let lambda = mixup.sample_lambda(&mut rng);
                let mut partner: Vec<usize> = (0..idx.len()).collect();
                partner.shuffle(&mut rng);
                let x2 = permute_rows(&x, &partner)?;
                let y2 = permute_rows(&y, &partner)?;
                (x, y) = mixup_batch(&x, &x2, &y, &y2, lambda)?;
            }

            net.zero_grads();
            let out = net.forward(&x, Mode::Train, &mut rng)?;
            let loss = match cfg.loss {
                LossKind::CrossEntropy => cross_entropy_loss(&out, &y)?,
                LossKind::KlMixup => kl_mixup_loss(&out, &y, &net.params(), cfg.l2_lambda)?,
            };
            if !loss.value.is_finite() {
                return Err(Error::Numerical(format!(
                    "loss is {} at epoch {epoch}, batch {}",
                    loss.value,
                    b + 1
                )));
            }
            net.backward(&loss.grad)?;
            if cfg.loss == LossKind::KlMixup {
                add_l2_gradient(&mut net.params_mut(), cfg.l2_lambda);
            }
            adam.step(&mut net.params_mut()).map_err(|e| match e {
                Error::Numerical(m) => Error::Numerical(format!("{m} (epoch {epoch}, batch {})", b + 1)),
                other => other,
            })?;

            hits += (0..idx.len()).filter(|&r| row_argmax(&out, r) == row_argmax(&y, r)).count();
            loss_sum += loss.value;
            batches += 1;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / batches as f64,
            train_acc: hits as f64 / data.len() as f64,
        };
        on_epoch(&stats);
        curve.epochs.push(stats);
    }
    Ok(curve)
}

fn permute_rows<T: Scalar>(t: &Tensor<T>, perm: &[usize]) -> Result<Tensor<T>> {
    let n = t.item_len();
    let data = perm
        .iter()
        .flat_map(|&p| t.data()[p * n..(p + 1) * n].iter().copied())
        .collect();
    Tensor::from_vec(t.shape(), data)
}

/// Softmax outputs for each input, computed in inference mode.
pub fn predict_patches<T: Scalar>(
    net: &Network<T>,
    inputs: &[&[f32]],
    batch_size: usize,
) -> Result<Vec<Vec<f64>>> {
    let shape = net.input_shape().to_vec();
    let item: usize = shape.iter().product();
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(batch_size.max(1)) {
        let mut flat = Vec::with_capacity(chunk.len() * item);
        for x in chunk {
            if x.len() != item {
                return Err(Error::shape("inference patch", &[x.len()], &[item]));
            }
            flat.extend_from_slice(x);
        }
        let mut dims = vec![chunk.len()];
        dims.extend_from_slice(&shape);
        let probs = net.infer(&Tensor::from_f32(&dims, &flat)?)?;
        let c = probs.item_len();
        out.extend(
            probs
                .data()
                .chunks(c)
                .map(|row| row.iter().map(|v| v.f64()).collect::<Vec<_>>()),
        );
    }
    Ok(out)
}

/// Inference-mode patch accuracy over a dataset, in `[0, 1]`.
pub fn patch_accuracy<T: Scalar>(net: &Network<T>, data: &PatchDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Validation("dataset is empty".into()));
    }
    let inputs: Vec<&[f32]> = data.inputs.iter().map(Vec::as_slice).collect();
    let probs = predict_patches(net, &inputs, 64)?;
    let mut hits = 0;
    for (p, &l) in probs.iter().zip(&data.labels) {
        if predict_label(p)? == l {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn7::{build_cnn7, Variant};

    fn toy() -> (Network<f32>, PatchDataset) {
        let spec = build_cnn7(Variant::Crdc, 2)
            .unwrap()
            .with_input_shape([8, 8, 3])
            .unwrap();
        let net = spec.network::<f32>(1).unwrap();
        let mut data = PatchDataset::new([8, 8, 3], 2);
        for i in 0..6 {
            let v = if i % 2 == 0 { 1.0 } else { -1.0 };
            data.push(vec![v; 192], i % 2).unwrap();
        }
        (net, data)
    }

    #[test]
    fn zero_learning_rate_leaves_weights() {
        let (mut net, data) = toy();
        let before: Vec<Vec<f32>> = net.params().iter().map(|p| p.value.to_f32_vec()).collect();
        let cfg = TrainingConfig {
            epochs: 2,
            learning_rate: 0.0,
            batch_size: 3,
            ..TrainingConfig::default()
        };
        train(&mut net, &data, &cfg, &MixupConfig::default(), &SpecAugmentConfig { enabled: false, ..Default::default() }, |_| {}).unwrap();
        let after: Vec<Vec<f32>> = net.params().iter().map(|p| p.value.to_f32_vec()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn cross_entropy_with_mixup_is_rejected() {
        let (mut net, data) = toy();
        let cfg = TrainingConfig {
            loss: LossKind::CrossEntropy,
            epochs: 1,
            ..TrainingConfig::default()
        };
        let err = train(&mut net, &data, &cfg, &MixupConfig::default(), &SpecAugmentConfig::default(), |_| {});
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (mut net, _) = toy();
        let data = PatchDataset {
            shape: [4, 4, 3],
            n_classes: 2,
            inputs: vec![vec![0.0; 48]],
            labels: vec![0],
        };
        let off = SpecAugmentConfig { enabled: false, ..Default::default() };
        assert!(train(&mut net, &data, &TrainingConfig::default(), &MixupConfig::default(), &off, |_| {}).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let curve = LossCurve {
            epochs: vec![EpochStats { epoch: 1, mean_loss: 0.5, train_acc: 0.25 }],
        };
        assert_eq!(curve.to_csv(), "epoch,mean_loss,train_acc\n1,0.50000000,0.250000\n");
    }
}
