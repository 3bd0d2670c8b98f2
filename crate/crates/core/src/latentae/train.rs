use super::model::AeGrads;
use super::{AutoencoderConfig, Normalizer, TrainedAutoencoder};
use crate::error::{ensure_len, Error, Result};
use crate::numkit::{fit, BatchObjective, LossHistory, MlpGrads, Regularizer};

/// Mean squared reconstruction error in normalized units.
struct ReconstructionObjective {
    train: Vec<Vec<f64>>,
    val: Vec<Vec<f64>>,
    reg: Regularizer,
}

impl ReconstructionObjective {
    fn sample_loss(ae: &TrainedAutoencoder, x: &[f64]) -> Result<f64> {
        let rec = ae.decoder.predict(&ae.encoder.predict(x)?)?;
        Ok(rec.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
    }

    fn penalty(&self, ae: &TrainedAutoencoder) -> Result<f64> {
        Ok(self.reg.penalty(&ae.encoder)? + self.reg.penalty(&ae.decoder)?)
    }
}

impl BatchObjective<TrainedAutoencoder> for ReconstructionObjective {
    type Grads = AeGrads;

    fn n_train(&self) -> usize {
        self.train.len()
    }

    fn batch_loss_grad(&self, ae: &TrainedAutoencoder, batch: &[usize]) -> Result<(f64, AeGrads)> {
        let mut grads = AeGrads {
            encoder: MlpGrads::zeros_like(&ae.encoder),
            decoder: MlpGrads::zeros_like(&ae.decoder),
        };
        let inv_b = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &idx in batch {
            let x = &self.train[idx];
            let (z, enc_tape) = ae.encoder.forward(x)?;
            let (rec, dec_tape) = ae.decoder.forward(&z)?;
            let inv_n = 1.0 / x.len() as f64;
            let mut dy = vec![0.0; x.len()];
            for ((d, r), t) in dy.iter_mut().zip(&rec).zip(x) {
                let e = r - t;
                loss += e * e * inv_n;
                *d = 2.0 * e * inv_n * inv_b;
            }
            let dz = ae.decoder.backward_acc(&dec_tape, &dy, &mut grads.decoder)?;
            ae.encoder.backward_acc(&enc_tape, &dz, &mut grads.encoder)?;
        }
        self.reg.add_gradient(&ae.encoder, &mut grads.encoder);
        self.reg.add_gradient(&ae.decoder, &mut grads.decoder);
        Ok((loss * inv_b + self.penalty(ae)?, grads))
    }

    fn val_loss(&self, ae: &TrainedAutoencoder) -> Result<Option<f64>> {
        if self.val.is_empty() {
            return Ok(None);
        }
        let mut total = 0.0;
        for x in &self.val {
            total += Self::sample_loss(ae, x)?;
        }
        Ok(Some(total / self.val.len() as f64))
    }
}

/// Fits normalization on `train`, then trains encoder and decoder jointly.
///
/// Losses in the returned history are in normalized units.
pub fn train_autoencoder(
    cfg: &AutoencoderConfig,
    train: &[Vec<f64>],
    val: &[Vec<f64>],
) -> Result<(TrainedAutoencoder, LossHistory)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::argument("autoencoder training set is empty"));
    }
    for s in train.iter().chain(val) {
        ensure_len("snapshot", s.len(), cfg.n_s)?;
    }
    let norm = Normalizer::fit(train)?;
    let mut ae = TrainedAutoencoder::random(cfg, norm)?;
    let objective = ReconstructionObjective {
        train: train.iter().map(|s| ae.norm.normalize(s)).collect::<Result<_>>()?,
        val: val.iter().map(|s| ae.norm.normalize(s)).collect::<Result<_>>()?,
        reg: cfg.regularizer,
    };
    let history = fit(&mut ae, &objective, &cfg.fit).map_err(|e| match e {
        Error::Divergence(msg) => Error::Divergence(format!("autoencoder: {msg}")),
        other => other,
    })?;
    if !ae.encoder.is_finite() || !ae.decoder.is_finite() {
        return Err(Error::Divergence("autoencoder weights became non-finite".into()));
    }
    Ok((ae, history))
}

/// Mean normalized-unit reconstruction error, comparable with training losses.
pub fn normalized_reconstruction_mse(ae: &TrainedAutoencoder, data: &[Vec<f64>]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::argument("reconstruction error of an empty set"));
    }
    let mut total = 0.0;
    for s in data {
        total += ReconstructionObjective::sample_loss(ae, &ae.norm.normalize(s)?)?;
    }
    Ok(total / data.len() as f64)
}
