use crate::error::{ensure_len, Error, Result};
use crate::numkit::{
    fit, BatchObjective, FitConfig, GradBlocks, LossHistory, Matrix, Mlp, MlpGrads, Parameterized,
    Regularizer,
};

/// Gradient buffers for a model made of MLPs, a fusion bias and an optional projection.
///
/// `nets` follows the owning model's `networks()` order.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorGrads {
    pub nets: Vec<MlpGrads>,
    pub b0: Vec<f64>,
    pub projection: Option<Matrix>,
}

impl OperatorGrads {
    pub fn zeros(nets: &[&Mlp], b0_len: usize, projection: Option<&Matrix>) -> Self {
        Self {
            nets: nets.iter().map(|n| MlpGrads::zeros_like(n)).collect(),
            b0: vec![0.0; b0_len],
            projection: projection.map(|p| Matrix::zeros(p.rows(), p.cols())),
        }
    }

    pub fn add_regularization(&mut self, nets: &[&Mlp], reg: &Regularizer) {
        for (net, g) in nets.iter().zip(self.nets.iter_mut()) {
            reg.add_gradient(net, g);
        }
    }

    /// All gradient entries in parameter order.
    pub fn flatten(&self) -> Vec<f64> {
        self.grad_blocks().into_iter().flatten().copied().collect()
    }
}

impl GradBlocks for OperatorGrads {
    fn grad_blocks(&self) -> Vec<&[f64]> {
        let mut blocks: Vec<&[f64]> = self.nets.iter().flat_map(|g| g.grad_blocks()).collect();
        blocks.push(&self.b0);
        if let Some(p) = &self.projection {
            blocks.push(p.as_slice());
        }
        blocks
    }
}

/// Parameter blocks of `nets`, then `b0`, then the projection if present.
pub(crate) fn operator_blocks<'a>(
    nets: Vec<&'a Mlp>,
    b0: &'a [f64],
    projection: Option<&'a Matrix>,
) -> Vec<&'a [f64]> {
    let mut blocks: Vec<&[f64]> = nets.into_iter().flat_map(|n| n.param_blocks()).collect();
    blocks.push(b0);
    if let Some(p) = projection {
        blocks.push(p.as_slice());
    }
    blocks
}

pub(crate) fn operator_blocks_mut<'a>(
    nets: Vec<&'a mut Mlp>,
    b0: &'a mut [f64],
    projection: Option<&'a mut Matrix>,
) -> Vec<&'a mut [f64]> {
    let mut blocks: Vec<&mut [f64]> =
        nets.into_iter().flat_map(|n| n.param_blocks_mut()).collect();
    blocks.push(b0);
    if let Some(p) = projection {
        blocks.push(p.as_mut_slice());
    }
    blocks
}

/// A model trained by per-sample squared error.
pub trait SampleModel: Parameterized {
    type Sample;

    /// Constituent networks in gradient order; used for regularization.
    fn networks(&self) -> Vec<&Mlp>;

    fn zero_grads(&self) -> OperatorGrads;

    /// Mean squared error of one sample; adds `weight · d(loss)/dθ` to `grads`.
    fn sample_loss_grad(
        &self,
        sample: &Self::Sample,
        weight: f64,
        grads: &mut OperatorGrads,
    ) -> Result<f64>;

    fn sample_loss(&self, sample: &Self::Sample) -> Result<f64>;
}

/// Sum of the regularization penalty over every network of `model`.
pub fn model_penalty<M: SampleModel>(model: &M, reg: &Regularizer) -> Result<f64> {
    model
        .networks()
        .iter()
        .map(|n| reg.penalty(n))
        .sum::<Result<f64>>()
}

/// Mean squared error over batch and output dims plus the regularization penalty.
pub fn operator_loss<M: SampleModel>(
    predictions: &[Vec<f64>],
    targets: &[Vec<f64>],
    model: &M,
    reg: &Regularizer,
) -> Result<f64> {
    ensure_len("prediction batch", predictions.len(), targets.len())?;
    if predictions.is_empty() {
        return Err(Error::argument("empty prediction batch"));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (p, t) in predictions.iter().zip(targets) {
        ensure_len("prediction", p.len(), t.len())?;
        for (a, b) in p.iter().zip(t) {
            total += (a - b) * (a - b);
        }
        count += p.len();
    }
    Ok(total / count as f64 + model_penalty(model, reg)?)
}

pub struct SampleObjective<'a, M: SampleModel> {
    pub train: &'a [M::Sample],
    pub val: &'a [M::Sample],
    pub reg: Regularizer,
}

impl<M: SampleModel> BatchObjective<M> for SampleObjective<'_, M> {
    type Grads = OperatorGrads;

    fn n_train(&self) -> usize {
        self.train.len()
    }

    fn batch_loss_grad(&self, model: &M, batch: &[usize]) -> Result<(f64, OperatorGrads)> {
        let mut grads = model.zero_grads();
        let w = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &i in batch {
            loss += model.sample_loss_grad(&self.train[i], w, &mut grads)?;
        }
        grads.add_regularization(&model.networks(), &self.reg);
        Ok((loss * w + model_penalty(model, &self.reg)?, grads))
    }

    fn val_loss(&self, model: &M) -> Result<Option<f64>> {
        if self.val.is_empty() {
            return Ok(None);
        }
        let mut total = 0.0;
        for s in self.val {
            total += model.sample_loss(s)?;
        }
        Ok(Some(total / self.val.len() as f64))
    }
}

/// Mean per-sample loss without regularization.
pub fn mean_sample_loss<M: SampleModel>(model: &M, samples: &[M::Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::argument("no samples"));
    }
    let mut total = 0.0;
    for s in samples {
        total += model.sample_loss(s)?;
    }
    Ok(total / samples.len() as f64)
}

pub fn train_samples<M: SampleModel>(
    model: &mut M,
    train: &[M::Sample],
    val: &[M::Sample],
    reg: Regularizer,
    cfg: &FitConfig,
) -> Result<LossHistory> {
    if train.is_empty() {
        return Err(Error::argument("operator training set is empty"));
    }
    let objective = SampleObjective::<M> { train, val, reg };
    fit(model, &objective, cfg)
}
