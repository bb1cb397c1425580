use rand::seq::SliceRandom;
use rand::Rng;

use super::{Adam, LayerShape, MlpSpec, ParamVector};
use crate::error::{Error, Result};

/// Dense autoencoder `x -> f1 -> code -> f2 -> x_hat` with a linear code and
/// a mirrored decoder.
#[derive(Debug, Clone)]
pub struct Autoencoder {
    enc_spec: MlpSpec,
    dec_spec: MlpSpec,
    enc: ParamVector,
    dec: ParamVector,
}

impl Autoencoder {
    /// Encoder `dim -> hidden... -> latent`, decoder `latent -> reversed hidden... -> dim`.
    pub fn new<R: Rng + ?Sized>(dim: usize, hidden: &[usize], latent: usize, rng: &mut R) -> Result<Self> {
        let enc_spec = MlpSpec::with_hidden(dim, hidden, latent)?;
        let rev: Vec<usize> = hidden.iter().rev().copied().collect();
        let dec_spec = MlpSpec::with_hidden(latent, &rev, dim)?;
        let enc = enc_spec.init(rng);
        let dec = dec_spec.init(rng);
        Ok(Self {
            enc_spec,
            dec_spec,
            enc,
            dec,
        })
    }

    pub fn dim(&self) -> usize {
        self.enc_spec.input_width()
    }

    pub fn latent(&self) -> usize {
        self.enc_spec.output_width()
    }

    pub fn decoder_spec(&self) -> &MlpSpec {
        &self.dec_spec
    }

    pub fn decoder(&self) -> &ParamVector {
        &self.dec
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.enc_spec.forward(&self.enc, x)
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        let code = self.enc_spec.forward(&self.enc, x)?;
        self.dec_spec.forward(&self.dec, &code)
    }

    /// `||x - f2(f1(x))||_2`
    pub fn reconstruction_error(&self, x: &[f64]) -> Result<f64> {
        let y = self.reconstruct(x)?;
        Ok(x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
    }

    /// Encoder and decoder parameters concatenated, encoder first.
    pub fn joint_params(&self) -> ParamVector {
        let mut shapes: Vec<LayerShape> = self.enc.shapes().to_vec();
        shapes.extend_from_slice(self.dec.shapes());
        let mut values = self.enc.values().to_vec();
        values.extend_from_slice(self.dec.values());
        ParamVector::from_values(&shapes, values).expect("concatenated layout")
    }

    fn split(&self, joint: &ParamVector) -> Result<(ParamVector, ParamVector)> {
        let n_enc = self.enc.len();
        if joint.len() != n_enc + self.dec.len() {
            return Err(Error::Shape("joint autoencoder vector has the wrong length".into()));
        }
        let enc = ParamVector::from_values(self.enc.shapes(), joint.values()[..n_enc].to_vec())?;
        let dec = ParamVector::from_values(self.dec.shapes(), joint.values()[n_enc..].to_vec())?;
        Ok((enc, dec))
    }

    /// Mean squared reconstruction loss `1/(B d) sum_b ||x_b - x_hat_b||^2`
    /// and its gradient with respect to the joint parameter vector.
    pub fn loss_and_grad_joint(&self, joint: &ParamVector, batch: &[Vec<f64>]) -> Result<(f64, ParamVector)> {
        let (enc, dec) = self.split(joint)?;
        let (loss, ge, gd) = loss_and_grad(&self.enc_spec, &self.dec_spec, &enc, &dec, batch)?;
        let mut values = ge.into_values();
        values.extend(gd.into_values());
        Ok((loss, ParamVector::from_values(joint.shapes(), values)?))
    }

    pub fn loss(&self, batch: &[Vec<f64>]) -> Result<f64> {
        Ok(loss_and_grad(&self.enc_spec, &self.dec_spec, &self.enc, &self.dec, batch)?.0)
    }

    /// Adam over shuffled mini-batches. Returns the loss on `data` after the
    /// last epoch.
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        data: &[Vec<f64>],
        epochs: usize,
        batch: usize,
        lr: f64,
        rng: &mut R,
    ) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Precondition("autoencoder needs training data".into()));
        }
        let mut opt_e = Adam::new(self.enc.len(), lr);
        let mut opt_d = Adam::new(self.dec.len(), lr);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let batch = batch.max(1);
        for _ in 0..epochs {
            order.shuffle(rng);
            for chunk in order.chunks(batch) {
                let xs: Vec<Vec<f64>> = chunk.iter().map(|i| data[*i].clone()).collect();
                let (_, ge, gd) = loss_and_grad(&self.enc_spec, &self.dec_spec, &self.enc, &self.dec, &xs)?;
                opt_e.step(&mut self.enc, &ge)?;
                opt_d.step(&mut self.dec, &gd)?;
            }
        }
        self.loss(data)
    }
}

fn loss_and_grad(
    enc_spec: &MlpSpec,
    dec_spec: &MlpSpec,
    enc: &ParamVector,
    dec: &ParamVector,
    batch: &[Vec<f64>],
) -> Result<(f64, ParamVector, ParamVector)> {
    let mut ge = vec![0.0; enc.len()];
    let mut gd = vec![0.0; dec.len()];
    let mut loss = 0.0;
    if !batch.is_empty() {
        let scale = 1.0 / (batch.len() * enc_spec.input_width()) as f64;
        for x in batch {
            let te = enc_spec.forward_trace(enc, x)?;
            let td = dec_spec.forward_trace(dec, te.output())?;
            let up: Vec<f64> = td
                .output()
                .iter()
                .zip(x)
                .map(|(y, x)| {
                    loss += scale * (y - x) * (y - x);
                    2.0 * scale * (y - x)
                })
                .collect();
            let d_code = dec_spec.backward_accumulate(dec, &td, &up, &mut gd)?;
            enc_spec.backward_accumulate(enc, &te, &d_code, &mut ge)?;
        }
    }
    Ok((
        loss,
        ParamVector::from_values(enc.shapes(), ge)?,
        ParamVector::from_values(dec.shapes(), gd)?,
    ))
}
