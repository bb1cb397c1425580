use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Adam, Autoencoder, MlpSpec, ParamVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    /// Real samples collected before training starts.
    pub warmup_samples: usize,
    pub latent_dim: usize,
    pub gen_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub gan_lr: f64,
    pub ae_epochs: usize,
    pub ae_lr: f64,
    pub batch: usize,
    /// Alternating steps run each aggregation round once training starts.
    pub steps_per_round: usize,
    /// Total alternating steps before the generator is used for attacks.
    pub min_train_steps: usize,
    /// `(mu, sigma)` of the training noise.
    pub train_noise: (f64, f64),
    /// `(mu, sigma)` of the noise used to generate submissions.
    pub attack_noise: (f64, f64),
    pub generator_loss: GeneratorLoss,
}

/// Objective the generator minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorLoss {
    /// `mean log(1 - D(G(z)))`.
    #[default]
    Saturating,
    /// `-mean log D(G(z))`: same fixed point, but keeps its gradient when
    /// the discriminator rejects the fakes confidently.
    NonSaturating,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            warmup_samples: 64,
            latent_dim: 16,
            gen_hidden: vec![128, 128],
            disc_hidden: vec![128, 128],
            gan_lr: 1e-3,
            ae_epochs: 200,
            ae_lr: 1e-3,
            batch: 16,
            steps_per_round: 5,
            min_train_steps: 50,
            train_noise: (0.0, 1.0),
            attack_noise: (0.5, 1.0),
            generator_loss: GeneratorLoss::Saturating,
        }
    }
}

impl GanConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let err = |k: &str, m: &str| Err(Error::config(format!("{prefix}{k}"), m));
        if self.warmup_samples < 2 {
            return err("warmup_samples", "need at least two samples");
        }
        if self.latent_dim == 0 {
            return err("latent_dim", "must be positive");
        }
        if self.gen_hidden.contains(&0) {
            return err("gen_hidden", "widths must be positive");
        }
        if self.disc_hidden.contains(&0) {
            return err("disc_hidden", "widths must be positive");
        }
        if !(self.gan_lr > 0.0 && self.gan_lr.is_finite()) {
            return err("gan_lr", "must be positive");
        }
        if !(self.ae_lr > 0.0 && self.ae_lr.is_finite()) {
            return err("ae_lr", "must be positive");
        }
        if self.batch == 0 {
            return err("batch", "must be positive");
        }
        if !(self.train_noise.1 > 0.0) {
            return err("train_noise", "sigma must be positive");
        }
        if !(self.attack_noise.1 > 0.0) {
            return err("attack_noise", "sigma must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanPhase {
    Collecting,
    Training,
    Attacking,
}

const SPREAD_FLOOR: f64 = 1e-8;

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Discriminator loss and its gradient with respect to the discriminator:
///
/// `L_D = -1/K sum_k [log D(x_k) + log(1 - D(G(z_k)))]`
///
/// with `D = sigmoid(logit)`. This is the negation of the objective the
/// discriminator maximizes.
pub fn discriminator_loss_and_grad(
    disc_spec: &MlpSpec,
    disc: &ParamVector,
    gen_spec: &MlpSpec,
    gen: &ParamVector,
    real: &[Vec<f64>],
    z: &[Vec<f64>],
) -> Result<(f64, ParamVector)> {
    let mut grad = vec![0.0; disc.len()];
    let mut loss = 0.0;
    if !real.is_empty() {
        let s = 1.0 / real.len() as f64;
        for x in real {
            let tr = disc_spec.forward_trace(disc, x)?;
            let l = tr.output()[0];
            loss += s * softplus(-l);
            disc_spec.backward_accumulate(disc, &tr, &[s * (sigmoid(l) - 1.0)], &mut grad)?;
        }
    }
    if !z.is_empty() {
        let s = 1.0 / z.len() as f64;
        for zk in z {
            let fake = gen_spec.forward(gen, zk)?;
            let tr = disc_spec.forward_trace(disc, &fake)?;
            let l = tr.output()[0];
            loss += s * softplus(l);
            disc_spec.backward_accumulate(disc, &tr, &[s * sigmoid(l)], &mut grad)?;
        }
    }
    Ok((loss, ParamVector::from_values(disc.shapes(), grad)?))
}

/// Generator loss `L_G = 1/K sum_k log(1 - D(G(z_k)))` and its gradient with
/// respect to the generator.
pub fn generator_loss_and_grad(
    gen_spec: &MlpSpec,
    gen: &ParamVector,
    disc_spec: &MlpSpec,
    disc: &ParamVector,
    z: &[Vec<f64>],
) -> Result<(f64, ParamVector)> {
    generator_objective(gen_spec, gen, disc_spec, disc, z, GeneratorLoss::Saturating)
}

/// Generator loss of either form and its gradient with respect to the
/// generator.
pub fn generator_objective(
    gen_spec: &MlpSpec,
    gen: &ParamVector,
    disc_spec: &MlpSpec,
    disc: &ParamVector,
    z: &[Vec<f64>],
    kind: GeneratorLoss,
) -> Result<(f64, ParamVector)> {
    let mut grad = vec![0.0; gen.len()];
    let mut scratch = vec![0.0; disc.len()];
    let mut loss = 0.0;
    if !z.is_empty() {
        let s = 1.0 / z.len() as f64;
        for zk in z {
            let tg = gen_spec.forward_trace(gen, zk)?;
            let td = disc_spec.forward_trace(disc, tg.output())?;
            let l = td.output()[0];
            let dl = match kind {
                GeneratorLoss::Saturating => {
                    loss -= s * softplus(l);
                    -s * sigmoid(l)
                }
                GeneratorLoss::NonSaturating => {
                    loss += s * softplus(-l);
                    s * (sigmoid(l) - 1.0)
                }
            };
            let d_fake = disc_spec.backward_accumulate(disc, &td, &[dl], &mut scratch)?;
            gen_spec.backward_accumulate(gen, &tg, &d_fake, &mut grad)?;
        }
    }
    Ok((loss, ParamVector::from_values(gen.shapes(), grad)?))
}

/// Trains an autoencoder on the sample bank and returns its decoder, which
/// has the generator's architecture.
pub fn pretrain_generator_autoencoder(
    bank: &[Vec<f64>],
    cfg: &GanConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(MlpSpec, ParamVector, f64)> {
    if bank.len() < cfg.warmup_samples {
        return Err(Error::Precondition(format!(
            "{} samples collected, {} needed",
            bank.len(),
            cfg.warmup_samples
        )));
    }
    let dim = bank[0].len();
    let enc_hidden: Vec<usize> = cfg.gen_hidden.iter().rev().copied().collect();
    let mut ae = Autoencoder::new(dim, &enc_hidden, cfg.latent_dim, rng)?;
    let loss = ae.train(bank, cfg.ae_epochs, cfg.batch, cfg.ae_lr, rng)?;
    Ok((ae.decoder_spec().clone(), ae.decoder().clone(), loss))
}

/// Losses of one alternating step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GanLosses {
    pub discriminator: f64,
    pub generator: f64,
}

/// Generator/discriminator pair of one compromised participant together
/// with its bank of observed global output layers.
#[derive(Debug, Clone)]
pub struct GanState {
    cfg: GanConfig,
    phase: GanPhase,
    bank: Vec<Vec<f64>>,
    gen_spec: MlpSpec,
    disc_spec: MlpSpec,
    gen: ParamVector,
    disc: ParamVector,
    opt_g: Adam,
    opt_d: Adam,
    rng: ChaCha8Rng,
    steps: usize,
    ae_loss: Option<f64>,
    /// Per-coordinate mean and spread of the bank. The generator and the
    /// discriminator work on standardized blocks.
    center: Vec<f64>,
    spread: Vec<f64>,
    standardized: Vec<Vec<f64>>,
}

impl GanState {
    /// `block_len` is the parameter count of the victim's output layer.
    pub fn new(cfg: GanConfig, block_len: usize, seed: u64) -> Result<Self> {
        cfg.validate("attack.gan.")?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gen_spec = MlpSpec::with_hidden(cfg.latent_dim, &cfg.gen_hidden, block_len)?;
        let disc_spec = MlpSpec::with_hidden(block_len, &cfg.disc_hidden, 1)?;
        let gen = gen_spec.init(&mut rng);
        let disc = disc_spec.init(&mut rng);
        Ok(Self {
            opt_g: Adam::new(gen.len(), cfg.gan_lr),
            opt_d: Adam::new(disc.len(), cfg.gan_lr),
            cfg,
            phase: GanPhase::Collecting,
            bank: Vec::new(),
            gen_spec,
            disc_spec,
            gen,
            disc,
            rng,
            steps: 0,
            ae_loss: None,
            center: vec![0.0; block_len],
            spread: vec![1.0; block_len],
            standardized: Vec::new(),
        })
    }

    pub fn config(&self) -> &GanConfig {
        &self.cfg
    }

    pub fn phase(&self) -> GanPhase {
        self.phase
    }

    pub fn bank(&self) -> &[Vec<f64>] {
        &self.bank
    }

    pub fn generator(&self) -> (&MlpSpec, &ParamVector) {
        (&self.gen_spec, &self.gen)
    }

    pub fn discriminator(&self) -> (&MlpSpec, &ParamVector) {
        (&self.disc_spec, &self.disc)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn autoencoder_loss(&self) -> Option<f64> {
        self.ae_loss
    }

    /// Records the output layer of a received global model while collecting.
    pub fn observe_global(&mut self, global: &ParamVector) -> Result<()> {
        let block = &global.values()[global.output_layer_range()];
        if block.len() != self.gen_spec.output_width() {
            return Err(Error::Shape(format!(
                "output layer has {} values, generator emits {}",
                block.len(),
                self.gen_spec.output_width()
            )));
        }
        if self.phase == GanPhase::Collecting {
            self.bank.push(block.to_vec());
        }
        Ok(())
    }

    /// Per-round bookkeeping: leaves the collecting phase once the bank is
    /// full (initializing the generator from a pretrained decoder), then
    /// runs `steps_per_round` alternating steps. Returns the losses of the
    /// last step, if any ran.
    pub fn advance(&mut self) -> Result<Option<GanLosses>> {
        if self.phase == GanPhase::Collecting {
            if self.bank.len() < self.cfg.warmup_samples {
                return Ok(None);
            }
            self.fit_standardization();
            let (spec, dec, loss) = pretrain_generator_autoencoder(&self.standardized, &self.cfg, &mut self.rng)?;
            debug_assert_eq!(spec.widths(), self.gen_spec.widths());
            self.gen = dec;
            self.ae_loss = Some(loss);
            self.phase = GanPhase::Training;
        }
        let mut last = None;
        for _ in 0..self.cfg.steps_per_round {
            last = Some(self.train_attack_gan()?);
        }
        if self.steps >= self.cfg.min_train_steps {
            self.phase = GanPhase::Attacking;
        }
        Ok(last)
    }

    fn fit_standardization(&mut self) {
        let n = self.bank.len() as f64;
        for j in 0..self.center.len() {
            let m = self.bank.iter().map(|b| b[j]).sum::<f64>() / n;
            let v = self.bank.iter().map(|b| (b[j] - m).powi(2)).sum::<f64>() / n;
            self.center[j] = m;
            self.spread[j] = v.sqrt().max(SPREAD_FLOOR);
        }
        self.standardized = self.bank.iter().map(|b| self.standardize(b)).collect();
    }

    /// Maps a raw output layer into the generator's coordinates.
    pub fn standardize(&self, block: &[f64]) -> Vec<f64> {
        block
            .iter()
            .zip(self.center.iter().zip(&self.spread))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    /// Inverse of [`GanState::standardize`].
    pub fn destandardize(&self, block: &[f64]) -> Vec<f64> {
        block
            .iter()
            .zip(self.center.iter().zip(&self.spread))
            .map(|(x, (m, s))| x * s + m)
            .collect()
    }

    fn noise(&mut self, (mu, sigma): (f64, f64), n: usize) -> Vec<Vec<f64>> {
        let dist = Normal::new(mu, sigma).expect("validated sigma");
        (0..n)
            .map(|_| (0..self.cfg.latent_dim).map(|_| dist.sample(&mut self.rng)).collect())
            .collect()
    }

    /// One alternating step on a random real batch with fresh training noise.
    pub fn train_attack_gan(&mut self) -> Result<GanLosses> {
        if self.phase == GanPhase::Collecting {
            return Err(Error::Precondition("GAN has not left the collecting phase".into()));
        }
        let k = self.cfg.batch.min(self.bank.len());
        let real: Vec<Vec<f64>> = index::sample(&mut self.rng, self.bank.len(), k)
            .into_iter()
            .map(|i| self.standardized[i].clone())
            .collect();
        let z_d = self.noise(self.cfg.train_noise, k);
        let z_g = self.noise(self.cfg.train_noise, k);
        self.train_step_with(&real, &z_d, &z_g)
    }

    /// Discriminator step on `real` vs `G(z_d)`, then generator step on
    /// `z_g`. `real` is in standardized coordinates. Fails without modifying the state if a loss is not finite.
    pub fn train_step_with(&mut self, real: &[Vec<f64>], z_d: &[Vec<f64>], z_g: &[Vec<f64>]) -> Result<GanLosses> {
        let (ld, gd) =
            discriminator_loss_and_grad(&self.disc_spec, &self.disc, &self.gen_spec, &self.gen, real, z_d)?;
        if !ld.is_finite() || !gd.is_finite() {
            return Err(Error::NonFinite("discriminator loss".into()));
        }
        let mut disc = self.disc.clone();
        let mut opt_d = self.opt_d.clone();
        opt_d.step(&mut disc, &gd)?;
        let (lg, gg) =
            generator_objective(&self.gen_spec, &self.gen, &self.disc_spec, &disc, z_g, self.cfg.generator_loss)?;
        if !lg.is_finite() || !gg.is_finite() {
            return Err(Error::NonFinite("generator loss".into()));
        }
        self.opt_g.step(&mut self.gen, &gg)?;
        self.disc = disc;
        self.opt_d = opt_d;
        self.steps += 1;
        Ok(GanLosses {
            discriminator: ld,
            generator: lg,
        })
    }

    /// Fraction of `real` (raw output layers) scored above 1/2 plus fraction
    /// of `G(z)` scored below, halved.
    pub fn discriminator_accuracy(&self, real: &[Vec<f64>], z: &[Vec<f64>]) -> Result<f64> {
        let mut hits = 0usize;
        for x in real {
            hits += (self.disc_spec.forward(&self.disc, &self.standardize(x))?[0] > 0.0) as usize;
        }
        for zk in z {
            let fake = self.gen_spec.forward(&self.gen, zk)?;
            hits += (self.disc_spec.forward(&self.disc, &fake)?[0] < 0.0) as usize;
        }
        Ok(hits as f64 / (real.len() + z.len()).max(1) as f64)
    }

    /// Output layer produced from attack-phase noise.
    pub fn generate_block(&mut self) -> Result<Vec<f64>> {
        let z = self.noise(self.cfg.attack_noise, 1).pop().expect("one sample");
        let out = self.gen_spec.forward(&self.gen, &z)?;
        Ok(self.destandardize(&out))
    }

    /// Copy of `received_global` whose output layer is replaced by a fresh
    /// generator sample.
    pub fn generate_malicious_update(&mut self, received_global: &ParamVector) -> Result<ParamVector> {
        if self.phase != GanPhase::Attacking {
            return Err(Error::Precondition("generator is not ready to attack".into()));
        }
        let range = received_global.output_layer_range();
        if range.len() != self.gen_spec.output_width() {
            return Err(Error::Shape("received model does not match the generator".into()));
        }
        let block = self.generate_block()?;
        let mut out = received_global.clone();
        out.values_mut()[range].copy_from_slice(&block);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, DEFAULT_STEP};
    use rand::Rng;

    fn small_cfg() -> GanConfig {
        GanConfig {
            warmup_samples: 8,
            latent_dim: 3,
            gen_hidden: vec![6],
            disc_hidden: vec![5],
            ae_epochs: 20,
            batch: 4,
            steps_per_round: 2,
            min_train_steps: 4,
            ..Default::default()
        }
    }

    fn rows(rng: &mut ChaCha8Rng, n: usize, d: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.random_range(lo..hi)).collect()).collect()
    }

    fn victim(rng: &mut ChaCha8Rng) -> ParamVector {
        MlpSpec::new(vec![4, 3, 3]).unwrap().init(rng)
    }

    #[test]
    fn losses_pass_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let st = GanState::new(small_cfg(), 7, 2).unwrap();
        let real = rows(&mut rng, 4, 7, -0.5, 0.5);
        let z = rows(&mut rng, 4, 3, -1.0, 1.0);
        let (gs, g) = st.generator();
        let (ds, d) = st.discriminator();
        let rg = grad_check(|p| generator_loss_and_grad(gs, p, ds, d, &z).unwrap(), g, DEFAULT_STEP);
        assert!(rg.max_rel_error <= 1e-4, "{rg:?}");
        let rn = grad_check(
            |p| generator_objective(gs, p, ds, d, &z, GeneratorLoss::NonSaturating).unwrap(),
            g,
            DEFAULT_STEP,
        );
        assert!(rn.max_rel_error <= 1e-4, "{rn:?}");
        let rd = grad_check(
            |p| discriminator_loss_and_grad(ds, p, gs, g, &real, &z).unwrap(),
            d,
            DEFAULT_STEP,
        );
        assert!(rd.max_rel_error <= 1e-4, "{rd:?}");
    }

    #[test]
    fn loss_values_match_the_log_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let st = GanState::new(small_cfg(), 7, 5).unwrap();
        let real = rows(&mut rng, 3, 7, -0.5, 0.5);
        let z = rows(&mut rng, 3, 3, -1.0, 1.0);
        let (gs, g) = st.generator();
        let (ds, d) = st.discriminator();
        let dx = |x: &[f64]| 1.0 / (1.0 + (-ds.forward(d, x).unwrap()[0]).exp());
        let fakes: Vec<Vec<f64>> = z.iter().map(|zk| gs.forward(g, zk).unwrap()).collect();
        let want_g = fakes.iter().map(|f| (1.0 - dx(f)).ln()).sum::<f64>() / 3.0;
        let want_d = -(real.iter().map(|x| dx(x).ln()).sum::<f64>() / 3.0)
            - fakes.iter().map(|f| (1.0 - dx(f)).ln()).sum::<f64>() / 3.0;
        let (lg, _) = generator_loss_and_grad(gs, g, ds, d, &z).unwrap();
        let (ld, _) = discriminator_loss_and_grad(ds, d, gs, g, &real, &z).unwrap();
        assert!((lg - want_g).abs() < 1e-12);
        assert!((ld - want_d).abs() < 1e-12);
    }

    #[test]
    fn discriminator_learns_to_separate_an_untrained_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = GanConfig {
            latent_dim: 4,
            gen_hidden: vec![16],
            disc_hidden: vec![16],
            ..Default::default()
        };
        let mut st = GanState::new(cfg, 12, 8).unwrap();
        let real = rows(&mut rng, 32, 12, 0.2, 0.6);
        let z = rows(&mut rng, 32, 4, -1.0, 1.0);
        let before = st.discriminator_accuracy(&real, &z).unwrap();
        for _ in 0..50 {
            let (ds, d) = st.discriminator();
            let (gs, g) = st.generator();
            let (_, grad) = discriminator_loss_and_grad(ds, d, gs, g, &real, &z).unwrap();
            let mut d = d.clone();
            st.opt_d.step(&mut d, &grad).unwrap();
            st.disc = d;
        }
        let after = st.discriminator_accuracy(&real, &z).unwrap();
        assert!(after > 0.5, "accuracy {before} -> {after}");
    }

    #[test]
    fn blocks_round_trip_through_the_standardization() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let global = victim(&mut rng);
        let block = global.output_layer_range().len();
        let mut st = GanState::new(small_cfg(), block, 2).unwrap();
        for _ in 0..8 {
            st.observe_global(&victim(&mut rng)).unwrap();
        }
        st.advance().unwrap();
        let x = &st.bank()[0];
        let z = st.standardize(x);
        for (a, b) in st.destandardize(&z).iter().zip(x) {
            assert!((a - b).abs() < 1e-12);
        }
        let n = st.bank().len() as f64;
        for j in 0..block {
            let m: f64 = st.bank().iter().map(|b| st.standardize(b)[j]).sum::<f64>() / n;
            assert!(m.abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_noise_steps_are_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut a = GanState::new(small_cfg(), 7, 3).unwrap();
        a.phase = GanPhase::Training;
        let mut b = a.clone();
        let real = rows(&mut rng, 4, 7, -0.5, 0.5);
        let z1 = rows(&mut rng, 4, 3, -1.0, 1.0);
        let z2 = rows(&mut rng, 4, 3, -1.0, 1.0);
        let la = a.train_step_with(&real, &z1, &z2).unwrap();
        let lb = b.train_step_with(&real, &z1, &z2).unwrap();
        assert_eq!(la, lb);
        assert_eq!(a.gen.values(), b.gen.values());
        assert_eq!(a.disc.values(), b.disc.values());
    }

    #[test]
    fn phases_advance_monotonically_and_splice_the_output_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let global = victim(&mut rng);
        let block = global.output_layer_range().len();
        let mut st = GanState::new(small_cfg(), block, 11).unwrap();
        assert!(st.generate_malicious_update(&global).is_err());
        let mut phases = vec![st.phase()];
        for _ in 0..12 {
            let g = victim(&mut rng);
            st.observe_global(&g).unwrap();
            st.advance().unwrap();
            phases.push(st.phase());
        }
        assert!(phases.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(st.phase(), GanPhase::Attacking);
        assert_eq!(st.bank().len(), 8);
        assert!(st.autoencoder_loss().is_some());

        let out = st.generate_malicious_update(&global).unwrap();
        assert!(out.same_shape(&global));
        let r = global.output_layer_range();
        assert_eq!(out.values()[..r.start], global.values()[..r.start]);
        assert_ne!(out.values()[r.clone()], global.values()[r]);

        let wrong = MlpSpec::new(vec![4, 3, 2]).unwrap().init(&mut rng);
        assert!(st.generate_malicious_update(&wrong).is_err());
        assert!(st.observe_global(&wrong).is_err());
    }

    #[test]
    fn generator_is_initialized_from_the_pretrained_decoder() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cfg = GanConfig {
            warmup_samples: 16,
            latent_dim: 2,
            gen_hidden: vec![8],
            ae_epochs: 300,
            ae_lr: 1e-2,
            batch: 8,
            ..Default::default()
        };
        let x: Vec<f64> = (0..5).map(|i| 0.1 * i as f64 - 0.2).collect();
        let bank = vec![x; 16];
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let (spec, dec, loss) = pretrain_generator_autoencoder(&bank, &cfg, &mut r1).unwrap();
        assert_eq!(spec.output_width(), 5);
        assert_eq!(dec.len(), spec.param_count());
        assert!(loss < 1e-6, "reconstruction loss {loss}");
        assert!(pretrain_generator_autoencoder(&bank[..3], &cfg, &mut rng).is_err());
    }
}
