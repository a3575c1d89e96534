//! Desk-scale TimeGAN: adversarial sequence generation in a learned
//! latent space.
//!
//! Five GRU-based networks share one parameter set:
//! - embedder:      observed window -> sigmoid latent codes
//! - recovery:      latent codes -> linear window reconstruction
//! - generator:     i.i.d. Gaussian noise -> sigmoid latent codes
//! - supervisor:    latent codes -> next-step latent prediction
//! - discriminator: latent codes -> per-step real/fake logits
//!
//! Training runs three phases over the epoch budget (one half, one
//! quarter, one quarter): (1) embedder/recovery reconstruction, (2)
//! supervised next-step loss on real latents, (3) joint alternating
//! steps — generator+supervisor against adversarial + 10x supervised +
//! 10x moment-matching losses, embedder+recovery on reconstruction +
//! 0.1x supervised, then the discriminator on real-vs-fake cross
//! entropy. Sampling runs noise -> generator -> supervisor -> recovery.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{dense, gru_sequence, Adam, BoundParams, Graph, ParamSet, Tensor, Var};
use crate::error::{Error, Result};
use crate::generators::config::{Family, GeneratorConfig, Phase, TrainingLog};
use crate::generators::dataset::SyntheticDataset;
use crate::market_data::{make_windows, standardize, ReturnSeries, StandardizationParams, WindowSet};

/// Windows decoded per forward pass when sampling, to bound tape memory.
const SAMPLE_CHUNK: usize = 256;
/// Joint-phase weight on the supervised and moment losses.
const JOINT_AUX_WEIGHT: f64 = 10.0;
/// Embedder-step weight on the supervised loss.
const EMBED_SUPERVISED_WEIGHT: f64 = 0.1;
/// Epochs of discriminator accuracy pinned at 1.0 before warning.
const MODE_COLLAPSE_PATIENCE: usize = 20;

/// Fitted TimeGAN generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeganModel {
    pub assets: Vec<String>,
    pub window_length: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub params: ParamSet,
    pub standardization: StandardizationParams,
}

/// Flags a discriminator whose accuracy sits exactly at 1.0 for many
/// consecutive epochs — the generator is no longer reaching it.
#[derive(Debug, Default)]
struct ModeCollapseMonitor {
    consecutive: usize,
    warned: bool,
}

impl ModeCollapseMonitor {
    fn observe(&mut self, epoch_accuracy: f64, log: &mut TrainingLog) {
        if epoch_accuracy == 1.0 {
            self.consecutive += 1;
        } else {
            self.consecutive = 0;
        }
        if self.consecutive >= MODE_COLLAPSE_PATIENCE && !self.warned {
            self.warned = true;
            log.warn(format!(
                "discriminator accuracy pinned at 1.0 for {MODE_COLLAPSE_PATIENCE} \
                 consecutive epochs; possible mode collapse"
            ));
        }
    }
}

fn register_networks(
    params: &mut ParamSet,
    n_assets: usize,
    hidden: usize,
    latent: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    // Registration order fixes the RNG draw order; do not reorder.
    params.register_gru("emb.gru", n_assets, hidden, rng)?;
    params.register_dense("emb.out", hidden, hidden, rng)?;
    params.register_gru("rec.gru", hidden, hidden, rng)?;
    params.register_dense("rec.out", hidden, n_assets, rng)?;
    params.register_gru("gen.gru", latent, hidden, rng)?;
    params.register_dense("gen.out", hidden, hidden, rng)?;
    params.register_gru("sup.gru", hidden, hidden, rng)?;
    params.register_dense("sup.out", hidden, hidden, rng)?;
    params.register_gru("dis.gru", hidden, hidden, rng)?;
    params.register_dense("dis.out", hidden, 1, rng)?;
    Ok(())
}

/// GRU + dense + chosen activation applied to every step of a sequence.
fn net_forward(
    g: &mut Graph,
    bound: &BoundParams,
    prefix: &str,
    xs: &[Var],
    hidden: usize,
    sigmoid_out: bool,
) -> Result<Vec<Var>> {
    let gru_name = format!("{prefix}.gru");
    let out_name = format!("{prefix}.out");
    let hs = gru_sequence(g, bound, &gru_name, xs, hidden)?;
    let mut out = Vec::with_capacity(hs.len());
    for h in hs {
        let pre = dense(g, bound, &out_name, h)?;
        out.push(if sigmoid_out { g.sigmoid(pre) } else { pre });
    }
    Ok(out)
}

/// Mean squared elementwise gap between two equally shaped sequences.
fn seq_mse(g: &mut Graph, a: &[Var], b: &[Var]) -> Result<Var> {
    let mut parts = Vec::with_capacity(a.len());
    for (&x, &y) in a.iter().zip(b) {
        let d = g.sub(x, y)?;
        parts.push(g.square(d));
    }
    let cat = g.concat_cols(&parts)?;
    Ok(g.mean_all(cat))
}

/// Next-step prediction error of the supervisor on a latent sequence.
fn supervised_loss(
    g: &mut Graph,
    bound: &BoundParams,
    latents: &[Var],
    hidden: usize,
) -> Result<Var> {
    let predicted = net_forward(g, bound, "sup", latents, hidden, true)?;
    seq_mse(g, &latents[1..], &predicted[..latents.len() - 1])
}

/// Per-timestep leaf tensors [batch, n_assets] for the chosen windows.
fn real_steps(
    g: &mut Graph,
    ws: &WindowSet,
    idx: &[usize],
    n_assets: usize,
) -> Result<Vec<Var>> {
    (0..ws.window_length)
        .map(|t| {
            let mut data = Vec::with_capacity(idx.len() * n_assets);
            for &w in idx {
                data.extend_from_slice(&ws.windows[w][t * n_assets..(t + 1) * n_assets]);
            }
            Ok(g.leaf(Tensor::from_vec(idx.len(), n_assets, data)?))
        })
        .collect()
}

/// Draw one [batch, latent] standard-normal tensor per timestep.
fn draw_noise(
    batch: usize,
    t_len: usize,
    latent: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Tensor> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..t_len)
        .map(|_| Tensor {
            rows: batch,
            cols: latent,
            data: (0..batch * latent).map(|_| normal.sample(rng)).collect(),
        })
        .collect()
}

/// Pooled mean and the matching stabilized std over a window batch.
fn batch_moments(ws: &WindowSet, idx: &[usize]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut n = 0.0;
    for &w in idx {
        for &v in &ws.windows[w] {
            sum += v;
            sum_sq += v * v;
            n += 1.0;
        }
    }
    let mean = sum / n;
    let var = sum_sq / n - mean * mean;
    (mean, (var + 1e-6).sqrt())
}

fn keep_prefixes(
    grads: BTreeMap<String, Tensor>,
    prefixes: &[&str],
) -> BTreeMap<String, Tensor> {
    grads
        .into_iter()
        .filter(|(k, _)| prefixes.iter().any(|p| k.starts_with(p)))
        .collect()
}

fn finite_or_diverged(value: f64, epoch: usize, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Divergence {
            epoch,
            msg: format!("non-finite {what} loss {value}"),
        })
    }
}

impl TimeganModel {
    /// Build an initialized but untrained model: standardization comes
    /// from the data, parameters from the seed. Useful as the baseline
    /// in before/after fidelity comparisons.
    pub fn init(returns: &ReturnSeries, config: &GeneratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.family != Family::TimeGan {
            return Err(Error::Config(format!(
                "config family {} given to the timegan fitter",
                config.family
            )));
        }
        let (_, std_params) = standardize(returns)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        register_networks(
            &mut params,
            returns.n_assets(),
            config.hidden_dim,
            config.latent_dim,
            &mut rng,
        )?;
        Ok(Self {
            assets: returns.assets.clone(),
            window_length: config.window_length,
            hidden_dim: config.hidden_dim,
            latent_dim: config.latent_dim,
            params,
            standardization: std_params,
        })
    }

    /// Fit on raw returns. (data, config, seed) fully determine the
    /// result; the same seed reproduces `init` plus the training run.
    pub fn fit(
        returns: &ReturnSeries,
        config: &GeneratorConfig,
        seed: u64,
    ) -> Result<(Self, TrainingLog)> {
        config.validate()?;
        if config.family != Family::TimeGan {
            return Err(Error::Config(format!(
                "config family {} given to the timegan fitter",
                config.family
            )));
        }
        let (std_series, std_params) = standardize(returns)?;
        let windows = make_windows(&std_series, config.window_length, config.stride)?;
        let n = windows.n_windows();
        if n < 2 * config.batch_size {
            return Err(Error::InsufficientData {
                needed: 2 * config.batch_size,
                got: n,
            });
        }

        let n_assets = returns.n_assets();
        let hidden = config.hidden_dim;
        let latent = config.latent_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        register_networks(&mut params, n_assets, hidden, latent, &mut rng)?;

        let embed_epochs = config.epochs / 2;
        let supervised_epochs = config.epochs / 4;
        let joint_epochs = config.epochs - embed_epochs - supervised_epochs;

        let mut opt_embed = Adam::new(config.learning_rate); // embedder + recovery
        let mut opt_sup = Adam::new(config.learning_rate); // supervisor alone
        let mut opt_gen = Adam::new(config.learning_rate); // generator + supervisor
        let mut opt_dis = Adam::new(config.learning_rate); // discriminator

        let mut log = TrainingLog::default();
        let mut monitor = ModeCollapseMonitor::default();
        let mut order: Vec<usize> = (0..n).collect();
        let mut epoch = 0usize;

        for _ in 0..embed_epochs {
            order.shuffle(&mut rng);
            let mut recon_sum = 0.0;
            let mut batches = 0.0;
            for chunk in order.chunks(config.batch_size) {
                let mut g = Graph::new();
                let bound = params.bind(&mut g);
                let xs = real_steps(&mut g, &windows, chunk, n_assets)?;
                let latents = net_forward(&mut g, &bound, "emb", &xs, hidden, true)?;
                let recovered = net_forward(&mut g, &bound, "rec", &latents, hidden, false)?;
                let loss = seq_mse(&mut g, &xs, &recovered)?;
                recon_sum +=
                    finite_or_diverged(g.value(loss).item()?, epoch, "reconstruction")?;
                batches += 1.0;
                let grads = g.backward(loss)?;
                opt_embed.step(
                    &mut params,
                    &keep_prefixes(bound.harvest(&grads), &["emb.", "rec."]),
                )?;
            }
            self::check_params(&params, epoch)?;
            log.record(epoch, Phase::Embedding, &[("reconstruction", recon_sum / batches)]);
            epoch += 1;
        }

        for _ in 0..supervised_epochs {
            order.shuffle(&mut rng);
            let mut sup_sum = 0.0;
            let mut batches = 0.0;
            for chunk in order.chunks(config.batch_size) {
                let mut g = Graph::new();
                let bound = params.bind(&mut g);
                let xs = real_steps(&mut g, &windows, chunk, n_assets)?;
                let latents = net_forward(&mut g, &bound, "emb", &xs, hidden, true)?;
                let loss = supervised_loss(&mut g, &bound, &latents, hidden)?;
                sup_sum += finite_or_diverged(g.value(loss).item()?, epoch, "supervised")?;
                batches += 1.0;
                let grads = g.backward(loss)?;
                opt_sup.step(
                    &mut params,
                    &keep_prefixes(bound.harvest(&grads), &["sup."]),
                )?;
            }
            self::check_params(&params, epoch)?;
            log.record(epoch, Phase::Supervised, &[("supervised", sup_sum / batches)]);
            epoch += 1;
        }

        for _ in 0..joint_epochs {
            order.shuffle(&mut rng);
            let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
            let mut correct = 0.0;
            let mut total = 0.0;
            let mut batches = 0.0;
            for chunk in order.chunks(config.batch_size) {
                let batch = chunk.len();
                let noise = draw_noise(batch, config.window_length, latent, &mut rng);
                let (real_mean, real_std) = batch_moments(&windows, chunk);

                // Generator + supervisor step.
                {
                    let mut g = Graph::new();
                    let bound = params.bind(&mut g);
                    let xs = real_steps(&mut g, &windows, chunk, n_assets)?;
                    let real_latents = net_forward(&mut g, &bound, "emb", &xs, hidden, true)?;
                    let sup = supervised_loss(&mut g, &bound, &real_latents, hidden)?;

                    let zs: Vec<Var> = noise.iter().map(|t| g.leaf(t.clone())).collect();
                    let fake_e = net_forward(&mut g, &bound, "gen", &zs, hidden, true)?;
                    let fake_h = net_forward(&mut g, &bound, "sup", &fake_e, hidden, true)?;
                    let logits = net_forward(&mut g, &bound, "dis", &fake_h, hidden, false)?;
                    let logits_cat = g.concat_cols(&logits)?;
                    let ones = Tensor::full(batch, config.window_length, 1.0);
                    let adversarial = g.bce_with_logits(logits_cat, &ones)?;

                    let fake_x = net_forward(&mut g, &bound, "rec", &fake_h, hidden, false)?;
                    let fake_cat = g.concat_cols(&fake_x)?;
                    let fake_mean = g.mean_all(fake_cat);
                    let fake_sq = g.square(fake_cat);
                    let fake_mean_sq = g.mean_all(fake_sq);
                    let mean_sq = g.square(fake_mean);
                    let var = g.sub(fake_mean_sq, mean_sq)?;
                    let var_eps = g.add_const(var, 1e-6);
                    let fake_std = g.sqrt(var_eps);
                    let mean_gap_raw = g.add_const(fake_mean, -real_mean);
                    let mean_gap = g.abs(mean_gap_raw);
                    let std_gap_raw = g.add_const(fake_std, -real_std);
                    let std_gap = g.abs(std_gap_raw);
                    let moment = g.add(mean_gap, std_gap)?;

                    let aux = g.add(sup, moment)?;
                    let aux_w = g.scale(aux, JOINT_AUX_WEIGHT);
                    let loss = g.add(adversarial, aux_w)?;
                    *sums.entry("generator").or_default() +=
                        finite_or_diverged(g.value(loss).item()?, epoch, "generator")?;
                    *sums.entry("supervised").or_default() += g.value(sup).item()?;
                    *sums.entry("moment").or_default() += g.value(moment).item()?;
                    let grads = g.backward(loss)?;
                    opt_gen.step(
                        &mut params,
                        &keep_prefixes(bound.harvest(&grads), &["gen.", "sup."]),
                    )?;
                }

                // Embedder + recovery step.
                {
                    let mut g = Graph::new();
                    let bound = params.bind(&mut g);
                    let xs = real_steps(&mut g, &windows, chunk, n_assets)?;
                    let latents = net_forward(&mut g, &bound, "emb", &xs, hidden, true)?;
                    let recovered = net_forward(&mut g, &bound, "rec", &latents, hidden, false)?;
                    let recon = seq_mse(&mut g, &xs, &recovered)?;
                    let sup = supervised_loss(&mut g, &bound, &latents, hidden)?;
                    let sup_w = g.scale(sup, EMBED_SUPERVISED_WEIGHT);
                    let loss = g.add(recon, sup_w)?;
                    *sums.entry("embedder").or_default() +=
                        finite_or_diverged(g.value(loss).item()?, epoch, "embedder")?;
                    let grads = g.backward(loss)?;
                    opt_embed.step(
                        &mut params,
                        &keep_prefixes(bound.harvest(&grads), &["emb.", "rec."]),
                    )?;
                }

                // Discriminator step.
                {
                    let mut g = Graph::new();
                    let bound = params.bind(&mut g);
                    let xs = real_steps(&mut g, &windows, chunk, n_assets)?;
                    let real_latents = net_forward(&mut g, &bound, "emb", &xs, hidden, true)?;
                    let real_logits = net_forward(&mut g, &bound, "dis", &real_latents, hidden, false)?;
                    let real_cat = g.concat_cols(&real_logits)?;

                    let zs: Vec<Var> = noise.iter().map(|t| g.leaf(t.clone())).collect();
                    let fake_e = net_forward(&mut g, &bound, "gen", &zs, hidden, true)?;
                    let fake_h = net_forward(&mut g, &bound, "sup", &fake_e, hidden, true)?;
                    let fake_logits = net_forward(&mut g, &bound, "dis", &fake_h, hidden, false)?;
                    let fake_cat = g.concat_cols(&fake_logits)?;

                    for &v in &g.value(real_cat).data {
                        if v > 0.0 {
                            correct += 1.0;
                        }
                        total += 1.0;
                    }
                    for &v in &g.value(fake_cat).data {
                        if v < 0.0 {
                            correct += 1.0;
                        }
                        total += 1.0;
                    }

                    let ones = Tensor::full(batch, config.window_length, 1.0);
                    let zeros = Tensor::zeros(batch, config.window_length);
                    let bce_real = g.bce_with_logits(real_cat, &ones)?;
                    let bce_fake = g.bce_with_logits(fake_cat, &zeros)?;
                    let loss = g.add(bce_real, bce_fake)?;
                    *sums.entry("discriminator").or_default() +=
                        finite_or_diverged(g.value(loss).item()?, epoch, "discriminator")?;
                    let grads = g.backward(loss)?;
                    opt_dis.step(
                        &mut params,
                        &keep_prefixes(bound.harvest(&grads), &["dis."]),
                    )?;
                }
                batches += 1.0;
            }
            self::check_params(&params, epoch)?;
            let accuracy = correct / total;
            let mut fields: Vec<(&str, f64)> = sums
                .iter()
                .map(|(k, v)| (*k, v / batches))
                .collect();
            fields.push(("disc_accuracy", accuracy));
            log.record(epoch, Phase::Joint, &fields);
            monitor.observe(accuracy, &mut log);
            epoch += 1;
        }

        Ok((
            Self {
                assets: returns.assets.clone(),
                window_length: config.window_length,
                hidden_dim: config.hidden_dim,
                latent_dim: config.latent_dim,
                params,
                standardization: std_params,
            },
            log,
        ))
    }

    /// Draw windows: noise -> generator -> supervisor -> recovery.
    pub fn sample(&self, n_windows: usize, seed: u64) -> Result<SyntheticDataset> {
        if n_windows == 0 {
            return Err(Error::Contract("n_windows must be >= 1".into()));
        }
        let n_assets = self.assets.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut windows = Vec::with_capacity(n_windows);
        let mut remaining = n_windows;
        while remaining > 0 {
            let batch = remaining.min(SAMPLE_CHUNK);
            let noise = draw_noise(batch, self.window_length, self.latent_dim, &mut rng);
            let mut g = Graph::new();
            let bound = self.params.bind(&mut g);
            let zs: Vec<Var> = noise.into_iter().map(|t| g.leaf(t)).collect();
            let fake_e = net_forward(&mut g, &bound, "gen", &zs, self.hidden_dim, true)?;
            let fake_h = net_forward(&mut g, &bound, "sup", &fake_e, self.hidden_dim, true)?;
            let fake_x = net_forward(&mut g, &bound, "rec", &fake_h, self.hidden_dim, false)?;
            let steps: Vec<&Tensor> = fake_x.iter().map(|&v| g.value(v)).collect();
            for i in 0..batch {
                let mut w = Vec::with_capacity(self.window_length * n_assets);
                for step in &steps {
                    w.extend_from_slice(&step.data[i * n_assets..(i + 1) * n_assets]);
                }
                windows.push(w);
            }
            remaining -= batch;
        }
        SyntheticDataset::new(
            self.assets.clone(),
            self.window_length,
            windows,
            self.standardization.clone(),
        )
    }
}

fn check_params(params: &ParamSet, epoch: usize) -> Result<()> {
    if params.has_nan() {
        Err(Error::Divergence {
            epoch,
            msg: "non-finite parameter after update".into(),
        })
    } else {
        Ok(())
    }
}
