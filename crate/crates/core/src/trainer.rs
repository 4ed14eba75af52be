//! Joint objective and the training loop.
//!
//! Per step both streams run through the shared network, CORAL and MMD² are
//! evaluated at the representation and logit taps, entropy on the target
//! logits and cross-entropy on the labeled source logits; the weighted sum is
//! backpropagated and one momentum-SGD step is taken.

use std::fmt::Write as _;

use crate::data::{BatchPair, BatchPlan, Dataset, Unlabeled};
use crate::error::{Error, Result};
use crate::losses::{
    coral_loss, cross_entropy_loss, entropy_loss, median_bandwidths, mmd2_loss, KernelBank,
};
use crate::network::{
    init_network, sgd_step, ForwardTrace, LayerSpec, Network, ParamGrads, SgdConfig, SgdState,
    TapGrads,
};
use crate::numerics::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Layer widths from input to logits, e.g. `[2, 64, 64, 2]`.
    pub layers: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lambda_ce: f64,
    pub lambda_coral_rep: f64,
    pub lambda_coral_logit: f64,
    pub lambda_mmd_rep: f64,
    pub lambda_mmd_logit: f64,
    pub lambda_entropy: f64,
    pub kernel_count: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layers: vec![2, 64, 64, 2],
            epochs: 50,
            batch_size: 32,
            lr: 1e-3,
            momentum: 0.9,
            weight_decay: 5e-4,
            lambda_ce: 1.0,
            lambda_coral_rep: 1.0,
            lambda_coral_logit: 1.0,
            lambda_mmd_rep: 1.0,
            lambda_mmd_logit: 1.0,
            lambda_entropy: 0.1,
            kernel_count: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Every key accepted by [`TrainConfig::set`], in serialization order.
    pub const KEYS: [&'static str; 14] = [
        "layers",
        "epochs",
        "batch_size",
        "lr",
        "momentum",
        "weight_decay",
        "lambda_ce",
        "lambda_coral_rep",
        "lambda_coral_logit",
        "lambda_mmd_rep",
        "lambda_mmd_logit",
        "lambda_entropy",
        "kernel_count",
        "seed",
    ];

    /// Same settings with every adaptation weight zeroed.
    pub fn without_adaptation(&self) -> Self {
        Self {
            lambda_coral_rep: 0.0,
            lambda_coral_logit: 0.0,
            lambda_mmd_rep: 0.0,
            lambda_mmd_logit: 0.0,
            lambda_entropy: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.layers.len() < 2 || self.layers.contains(&0) {
            return bad(format!(
                "layers must list >= 2 positive widths, got {:?}",
                self.layers
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            ));
        }
        for (name, v) in self.lambdas() {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.lambda_ce <= 0.0 {
            return bad("lambda_ce must be > 0".into());
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        if self.kernel_count == 0 {
            return bad("kernel_count must be >= 1".into());
        }
        Ok(())
    }

    fn lambdas(&self) -> [(&'static str, f64); 6] {
        [
            ("lambda_ce", self.lambda_ce),
            ("lambda_coral_rep", self.lambda_coral_rep),
            ("lambda_coral_logit", self.lambda_coral_logit),
            ("lambda_mmd_rep", self.lambda_mmd_rep),
            ("lambda_mmd_logit", self.lambda_mmd_logit),
            ("lambda_entropy", self.lambda_entropy),
        ]
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        LayerSpec::mlp(&self.layers)
    }

    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            lr: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
        }
    }

    pub fn num_classes(&self) -> usize {
        *self.layers.last().unwrap_or(&0)
    }

    /// Sets one key from its text form. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
        }
        match key {
            "layers" => {
                self.layers = value
                    .split(',')
                    .map(|w| num(key, w.trim()))
                    .collect::<Result<_>>()?
            }
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "momentum" => self.momentum = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "lambda_ce" => self.lambda_ce = num(key, value)?,
            "lambda_coral_rep" => self.lambda_coral_rep = num(key, value)?,
            "lambda_coral_logit" => self.lambda_coral_logit = num(key, value)?,
            "lambda_mmd_rep" => self.lambda_mmd_rep = num(key, value)?,
            "lambda_mmd_logit" => self.lambda_mmd_logit = num(key, value)?,
            "lambda_entropy" => self.lambda_entropy = num(key, value)?,
            "kernel_count" => self.kernel_count = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Text form of one key's current value.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "layers" => self
                .layers
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(","),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "lr" => self.lr.to_string(),
            "momentum" => self.momentum.to_string(),
            "weight_decay" => self.weight_decay.to_string(),
            "lambda_ce" => self.lambda_ce.to_string(),
            "lambda_coral_rep" => self.lambda_coral_rep.to_string(),
            "lambda_coral_logit" => self.lambda_coral_logit.to_string(),
            "lambda_mmd_rep" => self.lambda_mmd_rep.to_string(),
            "lambda_mmd_logit" => self.lambda_mmd_logit.to_string(),
            "lambda_entropy" => self.lambda_entropy.to_string(),
            "kernel_count" => self.kernel_count.to_string(),
            "seed" => self.seed.to_string(),
            _ => return None,
        })
    }

    /// `key = value` lines in [`TrainConfig::KEYS`] order.
    pub fn to_kv_text(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    /// Parses `key = value` lines (`#` starts a comment) over the defaults.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value) in parse_kv_lines(text)? {
            cfg.set(&key, &value)?;
        }
        Ok(cfg)
    }
}

/// Splits `key = value` text into pairs, skipping blanks and `#` comments.
pub fn parse_kv_lines(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected key = value, got {raw:?}",
                i + 1
            )));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Per-step loss terms and their weighted total.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossReport {
    pub step: u64,
    pub ce: f64,
    pub coral_rep: f64,
    pub coral_logit: f64,
    pub mmd_rep: f64,
    pub mmd_logit: f64,
    pub entropy: f64,
    pub total: f64,
}

impl LossReport {
    pub const CSV_HEADER: &'static str =
        "step,ce,coral_rep,coral_logit,mmd_rep,mmd_logit,entropy,total";

    /// Recomputes the weighted total from the parts.
    pub fn weighted_total(&self, c: &TrainConfig) -> f64 {
        c.lambda_ce * self.ce
            + c.lambda_coral_rep * self.coral_rep
            + c.lambda_coral_logit * self.coral_logit
            + c.lambda_mmd_rep * self.mmd_rep
            + c.lambda_mmd_logit * self.mmd_logit
            + c.lambda_entropy * self.entropy
    }

    fn is_finite(&self) -> bool {
        [
            self.ce,
            self.coral_rep,
            self.coral_logit,
            self.mmd_rep,
            self.mmd_logit,
            self.entropy,
            self.total,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            self.ce,
            self.coral_rep,
            self.coral_logit,
            self.mmd_rep,
            self.mmd_logit,
            self.entropy,
            self.total
        )
    }
}

/// `acc += λ·g`, skipping zero weights entirely so that disabled terms leave
/// no trace in the gradient.
fn accumulate(acc: &mut Option<Matrix>, lambda: f64, g: &Matrix) {
    if lambda == 0.0 {
        return;
    }
    match acc {
        Some(m) => m.axpy(lambda, g),
        None => {
            *acc = Some(if lambda == 1.0 {
                g.clone()
            } else {
                g.scale(lambda)
            })
        }
    }
}

fn objective_from_traces(
    net: &Network,
    ts: &ForwardTrace,
    tt: &ForwardTrace,
    labels: &[usize],
    config: &TrainConfig,
    bank: &KernelBank,
) -> Result<(LossReport, ParamGrads)> {
    let ce = cross_entropy_loss(ts.logits(), labels)?;
    let coral_rep = coral_loss(ts.rep(), tt.rep())?;
    let coral_logit = coral_loss(ts.logits(), tt.logits())?;
    let mmd_rep = mmd2_loss(ts.rep(), tt.rep(), bank)?;
    let mmd_logit = mmd2_loss(ts.logits(), tt.logits(), bank)?;
    let ent = entropy_loss(tt.logits())?;

    let mut report = LossReport {
        step: 0,
        ce: ce.value,
        coral_rep: coral_rep.value,
        coral_logit: coral_logit.value,
        mmd_rep: mmd_rep.value,
        mmd_logit: mmd_logit.value,
        entropy: ent.value,
        total: 0.0,
    };
    report.total = report.weighted_total(config);

    let c = config;
    let mut src_logits = None;
    accumulate(&mut src_logits, c.lambda_ce, &ce.grad);
    accumulate(
        &mut src_logits,
        c.lambda_coral_logit,
        &coral_logit.grad_source,
    );
    accumulate(&mut src_logits, c.lambda_mmd_logit, &mmd_logit.grad_source);
    let mut src_rep = None;
    accumulate(&mut src_rep, c.lambda_coral_rep, &coral_rep.grad_source);
    accumulate(&mut src_rep, c.lambda_mmd_rep, &mmd_rep.grad_source);
    let mut tgt_logits = None;
    accumulate(
        &mut tgt_logits,
        c.lambda_coral_logit,
        &coral_logit.grad_target,
    );
    accumulate(&mut tgt_logits, c.lambda_mmd_logit, &mmd_logit.grad_target);
    accumulate(&mut tgt_logits, c.lambda_entropy, &ent.grad);
    let mut tgt_rep = None;
    accumulate(&mut tgt_rep, c.lambda_coral_rep, &coral_rep.grad_target);
    accumulate(&mut tgt_rep, c.lambda_mmd_rep, &mmd_rep.grad_target);

    let grads = net.backward(&[
        TapGrads {
            trace: ts,
            rep: src_rep.as_ref(),
            logits: src_logits.as_ref(),
        },
        TapGrads {
            trace: tt,
            rep: tgt_rep.as_ref(),
            logits: tgt_logits.as_ref(),
        },
    ])?;
    Ok((report, grads))
}

fn check_batch(net: &Network, batch: &BatchPair) -> Result<()> {
    if batch.source_features.rows() != batch.target_features.rows() {
        return Err(Error::ShapeMismatch(format!(
            "source batch has {} rows, target batch {}",
            batch.source_features.rows(),
            batch.target_features.rows()
        )));
    }
    if let Some(&y) = batch
        .source_labels
        .iter()
        .find(|&&y| y >= net.num_classes())
    {
        return Err(Error::LabelOutOfRange {
            row: 0,
            label: y as i64,
            num_classes: net.num_classes(),
        });
    }
    Ok(())
}

/// Weighted joint objective on one batch pair and its exact parameter gradient.
pub fn total_objective(
    net: &Network,
    batch: &BatchPair,
    config: &TrainConfig,
    bank: &KernelBank,
) -> Result<(LossReport, ParamGrads)> {
    check_batch(net, batch)?;
    let ts = net.forward(&batch.source_features)?;
    let tt = net.forward(&batch.target_features)?;
    objective_from_traces(net, &ts, &tt, &batch.source_labels, config, bank)
}

/// Stepwise trainer. Batch order is a pure function of `(seed, step)`, so a
/// trainer rebuilt from a checkpoint continues exactly where it stopped.
pub struct Trainer<'a> {
    config: TrainConfig,
    source: &'a Dataset,
    target: Unlabeled<'a>,
    plan: BatchPlan,
    net: Network,
    velocity: SgdState,
    step: u64,
    history: Vec<LossReport>,
}

impl<'a> Trainer<'a> {
    pub fn new(config: TrainConfig, source: &'a Dataset, target: Unlabeled<'a>) -> Result<Self> {
        config.validate()?;
        let net = init_network(&config.layer_specs(), config.seed)?;
        let velocity = ParamGrads::zeros(&net);
        Self::with_state(config, source, target, net, velocity, 0)
    }

    /// Continues from saved parameters, momentum buffers and step counter.
    pub fn resume(
        checkpoint: crate::checkpoint::Checkpoint,
        source: &'a Dataset,
        target: Unlabeled<'a>,
    ) -> Result<Self> {
        checkpoint.config.validate()?;
        let crate::checkpoint::Checkpoint {
            network,
            velocity,
            config,
            step,
        } = checkpoint;
        Self::with_state(config, source, target, network, velocity, step)
    }

    fn with_state(
        config: TrainConfig,
        source: &'a Dataset,
        target: Unlabeled<'a>,
        net: Network,
        velocity: SgdState,
        step: u64,
    ) -> Result<Self> {
        if source.labels().is_none() {
            return Err(Error::UnlabeledDataset);
        }
        if source.dim() != net.input_dim() || target.features().cols() != net.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "network expects {} features, source has {}, target has {}",
                net.input_dim(),
                source.dim(),
                target.features().cols()
            )));
        }
        if source.num_classes() != net.num_classes() {
            return Err(Error::ShapeMismatch(format!(
                "network has {} outputs, source has {} classes",
                net.num_classes(),
                source.num_classes()
            )));
        }
        let plan = BatchPlan::new(source.len(), target.len(), config.batch_size, config.seed)?;
        Ok(Self {
            config,
            source,
            target,
            plan,
            net,
            velocity,
            step,
            history: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn velocity(&self) -> &SgdState {
        &self.velocity
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn history(&self) -> &[LossReport] {
        &self.history
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.plan.batches_per_epoch()
    }

    pub fn total_steps(&self) -> u64 {
        (self.config.epochs * self.plan.batches_per_epoch()) as u64
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.total_steps()
    }

    /// One optimizer step on the next batch pair.
    pub fn step(&mut self) -> Result<LossReport> {
        let batch = self.plan.assemble(self.source, self.target, self.step)?;
        let ts = self.net.forward(&batch.source_features)?;
        let tt = self.net.forward(&batch.target_features)?;
        let bank = median_bandwidths(ts.rep(), tt.rep(), self.config.kernel_count)?;
        let (mut report, grads) = objective_from_traces(
            &self.net,
            &ts,
            &tt,
            &batch.source_labels,
            &self.config,
            &bank,
        )?;
        report.step = self.step;
        if !report.is_finite() {
            return Err(Error::NonFiniteLoss { step: self.step });
        }
        sgd_step(
            &mut self.net,
            &grads,
            &self.config.sgd(),
            &mut self.velocity,
        )?;
        self.step += 1;
        self.history.push(report);
        Ok(report)
    }

    pub fn run_steps(&mut self, n: u64) -> Result<()> {
        for _ in 0..n {
            self.step()?;
        }
        Ok(())
    }

    /// Runs until `epochs × batches_per_epoch` steps have been taken.
    pub fn run(&mut self) -> Result<()> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> crate::checkpoint::Checkpoint {
        crate::checkpoint::Checkpoint {
            network: self.net.clone(),
            velocity: self.velocity.clone(),
            config: self.config.clone(),
            step: self.step,
        }
    }

    pub fn into_parts(self) -> (Network, Vec<LossReport>) {
        (self.net, self.history)
    }
}

/// Full training run. The target is only ever seen as an unlabeled view.
pub fn train(
    config: &TrainConfig,
    source: &Dataset,
    target: Unlabeled<'_>,
) -> Result<(Network, Vec<LossReport>)> {
    let mut trainer = Trainer::new(config.clone(), source, target)?;
    trainer.run()?;
    Ok(trainer.into_parts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_two_moons;

    fn small_config() -> TrainConfig {
        TrainConfig {
            layers: vec![2, 8, 8, 2],
            epochs: 2,
            batch_size: 8,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn config_text_round_trip() {
        let mut cfg = small_config();
        cfg.lr = 0.0123;
        cfg.lambda_entropy = 0.0;
        let text = cfg.to_kv_text();
        assert_eq!(TrainConfig::from_kv_text(&text).unwrap(), cfg);
    }

    #[test]
    fn config_rejects_unknown_and_invalid() {
        let err = TrainConfig::from_kv_text("lerning_rate = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("lerning_rate"));
        let mut cfg = TrainConfig::default();
        assert!(cfg.set("lr", "fast").is_err());
        cfg.lambda_ce = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            momentum: 1.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            lambda_mmd_rep: -1.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn kv_comments_and_blanks() {
        let pairs = parse_kv_lines("# top\n\nlr = 0.5 # inline\n seed=4\n").unwrap();
        assert_eq!(
            pairs,
            vec![("lr".into(), "0.5".into()), ("seed".into(), "4".into())]
        );
        assert!(parse_kv_lines("no equals sign").is_err());
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let s = gen_two_moons(40, 0.1, 0.0, 1).unwrap();
        let t = gen_two_moons(40, 0.1, 30.0, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..small_config()
        };
        let (net, history) = train(&cfg, &s, t.unlabeled()).unwrap();
        assert!(history.is_empty());
        assert_eq!(net, init_network(&cfg.layer_specs(), cfg.seed).unwrap());
    }

    #[test]
    fn reports_reconstruct_and_count() {
        let s = gen_two_moons(40, 0.1, 0.0, 1).unwrap();
        let t = gen_two_moons(40, 0.1, 30.0, 2).unwrap();
        let cfg = small_config();
        let (_, history) = train(&cfg, &s, t.unlabeled()).unwrap();
        assert_eq!(history.len(), 2 * 5);
        for (i, r) in history.iter().enumerate() {
            assert_eq!(r.step, i as u64);
            assert!((r.total - r.weighted_total(&cfg)).abs() <= 1e-9);
        }
    }

    #[test]
    fn identical_batches_have_zero_discrepancy() {
        let net = init_network(&LayerSpec::mlp(&[2, 6, 3]), 1).unwrap();
        let d = gen_two_moons(10, 0.2, 0.0, 1).unwrap();
        let batch = BatchPair {
            source_features: d.features().clone(),
            source_labels: d.labels().unwrap().to_vec(),
            target_features: d.features().clone(),
        };
        let cfg = TrainConfig {
            lambda_ce: 0.0,
            lambda_entropy: 0.0,
            ..TrainConfig::default()
        };
        let bank = KernelBank::uniform(vec![0.5, 1.0, 2.0]).unwrap();
        let (report, _) = total_objective(&net, &batch, &cfg, &bank).unwrap();
        assert!(report.total.abs() < 1e-12);
    }

    #[test]
    fn unlabeled_source_rejected() {
        let s = gen_two_moons(40, 0.1, 0.0, 1).unwrap().without_labels();
        let t = gen_two_moons(40, 0.1, 30.0, 2).unwrap();
        assert!(matches!(
            train(&small_config(), &s, t.unlabeled()),
            Err(Error::UnlabeledDataset)
        ));
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let s = gen_two_moons(40, 0.1, 0.0, 1).unwrap();
        let t = gen_two_moons(40, 0.1, 30.0, 2).unwrap();
        let cfg = TrainConfig {
            lr: 1e6,
            momentum: 0.0,
            ..small_config()
        };
        match train(&cfg, &s, t.unlabeled()) {
            Err(Error::NonFiniteLoss { step }) => assert!(step > 0),
            other => panic!("expected divergence, got {:?}", other.map(|(_, h)| h.len())),
        }
    }
}
