//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use mindisc::checkpoint::Checkpoint;
use mindisc::data::{save_csv, BatchPlan, Dataset};
use mindisc::evaluation::{
    accuracy, centroid_distance, embed, format_accuracy, mean_prediction_entropy, method_config,
    run_cell, two_moons_task, EmbeddingPoint, MethodConfig, TransferTask,
};
use mindisc::losses::{
    coral_loss, cross_entropy_loss, entropy_loss, median_bandwidths, mmd2_loss, KernelBank,
};
use mindisc::network::{init_network, Activation, Layer, LayerSpec, Network, ParamGrads};
use mindisc::trainer::{total_objective, train, TrainConfig, Trainer};
use mindisc::{Matrix, Rng};

const H: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.standard_normal()).collect();
    Matrix::new(rows, cols, data).unwrap()
}

fn central_diff(x: &Matrix, f: impl Fn(&Matrix) -> f64) -> Matrix {
    let mut g = Matrix::zeros(x.rows(), x.cols());
    let mut probe = x.clone();
    for i in 0..x.as_slice().len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + H;
        let up = f(&probe);
        probe.as_mut_slice()[i] = orig - H;
        let down = f(&probe);
        probe.as_mut_slice()[i] = orig;
        g.as_mut_slice()[i] = (up - down) / (2.0 * H);
    }
    g
}

fn worst(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &b)| rel_err(a, b))
        .fold(0.0, f64::max)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let (n, d, c) = (8, 3, 4);
    let mut worst_by_loss = [0.0f64; 5];
    for trial in 0..100u64 {
        let mut rng = Rng::with_stream(trial, 0xacc1);
        let xs = random_matrix(&mut rng, n, d);
        let xt = random_matrix(&mut rng, n, d);

        let g = coral_loss(&xs, &xt).unwrap();
        let ns = central_diff(&xs, |m| coral_loss(m, &xt).unwrap().value);
        let nt = central_diff(&xt, |m| coral_loss(&xs, m).unwrap().value);
        worst_by_loss[0] = worst_by_loss[0]
            .max(worst(g.grad_source.as_slice(), ns.as_slice()))
            .max(worst(g.grad_target.as_slice(), nt.as_slice()));

        let bank = median_bandwidths(&xs, &xt, 3).unwrap();
        let g = mmd2_loss(&xs, &xt, &bank).unwrap();
        let ns = central_diff(&xs, |m| mmd2_loss(m, &xt, &bank).unwrap().value);
        let nt = central_diff(&xt, |m| mmd2_loss(&xs, m, &bank).unwrap().value);
        worst_by_loss[1] = worst_by_loss[1]
            .max(worst(g.grad_source.as_slice(), ns.as_slice()))
            .max(worst(g.grad_target.as_slice(), nt.as_slice()));

        let logits = random_matrix(&mut rng, n, c).scale(2.0);
        let g = entropy_loss(&logits).unwrap();
        let num = central_diff(&logits, |m| entropy_loss(m).unwrap().value);
        worst_by_loss[2] = worst_by_loss[2].max(worst(g.grad.as_slice(), num.as_slice()));

        let labels: Vec<usize> = (0..n)
            .map(|_| (rng.next_u64() % c as u64) as usize)
            .collect();
        let g = cross_entropy_loss(&logits, &labels).unwrap();
        let num = central_diff(&logits, |m| cross_entropy_loss(m, &labels).unwrap().value);
        worst_by_loss[3] = worst_by_loss[3].max(worst(g.grad.as_slice(), num.as_slice()));

        worst_by_loss[4] = worst_by_loss[4].max(objective_grad_error(trial, &mut rng));
    }
    let elapsed = start.elapsed();
    let names = [
        "coral",
        "mmd2",
        "entropy",
        "cross_entropy",
        "total_objective",
    ];
    let pass = worst_by_loss.iter().all(|&e| e <= GRAD_TOL) && elapsed < Duration::from_secs(30);
    let parts: Vec<String> = names
        .iter()
        .zip(worst_by_loss)
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect();
    verdict(
        pass,
        format!(
            "worst relative error over 100 trials: {}; {:.2}s",
            parts.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

/// Worst relative error of the full objective's parameter gradient on a
/// random 8+8-sample batch through a 2-layer network.
fn objective_grad_error(trial: u64, rng: &mut Rng) -> f64 {
    let specs = LayerSpec::mlp(&[3, 6, 2]);
    let mut net = init_network(&specs, trial).unwrap();
    for l in 0..2 {
        for b in net.layer_mut(l).bias.iter_mut() {
            *b = 0.1 * rng.standard_normal();
        }
    }
    let batch = mindisc::data::BatchPair {
        source_features: random_matrix(rng, 8, 3),
        source_labels: (0..8).map(|_| (rng.next_u64() % 2) as usize).collect(),
        target_features: random_matrix(rng, 8, 3).scale(1.5),
    };
    let config = TrainConfig {
        layers: vec![3, 6, 2],
        ..TrainConfig::default()
    };
    let rep_s = net.forward(&batch.source_features).unwrap().rep().clone();
    let rep_t = net.forward(&batch.target_features).unwrap().rep().clone();
    let bank = median_bandwidths(&rep_s, &rep_t, config.kernel_count).unwrap();
    let (_, grads) = total_objective(&net, &batch, &config, &bank).unwrap();
    let value = |n: &Network| total_objective(n, &batch, &config, &bank).unwrap().0.total;

    let mut numeric = ParamGrads::zeros(&net);
    for l in 0..2 {
        for i in 0..net.layers()[l].weights.as_slice().len() {
            let orig = net.layers()[l].weights.as_slice()[i];
            net.layer_mut(l).weights.as_mut_slice()[i] = orig + H;
            let up = value(&net);
            net.layer_mut(l).weights.as_mut_slice()[i] = orig - H;
            let down = value(&net);
            net.layer_mut(l).weights.as_mut_slice()[i] = orig;
            numeric.weights[l].as_mut_slice()[i] = (up - down) / (2.0 * H);
        }
        for i in 0..net.layers()[l].bias.len() {
            let orig = net.layers()[l].bias[i];
            net.layer_mut(l).bias[i] = orig + H;
            let up = value(&net);
            net.layer_mut(l).bias[i] = orig - H;
            let down = value(&net);
            net.layer_mut(l).bias[i] = orig;
            numeric.biases[l][i] = (up - down) / (2.0 * H);
        }
    }
    worst(&grads.flatten(), &numeric.flatten())
}

fn criterion_2() -> Verdict {
    let mut rng = Rng::with_stream(2, 0xacc2);
    let mut worst_self = 0.0f64;
    for _ in 0..50 {
        let rows = 2 + (rng.next_u64() % 15) as usize;
        let cols = 1 + (rng.next_u64() % 6) as usize;
        let x = random_matrix(&mut rng, rows, cols).scale(rng.uniform(0.1, 10.0));
        let bank = median_bandwidths(&x, &x, 5).unwrap();
        worst_self = worst_self
            .max(coral_loss(&x, &x).unwrap().value.abs())
            .max(mmd2_loss(&x, &x, &bank).unwrap().value.abs());
    }
    let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
    let b = Matrix::from_rows(&[[2.0, 0.0], [0.0, 2.0]]);
    let coral = coral_loss(&a, &b).unwrap().value;
    let single = KernelBank::single(std::f64::consts::FRAC_1_SQRT_2).unwrap();
    let mmd = mmd2_loss(
        &Matrix::from_rows(&[[0.0]]),
        &Matrix::from_rows(&[[1.0]]),
        &single,
    )
    .unwrap()
    .value;
    let mmd_expected = 2.0 - 2.0 * (-1.0f64).exp();
    let mut worst_entropy = 0.0f64;
    for c in 2..=10usize {
        let h = entropy_loss(&Matrix::from_rows(&[vec![0.3; c]]))
            .unwrap()
            .value;
        worst_entropy = worst_entropy.max((h - (c as f64).ln()).abs());
    }
    let pass = worst_self <= 1e-12
        && (coral - 0.5625).abs() <= 1e-12
        && (mmd - mmd_expected).abs() <= 1e-12
        && worst_entropy <= 1e-12;
    verdict(
        pass,
        format!(
            "max |loss(X,X)| {worst_self:.1e}; coral hand case {coral}; \
             single-point mmd2 error {:.1e}; uniform entropy error {worst_entropy:.1e}",
            (mmd - mmd_expected).abs()
        ),
    )
}

/// Plain supervised trainer written against raw slices: forward pass,
/// softmax cross-entropy gradient, backpropagation and momentum SGD. It
/// shares only the initialization and batch schedule with the library.
struct Reference {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    vel_w: Vec<Vec<f64>>,
    vel_b: Vec<Vec<f64>>,
    dims: Vec<usize>,
}

impl Reference {
    fn from_network(net: &Network) -> Self {
        let mut dims = vec![net.input_dim()];
        dims.extend(net.layers().iter().map(|l| l.spec.out_dim));
        let weights: Vec<Vec<f64>> = net
            .layers()
            .iter()
            .map(|l| l.weights.as_slice().to_vec())
            .collect();
        let biases: Vec<Vec<f64>> = net.layers().iter().map(|l| l.bias.clone()).collect();
        Self {
            vel_w: weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            vel_b: biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            weights,
            biases,
            dims,
        }
    }

    fn step(&mut self, x: &[f64], labels: &[usize], lr: f64, mu: f64, wd: f64) {
        let n = labels.len();
        let depth = self.weights.len();
        let mut acts = vec![x.to_vec()];
        let mut pres = Vec::new();
        for l in 0..depth {
            let (din, dout) = (self.dims[l], self.dims[l + 1]);
            let a = &acts[l];
            let mut z = vec![0.0; n * dout];
            for i in 0..n {
                for k in 0..din {
                    let aik = a[i * din + k];
                    for j in 0..dout {
                        z[i * dout + j] += aik * self.weights[l][k * dout + j];
                    }
                }
            }
            for i in 0..n {
                for j in 0..dout {
                    z[i * dout + j] += self.biases[l][j];
                }
            }
            let out = if l + 1 < depth {
                z.iter().map(|&v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            pres.push(z);
            acts.push(out);
        }

        let c = self.dims[depth];
        let mut delta = acts[depth].clone();
        for (i, &y) in labels.iter().enumerate() {
            let row = &mut delta[i * c..(i + 1) * c];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
            row[y] -= 1.0;
            for v in row.iter_mut() {
                *v /= n as f64;
            }
        }

        let mut gw: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut gb: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        for l in (0..depth).rev() {
            let (din, dout) = (self.dims[l], self.dims[l + 1]);
            if l + 1 < depth {
                for (d, &z) in delta.iter_mut().zip(&pres[l]) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let mut atd = vec![0.0; din * dout];
            for r in 0..n {
                for i in 0..din {
                    let a = acts[l][r * din + i];
                    for j in 0..dout {
                        atd[i * dout + j] += a * delta[r * dout + j];
                    }
                }
            }
            for (g, v) in gw[l].iter_mut().zip(&atd) {
                *g += v;
            }
            let mut sums = vec![0.0; dout];
            for r in 0..n {
                for j in 0..dout {
                    sums[j] += delta[r * dout + j];
                }
            }
            for (g, s) in gb[l].iter_mut().zip(&sums) {
                *g += s;
            }
            if l == 0 {
                break;
            }
            let mut up = vec![0.0; n * din];
            for r in 0..n {
                for k in 0..din {
                    up[r * din + k] = (0..dout)
                        .map(|j| delta[r * dout + j] * self.weights[l][k * dout + j])
                        .sum();
                }
            }
            delta = up;
        }

        for l in 0..depth {
            for ((p, v), g) in self.weights[l]
                .iter_mut()
                .zip(&mut self.vel_w[l])
                .zip(&gw[l])
            {
                *v = mu * *v - lr * (g + wd * *p);
                *p += *v;
            }
            for ((p, v), g) in self.biases[l]
                .iter_mut()
                .zip(&mut self.vel_b[l])
                .zip(&gb[l])
            {
                *v = mu * *v - lr * g;
                *p += *v;
            }
        }
    }
}

fn criterion_3() -> Verdict {
    let task = two_moons_task(30.0, 200, 0.15, 7).unwrap();
    let base = TrainConfig {
        layers: vec![2, 16, 16, 2],
        epochs: 4,
        batch_size: 16,
        lr: 0.01,
        seed: 21,
        ..TrainConfig::default()
    };
    let config = base.without_adaptation();
    let (net, history) = train(&config, &task.source, task.target.unlabeled()).unwrap();

    let init = init_network(&config.layer_specs(), config.seed).unwrap();
    let mut reference = Reference::from_network(&init);
    let plan = BatchPlan::new(
        task.source.len(),
        task.target.len(),
        config.batch_size,
        config.seed,
    )
    .unwrap();
    let steps = (config.epochs * plan.batches_per_epoch()) as u64;
    for step in 0..steps {
        let batch = plan
            .assemble(&task.source, task.target.unlabeled(), step)
            .unwrap();
        reference.step(
            batch.source_features.as_slice(),
            &batch.source_labels,
            config.lr,
            config.momentum,
            config.weight_decay,
        );
    }
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let mut identical = history.len() as u64 == steps;
    let mut differing = 0usize;
    for (l, layer) in net.layers().iter().enumerate() {
        for (a, b) in [
            (bits(layer.weights.as_slice()), bits(&reference.weights[l])),
            (bits(&layer.bias), bits(&reference.biases[l])),
        ] {
            differing += a.iter().zip(&b).filter(|(x, y)| x != y).count();
            identical &= a == b;
        }
    }
    verdict(
        identical,
        format!(
            "{steps} steps, {} parameters, {differing} differ bitwise from the reference trainer",
            net.param_count()
        ),
    )
}

struct ProtocolRun {
    method: &'static str,
    accuracy: Vec<f64>,
    entropy: Vec<f64>,
    entropy_off: Vec<f64>,
    networks: Vec<Network>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn protocol_config() -> TrainConfig {
    TrainConfig {
        layers: vec![2, 64, 64, 2],
        epochs: 50,
        batch_size: 32,
        ..TrainConfig::default()
    }
}

/// Criterion 4's protocol for all four methods, plus the entropy-free twin
/// of each entropy-using method. Returns the runs and the single-threaded
/// wall time of the 20 protocol runs.
fn run_protocol(task: &TransferTask) -> (Vec<ProtocolRun>, Duration) {
    let base = protocol_config();
    let mut runs = Vec::new();
    let mut protocol_time = Duration::ZERO;
    for method in ["baseline", "coral", "mmd", "joint"] {
        let config = method_config(method, &base).unwrap();
        let with = MethodConfig {
            name: method.into(),
            config: config.clone(),
        };
        let without = MethodConfig {
            name: method.into(),
            config: TrainConfig {
                lambda_entropy: 0.0,
                ..config.clone()
            },
        };
        let mut run = ProtocolRun {
            method,
            accuracy: vec![],
            entropy: vec![],
            entropy_off: vec![],
            networks: vec![],
        };
        for seed in SEEDS {
            let t0 = Instant::now();
            let cell = run_cell(task, &with, seed).unwrap();
            protocol_time += t0.elapsed();
            run.accuracy.push(cell.accuracy);
            run.entropy
                .push(mean_prediction_entropy(&cell.network, task.target.features()).unwrap());
            if config.lambda_entropy > 0.0 {
                let off = run_cell(task, &without, seed).unwrap();
                run.entropy_off
                    .push(mean_prediction_entropy(&off.network, task.target.features()).unwrap());
            }
            run.networks.push(cell.network);
        }
        runs.push(run);
    }
    (runs, protocol_time)
}

fn find<'a>(runs: &'a [ProtocolRun], method: &str) -> &'a ProtocolRun {
    runs.iter().find(|r| r.method == method).unwrap()
}

fn fmt_list(v: &[f64], digits: usize) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.digits$}")).collect();
    format!("[{}]", items.join(", "))
}

fn criterion_4(runs: &[ProtocolRun], elapsed: Duration) -> Verdict {
    let m = |name| mean(&find(runs, name).accuracy);
    let (base, coral, mmd, joint) = (m("baseline"), m("coral"), m("mmd"), m("joint"));
    let pass =
        joint >= base + 5.0 && joint >= coral.max(mmd) - 1.0 && elapsed < Duration::from_secs(120);
    verdict(
        pass,
        format!(
            "mean target accuracy baseline {base:.2}, coral {coral:.2}, mmd {mmd:.2}, joint {joint:.2} \
             (gain {:+.2}); joint per seed {}; {:.1}s for 20 runs",
            joint - base,
            fmt_list(&find(runs, "joint").accuracy, 1),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_5(runs: &[ProtocolRun]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for method in ["coral", "mmd", "joint"] {
        let r = find(runs, method);
        let (on, off) = (mean(&r.entropy), mean(&r.entropy_off));
        pass &= on < off;
        parts.push(format!("{method} {on:.4} vs {off:.4}"));
    }
    verdict(
        pass,
        format!(
            "mean target entropy with vs without the entropy term: {}",
            parts.join(", ")
        ),
    )
}

fn criterion_6() -> Verdict {
    let moons = two_moons_task(0.0, 500, 0.15, 0).unwrap();
    let task = TransferTask::new("moons-0->moons-0", moons.source.clone(), moons.source).unwrap();
    let base = protocol_config();
    let acc = |method: &str| -> Vec<f64> {
        let m = MethodConfig {
            name: method.into(),
            config: method_config(method, &base).unwrap(),
        };
        SEEDS
            .iter()
            .map(|&s| run_cell(&task, &m, s).unwrap().accuracy)
            .collect()
    };
    let baseline = acc("baseline");
    let joint = acc("joint");
    let gap = mean(&joint) - mean(&baseline);
    verdict(
        gap.abs() <= 3.0,
        format!(
            "target = source: baseline {:.2} {}, joint {:.2} {}, gap {gap:+.2}",
            mean(&baseline),
            fmt_list(&baseline, 1),
            mean(&joint),
            fmt_list(&joint, 1)
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_mindisc"))
        .args(args)
        .current_dir(dir)
        .env_remove("MINDISC_SEED")
        .output()
        .expect("spawn mindisc");
    assert!(
        out.status.success(),
        "mindisc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const PIPELINE_FILES: [&str; 8] = [
    "s.csv",
    "t.csv",
    "history.csv",
    "checkpoint.mdck",
    "emb.csv",
    "bench.csv",
    "stdout.txt",
    "resumed.mdck",
];

/// Runs the whole CLI pipeline in `dir` and returns its output files' bytes.
fn cli_pipeline(dir: &Path) -> Vec<Vec<u8>> {
    let mut stdout = Vec::new();
    let mut go = |args: &[&str]| stdout.extend(run_cli(dir, args).stdout);
    go(&[
        "generate",
        "two-moons",
        "--n",
        "200",
        "--seed",
        "1",
        "--out",
        "s.csv",
    ]);
    go(&[
        "generate",
        "two-moons",
        "--n",
        "200",
        "--rotation",
        "30",
        "--seed",
        "2",
        "--out",
        "t.csv",
    ]);
    std::fs::write(
        dir.join("run.cfg"),
        "source = s.csv\ntarget = t.csv\nlayers = 2,16,16,2\nepochs = 3\nbatch_size = 16\nseed = 4\n",
    )
    .unwrap();
    go(&["train", "--config", "run.cfg"]);
    go(&["eval", "--checkpoint", "checkpoint.mdck", "--data", "t.csv"]);
    go(&[
        "embed",
        "--checkpoint",
        "checkpoint.mdck",
        "--source",
        "s.csv",
        "--target",
        "t.csv",
        "--out",
        "emb.csv",
    ]);
    go(&[
        "benchmark",
        "--suite",
        "two-moons-30",
        "--seeds",
        "2",
        "--set",
        "epochs=2",
        "--set",
        "methods=baseline,joint",
        "--out",
        "bench.csv",
    ]);
    go(&[
        "train",
        "--config",
        "run.cfg",
        "--max-steps",
        "10",
        "--set",
        "checkpoint=resumed.mdck",
        "--set",
        "history=h1.csv",
    ]);
    go(&[
        "train",
        "--config",
        "run.cfg",
        "--resume",
        "resumed.mdck",
        "--max-steps",
        "10",
        "--set",
        "checkpoint=resumed.mdck",
        "--set",
        "history=h2.csv",
    ]);
    std::fs::write(dir.join("stdout.txt"), &stdout).unwrap();
    PIPELINE_FILES
        .iter()
        .map(|f| std::fs::read(dir.join(f)).unwrap())
        .collect()
}

fn criterion_7() -> Verdict {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = cli_pipeline(a.path());
    let second = cli_pipeline(b.path());
    let differing: Vec<&str> = PIPELINE_FILES
        .iter()
        .zip(first.iter().zip(&second))
        .filter(|(_, (x, y))| x != y)
        .map(|(f, _)| *f)
        .collect();

    let straight = tempfile::tempdir().unwrap();
    run_cli(
        straight.path(),
        &[
            "generate",
            "two-moons",
            "--n",
            "200",
            "--seed",
            "1",
            "--out",
            "s.csv",
        ],
    );
    run_cli(
        straight.path(),
        &[
            "generate",
            "two-moons",
            "--n",
            "200",
            "--rotation",
            "30",
            "--seed",
            "2",
            "--out",
            "t.csv",
        ],
    );
    std::fs::copy(a.path().join("run.cfg"), straight.path().join("run.cfg")).unwrap();
    run_cli(
        straight.path(),
        &["train", "--config", "run.cfg", "--max-steps", "20"],
    );
    let cli_resume_equal =
        std::fs::read(straight.path().join("checkpoint.mdck")).unwrap() == first[7];

    let task = two_moons_task(30.0, 200, 0.15, 3).unwrap();
    let config = TrainConfig {
        layers: vec![2, 16, 16, 2],
        batch_size: 16,
        seed: 8,
        ..TrainConfig::default()
    };
    let mut whole = Trainer::new(config.clone(), &task.source, task.target.unlabeled()).unwrap();
    whole.run_steps(20).unwrap();
    let mut part = Trainer::new(config, &task.source, task.target.unlabeled()).unwrap();
    part.run_steps(10).unwrap();
    let saved = Checkpoint::from_bytes(&part.checkpoint().to_bytes()).unwrap();
    let mut resumed = Trainer::resume(saved, &task.source, task.target.unlabeled()).unwrap();
    resumed.run_steps(10).unwrap();
    let lib_resume_equal = resumed.checkpoint().to_bytes() == whole.checkpoint().to_bytes()
        && resumed.history() == &whole.history()[10..];

    verdict(
        differing.is_empty() && cli_resume_equal && lib_resume_equal,
        format!(
            "{} pipeline outputs compared, differing: {differing:?}; \
             resume 10+10 == 20 bitwise: cli {cli_resume_equal}, library {lib_resume_equal}",
            PIPELINE_FILES.len()
        ),
    )
}

fn criterion_8() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let identity = Network::from_layers(vec![Layer {
        spec: LayerSpec::new(2, 2, Activation::Identity),
        weights: Matrix::identity(2),
        bias: vec![0.0; 2],
    }])
    .unwrap();
    let config = TrainConfig {
        layers: vec![2, 2],
        ..TrainConfig::default()
    };
    let ck = Checkpoint {
        velocity: ParamGrads::zeros(&identity),
        network: identity,
        config,
        step: 0,
    };
    ck.save(dir.path().join("id.mdck")).unwrap();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..1000 {
        let label = i % 2;
        let predicted = if i < 747 { label } else { 1 - label };
        rows.push(if predicted == 0 {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        });
        labels.push(label);
    }
    let data = Dataset::new(Matrix::from_rows(&rows), Some(labels), "eq", 2).unwrap();
    save_csv(&data, dir.path().join("eq.csv")).unwrap();
    let out = run_cli(
        dir.path(),
        &["eval", "--checkpoint", "id.mdck", "--data", "eq.csv"],
    );
    let printed = String::from_utf8(out.stdout).unwrap();
    let lib = format_accuracy(accuracy(&ck.network, &data).unwrap());
    verdict(
        printed == "accuracy=74.70\n" && lib == "accuracy=74.70",
        format!("cmd_eval printed {:?}", printed.trim_end()),
    )
}

/// RMS distance of the pooled embedding points from their joint centroid.
fn spread(points: &[EmbeddingPoint]) -> f64 {
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(x, y), p| (x + p.x / n, y + p.y / n));
    let ss: f64 = points
        .iter()
        .map(|p| (p.x - mx).powi(2) + (p.y - my).powi(2))
        .sum();
    (ss / n).sqrt()
}

fn criterion_9(task: &TransferTask, runs: &[ProtocolRun]) -> Verdict {
    let base = method_config("joint", &protocol_config()).unwrap();
    let n = task.source.len();
    let stats = |net: &Network| {
        let points = embed(net, &task.source, &task.target).unwrap();
        let d = centroid_distance(&points, n);
        (d, d / spread(&points))
    };
    let mut before = Vec::new();
    let mut after = Vec::new();
    let mut before_ratio = Vec::new();
    let mut after_ratio = Vec::new();
    let mut baseline_after = Vec::new();
    for (i, &seed) in SEEDS.iter().enumerate() {
        let (d0, r0) = stats(&init_network(&base.layer_specs(), seed).unwrap());
        let (d1, r1) = stats(&find(runs, "joint").networks[i]);
        before.push(d0);
        after.push(d1);
        before_ratio.push(r0);
        after_ratio.push(r1);
        baseline_after.push(stats(&find(runs, "baseline").networks[i]).0);
    }
    let decreased = before.iter().zip(&after).filter(|(b, a)| a < b).count();
    let ratio_decreased = before_ratio
        .iter()
        .zip(&after_ratio)
        .filter(|(b, a)| a < b)
        .count();
    verdict(
        decreased >= 4,
        format!(
            "joint centroid distance decreased for {decreased}/5 seeds; untrained {} -> trained {} \
             [diagnostics, not gated: distance/spread decreased for {ratio_decreased}/5 seeds {} -> {}; \
             baseline-trained distance {}]",
            fmt_list(&before, 3),
            fmt_list(&after, 3),
            fmt_list(&before_ratio, 3),
            fmt_list(&after_ratio, 3),
            fmt_list(&baseline_after, 3)
        ),
    )
}

fn report(id: usize, name: &str, v: &Verdict, failures: &mut Vec<usize>) {
    let status = if v.pass { "PASS" } else { "FAIL" };
    println!("criterion {id} [{name}]: {status} - {}", v.detail);
    if !v.pass {
        failures.push(id);
    }
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failures = Vec::new();
    report(1, "gradient correctness", &criterion_1(), &mut failures);
    report(2, "loss identities", &criterion_2(), &mut failures);
    report(3, "reduction equivalence", &criterion_3(), &mut failures);

    let task = two_moons_task(30.0, 500, 0.15, 0).unwrap();
    let (runs, elapsed) = run_protocol(&task);
    report(
        4,
        "adaptation gain",
        &criterion_4(&runs, elapsed),
        &mut failures,
    );
    report(5, "entropy effect", &criterion_5(&runs), &mut failures);
    report(6, "null-shift safety", &criterion_6(), &mut failures);
    report(
        7,
        "determinism and persistence",
        &criterion_7(),
        &mut failures,
    );
    report(8, "accuracy formatting", &criterion_8(), &mut failures);
    report(
        9,
        "embedding centroid distance",
        &criterion_9(&task, &runs),
        &mut failures,
    );

    if failures.is_empty() {
        println!("acceptance: all 9 criteria pass");
    } else {
        println!("acceptance: failing criteria {failures:?}");
        std::process::exit(1);
    }
}
