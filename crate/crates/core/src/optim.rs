//! Objectives, optimizers, structured initializations and the full-batch
//! training loop.

use std::fmt;
use std::str::FromStr;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{dot, norm2, orthonormal_basis, Mat};
use crate::net::{Net, NetError, Nonlin};

pub const DEFAULT_LOSS_THRESHOLD: f64 = 1e-8;
pub const DEFAULT_MAX_EPOCHS: usize = 1_000_000;
pub const MOMENTUM_BETA: f64 = 0.009;
pub const WEIGHT_DECAY: f64 = 0.0001;
pub const LOSS_TRACE_EVERY: usize = 1000;
/// Tolerance on `‖x‖₂ = 1` for the rank-1 schemes.
pub const UNIT_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("objective: {0}")]
    BadObjective(String),
    #[error("init scheme incompatible with dims: {0}")]
    Incompatible(String),
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("optimizer state belongs to {state}, config asks for {cfg}")]
    StateMismatch { state: String, cfg: String },
    #[error("training diverged at epoch {epoch} (last finite loss {last_good_loss:e} at epoch {last_good_epoch})")]
    Diverged {
        epoch: usize,
        last_good_epoch: usize,
        last_good_loss: f64,
    },
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Autoencode,
    Sequence,
    MultiSequence,
}

/// Which example each example is trained to map to. Cycles partition the
/// example indices; inside a cycle each element maps to its successor and the
/// last wraps to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    kind: ObjectiveKind,
    cycles: Vec<Vec<usize>>,
    targets: Vec<usize>,
}

impl Objective {
    pub fn autoencode(n: usize) -> Self {
        Self {
            kind: ObjectiveKind::Autoencode,
            cycles: (0..n).map(|i| vec![i]).collect(),
            targets: (0..n).collect(),
        }
    }

    /// One cycle through all examples in order.
    pub fn sequence(n: usize) -> Self {
        let cycles = if n == 0 { vec![] } else { vec![(0..n).collect()] };
        let mut obj = Self::from_cycles(cycles, n).expect("single cycle is a partition");
        obj.kind = ObjectiveKind::Sequence;
        obj
    }

    pub fn multi_sequence(cycles: Vec<Vec<usize>>, n: usize) -> Result<Self, OptimError> {
        Self::from_cycles(cycles, n)
    }

    fn from_cycles(cycles: Vec<Vec<usize>>, n: usize) -> Result<Self, OptimError> {
        let mut targets = vec![usize::MAX; n];
        for c in &cycles {
            if c.is_empty() {
                return Err(OptimError::BadObjective("empty cycle".into()));
            }
            for (j, &i) in c.iter().enumerate() {
                if i >= n {
                    return Err(OptimError::BadObjective(format!(
                        "index {i} out of range for {n} examples"
                    )));
                }
                if targets[i] != usize::MAX {
                    return Err(OptimError::BadObjective(format!(
                        "index {i} appears in more than one place"
                    )));
                }
                targets[i] = c[(j + 1) % c.len()];
            }
        }
        if let Some(i) = targets.iter().position(|t| *t == usize::MAX) {
            return Err(OptimError::BadObjective(format!(
                "index {i} is in no cycle"
            )));
        }
        Ok(Self {
            kind: ObjectiveKind::MultiSequence,
            cycles,
            targets,
        })
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn cycles(&self) -> &[Vec<usize>] {
        &self.cycles
    }

    /// `targets()[i]` is the index example `i` is mapped to.
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Gd,
    Momentum { beta: f64 },
    MomentumWd { beta: f64, wd: f64 },
    Rmsprop { beta2: f64, eps: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn momentum() -> Self {
        Optimizer::Momentum { beta: MOMENTUM_BETA }
    }

    pub fn momentum_wd() -> Self {
        Optimizer::MomentumWd {
            beta: MOMENTUM_BETA,
            wd: WEIGHT_DECAY,
        }
    }

    pub fn rmsprop() -> Self {
        Optimizer::Rmsprop {
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Gd => "gd",
            Optimizer::Momentum { .. } => "momentum",
            Optimizer::MomentumWd { .. } => "momentum_wd",
            Optimizer::Rmsprop { .. } => "rmsprop",
            Optimizer::Adam { .. } => "adam",
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Optimizer {
    type Err = OptimError;

    /// Names only; constants take their defaults.
    fn from_str(s: &str) -> Result<Self, OptimError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gd" | "sgd" => Ok(Optimizer::Gd),
            "momentum" | "gd_momentum" => Ok(Optimizer::momentum()),
            "momentum_wd" | "gd_momentum_wd" => Ok(Optimizer::momentum_wd()),
            "rmsprop" => Ok(Optimizer::rmsprop()),
            "adam" => Ok(Optimizer::adam()),
            other => Err(OptimError::BadConfig(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Weight initialization. For the structured schemes the input layer is
/// `W_1 = v xᵀ` and the output layer is `W_d = x uᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitScheme {
    /// Every entry i.i.d. `U[−a, a]`.
    Uniform(f64),
    /// One hidden layer, `W_1 = v₀ xᵀ`, `W_2 = x u₀ᵀ`.
    Rank1 { x: Vec<f64>, u0: Vec<f64>, v0: Vec<f64> },
    /// Like `Rank1` with every entry of `u₀` (and of `v₀`) equal.
    Rank1Equal { x: Vec<f64>, u0: f64, v0: f64 },
    /// Equal-row rank-1 step map `W_1 = v₀ fromᵀ`, `W_2 = to u₀ᵀ`, used to
    /// train one link of a sequence.
    Rank1EqualStep {
        from: Vec<f64>,
        to: Vec<f64>,
        u0: f64,
        v0: f64,
    },
    /// Any depth: `W_1 = b₀ 1 xᵀ`, `W_d = a₀ x 1ᵀ`, interior `W_i = w₀ᵢ 1`.
    DeepRank1Equal {
        x: Vec<f64>,
        a0: f64,
        b0: f64,
        w0: Vec<f64>,
    },
    /// One hidden layer, `W_2 = Σ xᵢ aᵢᵀ`, `W_1 = Σ bᵢ xᵢᵀ`.
    SpanRank1 {
        xs: Vec<Vec<f64>>,
        a0: Vec<Vec<f64>>,
        b0: Vec<Vec<f64>>,
    },
}

impl InitScheme {
    pub fn name(&self) -> &'static str {
        match self {
            InitScheme::Uniform(_) => "uniform",
            InitScheme::Rank1 { .. } => "rank1",
            InitScheme::Rank1Equal { .. } => "rank1_equal",
            InitScheme::Rank1EqualStep { .. } => "rank1_equal_step",
            InitScheme::DeepRank1Equal { .. } => "deep_rank1_equal",
            InitScheme::SpanRank1 { .. } => "span_rank1",
        }
    }

    /// The vectors the scheme's structure is built from: `(input side,
    /// output side)`.
    pub fn anchors(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            InitScheme::Rank1 { x, .. }
            | InitScheme::Rank1Equal { x, .. }
            | InitScheme::DeepRank1Equal { x, .. } => Some((x.clone(), x.clone())),
            InitScheme::Rank1EqualStep { from, to, .. } => Some((from.clone(), to.clone())),
            _ => None,
        }
    }
}

fn require_unit(x: &[f64], k0: usize, what: &str) -> Result<(), OptimError> {
    if x.len() != k0 {
        return Err(OptimError::Incompatible(format!(
            "{what} has dim {}, network input dim is {k0}",
            x.len()
        )));
    }
    let n = norm2(x);
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(OptimError::Incompatible(format!(
            "{what} must have unit norm, has {n}"
        )));
    }
    Ok(())
}

fn require_one_hidden(dims: &[usize], name: &str) -> Result<(), OptimError> {
    if dims.len() != 3 {
        return Err(OptimError::Incompatible(format!(
            "{name} needs exactly one hidden layer, dims are {dims:?}"
        )));
    }
    Ok(())
}

/// Builds a network with widths `dims = [k₀, …, k_d]`.
pub fn init(dims: &[usize], nonlin: Nonlin, scheme: &InitScheme, seed: u64) -> Result<Net, OptimError> {
    if dims.len() < 2 || dims.iter().any(|d| *d == 0) {
        return Err(OptimError::Incompatible(format!("bad dims {dims:?}")));
    }
    if dims[0] != dims[dims.len() - 1] {
        return Err(OptimError::Incompatible(format!(
            "output width {} must equal input width {}",
            dims[dims.len() - 1],
            dims[0]
        )));
    }
    let k0 = dims[0];
    let weights: Vec<Mat> = match scheme {
        InitScheme::Uniform(a) => {
            if !(*a > 0.0 && a.is_finite()) {
                return Err(OptimError::BadConfig(format!("uniform scale {a} must be positive")));
            }
            let dist = Uniform::new_inclusive(-a, *a).expect("finite positive range");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            dims.windows(2)
                .map(|w| {
                    let data = (0..w[0] * w[1]).map(|_| dist.sample(&mut rng)).collect();
                    Mat::from_vec(w[1], w[0], data).expect("finite samples")
                })
                .collect()
        }
        InitScheme::Rank1 { x, u0, v0 } => {
            require_one_hidden(dims, "rank1")?;
            require_unit(x, k0, "x")?;
            if u0.len() != dims[1] || v0.len() != dims[1] {
                return Err(OptimError::Incompatible(format!(
                    "u0/v0 lengths {}/{} must equal hidden width {}",
                    u0.len(),
                    v0.len(),
                    dims[1]
                )));
            }
            vec![Mat::outer(v0, x), Mat::outer(x, u0)]
        }
        InitScheme::Rank1Equal { x, u0, v0 } => {
            require_one_hidden(dims, "rank1_equal")?;
            require_unit(x, k0, "x")?;
            let k = dims[1];
            vec![Mat::outer(&vec![*v0; k], x), Mat::outer(x, &vec![*u0; k])]
        }
        InitScheme::Rank1EqualStep { from, to, u0, v0 } => {
            require_one_hidden(dims, "rank1_equal_step")?;
            require_unit(from, k0, "from")?;
            require_unit(to, k0, "to")?;
            let k = dims[1];
            vec![Mat::outer(&vec![*v0; k], from), Mat::outer(to, &vec![*u0; k])]
        }
        InitScheme::DeepRank1Equal { x, a0, b0, w0 } => {
            require_unit(x, k0, "x")?;
            let d = dims.len() - 1;
            if d < 2 || w0.len() != d - 2 {
                return Err(OptimError::Incompatible(format!(
                    "depth {d} needs {} interior scalars, got {}",
                    d.saturating_sub(2),
                    w0.len()
                )));
            }
            let mut ws = Vec::with_capacity(d);
            ws.push(Mat::outer(&vec![*b0; dims[1]], x));
            for (i, w) in w0.iter().enumerate() {
                ws.push(Mat::filled(dims[i + 2], dims[i + 1], *w));
            }
            ws.push(Mat::outer(x, &vec![*a0; dims[d - 1]]));
            ws
        }
        InitScheme::SpanRank1 { xs, a0, b0 } => {
            require_one_hidden(dims, "span_rank1")?;
            let k = dims[1];
            if xs.is_empty() || xs.len() != a0.len() || xs.len() != b0.len() {
                return Err(OptimError::Incompatible(
                    "span_rank1 needs one a and one b per example".into(),
                ));
            }
            let mut w_in = Mat::zeros(k, k0);
            let mut w_out = Mat::zeros(k0, k);
            for ((x, a), b) in xs.iter().zip(a0).zip(b0) {
                if x.len() != k0 || a.len() != k || b.len() != k {
                    return Err(OptimError::Incompatible("span_rank1 vector lengths".into()));
                }
                w_in.add_scaled(1.0, &Mat::outer(b, x)).expect("same shape");
                w_out.add_scaled(1.0, &Mat::outer(x, a)).expect("same shape");
            }
            vec![w_in, w_out]
        }
    };
    Ok(Net::new(weights, nonlin)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainCfg {
    pub optimizer: Optimizer,
    pub lr: f64,
    pub init: InitScheme,
    pub seed: u64,
    pub loss_threshold: f64,
    pub max_epochs: usize,
}

impl TrainCfg {
    pub fn new(optimizer: Optimizer, lr: f64, init: InitScheme, seed: u64) -> Self {
        Self {
            optimizer,
            lr,
            init,
            seed,
            loss_threshold: DEFAULT_LOSS_THRESHOLD,
            max_epochs: DEFAULT_MAX_EPOCHS,
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(OptimError::BadConfig(format!("lr {} must be positive", self.lr)));
        }
        if !(self.loss_threshold > 0.0) {
            return Err(OptimError::BadConfig(format!(
                "loss threshold {} must be positive",
                self.loss_threshold
            )));
        }
        Ok(())
    }
}

/// Per-parameter buffers carried between steps.
#[derive(Debug, Clone, Default)]
pub struct OptimizerState {
    owner: Option<&'static str>,
    t: u64,
    first: Vec<Mat>,
    second: Vec<Mat>,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub final_loss: f64,
    /// Parameter updates performed.
    pub epochs: usize,
    pub converged: bool,
    /// `(epoch, loss)` sampled every 1000 epochs, plus the final value.
    pub loss_trace: Vec<(usize, f64)>,
}

fn batch<'a>(objective: &Objective, data: &'a [Vec<f64>]) -> (Vec<&'a [f64]>, Vec<&'a [f64]>) {
    let inputs = data.iter().map(|x| x.as_slice()).collect();
    let targets = objective.targets().iter().map(|&t| data[t].as_slice()).collect();
    (inputs, targets)
}

fn check_data(objective: &Objective, data: &[Vec<f64>]) -> Result<(), OptimError> {
    if data.is_empty() {
        return Err(OptimError::EmptyDataset);
    }
    if objective.len() != data.len() {
        return Err(OptimError::BadObjective(format!(
            "objective covers {} examples, dataset has {}",
            objective.len(),
            data.len()
        )));
    }
    Ok(())
}

fn apply_update(net: &mut Net, grads: &[Mat], opt: Optimizer, lr: f64, state: &mut OptimizerState) -> Result<(), OptimError> {
    match state.owner {
        None => {
            state.owner = Some(opt.name());
            state.t = 0;
            let zeros = || grads.iter().map(|g| Mat::zeros(g.rows(), g.cols())).collect();
            state.first = zeros();
            state.second = match opt {
                Optimizer::Rmsprop { .. } | Optimizer::Adam { .. } => zeros(),
                _ => Vec::new(),
            };
        }
        Some(owner) if owner != opt.name() => {
            return Err(OptimError::StateMismatch {
                state: owner.to_string(),
                cfg: opt.name().to_string(),
            })
        }
        Some(_) => {}
    }
    state.t += 1;
    let t = state.t;

    for (l, g) in grads.iter().enumerate() {
        let w = net.weights_mut()[l].data_mut();
        let g = g.data();
        match opt {
            Optimizer::Gd => {
                for (wi, gi) in w.iter_mut().zip(g) {
                    *wi -= lr * gi;
                }
            }
            Optimizer::Momentum { beta } | Optimizer::MomentumWd { beta, .. } => {
                let wd = match opt {
                    Optimizer::MomentumWd { wd, .. } => wd,
                    _ => 0.0,
                };
                let buf = state.first[l].data_mut();
                for ((wi, gi), bi) in w.iter_mut().zip(g).zip(buf.iter_mut()) {
                    let gi = gi + wd * *wi;
                    *bi = if t == 1 { gi } else { beta * *bi + gi };
                    *wi -= lr * *bi;
                }
            }
            Optimizer::Rmsprop { beta2, eps } => {
                let sq = state.second[l].data_mut();
                for ((wi, gi), si) in w.iter_mut().zip(g).zip(sq.iter_mut()) {
                    *si = beta2 * *si + (1.0 - beta2) * gi * gi;
                    *wi -= lr * gi / (si.sqrt() + eps);
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(t as i32);
                let c2 = 1.0 - beta2.powi(t as i32);
                let m = state.first[l].data_mut();
                let v = state.second[l].data_mut();
                for (((wi, gi), mi), vi) in w.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *mi = beta1 * *mi + (1.0 - beta1) * gi;
                    *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                    let mhat = *mi / c1;
                    let vhat = *vi / c2;
                    *wi -= lr * mhat / (vhat.sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}

/// One full-batch update. Returns the loss before the update.
pub fn step(
    net: &mut Net,
    objective: &Objective,
    data: &[Vec<f64>],
    cfg: &TrainCfg,
    state: &mut OptimizerState,
) -> Result<f64, OptimError> {
    check_data(objective, data)?;
    let (inputs, targets) = batch(objective, data);
    let g = net.loss_grads(&inputs, &targets)?;
    if !g.loss.is_finite() {
        return Err(OptimError::Diverged {
            epoch: state.t as usize,
            last_good_epoch: state.t as usize,
            last_good_loss: f64::NAN,
        });
    }
    apply_update(net, &g.grads, cfg.optimizer, cfg.lr, state)?;
    Ok(g.loss)
}

/// Trains until the loss is at most `cfg.loss_threshold` or the epoch cap.
pub fn train(net: &mut Net, objective: &Objective, data: &[Vec<f64>], cfg: &TrainCfg) -> Result<TrainResult, OptimError> {
    train_observed(net, objective, data, cfg, |_, _, _| {})
}

/// `train`, calling `observe(epoch, net, loss)` before every update and once
/// on the final weights.
pub fn train_observed<F>(
    net: &mut Net,
    objective: &Objective,
    data: &[Vec<f64>],
    cfg: &TrainCfg,
    mut observe: F,
) -> Result<TrainResult, OptimError>
where
    F: FnMut(usize, &Net, f64),
{
    cfg.validate()?;
    check_data(objective, data)?;
    let (inputs, targets) = batch(objective, data);
    let mut state = OptimizerState::new();
    let mut trace = Vec::new();
    let mut last_good = (0usize, f64::NAN);

    let mut epoch = 0;
    loop {
        let g = match net.loss_grads(&inputs, &targets) {
            Ok(g) if g.loss.is_finite() => g,
            Ok(_) | Err(NetError::NonFinite { .. }) => {
                return Err(OptimError::Diverged {
                    epoch,
                    last_good_epoch: last_good.0,
                    last_good_loss: last_good.1,
                })
            }
            Err(e) => return Err(e.into()),
        };
        last_good = (epoch, g.loss);
        observe(epoch, net, g.loss);
        if epoch % LOSS_TRACE_EVERY == 0 {
            trace.push((epoch, g.loss));
        }
        let done = g.loss <= cfg.loss_threshold;
        if done || epoch >= cfg.max_epochs {
            if trace.last().map(|p| p.0) != Some(epoch) {
                trace.push((epoch, g.loss));
            }
            return Ok(TrainResult {
                final_loss: g.loss,
                epochs: epoch,
                converged: done,
                loss_trace: trace,
            });
        }
        apply_update(net, &g.grads, cfg.optimizer, cfg.lr, &mut state)?;
        epoch += 1;
    }
}

/// Structure residuals of one snapshot. Entries that do not apply to the
/// network shape are `NaN`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantSample {
    pub epoch: usize,
    /// `‖W_1 − (W_1 x)xᵀ‖_F`
    pub rank1_input: f64,
    /// `‖W_d − x(xᵀW_d)‖_F`
    pub rank1_output: f64,
    /// Largest `|u_i − u_1|` or `|v_i − v_1|` with `u = W_dᵀx`, `v = W_1 x`.
    pub equal_spread: f64,
    /// Largest `‖W_i − mean(W_i)·1‖_F` over interior layers.
    pub interior: f64,
    /// Largest `‖(I − P)f(z)‖` over probes, `P` projecting onto the span of
    /// the reference examples.
    pub span: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InvariantReport {
    pub samples: Vec<InvariantSample>,
}

impl InvariantReport {
    fn max_of(&self, f: impl Fn(&InvariantSample) -> f64) -> f64 {
        self.samples
            .iter()
            .map(f)
            .filter(|v| !v.is_nan())
            .fold(f64::NAN, |a, b| if a.is_nan() { b } else { a.max(b) })
    }

    pub fn max_rank1(&self) -> f64 {
        self.max_of(|s| s.rank1_input.max(s.rank1_output))
    }

    pub fn max_equal_spread(&self) -> f64 {
        self.max_of(|s| s.equal_spread)
    }

    pub fn max_interior(&self) -> f64 {
        self.max_of(|s| s.interior)
    }

    pub fn max_span(&self) -> f64 {
        self.max_of(|s| s.span)
    }
}

fn spread(v: &[f64]) -> f64 {
    v.iter().map(|e| (e - v[0]).abs()).fold(0.0, f64::max)
}

/// Residuals of the structure `scheme` should preserve, at every snapshot.
///
/// Rank-1 checks use the scheme's anchor vectors, falling back to `data[0]`
/// for unstructured schemes. The span check projects onto the scheme's
/// examples for `SpanRank1`, otherwise onto `data`.
pub fn check_invariants(
    trajectory: &[(usize, Net)],
    scheme: &InitScheme,
    data: &[Vec<f64>],
    probes: &[Vec<f64>],
) -> InvariantReport {
    let (x_in, x_out) = scheme
        .anchors()
        .or_else(|| data.first().map(|x| (x.clone(), x.clone())))
        .unwrap_or_default();
    let span_src: &[Vec<f64>] = match scheme {
        InitScheme::SpanRank1 { xs, .. } => xs,
        _ => data,
    };
    let basis = orthonormal_basis(span_src, 1e-12);

    let samples = trajectory
        .iter()
        .map(|(epoch, net)| {
            let ws = net.weights();
            let d = ws.len();
            let mut s = InvariantSample {
                epoch: *epoch,
                rank1_input: f64::NAN,
                rank1_output: f64::NAN,
                equal_spread: f64::NAN,
                interior: f64::NAN,
                span: f64::NAN,
            };
            if d >= 2 && x_in.len() == net.input_dim() {
                let w_in = &ws[0];
                let w_out = &ws[d - 1];
                let v = w_in.matvec(&x_in).expect("dims checked");
                let u = w_out.tmatvec(&x_out).expect("dims checked");
                s.rank1_input = w_in.sub(&Mat::outer(&v, &x_in)).expect("shape").frobenius_norm();
                s.rank1_output = w_out.sub(&Mat::outer(&x_out, &u)).expect("shape").frobenius_norm();
                s.equal_spread = spread(&u).max(spread(&v));
                if d > 2 {
                    s.interior = ws[1..d - 1]
                        .iter()
                        .map(|w| {
                            let mean = w.data().iter().sum::<f64>() / w.data().len() as f64;
                            w.data().iter().map(|e| (e - mean) * (e - mean)).sum::<f64>().sqrt()
                        })
                        .fold(0.0, f64::max);
                }
            }
            if !basis.is_empty() && !probes.is_empty() {
                let mut worst = 0.0f64;
                for z in probes {
                    let Ok(y) = net.apply(z) else {
                        worst = f64::INFINITY;
                        continue;
                    };
                    let mut r = y.clone();
                    for q in &basis {
                        let c = dot(q, &y);
                        for (ri, qi) in r.iter_mut().zip(q) {
                            *ri -= c * qi;
                        }
                    }
                    worst = worst.max(norm2(&r));
                }
                s.span = worst;
            }
            s
        })
        .collect();
    InvariantReport { samples }
}
