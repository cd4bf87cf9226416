//! Iterating trained maps: fixed points, cycles, attractor checks, basins.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::data::{corrupt, mix_seed, CorruptionSpec, DataError, Dataset};
use crate::linalg::{
    dist2, norm2, spectral_radius_of_operator, spectral_radius_with, within, LinalgError, Mat, PowerConfig,
    SpectrumReport,
};
use crate::net::{Net, NetError};

pub const FIXED_POINT_TOL: f64 = 1e-6;
pub const ATTRACTOR_MARGIN: f64 = 1e-6;
pub const CLUSTER_TOL: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynError {
    #[error("iterate became non-finite at step {step}")]
    Diverged { step: usize },
    #[error("map {map} sends example {index} to a point {error:e} away from its successor")]
    MappingViolated { map: usize, index: usize, error: f64 },
    #[error("{0}")]
    BadInput(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Data(#[from] DataErrorString),
}

/// `DataError` holds an `io::Error` and is not `Clone`; keep its message.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct DataErrorString(pub String);

impl From<DataError> for DynError {
    fn from(e: DataError) -> Self {
        DynError::Data(DataErrorString(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterConfig {
    /// Stop when `‖f^{k+1}(x) − f^k(x)‖ < conv_tol`.
    pub conv_tol: f64,
    /// A limit this close to a training example counts as that example.
    pub recover_tol: f64,
    pub max_iter: usize,
    /// Past iterates kept for cycle detection.
    pub history: usize,
}

impl Default for IterConfig {
    fn default() -> Self {
        Self {
            conv_tol: 1e-8,
            recover_tol: 1e-7,
            max_iter: 10_000,
            history: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    ConvergedTo(usize),
    Spurious(Vec<f64>),
    /// The orbit returned within `conv_tol` of itself after `period` steps;
    /// `points` are the last `period` iterates.
    Cycle { period: usize, points: Vec<Vec<f64>> },
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterResult {
    pub outcome: Outcome,
    pub iters: usize,
    pub step_norm: f64,
    pub last: Vec<f64>,
}

impl IterResult {
    pub fn converged_to(&self) -> Option<usize> {
        match self.outcome {
            Outcome::ConvergedTo(i) => Some(i),
            _ => None,
        }
    }
}

/// Index of the training example within `tol` of `y`, nearest first.
pub fn match_training(y: &[f64], train: &[Vec<f64>], tol: f64) -> Option<usize> {
    train
        .iter()
        .enumerate()
        .filter(|(_, x)| within(x, y, tol))
        .min_by(|a, b| dist2(a.1, y).total_cmp(&dist2(b.1, y)))
        .map(|(i, _)| i)
}

/// Index of the training example nearest to `y` in Euclidean distance.
pub fn nearest(y: &[f64], train: &[Vec<f64>]) -> Option<usize> {
    train
        .iter()
        .enumerate()
        .min_by(|a, b| dist2(a.1, y).total_cmp(&dist2(b.1, y)))
        .map(|(i, _)| i)
}

/// Applies `net` from `x0` until the step falls below `conv_tol`, a cycle
/// is seen, or `max_iter` steps pass.
pub fn iterate(net: &Net, x0: &[f64], train: &[Vec<f64>], cfg: &IterConfig) -> Result<IterResult, DynError> {
    if x0.len() != net.input_dim() {
        return Err(NetError::DimMismatch {
            expected: net.input_dim(),
            got: x0.len(),
        }
        .into());
    }
    let mut x = x0.to_vec();
    let mut hist: VecDeque<Vec<f64>> = VecDeque::with_capacity(cfg.history + 1);
    let mut step_norm = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let y = match net.apply(&x) {
            Ok(y) => y,
            Err(NetError::NonFinite { .. }) => return Err(DynError::Diverged { step: it }),
            Err(e) => return Err(e.into()),
        };
        step_norm = dist2(&y, &x);
        if step_norm < cfg.conv_tol {
            let (y, extra, step) = match match_training(&y, train, cfg.recover_tol) {
                Some(_) => (y, 0, step_norm),
                None => refine_limit(net, y, step_norm, cfg.max_iter - it)?,
            };
            let outcome = match match_training(&y, train, cfg.recover_tol) {
                Some(i) => Outcome::ConvergedTo(i),
                None => Outcome::Spurious(y.clone()),
            };
            return Ok(IterResult {
                outcome,
                iters: it + extra,
                step_norm: step,
                last: y,
            });
        }
        if cfg.history > 0 {
            if hist.len() == cfg.history {
                hist.pop_front();
            }
            hist.push_back(std::mem::take(&mut x));
        }
        // hist.back() is f^{it−1}, so hist[len − p] is f^{it−p}.
        let len = hist.len();
        for p in 2..=len {
            if within(&y, &hist[len - p], cfg.conv_tol) {
                let mut points: Vec<Vec<f64>> = hist.iter().skip(len + 1 - p).cloned().collect();
                points.push(y.clone());
                return Ok(IterResult {
                    outcome: Outcome::Cycle { period: p, points },
                    iters: it,
                    step_norm,
                    last: y,
                });
            }
        }
        x = y;
    }
    Ok(IterResult {
        outcome: Outcome::MaxIter,
        iters: cfg.max_iter,
        step_norm,
        last: x,
    })
}

/// Continues a converged orbit while its steps keep shrinking.
///
/// Stopping at `‖f^{k+1} − f^k‖ < conv_tol` leaves the iterate about
/// `conv_tol·ρ/(1 − ρ)` from the fixed point, which exceeds `recover_tol`
/// once ρ is above roughly 0.9. The limit is classified from the refined point.
fn refine_limit(net: &Net, mut y: Vec<f64>, mut step: f64, budget: usize) -> Result<(Vec<f64>, usize, f64), DynError> {
    let floor = 1e-15 * norm2(&y).max(1.0);
    let mut extra = 0;
    while extra < budget && step > floor {
        let z = match net.apply(&y) {
            Ok(z) => z,
            Err(NetError::NonFinite { .. }) => return Err(DynError::Diverged { step: extra }),
            Err(e) => return Err(e.into()),
        };
        let s = dist2(&z, &y);
        if !(s < step) {
            break;
        }
        y = z;
        step = s;
        extra += 1;
    }
    Ok((y, extra, step))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Attractor,
    NotAttractor,
    Inconclusive,
    NotFixedPoint,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Attractor => "attractor",
            Verdict::NotAttractor => "not_attractor",
            Verdict::Inconclusive => "inconclusive",
            Verdict::NotFixedPoint => "not_fixed_point",
        }
    }

    fn from_radius(rho: f64) -> Self {
        if rho < 1.0 - ATTRACTOR_MARGIN {
            Verdict::Attractor
        } else if rho > 1.0 + ATTRACTOR_MARGIN {
            Verdict::NotAttractor
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorReport {
    pub verdict: Verdict,
    /// `‖f(x) − x‖`
    pub fixed_point_residual: f64,
    /// Present unless the point is not a fixed point.
    pub spectrum: Option<SpectrumReport>,
}

/// Classifies `x` by the spectral radius of the Jacobian of `net` at `x`.
pub fn verify_attractor(net: &Net, x: &[f64], power: &PowerConfig) -> Result<AttractorReport, DynError> {
    let fwd = net.forward(x)?;
    let residual = dist2(&fwd.output, x);
    if !(residual < FIXED_POINT_TOL) {
        return Ok(AttractorReport {
            verdict: Verdict::NotFixedPoint,
            fixed_point_residual: residual,
            spectrum: None,
        });
    }
    let j = net.jacobian_from(&fwd);
    let spec = spectral_radius_with(&j, power)?;
    Ok(AttractorReport {
        verdict: Verdict::from_radius(spec.radius),
        fixed_point_residual: residual,
        spectrum: Some(spec),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub verdict: Verdict,
    /// Spectrum of the explicitly multiplied Jacobian chain.
    pub spectrum: SpectrumReport,
    /// Power-iteration radius applying the step Jacobians one at a time.
    pub operator_radius: f64,
    /// Largest `‖f_i(x_i) − x_{i+1}‖` over the cycle.
    pub mapping_error: f64,
}

/// Checks that `maps` carry each element of `sequence` to the next (wrapping
/// around) and computes the spectrum of the composed map at `sequence[0]`.
///
/// `maps` holds one network applied at every step or one per step.
pub fn verify_limit_cycle(maps: &[&Net], sequence: &[Vec<f64>], power: &PowerConfig) -> Result<CycleReport, DynError> {
    let n = sequence.len();
    if n == 0 || !(maps.len() == 1 || maps.len() == n) {
        return Err(DynError::BadInput(format!(
            "{} maps for a cycle of length {n}",
            maps.len()
        )));
    }
    let map_at = |i: usize| if maps.len() == 1 { maps[0] } else { maps[i] };
    let mut jacobians = Vec::with_capacity(n);
    let mut worst = (0usize, 0.0f64);
    for (i, x) in sequence.iter().enumerate() {
        let net = map_at(i);
        let fwd = net.forward(x)?;
        let err = dist2(&fwd.output, &sequence[(i + 1) % n]);
        if err > worst.1 || err.is_nan() {
            worst = (i, err);
        }
        jacobians.push(net.jacobian_from(&fwd));
    }
    if !(worst.1 < FIXED_POINT_TOL) {
        return Err(DynError::MappingViolated {
            map: if maps.len() == 1 { 0 } else { worst.0 },
            index: worst.0,
            error: worst.1,
        });
    }

    // Route one: explicit product J_{n−1} ⋯ J_0.
    let mut product = jacobians[0].clone();
    for j in &jacobians[1..] {
        product = j.matmul(&product)?;
    }
    let spectrum = spectral_radius_with(&product, power)?;

    // Route two: never form the product.
    let dim = sequence[0].len();
    let mut buf = vec![0.0; dim];
    let op = spectral_radius_of_operator(
        dim,
        |v, out| {
            out.copy_from_slice(v);
            for j in &jacobians {
                j.matvec_into(out, &mut buf);
                out.copy_from_slice(&buf);
            }
        },
        power,
    )?;

    Ok(CycleReport {
        verdict: Verdict::from_radius(spectrum.radius),
        spectrum,
        operator_radius: op.radius,
        mapping_error: worst.1,
    })
}

/// Counts how many of `directions` random perturbations of size `radius`
/// around `train[i]` iterate back to example `i`.
pub fn local_basin_hits(
    net: &Net,
    train: &[Vec<f64>],
    i: usize,
    radius: f64,
    directions: usize,
    seed: u64,
    cfg: &IterConfig,
) -> Result<usize, DynError> {
    let x = &train[i];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for _ in 0..directions {
        let d: Vec<f64> = (0..x.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = radius / norm2(&d);
        let start: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + s * b).collect();
        if iterate(net, &start, train, cfg)?.converged_to() == Some(i) {
            hits += 1;
        }
    }
    Ok(hits)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            x_min: -2.0,
            x_max: 2.0,
            y_min: -2.0,
            y_max: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinMap {
    pub bounds: Bounds,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, row `j` at the `j`-th smallest y. Training index or −1.
    pub labels: Vec<i64>,
    pub iters: Vec<usize>,
    /// Cells whose orbit hit `max_iter` or a cycle.
    pub unconverged: usize,
    /// Cells that settled on a non-training fixed point.
    pub spurious: usize,
    /// `(point, f(point) − point)` on a coarser subgrid.
    pub field: Vec<([f64; 2], [f64; 2])>,
}

impl BasinMap {
    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        let b = &self.bounds;
        [
            b.x_min + (i as f64 + 0.5) * (b.x_max - b.x_min) / self.nx as f64,
            b.y_min + (j as f64 + 0.5) * (b.y_max - b.y_min) / self.ny as f64,
        ]
    }

    pub fn label(&self, i: usize, j: usize) -> i64 {
        self.labels[j * self.nx + i]
    }

    /// Cells per label, indexed by training example.
    pub fn basin_sizes(&self, n_train: usize) -> Vec<usize> {
        let mut sizes = vec![0; n_train];
        for &l in &self.labels {
            if l >= 0 && (l as usize) < n_train {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }

    /// Labeled cells whose label differs from the nearest training point.
    pub fn voronoi_disagreement(&self, train: &[Vec<f64>]) -> usize {
        let mut count = 0;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let l = self.label(i, j);
                if l >= 0 && nearest(&self.center(i, j), train) != Some(l as usize) {
                    count += 1;
                }
            }
        }
        count
    }
}

/// Labels each cell center of an `nx × ny` grid by the training example its
/// orbit converges to. `field_stride` thins the vector-field samples.
pub fn basin_map(
    net: &Net,
    train: &[Vec<f64>],
    bounds: Bounds,
    nx: usize,
    ny: usize,
    field_stride: usize,
    cfg: &IterConfig,
) -> Result<BasinMap, DynError> {
    if net.input_dim() != 2 {
        return Err(DynError::BadInput(format!(
            "basin maps need a 2D map, input dim is {}",
            net.input_dim()
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(DynError::BadInput("empty grid".into()));
    }
    let mut map = BasinMap {
        bounds,
        nx,
        ny,
        labels: vec![],
        iters: vec![],
        unconverged: 0,
        spurious: 0,
        field: vec![],
    };
    let results: Vec<Result<IterResult, DynError>> = (0..nx * ny)
        .into_par_iter()
        .map(|c| iterate(net, &map.center(c % nx, c / nx), train, cfg))
        .collect();
    for r in results {
        let r = match r {
            Ok(r) => r,
            Err(DynError::Diverged { step }) => IterResult {
                outcome: Outcome::MaxIter,
                iters: step,
                step_norm: f64::INFINITY,
                last: vec![],
            },
            Err(e) => return Err(e),
        };
        let label = match &r.outcome {
            Outcome::ConvergedTo(i) => *i as i64,
            Outcome::Spurious(_) => {
                map.spurious += 1;
                -1
            }
            Outcome::Cycle { .. } | Outcome::MaxIter => {
                map.unconverged += 1;
                -1
            }
        };
        map.labels.push(label);
        map.iters.push(r.iters);
    }
    let stride = field_stride.max(1);
    for j in (0..ny).step_by(stride) {
        for i in (0..nx).step_by(stride) {
            let p = map.center(i, j);
            let y = net.apply(&p)?;
            map.field.push((p, [y[0] - p[0], y[1] - p[1]]));
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpuriousCluster {
    pub representative: Vec<f64>,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpuriousReport {
    pub clusters: Vec<SpuriousCluster>,
    pub to_training: usize,
    pub cycles: usize,
    pub unconverged: usize,
    pub diverged: usize,
}

/// Iterates from every probe and groups non-training fixed points that lie
/// within `CLUSTER_TOL` of each other.
pub fn spurious_search(net: &Net, train: &[Vec<f64>], pool: &[Vec<f64>], cfg: &IterConfig) -> Result<SpuriousReport, DynError> {
    if pool.is_empty() {
        return Err(DynError::BadInput("empty probe pool".into()));
    }
    let results: Vec<Result<IterResult, DynError>> = pool.par_iter().map(|z| iterate(net, z, train, cfg)).collect();
    let mut rep = SpuriousReport::default();
    for r in results {
        match r {
            Ok(r) => match r.outcome {
                Outcome::ConvergedTo(_) => rep.to_training += 1,
                Outcome::Cycle { .. } => rep.cycles += 1,
                Outcome::MaxIter => rep.unconverged += 1,
                Outcome::Spurious(y) => {
                    match rep.clusters.iter_mut().find(|c| within(&c.representative, &y, CLUSTER_TOL)) {
                        Some(c) => c.hits += 1,
                        None => rep.clusters.push(SpuriousCluster {
                            representative: y,
                            hits: 1,
                        }),
                    }
                }
            },
            Err(DynError::Diverged { .. }) => rep.diverged += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleRecovery {
    pub index: usize,
    pub recovered: usize,
    /// Trials where the nearest training example to the corrupted input is
    /// the original.
    pub nn_correct: usize,
    /// Trials where iteration converged to the nearest-neighbour choice.
    pub agree: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub trials: usize,
    pub rate: f64,
    pub nn_rate: f64,
    /// Fraction of all attempts where iteration and 1-NN pick the same example.
    pub agreement: f64,
    pub per_example: Vec<ExampleRecovery>,
}

/// Corrupts every example `trials` times, iterates each corrupted input and
/// counts returns to the original, alongside a nearest-neighbour baseline.
pub fn recovery_rate(
    net: &Net,
    data: &Dataset,
    spec: &CorruptionSpec,
    trials: usize,
    cfg: &IterConfig,
) -> Result<RecoveryReport, DynError> {
    if trials == 0 {
        return Err(DynError::BadInput("trials must be at least 1".into()));
    }
    spec.validate()?;
    let train = data.examples();
    let n = train.len();
    let jobs: Vec<(usize, usize)> = (0..trials).flat_map(|t| (0..n).map(move |i| (t, i))).collect();
    let outcomes: Vec<Result<(usize, bool, bool, bool), DynError>> = jobs
        .par_iter()
        .map(|&(t, i)| {
            let s = spec.with_seed(mix_seed(spec.seed, (t * n + i) as u64));
            let z = corrupt(&train[i], &s, data.image_shape())?;
            let nn = nearest(&z, train);
            let got = match iterate(net, &z, train, cfg) {
                Ok(r) => r.converged_to(),
                Err(DynError::Diverged { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok((i, got == Some(i), nn == Some(i), got.is_some() && got == nn))
        })
        .collect();
    let mut per: Vec<ExampleRecovery> = (0..n)
        .map(|index| ExampleRecovery {
            index,
            recovered: 0,
            nn_correct: 0,
            agree: 0,
        })
        .collect();
    for o in outcomes {
        let (i, rec, nn, agree) = o?;
        per[i].recovered += rec as usize;
        per[i].nn_correct += nn as usize;
        per[i].agree += agree as usize;
    }
    let total = (n * trials).max(1) as f64;
    let sum = |f: fn(&ExampleRecovery) -> usize| per.iter().map(f).sum::<usize>() as f64 / total;
    Ok(RecoveryReport {
        trials,
        rate: sum(|e| e.recovered),
        nn_rate: sum(|e| e.nn_correct),
        agreement: sum(|e| e.agree),
        per_example: per,
    })
}

/// Spectral radius of the Jacobian at each example, in order.
pub fn jacobian_radii(net: &Net, xs: &[Vec<f64>], power: &PowerConfig) -> Result<Vec<SpectrumReport>, DynError> {
    xs.par_iter()
        .map(|x| {
            let j: Mat = net.jacobian(x)?;
            Ok(spectral_radius_with(&j, power)?)
        })
        .collect()
}
