//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use amem_core::data::{corrupt, mix_seed, probe_pool, Corruption, CorruptionSpec, Dataset, OcclusionColor, ProbeKind};
use amem_core::dynamics::{
    basin_map, iterate, recovery_rate, spurious_search, verify_attractor, verify_limit_cycle, Bounds, DynError,
    Outcome, Verdict,
};
use amem_core::io::{load_net, render_basin, save_net, write_csv, write_pgm, write_ppm, CsvValue};
use amem_core::linalg::{PowerConfig, SpectrumReport};
use amem_core::net::Net;
use amem_core::optim::{init, train, InitScheme, ObjectiveKind, Optimizer, TrainCfg, TrainResult};
use amem_core::theory::{solve_deep, solve_one_hidden, TheoryRow, TheorySol};

use crate::config::{read_vectors, ObjectiveSpec, RawConfig, RunConfig};
use crate::{Cli, CliError, Command, Common};

pub fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut raw = match &common.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    let flags: [(&str, &Option<String>); 17] = [
        ("refine_lr", &common.refine_lr),
        ("refine_threshold", &common.refine_threshold),
        ("out", &common.out),
        ("dataset", &common.dataset),
        ("mnist_dir", &common.mnist_dir),
        ("width", &common.width),
        ("depth", &common.depth),
        ("nonlin", &common.nonlin),
        ("objective", &common.objective),
        ("optimizer", &common.optimizer),
        ("lr", &common.lr),
        ("init", &common.init),
        ("loss_threshold", &common.loss_threshold),
        ("max_epochs", &common.max_epochs),
        ("conv_tol", &common.conv_tol),
        ("recover_tol", &common.recover_tol),
        ("max_iter", &common.max_iter),
    ];
    for (k, v) in flags {
        raw.set(k, v.clone());
    }
    raw.set("seed", common.seed.map(|s| s.to_string()));
    RunConfig::from_raw(&raw)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli.common)?;
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::Data(format!("{}: {e}", cfg.out.display())))?;
    match &cli.command {
        Command::Train => cmd_train(&cfg),
        Command::Verify { checkpoint } => cmd_verify(&cfg, checkpoint),
        Command::Iterate {
            checkpoint,
            input,
            example,
            corrupt,
        } => cmd_iterate(&cfg, checkpoint, input.as_deref(), *example, corrupt),
        Command::Recover {
            checkpoint,
            corruptions,
            trials,
        } => cmd_recover(&cfg, checkpoint, corruptions, *trials),
        Command::Basin {
            checkpoint,
            bounds,
            resolution,
            field_stride,
        } => cmd_basin(&cfg, checkpoint, bounds, *resolution, *field_stride),
        Command::Spurious { checkpoint, pool } => cmd_spurious(&cfg, checkpoint, pool),
        Command::Theory {
            k,
            u0,
            v0,
            w0,
            train_check,
            k0,
        } => cmd_theory(&cfg, k, *u0, *v0, w0.as_deref(), *train_check, *k0),
        Command::Sweep {
            depths,
            widths,
            objectives,
        } => cmd_sweep(&cfg, depths, widths, objectives),
    }
}

fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|t| t.trim().parse().map_err(|e| CliError::Usage(format!("bad {what} {t:?}: {e}"))))
        .collect()
}

pub fn parse_corruption(s: &str, seed: u64) -> Result<CorruptionSpec, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> Result<f64, CliError> {
        parts
            .get(i)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| CliError::Usage(format!("bad corruption {s:?}")))
    };
    let kind = match parts[0] {
        "uniform" => Corruption::UniformPixels { fraction: num(1)? },
        "gaussian" => Corruption::Gaussian { variance: num(1)? },
        "occlusion" => Corruption::OcclusionSquare {
            side_fraction: num(1)?,
            color: match parts.get(2) {
                Some(&"uniform") => OcclusionColor::Uniform,
                Some(_) => OcclusionColor::Value(num(2)?),
                None => OcclusionColor::Value(0.0),
            },
        },
        _ => {
            return Err(CliError::Usage(format!(
                "unknown corruption {s:?} (uniform:P, occlusion:SIDE[:COLOR], gaussian:VAR)"
            )))
        }
    };
    let spec = CorruptionSpec::new(kind, seed);
    spec.validate()?;
    Ok(spec)
}

fn load_pair(cfg: &RunConfig, checkpoint: &Path) -> Result<(Net, Dataset), CliError> {
    let net = load_net(checkpoint)?;
    let data = cfg.load_dataset()?;
    if data.dim() != net.input_dim() {
        return Err(CliError::Data(format!(
            "checkpoint input dim {} does not match dataset dim {}",
            net.input_dim(),
            data.dim()
        )));
    }
    Ok((net, data))
}

fn out(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

/// Main optimizer, then the refinement stage if configured and the main
/// stage converged. Epochs and the trace run on across both stages.
fn train_protocol(cfg: &RunConfig, data: &Dataset) -> Result<(Net, TrainResult), CliError> {
    let obj = cfg.objective.build(data.len())?;
    let tc = cfg.train_cfg(data)?;
    let mut net = init(&cfg.dims(data.dim()), cfg.nonlin, &tc.init, cfg.seed)?;
    let mut res = train(&mut net, &obj, data.examples(), &tc)?;
    if let (true, Some(rc)) = (res.converged, cfg.refine_cfg(&tc)) {
        let r = train(&mut net, &obj, data.examples(), &rc)?;
        let offset = res.epochs;
        res.loss_trace.extend(r.loss_trace.iter().skip(1).map(|&(e, l)| (e + offset, l)));
        res.epochs += r.epochs;
        res.final_loss = r.final_loss;
        res.converged = r.converged;
    }
    Ok((net, res))
}

fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let data = cfg.load_dataset()?;
    let (net, res) = train_protocol(cfg, &data)?;
    save_net(&net, &out(cfg, "net.amem"))?;
    let rows: Vec<Vec<CsvValue>> = res.loss_trace.iter().map(|&(e, l)| vec![e.into(), l.into()]).collect();
    write_csv(&out(cfg, "train.csv"), &["epoch", "loss"], &rows)?;
    write_csv(
        &out(cfg, "train_summary.csv"),
        &["dims", "nonlin", "optimizer", "lr", "refine_lr", "seed", "final_loss", "epochs", "converged"],
        &[vec![
            dims_str(net.dims()).into(),
            cfg.nonlin.to_string().into(),
            cfg.optimizer.name().into(),
            cfg.lr.into(),
            cfg.refine_lr.into(),
            CsvValue::Text(cfg.seed.to_string()),
            res.final_loss.into(),
            res.epochs.into(),
            (res.converged as usize).into(),
        ]],
    )?;
    println!(
        "trained {} on {} examples: loss {:e} after {} epochs",
        dims_str(net.dims()),
        data.len(),
        res.final_loss,
        res.epochs
    );
    if !res.converged {
        return Err(CliError::NotConverged(format!(
            "loss {:e} above threshold {:e} after {} epochs",
            res.final_loss, cfg.loss_threshold, res.epochs
        )));
    }
    Ok(())
}

fn dims_str(d: &[usize]) -> String {
    d.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("x")
}

const SPECTRUM_HEADER: [&str; 8] = [
    "radius",
    "method",
    "power_estimate",
    "power_iterations",
    "power_converged",
    "qr_radius",
    "qr_power_gap",
    "row_sum_bound",
];

fn spectrum_fields(s: Option<&SpectrumReport>) -> Vec<CsvValue> {
    match s {
        None => vec![CsvValue::Empty; SPECTRUM_HEADER.len()],
        Some(s) => vec![
            s.radius.into(),
            s.method.as_str().into(),
            s.power_estimate.into(),
            s.power_iterations.into(),
            (s.power_converged as usize).into(),
            s.qr_radius.into(),
            s.residual.into(),
            s.row_sum_bound.into(),
        ],
    }
}

fn cmd_verify(cfg: &RunConfig, checkpoint: &Path) -> Result<(), CliError> {
    let (net, data) = load_pair(cfg, checkpoint)?;
    let power = PowerConfig::default();
    let reports = data
        .examples()
        .par_iter()
        .map(|x| verify_attractor(&net, x, &power))
        .collect::<Result<Vec<_>, _>>()?;
    let mut header = vec!["index", "fixed_point_residual", "verdict"];
    header.extend(SPECTRUM_HEADER);
    let rows: Vec<Vec<CsvValue>> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![i.into(), r.fixed_point_residual.into(), r.verdict.as_str().into()];
            row.extend(spectrum_fields(r.spectrum.as_ref()));
            row
        })
        .collect();
    write_csv(&out(cfg, "verify.csv"), &header, &rows)?;
    let attractors = reports.iter().filter(|r| r.verdict == Verdict::Attractor).count();
    println!("attractors: {attractors}/{}", data.len());

    let obj = cfg.objective.build(data.len())?;
    if obj.kind() != ObjectiveKind::Autoencode {
        let mut rows = vec![];
        let mut stable = 0;
        for (c, cycle) in obj.cycles().iter().enumerate() {
            let seq: Vec<Vec<f64>> = cycle.iter().map(|&i| data.examples()[i].clone()).collect();
            let mut row: Vec<CsvValue> = vec![c.into(), cycle.len().into()];
            match verify_limit_cycle(&[&net], &seq, &power) {
                Ok(r) => {
                    stable += (r.verdict == Verdict::Attractor) as usize;
                    row.extend([
                        r.mapping_error.into(),
                        r.verdict.as_str().into(),
                        r.spectrum.radius.into(),
                        r.operator_radius.into(),
                    ]);
                }
                Err(DynError::MappingViolated { error, .. }) => {
                    row.extend([error.into(), "mapping_violated".into(), CsvValue::Empty, CsvValue::Empty]);
                }
                Err(e) => return Err(e.into()),
            }
            rows.push(row);
        }
        write_csv(
            &out(cfg, "cycles.csv"),
            &["cycle", "length", "mapping_error", "verdict", "radius", "operator_radius"],
            &rows,
        )?;
        println!("stable cycles: {stable}/{}", obj.cycles().len());
    }
    Ok(())
}

fn outcome_fields(o: &Outcome) -> (String, CsvValue, CsvValue) {
    match o {
        Outcome::ConvergedTo(i) => ("converged_to".into(), (*i).into(), CsvValue::Empty),
        Outcome::Spurious(_) => ("spurious".into(), CsvValue::Empty, CsvValue::Empty),
        Outcome::Cycle { period, .. } => ("cycle".into(), CsvValue::Empty, (*period).into()),
        Outcome::MaxIter => ("max_iter".into(), CsvValue::Empty, CsvValue::Empty),
    }
}

fn cmd_iterate(
    cfg: &RunConfig,
    checkpoint: &Path,
    input: Option<&Path>,
    example: Option<usize>,
    corruption: &str,
) -> Result<(), CliError> {
    let (net, data) = load_pair(cfg, checkpoint)?;
    let start = match (input, example) {
        (Some(p), _) => {
            let v = read_vectors(p)?;
            if v.len() != 1 {
                return Err(CliError::Data(format!("{} holds {} vectors, expected 1", p.display(), v.len())));
            }
            v.examples()[0].clone()
        }
        (None, Some(i)) => {
            let x = data
                .examples()
                .get(i)
                .ok_or_else(|| CliError::Usage(format!("example {i} out of range (n = {})", data.len())))?;
            corrupt(x, &parse_corruption(corruption, cfg.seed)?, data.image_shape())?
        }
        (None, None) => return Err(CliError::Usage("give --input or --example".into())),
    };
    if start.len() != net.input_dim() {
        return Err(CliError::Data(format!("input dim {} != {}", start.len(), net.input_dim())));
    }
    let r = iterate(&net, &start, data.examples(), &cfg.iter)?;
    let (kind, index, period) = outcome_fields(&r.outcome);
    println!("{kind} after {} iterations (last step {:e})", r.iters, r.step_norm);
    write_csv(
        &out(cfg, "iterate.csv"),
        &["outcome", "index", "period", "iters", "step_norm"],
        &[vec![kind.into(), index, period, r.iters.into(), r.step_norm.into()]],
    )?;
    let rows: Vec<Vec<CsvValue>> = vec![
        start.iter().map(|&v| v.into()).collect(),
        r.last.iter().map(|&v| v.into()).collect(),
    ];
    let cols: Vec<String> = (0..start.len()).map(|i| format!("x{i}")).collect();
    let header: Vec<&str> = cols.iter().map(String::as_str).collect();
    write_csv(&out(cfg, "iterate_points.csv"), &header, &rows)?;
    if let Some((h, w, 1)) = data.image_shape() {
        write_pgm(&start, h, w, &out(cfg, "start.pgm"))?;
        write_pgm(&r.last, h, w, &out(cfg, "recovered.pgm"))?;
    }
    Ok(())
}

fn cmd_recover(cfg: &RunConfig, checkpoint: &Path, corruptions: &str, trials: usize) -> Result<(), CliError> {
    let (net, data) = load_pair(cfg, checkpoint)?;
    let mut rows = vec![];
    for (c, s) in corruptions.split(',').enumerate() {
        let spec = parse_corruption(s.trim(), mix_seed(cfg.seed, c as u64))?;
        let r = recovery_rate(&net, &data, &spec, trials, &cfg.iter)?;
        println!("{s}: rate {:.4}, 1-NN {:.4}, agreement {:.4}", r.rate, r.nn_rate, r.agreement);
        rows.push(vec![
            s.trim().into(),
            trials.into(),
            data.len().into(),
            r.rate.into(),
            r.nn_rate.into(),
            r.agreement.into(),
        ]);
    }
    write_csv(
        &out(cfg, "recovery.csv"),
        &["corruption", "trials", "examples", "rate", "nn_rate", "agreement"],
        &rows,
    )?;
    Ok(())
}

fn cmd_basin(cfg: &RunConfig, checkpoint: &Path, bounds: &str, res: usize, stride: usize) -> Result<(), CliError> {
    let (net, data) = load_pair(cfg, checkpoint)?;
    let b: Vec<f64> = list(bounds, "bound")?;
    if b.len() != 4 || !(b[0] < b[1] && b[2] < b[3]) {
        return Err(CliError::Usage(format!("bounds {bounds:?} must be x_min,x_max,y_min,y_max")));
    }
    let bounds = Bounds {
        x_min: b[0],
        x_max: b[1],
        y_min: b[2],
        y_max: b[3],
    };
    let map = basin_map(&net, data.examples(), bounds, res, res, stride, &cfg.iter)?;
    write_ppm(&render_basin(&map, data.examples()), res, res, &out(cfg, "basin.ppm"))?;
    let mut rows = Vec::with_capacity(res * res);
    for j in 0..res {
        for i in 0..res {
            let c = map.center(i, j);
            rows.push(vec![
                i.into(),
                j.into(),
                c[0].into(),
                c[1].into(),
                map.label(i, j).into(),
                map.iters[j * res + i].into(),
            ]);
        }
    }
    write_csv(&out(cfg, "basin.csv"), &["i", "j", "x", "y", "label", "iters"], &rows)?;
    let field: Vec<Vec<CsvValue>> = map
        .field
        .iter()
        .map(|(p, d)| vec![p[0].into(), p[1].into(), d[0].into(), d[1].into()])
        .collect();
    write_csv(&out(cfg, "field.csv"), &["x", "y", "dx", "dy"], &field)?;
    println!(
        "basin sizes {:?}; unconverged {}, spurious {}, cells differing from nearest-point labels {}",
        map.basin_sizes(data.len()),
        map.unconverged,
        map.spurious,
        map.voronoi_disagreement(data.examples())
    );
    Ok(())
}

fn cmd_spurious(cfg: &RunConfig, checkpoint: &Path, pool: &str) -> Result<(), CliError> {
    let (net, data) = load_pair(cfg, checkpoint)?;
    let mut probes = vec![];
    for (p, s) in pool.split(',').enumerate() {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || CliError::Usage(format!("bad pool {s:?} (uniform:N or gaussian:VAR:N)"));
        let seed = mix_seed(cfg.seed, p as u64);
        let (kind, n) = match parts.as_slice() {
            ["uniform", n] => (ProbeKind::Uniform, n.parse().map_err(|_| bad())?),
            ["gaussian", v, n] => (
                ProbeKind::Gaussian {
                    variance: v.parse().map_err(|_| bad())?,
                },
                n.parse().map_err(|_| bad())?,
            ),
            _ => return Err(bad()),
        };
        probes.extend(probe_pool(n, data.dim(), kind, seed));
    }
    let rep = spurious_search(&net, data.examples(), &probes, &cfg.iter)?;
    let rows: Vec<Vec<CsvValue>> = rep
        .clusters
        .iter()
        .enumerate()
        .map(|(c, cl)| {
            vec![
                c.into(),
                cl.hits.into(),
                amem_core::linalg::norm2(&cl.representative).into(),
                cl.representative
                    .iter()
                    .map(|v| format!("{v:.16e}"))
                    .collect::<Vec<_>>()
                    .join(" ")
                    .into(),
            ]
        })
        .collect();
    write_csv(&out(cfg, "spurious.csv"), &["cluster", "hits", "norm", "point"], &rows)?;
    println!(
        "{} probes: {} to training examples, {} spurious clusters, {} cycles, {} unconverged, {} diverged",
        probes.len(),
        rep.to_training,
        rep.clusters.len(),
        rep.cycles,
        rep.unconverged,
        rep.diverged
    );
    Ok(())
}

/// Trains a rank-1 equal-row net on `e₁ ∈ R^{k0}` with gd, lr 1e−4, and
/// returns the top Jacobian eigenvalue at `e₁`.
fn train_check(cfg: &RunConfig, sol: &TheorySol, k0: usize) -> Result<f64, CliError> {
    let mut x = vec![0.0; k0];
    x[0] = 1.0;
    let init_scheme = if sol.widths.len() == 1 {
        InitScheme::Rank1Equal {
            x: x.clone(),
            u0: sol.u0,
            v0: sol.v0,
        }
    } else {
        InitScheme::DeepRank1Equal {
            x: x.clone(),
            a0: sol.u0,
            b0: sol.v0,
            w0: sol.interior.clone(),
        }
    };
    let mut dims = vec![k0];
    dims.extend(&sol.widths);
    dims.push(k0);
    let mut tc = TrainCfg::new(Optimizer::Gd, 1e-4, init_scheme, cfg.seed);
    tc.loss_threshold = cfg.loss_threshold;
    tc.max_epochs = cfg.max_epochs;
    let mut net = init(&dims, sol.nonlin, &tc.init, cfg.seed)?;
    let r = train(&mut net, &amem_core::optim::Objective::autoencode(1), &[x.clone()], &tc)?;
    if !r.converged {
        return Err(CliError::NotConverged(format!("train check stopped at loss {:e}", r.final_loss)));
    }
    let rep = verify_attractor(&net, &x, &PowerConfig::default())?;
    rep.spectrum
        .map(|s| s.radius)
        .ok_or_else(|| CliError::NotConverged("trained net does not fix the example".into()))
}

fn cmd_theory(
    cfg: &RunConfig,
    k: &str,
    u0: f64,
    v0: f64,
    w0: Option<&str>,
    check: bool,
    k0: usize,
) -> Result<(), CliError> {
    let widths: Vec<usize> = list(k, "width")?;
    let sol = if widths.len() == 1 {
        solve_one_hidden(cfg.nonlin, widths[0], u0, v0)?
    } else {
        let w0: Vec<f64> = match w0 {
            Some(s) => list(s, "w0")?,
            None => vec![1.0; widths.len() - 1],
        };
        solve_deep(cfg.nonlin, &widths, v0, &w0, u0)?
    };
    let trained = if check { Some(train_check(cfg, &sol, k0)?) } else { None };
    let row = TheoryRow::from_sol(&sol, trained);
    let k_field = widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" ");
    write_csv(
        &out(cfg, "theory.csv"),
        &TheoryRow::HEADER,
        &[vec![
            row.nonlin.clone().into(),
            k_field.into(),
            row.u0.into(),
            row.v0.into(),
            row.u.into(),
            row.v.into(),
            row.lambda_theory.into(),
            row.lambda_trained.into(),
        ]],
    )?;
    match trained {
        Some(t) => println!("{}: u {:.6}, v {:.6}, lambda {:.6} (trained {:.6})", row.nonlin, row.u, row.v, row.lambda_theory, t),
        None => println!("{}: u {:.6}, v {:.6}, lambda {:.6}", row.nonlin, row.u, row.v, row.lambda_theory),
    }
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, depths: &str, widths: &str, objectives: &str) -> Result<(), CliError> {
    let depths: Vec<usize> = list(depths, "depth")?;
    let widths: Vec<usize> = list(widths, "width")?;
    let objectives: Vec<ObjectiveSpec> = list(objectives, "objective")?;
    let data = cfg.load_dataset()?;
    let mut cells = vec![];
    for d in &depths {
        for w in &widths {
            for o in &objectives {
                if *d == 0 || *w == 0 {
                    return Err(CliError::Usage("sweep depths and widths must be positive".into()));
                }
                o.build(data.len())?;
                cells.push((*d, *w, o.clone()));
            }
        }
    }
    let results: Vec<Result<Vec<CsvValue>, CliError>> = cells
        .par_iter()
        .enumerate()
        .map(|(c, (d, w, o))| {
            let cell_cfg = RunConfig {
                depth: *d,
                width: *w,
                objective: o.clone(),
                seed: mix_seed(cfg.seed, c as u64),
                ..cfg.clone()
            };
            sweep_cell(&cell_cfg, &data)
        })
        .collect();
    let mut rows = vec![];
    for r in results {
        rows.push(r?);
    }
    write_csv(
        &out(cfg, "sweep.csv"),
        &[
            "depth", "width", "objective", "seed", "final_loss", "epochs", "converged", "examples", "attractors",
            "cycles", "stable_cycles", "recovered",
        ],
        &rows,
    )?;
    println!("{} cells written to {}", rows.len(), out(cfg, "sweep.csv").display());
    Ok(())
}

/// One sweep cell: train, then count attractors (autoencoding) or stable
/// cycles, and examples recovered from their own position.
fn sweep_cell(cfg: &RunConfig, data: &Dataset) -> Result<Vec<CsvValue>, CliError> {
    let obj = cfg.objective.build(data.len())?;
    let (net, loss, epochs) = match train_protocol(cfg, data) {
        Ok((net, r)) => (r.converged.then_some(net), r.final_loss, r.epochs),
        Err(CliError::NotConverged(_)) => (None, f64::INFINITY, 0),
        Err(e) => return Err(e),
    };
    let converged = net.is_some();
    let power = PowerConfig::default();
    let (mut attractors, mut stable, mut recovered) = (0usize, 0usize, 0usize);
    if let Some(net) = &net {
        if obj.kind() == ObjectiveKind::Autoencode {
            for x in data.examples() {
                attractors += (verify_attractor(net, x, &power)?.verdict == Verdict::Attractor) as usize;
            }
        } else {
            for cycle in obj.cycles() {
                let seq: Vec<Vec<f64>> = cycle.iter().map(|&i| data.examples()[i].clone()).collect();
                if let Ok(r) = verify_limit_cycle(&[net], &seq, &power) {
                    stable += (r.verdict == Verdict::Attractor) as usize;
                }
            }
        }
        // An example counts as recovered when iterating from it lands on it
        // again, as a fixed point or on a cycle through it.
        for (i, x) in data.examples().iter().enumerate() {
            recovered += match iterate(net, x, data.examples(), &cfg.iter) {
                Ok(r) => match r.outcome {
                    Outcome::ConvergedTo(j) => (j == i) as usize,
                    Outcome::Cycle { points, .. } => points
                        .iter()
                        .any(|p| amem_core::linalg::within(p, x, cfg.iter.recover_tol))
                        as usize,
                    _ => 0,
                },
                Err(_) => 0,
            };
        }
    }
    Ok(vec![
        cfg.depth.into(),
        cfg.width.into(),
        cfg.objective.to_string().into(),
        CsvValue::Text(cfg.seed.to_string()),
        loss.into(),
        epochs.into(),
        (converged as usize).into(),
        data.len().into(),
        attractors.into(),
        obj.cycles().len().into(),
        stable.into(),
        recovered.into(),
    ])
}
