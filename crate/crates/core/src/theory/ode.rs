//! Dormand–Prince 5(4) with adaptive step size.

use super::TheoryError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub h_max: f64,
    pub t_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            h0: 1e-3,
            h_max: 10.0,
            t_max: 1e5,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OdeRun {
    pub t: f64,
    pub y: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    /// True when the stop predicate fired (rather than `t_max`).
    pub stopped: bool,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y′ = rhs(t, y)` from `(t0, y0)` until `stop(t, y)` holds after
/// an accepted step, or `t` reaches `opts.t_max`. `on_step` sees every
/// accepted state.
pub fn dopri5<F, S, O>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    opts: &OdeOptions,
    mut stop: S,
    mut on_step: O,
) -> Result<OdeRun, TheoryError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), TheoryError>,
    S: FnMut(f64, &[f64]) -> bool,
    O: FnMut(f64, &[f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut h = opts.h0;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let (mut accepted, mut rejected) = (0usize, 0usize);

    if stop(t, &y) {
        return Ok(OdeRun {
            t,
            y,
            accepted,
            rejected,
            stopped: true,
        });
    }
    rhs(t, &y, &mut k[0])?;

    while accepted + rejected < opts.max_steps {
        if t >= opts.t_max {
            return Ok(OdeRun {
                t,
                y,
                accepted,
                rejected,
                stopped: false,
            });
        }
        h = h.min(opts.h_max).min(opts.t_max - t);
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(TheoryError::StepUnderflow { t });
        }

        let stages: [(f64, &[f64]); 5] = [
            (C2, &[A21]),
            (C3, &[A31, A32]),
            (C4, &[A41, A42, A43]),
            (C5, &[A51, A52, A53, A54]),
            (1.0, &[A61, A62, A63, A64, A65]),
        ];
        let mut failed = None;
        for (s, (c, a)) in stages.iter().enumerate() {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, aj) in a.iter().enumerate() {
                    acc += aj * k[j][i];
                }
                tmp[i] = y[i] + h * acc;
            }
            if let Err(e) = rhs(t + c * h, &tmp, &mut k[s + 1]) {
                failed = Some(e);
                break;
            }
        }
        if let Some(e) = failed {
            // A stage left the domain; retry smaller.
            h *= 0.25;
            rejected += 1;
            if h <= 1e-14 * t.abs().max(1.0) {
                return Err(e);
            }
            continue;
        }
        for i in 0..n {
            y_new[i] = y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
        }
        if y_new.iter().any(|v| !v.is_finite()) {
            h *= 0.25;
            rejected += 1;
            continue;
        }
        if rhs(t + h, &y_new, &mut k[6]).is_err() {
            h *= 0.25;
            rejected += 1;
            continue;
        }
        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                    + E7 * k[6][i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / n as f64).sqrt();
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        if err <= 1.0 {
            t += h;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            accepted += 1;
            on_step(t, &y);
            if stop(t, &y) {
                return Ok(OdeRun {
                    t,
                    y,
                    accepted,
                    rejected,
                    stopped: true,
                });
            }
        } else {
            rejected += 1;
        }
        h *= factor;
    }
    Err(TheoryError::MaxSteps {
        steps: opts.max_steps,
        t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let run = dopri5(
            |_, y, dy| {
                dy[0] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            &OdeOptions {
                t_max: 5.0,
                ..Default::default()
            },
            |_, _| false,
            |_, _| {},
        )
        .unwrap();
        assert!((run.t - 5.0).abs() < 1e-12);
        assert!((run.y[0] - (-5f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_keeps_energy() {
        let run = dopri5(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0, 0.0],
            &OdeOptions {
                t_max: 20.0,
                ..Default::default()
            },
            |_, _| false,
            |_, _| {},
        )
        .unwrap();
        assert!((run.y[0] - 20f64.cos()).abs() < 1e-8);
        assert!((run.y[0].powi(2) + run.y[1].powi(2) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn stop_predicate_fires() {
        let run = dopri5(
            |_, _, dy| {
                dy[0] = 1.0;
                Ok(())
            },
            0.0,
            &[0.0],
            &OdeOptions::default(),
            |_, y| y[0] > 2.0,
            |_, _| {},
        )
        .unwrap();
        assert!(run.stopped && run.y[0] > 2.0);
    }
}
