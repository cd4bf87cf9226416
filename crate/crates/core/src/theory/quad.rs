//! Adaptive Simpson quadrature.

use super::TheoryError;

const MAX_DEPTH: u32 = 48;
/// An integrand that needs more than this is treated as singular.
const MAX_EVALS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    /// Sum of the local Richardson error estimates.
    pub error: f64,
    pub evals: usize,
}

/// `∫_a^b f` to absolute tolerance `tol`. A non-finite integrand value, or
/// one that exhausts the evaluation budget, aborts with
/// [`TheoryError::Singular`].
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<Quad, TheoryError>
where
    F: Fn(f64) -> f64,
{
    let mut evals = 0;
    let mut eval = |z: f64| -> Result<f64, TheoryError> {
        evals += 1;
        let v = f(z);
        if v.is_finite() && evals <= MAX_EVALS {
            Ok(v)
        } else {
            Err(TheoryError::Singular { z })
        }
    };
    if a == b {
        return Ok(Quad {
            value: 0.0,
            error: 0.0,
            evals: 0,
        });
    }
    let (a, b, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let fa = eval(a)?;
    let fb = eval(b)?;
    let m = 0.5 * (a + b);
    let fm = eval(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut error = 0.0;
    let value = recurse(&mut eval, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut error)?;
    Ok(Quad {
        value: sign * value,
        error,
        evals,
    })
}

#[allow(clippy::too_many_arguments)]
fn recurse<E>(
    eval: &mut E,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    error: &mut f64,
) -> Result<f64, TheoryError>
where
    E: FnMut(f64) -> Result<f64, TheoryError>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = eval(lm)?;
    let frm = eval(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // Stop once the interval can no longer be split in floating point.
    if depth == 0 || delta.abs() <= 15.0 * tol || m <= a || m >= b || lm <= a || rm >= b {
        *error += delta.abs() / 15.0;
        return Ok(left + right + delta / 15.0);
    }
    let l = recurse(eval, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, error)?;
    let r = recurse(eval, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, error)?;
    Ok(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_exponentials() {
        let q = adaptive_simpson(|x| x * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((q.value - 4.0).abs() < 1e-12);
        let q = adaptive_simpson(f64::exp, -1.0, 3.0, 1e-12).unwrap();
        assert!((q.value - (3f64.exp() - (-1f64).exp())).abs() < 1e-11);
        let q = adaptive_simpson(|x| x.sin(), 1.0, 0.0, 1e-12).unwrap();
        assert!((q.value - (1f64.cos() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn singular_integrand_aborts() {
        let r = adaptive_simpson(|x| 1.0 / x, -1.0, 1.0, 1e-10);
        assert!(matches!(r, Err(TheoryError::Singular { .. })));
    }
}
