//! The C-infinity exponential step shared by the Fourier masks and the
//! perturbation bumps.

/// `exp(-1/u)` for `u > 0`, zero otherwise.
#[inline]
fn flat(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp()
    }
}

/// Smooth step from 0 (at `u <= 0`) to 1 (at `u >= 1`), symmetric about 1/2.
#[inline]
pub fn step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = flat(u);
        let b = flat(1.0 - u);
        a / (a + b)
    }
}

/// Derivative of [`step`].
pub fn step_deriv(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    // step = 1 / (1 + exp(1/u - 1/(1-u)))
    let e = 1.0 / u - 1.0 / (1.0 - u);
    if e.abs() > 700.0 {
        return 0.0;
    }
    let q = e.exp();
    let de = -1.0 / (u * u) - 1.0 / ((1.0 - u) * (1.0 - u));
    -q * de / ((1.0 + q) * (1.0 + q))
}

/// Radial cutoff: 1 for `s <= 1`, 0 for `s >= 2`, smooth in between.
#[inline]
pub fn chi(s: f64) -> f64 {
    1.0 - step(s - 1.0)
}
