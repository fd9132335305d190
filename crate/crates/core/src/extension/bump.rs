use nalgebra::DVector;

use super::ExtensionError;

fn h(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth cutoff, identically 1 on `[0, 1]` and 0 on `[2, inf)`.
/// Callers guarantee `t >= 0`.
#[inline]
pub fn phi(t: f64) -> f64 {
    if t <= 1.0 {
        return 1.0;
    }
    if t >= 2.0 {
        return 0.0;
    }
    let a = h(2.0 - t);
    a / (a + h(t - 1.0))
}

pub fn bump_phi(t: f64) -> Result<f64, ExtensionError> {
    if t < 0.0 || t.is_nan() {
        return Err(ExtensionError::NegativeArgument(t));
    }
    Ok(phi(t))
}

/// `phi(|v| / (i r))`.
pub fn tubular_bump(i: u8, r: f64, v: &DVector<f64>) -> Result<f64, ExtensionError> {
    if !(r > 0.0) {
        return Err(ExtensionError::NonpositiveRadius(r));
    }
    if i != 1 && i != 2 {
        return Err(ExtensionError::BadBumpIndex(i));
    }
    Ok(phi(v.norm() / (i as f64 * r)))
}
