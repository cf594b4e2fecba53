//! Central finite-difference checks of analytic parameter gradients.

use super::PolicyParams;

/// Finite-difference step.
pub const STEP: f64 = 1e-4;

/// Denominator floor of the relative error. Components whose analytic and
/// numeric values are both below it are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    /// Flat parameter index of the worst component.
    pub worst: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compare `loss`'s analytic gradient with central differences on every parameter.
pub fn gradient_check<F>(params: &PolicyParams<f64>, loss: F) -> GradCheck
where
    F: Fn(&PolicyParams<f64>) -> (f64, PolicyParams<f64>),
{
    let analytic = loss(params).1.to_flat();
    let base = params.to_flat();
    let mut probe = params.clone();
    let mut out = GradCheck {
        max_rel_err: 0.0,
        worst: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut flat = base.clone();
    for i in 0..base.len() {
        flat[i] = base[i] + STEP;
        probe.set_flat(&flat);
        let up = loss(&probe).0;
        flat[i] = base[i] - STEP;
        probe.set_flat(&flat);
        let down = loss(&probe).0;
        flat[i] = base[i];
        let numeric = (up - down) / (2.0 * STEP);
        let e = rel_err(analytic[i], numeric);
        if e > out.max_rel_err {
            out = GradCheck {
                max_rel_err: e,
                worst: i,
                analytic: analytic[i],
                numeric,
            };
        }
    }
    out
}
