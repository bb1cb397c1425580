use super::params::ParamVector;

/// Worst coordinate of a finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

pub const DEFAULT_STEP: f64 = 1e-5;

/// Magnitude below which both gradients count as zero when forming the
/// relative error denominator.
pub const ABS_FLOOR: f64 = 1e-6;

/// Compares `loss_and_grad`'s analytic gradient at `params` against central
/// differences of its loss with step `h`.
///
/// The relative error per coordinate is `|a - n| / max(|a|, |n|, ABS_FLOOR)`.
pub fn grad_check<F>(loss_and_grad: F, params: &ParamVector, h: f64) -> GradCheckReport
where
    F: Fn(&ParamVector) -> (f64, ParamVector),
{
    let (_, analytic) = loss_and_grad(params);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut probe = params.clone();
    for i in 0..params.len() {
        let orig = probe.values()[i];
        probe.values_mut()[i] = orig + h;
        let up = loss_and_grad(&probe).0;
        probe.values_mut()[i] = orig - h;
        let down = loss_and_grad(&probe).0;
        probe.values_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic.values()[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(ABS_FLOOR);
        if rel > report.max_rel_error || !rel.is_finite() {
            report = GradCheckReport {
                max_rel_error: rel,
                worst_index: i,
                analytic: a,
                numeric,
            };
        }
    }
    report
}
