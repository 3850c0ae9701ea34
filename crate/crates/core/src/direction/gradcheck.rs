use super::{DirectionModel, ModelError};
use crate::graph::LabeledPair;

/// Absolute differences are divided by `max(|analytic|, |numeric|, GRAD_FLOOR)`
/// so that near-zero gradients are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckReport {
    pub parameters_checked: usize,
    pub max_relative_error: f64,
    /// `(pair index, parameter group, offset)` of the worst entry.
    pub worst: (usize, usize, usize),
}

/// Compares analytic loss gradients with central finite differences for
/// every parameter, for each pair in turn. Meant for small models.
pub fn gradcheck(
    model: &DirectionModel,
    pairs: &[LabeledPair],
    step: f64,
) -> Result<GradcheckReport, ModelError> {
    let mut report = GradcheckReport {
        parameters_checked: 0,
        max_relative_error: 0.0,
        worst: (0, 0, 0),
    };
    let mut probe = model.clone();
    for (pi, pair) in pairs.iter().enumerate() {
        let (_, grads) = model.pair_gradient(pair)?;
        let analytic = grads.to_dense(model);
        for (group, values) in analytic.iter().enumerate() {
            for (offset, &a) in values.iter().enumerate() {
                let original = probe.parameters_mut()[group][offset];
                probe.parameters_mut()[group][offset] = original + step;
                let plus = probe.loss(pair)?;
                probe.parameters_mut()[group][offset] = original - step;
                let minus = probe.loss(pair)?;
                probe.parameters_mut()[group][offset] = original;
                let numeric = (plus - minus) / (2.0 * step);
                let err = relative_error(a, numeric);
                if err > report.max_relative_error {
                    report.max_relative_error = err;
                    report.worst = (pi, group, offset);
                }
                report.parameters_checked += 1;
            }
        }
    }
    Ok(report)
}
