use super::{Result, Tape, Tensor, TensorError, Var};

/// Below this magnitude gradients are compared in absolute terms.
const SMALL_GRADIENT: f64 = 1e-6;
const SMALL_ABS_TOLERANCE: f64 = 1e-2;

/// Agreement between analytic and finite-difference gradients for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct InputCheck {
    pub max_rel_error: f64,
    /// Largest absolute error among entries whose gradient magnitude is below 1e-6.
    pub max_abs_error_small: f64,
    pub worst_index: usize,
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub inputs: Vec<InputCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.inputs.iter().map(|c| c.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.inputs
            .iter()
            .all(|c| c.max_rel_error <= self.tolerance && c.max_abs_error_small <= SMALL_ABS_TOLERANCE)
    }
}

/// Compares tape gradients of a scalar graph against central differences.
///
/// `build` receives one leaf per input and must return a scalar node.
pub fn grad_check<F>(inputs: &[Tensor], step: f64, tolerance: f64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let leaves: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let out = build(&mut tape, &leaves)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .zip(inputs)
        .map(|(v, t)| grads.get(*v).map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec))
        .collect();
    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::inference();
        let leaves: Vec<Var> = xs.iter().map(|t| tape.leaf(t.clone(), false)).collect();
        let out = build(&mut tape, &leaves)?;
        Ok(tape.value(out).values()[0])
    };
    check_gradients(inputs, &analytic, eval, step, tolerance)
}

/// Central-difference comparison against externally supplied analytic gradients.
pub fn check_gradients<E>(
    inputs: &[Tensor],
    analytic: &[Vec<f64>],
    eval: E,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    E: Fn(&[Tensor]) -> Result<f64>,
{
    let mut xs = inputs.to_vec();
    let mut report = Vec::with_capacity(inputs.len());
    for (i, grad) in analytic.iter().enumerate() {
        let mut check = InputCheck {
            max_rel_error: 0.0,
            max_abs_error_small: 0.0,
            worst_index: 0,
            checked: 0,
        };
        for j in 0..xs[i].len() {
            let orig = xs[i].values()[j];
            xs[i].values_mut()[j] = orig + step;
            let up = eval(&xs)?;
            xs[i].values_mut()[j] = orig - step;
            let down = eval(&xs)?;
            xs[i].values_mut()[j] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(TensorError::NonFinite { op: "grad_check" });
            }
            let numeric = (up - down) / (2.0 * step);
            let a = grad[j];
            let scale = a.abs().max(numeric.abs());
            let err = (a - numeric).abs();
            if scale < SMALL_GRADIENT {
                check.max_abs_error_small = check.max_abs_error_small.max(err);
            } else if err / scale > check.max_rel_error {
                check.max_rel_error = err / scale;
                check.worst_index = j;
            }
            check.checked += 1;
        }
        report.push(check);
    }
    Ok(GradCheckReport {
        inputs: report,
        tolerance,
    })
}
