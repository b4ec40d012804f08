//! Central finite-difference verification of backprop gradients.

use super::Tensor;

/// Outcome of a gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    /// `(parameter index, element index)` of the worst coordinate.
    pub worst: (usize, usize),
    pub checked: usize,
}

/// Smallest denominator used when both gradients are essentially zero.
pub const REL_FLOOR: f64 = 1e-7;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares `loss_and_grad`'s analytic gradient with central differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε` over every coordinate of every parameter
/// (or at most `max_per_param` evenly strided coordinates of each).
///
/// `loss_and_grad` must be deterministic: dropout off, fixed inputs.
pub fn grad_check<F>(params: &[Tensor<f64>], eps: f64, max_per_param: Option<usize>, mut loss_and_grad: F) -> GradCheck
where
    F: FnMut(&[Tensor<f64>]) -> (f64, Vec<Tensor<f64>>),
{
    let (_, analytic) = loss_and_grad(params);
    assert_eq!(analytic.len(), params.len(), "one gradient per parameter");
    let mut work: Vec<Tensor<f64>> = params.to_vec();
    let mut report = GradCheck {
        max_rel_err: 0.0,
        worst: (0, 0),
        checked: 0,
    };
    for p in 0..params.len() {
        let len = params[p].len();
        let stride = match max_per_param {
            Some(cap) if cap < len => len.div_ceil(cap),
            _ => 1,
        };
        for j in (0..len).step_by(stride) {
            let orig = work[p].data()[j];
            work[p].data_mut()[j] = orig + eps;
            let (plus, _) = loss_and_grad(&work);
            work[p].data_mut()[j] = orig - eps;
            let (minus, _) = loss_and_grad(&work);
            work[p].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let rel = relative_error(analytic[p].data()[j], numeric);
            report.checked += 1;
            if rel > report.max_rel_err || rel.is_nan() {
                report.max_rel_err = if rel.is_nan() { f64::INFINITY } else { rel };
                report.worst = (p, j);
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{euclidean_loss, DenseLayer};
    use crate::rng::SeededRng;

    #[test]
    fn linear_layer_quadratic_loss() {
        let mut rng = SeededRng::new(4);
        let layer = DenseLayer::<f64>::init(5, 3, &mut rng);
        let x = Tensor::from_fn(&[5], |_| rng.normal());
        let target = Tensor::from_fn(&[3], |_| rng.normal());
        let params = vec![layer.weight.clone(), layer.bias.clone()];
        // central differences are exact on a quadratic; a wide step keeps
        // roundoff out of the comparison
        let report = grad_check(&params, 1e-2, None, |ps| {
            let l = DenseLayer::new(ps[0].clone(), ps[1].clone()).unwrap();
            let y = l.forward(&x).unwrap();
            let (loss, g) = euclidean_loss(&y, &target).unwrap();
            let grads = l.backward(&x, &g).unwrap();
            (loss, vec![grads.weight, grads.bias])
        });
        assert_eq!(report.checked, 18);
        assert!(report.max_rel_err < 1e-9, "{report:?}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let params = vec![Tensor::vector(vec![1.0, 2.0])];
        let report = grad_check(&params, 1e-5, None, |ps| {
            let x = ps[0].data();
            (x[0] * x[0] + x[1], vec![Tensor::vector(vec![2.0 * x[0], 3.0])])
        });
        assert!(report.max_rel_err > 0.5);
        assert_eq!(report.worst, (0, 1));
    }
}
