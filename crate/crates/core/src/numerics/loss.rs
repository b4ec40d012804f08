use super::{Real, Tensor};
use crate::error::Result;

pub const BCE_CLAMP: f64 = 1e-7;

/// Σ(pred − target)², gradient 2(pred − target).
pub fn euclidean_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    pred.same_shape(target)?;
    let mut acc = 0.0f64;
    let mut grad = pred.clone();
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        let d = *g - t;
        acc += d.as_f64() * d.as_f64();
        *g = d + d;
    }
    Ok((T::of(acc), grad))
}

/// Mean binary cross-entropy with soft targets. Predictions are clamped to
/// `[1e-7, 1 − 1e-7]`; the gradient is taken w.r.t. the clamped value.
pub fn bce_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    pred.same_shape(target)?;
    let n = pred.len() as f64;
    let mut acc = 0.0f64;
    let mut grad = pred.clone();
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        let p = g.as_f64().clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        let t = t.as_f64();
        acc -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        *g = T::of((p - t) / (p * (1.0 - p)) / n);
    }
    Ok((T::of(acc / n), grad))
}

/// Mean squared error (the `mse` option for head training).
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    let (sum, mut grad) = euclidean_loss(pred, target)?;
    let n = T::of(pred.len() as f64);
    grad.scale(T::one() / n);
    Ok((sum / n, grad))
}

/// Binary entropy of a soft target; the floor BCE can reach at `pred == target`.
pub fn binary_entropy(t: f64) -> f64 {
    let h = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    h(t) + h(1.0 - t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(&Tensor<f64>) -> (f64, Tensor<f64>), x: &Tensor<f64>, tol: f64) {
        let (_, g) = f(x);
        let eps = 1e-5;
        for i in 0..x.len() {
            let mut plus = x.clone();
            plus.data_mut()[i] += eps;
            let mut minus = x.clone();
            minus.data_mut()[i] -= eps;
            let fd = (f(&plus).0 - f(&minus).0) / (2.0 * eps);
            let a = g.data()[i];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-12);
            assert!(rel < tol, "i={i} analytic={a} fd={fd} rel={rel}");
        }
    }

    #[test]
    fn euclidean_values() {
        let p = Tensor::vector(vec![1.0f64, 2.0]);
        let (l, g) = euclidean_loss(&p, &Tensor::vector(vec![0.0, 0.0])).unwrap();
        assert_eq!(l, 5.0);
        assert_eq!(g.data(), &[2.0, 4.0]);
        assert_eq!(euclidean_loss(&p, &p).unwrap().0, 0.0);
    }

    #[test]
    fn euclidean_gradient() {
        let t = Tensor::vector(vec![0.3, -1.2, 2.0, 0.0]);
        let x = Tensor::vector(vec![1.1, 0.4, -0.5, 2.2]);
        fd_check(|p| euclidean_loss(p, &t).unwrap(), &x, 1e-7);
    }

    #[test]
    fn bce_values() {
        let p = Tensor::vector(vec![0.5f64; 4]);
        let t = Tensor::vector(vec![0.0, 0.3, 0.9, 1.0]);
        let (l, _) = bce_loss(&p, &t).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let hard = Tensor::vector(vec![0.0f64, 1.0, 1.0]);
        assert!(bce_loss(&hard, &hard).unwrap().0 < 1e-6);
    }

    #[test]
    fn bce_gradient() {
        let t = Tensor::vector(vec![0.05, 0.3, 0.9, 0.5]);
        let x = Tensor::vector(vec![0.2, 0.6, 0.7, 0.01]);
        fd_check(|p| bce_loss(p, &t).unwrap(), &x, 1e-6);
    }

    #[test]
    fn shape_mismatch() {
        let a = Tensor::<f32>::zeros(&[2]);
        let b = Tensor::<f32>::zeros(&[3]);
        assert!(euclidean_loss(&a, &b).is_err());
        assert!(bce_loss(&a, &b).is_err());
    }

    #[test]
    fn entropy_is_bce_floor() {
        for &t in &[0.0f64, 0.04, 0.3, 0.5] {
            let p = Tensor::vector(vec![t.max(BCE_CLAMP)]);
            let l = bce_loss(&p, &Tensor::vector(vec![t])).unwrap().0;
            assert!((l - binary_entropy(t)).abs() < 1e-5);
        }
    }
}
