//! Dense numeric primitives shared by the whole engine.
//!
//! Everything is 64-bit and sequential so that results are bit-reproducible;
//! the unlearning-equivalence guarantee rests on that.

use crate::error::{Error, Result};

/// A backbone feature embedding.
pub type FeatureVector = Vec<f64>;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("matrix entries must be finite".into()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// `self -= scale * other`, used for SGD steps.
    pub fn sub_scaled(&mut self, other: &Matrix, scale: f64) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a -= scale * b;
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Numerically stable softmax cross-entropy for a single logit row.
///
/// Returns the loss `-log softmax(logits)[label]` and the gradient
/// `softmax(logits) - onehot(label)` with respect to the logits.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    let k = logits.len();
    if k < 2 {
        return Err(Error::Domain(format!("need at least 2 classes, got {k}")));
    }
    if label >= k {
        return Err(Error::Domain(format!("label {label} out of range for {k} classes")));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    let mut grad = Vec::with_capacity(k);
    for &l in logits {
        let e = (l - max).exp();
        grad.push(e);
        sum += e;
    }
    let log_sum = sum.ln();
    let loss = log_sum - (logits[label] - max);
    for g in grad.iter_mut() {
        *g /= sum;
    }
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Euclidean distance between two equal-length vectors.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    Ok(acc.sqrt())
}

/// Central finite differences of a scalar function, one coordinate at a time.
///
/// This is the independent oracle used to validate the analytic gradients.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(step > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let plus = f(&probe);
        probe[i] = orig - step;
        let minus = f(&probe);
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite function value while probing coordinate {i}"
            )));
        }
        grad.push((plus - minus) / (2.0 * step));
    }
    Ok(grad)
}

/// Relative error with a floor on the denominator, for gradient checks.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn uniform_logits_cost_ln_k() {
        let (loss, _) = softmax_cross_entropy(&[0.3, 0.3, 0.3, 0.3], 2).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_loss_vanishes() {
        let (loss, _) = softmax_cross_entropy(&[60.0, 0.0, 0.0], 0).unwrap();
        assert!(loss >= 0.0 && loss < 1e-20, "loss {loss}");
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let logits = [1.0, 2.0, 0.5];
        let (_, grad) = softmax_cross_entropy(&logits, 1).unwrap();
        let fd = finite_diff_grad(
            |l| softmax_cross_entropy(l, 1).unwrap().0,
            &logits,
            1e-6,
        )
        .unwrap();
        for (g, n) in grad.iter().zip(&fd) {
            assert!(relative_error(*g, *n) <= 1e-7, "analytic {g} vs numeric {n}");
        }
    }

    #[test]
    fn loss_gradient_sums_to_zero() {
        let mut rng = RngStream::new(123, 0);
        for _ in 0..50 {
            let logits: Vec<f64> = (0..6).map(|_| rng.uniform_in(-4.0, 4.0)).collect();
            let label = rng.next_below(6) as usize;
            let (loss, grad) = softmax_cross_entropy(&logits, label).unwrap();
            assert!(loss >= 0.0);
            assert!(grad.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn loss_rejects_bad_inputs() {
        assert!(matches!(softmax_cross_entropy(&[1.0], 0), Err(Error::Domain(_))));
        assert!(matches!(softmax_cross_entropy(&[1.0, 2.0], 2), Err(Error::Domain(_))));
        assert!(matches!(
            softmax_cross_entropy(&[f64::NAN, 2.0], 0),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn distance_basics() {
        assert_eq!(euclidean_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert!(matches!(
            euclidean_distance(&[0.0], &[0.0, 1.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn distance_matches_scalar_loop_on_random_pairs() {
        let mut rng = RngStream::new(7, 1);
        for _ in 0..100 {
            let a: Vec<f64> = (0..64).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
            let b: Vec<f64> = (0..64).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
            let mut acc = 0.0;
            for i in 0..64 {
                acc += (a[i] - b[i]) * (a[i] - b[i]);
            }
            let expected = acc.sqrt();
            assert!((euclidean_distance(&a, &b).unwrap() - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn distance_triangle_inequality() {
        let mut rng = RngStream::new(99, 5);
        for _ in 0..200 {
            let v = |r: &mut RngStream| -> Vec<f64> {
                (0..16).map(|_| r.uniform_in(-1.0, 1.0)).collect()
            };
            let (a, b, c) = (v(&mut rng), v(&mut rng), v(&mut rng));
            let ab = euclidean_distance(&a, &b).unwrap();
            let bc = euclidean_distance(&b, &c).unwrap();
            let ac = euclidean_distance(&a, &c).unwrap();
            assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn finite_diff_on_quadratic() {
        let grad = finite_diff_grad(|x| x.iter().map(|v| v * v).sum(), &[1.0, 2.0], 1e-6).unwrap();
        assert!((grad[0] - 2.0).abs() < 1e-6);
        assert!((grad[1] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn finite_diff_on_constant_is_zero() {
        let grad = finite_diff_grad(|_| 3.5, &[0.1, 0.2, 0.3], 1e-6).unwrap();
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn finite_diff_rejects_bad_step_and_nan() {
        assert!(matches!(
            finite_diff_grad(|_| 0.0, &[1.0], 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            finite_diff_grad(|_| f64::NAN, &[1.0], 1e-6),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn matrix_shape_checks() {
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_vec(2, 2, vec![f64::INFINITY; 4]).is_err());
        let m = Matrix::from_vec(2, 3, (0..6).map(|i| i as f64).collect()).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0, 5.0]);
        assert_eq!(m.get(0, 2), 2.0);
    }
}
