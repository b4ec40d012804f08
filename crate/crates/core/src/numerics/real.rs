use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Scalar type the kernels run on: `f32` for training and inference,
/// `f64` for gradient verification.
pub trait Real: Float + Default + Debug + Send + Sync + Sum + AddAssign + SubAssign + MulAssign + 'static {
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;

    /// C ← α·A·B + β·C on strided views.
    ///
    /// # Safety
    /// Every index reachable through the strides must be in bounds of the
    /// corresponding pointer's allocation.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// A row/column-strided matrix view over a slice.
#[derive(Clone, Copy)]
pub struct MatRef<'a, T> {
    pub data: &'a [T],
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a, T> MatRef<'a, T> {
    /// Row-major `rows × cols`.
    pub fn row_major(data: &'a [T], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            rs: cols,
            cs: 1,
        }
    }

    /// The transpose of a row-major `rows × cols` buffer, viewed as `cols × rows`.
    pub fn transposed(data: &'a [T], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows: cols,
            cols: rows,
            rs: 1,
            cs: cols,
        }
    }

    fn max_index(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            0
        } else {
            (self.rows - 1) * self.rs + (self.cols - 1) * self.cs
        }
    }
}

/// `c ← alpha·a·b + beta·c` where `c` is row-major `a.rows × b.cols`.
pub fn gemm<T: Real>(alpha: T, a: MatRef<'_, T>, b: MatRef<'_, T>, beta: T, c: &mut [T]) {
    gemm_into(alpha, a, b, beta, c, 0, b.cols);
}

/// Like [`gemm`], but the output is the `a.rows × b.cols` block of `c`
/// starting at `offset` with row stride `rsc` (column stride 1).
pub fn gemm_into<T: Real>(
    alpha: T,
    a: MatRef<'_, T>,
    b: MatRef<'_, T>,
    beta: T,
    c: &mut [T],
    offset: usize,
    rsc: usize,
) {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(k, b.rows, "gemm inner dimension");
    if m == 0 || n == 0 {
        return;
    }
    assert!(rsc >= n || m == 1, "gemm output rows overlap");
    assert!(offset + (m - 1) * rsc + n <= c.len(), "gemm output too small");
    if k == 0 {
        for i in 0..m {
            for v in c[offset + i * rsc..offset + i * rsc + n].iter_mut() {
                *v = if beta == T::zero() { T::zero() } else { *v * beta };
            }
        }
        return;
    }
    assert!(a.max_index() < a.data.len(), "gemm lhs view out of bounds");
    assert!(b.max_index() < b.data.len(), "gemm rhs view out of bounds");
    // SAFETY: bounds of every strided view were checked above.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr().add(offset),
            rsc as isize,
            1,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_loops() {
        let a: Vec<f64> = (0..6).map(|v| v as f64).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|v| (v as f64) * 0.5 - 1.0).collect(); // 3x4
        let mut c = vec![0.0; 8];
        gemm(
            1.0,
            MatRef::row_major(&a, 2, 3),
            MatRef::row_major(&b, 3, 4),
            0.0,
            &mut c,
        );
        for i in 0..2 {
            for j in 0..4 {
                let want: f64 = (0..3).map(|p| a[i * 3 + p] * b[p * 4 + j]).sum();
                assert_eq!(c[i * 4 + j], want);
            }
        }
        // Transposed lhs: a^T is 3x2.
        let want: f64 = a[0] * a[1] + a[3] * a[4];
        let mut full = vec![0.0; 9];
        gemm(
            1.0,
            MatRef::transposed(&a, 2, 3),
            MatRef::row_major(&a, 2, 3),
            0.0,
            &mut full,
        );
        assert_eq!(full[1], want);
    }

    #[test]
    fn gemm_into_writes_only_the_block() {
        let a = vec![1.0f64, 2.0]; // 2x1
        let b = vec![3.0f64, 4.0]; // 1x2
        let mut c = vec![-1.0; 12];
        gemm_into(
            1.0,
            MatRef::row_major(&a, 2, 1),
            MatRef::row_major(&b, 1, 2),
            0.0,
            &mut c,
            5,
            4,
        );
        let want = [-1., -1., -1., -1., -1., 3., 4., -1., -1., 6., 8., -1.];
        assert_eq!(c, want);
    }
}
