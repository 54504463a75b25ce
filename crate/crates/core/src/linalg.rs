//! Dense LU solve with partial pivoting for the small coupled systems of the
//! N-receiver model. Works over `f64` and `Complex64`.

use core::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::{One, Zero};
use thiserror::Error;

pub trait Scalar:
    Copy
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot column {column}, condition estimate {condition:e})")]
    Singular { column: usize, condition: f64 },
    #[error("dimension mismatch: matrix has {matrix} entries, right-hand side has {rhs}")]
    Dimension { matrix: usize, rhs: usize },
}

/// Solves `A x = b` in place. `matrix` is row-major `n × n` and is
/// overwritten by its LU factors; `rhs` is overwritten by `x`.
///
/// Returns a crude condition estimate, the ratio of the largest to the
/// smallest pivot modulus.
pub fn solve_in_place<T: Scalar>(matrix: &mut [T], rhs: &mut [T]) -> Result<f64, LinalgError> {
    let n = rhs.len();
    if matrix.len() != n * n {
        return Err(LinalgError::Dimension { matrix: matrix.len(), rhs: n });
    }
    let scale = matrix.iter().map(|v| v.modulus()).fold(0.0, f64::max);
    let mut max_pivot: f64 = 0.0;
    let mut min_pivot = f64::INFINITY;

    for col in 0..n {
        let (pivot_row, pivot_mod) = (col..n)
            .map(|row| (row, matrix[row * n + col].modulus()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        max_pivot = max_pivot.max(pivot_mod);
        min_pivot = min_pivot.min(pivot_mod);
        // A NaN pivot fails this comparison and so counts as singular.
        let usable = pivot_mod > f64::EPSILON * scale * n as f64;
        if !usable {
            let condition = if pivot_mod > 0.0 { max_pivot / pivot_mod } else { f64::INFINITY };
            return Err(LinalgError::Singular { column: col, condition });
        }
        if pivot_row != col {
            for k in 0..n {
                matrix.swap(col * n + k, pivot_row * n + k);
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = matrix[col * n + col];
        for row in col + 1..n {
            let factor = matrix[row * n + col] / pivot;
            if factor.modulus() == 0.0 {
                continue;
            }
            matrix[row * n + col] = factor;
            for k in col + 1..n {
                let upper = matrix[col * n + k];
                matrix[row * n + k] = matrix[row * n + k] - factor * upper;
            }
            rhs[row] = rhs[row] - factor * rhs[col];
        }
    }

    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc = acc - matrix[row * n + k] * rhs[k];
        }
        rhs[row] = acc / matrix[row * n + row];
    }
    Ok(if n == 0 { 1.0 } else { max_pivot / min_pivot })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use approx::assert_relative_eq;

    #[test]
    fn solves_real_system_needing_pivoting() {
        let mut a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let x = [1.0, -2.0, 3.0];
        let original = a.clone();
        let mut b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| original[i * 3 + j] * x[j]).sum()).collect();
        solve_in_place(&mut a, &mut b).unwrap();
        for (got, want) in b.iter().zip(x) {
            assert_relative_eq!(*got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn solves_complex_system() {
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::one();
        let mut a = vec![one, i, -i, one + i];
        let x = [Complex64::new(0.5, -1.0), Complex64::new(2.0, 0.25)];
        let mut b = vec![a[0] * x[0] + a[1] * x[1], a[2] * x[0] + a[3] * x[1]];
        solve_in_place(&mut a, &mut b).unwrap();
        for (got, want) in b.iter().zip(x) {
            assert!((got - want).norm() < 1e-14);
        }
    }

    #[test]
    fn reports_singular_and_dimension_errors() {
        let mut a = vec![1.0, 2.0, 2.0, 4.0];
        let mut b = vec![1.0, 2.0];
        assert!(matches!(solve_in_place(&mut a, &mut b), Err(LinalgError::Singular { column: 1, .. })));
        let mut a = vec![1.0; 3];
        assert!(matches!(solve_in_place(&mut a, &mut b), Err(LinalgError::Dimension { .. })));
    }
}
