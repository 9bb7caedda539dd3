use nalgebra::DMatrix;
use num_complex::Complex;

use crate::scalar::Real;

/// Dense complex linear algebra the simulation borrows from nalgebra.
/// Matrices are row-major `n × n` slices.
pub trait DenseLinalg: Real {
    /// `exp(m)`
    fn expm(m: &[Complex<Self>], n: usize) -> Vec<Complex<Self>>;

    /// Eigenvalues (ascending) and row-major eigenvectors (one per row) of a
    /// Hermitian matrix.
    fn hermitian_eigen(m: &[Complex<Self>], n: usize) -> (Vec<Self>, Vec<Vec<Complex<Self>>>);
}

macro_rules! dense_linalg {
    ($t:ty) => {
        impl DenseLinalg for $t {
            fn expm(m: &[Complex<$t>], n: usize) -> Vec<Complex<$t>> {
                let e = DMatrix::from_row_slice(n, n, m).exp();
                (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| e[(i, j)]).collect()
            }

            fn hermitian_eigen(m: &[Complex<$t>], n: usize) -> (Vec<$t>, Vec<Vec<Complex<$t>>>) {
                let eig = DMatrix::from_row_slice(n, n, m).symmetric_eigen();
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
                let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
                let vectors = order.iter().map(|&k| eig.eigenvectors.column(k).iter().copied().collect()).collect();
                (values, vectors)
            }
        }
    };
}

dense_linalg!(f32);
dense_linalg!(f64);
