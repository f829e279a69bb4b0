use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Diagonal jitter tried in order before a factorization is declared failed.
pub const JITTER_LADDER: [f64; 3] = [1e-8, 1e-6, 1e-4];

/// Cholesky factorization of `m + jitter·I`, escalating the jitter along
/// [`JITTER_LADDER`]. Returns the factor and the jitter that succeeded.
pub fn jittered_cholesky(m: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    for &jitter in &JITTER_LADDER {
        let mut a = m.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(a) {
            return Ok((chol, jitter));
        }
    }
    Err(Error::IllConditioned(format!(
        "Cholesky of a {}x{} matrix failed with jitter up to {:e}",
        m.nrows(),
        m.ncols(),
        JITTER_LADDER[JITTER_LADDER.len() - 1]
    )))
}

/// Symmetrizes `m` in place by averaging it with its transpose.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_matrix_gets_jitter() {
        let m = DMatrix::from_element(3, 3, 1.0);
        let (chol, jitter) = jittered_cholesky(&m).unwrap();
        assert!(jitter >= 1e-8);
        assert_eq!(chol.l().nrows(), 3);
    }

    #[test]
    fn indefinite_matrix_fails() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(jittered_cholesky(&m), Err(Error::IllConditioned(_))));
    }
}
