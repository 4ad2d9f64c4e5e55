//! Minimal dense eigenvalue support: cyclic Jacobi iteration for real
//! symmetric matrices, plus a phase gauge that maps the Hermitian matrices
//! appearing here (real diagonal, one complex off-diagonal band pattern
//! `c_m e^{i m phi}`) to real symmetric form.

use ndarray::Array2;

use crate::fock::C64;

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations,
/// ascending order.
pub fn symmetric_eigenvalues(m: &Array2<f64>) -> Vec<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix must be square");
    let mut a = m.clone();
    for sweep in 0..200 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        debug_assert!(sweep < 199, "Jacobi iteration failed to converge");
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Eigenvalues of a Hermitian matrix, computed by conjugating with a diagonal
/// phase gauge `diag(e^{i k phi})` chosen from the first nonzero
/// superdiagonal element, then running the real Jacobi solver. Panics if the
/// gauged matrix is not real within `1e-10` (the Hermitian matrices built in
/// this crate all carry a single uniform off-diagonal phase).
pub fn hermitian_eigenvalues(m: &Array2<C64>) -> Vec<f64> {
    let n = m.nrows();
    let mut phi = 0.0;
    for k in 0..n.saturating_sub(1) {
        let e = m[(k + 1, k)];
        if e.norm() > 1e-14 {
            phi = e.arg();
            break;
        }
    }
    let gauge: Vec<C64> = (0..n).map(|k| C64::from_polar(1.0, -(k as f64) * phi)).collect();
    let mut real = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let g = gauge[i].conj() * m[(i, j)] * gauge[j];
            assert!(
                g.im.abs() < 1e-10,
                "matrix is not phase-gaugeable to real form (entry {i},{j}: {g})"
            );
            real[(i, j)] = g.re;
        }
    }
    symmetric_eigenvalues(&real)
}
