use super::EvalError;
use crate::domain::GridImage;

/// Share of cells holding the same code in both grids.
pub fn similarity_kernel(a: &GridImage, b: &GridImage) -> Result<f64, EvalError> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(EvalError::DimensionMismatch { left: (a.height(), a.width()), right: (b.height(), b.width()) });
    }
    let same = a.cells().iter().zip(b.cells()).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.cells().len() as f64)
}

pub fn gram_matrix(images: &[GridImage]) -> Result<Vec<f64>, EvalError> {
    let n = images.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = similarity_kernel(&images[i], &images[j])?;
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    Ok(k)
}

/// Eigen-decomposition of a symmetric row-major `n x n` matrix by cyclic
/// Jacobi rotations. Returns eigenvalues and the eigenvectors as columns of
/// a row-major matrix.
pub fn symmetric_eigen(matrix: &[f64], n: usize, tol: f64) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(matrix.len(), n * n, "matrix must be n x n");
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    for _sweep in 0..100 {
        if off(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// `exp` of the Shannon entropy of the eigenvalues of `K / n`.
pub fn vendi_score(images: &[GridImage]) -> Result<f64, EvalError> {
    let n = images.len();
    if n == 0 {
        return Err(EvalError::Empty);
    }
    let mut k = gram_matrix(images)?;
    k.iter_mut().for_each(|x| *x /= n as f64);
    let (eig, _) = symmetric_eigen(&k, n, 1e-10);
    let entropy: f64 = eig.iter().filter(|&&l| l > 0.0).map(|&l| -l * l.ln()).sum();
    Ok(entropy.exp())
}
