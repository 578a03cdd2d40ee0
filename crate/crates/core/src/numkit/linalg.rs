use super::{Mat, NumError, CHOLESKY_SYMMETRY_TOL, SINGULAR_PIVOT, SPD_SYMMETRY_TOL};

/// Solves `a · X = rhs` by LU factorization with partial pivoting.
pub fn lu_solve(a: &Mat, rhs: &Mat) -> Result<Mat, NumError> {
    if !a.is_square() {
        return Err(NumError::Dimension(format!("lu_solve needs a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    if rhs.rows() != a.rows() {
        return Err(NumError::Dimension(format!("rhs has {} rows, system has {}", rhs.rows(), a.rows())));
    }
    let n = a.rows();
    let m = rhs.cols();
    let mut lu = a.clone();
    let mut x = rhs.clone();

    for k in 0..n {
        let (pivot_row, pivot_abs) =
            (k..n).map(|i| (i, lu[(i, k)].abs())).fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pivot_abs >= SINGULAR_PIVOT) {
            return Err(NumError::SingularMatrix);
        }
        if pivot_row != k {
            swap_rows(&mut lu, k, pivot_row);
            swap_rows(&mut x, k, pivot_row);
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let factor = lu[(i, k)] / pivot;
            if factor == 0.0 {
                continue;
            }
            lu[(i, k)] = factor;
            for j in (k + 1)..n {
                lu[(i, j)] -= factor * lu[(k, j)];
            }
            for j in 0..m {
                x[(i, j)] -= factor * x[(k, j)];
            }
        }
    }

    // Back substitution on the upper factor.
    for col in 0..m {
        for i in (0..n).rev() {
            let mut acc = x[(i, col)];
            for j in (i + 1)..n {
                acc -= lu[(i, j)] * x[(j, col)];
            }
            x[(i, col)] = acc / lu[(i, i)];
        }
    }
    if !x.is_finite() {
        return Err(NumError::NonFinite);
    }
    Ok(x)
}

fn swap_rows(m: &mut Mat, a: usize, b: usize) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    for j in 0..cols {
        data.swap(a * cols + j, b * cols + j);
    }
}

/// Lower Cholesky factor `L` with `L·Lᵀ = p`.
pub fn cholesky(p: &Mat) -> Result<Mat, NumError> {
    if !p.is_square() {
        return Err(NumError::Dimension(format!("cholesky needs a square matrix, got {}x{}", p.rows(), p.cols())));
    }
    let asym = p.relative_asymmetry();
    if asym > CHOLESKY_SYMMETRY_TOL {
        return Err(NumError::NotSymmetric(asym));
    }
    let n = p.rows();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = p[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(NumError::NotPositiveDefinite);
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = p[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Symmetric positive-definite matrix, certified at construction by a
/// successful Cholesky factorization.
#[derive(Clone, Debug, PartialEq)]
pub struct SymPosDef {
    m: Mat,
    chol: Mat,
}

impl SymPosDef {
    pub fn new(m: Mat) -> Result<Self, NumError> {
        if !m.is_finite() {
            return Err(NumError::NonFinite);
        }
        let asym = m.relative_asymmetry();
        if asym > SPD_SYMMETRY_TOL {
            return Err(NumError::NotSymmetric(asym));
        }
        let chol = cholesky(&m)?;
        Ok(Self { m, chol })
    }

    pub fn identity(n: usize) -> Self {
        Self { m: Mat::identity(n), chol: Mat::identity(n) }
    }

    /// Diagonal matrix with strictly positive entries.
    pub fn diag(values: &[f64]) -> Result<Self, NumError> {
        Self::new(Mat::diag(values))
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    pub fn mat(&self) -> &Mat {
        &self.m
    }

    /// Lower Cholesky factor.
    pub fn cholesky_factor(&self) -> &Mat {
        &self.chol
    }

    pub fn into_mat(self) -> Mat {
        self.m
    }

    pub fn scaled(&self, s: f64) -> Result<Self, NumError> {
        if !(s > 0.0) {
            return Err(NumError::NotPositiveDefinite);
        }
        Ok(Self { m: self.m.scale(s), chol: self.chol.scale(s.sqrt()) })
    }

    pub fn inverse(&self) -> Result<Mat, NumError> {
        let inv = lu_solve(&self.m, &Mat::identity(self.dim()))?;
        Ok(inv.symmetrized())
    }
}

/// `(v − c)ᵀ P (v − c)`.
pub fn p_norm_sq(p: &SymPosDef, v: &[f64], c: &[f64]) -> f64 {
    let n = p.dim();
    debug_assert_eq!(v.len(), n);
    debug_assert_eq!(c.len(), n);
    let m = p.mat().as_slice();
    let mut d = [0.0f64; 32];
    let d = if n <= 32 { &mut d[..n] } else { return p_norm_sq_alloc(p, v, c) };
    for i in 0..n {
        d[i] = v[i] - c[i];
    }
    let mut acc = 0.0;
    for i in 0..n {
        let row = &m[i * n..(i + 1) * n];
        let mut r = 0.0;
        for j in 0..n {
            r += row[j] * d[j];
        }
        acc += d[i] * r;
    }
    acc.max(0.0)
}

fn p_norm_sq_alloc(p: &SymPosDef, v: &[f64], c: &[f64]) -> f64 {
    let d: Vec<f64> = v.iter().zip(c).map(|(a, b)| a - b).collect();
    let pd = p.mat().mul_vec(&d);
    d.iter().zip(&pd).map(|(a, b)| a * b).sum::<f64>().max(0.0)
}
