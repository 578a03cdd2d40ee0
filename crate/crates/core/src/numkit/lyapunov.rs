use super::{cholesky, lu_solve, Mat, NumError, SymPosDef};

/// Solves `a_clᵀ P + P a_cl = −q` by Kronecker vectorization.
///
/// With row-major `vec(P)` the operator is `a_clᵀ ⊗ I + I ⊗ a_clᵀ`, which
/// is the same `n² × n²` system as the column-major form since `P` is
/// symmetric. The result is symmetrized and must factor by Cholesky.
pub fn solve_lyapunov(a_cl: &Mat, q: &SymPosDef) -> Result<SymPosDef, NumError> {
    if !a_cl.is_square() {
        return Err(NumError::Dimension(format!("a_cl is {}x{}", a_cl.rows(), a_cl.cols())));
    }
    let n = a_cl.rows();
    if q.dim() != n {
        return Err(NumError::Dimension(format!("q is {}x{}, a_cl is {n}x{n}", q.dim(), q.dim())));
    }
    let nn = n * n;
    let mut op = Mat::zeros(nn, nn);
    // Row (i, j) of the operator maps vec(P) to (a_clᵀ P + P a_cl)_ij
    //   = Σ_k a_ki P_kj + Σ_k P_ik a_kj.
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                op[(row, k * n + j)] += a_cl[(k, i)];
                op[(row, i * n + k)] += a_cl[(k, j)];
            }
        }
    }
    let rhs = Mat::column(&q.mat().scale(-1.0).into_vec());
    let vec_p = lu_solve(&op, &rhs)?;
    let p = Mat::from_vec(n, n, vec_p.into_vec())?.symmetrized();
    cholesky(&p)?;
    SymPosDef::new(p)
}

/// `‖a_clᵀ P + P a_cl + q‖_F`.
pub fn lyapunov_residual(a_cl: &Mat, p: &Mat, q: &Mat) -> f64 {
    a_cl.transpose().matmul(p).add(&p.matmul(a_cl)).add(q).frobenius()
}

/// True iff `a_cl` admits a positive-definite Lyapunov solution for `Q = I`.
pub fn hurwitz_certificate(a_cl: &Mat) -> bool {
    if !a_cl.is_square() {
        return false;
    }
    match solve_lyapunov(a_cl, &SymPosDef::identity(a_cl.rows())) {
        Ok(p) => cholesky(p.mat()).is_ok(),
        Err(_) => false,
    }
}
