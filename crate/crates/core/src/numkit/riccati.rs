use super::{
    hurwitz_certificate, lu_solve, Mat, NumError, SymPosDef, RICCATI_MAX_STEPS, RICCATI_STEADY_TOL, RICCATI_STEP,
};

#[derive(Clone, Copy, Debug)]
pub struct RiccatiOptions {
    pub step: f64,
    pub max_steps: u64,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self { step: RICCATI_STEP, max_steps: RICCATI_MAX_STEPS }
    }
}

#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    /// `K = R⁻¹ Bᵀ P`.
    pub gain: Mat,
    pub p_care: SymPosDef,
    /// Integration steps taken to reach steady state.
    pub steps: u64,
}

/// Steady state of `Ṗ = AᵀP + PA − P B R⁻¹ Bᵀ P + Q` integrated forward from
/// `P(0) = 0` with fixed-step RK4.
pub fn solve_riccati_ode(
    a: &Mat,
    b: &Mat,
    q_cost: &SymPosDef,
    r_cost: &SymPosDef,
    opts: RiccatiOptions,
) -> Result<RiccatiSolution, NumError> {
    let n = a.rows();
    if !a.is_square() || b.rows() != n || q_cost.dim() != n || r_cost.dim() != b.cols() {
        return Err(NumError::Dimension(format!(
            "a {}x{}, b {}x{}, q {}, r {}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols(),
            q_cost.dim(),
            r_cost.dim()
        )));
    }
    let r_inv_bt = lu_solve(r_cost.mat(), &b.transpose())?;
    let s = b.matmul(&r_inv_bt).symmetrized();
    let at = a.transpose();
    let q = q_cost.mat();
    let h = opts.step;

    let deriv = |p: &Mat| -> Mat {
        let ps = p.matmul(&s);
        at.matmul(p).add(&p.matmul(a)).sub(&ps.matmul(p)).add(q)
    };

    let mut p = Mat::zeros(n, n);
    for step in 0..opts.max_steps {
        let k1 = deriv(&p);
        if k1.frobenius() < RICCATI_STEADY_TOL * (1.0 + p.frobenius()) {
            let p = p.symmetrized();
            let gain = r_inv_bt.matmul(&p);
            let p_care = SymPosDef::new(p)?;
            if !hurwitz_certificate(&a.sub(&b.matmul(&gain))) {
                return Err(NumError::NoConvergence(step));
            }
            return Ok(RiccatiSolution { gain, p_care, steps: step });
        }
        let k2 = deriv(&p.add(&k1.scale(0.5 * h)));
        let k3 = deriv(&p.add(&k2.scale(0.5 * h)));
        let k4 = deriv(&p.add(&k3.scale(h)));
        let incr = k1.add(&k2.scale(2.0)).add(&k3.scale(2.0)).add(&k4).scale(h / 6.0);
        p = p.add(&incr).symmetrized();
        if !p.is_finite() {
            return Err(NumError::NonFinite);
        }
    }
    Err(NumError::NoConvergence(opts.max_steps))
}

/// `‖AᵀP + PA − P B R⁻¹ Bᵀ P + Q‖_F`.
pub fn riccati_residual(a: &Mat, b: &Mat, q: &Mat, r: &Mat, p: &Mat) -> f64 {
    let r_inv_bt = lu_solve(r, &b.transpose()).expect("invertible R");
    let s = b.matmul(&r_inv_bt);
    a.transpose().matmul(p).add(&p.matmul(a)).sub(&p.matmul(&s).matmul(p)).add(q).frobenius()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Mat {
        Mat::from_rows(&[[v]])
    }

    #[test]
    fn scalar_integrator() {
        let sol = solve_riccati_ode(
            &scalar(0.0),
            &scalar(1.0),
            &SymPosDef::identity(1),
            &SymPosDef::identity(1),
            RiccatiOptions::default(),
        )
        .unwrap();
        assert!((sol.p_care.mat()[(0, 0)] - 1.0).abs() < 1e-8);
        assert!((sol.gain[(0, 0)] - 1.0).abs() < 1e-8);
        // Closed loop a − b·k = −1.
        assert!(hurwitz_certificate(&scalar(-sol.gain[(0, 0)])));
    }

    #[test]
    fn scalar_unstable_plant() {
        // −p² + 2p + 2 = 0 ⇒ p = 1 + √3.
        let sol = solve_riccati_ode(
            &scalar(1.0),
            &scalar(1.0),
            &SymPosDef::diag(&[2.0]).unwrap(),
            &SymPosDef::identity(1),
            RiccatiOptions::default(),
        )
        .unwrap();
        let expected = 1.0 + 3f64.sqrt();
        assert!((sol.p_care.mat()[(0, 0)] - expected).abs() < 1e-8);
        assert!((sol.gain[(0, 0)] - expected).abs() < 1e-8);
        assert!(hurwitz_certificate(&scalar(1.0 - sol.gain[(0, 0)])));
    }

    #[test]
    fn iteration_cap() {
        let err = solve_riccati_ode(
            &scalar(0.0),
            &scalar(1.0),
            &SymPosDef::identity(1),
            &SymPosDef::identity(1),
            RiccatiOptions { step: 1e-3, max_steps: 10 },
        )
        .unwrap_err();
        assert_eq!(err, NumError::NoConvergence(10));
    }

    #[test]
    fn unstabilizable_pair_fails() {
        // The unstable mode is not reachable from b, so P grows without bound.
        let a = Mat::from_rows(&[[1.0, 0.0], [0.0, -1.0]]);
        let b = Mat::column(&[0.0, 1.0]);
        let r = solve_riccati_ode(
            &a,
            &b,
            &SymPosDef::identity(2),
            &SymPosDef::identity(1),
            RiccatiOptions { step: 1e-3, max_steps: 200_000 },
        );
        assert!(r.is_err());
    }
}
