use super::NumError;

/// One classical Runge–Kutta step of `ẋ = f(x, u)` with `u` held constant
/// over the step.
pub fn rk4_step<const N: usize, const M: usize, F>(
    f: F,
    x: &[f64; N],
    u: &[f64; M],
    dt: f64,
) -> Result<[f64; N], NumError>
where
    F: Fn(&[f64; N], &[f64; M]) -> [f64; N],
{
    debug_assert!(dt > 0.0);
    let k1 = f(x, u);
    let k2 = f(&axpy(x, 0.5 * dt, &k1), u);
    let k3 = f(&axpy(x, 0.5 * dt, &k2), u);
    let k4 = f(&axpy(x, dt, &k3), u);
    let mut out = [0.0; N];
    let h6 = dt / 6.0;
    for i in 0..N {
        out[i] = x[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(NumError::NonFinite);
    }
    Ok(out)
}

#[inline]
fn axpy<const N: usize>(x: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Mat;

    fn decay(x: &[f64; 1], _u: &[f64; 0]) -> [f64; 1] {
        [-x[0]]
    }

    #[test]
    fn exponential_decay() {
        let x = rk4_step(decay, &[1.0], &[], 0.1).unwrap();
        assert!((x[0] - 0.904_837_5).abs() < 1e-6);
        assert!((x[0] - (-0.1f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn zero_field_is_identity() {
        let x = rk4_step(|_: &[f64; 3], _: &[f64; 0]| [0.0; 3], &[1.0, -2.0, 3.0], &[], 0.5).unwrap();
        assert_eq!(x, [1.0, -2.0, 3.0]);
    }

    #[test]
    fn linear_field_matches_taylor_polynomial() {
        // For ẋ = Ax a single RK4 step is exactly Σ_{k≤4} (A dt)^k / k! · x.
        let a = Mat::from_rows(&[[0.0, 1.0, 0.0], [-2.0, -0.3, 1.0], [0.5, 0.0, -1.0]]);
        let x0 = [1.0, -0.5, 2.0];
        let dt = 0.05;
        let f = |x: &[f64; 3], _: &[f64; 0]| {
            let v = a.mul_vec(x);
            [v[0], v[1], v[2]]
        };
        let x1 = rk4_step(f, &x0, &[], dt).unwrap();

        let mut term = x0.to_vec();
        let mut expected = x0.to_vec();
        for k in 1..=4 {
            term = a.mul_vec(&term).iter().map(|v| v * dt / k as f64).collect();
            for (e, t) in expected.iter_mut().zip(&term) {
                *e += t;
            }
        }
        for i in 0..3 {
            assert!((x1[i] - expected[i]).abs() < 1e-14, "{} vs {}", x1[i], expected[i]);
        }
    }

    #[test]
    fn local_error_is_fifth_order() {
        let err = |dt: f64| (rk4_step(decay, &[1.0], &[], dt).unwrap()[0] - (-dt).exp()).abs();
        let ratio = err(0.2) / err(0.1);
        assert!((16.0..=40.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn divergence_reports_non_finite() {
        let r = rk4_step(|x: &[f64; 1], _: &[f64; 0]| [x[0] * 1e308], &[1e10], &[], 1.0);
        assert_eq!(r, Err(NumError::NonFinite));
    }
}
