//! Fully connected networks with rectifier hidden layers and a linear output,
//! batched row-major (`batch × features`).

use rand::Rng;

/// One affine layer. `w` is `n_out × n_in`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    /// Uniform `±1/√n_in` initialization for weights and biases.
    pub fn init<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        let w = (0..n_in * n_out).map(|_| rng.gen_range(-bound..bound)).collect();
        let b = (0..n_out).map(|_| rng.gen_range(-bound..bound)).collect();
        Self { n_in, n_out, w, b }
    }

    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { n_in, n_out, w: vec![0.0; n_in * n_out], b: vec![0.0; n_out] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Activations retained by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    batch: usize,
    /// Input to each layer (`batch × n_in`).
    inputs: Vec<Vec<f64>>,
}

/// Parameter gradients, laid out like the network (`w` then `b` per layer).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Dense>,
}

impl MlpGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.w.as_slice(), l.b.as_slice()]).collect()
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w.iter_mut().zip(&b.w).for_each(|(x, y)| *x += y);
            a.b.iter_mut().zip(&b.b).for_each(|(x, y)| *x += y);
        }
    }
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers = sizes.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Self {
        for pair in layers.windows(2) {
            assert_eq!(pair[0].n_out, pair[1].n_in, "layer shapes do not chain");
        }
        Self { layers }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].n_in];
        s.extend(self.layers.iter().map(|l| l.n_out));
        s
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().map_or(0, |l| l.n_out)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.w.as_slice(), l.b.as_slice()]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| [l.w.as_mut_slice(), l.b.as_mut_slice()]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Forward pass over a `batch × n_in` input.
    pub fn forward(&self, input: &[f64], batch: usize) -> (Vec<f64>, MlpCache) {
        assert_eq!(input.len(), batch * self.n_in(), "input length does not match batch");
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut act = input.to_vec();
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; batch * layer.n_out];
            for row in z.chunks_exact_mut(layer.n_out) {
                row.copy_from_slice(&layer.b);
            }
            // z += act · wᵀ
            gemm(
                batch,
                layer.n_in,
                layer.n_out,
                &act,
                (layer.n_in as isize, 1),
                &layer.w,
                (1, layer.n_in as isize),
                &mut z,
                1.0,
            );
            if idx != last {
                for v in &mut z {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            inputs.push(act);
            act = z;
        }
        (act, MlpCache { batch, inputs })
    }

    /// Output only; no cache kept.
    pub fn predict(&self, input: &[f64], batch: usize) -> Vec<f64> {
        self.forward(input, batch).0
    }

    /// Reverse-mode pass. Returns parameter gradients and the gradient with
    /// respect to the network input.
    pub fn backward(&self, cache: &MlpCache, d_out: &[f64]) -> (MlpGrads, Vec<f64>) {
        let batch = cache.batch;
        assert_eq!(d_out.len(), batch * self.n_out(), "output gradient has wrong length");
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut dz = d_out.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.inputs[idx];
            let mut g = Dense::zeros(layer.n_in, layer.n_out);
            // dW = dzᵀ · x
            gemm(
                layer.n_out,
                batch,
                layer.n_in,
                &dz,
                (1, layer.n_out as isize),
                x,
                (layer.n_in as isize, 1),
                &mut g.w,
                0.0,
            );
            for row in dz.chunks_exact(layer.n_out) {
                g.b.iter_mut().zip(row).for_each(|(b, d)| *b += d);
            }
            // dx = dz · W
            let mut dx = vec![0.0; batch * layer.n_in];
            gemm(
                batch,
                layer.n_out,
                layer.n_in,
                &dz,
                (layer.n_out as isize, 1),
                &layer.w,
                (layer.n_in as isize, 1),
                &mut dx,
                0.0,
            );
            if idx > 0 {
                // x is the rectified output of the previous layer, so the
                // rectifier derivative is its positivity mask.
                dx.iter_mut().zip(x).for_each(|(d, a)| {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            grads.push(g);
            dz = dx;
        }
        grads.reverse();
        (MlpGrads { layers: grads }, dz)
    }

    /// `self ← τ·online + (1 − τ)·self`.
    pub fn polyak_from(&mut self, online: &Mlp, tau: f64) {
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            t.w.iter_mut().zip(&o.w).for_each(|(t, o)| *t = tau * o + (1.0 - tau) * *t);
            t.b.iter_mut().zip(&o.b).for_each(|(t, o)| *t = tau * o + (1.0 - tau) * *t);
        }
    }
}

/// `c = a·b + beta·c` for strided row/column views; `a` is `m × k`,
/// `b` is `k × n`, `c` is contiguous `m × n`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    c: &mut [f64],
    beta: f64,
) {
    assert!(span(m, k, rsa, csa) <= a.len());
    assert!(span(k, n, rsb, csb) <= b.len());
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts above bound every strided access inside the slices,
    // and `c` is an exclusive, contiguous `m × n` buffer.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn span(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    ((rows - 1) as isize * rs + (cols - 1) as isize * cs) as usize + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_output_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Mlp::new(&[3, 5, 5, 2], &mut rng);
        for l in net.layers_mut() {
            l.w.fill(0.0);
        }
        net.layers_mut()[2].b = vec![0.7, -1.5];
        let (out, _) = net.forward(&[1.0, 2.0, 3.0, -4.0, 0.0, 9.0], 2);
        assert_eq!(out, vec![0.7, -1.5, 0.7, -1.5]);
    }

    #[test]
    fn hand_computed_tiny_net() {
        // 1-1-1 chain: y = w2·relu(w1·x + b1) + b2.
        let net = Mlp::from_layers(vec![
            Dense { n_in: 1, n_out: 1, w: vec![2.0], b: vec![-1.0] },
            Dense { n_in: 1, n_out: 1, w: vec![3.0], b: vec![0.5] },
        ]);
        assert_eq!(net.predict(&[2.0], 1), vec![3.0 * 3.0 + 0.5]);
        // Negative pre-activation is cut off.
        assert_eq!(net.predict(&[0.0], 1), vec![0.5]);
    }

    #[test]
    fn rectified_unit_passes_no_gradient() {
        let net = Mlp::from_layers(vec![
            Dense { n_in: 1, n_out: 1, w: vec![1.0], b: vec![-5.0] },
            Dense { n_in: 1, n_out: 1, w: vec![3.0], b: vec![0.0] },
        ]);
        let (_, cache) = net.forward(&[1.0], 1);
        let (g, dx) = net.backward(&cache, &[1.0]);
        assert_eq!(g.layers[0].w, vec![0.0]);
        assert_eq!(g.layers[0].b, vec![0.0]);
        assert_eq!(dx, vec![0.0]);
        assert_eq!(g.layers[1].b, vec![1.0]);
    }

    #[test]
    fn zero_output_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[4, 6, 6, 3], &mut rng);
        let x: Vec<f64> = (0..8).map(|i| i as f64 * 0.1 - 0.3).collect();
        let (_, cache) = net.forward(&x, 2);
        let (g, dx) = net.backward(&cache, &[0.0; 6]);
        assert!(g.slices().iter().all(|s| s.iter().all(|v| *v == 0.0)));
        assert!(dx.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn batch_gradient_is_sum_of_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::new(&[3, 7, 7, 2], &mut rng);
        let x: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, cache) = net.forward(&x, 4);
        let (full, _) = net.backward(&cache, &d);
        let mut acc: Option<MlpGrads> = None;
        for i in 0..4 {
            let (_, c) = net.forward(&x[i * 3..i * 3 + 3], 1);
            let (g, _) = net.backward(&c, &d[i * 2..i * 2 + 2]);
            match acc.as_mut() {
                Some(a) => a.add_assign(&g),
                None => acc = Some(g),
            }
        }
        for (a, b) in full.slices().iter().zip(acc.unwrap().slices()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn polyak_is_convex_combination() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let online = Mlp::new(&[2, 4, 1], &mut rng);
        let mut target = Mlp::new(&[2, 4, 1], &mut rng);
        let prev = target.clone();
        target.polyak_from(&online, 0.005);
        for ((t, o), p) in target.params().iter().zip(online.params()).zip(prev.params()) {
            for i in 0..t.len() {
                assert_eq!(t[i], 0.005 * o[i] + 0.995 * p[i]);
            }
        }
    }
}
