use super::{sigmoid, ParamId, Params};

/// y += W x, W row-major (rows × cols).
fn matvec_acc(w: &[f64], cols: usize, x: &[f64], y: &mut [f64]) {
    for (r, yr) in y.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        *yr += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// dx += Wᵀ dy.
fn matvec_t_acc(w: &[f64], cols: usize, dy: &[f64], dx: &mut [f64]) {
    for (r, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (d, &a) in dx.iter_mut().zip(row) {
            *d += a * g;
        }
    }
}

/// gW += dy ⊗ x.
fn outer_acc(gw: &mut [f64], cols: usize, dy: &[f64], x: &[f64]) {
    for (r, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &mut gw[r * cols..(r + 1) * cols];
        for (d, &v) in row.iter_mut().zip(x) {
            *d += g * v;
        }
    }
}

/// Fully connected layer y = W x + b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub inp: usize,
    pub out: usize,
}

impl Linear {
    pub fn new(p: &mut Params, name: &str, inp: usize, out: usize) -> Self {
        Linear {
            w: p.add(format!("{name}.w"), &[out, inp]),
            b: p.add(format!("{name}.b"), &[out]),
            inp,
            out,
        }
    }

    pub fn forward(&self, p: &Params, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.inp, "linear input width");
        let mut y = p.get(self.b).to_vec();
        matvec_acc(p.get(self.w), self.inp, x, &mut y);
        y
    }

    /// Forward pass for an input given as sorted (index, value) pairs.
    pub fn forward_sparse(&self, p: &Params, x: &[(usize, f64)]) -> Vec<f64> {
        let mut y = p.get(self.b).to_vec();
        let w = p.get(self.w);
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &w[o * self.inp..(o + 1) * self.inp];
            *yo += x.iter().map(|&(i, v)| row[i] * v).sum::<f64>();
        }
        y
    }

    /// Accumulates parameter gradients; adds the input gradient to `dx` if given.
    pub fn backward(&self, p: &Params, g: &mut Params, x: &[f64], dy: &[f64], dx: Option<&mut [f64]>) {
        outer_acc(g.get_mut(self.w), self.inp, dy, x);
        for (b, &d) in g.get_mut(self.b).iter_mut().zip(dy) {
            *b += d;
        }
        if let Some(dx) = dx {
            matvec_t_acc(p.get(self.w), self.inp, dy, dx);
        }
    }

    pub fn backward_sparse(&self, g: &mut Params, x: &[(usize, f64)], dy: &[f64]) {
        let gw = g.get_mut(self.w);
        for (o, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &mut gw[o * self.inp..(o + 1) * self.inp];
            for &(i, v) in x {
                row[i] += d * v;
            }
        }
        for (b, &d) in g.get_mut(self.b).iter_mut().zip(dy) {
            *b += d;
        }
    }
}

/// Standard four-gate LSTM cell; gate order (input, forget, candidate, output).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmCell {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
    pub d: usize,
    pub h: usize,
}

/// Activations of one LSTM step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmCell {
    pub fn new(p: &mut Params, name: &str, d: usize, h: usize) -> Self {
        let cell = LstmCell {
            wx: p.add(format!("{name}.wx"), &[4 * h, d]),
            wh: p.add(format!("{name}.wh"), &[4 * h, h]),
            b: p.add(format!("{name}.b"), &[4 * h]),
            d,
            h,
        };
        p.lstm_biases.push(cell.b);
        cell
    }

    /// Slice of the bias vector holding the forget gate.
    pub fn forget_bias_range(&self) -> std::ops::Range<usize> {
        self.h..2 * self.h
    }

    pub fn forward(&self, p: &Params, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmStep {
        assert_eq!(x.len(), self.d, "lstm input width");
        assert_eq!(h_prev.len(), self.h, "lstm state width");
        let h = self.h;
        let mut z = p.get(self.b).to_vec();
        matvec_acc(p.get(self.wx), self.d, x, &mut z);
        matvec_acc(p.get(self.wh), h, h_prev, &mut z);
        let i: Vec<f64> = z[..h].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * h..3 * h].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * h..].iter().map(|&v| sigmoid(v)).collect();
        let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let hn: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
        LstmStep {
            i,
            f,
            g,
            o,
            c,
            tanh_c,
            h: hn,
        }
    }

    /// Backward through one step. `dh`, `dc` are gradients w.r.t. this step's
    /// outputs; returns (dx, dh_prev, dc_prev).
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        p: &Params,
        grads: &mut Params,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        s: &LstmStep,
        dh: &[f64],
        dc: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.h;
        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let d_o = dh[k] * s.tanh_c[k];
            let dck = dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            let d_i = dck * s.g[k];
            let d_f = dck * c_prev[k];
            let d_g = dck * s.i[k];
            dc_prev[k] = dck * s.f[k];
            dz[k] = d_i * s.i[k] * (1.0 - s.i[k]);
            dz[h + k] = d_f * s.f[k] * (1.0 - s.f[k]);
            dz[2 * h + k] = d_g * (1.0 - s.g[k] * s.g[k]);
            dz[3 * h + k] = d_o * s.o[k] * (1.0 - s.o[k]);
        }
        outer_acc(grads.get_mut(self.wx), self.d, &dz, x);
        outer_acc(grads.get_mut(self.wh), h, &dz, h_prev);
        for (b, &d) in grads.get_mut(self.b).iter_mut().zip(&dz) {
            *b += d;
        }
        let mut dx = vec![0.0; self.d];
        matvec_t_acc(p.get(self.wx), self.d, &dz, &mut dx);
        let mut dh_prev = vec![0.0; h];
        matvec_t_acc(p.get(self.wh), h, &dz, &mut dh_prev);
        (dx, dh_prev, dc_prev)
    }
}

/// Plain recurrent unit h_t = tanh(W_x x + W_h h_{t-1} + b).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RnnCell {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
    pub d: usize,
    pub h: usize,
}

impl RnnCell {
    pub fn new(p: &mut Params, name: &str, d: usize, h: usize) -> Self {
        RnnCell {
            wx: p.add(format!("{name}.wx"), &[h, d]),
            wh: p.add(format!("{name}.wh"), &[h, h]),
            b: p.add(format!("{name}.b"), &[h]),
            d,
            h,
        }
    }

    pub fn forward(&self, p: &Params, x: &[f64], h_prev: &[f64]) -> Vec<f64> {
        let mut z = p.get(self.b).to_vec();
        matvec_acc(p.get(self.wx), self.d, x, &mut z);
        matvec_acc(p.get(self.wh), self.h, h_prev, &mut z);
        z.iter().map(|v| v.tanh()).collect()
    }

    /// Returns (dx, dh_prev).
    pub fn backward(
        &self,
        p: &Params,
        grads: &mut Params,
        x: &[f64],
        h_prev: &[f64],
        h: &[f64],
        dh: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let dz: Vec<f64> = dh.iter().zip(h).map(|(d, v)| d * (1.0 - v * v)).collect();
        outer_acc(grads.get_mut(self.wx), self.d, &dz, x);
        outer_acc(grads.get_mut(self.wh), self.h, &dz, h_prev);
        for (b, &d) in grads.get_mut(self.b).iter_mut().zip(&dz) {
            *b += d;
        }
        let mut dx = vec![0.0; self.d];
        matvec_t_acc(p.get(self.wx), self.d, &dz, &mut dx);
        let mut dh_prev = vec![0.0; self.h];
        matvec_t_acc(p.get(self.wh), self.h, &dz, &mut dh_prev);
        (dx, dh_prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::init_params;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Gate-by-gate reference written without the shared helpers.
    fn reference_lstm(p: &Params, cell: &LstmCell, x: &[f64], h0: &[f64], c0: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (wx, wh, b) = (p.get(cell.wx), p.get(cell.wh), p.get(cell.b));
        let (d, h) = (cell.d, cell.h);
        let pre = |gate: usize, k: usize| {
            let r = gate * h + k;
            let mut s = b[r];
            for j in 0..d {
                s += wx[r * d + j] * x[j];
            }
            for j in 0..h {
                s += wh[r * h + j] * h0[j];
            }
            s
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut hs = vec![0.0; h];
        let mut cs = vec![0.0; h];
        for k in 0..h {
            let i = sig(pre(0, k));
            let f = sig(pre(1, k));
            let g = pre(2, k).tanh();
            let o = sig(pre(3, k));
            cs[k] = f * c0[k] + i * g;
            hs[k] = o * cs[k].tanh();
        }
        (hs, cs)
    }

    #[test]
    fn zero_params_halve_the_cell() {
        let mut p = Params::default();
        let cell = LstmCell::new(&mut p, "l", 3, 4);
        let c = [0.4, -1.0, 2.0, 0.0];
        let s = cell.forward(&p, &[1.0, 2.0, 3.0], &[0.5; 4], &c);
        for k in 0..4 {
            assert!((s.c[k] - 0.5 * c[k]).abs() < 1e-15);
            assert!((s.h[k] - 0.5 * (0.5 * c[k]).tanh()).abs() < 1e-15);
        }
        let z = cell.forward(&p, &[0.0; 3], &[0.0; 4], &[0.0; 4]);
        assert!(z.h.iter().chain(&z.c).all(|&v| v == 0.0));
    }

    #[test]
    fn lstm_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let mut p = Params::default();
            let cell = LstmCell::new(&mut p, "l", 5, 6);
            init_params(&mut p, &mut rng);
            for v in p.get_mut(cell.b) {
                *v = rng.gen_range(-1.0..1.0);
            }
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let h0: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c0: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = cell.forward(&p, &x, &h0, &c0);
            let (h, c) = reference_lstm(&p, &cell, &x, &h0, &c0);
            for k in 0..6 {
                assert!((s.h[k] - h[k]).abs() < 1e-12);
                assert!((s.c[k] - c[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sparse_and_dense_linear_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = Params::default();
        let lin = Linear::new(&mut p, "e", 7, 3);
        init_params(&mut p, &mut rng);
        let sparse = vec![(1, 2.0), (5, -0.5)];
        let mut dense = vec![0.0; 7];
        dense[1] = 2.0;
        dense[5] = -0.5;
        let a = lin.forward(&p, &dense);
        let b = lin.forward_sparse(&p, &sparse);
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-14);
        }
        let dy = [0.3, -1.0, 0.7];
        let mut g1 = p.zeros_like();
        let mut g2 = p.zeros_like();
        lin.backward(&p, &mut g1, &dense, &dy, None);
        lin.backward_sparse(&mut g2, &sparse, &dy);
        assert_eq!(g1, g2);
    }

    #[test]
    fn bias_free_zero_input_gradients_vanish() {
        // With zero input, the weight gradient of a linear layer is zero
        // whatever the upstream gradient.
        let mut p = Params::default();
        let lin = Linear::new(&mut p, "l", 4, 2);
        init_params(&mut p, &mut ChaCha8Rng::seed_from_u64(3));
        let mut g = p.zeros_like();
        lin.backward(&p, &mut g, &[0.0; 4], &[1.0, -2.0], None);
        assert!(g.get(lin.w).iter().all(|&v| v == 0.0));
        assert_eq!(g.get(lin.b), &[1.0, -2.0]);
    }
}
