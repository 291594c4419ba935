use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;

use super::params::NetParams;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `y = x W + b` with `W: in x out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    w: usize,
    b: usize,
}

impl Linear {
    pub fn new(
        params: &mut NetParams,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let w = params.add(format!("{name}.weight"), inputs, outputs, bound, rng);
        let b = params.add(format!("{name}.bias"), 1, outputs, bound, rng);
        Self {
            inputs,
            outputs,
            w,
            b,
        }
    }

    pub fn forward(&self, params: &NetParams, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = Array2::zeros((x.nrows(), self.outputs));
        y += &params.value(self.b).row(0);
        general_mat_mul(1.0, &x, params.value(self.w), 1.0, &mut y);
        y
    }

    /// Accumulates parameter gradients when `param_grads`; returns `dL/dx` when `input_grad`.
    pub fn backward(
        &self,
        params: &mut NetParams,
        x: ArrayView2<f64>,
        dy: ArrayView2<f64>,
        param_grads: bool,
        input_grad: bool,
    ) -> Option<Array2<f64>> {
        if param_grads {
            general_mat_mul(1.0, &x.t(), &dy, 1.0, params.grad_mut(self.w));
            let db = dy.sum_axis(Axis(0));
            params.grad_mut(self.b).row_mut(0).zip_mut_with(&db, |g, &d| *g += d);
        }
        input_grad.then(|| dy.dot(&params.value(self.w).t()))
    }
}

/// Single-layer LSTM, gate order input, forget, cell, output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lstm {
    pub input_dim: usize,
    pub hidden: usize,
    w_ih: usize,
    w_hh: usize,
    b: usize,
}

/// Activations recorded by [`Lstm::forward`] for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmTape {
    xs: Vec<Array2<f64>>,
    /// Post-activation gates `[i | f | g | o]`, `B x 4H` per step.
    gates: Vec<Array2<f64>>,
    cells: Vec<Array2<f64>>,
    hiddens: Vec<Array2<f64>>,
}

impl LstmTape {
    pub fn last_hidden(&self) -> &Array2<f64> {
        self.hiddens.last().expect("non-empty sequence")
    }

    pub fn hiddens(&self) -> &[Array2<f64>] {
        &self.hiddens
    }
}

impl Lstm {
    /// Weights drawn from `U(-1/sqrt(H), 1/sqrt(H))`; the recurrent fan-in sets the scale.
    pub fn new(
        params: &mut NetParams,
        name: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let w_ih = params.add(format!("{name}.weight_ih"), input_dim, 4 * hidden, bound, rng);
        let w_hh = params.add(format!("{name}.weight_hh"), hidden, 4 * hidden, bound, rng);
        let b = params.add(format!("{name}.bias"), 1, 4 * hidden, bound, rng);
        Self {
            input_dim,
            hidden,
            w_ih,
            w_hh,
            b,
        }
    }

    /// Runs the sequence `xs` (each `B x input_dim`) from a zero state.
    pub fn forward(&self, params: &NetParams, xs: Vec<Array2<f64>>) -> LstmTape {
        let h = self.hidden;
        let batch = xs.first().map_or(0, |x| x.nrows());
        let w_ih = params.value(self.w_ih);
        let w_hh = params.value(self.w_hh);
        let bias = params.value(self.b).row(0);
        let mut gates = Vec::with_capacity(xs.len());
        let mut cells: Vec<Array2<f64>> = Vec::with_capacity(xs.len());
        let mut hiddens: Vec<Array2<f64>> = Vec::with_capacity(xs.len());
        let zeros = Array2::<f64>::zeros((batch, h));
        for (t, x) in xs.iter().enumerate() {
            let (c_prev, h_prev) = if t == 0 {
                (&zeros, &zeros)
            } else {
                (&cells[t - 1], &hiddens[t - 1])
            };
            let mut a = Array2::zeros((batch, 4 * h));
            a += &bias;
            if self.input_dim == 1 {
                // outer product; avoids a degenerate GEMM
                for (mut row, &xv) in a.outer_iter_mut().zip(x.column(0)) {
                    row.scaled_add(xv, &w_ih.row(0));
                }
            } else {
                general_mat_mul(1.0, x, w_ih, 1.0, &mut a);
            }
            if t > 0 {
                general_mat_mul(1.0, h_prev, w_hh, 1.0, &mut a);
            }
            let mut c = Array2::zeros((batch, h));
            let mut hn = Array2::zeros((batch, h));
            for r in 0..batch {
                let ar = a.row_mut(r).into_slice().expect("contiguous");
                let (ig, rest) = ar.split_at_mut(h);
                let (fg, rest) = rest.split_at_mut(h);
                let (gg, og) = rest.split_at_mut(h);
                let cp = c_prev.row(r);
                let cr = c.row_mut(r).into_slice().expect("contiguous");
                let hr = hn.row_mut(r).into_slice().expect("contiguous");
                for k in 0..h {
                    ig[k] = sigmoid(ig[k]);
                    fg[k] = sigmoid(fg[k]);
                    gg[k] = gg[k].tanh();
                    og[k] = sigmoid(og[k]);
                    cr[k] = fg[k] * cp[k] + ig[k] * gg[k];
                    hr[k] = og[k] * cr[k].tanh();
                }
            }
            gates.push(a);
            cells.push(c);
            hiddens.push(hn);
        }
        LstmTape {
            xs,
            gates,
            cells,
            hiddens,
        }
    }

    /// Backpropagates `dh_last` (gradient w.r.t. the final hidden state) plus
    /// optional per-step hidden-state gradients `dh_seq` from a layer above.
    /// Returns per-step input gradients when `input_grad`.
    pub fn backward(
        &self,
        params: &mut NetParams,
        tape: &LstmTape,
        dh_last: &Array2<f64>,
        dh_seq: Option<&[Array2<f64>]>,
        param_grads: bool,
        input_grad: bool,
    ) -> Option<Vec<Array2<f64>>> {
        let h = self.hidden;
        let steps = tape.xs.len();
        let batch = dh_last.nrows();
        let mut dh = dh_last.clone();
        let mut dc = Array2::<f64>::zeros((batch, h));
        let mut dxs = input_grad.then(|| vec![Array2::zeros((0, 0)); steps]);
        let mut d_ih = Array2::<f64>::zeros((self.input_dim, 4 * h));
        let mut d_hh = Array2::<f64>::zeros((h, 4 * h));
        let mut d_b = Array2::<f64>::zeros((1, 4 * h));
        let mut da = Array2::<f64>::zeros((batch, 4 * h));
        let zeros = Array2::<f64>::zeros((batch, h));
        let w_ih = params.value(self.w_ih).clone();
        let w_hh = params.value(self.w_hh).clone();

        for t in (0..steps).rev() {
            if let Some(seq) = dh_seq {
                dh += &seq[t];
            }
            let g = &tape.gates[t];
            let c = &tape.cells[t];
            let c_prev = if t == 0 { &zeros } else { &tape.cells[t - 1] };
            for r in 0..batch {
                let gr = g.row(r);
                let gr = gr.as_slice().expect("contiguous");
                let dar = da.row_mut(r).into_slice().expect("contiguous");
                let dhr = dh.row(r);
                let dcr = dc.row_mut(r).into_slice().expect("contiguous");
                let cr = c.row(r);
                let cpr = c_prev.row(r);
                for k in 0..h {
                    let (i, f, gg, o) = (gr[k], gr[h + k], gr[2 * h + k], gr[3 * h + k]);
                    let tc = cr[k].tanh();
                    let d_o = dhr[k] * tc;
                    let dcell = dcr[k] + dhr[k] * o * (1.0 - tc * tc);
                    dar[k] = dcell * gg * i * (1.0 - i);
                    dar[h + k] = dcell * cpr[k] * f * (1.0 - f);
                    dar[2 * h + k] = dcell * i * (1.0 - gg * gg);
                    dar[3 * h + k] = d_o * o * (1.0 - o);
                    dcr[k] = dcell * f;
                }
            }
            if param_grads {
                let x = &tape.xs[t];
                if self.input_dim == 1 {
                    for (row, &xv) in da.outer_iter().zip(x.column(0)) {
                        d_ih.row_mut(0).scaled_add(xv, &row);
                    }
                } else {
                    general_mat_mul(1.0, &x.t(), &da, 1.0, &mut d_ih);
                }
                if t > 0 {
                    general_mat_mul(1.0, &tape.hiddens[t - 1].t(), &da, 1.0, &mut d_hh);
                }
                d_b.row_mut(0).zip_mut_with(&da.sum_axis(Axis(0)), |a, &b| *a += b);
            }
            if let Some(dxs) = dxs.as_mut() {
                dxs[t] = da.dot(&w_ih.t());
            }
            if t > 0 {
                general_mat_mul(1.0, &da, &w_hh.t(), 0.0, &mut dh);
            }
        }
        if param_grads {
            *params.grad_mut(self.w_ih) += &d_ih;
            *params.grad_mut(self.w_hh) += &d_hh;
            *params.grad_mut(self.b) += &d_b;
        }
        dxs
    }
}

/// Stack of LSTM layers; layer `k + 1` consumes the hidden sequence of layer `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StackedLstm {
    layers: Vec<Lstm>,
}

impl StackedLstm {
    pub fn new(
        params: &mut NetParams,
        name: &str,
        input_dim: usize,
        hidden: usize,
        num_layers: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let layers = (0..num_layers)
            .map(|k| {
                let d = if k == 0 { input_dim } else { hidden };
                Lstm::new(params, &format!("{name}.l{k}"), d, hidden, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].hidden
    }

    pub fn forward(&self, params: &NetParams, xs: Vec<Array2<f64>>) -> Vec<LstmTape> {
        let mut tapes: Vec<LstmTape> = Vec::with_capacity(self.layers.len());
        let mut input = xs;
        for layer in &self.layers {
            let tape = layer.forward(params, input);
            input = tape.hiddens().to_vec();
            tapes.push(tape);
        }
        tapes
    }

    pub fn backward(
        &self,
        params: &mut NetParams,
        tapes: &[LstmTape],
        dh_last: &Array2<f64>,
        param_grads: bool,
        input_grad: bool,
    ) -> Option<Vec<Array2<f64>>> {
        let mut seq: Option<Vec<Array2<f64>>> = None;
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let top = k + 1 == self.layers.len();
            let zero = Array2::zeros(dh_last.raw_dim());
            let last = if top { dh_last } else { &zero };
            let need_dx = input_grad || k > 0;
            seq = layer.backward(params, &tapes[k], last, seq.as_deref(), param_grads, need_dx);
        }
        seq
    }
}
