//! Reverse-mode differentiation over matrix operations. Recurrent layers and
//! attention are single fused operations with hand-written backward passes.

use serde::{Deserialize, Serialize};

use super::tensor::{
    axpy, matmul, matmul_acc, matmul_at_acc, matmul_bt, matmul_bt_acc, sigmoid, Matrix,
};

pub type ParamId = usize;
pub type Var = usize;

const LN_EPS: f32 = 1e-5;

/// Named trainable matrices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub names: Vec<String>,
    pub values: Vec<Matrix>,
}

impl Params {
    pub fn add(&mut self, name: &str, m: Matrix) -> ParamId {
        assert!(!self.names.iter().any(|n| n == name), "duplicate parameter {name}");
        self.names.push(name.to_string());
        self.values.push(m);
        self.values.len() - 1
    }

    pub fn zeros_like(&self) -> Vec<Matrix> {
        self.values
            .iter()
            .map(|m| Matrix::zeros(m.rows, m.cols))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(|m| m.data.len()).sum()
    }
}

struct LstmCache {
    /// Per step: gates `[i, f, o, u]` after activation.
    gates: Matrix,
    c: Matrix,
    tanh_c: Matrix,
}

enum Op {
    Input,
    Embed { ids: Vec<Vec<usize>>, table: ParamId },
    Linear { x: Var, w: ParamId, b: Option<ParamId> },
    Add(Var, Var),
    Relu(Var),
    Tanh(Var),
    Dropout { x: Var, mask: Vec<f32> },
    LayerNorm { x: Var, g: ParamId, b: ParamId, xhat: Matrix, inv_std: Vec<f32> },
    Attention { qkv: Var, heads: usize, probs: Vec<Matrix> },
    Lstm { g: Var, u: ParamId, cache: LstmCache },
    TreeLstm { g: Var, ul: ParamId, ur: ParamId, children: Vec<[Option<usize>; 2]>, cache: LstmCache },
    Row { x: Var, i: usize },
}

/// One forward pass. Values live on the tape until [`Tape::backward`].
pub struct Tape<'p> {
    params: &'p Params,
    vals: Vec<Matrix>,
    ops: Vec<Op>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p Params) -> Tape<'p> {
        Tape {
            params,
            vals: Vec::new(),
            ops: Vec::new(),
        }
    }

    fn push(&mut self, v: Matrix, op: Op) -> Var {
        self.vals.push(v);
        self.ops.push(op);
        self.vals.len() - 1
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.vals[v]
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn input(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Input)
    }

    /// Row `r` is the sum of the embeddings of `ids[r]`.
    pub fn embed(&mut self, table: ParamId, ids: Vec<Vec<usize>>) -> Var {
        let t = &self.params.values[table];
        let mut out = Matrix::zeros(ids.len(), t.cols);
        for (r, row_ids) in ids.iter().enumerate() {
            for &id in row_ids {
                axpy(1.0, t.row(id), out.row_mut(r));
            }
        }
        self.push(out, Op::Embed { ids, table })
    }

    pub fn linear(&mut self, x: Var, w: ParamId, b: Option<ParamId>) -> Var {
        let mut out = matmul(&self.vals[x], &self.params.values[w]);
        if let Some(b) = b {
            let bias = &self.params.values[b].data;
            for i in 0..out.rows {
                axpy(1.0, bias, out.row_mut(i));
            }
        }
        self.push(out, Op::Linear { x, w, b })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.vals[a].clone();
        out.add_assign(&self.vals[b]);
        self.push(out, Op::Add(a, b))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let mut out = self.vals[x].clone();
        out.data.iter_mut().for_each(|v| *v = v.max(0.0));
        self.push(out, Op::Relu(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let mut out = self.vals[x].clone();
        out.data.iter_mut().for_each(|v| *v = v.tanh());
        self.push(out, Op::Tanh(x))
    }

    /// Multiplies elementwise by `mask` (already scaled by `1/(1-p)`).
    pub fn dropout(&mut self, x: Var, mask: Vec<f32>) -> Var {
        let mut out = self.vals[x].clone();
        for (v, m) in out.data.iter_mut().zip(&mask) {
            *v *= m;
        }
        self.push(out, Op::Dropout { x, mask })
    }

    pub fn layer_norm(&mut self, x: Var, g: ParamId, b: ParamId) -> Var {
        let xv = &self.vals[x];
        let (n, d) = xv.shape();
        let mut xhat = Matrix::zeros(n, d);
        let mut inv_std = Vec::with_capacity(n);
        let (gv, bv) = (&self.params.values[g].data, &self.params.values[b].data);
        let mut out = Matrix::zeros(n, d);
        for i in 0..n {
            let r = xv.row(i);
            let mean = r.iter().sum::<f32>() / d as f32;
            let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / d as f32;
            let s = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(s);
            let xh = xhat.row_mut(i);
            for k in 0..d {
                xh[k] = (r[k] - mean) * s;
            }
            let o = out.row_mut(i);
            for k in 0..d {
                o[k] = gv[k] * xhat.data[i * d + k] + bv[k];
            }
        }
        self.push(out, Op::LayerNorm { x, g, b, xhat, inv_std })
    }

    /// Multi-head self-attention over `qkv = [Q | K | V]` (`n x 3d`); returns the
    /// concatenated head outputs (`n x d`).
    pub fn attention(&mut self, qkv: Var, heads: usize) -> Var {
        let m = &self.vals[qkv];
        let d = m.cols / 3;
        let dh = d / heads;
        let scale = 1.0 / (dh as f32).sqrt();
        let mut out = Matrix::zeros(m.rows, d);
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let q = m.cols_slice(h * dh, dh);
            let k = m.cols_slice(d + h * dh, dh);
            let v = m.cols_slice(2 * d + h * dh, dh);
            let mut s = matmul_bt(&q, &k);
            for i in 0..s.rows {
                let row = s.row_mut(i);
                let mx = row.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b * scale));
                let mut z = 0.0;
                for v in row.iter_mut() {
                    *v = (*v * scale - mx).exp();
                    z += *v;
                }
                row.iter_mut().for_each(|v| *v /= z);
            }
            out.set_cols(h * dh, &matmul(&s, &v));
            probs.push(s);
        }
        self.push(out, Op::Attention { qkv, heads, probs })
    }

    /// LSTM over the rows of `g = x W + b` (`n x 4d`, gate order i, f, o, u) with
    /// recurrent weights `u` (`d x 4d`). Returns all hidden states.
    pub fn lstm(&mut self, g: Var, u: ParamId) -> Var {
        let gv = &self.vals[g];
        let uw = &self.params.values[u];
        let d = uw.rows;
        let n = gv.rows;
        let mut h = Matrix::zeros(n, d);
        let mut cache = LstmCache {
            gates: Matrix::zeros(n, 4 * d),
            c: Matrix::zeros(n, d),
            tanh_c: Matrix::zeros(n, d),
        };
        let mut z = Matrix::zeros(1, 4 * d);
        for t in 0..n {
            z.data.copy_from_slice(gv.row(t));
            if t > 0 {
                let hp = Matrix::from_vec(1, d, h.row(t - 1).to_vec());
                matmul_acc(&hp, uw, &mut z);
            }
            let prev_c: Vec<f32> = if t > 0 { cache.c.row(t - 1).to_vec() } else { vec![0.0; d] };
            cell_forward(&z.data, &[(&prev_c, 1)], d, t, &mut cache, &mut h);
        }
        self.push(h, Op::Lstm { g, u, cache })
    }

    /// Binary TreeLSTM. `g` holds `x W + b` per node (`n x 5d`, gate order
    /// i, f_left, f_right, o, u); children always have larger indices than
    /// their parent.
    pub fn tree_lstm(&mut self, g: Var, ul: ParamId, ur: ParamId, children: Vec<[Option<usize>; 2]>) -> Var {
        let gv = &self.vals[g];
        let (wl, wr) = (&self.params.values[ul], &self.params.values[ur]);
        let d = wl.rows;
        let n = gv.rows;
        let mut h = Matrix::zeros(n, d);
        let mut cache = LstmCache {
            gates: Matrix::zeros(n, 5 * d),
            c: Matrix::zeros(n, d),
            tanh_c: Matrix::zeros(n, d),
        };
        let mut z = Matrix::zeros(1, 5 * d);
        for j in (0..n).rev() {
            z.data.copy_from_slice(gv.row(j));
            let mut prev: Vec<(Vec<f32>, usize)> = Vec::new();
            for (slot, w) in [(0, wl), (1, wr)] {
                if let Some(c) = children[j][slot] {
                    debug_assert!(c > j);
                    let hc = Matrix::from_vec(1, d, h.row(c).to_vec());
                    matmul_acc(&hc, w, &mut z);
                    prev.push((cache.c.row(c).to_vec(), slot + 1));
                }
            }
            let prev_refs: Vec<(&[f32], usize)> = prev.iter().map(|(c, s)| (c.as_slice(), *s)).collect();
            tree_cell_forward(&z.data, &prev_refs, d, j, &mut cache, &mut h);
        }
        self.push(h, Op::TreeLstm { g, ul, ur, children, cache })
    }

    pub fn row(&mut self, x: Var, i: usize) -> Var {
        let m = &self.vals[x];
        let out = Matrix::from_vec(1, m.cols, m.row(i).to_vec());
        self.push(out, Op::Row { x, i })
    }

    /// Backpropagates the given output gradients, accumulating parameter
    /// gradients into `grads`.
    pub fn backward(self, seeds: Vec<(Var, Matrix)>, grads: &mut [Matrix]) {
        let Tape { params, vals, ops } = self;
        let mut g: Vec<Option<Matrix>> = (0..vals.len()).map(|_| None).collect();
        let acc = |g: &mut Vec<Option<Matrix>>, v: Var, m: Matrix| match &mut g[v] {
            Some(cur) => cur.add_assign(&m),
            slot @ None => *slot = Some(m),
        };
        for (v, d) in seeds {
            acc(&mut g, v, d);
        }
        for idx in (0..ops.len()).rev() {
            let Some(dy) = g[idx].take() else { continue };
            match &ops[idx] {
                Op::Input => {}
                Op::Embed { ids, table } => {
                    let gt = &mut grads[*table];
                    for (r, row_ids) in ids.iter().enumerate() {
                        for &id in row_ids {
                            axpy(1.0, dy.row(r), gt.row_mut(id));
                        }
                    }
                }
                Op::Linear { x, w, b } => {
                    let wv = &params.values[*w];
                    if !matches!(ops[*x], Op::Input) {
                        acc(&mut g, *x, matmul_bt(&dy, wv));
                    }
                    matmul_at_acc(&vals[*x], &dy, &mut grads[*w]);
                    if let Some(b) = b {
                        let gb = &mut grads[*b].data;
                        for i in 0..dy.rows {
                            axpy(1.0, dy.row(i), gb);
                        }
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut g, *b, dy.clone());
                    acc(&mut g, *a, dy);
                }
                Op::Relu(x) => {
                    let mut dx = dy;
                    for (d, y) in dx.data.iter_mut().zip(&vals[idx].data) {
                        if *y <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    acc(&mut g, *x, dx);
                }
                Op::Tanh(x) => {
                    let mut dx = dy;
                    for (d, y) in dx.data.iter_mut().zip(&vals[idx].data) {
                        *d *= 1.0 - y * y;
                    }
                    acc(&mut g, *x, dx);
                }
                Op::Dropout { x, mask } => {
                    let mut dx = dy;
                    for (d, m) in dx.data.iter_mut().zip(mask) {
                        *d *= m;
                    }
                    acc(&mut g, *x, dx);
                }
                Op::LayerNorm { x, g: gp, b, xhat, inv_std } => {
                    let (n, d) = dy.shape();
                    let gv = &params.values[*gp].data;
                    let mut dx = Matrix::zeros(n, d);
                    for i in 0..n {
                        let dyr = dy.row(i);
                        let xh = xhat.row(i);
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for k in 0..d {
                            let dxh = dyr[k] * gv[k];
                            m1 += dxh;
                            m2 += dxh * xh[k];
                        }
                        m1 /= d as f32;
                        m2 /= d as f32;
                        let o = dx.row_mut(i);
                        for k in 0..d {
                            o[k] = inv_std[i] * (dyr[k] * gv[k] - m1 - xh[k] * m2);
                        }
                        let gg = grads[*gp].row_mut(0);
                        for k in 0..d {
                            gg[k] += dyr[k] * xh[k];
                        }
                        axpy(1.0, dyr, grads[*b].row_mut(0));
                    }
                    acc(&mut g, *x, dx);
                }
                Op::Attention { qkv, heads, probs } => {
                    let m = &vals[*qkv];
                    let d = m.cols / 3;
                    let dh = d / heads;
                    let scale = 1.0 / (dh as f32).sqrt();
                    let mut dqkv = Matrix::zeros(m.rows, m.cols);
                    for (h, p) in probs.iter().enumerate() {
                        let q = m.cols_slice(h * dh, dh);
                        let k = m.cols_slice(d + h * dh, dh);
                        let v = m.cols_slice(2 * d + h * dh, dh);
                        let dout = dy.cols_slice(h * dh, dh);
                        let mut dv = Matrix::zeros(p.cols, dh);
                        matmul_at_acc(p, &dout, &mut dv);
                        let mut ds = matmul_bt(&dout, &v);
                        for i in 0..ds.rows {
                            let pr = p.row(i);
                            let dr = ds.row_mut(i);
                            let s: f32 = pr.iter().zip(dr.iter()).map(|(a, b)| a * b).sum();
                            for (x, pv) in dr.iter_mut().zip(pr) {
                                *x = pv * (*x - s) * scale;
                            }
                        }
                        let dq = matmul(&ds, &k);
                        let mut dk = Matrix::zeros(k.rows, dh);
                        matmul_at_acc(&ds, &q, &mut dk);
                        dqkv.add_cols(h * dh, &dq);
                        dqkv.add_cols(d + h * dh, &dk);
                        dqkv.add_cols(2 * d + h * dh, &dv);
                    }
                    acc(&mut g, *qkv, dqkv);
                }
                Op::Lstm { g: gin, u, cache } => {
                    let uw = &params.values[*u];
                    let d = uw.rows;
                    let n = dy.rows;
                    let h = &vals[idx];
                    let mut dg = Matrix::zeros(n, 4 * d);
                    let mut dh_next = vec![0f32; d];
                    let mut dc_next = vec![0f32; d];
                    for t in (0..n).rev() {
                        let mut dh: Vec<f32> = dy.row(t).to_vec();
                        axpy(1.0, &dh_next, &mut dh);
                        let prev_c: Vec<f32> = if t > 0 { cache.c.row(t - 1).to_vec() } else { vec![0.0; d] };
                        let (dz, dcs) = cell_backward(&dh, &dc_next, cache, t, d, &[&prev_c], 4);
                        dg.row_mut(t).copy_from_slice(&dz);
                        let dzm = Matrix::from_vec(1, 4 * d, dz);
                        if t > 0 {
                            let hp = Matrix::from_vec(1, d, h.row(t - 1).to_vec());
                            matmul_at_acc(&hp, &dzm, &mut grads[*u]);
                            dh_next = matmul_bt(&dzm, uw).data;
                            dc_next = dcs[0].clone();
                        }
                    }
                    acc(&mut g, *gin, dg);
                }
                Op::TreeLstm { g: gin, ul, ur, children, cache } => {
                    let (wl, wr) = (&params.values[*ul], &params.values[*ur]);
                    let d = wl.rows;
                    let n = dy.rows;
                    let h = &vals[idx];
                    let mut dg = Matrix::zeros(n, 5 * d);
                    let mut dh_acc = Matrix::zeros(n, d);
                    let mut dc_acc = Matrix::zeros(n, d);
                    let zero = vec![0f32; d];
                    for j in 0..n {
                        let mut dh: Vec<f32> = dy.row(j).to_vec();
                        axpy(1.0, dh_acc.row(j), &mut dh);
                        let cl = children[j][0].map_or(zero.clone(), |c| cache.c.row(c).to_vec());
                        let cr = children[j][1].map_or(zero.clone(), |c| cache.c.row(c).to_vec());
                        let dc_in = dc_acc.row(j).to_vec();
                        let (dz, dcs) = cell_backward(&dh, &dc_in, cache, j, d, &[&cl, &cr], 5);
                        dg.row_mut(j).copy_from_slice(&dz);
                        let dzm = Matrix::from_vec(1, 5 * d, dz);
                        for (slot, (w, pid)) in [(wl, *ul), (wr, *ur)].into_iter().enumerate() {
                            if let Some(c) = children[j][slot] {
                                let hc = Matrix::from_vec(1, d, h.row(c).to_vec());
                                matmul_at_acc(&hc, &dzm, &mut grads[pid]);
                                let mut dhc = Matrix::from_vec(1, d, dh_acc.row(c).to_vec());
                                matmul_bt_acc(&dzm, w, &mut dhc);
                                dh_acc.row_mut(c).copy_from_slice(&dhc.data);
                                axpy(1.0, &dcs[slot], dc_acc.row_mut(c));
                            }
                        }
                    }
                    acc(&mut g, *gin, dg);
                }
                Op::Row { x, i } => {
                    let xv = &vals[*x];
                    let mut dx = Matrix::zeros(xv.rows, xv.cols);
                    dx.row_mut(*i).copy_from_slice(&dy.data);
                    acc(&mut g, *x, dx);
                }
            }
        }
    }
}

/// Gate layout: `[i, f_1 .. f_k, o, u]` where `k` is 1 for the chain LSTM and
/// 2 for the binary TreeLSTM. `prev` pairs a previous cell state with the
/// index of its forget gate.
fn cell_forward_general(
    z: &[f32],
    prev: &[(&[f32], usize)],
    forgets: usize,
    d: usize,
    t: usize,
    cache: &mut LstmCache,
    h: &mut Matrix,
) {
    let width = (3 + forgets) * d;
    let gates = cache.gates.row_mut(t);
    debug_assert_eq!(gates.len(), width);
    let u_block = (2 + forgets) * d;
    for k in 0..width {
        gates[k] = if k >= u_block { z[k].tanh() } else { sigmoid(z[k]) };
    }
    let gates = cache.gates.row(t).to_vec();
    let o_off = (1 + forgets) * d;
    let u_off = (2 + forgets) * d;
    let c = cache.c.row_mut(t);
    for k in 0..d {
        c[k] = gates[k] * gates[u_off + k];
    }
    for (pc, f) in prev {
        for k in 0..d {
            c[k] += gates[f * d + k] * pc[k];
        }
    }
    let c = cache.c.row(t).to_vec();
    let tc = cache.tanh_c.row_mut(t);
    let hr = h.row_mut(t);
    for k in 0..d {
        tc[k] = c[k].tanh();
        hr[k] = gates[o_off + k] * tc[k];
    }
}

fn cell_forward(z: &[f32], prev: &[(&Vec<f32>, usize)], d: usize, t: usize, cache: &mut LstmCache, h: &mut Matrix) {
    let p: Vec<(&[f32], usize)> = prev.iter().map(|(c, f)| (c.as_slice(), *f)).collect();
    cell_forward_general(z, &p, 1, d, t, cache, h);
}

fn tree_cell_forward(z: &[f32], prev: &[(&[f32], usize)], d: usize, j: usize, cache: &mut LstmCache, h: &mut Matrix) {
    cell_forward_general(z, prev, 2, d, j, cache, h);
}

/// Returns the gradient of the pre-activations and of each previous cell
/// state (in forget-gate order).
fn cell_backward(
    dh: &[f32],
    dc_in: &[f32],
    cache: &LstmCache,
    t: usize,
    d: usize,
    prev_c: &[&Vec<f32>],
    width_blocks: usize,
) -> (Vec<f32>, Vec<Vec<f32>>) {
    let forgets = width_blocks - 3;
    let gates = cache.gates.row(t);
    let tc = cache.tanh_c.row(t);
    let o_off = (1 + forgets) * d;
    let u_off = (2 + forgets) * d;
    let mut dz = vec![0f32; width_blocks * d];
    let mut dcs = vec![vec![0f32; d]; forgets];
    for k in 0..d {
        let o = gates[o_off + k];
        let dc = dh[k] * o * (1.0 - tc[k] * tc[k]) + dc_in[k];
        dz[o_off + k] = dh[k] * tc[k] * o * (1.0 - o);
        let i = gates[k];
        let u = gates[u_off + k];
        dz[k] = dc * u * i * (1.0 - i);
        dz[u_off + k] = dc * i * (1.0 - u * u);
        for f in 0..forgets {
            let fv = gates[(1 + f) * d + k];
            dz[(1 + f) * d + k] = dc * prev_c[f][k] * fv * (1.0 - fv);
            dcs[f][k] = dc * fv;
        }
    }
    (dz, dcs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, a: f32) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-a..a)).collect())
    }

    /// Checks every parameter gradient of `sum(w * f(params))` by central differences.
    fn check(params: Params, f: &dyn Fn(&mut Tape) -> Var) {
        let mut params = params;
        let out_of = |p: &Params| {
            let mut t = Tape::new(p);
            let o = f(&mut t);
            let v = t.value(o);
            v.data.iter().enumerate().map(|(i, &x)| f64::from(x) * (1.0 + 0.1 * i as f64)).sum::<f64>()
        };
        let mut grads = params.zeros_like();
        {
            let mut t = Tape::new(&params);
            let o = f(&mut t);
            let v = t.value(o).clone();
            let w = Matrix::from_vec(v.rows, v.cols, (0..v.data.len()).map(|i| 1.0 + 0.1 * i as f32).collect());
            t.backward(vec![(o, w)], &mut grads);
        }
        for p in 0..params.values.len() {
            for i in 0..params.values[p].data.len() {
                let orig = params.values[p].data[i];
                let h = 1e-2f32;
                params.values[p].data[i] = orig + h;
                let up = out_of(&params);
                params.values[p].data[i] = orig - h;
                let down = out_of(&params);
                params.values[p].data[i] = orig;
                let numeric = (up - down) / (2.0 * f64::from(h));
                let analytic = f64::from(grads[p].data[i]);
                assert!(
                    (analytic - numeric).abs() <= 2e-3 + 1e-2 * numeric.abs(),
                    "{} [{i}]: analytic {analytic} numeric {numeric}",
                    params.names[p]
                );
            }
        }
    }

    #[test]
    fn lstm_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (n, d) = (5, 3);
        let mut p = Params::default();
        let x = p.add("x", rand_matrix(&mut rng, n, d, 1.0));
        let w = p.add("w", rand_matrix(&mut rng, d, 4 * d, 0.8));
        let u = p.add("u", rand_matrix(&mut rng, d, 4 * d, 0.8));
        check(p, &|t| {
            let e = t.embed(x, (0..n).map(|i| vec![i]).collect());
            let g = t.linear(e, w, None);
            t.lstm(g, u)
        });
    }

    #[test]
    fn tree_lstm_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, d) = (6, 3);
        let mut p = Params::default();
        let x = p.add("x", rand_matrix(&mut rng, n, d, 1.0));
        let w = p.add("w", rand_matrix(&mut rng, d, 5 * d, 0.8));
        let b = p.add("b", rand_matrix(&mut rng, 1, 5 * d, 0.5));
        let ul = p.add("ul", rand_matrix(&mut rng, d, 5 * d, 0.8));
        let ur = p.add("ur", rand_matrix(&mut rng, d, 5 * d, 0.8));
        // 0 -> 1 -> (2 -> 3, 4), 5 as the right child of the root.
        let children = vec![[Some(1), Some(5)], [Some(2), Some(4)], [Some(3), None], [None, None], [None, None], [None, None]];
        check(p, &|t| {
            let e = t.embed(x, (0..n).map(|i| vec![i]).collect());
            let g = t.linear(e, w, Some(b));
            t.tree_lstm(g, ul, ur, children.clone())
        });
    }

    #[test]
    fn attention_and_norm_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, d) = (4, 4);
        let mut p = Params::default();
        let x = p.add("x", rand_matrix(&mut rng, n, d, 1.0));
        let w = p.add("w", rand_matrix(&mut rng, d, 3 * d, 0.8));
        let g = p.add("g", rand_matrix(&mut rng, 1, d, 1.0));
        let b = p.add("b", rand_matrix(&mut rng, 1, d, 1.0));
        check(p, &|t| {
            let e = t.embed(x, (0..n).map(|i| vec![i, (i + 1) % n]).collect());
            let q = t.linear(e, w, None);
            let a = t.attention(q, 2);
            let s = t.add(a, e);
            let l = t.layer_norm(s, g, b);
            let h = t.tanh(l);
            t.row(h, 1)
        });
    }
}
