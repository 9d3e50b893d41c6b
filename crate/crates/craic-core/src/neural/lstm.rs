//! LSTM cell, parameter container, and the batched forward/backward pass
//! shared by the trainers and the gradient checker.
//!
//! One layer, embedding dimension tied to the hidden size. Gate weights act
//! on the concatenation `[h_prev ; x]`, so each weight matrix is 2K×K.

use super::math::{sigmoid, Mat, Scalar};
use super::NeuralError;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<T> {
    pub hidden: usize,
    pub vocab: usize,
    /// V×K input embedding.
    pub embed: Mat<T>,
    /// 2K×K gate weights over `[h_prev ; x]`.
    pub w_input: Mat<T>,
    pub w_forget: Mat<T>,
    pub w_output: Mat<T>,
    pub w_cell: Mat<T>,
    pub b_input: Vec<T>,
    pub b_forget: Vec<T>,
    pub b_output: Vec<T>,
    pub b_cell: Vec<T>,
    /// K×V output projection.
    pub w_proj: Mat<T>,
    pub b_proj: Vec<T>,
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(hidden: usize, vocab: usize) -> Self {
        LstmParams {
            hidden,
            vocab,
            embed: Mat::zeros(vocab, hidden),
            w_input: Mat::zeros(2 * hidden, hidden),
            w_forget: Mat::zeros(2 * hidden, hidden),
            w_output: Mat::zeros(2 * hidden, hidden),
            w_cell: Mat::zeros(2 * hidden, hidden),
            b_input: vec![T::ZERO; hidden],
            b_forget: vec![T::ZERO; hidden],
            b_output: vec![T::ZERO; hidden],
            b_cell: vec![T::ZERO; hidden],
            w_proj: Mat::zeros(hidden, vocab),
            b_proj: vec![T::ZERO; vocab],
        }
    }

    /// Uniform(-scale, scale) weights, zero biases.
    pub fn init(hidden: usize, vocab: usize, rng: &mut Rng, scale: f64) -> Self {
        let mut p = Self::zeros(hidden, vocab);
        for (_, block) in p.weight_blocks_mut() {
            for v in block {
                *v = T::from_f64(rng.uniform(-scale, scale));
            }
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden, self.vocab)
    }

    fn weight_blocks_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        vec![
            ("embed", &mut self.embed.data[..]),
            ("w_input", &mut self.w_input.data[..]),
            ("w_forget", &mut self.w_forget.data[..]),
            ("w_output", &mut self.w_output.data[..]),
            ("w_cell", &mut self.w_cell.data[..]),
            ("w_proj", &mut self.w_proj.data[..]),
        ]
    }

    /// Every parameter block, in a fixed order.
    pub fn blocks(&self) -> Vec<(&'static str, &[T])> {
        vec![
            ("embed", &self.embed.data[..]),
            ("w_input", &self.w_input.data[..]),
            ("w_forget", &self.w_forget.data[..]),
            ("w_output", &self.w_output.data[..]),
            ("w_cell", &self.w_cell.data[..]),
            ("b_input", &self.b_input[..]),
            ("b_forget", &self.b_forget[..]),
            ("b_output", &self.b_output[..]),
            ("b_cell", &self.b_cell[..]),
            ("w_proj", &self.w_proj.data[..]),
            ("b_proj", &self.b_proj[..]),
        ]
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        vec![
            ("embed", &mut self.embed.data[..]),
            ("w_input", &mut self.w_input.data[..]),
            ("w_forget", &mut self.w_forget.data[..]),
            ("w_output", &mut self.w_output.data[..]),
            ("w_cell", &mut self.w_cell.data[..]),
            ("b_input", &mut self.b_input[..]),
            ("b_forget", &mut self.b_forget[..]),
            ("b_output", &mut self.b_output[..]),
            ("b_cell", &mut self.b_cell[..]),
            ("w_proj", &mut self.w_proj.data[..]),
            ("b_proj", &mut self.b_proj[..]),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }
}

/// One step of the cell for a single sample. Used for scoring and in tests;
/// training goes through the batched path below.
pub fn lstm_step<T: Scalar>(
    p: &LstmParams<T>,
    h_prev: &[T],
    c_prev: &[T],
    input_id: u32,
) -> Result<(Vec<T>, Vec<T>), NeuralError> {
    let k = p.hidden;
    assert_eq!(h_prev.len(), k);
    assert_eq!(c_prev.len(), k);
    if h_prev.iter().chain(c_prev).any(|v| !v.is_finite()) {
        return Err(NeuralError::NonFiniteState(
            "non-finite input state".to_string(),
        ));
    }
    let x = p.embed.row(input_id as usize);
    let mut h = vec![T::ZERO; k];
    let mut c = vec![T::ZERO; k];
    for j in 0..k {
        let mut a_i = p.b_input[j];
        let mut a_f = p.b_forget[j];
        let mut a_o = p.b_output[j];
        let mut a_g = p.b_cell[j];
        for (idx, &z) in h_prev.iter().chain(x).enumerate() {
            a_i += z * p.w_input.data[idx * k + j];
            a_f += z * p.w_forget.data[idx * k + j];
            a_o += z * p.w_output.data[idx * k + j];
            a_g += z * p.w_cell.data[idx * k + j];
        }
        let gate_i = sigmoid(a_i);
        let gate_f = sigmoid(a_f);
        let gate_o = sigmoid(a_o);
        let cand = a_g.tanh();
        c[j] = gate_f * c_prev[j] + gate_i * cand;
        h[j] = gate_o * c[j].tanh();
    }
    if h.iter().chain(&c).any(|v| !v.is_finite()) {
        return Err(NeuralError::NonFiniteState(format!(
            "non-finite state after step on input {input_id}"
        )));
    }
    Ok((h, c))
}

/// Probability distribution over the vocabulary given a hidden state.
pub fn vocab_dist<T: Scalar>(p: &LstmParams<T>, h: &[T]) -> Vec<T> {
    let (k, v) = (p.hidden, p.vocab);
    assert_eq!(h.len(), k);
    let mut logits = p.b_proj.clone();
    for (idx, &hv) in h.iter().enumerate() {
        let row = &p.w_proj.data[idx * v..(idx + 1) * v];
        for (l, &w) in logits.iter_mut().zip(row) {
            *l += hv * w;
        }
    }
    softmax_in_place(&mut logits);
    logits
}

pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let mut max = row[0];
    for &v in row.iter() {
        if v > max {
            max = v;
        }
    }
    let mut sum = T::ZERO;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

// ---------------------------------------------------------------------------
// Batched forward/backward over cached steps.

pub(crate) struct StepCache<T> {
    pub ids: Vec<u32>,
    /// B×2K: `[h_prev ; x]` with input dropout already applied to x.
    pub z: Mat<T>,
    pub gate_i: Mat<T>,
    pub gate_f: Mat<T>,
    pub gate_o: Mat<T>,
    pub gate_g: Mat<T>,
    /// Blended cell state entering this step.
    pub c_prev: Mat<T>,
    /// tanh of the candidate cell state.
    pub tc: Mat<T>,
    /// 1 = step active for this batch row, 0 = padding (state passes through).
    pub step_mask: Option<Vec<T>>,
    /// Input dropout mask (entries 0 or 1/keep).
    pub in_drop: Option<Mat<T>>,
}

/// Run one batched step, updating `h`/`c` in place and returning the cache
/// needed for backprop.
pub(crate) fn forward_step<T: Scalar>(
    p: &LstmParams<T>,
    h: &mut Mat<T>,
    c: &mut Mat<T>,
    ids: &[u32],
    step_mask: Option<Vec<T>>,
    in_drop: Option<Mat<T>>,
) -> StepCache<T> {
    let (b, k) = (ids.len(), p.hidden);
    debug_assert_eq!(h.rows, b);
    let mut z = Mat::zeros(b, 2 * k);
    for (row, &id) in ids.iter().enumerate() {
        z.row_mut(row)[..k].copy_from_slice(h.row(row));
        let x = p.embed.row(id as usize);
        let dst = &mut z.row_mut(row)[k..];
        dst.copy_from_slice(x);
        if let Some(mask) = &in_drop {
            for (d, &m) in dst.iter_mut().zip(mask.row(row)) {
                *d *= m;
            }
        }
    }
    let gate = |w: &Mat<T>, bias: &[T]| -> Mat<T> {
        let mut pre = Mat::zeros(b, k);
        pre.add_matmul_nn(&z, w);
        pre.add_bias(bias);
        pre
    };
    let mut gate_i = gate(&p.w_input, &p.b_input);
    let mut gate_f = gate(&p.w_forget, &p.b_forget);
    let mut gate_o = gate(&p.w_output, &p.b_output);
    let mut gate_g = gate(&p.w_cell, &p.b_cell);
    gate_i.data.iter_mut().for_each(|v| *v = sigmoid(*v));
    gate_f.data.iter_mut().for_each(|v| *v = sigmoid(*v));
    gate_o.data.iter_mut().for_each(|v| *v = sigmoid(*v));
    gate_g.data.iter_mut().for_each(|v| *v = v.tanh());

    let c_prev = c.clone();
    let mut tc = Mat::zeros(b, k);
    for i in 0..b * k {
        let c_new = gate_f.data[i] * c_prev.data[i] + gate_i.data[i] * gate_g.data[i];
        let h_new = gate_o.data[i] * c_new.tanh();
        tc.data[i] = c_new.tanh();
        let row = i / k;
        let keep = step_mask.as_ref().map_or(T::ONE, |m| m[row]);
        c.data[i] = keep * c_new + (T::ONE - keep) * c_prev.data[i];
        h.data[i] = keep * h_new + (T::ONE - keep) * z.data[row * 2 * k + i % k];
    }
    StepCache {
        ids: ids.to_vec(),
        z,
        gate_i,
        gate_f,
        gate_o,
        gate_g,
        c_prev,
        tc,
        step_mask,
        in_drop,
    }
}

pub(crate) struct PredCache<T> {
    /// Hidden state fed to the projection (output dropout applied).
    pub h_used: Mat<T>,
    /// Softmax probabilities, B×V.
    pub probs: Mat<T>,
    pub targets: Vec<u32>,
    pub tmask: Vec<T>,
    pub out_drop: Option<Mat<T>>,
}

/// Project hidden states and accumulate the masked NLL.
pub(crate) fn forward_predict<T: Scalar>(
    p: &LstmParams<T>,
    h: &Mat<T>,
    out_drop: Option<Mat<T>>,
    targets: &[u32],
    tmask: Vec<T>,
) -> (PredCache<T>, f64, usize) {
    let (b, v) = (h.rows, p.vocab);
    let mut h_used = h.clone();
    if let Some(mask) = &out_drop {
        for (x, &m) in h_used.data.iter_mut().zip(&mask.data) {
            *x *= m;
        }
    }
    let mut probs = Mat::zeros(b, v);
    probs.add_matmul_nn(&h_used, &p.w_proj);
    probs.add_bias(&p.b_proj);
    let mut loss = 0.0f64;
    let mut n = 0usize;
    for row in 0..b {
        softmax_in_place(probs.row_mut(row));
        if tmask[row] > T::ZERO {
            // Clamp away exact zeros from f32 underflow before the log.
            let p = probs.row(row)[targets[row] as usize]
                .to_f64()
                .max(f64::MIN_POSITIVE);
            loss -= p.ln();
            n += 1;
        }
    }
    (
        PredCache {
            h_used,
            probs,
            targets: targets.to_vec(),
            tmask,
            out_drop,
        },
        loss,
        n,
    )
}

/// Backprop through a cached sequence. `preds[t]`, when present, is the
/// prediction made from the state after step `t`. Returns gradients w.r.t.
/// the initial state. `dh_final`/`dc_final` inject gradient into the final
/// state (the seq2seq handoff).
pub(crate) fn backward_sequence<T: Scalar>(
    p: &LstmParams<T>,
    steps: &[StepCache<T>],
    preds: &[Option<PredCache<T>>],
    grads: &mut LstmParams<T>,
    dh_final: Option<&Mat<T>>,
    dc_final: Option<&Mat<T>>,
) -> (Mat<T>, Mat<T>) {
    assert_eq!(steps.len(), preds.len());
    let k = p.hidden;
    let b = steps.first().map_or(0, |s| s.z.rows);
    let mut dh = Mat::zeros(b, k);
    let mut dc = Mat::zeros(b, k);
    if let Some(extra) = dh_final {
        for (d, &e) in dh.data.iter_mut().zip(&extra.data) {
            *d += e;
        }
    }
    if let Some(extra) = dc_final {
        for (d, &e) in dc.data.iter_mut().zip(&extra.data) {
            *d += e;
        }
    }

    for t in (0..steps.len()).rev() {
        let step = &steps[t];
        // Prediction gradient flows into h_t.
        if let Some(pred) = &preds[t] {
            let v = p.vocab;
            let mut dlogits = pred.probs.clone();
            for row in 0..b {
                let m = pred.tmask[row];
                let target = pred.targets[row] as usize;
                let drow = dlogits.row_mut(row);
                if m > T::ZERO {
                    drow[target] -= T::ONE;
                } else {
                    drow.iter_mut().for_each(|x| *x = T::ZERO);
                }
            }
            grads.w_proj.add_matmul_tn(&pred.h_used, &dlogits);
            for row in 0..b {
                for (g, &d) in grads.b_proj.iter_mut().zip(dlogits.row(row)) {
                    *g += d;
                }
            }
            let mut dh_pred = Mat::zeros(b, k);
            dh_pred.add_matmul_nt(&dlogits, &p.w_proj);
            let _ = v;
            if let Some(mask) = &pred.out_drop {
                for (d, &m) in dh_pred.data.iter_mut().zip(&mask.data) {
                    *d *= m;
                }
            }
            for (d, &e) in dh.data.iter_mut().zip(&dh_pred.data) {
                *d += e;
            }
        }

        // Split the blend: masked rows pass gradient straight through.
        let mut dh_new = dh.clone();
        let mut dc_new = dc.clone();
        let mut dh_prev = Mat::zeros(b, k);
        let mut dc_prev = Mat::zeros(b, k);
        if let Some(mask) = &step.step_mask {
            for row in 0..b {
                let m = mask[row];
                let inv = T::ONE - m;
                for j in 0..k {
                    let idx = row * k + j;
                    dh_prev.data[idx] = inv * dh.data[idx];
                    dc_prev.data[idx] = inv * dc.data[idx];
                    dh_new.data[idx] = m * dh.data[idx];
                    dc_new.data[idx] = m * dc.data[idx];
                }
            }
        }

        // Cell backward.
        let mut da_i = Mat::zeros(b, k);
        let mut da_f = Mat::zeros(b, k);
        let mut da_o = Mat::zeros(b, k);
        let mut da_g = Mat::zeros(b, k);
        for i in 0..b * k {
            let tc = step.tc.data[i];
            let gate_o = step.gate_o.data[i];
            let gate_i = step.gate_i.data[i];
            let gate_f = step.gate_f.data[i];
            let gate_g = step.gate_g.data[i];
            let d_out = dh_new.data[i] * tc;
            let d_tc = dh_new.data[i] * gate_o;
            let d_cell = dc_new.data[i] + d_tc * (T::ONE - tc * tc);
            let d_in = d_cell * gate_g;
            let d_g = d_cell * gate_i;
            let d_f = d_cell * step.c_prev.data[i];
            dc_prev.data[i] += d_cell * gate_f;
            da_i.data[i] = d_in * gate_i * (T::ONE - gate_i);
            da_f.data[i] = d_f * gate_f * (T::ONE - gate_f);
            da_o.data[i] = d_out * gate_o * (T::ONE - gate_o);
            da_g.data[i] = d_g * (T::ONE - gate_g * gate_g);
        }

        let mut dz = Mat::zeros(b, 2 * k);
        for (da, w, gw, gb) in [
            (&da_i, &p.w_input, &mut grads.w_input, &mut grads.b_input),
            (&da_f, &p.w_forget, &mut grads.w_forget, &mut grads.b_forget),
            (&da_o, &p.w_output, &mut grads.w_output, &mut grads.b_output),
            (&da_g, &p.w_cell, &mut grads.w_cell, &mut grads.b_cell),
        ] {
            gw.add_matmul_tn(&step.z, da);
            for row in 0..b {
                for (g, &d) in gb.iter_mut().zip(da.row(row)) {
                    *g += d;
                }
            }
            dz.add_matmul_nt(da, w);
        }

        for row in 0..b {
            let zrow = dz.row(row);
            for j in 0..k {
                dh_prev.data[row * k + j] += zrow[j];
            }
            let id = step.ids[row] as usize;
            let erow = grads.embed.row_mut(id);
            for j in 0..k {
                let mut dx = zrow[k + j];
                if let Some(mask) = &step.in_drop {
                    dx *= mask.row(row)[j];
                }
                erow[j] += dx;
            }
        }
        dh = dh_prev;
        dc = dc_prev;
    }
    (dh, dc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_state() {
        let p = LstmParams::<f64>::zeros(4, 6);
        let (h, c) = lstm_step(&p, &[0.0; 4], &[0.0; 4], 2).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
    }

    #[test]
    fn saturated_forget_gate_is_pure_memory() {
        let mut p = LstmParams::<f64>::zeros(3, 5);
        p.b_forget = vec![50.0; 3];
        let c_prev = vec![0.25, -0.5, 1.5];
        let (_, c) = lstm_step(&p, &[0.0; 3], &c_prev, 1).unwrap();
        for (got, want) in c.iter().zip(&c_prev) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn non_finite_state_is_an_error() {
        let p = LstmParams::<f64>::zeros(2, 4);
        let err = lstm_step(&p, &[f64::NAN, 0.0], &[0.0; 2], 0).unwrap_err();
        assert!(matches!(err, NeuralError::NonFiniteState(_)));
    }

    #[test]
    fn vocab_dist_uniform_for_zero_weights() {
        let p = LstmParams::<f64>::zeros(3, 8);
        let dist = vocab_dist(&p, &[0.3, -0.2, 0.9]);
        for v in dist {
            assert!((v - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn vocab_dist_closed_form() {
        // logits [ln 2, 0] -> [2/3, 1/3]
        let mut p = LstmParams::<f64>::zeros(1, 2);
        p.b_proj = vec![2.0f64.ln(), 0.0];
        let dist = vocab_dist(&p, &[0.0]);
        assert!((dist[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((dist[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_translation_invariance() {
        let mut p = LstmParams::<f64>::zeros(1, 3);
        p.b_proj = vec![0.1, 0.7, -0.4];
        let a = vocab_dist(&p, &[0.0]);
        p.b_proj = vec![5.1, 5.7, 4.6];
        let b = vocab_dist(&p, &[0.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn batched_step_matches_single_sample() {
        let mut rng = Rng::new(11);
        let p = LstmParams::<f64>::init(5, 9, &mut rng, 0.4);
        let ids = [3u32, 7u32];
        let mut h = Mat::zeros(2, 5);
        let mut c = Mat::zeros(2, 5);
        h.row_mut(0).copy_from_slice(&[0.1, -0.2, 0.3, 0.0, 0.5]);
        c.row_mut(1).copy_from_slice(&[0.4, 0.0, -0.1, 0.2, 0.0]);
        let h_before: Vec<Vec<f64>> = (0..2).map(|r| h.row(r).to_vec()).collect();
        let c_before: Vec<Vec<f64>> = (0..2).map(|r| c.row(r).to_vec()).collect();
        forward_step(&p, &mut h, &mut c, &ids, None, None);
        for row in 0..2 {
            let (hs, cs) = lstm_step(&p, &h_before[row], &c_before[row], ids[row]).unwrap();
            for j in 0..5 {
                assert!((h.row(row)[j] - hs[j]).abs() < 1e-12);
                assert!((c.row(row)[j] - cs[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vocab_dist_fuzz_sums_to_one_and_positive() {
        let mut rng = Rng::new(77);
        let p = LstmParams::<f64>::init(6, 17, &mut rng, 0.8);
        for _ in 0..1000 {
            let h: Vec<f64> = (0..6).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let dist = vocab_dist(&p, &h);
            let sum: f64 = dist.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6, "sum {sum}");
            assert!(dist.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn masked_step_passes_state_through() {
        let mut rng = Rng::new(5);
        let p = LstmParams::<f64>::init(4, 6, &mut rng, 0.3);
        let mut h = Mat::zeros(2, 4);
        let mut c = Mat::zeros(2, 4);
        h.row_mut(0).copy_from_slice(&[0.5, 0.1, -0.3, 0.2]);
        c.row_mut(0).copy_from_slice(&[0.9, -0.7, 0.0, 0.4]);
        let h0 = h.row(0).to_vec();
        let c0 = c.row(0).to_vec();
        forward_step(&p, &mut h, &mut c, &[1, 2], Some(vec![0.0, 1.0]), None);
        assert_eq!(h.row(0), &h0[..]);
        assert_eq!(c.row(0), &c0[..]);
        assert_ne!(h.row(1), &[0.0; 4][..]);
    }
}
