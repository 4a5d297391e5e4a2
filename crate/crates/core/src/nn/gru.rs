//! Single gated recurrent cell with sigmoid gates and a tanh candidate.
//!
//! h_t = (1 - z_t) * h_{t-1} + z_t * c_t, with update gate z, reset gate r
//! and candidate c = tanh(Wh x + Uh (r * h_{t-1}) + bh). Backward-through-
//! time supports an upstream gradient on the final hidden state, which is
//! all the sequence consumers in this crate need.

use alloc::vec;
use alloc::vec::Vec;

use super::{init_weight_region, ParamVector};
use crate::math::{sigmoid, tanh};
use crate::rng::DetRng;

/// Parameter layout: Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh — each W is
/// input*hidden (input index major), each U hidden*hidden, each b hidden.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GruSpec {
    pub input: usize,
    pub hidden: usize,
}

pub struct GruCache {
    xs: Vec<Vec<f64>>,
    hs: Vec<Vec<f64>>, // h_0 .. h_T (T+1 entries)
    zs: Vec<Vec<f64>>,
    rs: Vec<Vec<f64>>,
    cs: Vec<Vec<f64>>,
}

struct Gates<'a> {
    wz: &'a [f64],
    uz: &'a [f64],
    bz: &'a [f64],
    wr: &'a [f64],
    ur: &'a [f64],
    br: &'a [f64],
    wh: &'a [f64],
    uh: &'a [f64],
    bh: &'a [f64],
}

impl GruSpec {
    pub fn param_count(&self) -> usize {
        3 * (self.input * self.hidden + self.hidden * self.hidden + self.hidden)
    }

    pub fn init(&self, rng: &mut DetRng) -> ParamVector {
        let mut p = ParamVector::zeros(self.param_count());
        let data = p.as_mut_slice();
        let (iw, hw) = (self.input * self.hidden, self.hidden * self.hidden);
        let block = iw + hw + self.hidden;
        for g in 0..3 {
            let off = g * block;
            init_weight_region(&mut data[off..off + iw], self.input, self.hidden, rng);
            init_weight_region(
                &mut data[off + iw..off + iw + hw],
                self.hidden,
                self.hidden,
                rng,
            );
        }
        p
    }

    fn gates<'a>(&self, data: &'a [f64]) -> Gates<'a> {
        let (iw, hw, h) = (
            self.input * self.hidden,
            self.hidden * self.hidden,
            self.hidden,
        );
        let block = iw + hw + h;
        Gates {
            wz: &data[0..iw],
            uz: &data[iw..iw + hw],
            bz: &data[iw + hw..block],
            wr: &data[block..block + iw],
            ur: &data[block + iw..block + iw + hw],
            br: &data[block + iw + hw..2 * block],
            wh: &data[2 * block..2 * block + iw],
            uh: &data[2 * block + iw..2 * block + iw + hw],
            bh: &data[2 * block + iw + hw..3 * block],
        }
    }

    /// Runs the cell over `xs` starting from a zero hidden state. Returns
    /// the final hidden state and the cache for backward.
    pub fn forward_seq(&self, params: &[f64], xs: &[Vec<f64>]) -> (Vec<f64>, GruCache) {
        debug_assert_eq!(params.len(), self.param_count());
        let g = self.gates(params);
        let hdim = self.hidden;
        let mut cache = GruCache {
            xs: xs.to_vec(),
            hs: vec![vec![0.0; hdim]],
            zs: Vec::with_capacity(xs.len()),
            rs: Vec::with_capacity(xs.len()),
            cs: Vec::with_capacity(xs.len()),
        };
        let mut h = vec![0.0; hdim];
        for x in xs {
            assert_eq!(x.len(), self.input, "gru input shape mismatch");
            let mut pre_z = g.bz.to_vec();
            let mut pre_r = g.br.to_vec();
            let mut pre_c = g.bh.to_vec();
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                for j in 0..hdim {
                    pre_z[j] += xi * g.wz[i * hdim + j];
                    pre_r[j] += xi * g.wr[i * hdim + j];
                    pre_c[j] += xi * g.wh[i * hdim + j];
                }
            }
            for (i, &hi) in h.iter().enumerate() {
                if hi == 0.0 {
                    continue;
                }
                for j in 0..hdim {
                    pre_z[j] += hi * g.uz[i * hdim + j];
                    pre_r[j] += hi * g.ur[i * hdim + j];
                }
            }
            let z: Vec<f64> = pre_z.iter().map(|&v| sigmoid(v)).collect();
            let r: Vec<f64> = pre_r.iter().map(|&v| sigmoid(v)).collect();
            for (i, &hi) in h.iter().enumerate() {
                let rh = r[i] * hi;
                if rh == 0.0 {
                    continue;
                }
                for j in 0..hdim {
                    pre_c[j] += rh * g.uh[i * hdim + j];
                }
            }
            let c: Vec<f64> = pre_c.iter().map(|&v| tanh(v)).collect();
            let mut h_new = vec![0.0; hdim];
            for j in 0..hdim {
                h_new[j] = (1.0 - z[j]) * h[j] + z[j] * c[j];
            }
            cache.zs.push(z);
            cache.rs.push(r);
            cache.cs.push(c);
            cache.hs.push(h_new.clone());
            h = h_new;
        }
        (h, cache)
    }

    /// BPTT for an upstream gradient on the final hidden state. Returns
    /// (parameter gradient, per-step input gradients).
    pub fn backward_seq(
        &self,
        params: &[f64],
        cache: &GruCache,
        upstream: &[f64],
    ) -> (Vec<f64>, Vec<Vec<f64>>) {
        let g = self.gates(params);
        let hdim = self.hidden;
        let steps = cache.xs.len();
        let mut grad = vec![0.0; params.len()];
        let mut dxs = vec![vec![0.0; self.input]; steps];
        let mut dh = upstream.to_vec();

        let (iw, hw) = (self.input * hdim, hdim * hdim);
        let block = iw + hw + hdim;

        for t in (0..steps).rev() {
            let x = &cache.xs[t];
            let h_prev = &cache.hs[t];
            let z = &cache.zs[t];
            let r = &cache.rs[t];
            let c = &cache.cs[t];

            let mut d_pre_z = vec![0.0; hdim];
            let mut d_pre_c = vec![0.0; hdim];
            let mut dh_prev = vec![0.0; hdim];
            for j in 0..hdim {
                d_pre_z[j] = dh[j] * (c[j] - h_prev[j]) * z[j] * (1.0 - z[j]);
                d_pre_c[j] = dh[j] * z[j] * (1.0 - c[j] * c[j]);
                dh_prev[j] = dh[j] * (1.0 - z[j]);
            }
            // d(r*h_prev)[i] = sum_j d_pre_c[j] * Uh[i,j]
            let mut d_rh = vec![0.0; hdim];
            for i in 0..hdim {
                let row = &g.uh[i * hdim..(i + 1) * hdim];
                let mut acc = 0.0;
                for j in 0..hdim {
                    acc += d_pre_c[j] * row[j];
                }
                d_rh[i] = acc;
            }
            let mut d_pre_r = vec![0.0; hdim];
            for i in 0..hdim {
                d_pre_r[i] = d_rh[i] * h_prev[i] * r[i] * (1.0 - r[i]);
                dh_prev[i] += d_rh[i] * r[i];
            }
            for i in 0..hdim {
                let (uz_row, ur_row) = (&g.uz[i * hdim..(i + 1) * hdim], &g.ur[i * hdim..(i + 1) * hdim]);
                let mut acc = 0.0;
                for j in 0..hdim {
                    acc += d_pre_z[j] * uz_row[j] + d_pre_r[j] * ur_row[j];
                }
                dh_prev[i] += acc;
            }
            // Parameter gradients.
            {
                let (gz, rest) = grad.split_at_mut(block);
                let (gr, gh) = rest.split_at_mut(block);
                accumulate_gate(gz, x, h_prev, &d_pre_z, hdim, iw, hw);
                accumulate_gate(gr, x, h_prev, &d_pre_r, hdim, iw, hw);
                // Candidate gate uses r*h_prev as its recurrent input.
                let rh: Vec<f64> = r.iter().zip(h_prev.iter()).map(|(&a, &b)| a * b).collect();
                accumulate_gate(gh, x, &rh, &d_pre_c, hdim, iw, hw);
            }
            // Input gradient.
            for i in 0..self.input {
                let (wz_row, wr_row, wh_row) = (
                    &g.wz[i * hdim..(i + 1) * hdim],
                    &g.wr[i * hdim..(i + 1) * hdim],
                    &g.wh[i * hdim..(i + 1) * hdim],
                );
                let mut acc = 0.0;
                for j in 0..hdim {
                    acc += d_pre_z[j] * wz_row[j] + d_pre_r[j] * wr_row[j] + d_pre_c[j] * wh_row[j];
                }
                dxs[t][i] = acc;
            }
            dh = dh_prev;
        }
        (grad, dxs)
    }
}

fn accumulate_gate(
    gate_grad: &mut [f64],
    x: &[f64],
    h_in: &[f64],
    d_pre: &[f64],
    hdim: usize,
    iw: usize,
    hw: usize,
) {
    let (gw, rest) = gate_grad.split_at_mut(iw);
    let (gu, gb) = rest.split_at_mut(hw);
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            let row = &mut gw[i * hdim..(i + 1) * hdim];
            for j in 0..hdim {
                row[j] += xi * d_pre[j];
            }
        }
    }
    for (i, &hi) in h_in.iter().enumerate() {
        if hi != 0.0 {
            let row = &mut gu[i * hdim..(i + 1) * hdim];
            for j in 0..hdim {
                row[j] += hi * d_pre[j];
            }
        }
    }
    for j in 0..hdim {
        gb[j] += d_pre[j];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_zero_input_gives_zero_state() {
        let spec = GruSpec {
            input: 3,
            hidden: 4,
        };
        let p = ParamVector::zeros(spec.param_count());
        let xs = alloc::vec![alloc::vec![0.0; 3]; 5];
        let (h, _) = spec.forward_seq(&p, &xs);
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sequence_order_matters() {
        let spec = GruSpec {
            input: 2,
            hidden: 3,
        };
        let mut rng = crate::rng::DetRng::seed_from(4);
        let p = spec.init(&mut rng);
        let a = alloc::vec![alloc::vec![1.0, 0.0], alloc::vec![0.0, 1.0]];
        let b = alloc::vec![alloc::vec![0.0, 1.0], alloc::vec![1.0, 0.0]];
        let (ha, _) = spec.forward_seq(&p, &a);
        let (hb, _) = spec.forward_seq(&p, &b);
        assert!(ha.iter().zip(hb.iter()).any(|(x, y)| (x - y).abs() > 1e-9));
    }
}
