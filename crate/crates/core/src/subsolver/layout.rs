//! Real parametrization of the subproblem variables.
//!
//! A transmit factor `Q~` (`m_i x m_i` complex) occupies `2 m_i^2` reals,
//! entry `(r, c)` at `2 (r m_i + c)` (real part) and `2 (r m_i + c) + 1`
//! (imaginary part). A quantizer covariance `Omega` (`m_a x m_a` Hermitian)
//! occupies `m_a^2` reals: the diagonal first, then the real and imaginary
//! parts of each upper-triangle entry in row-major order.

use num_complex::Complex64;

use crate::matrixcore::{ComplexMatrix, HermitianMatrix};
use crate::phymodel::{BitSplit, Forwarding, QuantizerCovariances, TransmitCovariances};
use crate::scenario::{Scenario, Scheme};

use super::PrimalPoint;

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub scheme: Scheme,
    pub forwarding: Forwarding,
    pub n_ids: usize,
    pub n_aps: usize,
    pub m_i: usize,
    pub m_a: usize,
    pub(crate) bits_per_model: f64,
    pub(crate) noise: f64,
    pub q_edge: Option<usize>,
    pub q_cloud: Option<usize>,
    pub omega: Option<usize>,
    pub r_edge: Option<usize>,
    pub r_cloud: Option<usize>,
    pub r_front: Option<usize>,
    pub mu: Option<usize>,
    pub d_edge: Option<usize>,
    pub d_cloud: Option<usize>,
    pub tau_c: usize,
    pub tau_w: usize,
    pub tau_f: usize,
    pub tau_total: usize,
    pub eta_l: usize,
    pub n_l: usize,
    pub n_g: usize,
    pub len: usize,
}

/// Reals per transmit factor.
pub fn q_block_len(m_i: usize) -> usize {
    2 * m_i * m_i
}

/// Reals per quantizer covariance.
pub fn omega_block_len(m_a: usize) -> usize {
    m_a * m_a
}

/// Basis matrices `B_p` with `Omega = sum_p z_p B_p`.
pub fn hermitian_basis(m: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(m * m);
    for d in 0..m {
        let mut b = ComplexMatrix::zeros(m, m);
        b.set(d, d, Complex64::new(1.0, 0.0));
        out.push(b);
    }
    for p in 0..m {
        for q in (p + 1)..m {
            let mut re = ComplexMatrix::zeros(m, m);
            re.set(p, q, Complex64::new(1.0, 0.0));
            re.set(q, p, Complex64::new(1.0, 0.0));
            out.push(re);
            let mut im = ComplexMatrix::zeros(m, m);
            im.set(p, q, Complex64::new(0.0, 1.0));
            im.set(q, p, Complex64::new(0.0, -1.0));
            out.push(im);
        }
    }
    out
}

pub fn pack_factor(f: &ComplexMatrix, out: &mut [f64]) {
    let m = f.rows();
    for r in 0..m {
        for c in 0..m {
            let z = f.get(r, c);
            out[2 * (r * m + c)] = z.re;
            out[2 * (r * m + c) + 1] = z.im;
        }
    }
}

pub fn unpack_factor(m: usize, z: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(m, m, |r, c| Complex64::new(z[2 * (r * m + c)], z[2 * (r * m + c) + 1]))
}

pub fn pack_hermitian(h: &HermitianMatrix, out: &mut [f64]) {
    let m = h.dim();
    for d in 0..m {
        out[d] = h.get(d, d).re;
    }
    let mut o = m;
    for p in 0..m {
        for q in (p + 1)..m {
            let z = h.get(p, q);
            out[o] = z.re;
            out[o + 1] = z.im;
            o += 2;
        }
    }
}

pub fn unpack_hermitian(m: usize, z: &[f64]) -> HermitianMatrix {
    let mut a = ComplexMatrix::zeros(m, m);
    for d in 0..m {
        a.set(d, d, Complex64::new(z[d], 0.0));
    }
    let mut o = m;
    for p in 0..m {
        for q in (p + 1)..m {
            a.set(p, q, Complex64::new(z[o], z[o + 1]));
            a.set(q, p, Complex64::new(z[o], -z[o + 1]));
            o += 2;
        }
    }
    HermitianMatrix::new(a).expect("constructed Hermitian")
}

impl Layout {
    pub fn new(s: &Scenario, scheme: Scheme, forwarding: Forwarding) -> Self {
        let forwarding = if scheme.has_cloud() {
            Forwarding::Quantized
        } else {
            forwarding
        };
        let (ni, na, mi, ma) = (s.n_ids(), s.n_aps(), s.m_i(), s.m_a());
        let mut len = 0;
        let mut take = |count: usize| {
            let o = len;
            len += count;
            o
        };
        let q_edge = scheme.has_edge().then(|| take(ni * q_block_len(mi)));
        let q_cloud = scheme.has_cloud().then(|| take(ni * q_block_len(mi)));
        let quantized = forwarding == Forwarding::Quantized;
        let omega = quantized.then(|| take(na * omega_block_len(ma)));
        let r_edge = scheme.has_edge().then(|| take(ni));
        let r_cloud = scheme.has_cloud().then(|| take(ni));
        let r_front = quantized.then(|| take(na));
        let mu = quantized.then(|| take(na));
        let split = scheme == Scheme::RateSplit;
        let d_edge = split.then(|| take(ni));
        let d_cloud = split.then(|| take(ni));
        let tau_c = take(1);
        let tau_w = take(1);
        let tau_f = take(1);
        let tau_total = take(1);
        let eta_l = take(1);
        let n_l = take(1);
        let n_g = take(1);
        Self {
            scheme,
            forwarding,
            n_ids: ni,
            n_aps: na,
            m_i: mi,
            m_a: ma,
            bits_per_model: s.fl.bits_per_model,
            noise: s.noise(),
            q_edge,
            q_cloud,
            omega,
            r_edge,
            r_cloud,
            r_front,
            mu,
            d_edge,
            d_cloud,
            tau_c,
            tau_w,
            tau_f,
            tau_total,
            eta_l,
            n_l,
            n_g,
            len,
        }
    }

    pub fn q_block(&self, edge: bool, k: usize) -> Option<usize> {
        let base = if edge { self.q_edge } else { self.q_cloud };
        base.map(|b| b + k * q_block_len(self.m_i))
    }

    pub fn omega_block(&self, i: usize) -> Option<usize> {
        self.omega.map(|b| b + i * omega_block_len(self.m_a))
    }

    pub fn rate(&self, edge: bool, k: usize) -> Option<usize> {
        let base = if edge { self.r_edge } else { self.r_cloud };
        base.map(|b| b + k)
    }

    pub fn bits(&self, edge: bool, k: usize) -> Option<usize> {
        let base = if edge { self.d_edge } else { self.d_cloud };
        base.map(|b| b + k)
    }

    /// Fixed bit count of a split that is not a variable.
    pub fn frozen_bits(&self, edge: bool) -> f64 {
        match (self.scheme, edge) {
            (Scheme::EdgeOnly, true) | (Scheme::CloudOnly, false) => self.bits_per_model,
            _ => 0.0,
        }
    }

    /// Pairs `(d_E,k, d_C,k)` tied by `d_E,k + d_C,k = d_k`.
    pub fn equality_pairs(&self) -> Vec<(usize, usize)> {
        match (self.d_edge, self.d_cloud) {
            (Some(e), Some(c)) => (0..self.n_ids).map(|k| (e + k, c + k)).collect(),
            _ => Vec::new(),
        }
    }

    /// Identifies each variable group covering index `j` (for scaling and
    /// diagnostics).
    pub fn group_of(&self, j: usize) -> VarGroup {
        let in_range = |o: Option<usize>, n: usize| o.is_some_and(|o| j >= o && j < o + n);
        let qn = self.n_ids * q_block_len(self.m_i);
        if in_range(self.q_edge, qn) || in_range(self.q_cloud, qn) {
            VarGroup::TransmitFactor
        } else if in_range(self.omega, self.n_aps * omega_block_len(self.m_a)) {
            VarGroup::Quantizer
        } else {
            VarGroup::Scalar
        }
    }

    pub fn pack(&self, x: &PrimalPoint) -> Vec<f64> {
        let mut v = vec![0.0; self.len];
        let qb = q_block_len(self.m_i);
        let ob = omega_block_len(self.m_a);
        for k in 0..self.n_ids {
            if let Some(o) = self.q_block(true, k) {
                pack_factor(&x.q.edge[k], &mut v[o..o + qb]);
            }
            if let Some(o) = self.q_block(false, k) {
                pack_factor(&x.q.cloud[k], &mut v[o..o + qb]);
            }
            if let Some(o) = self.rate(true, k) {
                v[o] = x.r_e[k];
            }
            if let Some(o) = self.rate(false, k) {
                v[o] = x.r_c[k];
            }
            if let Some(o) = self.bits(true, k) {
                v[o] = x.bits.edge[k];
            }
            if let Some(o) = self.bits(false, k) {
                v[o] = x.bits.cloud[k];
            }
        }
        for i in 0..self.n_aps {
            if let Some(o) = self.omega_block(i) {
                pack_hermitian(&x.w.omega[i], &mut v[o..o + ob]);
            }
            if let Some(o) = self.r_front {
                v[o + i] = x.r_f[i];
            }
            if let Some(o) = self.mu {
                v[o + i] = x.mu_f[i];
            }
        }
        v[self.tau_c] = x.tau_c;
        v[self.tau_w] = x.tau_w;
        v[self.tau_f] = x.tau_f;
        v[self.tau_total] = x.tau_total;
        v[self.eta_l] = x.eta_l;
        v[self.n_l] = x.n_l;
        v[self.n_g] = x.n_g;
        v
    }

    pub fn unpack(&self, v: &[f64]) -> PrimalPoint {
        assert_eq!(v.len(), self.len);
        let qb = q_block_len(self.m_i);
        let ob = omega_block_len(self.m_a);
        let mut q = TransmitCovariances::zeros(self.n_ids, self.m_i);
        let mut bits = BitSplit {
            edge: vec![self.frozen_bits(true); self.n_ids],
            cloud: vec![self.frozen_bits(false); self.n_ids],
        };
        let mut r_e = vec![0.0; self.n_ids];
        let mut r_c = vec![0.0; self.n_ids];
        for k in 0..self.n_ids {
            if let Some(o) = self.q_block(true, k) {
                q.edge[k] = unpack_factor(self.m_i, &v[o..o + qb]);
            }
            if let Some(o) = self.q_block(false, k) {
                q.cloud[k] = unpack_factor(self.m_i, &v[o..o + qb]);
            }
            if let Some(o) = self.rate(true, k) {
                r_e[k] = v[o];
            }
            if let Some(o) = self.rate(false, k) {
                r_c[k] = v[o];
            }
            if let Some(o) = self.bits(true, k) {
                bits.edge[k] = v[o];
            }
            if let Some(o) = self.bits(false, k) {
                bits.cloud[k] = v[o];
            }
        }
        let w = QuantizerCovariances {
            omega: (0..self.n_aps)
                .map(|i| match self.omega_block(i) {
                    Some(o) => unpack_hermitian(self.m_a, &v[o..o + ob]),
                    None => HermitianMatrix::scaled_identity(self.m_a, self.noise),
                })
                .collect(),
        };
        let per_ap = |base: Option<usize>| -> Vec<f64> {
            (0..self.n_aps).map(|i| base.map_or(0.0, |o| v[o + i])).collect()
        };
        PrimalPoint {
            q,
            w,
            bits,
            r_e,
            r_c,
            r_f: per_ap(self.r_front),
            mu_f: per_ap(self.mu),
            tau_c: v[self.tau_c],
            tau_w: v[self.tau_w],
            tau_f: v[self.tau_f],
            tau_total: v[self.tau_total],
            eta_l: v[self.eta_l],
            n_l: v[self.n_l],
            n_g: v[self.n_g],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarGroup {
    TransmitFactor,
    Quantizer,
    Scalar,
}
