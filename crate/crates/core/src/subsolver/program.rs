//! The convexified subproblem: constraints `g(z) <= 0` assembled from a small
//! set of convex term kinds, each with exact first and second derivatives.

use std::collections::HashMap;
use std::f64::consts::LN_2;

use nalgebra::DMatrix;

use crate::error::SolverError;
use crate::matrixcore::{logdet2, ComplexMatrix, HermitianMatrix};
use crate::phymodel::{fronthaul_ids, Forwarding};
use crate::sca::AuxPoint;
use crate::scenario::{Scenario, Scheme};

use super::layout::{hermitian_basis, omega_block_len, q_block_len, unpack_hermitian, Layout};

pub const RATE_FLOOR: f64 = 1.0;
pub const TAU_FLOOR: f64 = 1e-9;
pub const MU_FLOOR: f64 = 1e-9;
pub const ETA_FLOOR: f64 = 1e-6;
/// Quantizer floor relative to the noise power.
pub const OMEGA_FLOOR_REL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Epigraph,
    Compute,
    Wireless,
    FronthaulLatency,
    FronthaulRate,
    EdgeRate,
    CloudRate,
    Compression,
    LocalIterations,
    GlobalIterations,
    Power,
    BitSplit,
    Bound,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Epigraph => "epigraph",
            Family::Compute => "compute",
            Family::Wireless => "wireless",
            Family::FronthaulLatency => "fronthaul-latency",
            Family::FronthaulRate => "fronthaul-rate",
            Family::EdgeRate => "edge-rate",
            Family::CloudRate => "cloud-rate",
            Family::Compression => "compression",
            Family::LocalIterations => "local-iterations",
            Family::GlobalIterations => "global-iterations",
            Family::Power => "power",
            Family::BitSplit => "bit-split",
            Family::Bound => "bound",
        }
    }
}

/// A convex scalar function of the constraint's local variables.
#[derive(Debug, Clone)]
pub enum Term {
    Linear(Vec<(usize, f64)>),
    /// `1/2 x^T K x`.
    Quadratic { vars: Vec<usize>, k: DMatrix<f64> },
    /// `-coef sqrt(x)`.
    NegSqrt { var: usize, coef: f64 },
    /// `coef / x`.
    Reciprocal { var: usize, coef: f64 },
    /// `-coef ln x`.
    NegLog { var: usize, coef: f64 },
    /// `coef / (1 - x)`.
    ReciprocalComplement { var: usize, coef: f64 },
    /// `-coef ln det(Omega(x) - shift I)` over a Hermitian block.
    NegLogDet { vars: Vec<usize>, m: usize, coef: f64, shift: f64 },
}

/// Value, gradient and Hessian of a constraint over its support.
#[derive(Debug, Clone)]
pub struct LocalDerivs {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub family: Family,
    pub index: usize,
    pub constant: f64,
    /// Global variable indices; terms refer to positions in this list.
    pub support: Vec<usize>,
    pub terms: Vec<Term>,
}

fn neg_logdet_parts(x: &[f64], vars: &[usize], m: usize, shift: f64) -> Option<(f64, HermitianMatrix)> {
    let local: Vec<f64> = vars.iter().map(|&v| x[v]).collect();
    let omega = unpack_hermitian(m, &local).add_scaled_identity(-shift);
    let l = omega.cholesky().ok()?;
    let ln_det: f64 = (0..m).map(|d| 2.0 * l.get(d, d).re.ln()).sum();
    Some((ln_det, omega))
}

/// `tr(M B_p)` for each Hermitian basis element, `M` Hermitian.
pub fn hermitian_trace_coefs(mat: &ComplexMatrix) -> Vec<f64> {
    let m = mat.rows();
    let mut out = Vec::with_capacity(m * m);
    for d in 0..m {
        out.push(mat.get(d, d).re);
    }
    for p in 0..m {
        for q in (p + 1)..m {
            let z = mat.get(p, q);
            out.push(2.0 * z.re);
            out.push(2.0 * z.im);
        }
    }
    out
}

impl Term {
    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(match self {
            Term::Linear(c) => c.iter().map(|&(v, a)| a * x[v]).sum(),
            Term::Quadratic { vars, k } => {
                let mut s = 0.0;
                for (a, &va) in vars.iter().enumerate() {
                    let mut row = 0.0;
                    for (b, &vb) in vars.iter().enumerate() {
                        row += k[(a, b)] * x[vb];
                    }
                    s += x[va] * row;
                }
                0.5 * s
            }
            Term::NegSqrt { var, coef } => {
                if !(x[*var] >= 0.0) {
                    return None;
                }
                -coef * x[*var].sqrt()
            }
            Term::Reciprocal { var, coef } => {
                if !(x[*var] > 0.0) {
                    return None;
                }
                coef / x[*var]
            }
            Term::NegLog { var, coef } => {
                if !(x[*var] > 0.0) {
                    return None;
                }
                -coef * x[*var].ln()
            }
            Term::ReciprocalComplement { var, coef } => {
                if !(x[*var] < 1.0) {
                    return None;
                }
                coef / (1.0 - x[*var])
            }
            Term::NegLogDet { vars, m, coef, shift } => -coef * neg_logdet_parts(x, vars, *m, *shift)?.0,
        })
    }

    /// Adds the gradient into `grad` and returns the value.
    fn grad_into(&self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        match self {
            Term::Linear(c) => {
                let mut s = 0.0;
                for &(v, a) in c {
                    grad[v] += a;
                    s += a * x[v];
                }
                Some(s)
            }
            Term::Quadratic { vars, k } => {
                let mut s = 0.0;
                for (a, &va) in vars.iter().enumerate() {
                    let mut row = 0.0;
                    for (b, &vb) in vars.iter().enumerate() {
                        row += k[(a, b)] * x[vb];
                    }
                    grad[va] += row;
                    s += x[va] * row;
                }
                Some(0.5 * s)
            }
            Term::NegSqrt { var, coef } => {
                let v = x[*var];
                if !(v > 0.0) {
                    return None;
                }
                let r = v.sqrt();
                grad[*var] += -coef * 0.5 / r;
                Some(-coef * r)
            }
            Term::Reciprocal { var, coef } => {
                let v = x[*var];
                if !(v > 0.0) {
                    return None;
                }
                grad[*var] += -coef / (v * v);
                Some(coef / v)
            }
            Term::NegLog { var, coef } => {
                let v = x[*var];
                if !(v > 0.0) {
                    return None;
                }
                grad[*var] += -coef / v;
                Some(-coef * v.ln())
            }
            Term::ReciprocalComplement { var, coef } => {
                let u = 1.0 - x[*var];
                if !(u > 0.0) {
                    return None;
                }
                grad[*var] += coef / (u * u);
                Some(coef / u)
            }
            Term::NegLogDet { vars, m, coef, shift } => {
                let (ln_det, omega) = neg_logdet_parts(x, vars, *m, *shift)?;
                let s = omega.inverse().ok()?.into_matrix();
                let tr = hermitian_trace_coefs(&s);
                for (p, &vp) in vars.iter().enumerate() {
                    grad[vp] += -coef * tr[p];
                }
                Some(-coef * ln_det)
            }
        }
    }

    /// Calls `sink(a, b, scale * h_ab)` for the Hessian entries of the term.
    fn hess_into<F: FnMut(usize, usize, f64)>(&self, x: &[f64], scale: f64, sink: &mut F) -> Option<()> {
        match self {
            Term::Linear(_) => {}
            Term::Quadratic { vars, k } => {
                for (a, &va) in vars.iter().enumerate() {
                    for (b, &vb) in vars.iter().enumerate() {
                        let h = k[(a, b)];
                        if h != 0.0 {
                            sink(va, vb, scale * h);
                        }
                    }
                }
            }
            Term::NegSqrt { var, coef } => {
                let v = x[*var];
                sink(*var, *var, scale * coef * 0.25 / (v * v.sqrt()));
            }
            Term::Reciprocal { var, coef } => {
                let v = x[*var];
                sink(*var, *var, scale * 2.0 * coef / (v * v * v));
            }
            Term::NegLog { var, coef } => {
                let v = x[*var];
                sink(*var, *var, scale * coef / (v * v));
            }
            Term::ReciprocalComplement { var, coef } => {
                let u = 1.0 - x[*var];
                sink(*var, *var, scale * 2.0 * coef / (u * u * u));
            }
            Term::NegLogDet { vars, m, coef, shift } => {
                let (_, omega) = neg_logdet_parts(x, vars, *m, *shift)?;
                let s = omega.inverse().ok()?.into_matrix();
                let basis = hermitian_basis(*m);
                let sb: Vec<ComplexMatrix> = basis.iter().map(|b| &s * b).collect();
                for (p, &vp) in vars.iter().enumerate() {
                    for (q, &vq) in vars.iter().enumerate().skip(p) {
                        let h = scale * coef * (&sb[p] * &sb[q]).trace().re;
                        sink(vp, vq, h);
                        if p != q {
                            sink(vq, vp, h);
                        }
                    }
                }
            }
        }
        Some(())
    }
}

impl Constraint {
    pub(crate) fn gather(&self, z: &[f64]) -> Vec<f64> {
        self.support.iter().map(|&j| z[j]).collect()
    }

    /// `g(z)`, or `None` outside the domain of some term.
    pub fn value(&self, z: &[f64]) -> Option<f64> {
        let x = self.gather(z);
        let mut v = self.constant;
        for t in &self.terms {
            v += t.value(&x)?;
        }
        v.is_finite().then_some(v)
    }

    /// Value and local gradient at the gathered point `x`.
    pub(crate) fn value_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; x.len()];
        let mut value = self.constant;
        for t in &self.terms {
            value += t.grad_into(x, &mut grad)?;
        }
        value.is_finite().then_some((value, grad))
    }

    /// Feeds `scale` times the local Hessian at `x` to `sink`.
    pub(crate) fn hessian_into<F: FnMut(usize, usize, f64)>(&self, x: &[f64], scale: f64, sink: &mut F) -> Option<()> {
        for t in &self.terms {
            t.hess_into(x, scale, sink)?;
        }
        Some(())
    }

    pub fn derivs(&self, z: &[f64]) -> Option<LocalDerivs> {
        let x = self.gather(z);
        let (value, grad) = self.value_grad(&x)?;
        let n = x.len();
        let mut hess = DMatrix::zeros(n, n);
        self.hessian_into(&x, 1.0, &mut |a, b, v| hess[(a, b)] += v)?;
        Some(LocalDerivs { value, grad, hess })
    }

    pub fn is_linear(&self) -> bool {
        self.terms.iter().all(|t| matches!(t, Term::Linear(_)))
    }
}

/// The strict LMI `Omega_i - shift I > 0`, entering the barrier as
/// `-ln det(Omega_i - shift I)`.
#[derive(Debug, Clone)]
pub struct Lmi {
    pub index: usize,
    pub support: Vec<usize>,
    pub m: usize,
    pub shift: f64,
}

impl Lmi {
    fn term(&self) -> Term {
        Term::NegLogDet {
            vars: (0..self.support.len()).collect(),
            m: self.m,
            coef: 1.0,
            shift: self.shift,
        }
    }

    /// `ln det(Omega - shift I)`, `None` unless positive definite.
    pub fn ln_det(&self, z: &[f64]) -> Option<f64> {
        let x: Vec<f64> = self.support.iter().map(|&j| z[j]).collect();
        neg_logdet_parts(&x, &(0..x.len()).collect::<Vec<_>>(), self.m, self.shift).map(|p| p.0)
    }

    /// Derivatives of `-ln det(Omega - shift I)`.
    pub fn derivs(&self, z: &[f64]) -> Option<LocalDerivs> {
        let x: Vec<f64> = self.support.iter().map(|&j| z[j]).collect();
        let n = x.len();
        let term = self.term();
        let mut grad = vec![0.0; n];
        let value = term.grad_into(&x, &mut grad)?;
        let mut hess = DMatrix::zeros(n, n);
        term.hess_into(&x, 1.0, &mut |a, b, v| hess[(a, b)] += v)?;
        Some(LocalDerivs { value, grad, hess })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubproblemOptions {
    pub scheme: Scheme,
    pub forwarding: Forwarding,
    /// Sum decoded bits over every ID (not only those served by the AP) in
    /// the fronthaul-latency constraint.
    pub fronthaul_all_ids: bool,
}

impl SubproblemOptions {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            forwarding: Forwarding::Quantized,
            fronthaul_all_ids: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvexProgram {
    pub layout: Layout,
    pub options: SubproblemOptions,
    pub constraints: Vec<Constraint>,
    pub lmis: Vec<Lmi>,
}

impl ConvexProgram {
    pub fn objective(&self, z: &[f64]) -> f64 {
        z[self.layout.tau_total]
    }

    pub fn count(&self, family: Family) -> usize {
        self.constraints.iter().filter(|c| c.family == family).count()
    }

    /// Number of barrier terms, counting each LMI by its dimension.
    pub fn barrier_size(&self) -> usize {
        self.constraints.len() + self.lmis.iter().map(|l| l.m).sum::<usize>()
    }

    /// Whether `z` lies strictly inside every constraint and LMI.
    pub fn is_strictly_feasible(&self, z: &[f64]) -> bool {
        self.first_violation(z).is_none()
    }

    /// First constraint that is not strictly satisfied, with its value.
    pub fn first_violation(&self, z: &[f64]) -> Option<(Family, usize, f64)> {
        for c in &self.constraints {
            match c.value(z) {
                Some(v) if v < 0.0 => {}
                Some(v) => return Some((c.family, c.index, v)),
                None => return Some((c.family, c.index, f64::INFINITY)),
            }
        }
        for l in &self.lmis {
            if l.ln_det(z).is_none() {
                return Some((Family::Bound, l.index, f64::INFINITY));
            }
        }
        None
    }

    /// Largest positive constraint value (0 when feasible), plus the
    /// relative residual of the bit-split equalities.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            worst = worst.max(c.value(z).unwrap_or(f64::INFINITY));
        }
        for l in &self.lmis {
            if l.ln_det(z).is_none() {
                worst = f64::INFINITY;
            }
        }
        let d = self.layout.bits_per_model;
        for (e, c) in self.layout.equality_pairs() {
            worst = worst.max((z[e] + z[c] - d).abs() / d);
        }
        worst
    }
}

struct Builder {
    family: Family,
    index: usize,
    constant: f64,
    support: Vec<usize>,
    pos: HashMap<usize, usize>,
    linear: Vec<(usize, f64)>,
    terms: Vec<Term>,
}

impl Builder {
    fn new(family: Family, index: usize) -> Self {
        Self {
            family,
            index,
            constant: 0.0,
            support: Vec::new(),
            pos: HashMap::new(),
            linear: Vec::new(),
            terms: Vec::new(),
        }
    }

    fn local(&mut self, g: usize) -> usize {
        if let Some(&p) = self.pos.get(&g) {
            return p;
        }
        let p = self.support.len();
        self.support.push(g);
        self.pos.insert(g, p);
        p
    }

    fn constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    fn lin(mut self, g: usize, coef: f64) -> Self {
        let p = self.local(g);
        self.linear.push((p, coef));
        self
    }

    /// `coef` times the variable if present, otherwise times `frozen`.
    fn lin_or_const(self, g: Option<usize>, coef: f64, frozen: f64) -> Self {
        match g {
            Some(g) => self.lin(g, coef),
            None => self.constant(coef * frozen),
        }
    }

    fn neg_sqrt(mut self, g: usize, coef: f64) -> Self {
        let var = self.local(g);
        self.terms.push(Term::NegSqrt { var, coef });
        self
    }

    fn reciprocal(mut self, g: usize, coef: f64) -> Self {
        let var = self.local(g);
        self.terms.push(Term::Reciprocal { var, coef });
        self
    }

    fn neg_log(mut self, g: usize, coef: f64) -> Self {
        let var = self.local(g);
        self.terms.push(Term::NegLog { var, coef });
        self
    }

    fn reciprocal_complement(mut self, g: usize, coef: f64) -> Self {
        let var = self.local(g);
        self.terms.push(Term::ReciprocalComplement { var, coef });
        self
    }

    /// `coef tr(Q~^H A Q~)` over the factor block at `offset`.
    fn quad_factor(mut self, offset: usize, m: usize, a: &ComplexMatrix, coef: f64) -> Self {
        let n = q_block_len(m);
        let vars: Vec<usize> = (offset..offset + n).map(|g| self.local(g)).collect();
        let mut k = DMatrix::zeros(n, n);
        for c in 0..m {
            for r in 0..m {
                for s in 0..m {
                    let ar = 2.0 * coef * a.get(r, s).re;
                    let ai = 2.0 * coef * a.get(r, s).im;
                    let (re_r, im_r) = (2 * (r * m + c), 2 * (r * m + c) + 1);
                    let (re_s, im_s) = (2 * (s * m + c), 2 * (s * m + c) + 1);
                    k[(re_r, re_s)] += ar;
                    k[(im_r, im_s)] += ar;
                    k[(re_r, im_s)] -= ai;
                    k[(im_r, re_s)] += ai;
                }
            }
        }
        self.terms.push(Term::Quadratic { vars, k });
        self
    }

    /// `coef Re tr(G Q~)` over the factor block at `offset`.
    fn linear_factor(mut self, offset: usize, m: usize, g: &ComplexMatrix, coef: f64) -> Self {
        for r in 0..m {
            for c in 0..m {
                let z = g.get(c, r);
                let re = self.local(offset + 2 * (r * m + c));
                let im = self.local(offset + 2 * (r * m + c) + 1);
                self.linear.push((re, coef * z.re));
                self.linear.push((im, -coef * z.im));
            }
        }
        self
    }

    /// `coef tr(M Omega)` over the Hermitian block at `offset`.
    fn linear_hermitian(mut self, offset: usize, mat: &ComplexMatrix, coef: f64) -> Self {
        for (p, t) in hermitian_trace_coefs(mat).into_iter().enumerate() {
            let l = self.local(offset + p);
            self.linear.push((l, coef * t));
        }
        self
    }

    fn neg_logdet(mut self, offset: usize, m: usize, coef: f64) -> Self {
        let vars: Vec<usize> = (offset..offset + omega_block_len(m)).map(|g| self.local(g)).collect();
        self.terms.push(Term::NegLogDet { vars, m, coef, shift: 0.0 });
        self
    }

    fn finish(mut self) -> Constraint {
        if !self.linear.is_empty() {
            let mut merged: Vec<(usize, f64)> = Vec::new();
            let mut sorted = std::mem::take(&mut self.linear);
            sorted.sort_by_key(|&(v, _)| v);
            for (v, c) in sorted {
                match merged.last_mut() {
                    Some((lv, lc)) if *lv == v => *lc += c,
                    _ => merged.push((v, c)),
                }
            }
            self.terms.insert(0, Term::Linear(merged));
        }
        Constraint {
            family: self.family,
            index: self.index,
            constant: self.constant,
            support: self.support,
            terms: self.terms,
        }
    }
}

fn check_aux(aux: &AuxPoint) -> Result<(), SolverError> {
    let scalars_ok = aux.lambda_total.is_finite()
        && aux.lambda_f.iter().all(|v| v.is_finite())
        && aux.lambda_w_edge.iter().chain(&aux.lambda_w_cloud).flatten().all(|v| v.is_finite());
    if !scalars_ok {
        return Err(SolverError::NonFiniteAux("lambda"));
    }
    if !aux.gamma_e.iter().chain(&aux.gamma_c).all(|g| g.as_matrix().is_finite()) {
        return Err(SolverError::NonFiniteAux("gamma"));
    }
    if !aux.theta_e.iter().chain(&aux.theta_c).all(|t| t.is_finite()) {
        return Err(SolverError::NonFiniteAux("theta"));
    }
    if !aux.sigma_f.iter().all(|s| s.as_matrix().is_finite()) {
        return Err(SolverError::NonFiniteAux("sigma"));
    }
    Ok(())
}

/// Constant part `log2 det(I + Gamma) - tr(Gamma)/ln 2` of a rate surrogate.
fn rate_surrogate_constant(gamma: &HermitianMatrix) -> Result<f64, SolverError> {
    let ld = logdet2(&gamma.add_scaled_identity(1.0)).map_err(|_| SolverError::NonFiniteAux("gamma"))?;
    Ok(ld - gamma.trace() / LN_2)
}

/// `(Psi, G)` with `Psi = Theta (I + Gamma) Theta^H` and
/// `G = 2 (I + Gamma) Theta^H H`.
fn rate_surrogate_matrices(gamma: &HermitianMatrix, theta: &ComplexMatrix, h: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let ig = gamma.add_scaled_identity(1.0).into_matrix();
    let psi = &(theta * &ig) * &theta.adjoint();
    let g = (&(&ig * &theta.adjoint()) * h).scale(2.0);
    (psi, g)
}

fn edge_rate_constraint(s: &Scenario, lay: &Layout, aux: &AuxPoint, k: usize) -> Result<Constraint, SolverError> {
    let ap = s.association[k];
    let h = s.channel(ap, k);
    let (psi, g) = rate_surrogate_matrices(&aux.gamma_e[k], &aux.theta_e[k], h);
    let bw = s.system.bandwidth_hz;
    let own = lay.q_block(true, k).expect("edge factor present");
    let mut b = Builder::new(Family::EdgeRate, k)
        .lin(lay.rate(true, k).expect("edge rate present"), 1.0 / bw)
        .constant(-rate_surrogate_constant(&aux.gamma_e[k])?)
        .linear_factor(own, s.m_i(), &g, -1.0 / LN_2)
        .constant(s.noise() * psi.trace().re / LN_2);
    for l in 0..s.n_ids() {
        let hl = s.channel(ap, l);
        let a = &(&hl.adjoint() * &psi) * hl;
        for edge in [true, false] {
            if let Some(o) = lay.q_block(edge, l) {
                b = b.quad_factor(o, s.m_i(), &a, 1.0 / LN_2);
            }
        }
    }
    Ok(b.finish())
}

fn cloud_rate_constraint(s: &Scenario, lay: &Layout, aux: &AuxPoint, k: usize) -> Result<Constraint, SolverError> {
    let h = s.stacked_channel(k);
    let (psi, g) = rate_surrogate_matrices(&aux.gamma_c[k], &aux.theta_c[k], &h);
    let bw = s.system.bandwidth_hz;
    let own = lay.q_block(false, k).expect("cloud factor present");
    let mut b = Builder::new(Family::CloudRate, k)
        .lin(lay.rate(false, k).expect("cloud rate present"), 1.0 / bw)
        .constant(-rate_surrogate_constant(&aux.gamma_c[k])?)
        .linear_factor(own, s.m_i(), &g, -1.0 / LN_2)
        .constant(s.noise() * psi.trace().re / LN_2);
    let ma = s.m_a();
    for i in 0..s.n_aps() {
        let block = psi.block(i * ma, i * ma, ma, ma);
        b = b.linear_hermitian(lay.omega_block(i).expect("quantizer present"), &block, 1.0 / LN_2);
    }
    for l in 0..s.n_ids() {
        let hl = s.stacked_channel(l);
        let a = &(&hl.adjoint() * &psi) * &hl;
        b = b.quad_factor(lay.q_block(false, l).expect("cloud factor present"), s.m_i(), &a, 1.0 / LN_2);
    }
    Ok(b.finish())
}

fn compression_constraint(s: &Scenario, lay: &Layout, aux: &AuxPoint, i: usize) -> Result<Constraint, SolverError> {
    let sigma = &aux.sigma_f[i];
    let sinv = sigma.inverse().map_err(|_| SolverError::NonFiniteAux("sigma"))?.into_matrix();
    let ld = logdet2(sigma).map_err(|_| SolverError::NonFiniteAux("sigma"))?;
    let ma = s.m_a();
    let omega = lay.omega_block(i).expect("quantizer present");
    let mut b = Builder::new(Family::Compression, i)
        .constant(ld - ma as f64 / LN_2 + s.noise() * sinv.trace().re / LN_2)
        .linear_hermitian(omega, &sinv, 1.0 / LN_2)
        .neg_logdet(omega, ma, 1.0 / LN_2)
        .lin(lay.r_front.expect("fronthaul rate present") + i, -1.0);
    for l in 0..s.n_ids() {
        let h = s.channel(i, l);
        let a = &(&h.adjoint() * &sinv) * h;
        if !s.is_served_by(l, i) {
            if let Some(o) = lay.q_block(true, l) {
                b = b.quad_factor(o, s.m_i(), &a, 1.0 / LN_2);
            }
        }
        if let Some(o) = lay.q_block(false, l) {
            b = b.quad_factor(o, s.m_i(), &a, 1.0 / LN_2);
        }
    }
    Ok(b.finish())
}

/// Builds the convex program obtained by fixing the auxiliary variables.
pub fn assemble_subproblem(s: &Scenario, aux: &AuxPoint, opts: SubproblemOptions) -> Result<ConvexProgram, SolverError> {
    check_aux(aux)?;
    let lay = Layout::new(s, opts.scheme, opts.forwarding);
    let quantized = lay.forwarding == Forwarding::Quantized;
    let fl = &s.fl;
    let mut cs: Vec<Constraint> = Vec::new();

    // (a) epigraph of n_G (tau_C + tau_W + tau_F)
    let lt = aux.lambda_total;
    cs.push(
        Builder::new(Family::Epigraph, 0)
            .lin(lay.tau_c, 1.0)
            .lin(lay.tau_w, 1.0)
            .lin(lay.tau_f, 1.0)
            .neg_sqrt(lay.tau_total, 2.0 * lt)
            .lin(lay.n_g, lt * lt)
            .finish(),
    );

    // (b) compute latency
    for k in 0..s.n_ids() {
        cs.push(
            Builder::new(Family::Compute, k)
                .lin(lay.n_l, fl.compute_time_per_iteration())
                .lin(lay.tau_c, -1.0)
                .finish(),
        );
    }

    // (c) wireless latency per active split
    for k in 0..s.n_ids() {
        for (m, edge) in [(0, true), (1, false)] {
            let Some(r) = lay.rate(edge, k) else { continue };
            let lam = if edge { aux.lambda_w_edge[k] } else { aux.lambda_w_cloud[k] };
            let Some(lam) = lam else { continue };
            cs.push(
                Builder::new(Family::Wireless, 2 * k + m)
                    .reciprocal(r, 1.0)
                    .neg_sqrt(lay.tau_w, 2.0 * lam)
                    .lin_or_const(lay.bits(edge, k), lam * lam, lay.frozen_bits(edge))
                    .finish(),
            );
        }
    }

    // (d) fronthaul latency
    let cf = s.system.fronthaul_bps;
    let bw = s.system.bandwidth_hz;
    for i in 0..s.n_aps() {
        let mut b = Builder::new(Family::FronthaulLatency, i).lin(lay.tau_f, -1.0);
        for k in fronthaul_ids(s, i, opts.fronthaul_all_ids) {
            b = b.lin_or_const(lay.bits(true, k), 1.0 / cf, lay.frozen_bits(true));
        }
        if let Some(mu) = lay.mu {
            b = b.lin(mu + i, bw / cf);
        }
        cs.push(b.finish());
    }

    if quantized {
        let (r_front, mu) = (lay.r_front.unwrap(), lay.mu.unwrap());
        // (e) fronthaul rate epigraph
        for i in 0..s.n_aps() {
            let lf = aux.lambda_f[i];
            cs.push(
                Builder::new(Family::FronthaulRate, i)
                    .lin(r_front + i, 1.0)
                    .neg_sqrt(mu + i, 2.0 * lf)
                    .lin(lay.tau_w, lf * lf)
                    .finish(),
            );
        }
    }

    // (f), (g) rate surrogates
    if lay.scheme.has_edge() {
        for k in 0..s.n_ids() {
            cs.push(edge_rate_constraint(s, &lay, aux, k)?);
        }
    }
    if lay.scheme.has_cloud() {
        for k in 0..s.n_ids() {
            cs.push(cloud_rate_constraint(s, &lay, aux, k)?);
        }
    }

    // (h) compression
    if quantized {
        for i in 0..s.n_aps() {
            cs.push(compression_constraint(s, &lay, aux, i)?);
        }
    }

    // (i), (j) iteration counts
    cs.push(
        Builder::new(Family::LocalIterations, 0)
            .neg_log(lay.eta_l, fl.v_l() / LN_2)
            .lin(lay.n_l, -1.0)
            .finish(),
    );
    cs.push(
        Builder::new(Family::GlobalIterations, 0)
            .reciprocal_complement(lay.eta_l, fl.v_g())
            .lin(lay.n_g, -1.0)
            .finish(),
    );

    // (k) power
    let ident = ComplexMatrix::identity(s.m_i());
    for k in 0..s.n_ids() {
        let mut b = Builder::new(Family::Power, k).constant(-s.p_tx());
        for edge in [true, false] {
            if let Some(o) = lay.q_block(edge, k) {
                b = b.quad_factor(o, s.m_i(), &ident, 1.0);
            }
        }
        cs.push(b.finish());
    }

    // (l) bit split nonnegativity; the equality is enforced by the solver
    for k in 0..s.n_ids() {
        for (m, edge) in [(0, true), (1, false)] {
            if let Some(d) = lay.bits(edge, k) {
                cs.push(Builder::new(Family::BitSplit, 2 * k + m).lin(d, -1.0).finish());
            }
        }
    }

    // (m) floors
    let mut bound = 0;
    let mut lower = |cs: &mut Vec<Constraint>, g: usize, floor: f64| {
        cs.push(Builder::new(Family::Bound, bound).lin(g, -1.0).constant(floor).finish());
        bound += 1;
    };
    for k in 0..s.n_ids() {
        for edge in [true, false] {
            if let Some(r) = lay.rate(edge, k) {
                lower(&mut cs, r, RATE_FLOOR);
            }
        }
    }
    for g in [lay.tau_c, lay.tau_w, lay.tau_f, lay.tau_total] {
        lower(&mut cs, g, TAU_FLOOR);
    }
    if let Some(mu) = lay.mu {
        for i in 0..s.n_aps() {
            lower(&mut cs, mu + i, MU_FLOOR);
        }
    }
    lower(&mut cs, lay.eta_l, ETA_FLOOR);
    cs.push(
        Builder::new(Family::Bound, bound)
            .lin(lay.eta_l, 1.0)
            .constant(-(1.0 - ETA_FLOOR))
            .finish(),
    );

    let lmis = (0..s.n_aps())
        .filter_map(|i| {
            lay.omega_block(i).map(|o| Lmi {
                index: i,
                support: (o..o + omega_block_len(s.m_a())).collect(),
                m: s.m_a(),
                shift: OMEGA_FLOOR_REL * s.noise(),
            })
        })
        .collect();

    Ok(ConvexProgram {
        layout: lay,
        options: opts,
        constraints: cs,
        lmis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sca::{init_point, update_auxiliaries};
    use crate::scenario::{generate_scenario, FLConfig, SystemConfig};
    use rand_chacha::ChaCha20Rng;
    use rand_core::{RngCore, SeedableRng};

    fn scenario(n_ids: usize, n_aps: usize, m_i: usize, seed: u64) -> Scenario {
        let sys = SystemConfig {
            seed,
            n_aps,
            m_i,
            ..SystemConfig::with_ids(n_ids)
        };
        generate_scenario(&sys, &FLConfig::default()).unwrap()
    }

    fn program_at(s: &Scenario, scheme: Scheme) -> (ConvexProgram, Vec<f64>) {
        let opts = SubproblemOptions::new(scheme);
        let x = init_point(s, &opts).unwrap();
        let aux = update_auxiliaries(s, &x).unwrap();
        let p = assemble_subproblem(s, &aux, opts).unwrap();
        let z = p.layout.pack(&x);
        (p, z)
    }

    fn uniform(rng: &mut ChaCha20Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn constraint_count_two_ids_one_ap() {
        let s = scenario(2, 1, 1, 0);
        assert_eq!(s.served[0], vec![0, 1]);
        let (p, _) = program_at(&s, Scheme::RateSplit);
        let expect = [
            (Family::Epigraph, 1),
            (Family::Compute, 2),
            (Family::Wireless, 4),
            (Family::FronthaulLatency, 1),
            (Family::FronthaulRate, 1),
            (Family::EdgeRate, 2),
            (Family::CloudRate, 2),
            (Family::Compression, 1),
            (Family::LocalIterations, 1),
            (Family::GlobalIterations, 1),
            (Family::Power, 2),
        ];
        for (family, n) in expect {
            assert_eq!(p.count(family), n, "{}", family.as_str());
        }
        assert_eq!(p.layout.equality_pairs().len(), 2);
        assert_eq!(p.count(Family::BitSplit), 4);
        assert_eq!(p.lmis.len(), 1);
    }

    #[test]
    fn baselines_drop_the_empty_split() {
        let s = scenario(3, 2, 1, 1);
        let (edge, _) = program_at(&s, Scheme::EdgeOnly);
        assert_eq!(edge.count(Family::Wireless), 3);
        assert_eq!(edge.count(Family::CloudRate), 0);
        assert!(edge.layout.equality_pairs().is_empty());
        let (cloud, _) = program_at(&s, Scheme::CloudOnly);
        assert_eq!(cloud.count(Family::Wireless), 3);
        assert_eq!(cloud.count(Family::EdgeRate), 0);
    }

    #[test]
    fn closed_form_aux_keeps_the_point_feasible() {
        for seed in 0..4 {
            let s = scenario(3, 2, 2, seed);
            for scheme in Scheme::ALL {
                let (p, z) = program_at(&s, scheme);
                assert!(p.is_strictly_feasible(&z), "{scheme} seed {seed}: {:?}", p.first_violation(&z));
                assert!(p.max_violation(&z) <= 1e-9);
            }
        }
    }

    #[test]
    fn repack_is_bit_exact() {
        let s = scenario(2, 2, 2, 5);
        let (p, z) = program_at(&s, Scheme::RateSplit);
        let z2 = p.layout.pack(&p.layout.unpack(&z));
        assert_eq!(z, z2);
        for c in &p.constraints {
            assert_eq!(c.value(&z), c.value(&z2));
        }
    }

    #[test]
    fn rate_and_compression_constraints_are_midpoint_convex() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        for seed in 0..3 {
            let s = scenario(3, 2, 2, seed);
            let (p, z1) = program_at(&s, Scheme::RateSplit);
            for _ in 0..10 {
                let mut z2 = z1.clone();
                for (j, v) in z2.iter_mut().enumerate() {
                    let scale = if p.layout.group_of(j) == crate::subsolver::layout::VarGroup::Scalar {
                        0.2 * v.abs()
                    } else {
                        0.5
                    };
                    *v += scale * (2.0 * uniform(&mut rng) - 1.0);
                }
                // keep each Omega block well inside the cone
                if let Some(off) = p.layout.omega {
                    let m = p.layout.m_a;
                    for i in 0..p.layout.n_aps {
                        for d in 0..m {
                            z2[off + i * m * m + d] = z1[off + i * m * m + d] + 2.0;
                        }
                    }
                }
                let mid: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| 0.5 * (a + b)).collect();
                for c in p
                    .constraints
                    .iter()
                    .filter(|c| matches!(c.family, Family::EdgeRate | Family::CloudRate | Family::Compression))
                {
                    let (Some(a), Some(b), Some(m)) = (c.value(&z1), c.value(&z2), c.value(&mid)) else {
                        continue;
                    };
                    let tol = 1e-9 * (1.0 + a.abs() + b.abs());
                    assert!(m <= 0.5 * (a + b) + tol, "{} {}: {m} > {}", c.family.as_str(), c.index, 0.5 * (a + b));
                }
            }
        }
    }

    #[test]
    fn segment_between_feasible_points_stays_feasible() {
        let s = scenario(2, 2, 1, 3);
        let (p, z1) = program_at(&s, Scheme::RateSplit);
        let out = crate::subsolver::solve(&p, &z1, &Default::default()).unwrap();
        for lam in [0.25, 0.5, 0.75] {
            let z: Vec<f64> = z1.iter().zip(&out.z).map(|(a, b)| (1.0 - lam) * a + lam * b).collect();
            assert!(p.is_strictly_feasible(&z));
        }
    }

    #[test]
    fn trace_coefficients_match_basis() {
        let m = 3;
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut a = ComplexMatrix::zeros(m, m);
        for r in 0..m {
            for c in 0..m {
                a.set(r, c, num_complex::Complex64::new(uniform(&mut rng), uniform(&mut rng)));
            }
        }
        let h = HermitianMatrix::from_raw(a);
        let coefs = hermitian_trace_coefs(h.as_matrix());
        for (p, b) in hermitian_basis(m).iter().enumerate() {
            let direct = (h.as_matrix() * b).trace().re;
            assert!((direct - coefs[p]).abs() < 1e-12);
        }
    }
}
