//! Primal log-barrier engine.
//!
//! Minimizes `-f(x) + mu * barrier(x)` over the packed real parameterization
//! of the Hermitian blocks, dividing `mu` by 10 per stage. The Newton system
//! has the shape `M0 + sum_j kappa_j g_j g_j^T (+ ball curvature)` where `M0`
//! is the block log-det Hessian, so directions are computed either through a
//! Woodbury solve (inverting `M0` exactly as `X (.) X` per block) or by dense
//! assembly when the correction rank exceeds the variable count.

use ndarray::{Array1, Array2};

use crate::error::{IsscError, Result};
use crate::linalg::{
    cholesky, cmat_zeros, conjugation_operator_matrix, frob_inner, logdet_from_cholesky,
    min_eigenvalue, pack, trace_re, unpack, CMatrix,
};
use crate::scalar::Scalar;

use super::problem::PackedProblem;

#[derive(Debug, Clone)]
pub struct BarrierOptions<T> {
    /// Relative optimality tolerance.
    pub tol: T,
    /// Total Newton step budget across all stages.
    pub max_newton: usize,
    /// Early exit once the canonical objective reaches this value.
    pub stop_at_objective: Option<T>,
    pub collect_trace: bool,
}

impl<T: Scalar> Default for BarrierOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-6),
            max_newton: 200,
            stop_at_objective: None,
            collect_trace: false,
        }
    }
}

/// Per-stage progress record for the optional debug dump.
#[derive(Debug, Clone)]
pub struct StageRecord<T> {
    pub stage: usize,
    pub mu: T,
    pub objective: T,
    /// Objective minus the weighted barrier at the stage end.
    pub merit: T,
    pub min_block_eig: T,
    pub min_scaled_slack: T,
    pub newton_steps: usize,
}

pub(crate) struct BarrierOutcome<T> {
    pub x: Array1<T>,
    pub f: T,
    pub newton_steps: usize,
    pub converged: bool,
    pub stopped_early: bool,
    pub final_decrement: T,
    /// The last inner loop ended in a failed line search, so the final
    /// decrement is a roundoff artifact rather than a gap estimate.
    pub stalled: bool,
    pub final_mu: T,
    pub trace: Vec<StageRecord<T>>,
}

/// Fully evaluated strictly feasible point.
pub(crate) struct Eval<T> {
    pub x: Array1<T>,
    pub blocks: Vec<CMatrix<T>>,
    pub f: T,
    pub barrier: T,
    pub log_u: Vec<T>,
    pub slacks: Vec<T>,
    pub li_u: Vec<T>,
    pub li_phi: Vec<T>,
    pub ball_s: Option<CMatrix<T>>,
    pub ball_phi: T,
}

impl<T: Scalar> Eval<T> {
    pub fn min_scaled_slack(&self, p: &PackedProblem<T>) -> T {
        let mut m = T::infinity();
        for &s in &self.slacks {
            m = m.min(s);
        }
        for &s in &self.li_phi {
            m = m.min(s);
        }
        if let Some(ball) = &p.ball {
            m = m.min(self.ball_phi / ball.radius_sq);
        }
        m
    }
}

fn dot<T: Scalar>(a: &Array1<T>, b: &Array1<T>) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc += *x * *y;
    }
    acc
}

/// Solves `A x = b` for symmetric PD `A` with Jacobi pre-scaling and two
/// iterative refinement passes; the systems here get severely ill-conditioned
/// near the end of the barrier path.
fn scaled_pd_solve<T: Scalar>(a: &Array2<T>, b: &Array1<T>) -> Option<Array1<T>> {
    let n = a.nrows();
    let av = a.as_slice().expect("standard layout");
    let mut scale = vec![T::zero(); n];
    for i in 0..n {
        let d = av[i * n + i];
        if d <= T::zero() || !d.is_finite() {
            return None;
        }
        scale[i] = T::one() / d.sqrt();
    }
    let mut fac = vec![T::zero(); n * n];
    for i in 0..n {
        let si = scale[i];
        let row = &av[i * n..(i + 1) * n];
        let out = &mut fac[i * n..(i + 1) * n];
        for j in 0..n {
            out[j] = row[j] * si * scale[j];
        }
    }
    // In-place Cholesky of the scaled matrix (lower triangle of fac).
    for j in 0..n {
        let mut d = fac[j * n + j];
        for k in 0..j {
            let v = fac[j * n + k];
            d -= v * v;
        }
        if d <= T::zero() || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        fac[j * n + j] = dj;
        for i in (j + 1)..n {
            let mut sv = fac[i * n + j];
            let (ri, rj) = (i * n, j * n);
            for k in 0..j {
                sv -= fac[ri + k] * fac[rj + k];
            }
            fac[i * n + j] = sv / dj;
        }
    }
    let solve_scaled = |rhs: &mut [T]| {
        for i in 0..n {
            let mut sv = rhs[i];
            let ri = i * n;
            for k in 0..i {
                sv -= fac[ri + k] * rhs[k];
            }
            rhs[i] = sv / fac[ri + i];
        }
        for i in (0..n).rev() {
            let mut sv = rhs[i];
            for k in (i + 1)..n {
                sv -= fac[k * n + i] * rhs[k];
            }
            rhs[i] = sv / fac[i * n + i];
        }
    };
    let apply = |x: &[T], out: &mut [T]| {
        for i in 0..n {
            let row = &av[i * n..(i + 1) * n];
            let mut acc = T::zero();
            for j in 0..n {
                acc += row[j] * x[j];
            }
            out[i] = acc;
        }
    };

    let mut y = vec![T::zero(); n];
    for i in 0..n {
        y[i] = b[i] * scale[i];
    }
    solve_scaled(&mut y);
    let mut x = vec![T::zero(); n];
    for i in 0..n {
        x[i] = y[i] * scale[i];
    }
    let mut ax = vec![T::zero(); n];
    let mut res = vec![T::zero(); n];
    for _ in 0..2 {
        apply(&x, &mut ax);
        for i in 0..n {
            res[i] = (b[i] - ax[i]) * scale[i];
        }
        solve_scaled(&mut res);
        for i in 0..n {
            x[i] += res[i] * scale[i];
        }
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(Array1::from_vec(x))
    } else {
        None
    }
}

/// Evaluates `x`; `None` unless strictly feasible (PD blocks, positive
/// slacks, positive log arguments).
pub(crate) fn try_eval<T: Scalar>(p: &PackedProblem<T>, x: &Array1<T>) -> Option<Eval<T>> {
    let blocks = p.unpack_blocks(x);
    let mut barrier = T::zero();
    for b in &blocks {
        let l = cholesky(b)?;
        barrier -= logdet_from_cholesky(&l);
    }

    let mut f = dot(&p.obj_grad, x) + p.obj_offset;
    let mut log_u = Vec::with_capacity(p.log_terms.len());
    for lt in &p.log_terms {
        let u = dot(&lt.grad, x) + lt.offset;
        if u <= T::zero() || !u.is_finite() {
            return None;
        }
        f += lt.weight * u.ln();
        log_u.push(u);
    }

    let mut slacks = Vec::with_capacity(p.ineqs.len());
    for iq in &p.ineqs {
        let s = iq.rhs - dot(&iq.grad, x);
        if s <= T::zero() || !s.is_finite() {
            return None;
        }
        barrier -= s.ln();
        slacks.push(s);
    }

    let mut li_u = Vec::with_capacity(p.log_ineqs.len());
    let mut li_phi = Vec::with_capacity(p.log_ineqs.len());
    for iq in &p.log_ineqs {
        let u = dot(&iq.ugrad, x) + iq.uoffset;
        if u <= T::zero() || !u.is_finite() {
            return None;
        }
        let phi = iq.weight * u.ln() + dot(&iq.vgrad, x) - iq.vrhs;
        if phi <= T::zero() || !phi.is_finite() {
            return None;
        }
        barrier -= phi.ln();
        li_u.push(u);
        li_phi.push(phi);
    }

    let (ball_s, ball_phi) = match &p.ball {
        Some(ball) => {
            let d = ball.shared_dim;
            let mut s = cmat_zeros::<T>(d);
            for (b, c) in &ball.entries {
                s += &blocks[*b];
                s -= c;
            }
            let phi = ball.radius_sq - frob_inner(&s, &s);
            if phi <= T::zero() || !phi.is_finite() {
                return None;
            }
            barrier -= phi.ln();
            (Some(s), phi)
        }
        None => (None, T::one()),
    };

    if !f.is_finite() || !barrier.is_finite() {
        return None;
    }

    Some(Eval {
        x: x.clone(),
        blocks,
        f,
        barrier,
        log_u,
        slacks,
        li_u,
        li_phi,
        ball_s,
        ball_phi,
    })
}

fn merit_value<T: Scalar>(ev: &Eval<T>, mu: T) -> T {
    // Maximize-form merit; the engine minimizes its negation.
    ev.f - mu * ev.barrier
}

fn gradient<T: Scalar>(
    p: &PackedProblem<T>,
    ev: &Eval<T>,
    mu: T,
    inv_blocks: &[CMatrix<T>],
) -> Array1<T> {
    let mut g = Array1::zeros(p.total);
    // -grad f
    for i in 0..p.total {
        g[i] = -p.obj_grad[i];
    }
    for (lt, &u) in p.log_terms.iter().zip(ev.log_u.iter()) {
        let c = -lt.weight / u;
        for i in 0..p.total {
            g[i] += c * lt.grad[i];
        }
    }
    // + mu * grad barrier
    for (b, inv) in inv_blocks.iter().enumerate() {
        let pm = pack(inv);
        let o = p.offsets[b];
        for (i, v) in pm.iter().enumerate() {
            g[o + i] -= mu * *v;
        }
    }
    for (iq, &s) in p.ineqs.iter().zip(ev.slacks.iter()) {
        let c = mu / s;
        for i in 0..p.total {
            g[i] += c * iq.grad[i];
        }
    }
    for ((iq, &u), &phi) in p.log_ineqs.iter().zip(ev.li_u.iter()).zip(ev.li_phi.iter()) {
        // barrier -ln(phi): gradient -(1/phi) * ((w/u) ugrad + vgrad)
        let cu = -mu * iq.weight / (u * phi);
        let cv = -mu / phi;
        for i in 0..p.total {
            g[i] += cu * iq.ugrad[i] + cv * iq.vgrad[i];
        }
    }
    if let Some(s) = &ev.ball_s {
        let ps = pack(s);
        let c = mu * T::of(2.0) / ev.ball_phi;
        for (b, _) in &p.ball.as_ref().unwrap().entries {
            let o = p.offsets[*b];
            for (i, v) in ps.iter().enumerate() {
                g[o + i] += c * *v;
            }
        }
    }
    g
}

/// Rank-one Hessian corrections `kappa * g g^T` active at this point.
fn rank_one_columns<T: Scalar>(p: &PackedProblem<T>, ev: &Eval<T>, mu: T) -> Vec<(Array1<T>, T)> {
    let mut cols = Vec::new();
    for (lt, &u) in p.log_terms.iter().zip(ev.log_u.iter()) {
        cols.push((lt.grad.clone(), lt.weight / (u * u)));
    }
    for (iq, &s) in p.ineqs.iter().zip(ev.slacks.iter()) {
        cols.push((iq.grad.clone(), mu / (s * s)));
    }
    for ((iq, &u), &phi) in p.log_ineqs.iter().zip(ev.li_u.iter()).zip(ev.li_phi.iter()) {
        let mut phig = iq.vgrad.clone();
        let wu = iq.weight / u;
        for i in 0..p.total {
            phig[i] += wu * iq.ugrad[i];
        }
        cols.push((phig, mu / (phi * phi)));
        cols.push((iq.ugrad.clone(), mu * iq.weight / (u * u * phi)));
    }
    if let Some(s) = &ev.ball_s {
        let ps = pack(s);
        let mut stacked = Array1::zeros(p.total);
        for (b, _) in &p.ball.as_ref().unwrap().entries {
            let o = p.offsets[*b];
            for (i, v) in ps.iter().enumerate() {
                stacked[o + i] = *v;
            }
        }
        cols.push((stacked, mu * T::of(4.0) / (ev.ball_phi * ev.ball_phi)));
    }
    cols
}

/// `M0^{-1} v` where `M0 = mu * blkdiag(X^{-1} (.) X^{-1})`: per block
/// `X (unpack v) X / mu`.
fn apply_m0_inv<T: Scalar>(p: &PackedProblem<T>, ev: &Eval<T>, mu: T, v: &Array1<T>) -> Array1<T> {
    let mut out = Array1::zeros(p.total);
    for (b, &d) in p.dims.iter().enumerate() {
        let y = unpack(p.block_slice(v, b), d);
        let z = ev.blocks[b].dot(&y).dot(&ev.blocks[b]);
        let pz = pack(&z);
        let o = p.offsets[b];
        for (i, val) in pz.iter().enumerate() {
            out[o + i] = *val / mu;
        }
    }
    out
}

/// Sums the covered-block segments of a packed vector (the `P^T` map of the
/// ball coupling).
fn sum_block_segments<T: Scalar>(p: &PackedProblem<T>, v: &Array1<T>, shared: usize) -> Array1<T> {
    let n = shared * shared;
    let mut out = Array1::zeros(n);
    for (b, _) in &p.ball.as_ref().unwrap().entries {
        let o = p.offsets[*b];
        for i in 0..n {
            out[i] += v[o + i];
        }
    }
    out
}

/// Per-block eigendecomposition of the current iterate, with eigenvalues
/// floored away from zero so inverses stay well-defined.
struct EigBasis<T> {
    lams: Vec<Array1<T>>,
    vecs: Vec<CMatrix<T>>,
}

impl<T: Scalar> EigBasis<T> {
    fn of(ev: &Eval<T>) -> Self {
        let mut lams = Vec::with_capacity(ev.blocks.len());
        let mut vecs = Vec::with_capacity(ev.blocks.len());
        for b in &ev.blocks {
            let (w, v) = crate::linalg::eigh(b);
            let top = w[w.len() - 1].max(T::min_positive_value());
            let floor = top * T::epsilon();
            lams.push(w.mapv(|x| x.max(floor)));
            vecs.push(v);
        }
        Self { lams, vecs }
    }

    fn inverses(&self) -> Vec<CMatrix<T>> {
        self.lams
            .iter()
            .zip(self.vecs.iter())
            .map(|(w, v)| {
                let n = w.len();
                let mut out = crate::linalg::cmat_zeros::<T>(n);
                for k in 0..n {
                    let inv = T::one() / w[k];
                    for i in 0..n {
                        for j in 0..n {
                            out[[i, j]] += v[[i, k]]
                                * v[[j, k]].conj()
                                * num_complex::Complex::new(inv, T::zero());
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// Orthogonal change of packed coordinates `Y -> U^H Y U` per block.
    fn to_eig(&self, p: &PackedProblem<T>, v: &Array1<T>) -> Array1<T> {
        let mut out = Array1::zeros(p.total);
        for (b, &d) in p.dims.iter().enumerate() {
            let y = unpack(p.block_slice(v, b), d);
            let u = &self.vecs[b];
            let uh = crate::linalg::adjoint(u);
            let z = uh.dot(&y).dot(u);
            let pz = pack(&z);
            let o = p.offsets[b];
            for (i, val) in pz.iter().enumerate() {
                out[o + i] = *val;
            }
        }
        out
    }

    /// Inverse transform `Y' -> U Y' U^H`.
    fn from_eig(&self, p: &PackedProblem<T>, v: &Array1<T>) -> Array1<T> {
        let mut out = Array1::zeros(p.total);
        for (b, &d) in p.dims.iter().enumerate() {
            let y = unpack(p.block_slice(v, b), d);
            let u = &self.vecs[b];
            let uh = crate::linalg::adjoint(u);
            let z = u.dot(&y).dot(&uh);
            let pz = pack(&z);
            let o = p.offsets[b];
            for (i, val) in pz.iter().enumerate() {
                out[o + i] = *val;
            }
        }
        out
    }

    /// Diagonal of the log-det Hessian `mu * X^{-1} (.) X^{-1}` in the
    /// eigenbasis packed layout.
    fn logdet_hessian_diag(&self, p: &PackedProblem<T>, mu: T) -> Array1<T> {
        let mut d = Array1::zeros(p.total);
        for (b, &dim) in p.dims.iter().enumerate() {
            let w = &self.lams[b];
            let o = p.offsets[b];
            let mut idx = 0;
            for q in 0..dim {
                d[o + idx] = mu / (w[q] * w[q]);
                idx += 1;
            }
            for q in 0..dim {
                for r in q + 1..dim {
                    let v = mu / (w[q] * w[r]);
                    d[o + idx] = v;
                    d[o + idx + 1] = v;
                    idx += 2;
                }
            }
        }
        d
    }
}

fn newton_direction<T: Scalar>(
    p: &PackedProblem<T>,
    ev: &Eval<T>,
    mu: T,
) -> Option<(Array1<T>, T)> {
    let basis = EigBasis::of(ev);
    let inv_blocks = basis.inverses();
    let g = gradient(p, ev, mu, &inv_blocks);
    let cols = rank_one_columns(p, ev, mu);
    let ball_cp = ev.ball_s.as_ref().map(|_| mu * T::of(2.0) / ev.ball_phi);
    let shared = p.ball.as_ref().map(|b| b.shared_dim).unwrap_or(0);
    let n_shared = shared * shared;
    let woodbury_size = cols.len() + if ball_cp.is_some() { n_shared } else { 0 };

    let d = if woodbury_size < p.total {
        // Woodbury: H = M0 + U K U^T.
        let r = g.mapv(|v| -v);
        let minv_r = apply_m0_inv(p, ev, mu, &r);
        let minv_cols: Vec<Array1<T>> = cols
            .iter()
            .map(|(c, _)| apply_m0_inv(p, ev, mu, c))
            .collect();
        let j = cols.len();
        let m = woodbury_size;
        let mut a = Array2::<T>::zeros((m, m));
        let mut rhs = Array1::<T>::zeros(m);

        if let Some(cp) = ball_cp {
            // P block: (1/c_P) I + sum over covered blocks of conj_op(X_b)/mu.
            let mut gp = Array2::<T>::zeros((n_shared, n_shared));
            for (b, _) in &p.ball.as_ref().unwrap().entries {
                let op = conjugation_operator_matrix(&ev.blocks[*b]);
                for i in 0..n_shared {
                    for k in 0..n_shared {
                        gp[[i, k]] += op[[i, k]] / mu;
                    }
                }
            }
            for i in 0..n_shared {
                for k in 0..n_shared {
                    a[[i, k]] = gp[[i, k]];
                }
                a[[i, i]] += T::one() / cp;
            }
            for (jj, mc) in minv_cols.iter().enumerate() {
                let pt = sum_block_segments(p, mc, shared);
                for i in 0..n_shared {
                    a[[i, n_shared + jj]] = pt[i];
                    a[[n_shared + jj, i]] = pt[i];
                }
            }
            let ptr = sum_block_segments(p, &minv_r, shared);
            for i in 0..n_shared {
                rhs[i] = ptr[i];
            }
        }
        let base = if ball_cp.is_some() { n_shared } else { 0 };
        for jj in 0..j {
            for kk in jj..j {
                let v = dot(&cols[jj].0, &minv_cols[kk]);
                a[[base + jj, base + kk]] = v;
                a[[base + kk, base + jj]] = v;
            }
            a[[base + jj, base + jj]] += T::one() / cols[jj].1;
            rhs[base + jj] = dot(&cols[jj].0, &minv_r);
        }

        let y = scaled_pd_solve(&a, &rhs)?;

        // U y, then d = M0^{-1} r - M0^{-1} (U y).
        let mut uy = Array1::<T>::zeros(p.total);
        if ball_cp.is_some() {
            for (b, _) in &p.ball.as_ref().unwrap().entries {
                let o = p.offsets[*b];
                for i in 0..n_shared {
                    uy[o + i] += y[i];
                }
            }
        }
        for jj in 0..j {
            let w = y[base + jj];
            if w != T::zero() {
                for i in 0..p.total {
                    uy[i] += w * cols[jj].0[i];
                }
            }
        }
        let minv_uy = apply_m0_inv(p, ev, mu, &uy);
        let mut d = minv_r;
        for i in 0..p.total {
            d[i] -= minv_uy[i];
        }
        d
    } else {
        // Dense assembly in the per-block eigenbasis, where the log-det part
        // is exactly diagonal and the dynamic range stays on the diagonal.
        let diag = basis.logdet_hessian_diag(p, mu);
        let mut h = Array2::<T>::zeros((p.total, p.total));
        for i in 0..p.total {
            h[[i, i]] = diag[i];
        }
        let mut eig_cols: Vec<(Array1<T>, T)> = cols
            .iter()
            .map(|(c, k)| (basis.to_eig(p, c), *k))
            .collect();
        if let Some(cp) = ball_cp {
            // Ball curvature as n_shared explicit columns in the eigenbasis.
            let entries = &p.ball.as_ref().unwrap().entries;
            for i in 0..n_shared {
                let mut e = Array1::<T>::zeros(p.total);
                for (b, _) in entries {
                    e[p.offsets[*b] + i] = T::one();
                }
                eig_cols.push((basis.to_eig(p, &e), cp));
            }
        }
        {
            let hv = h.as_slice_mut().expect("standard layout");
            let total = p.total;
            for (c, kappa) in &eig_cols {
                let cv = c.as_slice().expect("standard layout");
                for i in 0..total {
                    let ci = *kappa * cv[i];
                    if ci == T::zero() {
                        continue;
                    }
                    let row = &mut hv[i * total..(i + 1) * total];
                    for k in 0..total {
                        row[k] += ci * cv[k];
                    }
                }
            }
        }
        let rhs = basis.to_eig(p, &g.mapv(|v| -v));
        let d_eig = scaled_pd_solve(&h, &rhs)?;
        basis.from_eig(p, &d_eig)
    };

    let decrement_sq = -dot(&g, &d);
    Some((d, decrement_sq.max(T::zero())))
}

fn backtrack<T: Scalar>(
    p: &PackedProblem<T>,
    ev: &Eval<T>,
    d: &Array1<T>,
    g_dot_d: T,
    mu: T,
) -> Option<Eval<T>> {
    let f0 = -merit_value(ev, mu);
    let mut alpha = T::one();
    for _ in 0..60 {
        let mut x = ev.x.clone();
        for i in 0..x.len() {
            x[i] += alpha * d[i];
        }
        if let Some(next) = try_eval(p, &x) {
            let f1 = -merit_value(&next, mu);
            // Strict decrease guards against accepting no-op steps once the
            // Armijo slope term underflows against |F|.
            if f1 <= f0 + T::of(0.25) * alpha * g_dot_d && f1 < f0 {
                return Some(next);
            }
        }
        alpha = alpha * T::of(0.5);
    }
    None
}

pub(crate) fn barrier_solve<T: Scalar>(
    p: &PackedProblem<T>,
    start: &[CMatrix<T>],
    opts: &BarrierOptions<T>,
) -> Result<BarrierOutcome<T>> {
    let x0 = p.pack_blocks(start);
    let x0_norm = dot(&x0, &x0).sqrt();
    let mut ev = try_eval(p, &x0).ok_or_else(|| {
        IsscError::Numerical("barrier start point is not strictly feasible".into())
    })?;

    if let Some(target) = opts.stop_at_objective {
        if ev.f >= target {
            return Ok(BarrierOutcome {
                x: ev.x.clone(),
                f: ev.f,
                newton_steps: 0,
                converged: false,
                stopped_early: true,
                final_decrement: T::infinity(),
                stalled: false,
                final_mu: T::one(),
                trace: Vec::new(),
            });
        }
    }

    let mut mu = T::one();
    let mut steps = 0usize;
    let mut trace = Vec::new();
    let mut final_decrement = T::infinity();
    let mut converged = false;
    let mut stalled = false;

    'stages: for stage in 0..80 {
        let mut stage_steps = 0usize;
        stalled = false;
        while stage_steps < 100 {
            let Some((d, dec_sq)) = newton_direction(p, &ev, mu) else {
                break; // factorization failure: fall through to next stage
            };
            final_decrement = dec_sq * T::of(0.5);
            // Centering criterion on the (affine-invariant) Newton decrement;
            // only the last stage needs decrement-level optimality.
            let scale = T::one() + ev.f.abs();
            let is_final_stage = mu * p.nu <= T::of(0.5) * opts.tol * scale;
            let inner_tol = if is_final_stage {
                (T::of(0.05) * opts.tol * scale).max(T::of(1e-13) * scale)
            } else {
                T::of(0.01)
            };
            if final_decrement <= inner_tol {
                break;
            }
            if steps >= opts.max_newton {
                break 'stages;
            }
            let g_dot_d = -dec_sq;
            match backtrack(p, &ev, &d, g_dot_d, mu) {
                Some(next) => {
                    stalled = false;
                    ev = next;
                    steps += 1;
                    stage_steps += 1;
                    let xn = dot(&ev.x, &ev.x).sqrt();
                    if xn > T::of(1e14) * (T::one() + x0_norm) {
                        return Err(IsscError::Numerical(
                            "iterates diverge; problem looks unbounded".into(),
                        ));
                    }
                    if let Some(target) = opts.stop_at_objective {
                        if ev.f >= target {
                            return Ok(finish(
                                p, ev, steps, false, true, final_decrement, false, mu, trace,
                            ));
                        }
                    }
                }
                None => {
                    stalled = true;
                    break;
                }
            }
        }

        if opts.collect_trace {
            let min_eig = ev
                .blocks
                .iter()
                .map(min_eigenvalue)
                .fold(T::infinity(), T::min);
            trace.push(StageRecord {
                stage,
                mu,
                objective: ev.f,
                merit: merit_value(&ev, mu),
                min_block_eig: min_eig,
                min_scaled_slack: ev.min_scaled_slack(p),
                newton_steps: stage_steps,
            });
        }

        if mu * p.nu <= T::of(0.5) * opts.tol * (T::one() + ev.f.abs()) {
            converged = true;
            break;
        }
        mu = mu * T::of(0.1);
    }

    Ok(finish(
        p,
        ev,
        steps,
        converged,
        false,
        final_decrement,
        stalled,
        mu,
        trace,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Scalar>(
    _p: &PackedProblem<T>,
    ev: Eval<T>,
    steps: usize,
    converged: bool,
    stopped_early: bool,
    final_decrement: T,
    stalled: bool,
    mu: T,
    trace: Vec<StageRecord<T>>,
) -> BarrierOutcome<T> {
    BarrierOutcome {
        x: ev.x,
        f: ev.f,
        newton_steps: steps,
        converged,
        stopped_early,
        final_decrement,
        stalled,
        final_mu: mu,
        trace,
    }
}

/// Worst scaled constraint violation at arbitrary (possibly infeasible)
/// block values, with the index of the offending constraint label. PSD
/// violations are reported against a synthetic label index `usize::MAX`.
pub(crate) fn max_scaled_violation<T: Scalar>(
    p: &PackedProblem<T>,
    blocks: &[CMatrix<T>],
) -> (T, Option<usize>) {
    let x = p.pack_blocks(blocks);
    let mut worst = T::neg_infinity();
    let mut worst_label = None;

    for (b, m) in blocks.iter().enumerate() {
        let scale = T::one() + trace_re(m).abs();
        let v = -min_eigenvalue(m) / scale;
        if v > worst {
            worst = v;
            worst_label = Some(usize::MAX - b);
        }
    }
    for iq in &p.ineqs {
        let v = dot(&iq.grad, &x) - iq.rhs;
        if v > worst {
            worst = v;
            worst_label = Some(iq.label);
        }
    }
    for iq in &p.log_ineqs {
        let u = dot(&iq.ugrad, &x) + iq.uoffset;
        let v = if u <= T::zero() {
            T::infinity()
        } else {
            -(iq.weight * u.ln() + dot(&iq.vgrad, &x) - iq.vrhs)
        };
        if v > worst {
            worst = v;
            worst_label = Some(iq.label);
        }
    }
    if let Some(ball) = &p.ball {
        let d = ball.shared_dim;
        let mut s = cmat_zeros::<T>(d);
        for (b, c) in &ball.entries {
            s += &blocks[*b];
            s -= c;
        }
        let v = (frob_inner(&s, &s) - ball.radius_sq) / ball.radius_sq;
        if v > worst {
            worst = v;
            worst_label = None;
        }
    }
    (worst, worst_label)
}
