//! Canonical convex subproblem over Hermitian PSD block variables.
//!
//! The form covers everything this crate needs to solve:
//!
//! maximize   sum_b <L_b, X_b> + sum_j w_j ln(u_j(X)) + offset
//! subject to a_i(X) <= bound_i                       (affine)
//!            w_i ln(u_i(X)) + v_i(X) >= bound_i      (concave "QoS" form)
//!            || sum_b (X_b - C_b) ||_F^2 <= r^2      (optional ball)
//!            X_b Hermitian PSD
//!
//! where every `a, u, v` is real-affine in the blocks through Hermitian
//! coefficient matrices: `u(X) = sum_b <U_b, X_b> + offset`.

use ndarray::Array1;

use crate::error::{IsscError, Result};
use crate::linalg::{frob_inner, is_hermitian, pack, CMatrix};
use crate::scalar::Scalar;

/// Real-affine functional of the block variables.
#[derive(Debug, Clone)]
pub struct AffineExpr<T> {
    /// One Hermitian coefficient matrix per block; `None` means zero.
    pub coeffs: Vec<Option<CMatrix<T>>>,
    pub offset: T,
}

impl<T: Scalar> AffineExpr<T> {
    pub fn zero(n_blocks: usize) -> Self {
        Self {
            coeffs: vec![None; n_blocks],
            offset: T::zero(),
        }
    }

    pub fn with_coeff(mut self, block: usize, m: CMatrix<T>) -> Self {
        self.coeffs[block] = Some(m);
        self
    }

    pub fn with_offset(mut self, offset: T) -> Self {
        self.offset = offset;
        self
    }

    pub fn value(&self, blocks: &[CMatrix<T>]) -> T {
        let mut acc = self.offset;
        for (c, x) in self.coeffs.iter().zip(blocks.iter()) {
            if let Some(c) = c {
                acc += frob_inner(c, x);
            }
        }
        acc
    }
}

/// `weight * ln(arg)` objective contribution, `weight > 0`.
#[derive(Debug, Clone)]
pub struct LogTerm<T> {
    pub weight: T,
    pub arg: AffineExpr<T>,
}

/// `expr <= bound`.
#[derive(Debug, Clone)]
pub struct AffineIneq<T> {
    pub label: String,
    pub expr: AffineExpr<T>,
    pub bound: T,
}

/// `weight * ln(log_arg) + linear >= bound` with `weight > 0`.
#[derive(Debug, Clone)]
pub struct LogIneq<T> {
    pub label: String,
    pub weight: T,
    pub log_arg: AffineExpr<T>,
    pub linear: AffineExpr<T>,
    pub bound: T,
}

/// `|| sum_b (X_b - C_b) ||_F^2 <= radius_sq` over the covered blocks
/// (those with `Some` center); covered blocks must share one dimension.
#[derive(Debug, Clone)]
pub struct FrobBall<T> {
    pub centers: Vec<Option<CMatrix<T>>>,
    pub radius_sq: T,
}

#[derive(Debug, Clone)]
pub struct ConicProblem<T> {
    pub block_dims: Vec<usize>,
    pub linear_objective: Vec<Option<CMatrix<T>>>,
    pub objective_offset: T,
    pub log_terms: Vec<LogTerm<T>>,
    pub affine_ineqs: Vec<AffineIneq<T>>,
    pub log_ineqs: Vec<LogIneq<T>>,
    pub frob_ball: Option<FrobBall<T>>,
}

impl<T: Scalar> ConicProblem<T> {
    pub fn new(block_dims: Vec<usize>) -> Self {
        let n = block_dims.len();
        Self {
            block_dims,
            linear_objective: vec![None; n],
            objective_offset: T::zero(),
            log_terms: Vec::new(),
            affine_ineqs: Vec::new(),
            log_ineqs: Vec::new(),
            frob_ball: None,
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.block_dims.len()
    }

    pub fn affine(&self) -> AffineExpr<T> {
        AffineExpr::zero(self.n_blocks())
    }

    pub fn set_objective_coeff(&mut self, block: usize, m: CMatrix<T>) {
        self.linear_objective[block] = Some(m);
    }

    pub fn add_log_term(&mut self, weight: T, arg: AffineExpr<T>) {
        self.log_terms.push(LogTerm { weight, arg });
    }

    pub fn add_ineq(&mut self, label: impl Into<String>, expr: AffineExpr<T>, bound: T) {
        self.affine_ineqs.push(AffineIneq {
            label: label.into(),
            expr,
            bound,
        });
    }

    pub fn add_log_ineq(
        &mut self,
        label: impl Into<String>,
        weight: T,
        log_arg: AffineExpr<T>,
        linear: AffineExpr<T>,
        bound: T,
    ) {
        self.log_ineqs.push(LogIneq {
            label: label.into(),
            weight,
            log_arg,
            linear,
            bound,
        });
    }

    /// Ball over all blocks (one center each).
    pub fn set_frob_ball(&mut self, centers: Vec<CMatrix<T>>, radius_sq: T) {
        self.frob_ball = Some(FrobBall {
            centers: centers.into_iter().map(Some).collect(),
            radius_sq,
        });
    }

    /// Ball over a subset of blocks.
    pub fn set_frob_ball_partial(&mut self, centers: Vec<Option<CMatrix<T>>>, radius_sq: T) {
        self.frob_ball = Some(FrobBall { centers, radius_sq });
    }

    /// Canonical objective at the given block values.
    pub fn objective_value(&self, blocks: &[CMatrix<T>]) -> T {
        let mut acc = self.objective_offset;
        for (c, x) in self.linear_objective.iter().zip(blocks.iter()) {
            if let Some(c) = c {
                acc += frob_inner(c, x);
            }
        }
        for lt in &self.log_terms {
            acc += lt.weight * lt.arg.value(blocks).ln();
        }
        acc
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_dims.is_empty() {
            return Err(IsscError::domain("problem needs at least one block"));
        }
        let herm_tol = T::of(1e-10);
        let check_mat = |m: &CMatrix<T>, b: usize, what: &str| -> Result<()> {
            if m.nrows() != self.block_dims[b] || m.ncols() != self.block_dims[b] {
                return Err(IsscError::domain(format!(
                    "{what}: coefficient for block {b} has shape {}x{}, block dim is {}",
                    m.nrows(),
                    m.ncols(),
                    self.block_dims[b]
                )));
            }
            if !is_hermitian(m, herm_tol) {
                return Err(IsscError::domain(format!(
                    "{what}: coefficient for block {b} is not Hermitian"
                )));
            }
            Ok(())
        };
        let check_expr = |e: &AffineExpr<T>, what: &str| -> Result<()> {
            if e.coeffs.len() != self.n_blocks() {
                return Err(IsscError::domain(format!(
                    "{what}: expression covers {} blocks, problem has {}",
                    e.coeffs.len(),
                    self.n_blocks()
                )));
            }
            for (b, c) in e.coeffs.iter().enumerate() {
                if let Some(c) = c {
                    check_mat(c, b, what)?;
                }
            }
            Ok(())
        };

        for (b, c) in self.linear_objective.iter().enumerate() {
            if let Some(c) = c {
                check_mat(c, b, "objective")?;
            }
        }
        for (i, lt) in self.log_terms.iter().enumerate() {
            if lt.weight <= T::zero() {
                return Err(IsscError::domain(format!(
                    "log term {i} weight must be positive"
                )));
            }
            check_expr(&lt.arg, "log term")?;
        }
        for iq in &self.affine_ineqs {
            check_expr(&iq.expr, &iq.label)?;
        }
        for iq in &self.log_ineqs {
            if iq.weight <= T::zero() {
                return Err(IsscError::domain(format!(
                    "log inequality `{}` weight must be positive",
                    iq.label
                )));
            }
            check_expr(&iq.log_arg, &iq.label)?;
            check_expr(&iq.linear, &iq.label)?;
        }
        if let Some(ball) = &self.frob_ball {
            if ball.radius_sq <= T::zero() {
                return Err(IsscError::domain("ball radius^2 must be positive"));
            }
            if ball.centers.len() != self.n_blocks() {
                return Err(IsscError::domain("ball needs one center slot per block"));
            }
            let covered: Vec<usize> = ball
                .centers
                .iter()
                .enumerate()
                .filter_map(|(b, c)| c.as_ref().map(|_| b))
                .collect();
            if covered.is_empty() {
                return Err(IsscError::domain("ball must cover at least one block"));
            }
            let d0 = self.block_dims[covered[0]];
            if covered.iter().any(|&b| self.block_dims[b] != d0) {
                return Err(IsscError::domain(
                    "ball-covered blocks must share one dimension",
                ));
            }
            for &b in &covered {
                check_mat(ball.centers[b].as_ref().unwrap(), b, "ball center")?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Packed (real-vector) form used by the barrier engine.
// ---------------------------------------------------------------------------

pub(crate) struct PackedIneq<T> {
    pub grad: Array1<T>,
    /// slack = rhs - grad . x (already divided by `scale`).
    pub rhs: T,
    pub scale: T,
    pub label: usize,
}

pub(crate) struct PackedLogTerm<T> {
    pub weight: T,
    pub grad: Array1<T>,
    pub offset: T,
}

pub(crate) struct PackedLogIneq<T> {
    /// phi = weight ln(u) + vgrad . x - vrhs  (weight, vgrad, vrhs scaled).
    pub weight: T,
    pub ugrad: Array1<T>,
    pub uoffset: T,
    pub vgrad: Array1<T>,
    pub vrhs: T,
    pub scale: T,
    pub label: usize,
}

pub(crate) struct PackedBall<T> {
    /// (block index, center) for each covered block.
    pub entries: Vec<(usize, CMatrix<T>)>,
    pub radius_sq: T,
    pub shared_dim: usize,
}

pub(crate) struct PackedProblem<T> {
    pub dims: Vec<usize>,
    pub offsets: Vec<usize>,
    pub total: usize,
    pub obj_grad: Array1<T>,
    pub obj_offset: T,
    pub log_terms: Vec<PackedLogTerm<T>>,
    pub ineqs: Vec<PackedIneq<T>>,
    pub log_ineqs: Vec<PackedLogIneq<T>>,
    pub ball: Option<PackedBall<T>>,
    /// Constraint labels for diagnostics, indexed by `label` fields.
    pub labels: Vec<String>,
    /// Barrier complexity estimate used for the stage schedule.
    pub nu: T,
}

impl<T: Scalar> PackedProblem<T> {
    pub fn build(p: &ConicProblem<T>) -> Self {
        let dims = p.block_dims.clone();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0usize;
        for &d in &dims {
            offsets.push(total);
            total += crate::linalg::packed_dim(d);
        }

        let pack_expr = |e: &AffineExpr<T>| -> Array1<T> {
            let mut g = Array1::zeros(total);
            for (b, c) in e.coeffs.iter().enumerate() {
                if let Some(c) = c {
                    let pc = pack(c);
                    let o = offsets[b];
                    for (i, v) in pc.iter().enumerate() {
                        g[o + i] = *v;
                    }
                }
            }
            g
        };
        let norm = |g: &Array1<T>| -> T { g.iter().map(|v| *v * *v).sum::<T>().sqrt() };

        let mut obj_grad = Array1::zeros(total);
        for (b, c) in p.linear_objective.iter().enumerate() {
            if let Some(c) = c {
                let pc = pack(c);
                let o = offsets[b];
                for (i, v) in pc.iter().enumerate() {
                    obj_grad[o + i] = *v;
                }
            }
        }

        let log_terms: Vec<PackedLogTerm<T>> = p
            .log_terms
            .iter()
            .map(|lt| PackedLogTerm {
                weight: lt.weight,
                grad: pack_expr(&lt.arg),
                offset: lt.arg.offset,
            })
            .collect();

        let mut labels: Vec<String> = Vec::new();
        let ineqs: Vec<PackedIneq<T>> = p
            .affine_ineqs
            .iter()
            .map(|iq| {
                let raw = pack_expr(&iq.expr);
                let scale = norm(&raw).max(T::of(1e-12));
                labels.push(iq.label.clone());
                PackedIneq {
                    grad: raw.mapv(|v| v / scale),
                    rhs: (iq.bound - iq.expr.offset) / scale,
                    scale,
                    label: labels.len() - 1,
                }
            })
            .collect();

        let log_ineqs: Vec<PackedLogIneq<T>> = p
            .log_ineqs
            .iter()
            .map(|iq| {
                let vraw = pack_expr(&iq.linear);
                let scale = norm(&vraw).max(iq.weight).max(T::of(1e-12));
                labels.push(iq.label.clone());
                PackedLogIneq {
                    weight: iq.weight / scale,
                    ugrad: pack_expr(&iq.log_arg),
                    uoffset: iq.log_arg.offset,
                    vgrad: vraw.mapv(|v| v / scale),
                    vrhs: (iq.bound - iq.linear.offset) / scale,
                    scale,
                    label: labels.len() - 1,
                }
            })
            .collect();

        let ball = p.frob_ball.as_ref().map(|b| {
            let entries: Vec<(usize, CMatrix<T>)> = b
                .centers
                .iter()
                .enumerate()
                .filter_map(|(i, c)| c.as_ref().map(|c| (i, c.clone())))
                .collect();
            let shared_dim = p.block_dims[entries[0].0];
            PackedBall {
                entries,
                radius_sq: b.radius_sq,
                shared_dim,
            }
        });

        let nu = T::of(
            dims.iter().sum::<usize>() as f64
                + ineqs.len() as f64
                + 2.0 * log_ineqs.len() as f64
                + log_terms.len() as f64
                + if ball.is_some() { 2.0 } else { 0.0 },
        );

        Self {
            dims,
            offsets,
            total,
            obj_grad,
            obj_offset: p.objective_offset,
            log_terms,
            ineqs,
            log_ineqs,
            ball,
            labels,
            nu,
        }
    }

    pub fn pack_blocks(&self, blocks: &[CMatrix<T>]) -> Array1<T> {
        let mut x = Array1::zeros(self.total);
        for (b, m) in blocks.iter().enumerate() {
            let pm = pack(m);
            let o = self.offsets[b];
            for (i, v) in pm.iter().enumerate() {
                x[o + i] = *v;
            }
        }
        x
    }

    pub fn unpack_blocks(&self, x: &Array1<T>) -> Vec<CMatrix<T>> {
        self.dims
            .iter()
            .enumerate()
            .map(|(b, &d)| {
                let o = self.offsets[b];
                crate::linalg::unpack(&x.as_slice().unwrap()[o..o + d * d], d)
            })
            .collect()
    }

    pub fn block_slice<'x>(&self, x: &'x Array1<T>, b: usize) -> &'x [T] {
        let o = self.offsets[b];
        let d = self.dims[b];
        &x.as_slice().unwrap()[o..o + d * d]
    }
}
