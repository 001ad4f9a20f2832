//! The Dirichlet problem `(Δ - K) u = v` in Ω, `u = 0` on ∂Ω.
//!
//! Internally the SPD operator `A = K·I - Δ` (restricted to interior unknowns,
//! boundary eliminated) is inverted against `-v`. The iterative path is
//! matrix-free conjugate gradients; the dense path assembles `A` and factors
//! it with partial-pivot LU, and serves as the reference oracle.

use std::sync::Arc;

use thiserror::Error;

use crate::field::{self, Field};
use crate::lattice::LatticeDomain;
use crate::scalar::Real;

/// Dense solves above this many unknowns are refused.
pub const DENSE_MAX_UNKNOWNS: usize = 4000;

#[derive(Debug, Clone, Error)]
pub enum LinearError<T: Real> {
    #[error("shift K must be positive and finite, got {0}")]
    InvalidShift(T),
    #[error("linear solve did not reach tolerance after {iterations} iterations (relative residual {relative_residual:e})")]
    NotConverged { best: Field<T>, relative_residual: T, iterations: usize },
    #[error("dense solve refused: {unknowns} unknowns exceeds {limit}")]
    TooLarge { unknowns: usize, limit: usize },
    #[error("singular matrix in dense factorization")]
    Singular,
    #[error("right-hand side is not finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Conjugate gradients, optionally with Jacobi (diagonal) preconditioning.
    ConjugateGradient { jacobi: bool },
    DenseLu,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolveOptions<T: Real = f64> {
    /// Target for `‖(Δ-K)u - v‖₂ / ‖v‖₂`.
    pub tol_rel: T,
    /// Defaults to `10 * unknowns` when `None`.
    pub max_iter: Option<usize>,
    pub method: Method,
}

impl<T: Real> Default for LinearSolveOptions<T> {
    fn default() -> Self {
        Self {
            tol_rel: T::lit(1e-12),
            max_iter: None,
            method: Method::ConjugateGradient { jacobi: false },
        }
    }
}

impl<T: Real> LinearSolveOptions<T> {
    pub fn with_tol(mut self, tol_rel: T) -> Self {
        self.tol_rel = tol_rel;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

/// Matrix-free `A = K·I - Δ` on interior unknowns with zero boundary data.
#[derive(Debug, Clone)]
pub struct ShiftedLaplacian<T: Real = f64> {
    domain: Arc<LatticeDomain>,
    k: T,
}

impl<T: Real> ShiftedLaplacian<T> {
    pub fn new(domain: Arc<LatticeDomain>, k: T) -> Result<Self, LinearError<T>> {
        if !(k > T::zero() && k.is_finite()) {
            return Err(LinearError::InvalidShift(k));
        }
        Ok(Self { domain, k })
    }

    pub fn domain(&self) -> &Arc<LatticeDomain> {
        &self.domain
    }

    pub fn k(&self) -> T {
        self.k
    }

    pub fn unknowns(&self) -> usize {
        self.domain.n_interior()
    }

    pub fn diagonal(&self) -> T {
        self.k + T::from_count(2 * self.domain.dimension())
    }

    /// `out = A x` for interior vectors.
    pub fn apply(&self, x: &[T], out: &mut [T]) {
        let dom = &*self.domain;
        let n = dom.n_interior();
        let diag = self.diagonal();
        for i in 0..n {
            let s = dom
                .neighbors(i)
                .iter()
                .filter(|&&j| j < n)
                .fold(T::zero(), |acc, &j| acc + x[j]);
            out[i] = diag * x[i] - s;
        }
    }

    /// Row-major dense copy of `A`.
    pub fn to_dense(&self) -> Vec<T> {
        let n = self.unknowns();
        let mut m = vec![T::zero(); n * n];
        let diag = self.diagonal();
        for i in 0..n {
            m[i * n + i] = diag;
            for &j in self.domain.neighbors(i) {
                if j < n {
                    m[i * n + j] = m[i * n + j] - T::one();
                }
            }
        }
        m
    }
}

/// `(Δ - K) u = v` in Ω with `u = 0` on ∂Ω.
#[derive(Debug, Clone)]
pub struct LinearSystem<'a, T: Real = f64> {
    pub op: ShiftedLaplacian<T>,
    /// Only interior values are read.
    pub rhs: &'a Field<T>,
}

impl<'a, T: Real> LinearSystem<'a, T> {
    pub fn new(rhs: &'a Field<T>, k: T) -> Result<Self, LinearError<T>> {
        Ok(Self { op: ShiftedLaplacian::new(rhs.domain().clone(), k)?, rhs })
    }

    pub fn solve(&self, opts: &LinearSolveOptions<T>) -> Result<Field<T>, LinearError<T>> {
        self.solve_from(None, opts)
    }

    /// Solves starting from an initial guess (interior values are used).
    pub fn solve_from(
        &self,
        guess: Option<&Field<T>>,
        opts: &LinearSolveOptions<T>,
    ) -> Result<Field<T>, LinearError<T>> {
        let b: Vec<T> = self.rhs.interior_values().iter().map(|&v| -v).collect();
        if b.iter().any(|v| !v.is_finite()) {
            return Err(LinearError::NonFinite);
        }
        let x = match opts.method {
            Method::DenseLu => dense_solve(&self.op, &b)?,
            Method::ConjugateGradient { jacobi } => {
                let x0 = guess.map(|g| g.interior_values().to_vec());
                conjugate_gradient(&self.op, &b, x0, opts, jacobi)?
            }
        };
        Ok(Field::dirichlet_from_interior(self.op.domain.clone(), &x))
    }

    /// `‖(Δ-K)u - v‖₂ / ‖v‖₂` over the interior (absolute if `v = 0`).
    pub fn relative_residual(&self, u: &Field<T>) -> T {
        let b: Vec<T> = self.rhs.interior_values().iter().map(|&v| -v).collect();
        relative_residual(&self.op, u.interior_values(), &b)
    }
}

/// Solves `(Δ - K) u = v` with zero Dirichlet data.
pub fn linear_solve<T: Real>(
    rhs: &Field<T>,
    k: T,
    opts: &LinearSolveOptions<T>,
) -> Result<Field<T>, LinearError<T>> {
    LinearSystem::new(rhs, k)?.solve(opts)
}

/// `F(u) = ½∫_{closure}|∇u|² + ½∫_Ω K u² + ∫_Ω v u`, minimized by the solution.
pub fn linear_energy_eval<T: Real>(u: &Field<T>, v: &Field<T>, k: T) -> T {
    let half = T::lit(0.5);
    let quad = u.interior_values().iter().fold(T::zero(), |acc, &x| acc + x * x);
    let pair = u
        .interior_values()
        .iter()
        .zip(v.interior_values())
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    half * field::grad_energy(u) + half * k * quad + pair
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn relative_residual<T: Real>(op: &ShiftedLaplacian<T>, x: &[T], b: &[T]) -> T {
    let mut ax = vec![T::zero(); x.len()];
    op.apply(x, &mut ax);
    let r2 = ax.iter().zip(b).fold(T::zero(), |acc, (&p, &q)| acc + (q - p) * (q - p));
    let bn = dot(b, b).sqrt();
    if bn.is_zero() {
        r2.sqrt()
    } else {
        r2.sqrt() / bn
    }
}

fn conjugate_gradient<T: Real>(
    op: &ShiftedLaplacian<T>,
    b: &[T],
    x0: Option<Vec<T>>,
    opts: &LinearSolveOptions<T>,
    jacobi: bool,
) -> Result<Vec<T>, LinearError<T>> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm.is_zero() {
        return Ok(vec![T::zero(); n]);
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let target = opts.tol_rel * bnorm;
    let inv_diag = T::one() / op.diagonal();

    let mut x = x0.unwrap_or_else(|| vec![T::zero(); n]);
    let mut r = vec![T::zero(); n];
    let mut ap = vec![T::zero(); n];
    let mut iterations = 0;

    // Restarted from the true residual whenever the recursive one claims
    // convergence but the true one does not.
    loop {
        op.apply(&x, &mut ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        if dot(&r, &r).sqrt() <= target {
            return Ok(x);
        }
        if iterations >= max_iter {
            break;
        }
        let mut z: Vec<T> = if jacobi { r.iter().map(|&v| v * inv_diag).collect() } else { r.clone() };
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > T::zero()) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] = x[i] + alpha * p[i];
                r[i] = r[i] - alpha * ap[i];
            }
            iterations += 1;
            if dot(&r, &r).sqrt() <= target {
                break;
            }
            if jacobi {
                for i in 0..n {
                    z[i] = r[i] * inv_diag;
                }
            } else {
                z.copy_from_slice(&r);
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
    let relative_residual = relative_residual(op, &x, b);
    Err(LinearError::NotConverged {
        best: Field::dirichlet_from_interior(op.domain.clone(), &x),
        relative_residual,
        iterations,
    })
}

fn dense_solve<T: Real>(op: &ShiftedLaplacian<T>, b: &[T]) -> Result<Vec<T>, LinearError<T>> {
    let n = op.unknowns();
    if n > DENSE_MAX_UNKNOWNS {
        return Err(LinearError::TooLarge { unknowns: n, limit: DENSE_MAX_UNKNOWNS });
    }
    let lu = DenseLu::factor(op.to_dense(), n).ok_or(LinearError::Singular)?;
    Ok(lu.solve(b))
}

/// Partial-pivot LU factorization of a row-major square matrix.
#[derive(Debug, Clone)]
pub struct DenseLu<T: Real = f64> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Real> DenseLu<T> {
    /// Returns `None` if a zero pivot is met.
    pub fn factor(mut a: Vec<T>, n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (piv, pmax) = (col..n)
                .map(|r| (r, a[r * n + col].abs()))
                .fold((col, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > T::zero()) {
                return None;
            }
            if piv != col {
                for c in 0..n {
                    a.swap(piv * n + c, col * n + c);
                }
                perm.swap(piv, col);
            }
            let d = a[col * n + col];
            for r in col + 1..n {
                let m = a[r * n + col] / d;
                if m.is_zero() {
                    continue;
                }
                a[r * n + col] = m;
                for c in col + 1..n {
                    a[r * n + c] = a[r * n + c] - m * a[col * n + c];
                }
            }
        }
        Some(Self { n, lu: a, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let s = (0..r).fold(y[r], |acc, c| acc - self.lu[r * n + c] * y[c]);
            y[r] = s;
        }
        for r in (0..n).rev() {
            let s = (r + 1..n).fold(y[r], |acc, c| acc - self.lu[r * n + c] * y[c]);
            y[r] = s / self.lu[r * n + r];
        }
        y
    }
}
