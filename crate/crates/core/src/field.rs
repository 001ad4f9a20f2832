//! Real-valued functions on a domain closure and the discrete calculus on them.
//!
//! All reductions run over vertices (or edges) in canonical index order so
//! results are bit-reproducible.

use std::sync::Arc;

use thiserror::Error;

use crate::lattice::{LatticeDomain, LatticePoint};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("fields live on different domains (n={0}, R={1} vs n={2}, R={3})")]
    DomainMismatch(usize, u64, usize, u64),
    #[error("norm exponent must satisfy p >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Which vertex set a reduction runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Interior,
    Closure,
}

/// Exponent of an l^p norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

/// A function on `interior ∪ boundary` of a lattice domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T: Real = f64> {
    domain: Arc<LatticeDomain>,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn zeros(domain: Arc<LatticeDomain>) -> Self {
        let values = vec![T::zero(); domain.n_closure()];
        Self { domain, values }
    }

    pub fn constant(domain: Arc<LatticeDomain>, c: T) -> Self {
        let values = vec![c; domain.n_closure()];
        Self { domain, values }
    }

    pub fn from_values(domain: Arc<LatticeDomain>, values: Vec<T>) -> Result<Self, FieldError> {
        if values.len() != domain.n_closure() {
            return Err(FieldError::LengthMismatch { expected: domain.n_closure(), got: values.len() });
        }
        Ok(Self { domain, values })
    }

    pub fn from_fn(domain: Arc<LatticeDomain>, mut f: impl FnMut(&LatticePoint) -> T) -> Self {
        let values = domain.points().iter().map(&mut f).collect();
        Self { domain, values }
    }

    /// Field with the given interior values and zero boundary data.
    pub fn dirichlet_from_interior(domain: Arc<LatticeDomain>, interior: &[T]) -> Self {
        assert_eq!(interior.len(), domain.n_interior());
        let mut values = interior.to_vec();
        values.resize(domain.n_closure(), T::zero());
        Self { domain, values }
    }

    pub fn domain(&self) -> &Arc<LatticeDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn interior_values(&self) -> &[T] {
        &self.values[..self.domain.n_interior()]
    }

    pub fn boundary_values(&self) -> &[T] {
        &self.values[self.domain.n_interior()..]
    }

    pub fn value_at(&self, p: &LatticePoint) -> Option<T> {
        self.domain.index_of(p).map(|i| self.values[i])
    }

    /// Zero on every boundary vertex, i.e. an element of `C_0(closure)`.
    pub fn is_dirichlet(&self) -> bool {
        self.boundary_values().iter().all(|v| v.is_zero())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn region_values(&self, region: Region) -> &[T] {
        match region {
            Region::Interior => self.interior_values(),
            Region::Closure => &self.values,
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { domain: self.domain.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self, FieldError> {
        check_same(self, other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { domain: self.domain.clone(), values })
    }

    /// `max_x (self(x) - other(x))` over the closure.
    pub fn max_excess_over(&self, other: &Self) -> Result<T, FieldError> {
        check_same(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a - b)
            .fold(T::neg_infinity(), T::max))
    }

    /// `max_x |self(x) - other(x)|` over the closure.
    pub fn sup_distance(&self, other: &Self) -> Result<T, FieldError> {
        check_same(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max))
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }
}

fn check_same<T: Real>(f: &Field<T>, g: &Field<T>) -> Result<(), FieldError> {
    let (a, b) = (f.domain(), g.domain());
    if Arc::ptr_eq(a, b) || a.same_shape(b) {
        Ok(())
    } else {
        Err(FieldError::DomainMismatch(a.dimension(), a.radius(), b.dimension(), b.radius()))
    }
}

/// `(Δf)(x) = sum_{y~x} (f(y) - f(x))` at interior vertices, written into
/// `out[..n_interior]`.
pub fn laplacian_into<T: Real>(dom: &LatticeDomain, values: &[T], out: &mut [T]) {
    let two_n = T::from_count(2 * dom.dimension());
    for (i, o) in out.iter_mut().enumerate().take(dom.n_interior()) {
        let s: T = dom.neighbors(i).iter().fold(T::zero(), |acc, &j| acc + values[j]);
        *o = s - two_n * values[i];
    }
}

/// Discrete Laplacian on the interior; the returned field is zero on the boundary.
pub fn laplacian<T: Real>(f: &Field<T>) -> Field<T> {
    let mut out = Field::zeros(f.domain().clone());
    laplacian_into(f.domain(), f.values(), out.values_mut());
    out
}

/// `sum_x f(x)` over the region (unit vertex measure).
pub fn integral<T: Real>(f: &Field<T>, region: Region) -> T {
    f.region_values(region).iter().fold(T::zero(), |acc, &v| acc + v)
}

/// `∫_{closure} <∇f, ∇g>`: each closure edge with both endpoints in the
/// closure contributes `(f(y)-f(x))(g(y)-g(x))` once.
pub fn grad_inner<T: Real>(f: &Field<T>, g: &Field<T>) -> Result<T, FieldError> {
    check_same(f, g)?;
    let (fv, gv) = (f.values(), g.values());
    Ok(f
        .domain()
        .edges()
        .iter()
        .fold(T::zero(), |acc, &(i, j)| acc + (fv[j] - fv[i]) * (gv[j] - gv[i])))
}

/// `∫_{closure} |∇f|^2`, the squared gradient summed over closure edges.
pub fn grad_energy<T: Real>(f: &Field<T>) -> T {
    let fv = f.values();
    f.domain().edges().iter().fold(T::zero(), |acc, &(i, j)| {
        let d = fv[j] - fv[i];
        acc + d * d
    })
}

/// `∫<∇f,∇g> + ∫_Ω Δf · g`, which vanishes for Dirichlet `g`.
pub fn sum_by_parts_defect<T: Real>(f: &Field<T>, g: &Field<T>) -> Result<T, FieldError> {
    let lhs = grad_inner(f, g)?;
    let lap = laplacian(f);
    let rhs = lap
        .interior_values()
        .iter()
        .zip(g.interior_values())
        .fold(T::zero(), |acc, (&l, &v)| acc + l * v);
    Ok(lhs + rhs)
}

/// l^p norm over the region; `p = ∞` gives the sup norm.
pub fn norm<T: Real>(f: &Field<T>, p: Exponent, region: Region) -> Result<T, FieldError> {
    lp_norm(f.region_values(region), p)
}

pub fn lp_norm<T: Real>(values: &[T], p: Exponent) -> Result<T, FieldError> {
    match p {
        Exponent::Infinity => Ok(values.iter().fold(T::zero(), |m, v| m.max(v.abs()))),
        Exponent::Finite(p) if p >= 1.0 => {
            if p == 1.0 {
                return Ok(values.iter().fold(T::zero(), |acc, v| acc + v.abs()));
            }
            if p == 2.0 {
                return Ok(values.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt());
            }
            // scale by the sup to avoid overflow and underflow for large p
            let sup = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            if sup.is_zero() {
                return Ok(T::zero());
            }
            let pt = T::lit(p);
            let s = values.iter().fold(T::zero(), |acc, &v| acc + (v.abs() / sup).powf(pt));
            Ok(sup * s.powf(T::one() / pt))
        }
        Exponent::Finite(p) => Err(FieldError::InvalidExponent(p)),
    }
}
