//! Bounded lattice domains in Z^n, vortex data and the physical constants.
//!
//! Domains are Manhattan balls `B_R = { x : d(x) <= R }` centered at the
//! origin. Their boundary is the sphere `{ x : d(x) = R + 1 }`. Vertices are
//! indexed lexicographically, interior first, then boundary.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::Field;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("lattice dimension must be at least 2, got {0}")]
    InvalidDimension(usize),
    #[error("domain radius must be nonnegative, got {0}")]
    NegativeRadius(i64),
    #[error("vortex at {0} lies outside the domain interior")]
    VortexOutsideDomain(LatticePoint),
    #[error("vortex point {0} listed more than once")]
    DuplicateVortex(LatticePoint),
    #[error("vortex at {0} has multiplicity 0; multiplicities must be positive")]
    ZeroMultiplicity(LatticePoint),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// A vertex of Z^n. Ordering is lexicographic on coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(Vec<i64>);

impl LatticePoint {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Self(coords.into())
    }

    pub fn origin(dimension: usize) -> Self {
        Self(vec![0; dimension])
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// Manhattan distance to the origin, `d(x)`.
    pub fn norm1(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).sum()
    }

    /// The neighbor `x + step * e_axis`.
    pub fn shifted(&self, axis: usize, step: i64) -> Self {
        let mut coords = self.0.clone();
        coords[axis] += step;
        Self(coords)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Lattice (Manhattan) distance `sum_i |x_i - y_i|`.
pub fn manhattan_distance(x: &LatticePoint, y: &LatticePoint) -> Result<u64, LatticeError> {
    if x.dimension() != y.dimension() {
        return Err(LatticeError::DimensionMismatch {
            left: x.dimension(),
            right: y.dimension(),
        });
    }
    Ok(x.0.iter().zip(&y.0).map(|(a, b)| a.abs_diff(*b)).sum())
}

/// All points of Z^n with `d(x) <= radius`, in lexicographic order.
pub fn ball_points(dimension: usize, radius: u64) -> Vec<LatticePoint> {
    let mut out = Vec::new();
    let mut coords = vec![0i64; dimension];
    enumerate(&mut coords, 0, radius, &mut |c, _| out.push(LatticePoint::new(c.to_vec())));
    out
}

/// All points of Z^n with `d(x) == radius`, in lexicographic order.
pub fn sphere_points(dimension: usize, radius: u64) -> Vec<LatticePoint> {
    let mut out = Vec::new();
    let mut coords = vec![0i64; dimension];
    enumerate(&mut coords, 0, radius, &mut |c, left| {
        if left == 0 {
            out.push(LatticePoint::new(c.to_vec()))
        }
    });
    out
}

/// Number of lattice points at Manhattan distance exactly `d` in Z^n.
pub fn sphere_size(dimension: usize, d: u64) -> u128 {
    if d == 0 {
        return 1;
    }
    // points with exactly k nonzero coordinates: 2^k C(n,k) C(d-1,k-1)
    (1..=dimension.min(d as usize))
        .map(|k| (1u128 << k) * binomial(dimension as u128, k as u128) * binomial(d as u128 - 1, k as u128 - 1))
        .sum()
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

fn enumerate<F: FnMut(&[i64], u64)>(coords: &mut [i64], axis: usize, budget: u64, visit: &mut F) {
    if axis == coords.len() {
        visit(coords, budget);
        return;
    }
    let b = budget as i64;
    for c in -b..=b {
        coords[axis] = c;
        enumerate(coords, axis + 1, budget - c.unsigned_abs(), visit);
    }
    coords[axis] = 0;
}

/// The Manhattan ball `B_R` together with its boundary sphere and adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDomain {
    dimension: usize,
    radius: u64,
    points: Vec<LatticePoint>,
    n_interior: usize,
    index: HashMap<LatticePoint, usize>,
    /// `2n` closure indices per interior vertex, ordered `-e_1, +e_1, -e_2, ...`.
    neighbors: Vec<usize>,
    /// Closure edges, each unordered pair once as `(lo, hi)`.
    edges: Vec<(usize, usize)>,
}

impl LatticeDomain {
    pub fn ball(dimension: usize, radius: i64) -> Result<Self, LatticeError> {
        if dimension < 2 {
            return Err(LatticeError::InvalidDimension(dimension));
        }
        if radius < 0 {
            return Err(LatticeError::NegativeRadius(radius));
        }
        let radius = radius as u64;
        let closure = ball_points(dimension, radius + 1);
        let (mut points, boundary): (Vec<_>, Vec<_>) =
            closure.into_iter().partition(|p| p.norm1() <= radius);
        let n_interior = points.len();
        points.extend(boundary);

        let index: HashMap<LatticePoint, usize> =
            points.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();

        let mut neighbors = Vec::with_capacity(n_interior * 2 * dimension);
        for p in &points[..n_interior] {
            for axis in 0..dimension {
                for step in [-1, 1] {
                    neighbors.push(index[&p.shifted(axis, step)]);
                }
            }
        }

        let mut edges = Vec::new();
        for (i, p) in points.iter().enumerate() {
            for axis in 0..dimension {
                if let Some(&j) = index.get(&p.shifted(axis, 1)) {
                    edges.push((i.min(j), i.max(j)));
                }
            }
        }
        edges.sort_unstable();

        Ok(Self { dimension, radius, points, n_interior, index, neighbors, edges })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn radius(&self) -> u64 {
        self.radius
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_boundary(&self) -> usize {
        self.points.len() - self.n_interior
    }

    pub fn n_closure(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn interior(&self) -> &[LatticePoint] {
        &self.points[..self.n_interior]
    }

    pub fn boundary(&self) -> &[LatticePoint] {
        &self.points[self.n_interior..]
    }

    pub fn point(&self, i: usize) -> &LatticePoint {
        &self.points[i]
    }

    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn is_interior_index(&self, i: usize) -> bool {
        i < self.n_interior
    }

    pub fn contains_interior(&self, p: &LatticePoint) -> bool {
        p.dimension() == self.dimension && p.norm1() <= self.radius
    }

    /// Closure indices of the `2n` neighbors of interior vertex `i`.
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        let deg = 2 * self.dimension;
        &self.neighbors[i * deg..(i + 1) * deg]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Manhattan distance to the origin of every closure vertex, by index.
    pub fn distances(&self) -> Vec<u64> {
        self.points.iter().map(LatticePoint::norm1).collect()
    }

    pub fn same_shape(&self, other: &LatticeDomain) -> bool {
        self.dimension == other.dimension && self.radius == other.radius
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vortex {
    pub point: LatticePoint,
    pub multiplicity: u32,
}

/// Vortex points `p_j` with positive multiplicities `n_j`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VortexConfig {
    vortices: Vec<Vortex>,
}

impl VortexConfig {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(vortices: Vec<Vortex>) -> Result<Self, LatticeError> {
        let mut seen = std::collections::HashSet::new();
        for v in &vortices {
            if v.multiplicity == 0 {
                return Err(LatticeError::ZeroMultiplicity(v.point.clone()));
            }
            if let Some(first) = vortices.first() {
                if first.point.dimension() != v.point.dimension() {
                    return Err(LatticeError::DimensionMismatch {
                        left: first.point.dimension(),
                        right: v.point.dimension(),
                    });
                }
            }
            if !seen.insert(v.point.clone()) {
                return Err(LatticeError::DuplicateVortex(v.point.clone()));
            }
        }
        Ok(Self { vortices })
    }

    /// A single vortex of multiplicity `n` at the origin of Z^dimension.
    pub fn single_at_origin(dimension: usize, multiplicity: u32) -> Self {
        Self::new(vec![Vortex { point: LatticePoint::origin(dimension), multiplicity }])
            .expect("single vortex is valid")
    }

    pub fn vortices(&self) -> &[Vortex] {
        &self.vortices
    }

    pub fn is_empty(&self) -> bool {
        self.vortices.is_empty()
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.vortices.iter().map(|v| v.multiplicity as u64).sum()
    }

    /// `N = 4 pi sum_j n_j`.
    pub fn total_flux<T: Real>(&self) -> T {
        T::lit(4.0) * T::PI() * T::from_count(self.total_multiplicity() as usize)
    }

    /// Smallest ball radius whose interior contains every vortex point.
    pub fn min_radius(&self) -> u64 {
        self.vortices.iter().map(|v| v.point.norm1()).max().unwrap_or(0)
    }

    pub fn check_inside(&self, dom: &LatticeDomain) -> Result<(), LatticeError> {
        for v in &self.vortices {
            if v.point.dimension() != dom.dimension() {
                return Err(LatticeError::DimensionMismatch {
                    left: v.point.dimension(),
                    right: dom.dimension(),
                });
            }
            if !dom.contains_interior(&v.point) {
                return Err(LatticeError::VortexOutsideDomain(v.point.clone()));
            }
        }
        Ok(())
    }
}

/// Physical constants `lambda`, `a` and the iteration shift `K > a * lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params<T: Real = f64> {
    lambda: T,
    a: T,
    k: T,
}

impl<T: Real> Params<T> {
    pub fn new(lambda: T, a: T, k: T) -> Result<Self, LatticeError> {
        if !(lambda > T::zero() && lambda.is_finite()) {
            return Err(LatticeError::InvalidParams(format!("lambda must be positive, got {lambda}")));
        }
        if !(a > T::zero() && a.is_finite()) {
            return Err(LatticeError::InvalidParams(format!("a must be positive, got {a}")));
        }
        if !(k > a * lambda && k.is_finite()) {
            return Err(LatticeError::InvalidParams(format!(
                "K must satisfy K > a*lambda = {}, got K = {k}",
                a * lambda
            )));
        }
        Ok(Self { lambda, a, k })
    }

    /// Uses the default shift `K = a * lambda + 1`.
    pub fn with_default_k(lambda: T, a: T) -> Result<Self, LatticeError> {
        Self::new(lambda, a, a * lambda + T::one())
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn k(&self) -> T {
        self.k
    }

    pub fn with_k(self, k: T) -> Result<Self, LatticeError> {
        Self::new(self.lambda, self.a, k)
    }
}

/// Source term `g = 4 pi sum_j n_j delta_{p_j}` as a field on the closure.
pub fn assemble_source<T: Real>(
    dom: &std::sync::Arc<LatticeDomain>,
    vc: &VortexConfig,
) -> Result<Field<T>, LatticeError> {
    vc.check_inside(dom)?;
    let mut g = Field::zeros(dom.clone());
    let four_pi = T::lit(4.0) * T::PI();
    for v in vc.vortices() {
        let i = dom.index_of(&v.point).expect("interior point is indexed");
        g.values_mut()[i] = four_pi * T::from_count(v.multiplicity as usize);
    }
    Ok(g)
}
