//! Interpolation point sets with insertion ages.
//!
//! An [`InterpolationSet`] stores the points a model is built from. The
//! point at index 0 is the center `x0` (the solver's incumbent); models and
//! Lagrange polynomials are expressed in displacements from it. Each point
//! carries an insertion age so the staleness ordering used for pruning is
//! explicit: smaller age means older, and re-adding an existing point
//! refreshes its age instead of duplicating it.

use nalgebra::{DMatrix, DVector};

/// Pairwise-distinctness tolerance, relative to `max(1, ||x0||)`.
const DISTINCT_TOL: f64 = 1e-12;

/// A centered set of distinct interpolation points.
#[derive(Debug, Clone)]
pub struct InterpolationSet {
    points: Vec<DVector<f64>>,
    ages: Vec<u64>,
    next_age: u64,
}

/// Outcome of [`InterpolationSet::push`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushOutcome {
    /// The point was appended at the reported index.
    Inserted(usize),
    /// The point coincided with an existing one, whose age was refreshed.
    Refreshed(usize),
}

impl PushOutcome {
    /// Index of the point that now represents the pushed location.
    pub fn index(self) -> usize {
        match self {
            PushOutcome::Inserted(i) | PushOutcome::Refreshed(i) => i,
        }
    }
}

impl InterpolationSet {
    /// Creates a set holding only the given center.
    pub fn new(center: DVector<f64>) -> Self {
        Self { points: vec![center], ages: vec![0], next_age: 1 }
    }

    /// Builds a set from points already in order, center first. Ages are
    /// assigned in the order given, so later points are considered fresher.
    ///
    /// # Panics
    ///
    /// Panics if `points` is empty, dimensions disagree, or two points
    /// coincide within the distinctness tolerance.
    pub fn from_points(points: Vec<DVector<f64>>) -> Self {
        assert!(!points.is_empty(), "interpolation set needs a center point");
        let d = points[0].len();
        let mut set = Self::new(points[0].clone());
        for p in points.into_iter().skip(1) {
            assert_eq!(p.len(), d, "interpolation points must share a dimension");
            match set.push(p) {
                PushOutcome::Inserted(_) => {}
                PushOutcome::Refreshed(_) => panic!("interpolation points must be distinct"),
            }
        }
        set
    }

    /// The center `x0`.
    pub fn center(&self) -> &DVector<f64> {
        &self.points[0]
    }

    /// Problem dimension `d`.
    pub fn dimension(&self) -> usize {
        self.points[0].len()
    }

    /// Number of points `p + 1` (center included).
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// True when only the center is present. Kept for API symmetry; the set
    /// always holds at least the center.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// All points, center first.
    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    /// Point at `index`.
    pub fn point(&self, index: usize) -> &DVector<f64> {
        &self.points[index]
    }

    /// Insertion age of the point at `index` (smaller is older).
    pub fn age(&self, index: usize) -> u64 {
        self.ages[index]
    }

    /// Index of the point bitwise equal to `x`, if present.
    pub fn position(&self, x: &DVector<f64>) -> Option<usize> {
        self.points.iter().position(|p| bitwise_eq(p, x))
    }

    /// Index of the point within the distinctness tolerance of `x`, if any.
    pub(crate) fn near_duplicate(&self, x: &DVector<f64>) -> Option<usize> {
        let tol = DISTINCT_TOL * self.center().norm().max(1.0);
        self.points.iter().position(|p| (p - x).norm() <= tol)
    }

    /// Adds `x` with a fresh age. A point coinciding with an existing one
    /// (bitwise, or within the distinctness tolerance) is not duplicated;
    /// the existing point's age is refreshed instead.
    pub fn push(&mut self, x: DVector<f64>) -> PushOutcome {
        assert_eq!(x.len(), self.dimension(), "dimension mismatch");
        if let Some(i) = self.near_duplicate(&x) {
            self.ages[i] = self.next_age;
            self.next_age += 1;
            return PushOutcome::Refreshed(i);
        }
        self.points.push(x);
        self.ages.push(self.next_age);
        self.next_age += 1;
        PushOutcome::Inserted(self.points.len() - 1)
    }

    /// Replaces the point at `index` with `x`, giving it a fresh age.
    pub(crate) fn replace(&mut self, index: usize, x: DVector<f64>) {
        assert_eq!(x.len(), self.dimension(), "dimension mismatch");
        self.points[index] = x;
        self.ages[index] = self.next_age;
        self.next_age += 1;
    }

    /// Removes the non-center point at `index`.
    pub(crate) fn remove(&mut self, index: usize) {
        assert!(index != 0, "the center cannot be removed");
        self.points.remove(index);
        self.ages.remove(index);
    }

    /// Swaps the point at `index` into the center slot, making it `x0`.
    pub(crate) fn recenter(&mut self, index: usize) {
        self.points.swap(0, index);
        self.ages.swap(0, index);
    }

    /// Drops every non-center point farther than `radius` from the center.
    pub(crate) fn prune_outside(&mut self, radius: f64) {
        let center = self.points[0].clone();
        let mut i = 1;
        while i < self.points.len() {
            if (&self.points[i] - &center).norm() > radius {
                self.points.remove(i);
                self.ages.remove(i);
            } else {
                i += 1;
            }
        }
    }

    /// Drops the oldest non-center points until at most `max_len` remain.
    pub(crate) fn truncate_oldest(&mut self, max_len: usize) {
        while self.points.len() > max_len {
            let oldest = (1..self.points.len())
                .min_by_key(|&i| self.ages[i])
                .expect("more than one point present");
            self.points.remove(oldest);
            self.ages.remove(oldest);
        }
    }

    /// Displacement matrix with columns `x^i - x0` for `i = 1..=p` (d x p).
    pub fn displacements(&self) -> DMatrix<f64> {
        let d = self.dimension();
        let p = self.points.len() - 1;
        let mut m = DMatrix::zeros(d, p);
        for i in 1..self.points.len() {
            m.set_column(i - 1, &(&self.points[i] - &self.points[0]));
        }
        m
    }

    /// Smallest singular value of the displacement matrix, or 0 when fewer
    /// than `d` displacements exist (the set cannot span the space).
    pub fn displacement_min_singular(&self) -> f64 {
        let d = self.dimension();
        if self.points.len() <= d {
            return 0.0;
        }
        let svals = self.displacements().singular_values();
        svals.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn bitwise_eq(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
}
