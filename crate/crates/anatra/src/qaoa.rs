//! Statevector simulation of QAOA MaxCut circuits with shot sampling.
//!
//! A depth-`p` QAOA circuit on an `n`-vertex graph prepares
//! `H^(x)n |0>` and alternates cost-phase layers `exp(-i gamma_l C)` with
//! mixer layers `exp(-i beta_l X_j)` applied to every qubit, where the cost
//! `C = sum over edges (1 - Z_u Z_v)/2` counts cut edges. The simulator
//! stores the full `2^n` statevector (graphs are capped at 20 vertices), so
//! expectations are exact and shot noise is the only randomness.
//!
//! Solvers minimize, so the shot oracle returns negated cut means.

use crate::error::{Error, OracleError};
use crate::oracle::{NoisyEvaluation, ZerothOrderOracle};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// Largest vertex count the statevector representation accepts.
pub const MAX_VERTICES: usize = 20;

/// An undirected, unit-weight graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph, validating the edge list.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidGraph`] when `n` is zero or exceeds
    /// [`MAX_VERTICES`], an endpoint is out of range, an edge is a
    /// self-loop, or an edge repeats.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph must have at least one vertex".into()));
        }
        if n > MAX_VERTICES {
            return Err(Error::InvalidGraph(format!(
                "graph has {n} vertices; the statevector simulator accepts at most {MAX_VERTICES}"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
            normalized.push(key);
        }
        Ok(Self { n, edges: normalized })
    }

    /// The cycle graph on `n` vertices.
    ///
    /// # Panics
    ///
    /// Panics when `n < 3` (shorter cycles degenerate into repeated edges).
    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "a cycle needs at least three vertices");
        let edges = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::new(n, edges).expect("cycle edges are valid by construction")
    }

    /// The Chvatal graph: 12 vertices, 24 edges, 4-regular, with maximum
    /// cut 20.
    pub fn chvatal() -> Self {
        let edges = vec![
            (0, 1),
            (0, 4),
            (0, 6),
            (0, 9),
            (1, 2),
            (1, 5),
            (1, 7),
            (2, 3),
            (2, 6),
            (2, 8),
            (3, 4),
            (3, 7),
            (3, 9),
            (4, 5),
            (4, 8),
            (5, 10),
            (5, 11),
            (6, 10),
            (6, 11),
            (7, 8),
            (7, 11),
            (8, 10),
            (9, 10),
            (9, 11),
        ];
        Self::new(12, edges).expect("embedded edge list is valid")
    }

    /// Parses the plain-text format: a first line `n m` followed by `m`
    /// lines `u v` with 0-indexed endpoints.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidGraph`] on malformed input or an edge list that
    /// fails [`Graph::new`] validation.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidGraph("empty graph file".into()))?;
        let mut parts = header.split_whitespace();
        let n: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::InvalidGraph("header must start with the vertex count".into()))?;
        let m: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::InvalidGraph("header must be two integers: n m".into()))?;
        if parts.next().is_some() {
            return Err(Error::InvalidGraph("header must be exactly two integers: n m".into()));
        }
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            let mut parts = line.split_whitespace();
            let u: usize = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::InvalidGraph(format!("bad edge line: {line:?}")))?;
            let v: usize = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::InvalidGraph(format!("bad edge line: {line:?}")))?;
            if parts.next().is_some() {
                return Err(Error::InvalidGraph(format!("edge line has extra tokens: {line:?}")));
            }
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(Error::InvalidGraph(format!(
                "header promised {m} edges but {} were given",
                edges.len()
            )));
        }
        Self::new(n, edges)
    }

    /// Number of vertices.
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Number of edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// The normalized edge list (each edge as `(min, max)`).
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of edges cut by the vertex bipartition encoded in the bits of
    /// `assignment` (bit `v` gives the side of vertex `v`).
    pub fn cut_value(&self, assignment: usize) -> u32 {
        self.edges
            .iter()
            .filter(|&&(u, v)| (assignment >> u) & 1 != (assignment >> v) & 1)
            .count() as u32
    }

    /// Maximum cut value by exhaustive enumeration.
    pub fn max_cut(&self) -> u32 {
        (0..(1usize << self.n)).map(|z| self.cut_value(z)).max().unwrap_or(0)
    }
}

/// A depth-`p` QAOA MaxCut circuit with bound parameters
/// `(gamma_1, beta_1, ..., gamma_p, beta_p)`.
#[derive(Debug, Clone)]
pub struct QaoaCircuit {
    graph: Graph,
    depth: usize,
    parameters: DVector<f64>,
    cut_table: Vec<u32>,
}

impl QaoaCircuit {
    /// Creates a circuit with all parameters zero.
    ///
    /// # Panics
    ///
    /// Panics when `depth` is zero.
    pub fn new(graph: Graph, depth: usize) -> Self {
        assert!(depth >= 1, "circuit depth must be at least 1");
        let dim = 1usize << graph.n;
        let cut_table = (0..dim).map(|z| graph.cut_value(z)).collect();
        let parameters = DVector::zeros(2 * depth);
        Self { graph, depth, parameters, cut_table }
    }

    /// Rebinds the parameter vector.
    ///
    /// # Panics
    ///
    /// Panics unless `parameters` has length `2 * depth`.
    pub fn with_parameters(mut self, parameters: DVector<f64>) -> Self {
        self.set_parameters(parameters);
        self
    }

    /// Rebinds the parameter vector in place.
    pub fn set_parameters(&mut self, parameters: DVector<f64>) {
        assert_eq!(parameters.len(), 2 * self.depth, "expected 2p parameters");
        self.parameters = parameters;
    }

    /// The underlying graph.
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Circuit depth `p`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of variational parameters, `2p`.
    pub fn parameter_count(&self) -> usize {
        2 * self.depth
    }

    /// Currently bound parameters.
    pub fn parameters(&self) -> &DVector<f64> {
        &self.parameters
    }

    /// Simulates the circuit, returning the final statevector in the
    /// computational basis (bit `v` of the index gives the state of
    /// qubit `v`).
    pub fn statevector(&self) -> Vec<Complex64> {
        let n = self.graph.n;
        let dim = 1usize << n;
        let amp = 1.0 / (dim as f64).sqrt();
        let mut psi = vec![Complex64::new(amp, 0.0); dim];
        let m = self.graph.edge_count();
        for layer in 0..self.depth {
            let gamma = self.parameters[2 * layer];
            let beta = self.parameters[2 * layer + 1];

            // Cost phase: diagonal in the computational basis, with only
            // m + 1 distinct phases since cut values are integers.
            let phases: Vec<Complex64> =
                (0..=m).map(|c| Complex64::from_polar(1.0, -gamma * c as f64)).collect();
            for (z, a) in psi.iter_mut().enumerate() {
                *a *= phases[self.cut_table[z] as usize];
            }

            // Mixer: exp(-i beta X) on each qubit via stride-paired updates.
            let c = Complex64::new(beta.cos(), 0.0);
            let s = Complex64::new(0.0, -beta.sin());
            for qubit in 0..n {
                let stride = 1usize << qubit;
                for base in (0..dim).step_by(2 * stride) {
                    for offset in 0..stride {
                        let i0 = base + offset;
                        let i1 = i0 + stride;
                        let a = psi[i0];
                        let b = psi[i1];
                        psi[i0] = c * a + s * b;
                        psi[i1] = s * a + c * b;
                    }
                }
            }
        }
        psi
    }

    fn expectation_of(&self, psi: &[Complex64]) -> f64 {
        psi.iter()
            .zip(&self.cut_table)
            .map(|(a, &cut)| a.norm_sqr() * cut as f64)
            .sum()
    }
}

/// The exact expected cut value of the circuit's output distribution,
/// `sum_z |<z|psi>|^2 cut(z)`. Solvers minimize the negated value.
pub fn exact_expectation(circuit: &QaoaCircuit) -> f64 {
    circuit.expectation_of(&circuit.statevector())
}

/// A shot-sampled QAOA objective: each evaluation rebuilds the statevector
/// at the requested parameters, samples `shots` bitstrings, and returns the
/// negated sample-mean cut with its standard error as the noise estimate.
#[derive(Debug, Clone)]
pub struct ShotOracle {
    circuit: QaoaCircuit,
    shots: usize,
    rng: ChaCha8Rng,
    exact_cache: HashMap<Vec<u64>, f64>,
}

fn parameter_key(theta: &DVector<f64>) -> Vec<u64> {
    theta.iter().map(|v| v.to_bits()).collect()
}

impl ZerothOrderOracle for ShotOracle {
    fn dimension(&self) -> usize {
        self.circuit.parameter_count()
    }

    fn evaluate(&mut self, theta: &DVector<f64>) -> Result<NoisyEvaluation, OracleError> {
        assert_eq!(theta.len(), self.dimension(), "evaluation point dimension mismatch");
        self.circuit.set_parameters(theta.clone());
        let psi = self.circuit.statevector();

        // The statevector is already in hand, so record the exact
        // expectation for later true_value lookups at no extra build cost.
        let exact = self.circuit.expectation_of(&psi);
        self.exact_cache.insert(parameter_key(theta), exact);

        let mut cumulative = Vec::with_capacity(psi.len());
        let mut total = 0.0;
        for a in &psi {
            total += a.norm_sqr();
            cumulative.push(total);
        }

        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..self.shots {
            let u: f64 = self.rng.random::<f64>() * total;
            let z = cumulative.partition_point(|&c| c <= u).min(psi.len() - 1);
            let cut = self.circuit.cut_table[z] as f64;
            sum += cut;
            sum_sq += cut * cut;
        }
        let mean = sum / self.shots as f64;
        let variance = ((sum_sq - sum * sum / self.shots as f64) / (self.shots as f64 - 1.0)).max(0.0);
        let standard_error = (variance / self.shots as f64).sqrt();
        Ok(NoisyEvaluation { value: -mean, noise_scale: Some(standard_error) })
    }

    fn true_value(&self, theta: &DVector<f64>) -> Option<f64> {
        if let Some(&exact) = self.exact_cache.get(&parameter_key(theta)) {
            return Some(-exact);
        }
        let circuit = self.circuit.clone().with_parameters(theta.clone());
        Some(-exact_expectation(&circuit))
    }
}

/// Builds a shot-based oracle over `circuit`'s graph and depth.
///
/// # Errors
///
/// [`Error::InvalidShots`] when `shots < 2` (the standard error needs at
/// least two samples).
pub fn shot_oracle(circuit: QaoaCircuit, shots: usize, seed: u64) -> Result<ShotOracle, Error> {
    if shots < 2 {
        return Err(Error::InvalidShots { shots });
    }
    Ok(ShotOracle {
        circuit,
        shots,
        rng: ChaCha8Rng::seed_from_u64(seed),
        exact_cache: HashMap::new(),
    })
}
