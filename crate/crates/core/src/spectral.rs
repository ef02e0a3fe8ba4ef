//! Cycle and line graphs, their Laplacians and orthonormal eigenbases.
//!
//! Both topologies have Laplacian eigenvectors in closed form: the cycle
//! Laplacian is circulant and diagonalized by the (real) DFT, the line
//! Laplacian by the DCT-II. [`jacobi_eigendecomposition`] is a generic
//! symmetric eigensolver used for the normalized line Laplacian and as an
//! independent check on the closed forms.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Every node linked to its two neighbours, with wraparound.
    Cycle,
    /// A chain: no edge between the first and last node.
    Line,
}

impl Topology {
    pub fn min_size(self) -> usize {
        match self {
            Topology::Cycle => 3,
            Topology::Line => 2,
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Cycle => "cycle",
            Topology::Line => "line",
        })
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cycle" => Ok(Topology::Cycle),
            "line" | "chain" | "path" => Ok(Topology::Line),
            other => Err(Error::Domain(format!("unknown topology '{other}'"))),
        }
    }
}

/// Which Laplacian the graph Fourier basis diagonalizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaplacianKind {
    /// `L = D − A`; eigenbasis is exactly the DFT (cycle) or DCT-II (line).
    #[default]
    Combinatorial,
    /// `D^{-1/2} (D − A) D^{-1/2}`.
    Normalized,
}

impl fmt::Display for LaplacianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LaplacianKind::Combinatorial => "combinatorial",
            LaplacianKind::Normalized => "normalized",
        })
    }
}

impl FromStr for LaplacianKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "combinatorial" | "unnormalized" => Ok(LaplacianKind::Combinatorial),
            "normalized" => Ok(LaplacianKind::Normalized),
            other => Err(Error::Domain(format!("unknown laplacian kind '{other}'"))),
        }
    }
}

/// Node count plus topology. Construction enforces the topology's minimum size
/// (a 2-cycle would need a double edge).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphSpec {
    size: usize,
    topology: Topology,
}

impl GraphSpec {
    pub fn new(size: usize, topology: Topology) -> Result<Self> {
        if size < topology.min_size() {
            return Err(Error::Domain(format!(
                "{topology} graph needs at least {} nodes, got {size}",
                topology.min_size()
            )));
        }
        Ok(GraphSpec { size, topology })
    }

    pub fn cycle(size: usize) -> Result<Self> {
        Self::new(size, Topology::Cycle)
    }

    pub fn line(size: usize) -> Result<Self> {
        Self::new(size, Topology::Line)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    fn degree(&self, i: usize) -> f64 {
        match self.topology {
            Topology::Cycle => 2.0,
            Topology::Line if i == 0 || i + 1 == self.size => 1.0,
            Topology::Line => 2.0,
        }
    }
}

pub fn adjacency(spec: &GraphSpec) -> Tensor {
    let m = spec.size;
    let mut a = Tensor::zeros(m, m);
    for i in 0..m - 1 {
        a.set(i, i + 1, 1.0);
        a.set(i + 1, i, 1.0);
    }
    if spec.topology == Topology::Cycle {
        a.set(0, m - 1, 1.0);
        a.set(m - 1, 0, 1.0);
    }
    a
}

/// Combinatorial Laplacian `D − A`.
pub fn laplacian(spec: &GraphSpec) -> Tensor {
    let mut l = adjacency(spec).scale(-1.0);
    for i in 0..spec.size {
        l.set(i, i, spec.degree(i));
    }
    l
}

/// Symmetric normalized Laplacian `D^{-1/2} (D − A) D^{-1/2}`.
pub fn normalized_laplacian(spec: &GraphSpec) -> Tensor {
    let l = laplacian(spec);
    Tensor::from_fn(spec.size, spec.size, |r, c| {
        l.get(r, c) / (spec.degree(r) * spec.degree(c)).sqrt()
    })
}

pub fn laplacian_of_kind(spec: &GraphSpec, kind: LaplacianKind) -> Tensor {
    match kind {
        LaplacianKind::Combinatorial => laplacian(spec),
        LaplacianKind::Normalized => normalized_laplacian(spec),
    }
}

/// Orthonormal eigenbasis of a graph Laplacian.
///
/// Columns of `u` are eigenvectors, `eigenvalues` is ascending. Closed-form
/// bases also record the DFT/DCT frequency index of each column.
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    u: Arc<Tensor>,
    eigenvalues: Vec<f64>,
    frequencies: Option<Vec<usize>>,
    /// Set for closed-form bases.
    topology: Option<Topology>,
}

impl SpectralBasis {
    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn u(&self) -> &Tensor {
        &self.u
    }

    pub fn shared_u(&self) -> &Arc<Tensor> {
        &self.u
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Frequency index `k` of each column, when the basis came from a closed form.
    pub fn frequencies(&self) -> Option<&[usize]> {
        self.frequencies.as_deref()
    }

    /// The graph this basis was built for, when it came from a closed form.
    pub fn topology(&self) -> Option<Topology> {
        self.topology
    }

    /// Graph Fourier transform `Uᵀ X`.
    pub fn gft(&self, x: &Tensor) -> Result<Tensor> {
        if x.rows() != self.size() {
            return Err(Error::shape("gft", self.u.shape(), x.shape()));
        }
        self.u.t_matmul(x)
    }

    /// Inverse transform `U X̂`.
    pub fn igft(&self, x_hat: &Tensor) -> Result<Tensor> {
        if x_hat.rows() != self.size() {
            return Err(Error::shape("igft", self.u.shape(), x_hat.shape()));
        }
        self.u.matmul(x_hat)
    }

    /// `U · diag(response) · Uᵀ · x`: filtering with one gain per eigenvector.
    pub fn filter(&self, response: &[f64], x: &Tensor) -> Result<Tensor> {
        if response.len() != self.size() {
            return Err(Error::Domain(format!(
                "filter response has {} entries for a basis of size {}",
                response.len(),
                self.size()
            )));
        }
        let mut x_hat = self.gft(x)?;
        for (k, &g) in response.iter().enumerate() {
            x_hat.row_mut(k).iter_mut().for_each(|v| *v *= g);
        }
        self.igft(&x_hat)
    }

    /// Spectral response of circular convolution with an even-symmetric
    /// kernel `h` on a cycle: `ĝ_k = Σ_i h[i] cos(2πki/M)` per column.
    pub fn circulant_response(&self, kernel: &[f64]) -> Result<Vec<f64>> {
        let m = self.size();
        let freqs = match (&self.frequencies, self.topology) {
            (Some(f), Some(Topology::Cycle)) => f,
            _ => {
                return Err(Error::Domain(
                    "circulant response needs a closed-form cycle basis".into(),
                ))
            }
        };
        if kernel.len() != m {
            return Err(Error::Domain(format!(
                "kernel length {} does not match basis size {m}",
                kernel.len()
            )));
        }
        Ok(freqs
            .iter()
            .map(|&k| {
                kernel
                    .iter()
                    .enumerate()
                    .map(|(i, h)| h * (2.0 * PI * (k * i) as f64 / m as f64).cos())
                    .sum()
            })
            .collect())
    }

    /// `max |UᵀU − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        self.u
            .t_matmul(&self.u)
            .expect("square basis")
            .max_abs_diff(&Tensor::identity(self.size()))
    }

    /// `max |U diag(λ) Uᵀ − target|`.
    pub fn reconstruction_error(&self, target: &Tensor) -> f64 {
        let scaled = Tensor::from_fn(self.size(), self.size(), |r, c| {
            self.u.get(r, c) * self.eigenvalues[c]
        });
        scaled
            .matmul_t(&self.u)
            .map(|rec| rec.max_abs_diff(target))
            .unwrap_or(f64::INFINITY)
    }
}

/// Closed-form eigenbasis of the combinatorial Laplacian.
///
/// Cycle: real DFT (constant, then cos/sin pairs for `1 ≤ k < M/2`, then the
/// alternating vector when `M` is even). Line: DCT-II.
pub fn closed_form_basis(spec: &GraphSpec) -> SpectralBasis {
    let m = spec.size;
    let mf = m as f64;
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut eigenvalues = Vec::with_capacity(m);
    let mut frequencies = Vec::with_capacity(m);
    match spec.topology {
        Topology::Cycle => {
            columns.push(vec![1.0 / mf.sqrt(); m]);
            eigenvalues.push(0.0);
            frequencies.push(0);
            let scale = (2.0 / mf).sqrt();
            for k in (1..m).take_while(|&k| 2 * k < m) {
                let w = 2.0 * PI * k as f64 / mf;
                let lambda = 2.0 - 2.0 * w.cos();
                columns.push((0..m).map(|i| scale * (w * i as f64).cos()).collect());
                columns.push((0..m).map(|i| scale * (w * i as f64).sin()).collect());
                eigenvalues.extend([lambda, lambda]);
                frequencies.extend([k, k]);
            }
            if m.is_multiple_of(2) {
                let v = 1.0 / mf.sqrt();
                columns.push((0..m).map(|i| if i % 2 == 0 { v } else { -v }).collect());
                eigenvalues.push(4.0);
                frequencies.push(m / 2);
            }
        }
        Topology::Line => {
            for k in 0..m {
                let c = if k == 0 { (1.0 / mf).sqrt() } else { (2.0 / mf).sqrt() };
                let w = PI * k as f64 / mf;
                columns.push((0..m).map(|i| c * (w * (i as f64 + 0.5)).cos()).collect());
                eigenvalues.push(2.0 - 2.0 * w.cos());
                frequencies.push(k);
            }
        }
    }
    let u = Tensor::from_fn(m, m, |r, c| columns[c][r]);
    SpectralBasis {
        u: Arc::new(u),
        eigenvalues,
        frequencies: Some(frequencies),
        topology: Some(spec.topology),
    }
}

const JACOBI_SYMMETRY_TOL: f64 = 1e-12;
const JACOBI_OFFDIAG_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps rotations over every `(p, q)` pair until the largest off-diagonal
/// magnitude is at most `1e-12`. Eigenvalues come back ascending; equal
/// eigenvalues keep their diagonal order.
pub fn jacobi_eigendecomposition(s: &Tensor) -> Result<SpectralBasis> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::Domain(format!(
            "jacobi needs a square matrix, got {:?}",
            s.shape()
        )));
    }
    if !s.is_symmetric(JACOBI_SYMMETRY_TOL) {
        return Err(Error::Domain("jacobi input is not symmetric".into()));
    }
    let mut a = s.clone();
    let mut v = Tensor::identity(n);

    let off_diag_max = |a: &Tensor| {
        let mut m: f64 = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                m = m.max(a.get(p, q).abs());
            }
        }
        m
    };

    let mut converged = off_diag_max(&a) <= JACOBI_OFFDIAG_TOL;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Numeric(format!(
                "jacobi did not converge after {JACOBI_MAX_SWEEPS} sweeps"
            )));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (akp, akq) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, c * akp - sn * akq);
                    a.set(k, q, sn * akp + c * akq);
                }
                for k in 0..n {
                    let (apk, aqk) = (a.get(p, k), a.get(q, k));
                    a.set(p, k, c * apk - sn * aqk);
                    a.set(q, k, sn * apk + c * aqk);
                }
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for k in 0..n {
                    let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * vkp - sn * vkq);
                    v.set(k, q, sn * vkp + c * vkq);
                }
            }
        }
        sweeps += 1;
        converged = off_diag_max(&a) <= JACOBI_OFFDIAG_TOL;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)));
    let eigenvalues = order.iter().map(|&i| a.get(i, i)).collect();
    let u = Tensor::from_fn(n, n, |r, c| v.get(r, order[c]));
    Ok(SpectralBasis {
        u: Arc::new(u),
        eigenvalues,
        frequencies: None,
        topology: None,
    })
}

/// Eigenbasis for the requested Laplacian, computed once per
/// `(topology, size, kind)` and shared afterwards.
pub fn basis_for(spec: &GraphSpec, kind: LaplacianKind) -> Result<SpectralBasis> {
    type Cache = Mutex<HashMap<(GraphSpec, LaplacianKind), SpectralBasis>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(b) = guard.get(&(*spec, kind)) {
        return Ok(b.clone());
    }
    let basis = match (kind, spec.topology) {
        (LaplacianKind::Combinatorial, _) => closed_form_basis(spec),
        // D = 2I, so the normalized Laplacian is L/2 with the same vectors.
        (LaplacianKind::Normalized, Topology::Cycle) => {
            let mut b = closed_form_basis(spec);
            b.eigenvalues.iter_mut().for_each(|l| *l *= 0.5);
            b
        }
        (LaplacianKind::Normalized, Topology::Line) => {
            jacobi_eigendecomposition(&normalized_laplacian(spec))?
        }
    };
    guard.insert((*spec, kind), basis.clone());
    Ok(basis)
}

pub fn max_eigenvalue_deviation(a: &SpectralBasis, b: &SpectralBasis) -> f64 {
    if a.size() != b.size() {
        return f64::INFINITY;
    }
    a.eigenvalues
        .iter()
        .zip(&b.eigenvalues)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Groups of column indices sharing (numerically) the same eigenvalue.
pub fn eigenspace_groups(basis: &SpectralBasis, tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=basis.size() {
        if i == basis.size() || basis.eigenvalues[i] - basis.eigenvalues[i - 1] > tol {
            groups.push(start..i);
            start = i;
        }
    }
    groups
}

fn projector(u: &Tensor, cols: std::ops::Range<usize>) -> Tensor {
    let n = u.rows();
    Tensor::from_fn(n, n, |r, c| {
        cols.clone().map(|k| u.get(r, k) * u.get(c, k)).sum()
    })
}

/// Largest entrywise gap between the eigenspace projectors `Σ u uᵀ` of two
/// bases, per group of equal eigenvalues of `a`. Insensitive to sign flips and
/// rotations inside degenerate eigenspaces.
pub fn max_projector_deviation(a: &SpectralBasis, b: &SpectralBasis) -> f64 {
    if a.size() != b.size() {
        return f64::INFINITY;
    }
    eigenspace_groups(a, 1e-8)
        .into_iter()
        .map(|g| projector(&a.u, g.clone()).max_abs_diff(&projector(&b.u, g)))
        .fold(0.0, f64::max)
}
