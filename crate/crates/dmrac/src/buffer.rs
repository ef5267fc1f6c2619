//! Qualified training memory.
//!
//! Candidate records pass a kernel independence test against every stored
//! feature vector before admission; once the capacity budget is reached,
//! the entry whose removal leaves the richest remaining feature set (the
//! largest minimum singular value of the design matrix) is evicted first.
//! Mini-batches are drawn uniformly without replacement.

use crate::deepnet::TrainBatch;
use crate::error::{Error, Result};
use crate::numerics::linalg::sym_eigenvalues;
use crate::numerics::matrix::{norm, sub_vec, Matrix};
use crate::numerics::rng::RngState;

/// Threshold below which a feature vector counts as degenerate; the
/// kernel score divides by the feature norm.
pub const ZERO_FEATURE_NORM: f64 = 1e-12;

/// One qualified record: state, features at admission time, and the
/// generative uncertainty estimate used as the training target.
#[derive(Clone, Debug, PartialEq)]
pub struct BufferEntry {
    pub x: Vec<f64>,
    pub phi: Vec<f64>,
    pub y: Vec<f64>,
}

/// Replay memory with kernel-test admission and capacity `p_max`.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    entries: Vec<BufferEntry>,
    p_max: usize,
    zeta_tol: f64,
    admitted: u64,
    rejected: u64,
    /// Kernel score of each admitted entry at its admission instant.
    admission_scores: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(p_max: usize, zeta_tol: f64) -> Self {
        assert!(p_max >= 1, "capacity must be at least 1");
        assert!(zeta_tol > 0.0, "zeta_tol must be positive");
        ReplayBuffer {
            entries: Vec::with_capacity(p_max),
            p_max,
            zeta_tol,
            admitted: 0,
            rejected: 0,
            admission_scores: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.p_max
    }

    pub fn zeta_tol(&self) -> f64 {
        self.zeta_tol
    }

    pub fn entries(&self) -> &[BufferEntry] {
        &self.entries
    }

    pub fn admitted(&self) -> u64 {
        self.admitted
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn admission_scores(&self) -> &[f64] {
        &self.admission_scores
    }

    /// CSV dump: `index, x0.., phi0.., y0..` per entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(first) = self.entries.first() {
            out.push_str("index");
            for i in 0..first.x.len() {
                out.push_str(&format!(",x{i}"));
            }
            for i in 0..first.phi.len() {
                out.push_str(&format!(",phi{i}"));
            }
            for i in 0..first.y.len() {
                out.push_str(&format!(",y{i}"));
            }
            out.push('\n');
        } else {
            out.push_str("index\n");
        }
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(&format!("{i}"));
            for v in e.x.iter().chain(&e.phi).chain(&e.y) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Kernel independence score of a candidate feature against the buffer:
/// the minimum over stored entries of `||phi_new - phi_p||² / ||phi_new||`.
/// An empty buffer scores +inf (always admits).
pub fn kernel_score(phi_new: &[f64], buffer: &ReplayBuffer) -> Result<f64> {
    let nrm = norm(phi_new);
    if nrm < ZERO_FEATURE_NORM {
        return Err(Error::ZeroFeature { norm: nrm });
    }
    let mut best = f64::INFINITY;
    for e in &buffer.entries {
        let d = sub_vec(phi_new, &e.phi);
        let score = d.iter().map(|v| v * v).sum::<f64>() / nrm;
        if score < best {
            best = score;
        }
    }
    Ok(best)
}

/// Minimum singular value of the feature design matrix (rows `phiᵀ`) built
/// from `entries`, skipping `skip`. Computed through the Gram spectrum.
fn min_singular_without(entries: &[BufferEntry], skip: usize) -> f64 {
    let k = entries[0].phi.len();
    let mut gram = Matrix::zeros(k, k);
    for (i, e) in entries.iter().enumerate() {
        if i == skip {
            continue;
        }
        for a in 0..k {
            for b in 0..k {
                gram.set(a, b, gram.get(a, b) + e.phi[a] * e.phi[b]);
            }
        }
    }
    let eig = sym_eigenvalues(&gram).expect("gram matrix is symmetric");
    eig[0].max(0.0).sqrt()
}

/// Removes the entry whose removal maximizes the minimum singular value of
/// the remaining design matrix; ties go to the lowest index (oldest entry).
/// Returns the removed index.
pub fn evict_svd_max(buffer: &mut ReplayBuffer) -> Result<usize> {
    if buffer.entries.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if buffer.entries.len() == 1 {
        buffer.entries.remove(0);
        buffer.admission_scores.remove(0);
        return Ok(0);
    }
    let mut best_idx = 0;
    let mut best_sigma = f64::NEG_INFINITY;
    for i in 0..buffer.entries.len() {
        let sigma = min_singular_without(&buffer.entries, i);
        if sigma > best_sigma {
            best_sigma = sigma;
            best_idx = i;
        }
    }
    buffer.entries.remove(best_idx);
    buffer.admission_scores.remove(best_idx);
    Ok(best_idx)
}

/// Admission: the candidate enters iff its kernel score reaches the
/// threshold; a full buffer evicts first so the capacity bound holds at
/// every instant. Returns whether the entry was admitted.
pub fn try_insert(buffer: &mut ReplayBuffer, entry: BufferEntry, zeta_tol: f64) -> Result<bool> {
    let score = match kernel_score(&entry.phi, buffer) {
        Ok(s) => s,
        Err(e) => {
            buffer.rejected += 1;
            return Err(e);
        }
    };
    if score < zeta_tol {
        buffer.rejected += 1;
        return Ok(false);
    }
    if buffer.entries.len() >= buffer.p_max {
        evict_svd_max(buffer)?;
    }
    buffer.entries.push(entry);
    buffer.admission_scores.push(score);
    buffer.admitted += 1;
    Ok(true)
}

/// Uniform mini-batch of `m` records without replacement; pairs (x, y).
pub fn sample_minibatch(buffer: &ReplayBuffer, m: usize, rng: &mut RngState) -> Result<TrainBatch> {
    if buffer.entries.len() < m {
        return Err(Error::InsufficientData {
            available: buffer.entries.len(),
            requested: m,
        });
    }
    let idx = rng.sample_without_replacement(buffer.entries.len(), m);
    Ok(TrainBatch {
        pairs: idx
            .into_iter()
            .map(|i| (buffer.entries[i].x.clone(), buffer.entries[i].y.clone()))
            .collect(),
    })
}
