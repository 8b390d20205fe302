//! Optimization-based knockout for small networks: drive the total
//! post-ReLU class output of a probe batch to zero while keeping every
//! free matrix's Frobenius norm exactly what it was.
//!
//! Projected gradient descent is all the problem needs: a gradient step on
//! the free matrices, rescaling each back onto its norm sphere, with
//! backtracking halving whenever the step fails to decrease the objective.

use crate::error::{Error, Result};
use crate::nn::softmax;
use crate::rng::{normal_sample, Rng};
use crate::tensor::WeightTensor;
use alloc::vec;
use alloc::vec::Vec;
use libm::sqrt;

/// What the objective sums per probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveMode {
    /// Sum of the final layer's post-ReLU outputs. Bounded below by zero and
    /// reducible to ~0, which is the knockout.
    ReluOutputs,
    /// Sum of softmax outputs. Trivially bounded below by zero (each row
    /// sums to one); kept for sanity checks.
    SoftmaxOutputs,
}

/// A knockout instance: the leading matrices are optimized, the tail is a
/// fixed surrogate for the rest of the network, and the probes stand in for
/// data the attacker does not have.
#[derive(Debug, Clone)]
pub struct KnockoutProblem {
    pub free: Vec<WeightTensor>,
    pub tail: Vec<WeightTensor>,
    pub probes: Vec<Vec<f64>>,
    pub iterations: usize,
    pub step_size: f64,
    pub mode: ObjectiveMode,
}

/// Result: modified free matrices plus the accepted objective trace.
#[derive(Debug, Clone)]
pub struct KnockoutResult {
    pub weights: Vec<WeightTensor>,
    pub objective_trace: Vec<f64>,
}

impl KnockoutProblem {
    /// Build a problem from a network's weight list: the first `n_free`
    /// matrices are optimized, the rest are replaced by freshly drawn
    /// surrogates of the same shapes, and `probe_count` uniform-[0,1] probes
    /// are sampled — all from `seed`.
    pub fn surrogate(
        weights: &[WeightTensor],
        n_free: usize,
        probe_count: usize,
        seed: u64,
    ) -> Result<KnockoutProblem> {
        if weights.is_empty() || n_free == 0 || n_free > weights.len() {
            return Err(Error::InvalidParam(alloc::format!(
                "need 1 <= n_free <= {} matrices",
                weights.len()
            )));
        }
        if weights.iter().any(|w| w.rank() != 2) {
            return Err(Error::InvalidShape("knockout works on dense (rank-2) matrices".into()));
        }
        let root = Rng::new(seed);
        let free = weights[..n_free].to_vec();
        let tail: Vec<WeightTensor> = weights[n_free..]
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let std = sqrt(2.0 / w.cols() as f64);
                let mut rng = root.child(i as u64 + 1);
                let data = normal_sample(&mut rng, 0.0, std, w.len())?;
                WeightTensor::fc(w.rows(), w.cols(), data, w.layer_index())
            })
            .collect::<Result<_>>()?;
        let input_dim = free[0].cols();
        let mut rng = root.child(0);
        let probes = (0..probe_count.max(1))
            .map(|_| (0..input_dim).map(|_| rng.uniform()).collect())
            .collect();
        Ok(KnockoutProblem {
            free,
            tail,
            probes,
            iterations: 500,
            step_size: 0.1,
            mode: ObjectiveMode::ReluOutputs,
        })
    }

    fn matrices(&self, free: &[WeightTensor]) -> Vec<WeightTensor> {
        free.iter().chain(self.tail.iter()).cloned().collect()
    }
}

/// Forward through dense+ReLU layers (ReLU after every matrix, biases zero).
fn forward_all(mats: &[WeightTensor], x: &[f64]) -> Vec<Vec<f64>> {
    let mut acts = Vec::with_capacity(mats.len() + 1);
    acts.push(x.to_vec());
    for m in mats {
        let (rows, cols) = (m.rows(), m.cols());
        let d = m.data();
        let prev = acts.last().unwrap();
        let mut out = vec![0.0; rows];
        for i in 0..rows {
            let mut acc = 0.0;
            for (w, xv) in d[i * cols..(i + 1) * cols].iter().zip(prev) {
                acc += w * xv;
            }
            out[i] = acc.max(0.0);
        }
        acts.push(out);
    }
    acts
}

/// Objective and its gradient w.r.t. the free matrices.
fn objective_and_grads(problem: &KnockoutProblem, free: &[WeightTensor]) -> (f64, Vec<Vec<f64>>) {
    let mats = problem.matrices(free);
    let mut total = 0.0;
    let mut grads: Vec<Vec<f64>> = free.iter().map(|m| vec![0.0; m.len()]).collect();
    for probe in &problem.probes {
        let acts = forward_all(&mats, probe);
        let out = acts.last().unwrap();
        match problem.mode {
            ObjectiveMode::ReluOutputs => {
                total += out.iter().sum::<f64>();
                // d(sum of outputs)/d(output_i) = 1, gated by the ReLU.
                let mut delta: Vec<f64> = out.iter().map(|&v| f64::from(u8::from(v > 0.0))).collect();
                for (li, m) in mats.iter().enumerate().rev() {
                    let (rows, cols) = (m.rows(), m.cols());
                    let d = m.data();
                    let input = &acts[li];
                    let mut up = vec![0.0; cols];
                    for i in 0..rows {
                        let dv = delta[i];
                        if dv == 0.0 {
                            continue;
                        }
                        for j in 0..cols {
                            up[j] += dv * d[i * cols + j];
                            if li < grads.len() {
                                grads[li][i * cols + j] += dv * input[j];
                            }
                        }
                    }
                    if li == 0 {
                        break;
                    }
                    // Gate by the previous layer's ReLU.
                    for (u, &a) in up.iter_mut().zip(&acts[li]) {
                        if a <= 0.0 {
                            *u = 0.0;
                        }
                    }
                    delta = up;
                }
            }
            ObjectiveMode::SoftmaxOutputs => {
                // Softmax rows sum to one: constant objective, zero gradient.
                total += softmax(out).iter().sum::<f64>();
            }
        }
    }
    (total, grads)
}

/// Minimize the objective under fixed Frobenius norms.
pub fn optimize_knockout(problem: &KnockoutProblem) -> Result<KnockoutResult> {
    if problem.probes.is_empty() {
        return Err(Error::InvalidParam("probe batch must be non-empty".into()));
    }
    if problem.free.is_empty() {
        return Err(Error::InvalidParam("need at least one free matrix".into()));
    }
    let norms: Vec<f64> = problem.free.iter().map(|w| w.frobenius_norm()).collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::InvalidParam(alloc::format!(
            "free matrix {i} has zero Frobenius norm; projection undefined"
        )));
    }

    let mut free = problem.free.clone();
    let (mut best, _) = objective_and_grads(problem, &free);
    let mut trace = vec![best];
    let mut step = problem.step_size;
    let mut stale = 0usize;
    for _ in 0..problem.iterations {
        let (_, grads) = objective_and_grads(problem, &free);
        // Backtracking: halve until the projected step decreases J.
        let mut accepted = false;
        for _ in 0..30 {
            let candidate: Vec<WeightTensor> = free
                .iter()
                .zip(&grads)
                .zip(&norms)
                .map(|((w, g), &n0)| {
                    let mut data: Vec<f64> =
                        w.data().iter().zip(g).map(|(v, gv)| v - step * gv).collect();
                    let norm = sqrt(data.iter().map(|v| v * v).sum::<f64>());
                    if norm > 0.0 {
                        let scale = n0 / norm;
                        for v in &mut data {
                            *v *= scale;
                        }
                    }
                    w.with_data_unchecked(data)
                })
                .collect();
            let (j, _) = objective_and_grads(problem, &candidate);
            if j < best {
                let improvement = (best - j) / best.abs().max(1e-12);
                free = candidate;
                best = j;
                trace.push(j);
                stale = if improvement < 1e-6 { stale + 1 } else { 0 };
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        if stale >= 20 {
            break;
        }
    }
    Ok(KnockoutResult { weights: free, objective_trace: trace })
}
