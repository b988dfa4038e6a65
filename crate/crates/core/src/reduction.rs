//! Spin-size reduction: spins whose sign is dictated by their external
//! field are fixed ahead of the solve and folded into an exactly equivalent
//! smaller model.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ising::{axpy, dot, Couplings, IsingModel, SpinConfig};

/// Outcome of one reduction pass.
#[derive(Clone, Debug)]
pub struct ReductionReport {
    pub predetermined: Vec<usize>,
    pub fixed_spins: Vec<i8>,
    pub free: Vec<usize>,
    pub reduced_model: IsingModel,
    pub constant: f64,
    pub threshold: f64,
}

impl ReductionReport {
    pub fn removal_fraction(&self) -> f64 {
        let total = self.predetermined.len() + self.free.len();
        if total == 0 {
            0.0
        } else {
            self.predetermined.len() as f64 / total as f64
        }
    }

    pub fn summary(&self) -> ReductionSummary {
        ReductionSummary {
            n_full: self.predetermined.len() + self.free.len(),
            n_fixed: self.predetermined.len(),
            n_reduced: self.free.len(),
            removal_fraction: self.removal_fraction(),
            constant: self.constant,
            threshold: self.threshold,
        }
    }

    pub fn merge(&self, reduced_spins: &[i8]) -> Result<SpinConfig> {
        merge_solution(reduced_spins, &self.predetermined, &self.fixed_spins)
    }
}

/// Serializable counts for run reports.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ReductionSummary {
    pub n_full: usize,
    pub n_fixed: usize,
    pub n_reduced: usize,
    pub removal_fraction: f64,
    pub constant: f64,
    pub threshold: f64,
}

/// Field-only optimum: `+1` where `λ_i < 0`, `−1` where `λ_i ≥ 0`.
pub fn closed_form_spins(fields: &[f64]) -> Vec<i8> {
    fields.iter().map(|&l| if l < 0.0 { 1 } else { -1 }).collect()
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `T_i = −sgn(λ_i)·(λ_i + 2 Σ_{j≠i} J_ij sgn(λ_j))` with `sgn(0) = 0`.
pub fn flip_susceptibility(model: &IsingModel) -> Vec<f64> {
    let n = model.n();
    let fields = model.fields();
    let signs: Vec<f64> = fields.iter().map(|&l| sgn(l)).collect();
    match model.couplings() {
        Couplings::Dense(j) => (0..n)
            .map(|i| {
                let row = &j[i * n..(i + 1) * n];
                let coupled: f64 = row.iter().zip(&signs).map(|(c, s)| c * s).sum();
                -signs[i] * (fields[i] + 2.0 * coupled)
            })
            .collect(),
        Couplings::Factored(v) => {
            // Σ_{j≠i} J_ij s_j = −u_i·(Σ_j s_j u_j) + s_i ‖u_i‖²
            let mut aggregate = vec![0.0; v.dim()];
            for (i, &s) in signs.iter().enumerate() {
                if s != 0.0 {
                    axpy(s, v.row(i), &mut aggregate);
                }
            }
            (0..n)
                .map(|i| {
                    let coupled = -dot(v.row(i), &aggregate) + signs[i] * v.self_power(i);
                    -signs[i] * (fields[i] + 2.0 * coupled)
                })
                .collect()
        }
    }
}

/// Indices with `|T_i| > scale · max_i T_i` (signed maximum, strict inequality).
pub fn predetermined_set(susceptibility: &[f64], threshold_scale: f64) -> (Vec<usize>, f64) {
    let Some(t_max) = susceptibility.iter().cloned().reduce(f64::max) else {
        return (Vec::new(), 0.0);
    };
    let threshold = threshold_scale * t_max;
    let set = susceptibility
        .iter()
        .enumerate()
        .filter(|(_, t)| t.abs() > threshold)
        .map(|(i, _)| i)
        .collect();
    (set, threshold)
}

fn complement(n: usize, set: &[usize]) -> Result<Vec<usize>> {
    let mut taken = vec![false; n];
    for &i in set {
        if i >= n {
            return Err(Error::InvalidParameter(format!("index {i} out of range for {n} spins")));
        }
        if taken[i] {
            return Err(Error::InvalidParameter(format!("index {i} listed twice")));
        }
        taken[i] = true;
    }
    Ok((0..n).filter(|&i| !taken[i]).collect())
}

/// Restricts the model to the complement of `set` with the spins in `set`
/// fixed to `fixed`. Returns the reduced model and its constant `C`
/// (which is also the reduced model's offset).
pub fn reduce_model(model: &IsingModel, set: &[usize], fixed: &[i8]) -> Result<(IsingModel, f64)> {
    if set.len() != fixed.len() {
        return Err(Error::mismatch("fixed spins", set.len(), fixed.len()));
    }
    crate::ising::check_spins(fixed)?;
    let n = model.n();
    let free = complement(n, set)?;
    let fields = model.fields();
    let reduced = match model.couplings() {
        Couplings::Dense(j) => {
            let m = free.len();
            let mut jr = vec![0.0; m * m];
            for (a, &i) in free.iter().enumerate() {
                for (b, &k) in free.iter().enumerate() {
                    jr[a * m + b] = j[i * n + k];
                }
            }
            let lr: Vec<f64> = free
                .iter()
                .map(|&i| {
                    let pull: f64 = set.iter().zip(fixed).map(|(&k, &s)| j[i * n + k] * f64::from(s)).sum();
                    fields[i] + 2.0 * pull
                })
                .collect();
            let mut constant = model.offset();
            for (&i, &si) in set.iter().zip(fixed) {
                let si = f64::from(si);
                constant += fields[i] * si;
                for (&k, &sk) in set.iter().zip(fixed) {
                    constant += j[i * n + k] * si * f64::from(sk);
                }
            }
            IsingModel::from_dense(m, jr, lr, constant)?
        }
        Couplings::Factored(v) => {
            let mut direct = v.direct().to_vec();
            for (&k, &s) in set.iter().zip(fixed) {
                axpy(f64::from(s), v.row(k), &mut direct);
            }
            IsingModel::factored_subset(v, &free, direct)
        }
    };
    let constant = reduced.offset();
    Ok((reduced, constant))
}

/// Reassembles a full configuration from reduced spins (in index order of
/// the complement) and the fixed assignments.
pub fn merge_solution(reduced: &[i8], set: &[usize], fixed: &[i8]) -> Result<SpinConfig> {
    if set.len() != fixed.len() {
        return Err(Error::mismatch("fixed spins", set.len(), fixed.len()));
    }
    let n = reduced.len() + set.len();
    let free = complement(n, set)?;
    let mut spins = vec![0i8; n];
    for (&i, &s) in set.iter().zip(fixed) {
        spins[i] = s;
    }
    for (&i, &s) in free.iter().zip(reduced) {
        spins[i] = s;
    }
    SpinConfig::new(spins)
}

/// Threshold-based reduction of `model` (scale 1.0 reproduces the plain criterion).
pub fn reduce(model: &IsingModel, threshold_scale: f64) -> Result<ReductionReport> {
    let t = flip_susceptibility(model);
    let (set, threshold) = predetermined_set(&t, threshold_scale);
    let all_fixed = closed_form_spins(model.fields());
    let fixed: Vec<i8> = set.iter().map(|&i| all_fixed[i]).collect();
    let (reduced_model, constant) = reduce_model(model, &set, &fixed)?;
    let free = complement(model.n(), &set)?;
    Ok(ReductionReport {
        predetermined: set,
        fixed_spins: fixed,
        free,
        reduced_model,
        constant,
        threshold,
    })
}
