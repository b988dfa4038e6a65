//! Ising minimizers behind a common contract.
//!
//! Every solver re-evaluates the energy of the configuration it returns, so
//! `SolveReport::best_energy` never carries inner-loop round-off.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::power_to_db;
use crate::error::{Error, Result};
use crate::ising::{absorb_field_aux_spin, axpy, dot, Couplings, IsingModel, SpinConfig, SpinVectors};

/// Largest model the exhaustive oracle will enumerate.
pub const EXHAUSTIVE_MAX_SPINS: usize = 24;

/// Models above this size are annealed through the factored (channel-backed)
/// ΔE path instead of dense local fields.
pub const DEFAULT_DENSE_THRESHOLD: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub step: usize,
    pub best_energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub best_spins: SpinConfig,
    pub best_energy: f64,
    pub gain_db: f64,
    pub solver_name: String,
    pub seed: u64,
    pub steps: usize,
    pub wall_time: f64,
    pub replica_count: usize,
    pub energy_trace: Option<Vec<TracePoint>>,
}

impl SolveReport {
    fn new(
        model: &IsingModel,
        spins: SpinConfig,
        solver_name: &str,
        seed: u64,
        steps: usize,
        started: Instant,
        replica_count: usize,
        energy_trace: Option<Vec<TracePoint>>,
    ) -> Result<Self> {
        let best_energy = model.energy(spins.as_slice())?;
        Ok(Self {
            best_spins: spins,
            best_energy,
            gain_db: gain_db_from_energy(best_energy),
            solver_name: solver_name.to_string(),
            seed,
            steps,
            wall_time: started.elapsed().as_secs_f64(),
            replica_count,
            energy_trace,
        })
    }
}

impl SolveReport {
    /// Replaces the configuration with `spins` scored on `model`, keeping the
    /// run diagnostics. Used when the solver ran on a derived model.
    pub fn rescored(self, model: &IsingModel, spins: SpinConfig) -> Result<Self> {
        let best_energy = model.energy(spins.as_slice())?;
        Ok(Self {
            best_spins: spins,
            best_energy,
            gain_db: gain_db_from_energy(best_energy),
            ..self
        })
    }
}

/// Channel gain implied by an energy under the `H = −‖h‖²` convention.
pub fn gain_db_from_energy(energy: f64) -> f64 {
    power_to_db(-energy)
}

pub trait Solver {
    fn name(&self) -> &str;
    fn solve(&self, model: &IsingModel) -> Result<SolveReport>;
}

/// `ℓ_i = 2 Σ_j J_ij σ_j + λ_i`.
pub fn local_field(model: &IsingModel, spins: &[i8]) -> Result<Vec<f64>> {
    model.local_field(spins)
}

/// Incremental single-spin-flip bookkeeping.
trait FlipState {
    fn delta(&self, i: usize) -> f64;
    fn flip(&mut self, i: usize);
    fn spins(&self) -> &[i8];
}

struct DenseState<'a> {
    j: &'a [f64],
    n: usize,
    spins: Vec<i8>,
    field: Vec<f64>,
}

impl<'a> DenseState<'a> {
    fn new(model: &IsingModel, j: &'a [f64], spins: Vec<i8>) -> Self {
        let field = model.local_field(&spins).expect("spin length checked by caller");
        Self {
            j,
            n: model.n(),
            spins,
            field,
        }
    }
}

impl FlipState for DenseState<'_> {
    #[inline]
    fn delta(&self, i: usize) -> f64 {
        -2.0 * f64::from(self.spins[i]) * self.field[i]
    }

    fn flip(&mut self, i: usize) {
        let old = f64::from(self.spins[i]);
        let row = &self.j[i * self.n..(i + 1) * self.n];
        axpy(-4.0 * old, row, &mut self.field);
        self.spins[i] = -self.spins[i];
    }

    fn spins(&self) -> &[i8] {
        &self.spins
    }
}

struct FactoredState<'a> {
    v: &'a SpinVectors,
    spins: Vec<i8>,
    composite: Vec<f64>,
}

impl<'a> FactoredState<'a> {
    fn new(v: &'a SpinVectors, spins: Vec<i8>) -> Self {
        let composite = v.composite(&spins);
        Self { v, spins, composite }
    }
}

impl FlipState for FactoredState<'_> {
    #[inline]
    fn delta(&self, i: usize) -> f64 {
        let s = f64::from(self.spins[i]);
        4.0 * s * dot(&self.composite, self.v.row(i)) - 4.0 * self.v.self_power(i)
    }

    fn flip(&mut self, i: usize) {
        let old = f64::from(self.spins[i]);
        axpy(-2.0 * old, self.v.row(i), &mut self.composite);
        self.spins[i] = -self.spins[i];
    }

    fn spins(&self) -> &[i8] {
        &self.spins
    }
}

fn random_spins(rng: &mut ChaCha8Rng, n: usize) -> Vec<i8> {
    (0..n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect()
}

fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64);
    rng
}

struct ReplicaOutcome {
    spins: Vec<i8>,
    energy: f64,
    trace: Option<Vec<TracePoint>>,
}

/// Lowest energy wins; ties go to the lowest replica index.
fn pick_best(outcomes: Vec<ReplicaOutcome>) -> ReplicaOutcome {
    let mut best: Option<ReplicaOutcome> = None;
    for o in outcomes {
        match &best {
            Some(b) if o.energy >= b.energy => {}
            _ => best = Some(o),
        }
    }
    best.expect("at least one replica")
}

// ---------------------------------------------------------------------------
// exhaustive

fn lex_key(spins: &[i8]) -> impl Iterator<Item = u8> + '_ {
    spins.iter().map(|&s| u8::from(s == -1))
}

/// Global minimum by Gray-code enumeration of all `2^N` configurations.
/// Ties resolve to the lexicographically smallest vector with `+1 < −1`.
pub fn solve_exhaustive(model: &IsingModel) -> Result<SolveReport> {
    let started = Instant::now();
    let n = model.n();
    if n > EXHAUSTIVE_MAX_SPINS {
        return Err(Error::TooLarge(format!(
            "exhaustive search limited to {EXHAUSTIVE_MAX_SPINS} spins, model has {n}"
        )));
    }
    let dense = model.to_dense(usize::MAX)?;
    let j = dense.dense_couplings().expect("dense model");
    let mut state = DenseState::new(&dense, j, vec![1; n]);
    let mut energy = dense.energy_unchecked(state.spins());
    let mut best_spins = state.spins().to_vec();
    let mut best_exact = energy;
    let mut best_running = energy;
    let scale = dense.max_field_scale().max(energy.abs()).max(f64::MIN_POSITIVE);
    let tol = 1e-9 * scale;
    let total: u64 = 1u64 << n;
    for k in 1..total {
        let i = k.trailing_zeros() as usize;
        energy += state.delta(i);
        state.flip(i);
        if energy < best_running - tol {
            best_spins.copy_from_slice(state.spins());
            best_exact = dense.energy_unchecked(&best_spins);
            best_running = energy;
        } else if energy <= best_running + tol {
            let exact = dense.energy_unchecked(state.spins());
            let better = exact < best_exact
                || (exact == best_exact && lex_key(state.spins()).lt(lex_key(&best_spins)));
            if better {
                best_spins.copy_from_slice(state.spins());
                best_exact = exact;
                best_running = energy.min(best_running);
            }
        }
    }
    SolveReport::new(
        model,
        SpinConfig::new(best_spins)?,
        "exhaustive",
        0,
        total as usize,
        started,
        1,
        None,
    )
}

// ---------------------------------------------------------------------------
// simulated annealing

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    /// Start temperature; defaults to `max_i Σ_j |J_ij| + |λ_i|` (a Cauchy–Schwarz
    /// bound of it for channel-backed models above the dense threshold).
    pub t0: Option<f64>,
    /// Final temperature; defaults to `1e-4 · t0`.
    pub t_end: Option<f64>,
    pub sweeps: usize,
    pub seed: u64,
    pub replicas: usize,
    pub record_trace: bool,
    pub dense_threshold: usize,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            t0: None,
            t_end: None,
            sweeps: 200,
            seed: 0,
            replicas: 8,
            record_trace: false,
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
        }
    }
}

impl SaParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn schedule(&self, model: &IsingModel) -> Result<(f64, f64)> {
        let t0 = match self.t0 {
            Some(t) => t,
            None => {
                let scale = model.max_field_scale();
                if scale > 0.0 {
                    scale
                } else {
                    1.0
                }
            }
        };
        let t_end = self.t_end.unwrap_or(1e-4 * t0);
        if !(t0.is_finite() && t_end > 0.0 && t0 > t_end) {
            return Err(Error::InvalidParameter(format!(
                "annealing schedule needs t0 > t_end > 0 (t0 = {t0}, t_end = {t_end})"
            )));
        }
        if self.sweeps == 0 || self.replicas == 0 {
            return Err(Error::InvalidParameter("sweeps and replicas must be positive".into()));
        }
        Ok((t0, t_end))
    }
}

fn anneal<S: FlipState>(
    mut state: S,
    mut energy: f64,
    temperatures: &[f64],
    rng: &mut ChaCha8Rng,
    record_trace: bool,
) -> (Vec<i8>, Option<Vec<TracePoint>>) {
    let n = state.spins().len();
    let mut best = state.spins().to_vec();
    let mut best_energy = energy;
    let mut trace = record_trace.then(|| Vec::with_capacity(temperatures.len()));
    for (sweep, &t) in temperatures.iter().enumerate() {
        let beta = 1.0 / t;
        for i in 0..n {
            let delta = state.delta(i);
            if delta <= 0.0 || rng.random::<f64>() < (-delta * beta).exp() {
                state.flip(i);
                energy += delta;
            }
        }
        if energy < best_energy {
            best_energy = energy;
            best.copy_from_slice(state.spins());
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(TracePoint {
                step: sweep,
                best_energy,
            });
        }
    }
    (best, trace)
}

/// Metropolis single-spin-flip annealing with a geometric temperature
/// schedule and independent replicas.
pub fn solve_sa(model: &IsingModel, params: &SaParams) -> Result<SolveReport> {
    let started = Instant::now();
    let n = model.n();
    let materialized = if model.is_factored() && n <= params.dense_threshold {
        Some(model.to_dense(usize::MAX)?)
    } else {
        None
    };
    let dense_model = materialized.as_ref().unwrap_or(model);
    let (t0, t_end) = params.schedule(dense_model)?;
    let sweeps = params.sweeps;
    let temperatures: Vec<f64> = (0..sweeps)
        .map(|k| {
            if sweeps == 1 {
                t0
            } else {
                t0 * (t_end / t0).powf(k as f64 / (sweeps - 1) as f64)
            }
        })
        .collect();
    let (dense_j, factored) = match dense_model.couplings() {
        Couplings::Dense(j) => (Some(j.as_slice()), None),
        Couplings::Factored(v) => (None, Some(v)),
    };

    let outcomes: Vec<ReplicaOutcome> = (0..params.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(params.seed, r);
            let init = random_spins(&mut rng, n);
            let energy = model.energy_unchecked(&init);
            let (spins, trace) = match (dense_j, factored) {
                (Some(j), _) => anneal(DenseState::new(dense_model, j, init), energy, &temperatures, &mut rng, params.record_trace),
                (None, Some(v)) => anneal(FactoredState::new(v, init), energy, &temperatures, &mut rng, params.record_trace),
                (None, None) => unreachable!("model storage resolved above"),
            };
            let energy = model.energy_unchecked(&spins);
            ReplicaOutcome { spins, energy, trace }
        })
        .collect();
    let best = pick_best(outcomes);
    SolveReport::new(
        model,
        SpinConfig::new(best.spins)?,
        "cim-sa",
        params.seed,
        sweeps,
        started,
        params.replicas,
        best.trace,
    )
}

// ---------------------------------------------------------------------------
// ballistic simulated bifurcation

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainRamp {
    /// Pump amplitude rises linearly from 0 to 1.
    #[default]
    Linear,
    /// Quadratic rise; spends longer near the bifurcation point.
    Quadratic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationParams {
    pub steps: usize,
    pub dt: f64,
    pub schedule: GainRamp,
    pub seed: u64,
    pub replicas: usize,
    pub record_trace: bool,
}

impl Default for BifurcationParams {
    fn default() -> Self {
        Self {
            steps: 1000,
            dt: 1.25,
            schedule: GainRamp::Linear,
            seed: 0,
            replicas: 8,
            record_trace: false,
        }
    }
}

/// Coupling operator `x ↦ J x` (zero diagonal) for either storage.
fn apply_couplings(model: &IsingModel, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
    let n = model.n();
    match model.couplings() {
        Couplings::Dense(j) => {
            for i in 0..n {
                out[i] = dot(&j[i * n..(i + 1) * n], x);
            }
        }
        Couplings::Factored(v) => {
            scratch.iter_mut().for_each(|s| *s = 0.0);
            for (i, &xi) in x.iter().enumerate() {
                axpy(xi, v.row(i), scratch);
            }
            for i in 0..n {
                out[i] = -dot(v.row(i), scratch) + x[i] * v.self_power(i);
            }
        }
    }
}

/// `Σ_{i≠j} J_ij²`.
fn coupling_frobenius_sqr(model: &IsingModel) -> f64 {
    let n = model.n();
    match model.couplings() {
        Couplings::Dense(j) => j.iter().map(|c| c * c).sum(),
        Couplings::Factored(v) => {
            // Σ_ij (u_i·u_j)² = ‖UᵀU‖_F²
            let d = v.dim();
            let mut gram = vec![0.0; d * d];
            for i in 0..n {
                let row = v.row(i);
                for a in 0..d {
                    axpy(row[a], row, &mut gram[a * d..(a + 1) * d]);
                }
            }
            let total: f64 = gram.iter().map(|g| g * g).sum();
            let diag: f64 = (0..n).map(|i| v.self_power(i) * v.self_power(i)).sum();
            (total - diag).max(0.0)
        }
    }
}

fn signs(x: &[f64]) -> Vec<i8> {
    x.iter().map(|&v| if v < 0.0 { -1 } else { 1 }).collect()
}

fn bifurcate(
    model: &IsingModel,
    params: &BifurcationParams,
    c0: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<i8>, Option<Vec<TracePoint>>) {
    let n = model.n();
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
    let mut y: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
    let mut force = vec![0.0; n];
    let mut scratch = vec![0.0; model.spin_vectors().map_or(0, |v| v.dim())];
    let checkpoints = (params.steps / 100).max(1);
    let mut trace = params.record_trace.then(Vec::new);
    let mut best_energy = f64::INFINITY;
    for step in 0..params.steps {
        let progress = step as f64 / params.steps as f64;
        let pump = match params.schedule {
            GainRamp::Linear => progress,
            GainRamp::Quadratic => progress * progress,
        };
        apply_couplings(model, &x, &mut force, &mut scratch);
        for i in 0..n {
            // minimizing σᵀJσ: the coupling force is −2 J x
            y[i] += (-(1.0 - pump) * x[i] - 2.0 * c0 * force[i]) * params.dt;
            x[i] += y[i] * params.dt;
            if x[i].abs() > 1.0 {
                x[i] = x[i].signum();
                y[i] = 0.0;
            }
        }
        if let Some(tr) = trace.as_mut() {
            if step % checkpoints == 0 || step + 1 == params.steps {
                best_energy = best_energy.min(model.energy_unchecked(&signs(&x)));
                tr.push(TracePoint { step, best_energy });
            }
        }
    }
    (signs(&x), trace)
}

/// Continuous-state annealer in the style of ballistic simulated
/// bifurcation. Models with external fields are first embedded with an
/// auxiliary spin; the returned configuration is mapped back.
pub fn solve_bifurcation(model: &IsingModel, params: &BifurcationParams) -> Result<SolveReport> {
    let started = Instant::now();
    if params.steps == 0 || params.replicas == 0 || !(params.dt > 0.0 && params.dt.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bifurcation needs positive steps, replicas and dt (steps = {}, replicas = {}, dt = {})",
            params.steps, params.replicas, params.dt
        )));
    }
    let has_fields = model.fields().iter().any(|&l| l != 0.0);
    let aux = has_fields.then(|| absorb_field_aux_spin(model));
    let work = aux.as_ref().map_or(model, |a| &a.model);
    let n = work.n();
    let best = if n == 0 {
        ReplicaOutcome {
            spins: Vec::new(),
            energy: model.offset(),
            trace: None,
        }
    } else {
        let frob = coupling_frobenius_sqr(work);
        let c0 = if frob > 0.0 && n > 1 {
            // 2J is the effective coupling; normalize by its RMS entry
            let rms = (4.0 * frob / (n * (n - 1)) as f64).sqrt();
            0.5 / (rms * (n as f64).sqrt())
        } else {
            0.0
        };
        let outcomes: Vec<ReplicaOutcome> = (0..params.replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_rng(params.seed, r);
                let (spins, trace) = bifurcate(work, params, c0, &mut rng);
                let spins = match &aux {
                    Some(a) => a.normalize(&spins).expect("length preserved").into_inner(),
                    None => spins,
                };
                let energy = model.energy_unchecked(&spins);
                ReplicaOutcome { spins, energy, trace }
            })
            .collect();
        pick_best(outcomes)
    };
    SolveReport::new(
        model,
        SpinConfig::new(best.spins)?,
        "cim-bif",
        params.seed,
        params.steps,
        started,
        params.replicas,
        best.trace,
    )
}

pub struct Exhaustive;

impl Solver for Exhaustive {
    fn name(&self) -> &str {
        "exhaustive"
    }

    fn solve(&self, model: &IsingModel) -> Result<SolveReport> {
        solve_exhaustive(model)
    }
}

pub struct SimulatedAnnealing(pub SaParams);

impl Solver for SimulatedAnnealing {
    fn name(&self) -> &str {
        "cim-sa"
    }

    fn solve(&self, model: &IsingModel) -> Result<SolveReport> {
        solve_sa(model, &self.0)
    }
}

pub struct Bifurcation(pub BifurcationParams);

impl Solver for Bifurcation {
    fn name(&self) -> &str {
        "cim-bif"
    }

    fn solve(&self, model: &IsingModel) -> Result<SolveReport> {
        solve_bifurcation(model, &self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ComplexMatrix, C64};
    use crate::ising::build_binary_ising;
    use crate::reduction::closed_form_spins;

    fn random_dense(rng: &mut ChaCha8Rng, n: usize) -> IsingModel {
        let j = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        IsingModel::from_dense(n, j, h, 0.0).unwrap()
    }

    fn brute_force_min(model: &IsingModel) -> f64 {
        let n = model.n();
        (0u64..1 << n)
            .map(|m| {
                let s: Vec<i8> = (0..n).map(|i| if m >> i & 1 == 0 { 1 } else { -1 }).collect();
                model.energy(&s).unwrap()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn exhaustive_single_spin() {
        let m = IsingModel::from_dense(1, vec![0.0], vec![3.0], 0.5).unwrap();
        let r = solve_exhaustive(&m).unwrap();
        assert_eq!(r.best_spins.as_slice(), &[-1]);
        assert_eq!(r.best_energy, -3.0 + 0.5);
    }

    #[test]
    fn exhaustive_ferromagnet_tie_break() {
        let m = IsingModel::from_dense(2, vec![0.0, -1.0, -1.0, 0.0], vec![0.0, 0.0], 0.0).unwrap();
        let r = solve_exhaustive(&m).unwrap();
        assert_eq!(r.best_spins.as_slice(), &[1, 1]);
        assert_eq!(r.best_energy, -2.0);
    }

    #[test]
    fn exhaustive_matches_brute_force_and_guards_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let m = random_dense(&mut rng, 10);
            let r = solve_exhaustive(&m).unwrap();
            assert_eq!(r.best_energy, brute_force_min(&m));
        }
        let big = IsingModel::from_dense(25, vec![0.0; 625], vec![0.0; 25], 0.0).unwrap();
        assert!(matches!(solve_exhaustive(&big), Err(Error::TooLarge(_))));
    }

    #[test]
    fn exhaustive_equals_best_of_twenty_sa_restarts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_dense(&mut rng, 10);
        let exact = solve_exhaustive(&m).unwrap().best_energy;
        let best_sa = (0..20)
            .map(|seed| solve_sa(&m, &SaParams { replicas: 1, ..SaParams::with_seed(seed) }).unwrap().best_energy)
            .fold(f64::INFINITY, f64::min);
        assert!((best_sa - exact).abs() <= 1e-12 * exact.abs());
    }

    #[test]
    fn sa_solves_field_only_model() {
        let fields = vec![0.5, -2.0, 1.5, -0.25, 3.0];
        let m = IsingModel::from_dense(5, vec![0.0; 25], fields.clone(), 0.0).unwrap();
        let r = solve_sa(&m, &SaParams::with_seed(3)).unwrap();
        assert_eq!(r.best_spins.as_slice(), closed_form_spins(&fields).as_slice());
        // a single cold sweep already lands on it
        let cold = SaParams {
            t0: Some(1e-9),
            t_end: Some(1e-10),
            sweeps: 1,
            replicas: 1,
            ..SaParams::with_seed(4)
        };
        let r = solve_sa(&m, &cold).unwrap();
        assert_eq!(r.best_spins.as_slice(), closed_form_spins(&fields).as_slice());
    }

    #[test]
    fn sa_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_dense(&mut rng, 30);
        let p = SaParams {
            record_trace: true,
            ..SaParams::with_seed(17)
        };
        let mut a = solve_sa(&m, &p).unwrap();
        let mut b = solve_sa(&m, &p).unwrap();
        a.wall_time = 0.0;
        b.wall_time = 0.0;
        assert_eq!(a, b);
    }

    #[test]
    fn sa_rejects_bad_schedule() {
        let m = IsingModel::from_dense(1, vec![0.0], vec![1.0], 0.0).unwrap();
        let p = SaParams {
            t0: Some(1.0),
            t_end: Some(2.0),
            ..SaParams::default()
        };
        assert!(solve_sa(&m, &p).is_err());
        let p = SaParams {
            t0: Some(1.0),
            t_end: Some(0.0),
            ..SaParams::default()
        };
        assert!(solve_sa(&m, &p).is_err());
    }

    #[test]
    fn sa_matches_exhaustive_on_small_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut hits = 0;
        for k in 0..100 {
            let n = rng.random_range(2..=12);
            let m = random_dense(&mut rng, n);
            let exact = solve_exhaustive(&m).unwrap().best_energy;
            let sa = solve_sa(&m, &SaParams::with_seed(k)).unwrap().best_energy;
            assert!(sa >= exact - 1e-12 * exact.abs());
            if (sa - exact).abs() <= 1e-9 * exact.abs() {
                hits += 1;
            }
        }
        assert!(hits >= 95, "{hits}/100");
    }

    #[test]
    fn bifurcation_ferromagnet() {
        let m = IsingModel::from_dense(2, vec![0.0, -1.0, -1.0, 0.0], vec![0.0, 0.0], 0.0).unwrap();
        let r = solve_bifurcation(&m, &BifurcationParams::default()).unwrap();
        assert_eq!(r.best_spins.as_slice()[0], r.best_spins.as_slice()[1]);
        assert_eq!(r.best_energy, -2.0);
    }

    #[test]
    fn bifurcation_matches_exhaustive_on_small_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut hits = 0;
        for k in 0..100 {
            let n = rng.random_range(2..=12);
            let m = random_dense(&mut rng, n);
            let exact = solve_exhaustive(&m).unwrap().best_energy;
            let params = BifurcationParams {
                seed: k,
                ..BifurcationParams::default()
            };
            let r = solve_bifurcation(&m, &params).unwrap();
            assert_eq!(r.best_energy, m.energy(r.best_spins.as_slice()).unwrap());
            if (r.best_energy - exact).abs() <= 1e-9 * exact.abs() {
                hits += 1;
            }
        }
        assert!(hits >= 90, "{hits}/100");
    }

    #[test]
    fn bifurcation_rejects_bad_params() {
        let m = IsingModel::from_dense(1, vec![0.0], vec![1.0], 0.0).unwrap();
        let p = BifurcationParams {
            steps: 0,
            ..BifurcationParams::default()
        };
        assert!(solve_bifurcation(&m, &p).is_err());
    }

    #[test]
    fn local_field_examples() {
        let zero = IsingModel::from_dense(3, vec![0.0; 9], vec![1.0, -2.0, 0.5], 0.0).unwrap();
        assert_eq!(local_field(&zero, &[1, -1, 1]).unwrap(), vec![1.0, -2.0, 0.5]);
        // N=2, J12=1, λ=(0.5, 0): ℓ = (2·1·σ2 + 0.5, 2·1·σ1)
        let m = IsingModel::from_dense(2, vec![0.0, 1.0, 1.0, 0.0], vec![0.5, 0.0], 0.0).unwrap();
        assert_eq!(local_field(&m, &[1, -1]).unwrap(), vec![-1.5, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_dense(&mut rng, 9);
        let s = random_spins(&mut rng, 9);
        let l = local_field(&m, &s).unwrap();
        let e = m.energy(&s).unwrap();
        for i in 0..9 {
            let mut t = s.clone();
            t[i] = -t[i];
            let recomputed = m.energy(&t).unwrap() - e;
            assert!((recomputed - (-2.0 * f64::from(s[i]) * l[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn incremental_delta_tracks_full_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = ComplexMatrix::from_rows(40, 4, (0..160).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()).unwrap();
        let hd: Vec<C64> = (0..4).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let model = build_binary_ising(&hd, &v).unwrap();
        let dense = model.to_dense(1 << 24).unwrap();
        let init = random_spins(&mut rng, 40);
        let mut ds = DenseState::new(&dense, dense.dense_couplings().unwrap(), init.clone());
        let mut fs = FactoredState::new(model.spin_vectors().unwrap(), init);
        for _ in 0..10_000 {
            let i = rng.random_range(0..40);
            let before = dense.energy(ds.spins()).unwrap();
            let dd = ds.delta(i);
            let df = fs.delta(i);
            ds.flip(i);
            fs.flip(i);
            let after = dense.energy(ds.spins()).unwrap();
            assert!((dd - (after - before)).abs() <= 1e-9 * before.abs().max(1.0));
            assert!((dd - df).abs() <= 1e-7 * dd.abs().max(1e-12));
        }
        assert_eq!(ds.spins(), fs.spins());
    }

    #[test]
    fn factored_and_dense_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let v = ComplexMatrix::from_rows(30, 3, (0..90).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()).unwrap();
        let model = build_binary_ising(&[C64::new(0.2, 0.1); 3], &v).unwrap();
        let factored = solve_sa(&model, &SaParams { dense_threshold: 0, ..SaParams::with_seed(1) }).unwrap();
        let dense = solve_sa(&model, &SaParams::with_seed(1)).unwrap();
        assert!((factored.best_energy - dense.best_energy).abs() <= 1e-9 * dense.best_energy.abs());
        assert!((factored.gain_db - gain_db_from_energy(factored.best_energy)).abs() < 1e-12);
    }

    #[test]
    fn replica_results_do_not_depend_on_thread_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_dense(&mut rng, 25);
        let p = SaParams::with_seed(99);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| solve_sa(&m, &p)).unwrap();
        let b = three.install(|| solve_sa(&m, &p)).unwrap();
        assert_eq!(a.best_spins, b.best_spins);
        assert_eq!(a.best_energy, b.best_energy);
    }
}
