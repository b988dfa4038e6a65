//! Ising formulation of the discrete phase problem.
//!
//! Energies follow `H(σ) = σᵀJσ + λᵀσ + offset` with `J` symmetric and
//! zero-diagonal. For models built from a channel the offset is chosen so
//! that `H(σ) = −‖h(decode(σ))‖²` exactly, i.e. energies read directly as
//! negative channel power.
//!
//! Channel-derived models are stored in factored form: every spin `i` owns a
//! complex vector `u_i` (length `N_BS`) such that `h = h_d + Σ_i σ_i u_i`.
//! Then `J_ij = −Re⟨u_i, u_j⟩` for `i ≠ j`, `λ_i = −2 Re⟨h_d, u_i⟩` and
//! `offset = −‖h_d‖² − Σ_i ‖u_i‖²`. For binary phases `u_n = V[n, :]`; for
//! quaternary phases `φ_n = (σ_n^R + jσ_n^I)/√2`, giving `u_n^R = V[n, :]/√2`
//! and `u_n^I = −j V[n, :]/√2`. Complex vectors are kept as interleaved
//! `(re, im)` reals so `Re⟨a, b⟩` is a plain dot product.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::channel::{ComplexMatrix, PhaseConfig, PhaseLevel, C64};
use crate::error::{Error, Result};

/// Largest dense coupling matrix materialized without an explicit budget.
pub const DEFAULT_DENSE_BUDGET_BYTES: usize = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Binary,
    Quaternary,
    /// No phase interpretation (hand-built, reduced or auxiliary models).
    Raw,
}

impl Encoding {
    fn as_str(self) -> &'static str {
        match self {
            Encoding::Binary => "binary",
            Encoding::Quaternary => "quaternary",
            Encoding::Raw => "raw",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Encoding::Binary),
            "quaternary" => Ok(Encoding::Quaternary),
            "raw" => Ok(Encoding::Raw),
            other => Err(Error::Parse(format!("unknown encoding '{other}'"))),
        }
    }
}

/// ±1 spin vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinConfig(Vec<i8>);

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        check_spins(&spins)?;
        Ok(Self(spins))
    }

    pub fn all_up(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub(crate) fn check_spins(spins: &[i8]) -> Result<()> {
    match spins.iter().position(|&s| s != 1 && s != -1) {
        Some(i) => Err(Error::InvalidParameter(format!(
            "spin {i} is {} (expected ±1)",
            spins[i]
        ))),
        None => Ok(()),
    }
}

/// Real dot product with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`.
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Per-spin channel contributions backing a factored model.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinVectors {
    dim: usize,
    rows: Vec<f64>,
    direct: Vec<f64>,
    self_power: Vec<f64>,
}

impl SpinVectors {
    fn new(dim: usize, rows: Vec<f64>, direct: Vec<f64>) -> Self {
        debug_assert_eq!(direct.len(), dim);
        let self_power = if dim == 0 {
            vec![0.0; 0]
        } else {
            rows.chunks_exact(dim).map(|r| dot(r, r)).collect()
        };
        Self {
            dim,
            rows,
            direct,
            self_power,
        }
    }

    pub fn len(&self) -> usize {
        self.self_power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.self_power.is_empty()
    }

    /// Interleaved length, `2·N_BS`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn direct(&self) -> &[f64] {
        &self.direct
    }

    pub fn self_power(&self, i: usize) -> f64 {
        self.self_power[i]
    }

    /// `h_d + Σ σ_i u_i` in interleaved form.
    pub fn composite(&self, spins: &[i8]) -> Vec<f64> {
        let mut h = self.direct.clone();
        for (i, &s) in spins.iter().enumerate() {
            axpy(f64::from(s), self.row(i), &mut h);
        }
        h
    }

    fn select(&self, keep: &[usize], direct: Vec<f64>) -> Self {
        let mut rows = Vec::with_capacity(keep.len() * self.dim);
        let mut self_power = Vec::with_capacity(keep.len());
        for &i in keep {
            rows.extend_from_slice(self.row(i));
            self_power.push(self.self_power[i]);
        }
        Self {
            dim: self.dim,
            rows,
            direct,
            self_power,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Couplings {
    /// Row-major `N × N`, symmetric with zero diagonal.
    Dense(Vec<f64>),
    Factored(SpinVectors),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel {
    couplings: Couplings,
    fields: Vec<f64>,
    offset: f64,
    encoding: Encoding,
    n_ris: usize,
}

impl IsingModel {
    /// Builds a dense model from an arbitrary (not necessarily symmetric)
    /// square matrix. `J` is symmetrized and its diagonal folded into the offset.
    pub fn from_dense(n: usize, mut j: Vec<f64>, fields: Vec<f64>, offset: f64) -> Result<Self> {
        if j.len() != n * n {
            return Err(Error::mismatch("coupling matrix", n * n, j.len()));
        }
        if fields.len() != n {
            return Err(Error::mismatch("field vector", n, fields.len()));
        }
        let mut offset = offset;
        for i in 0..n {
            offset += j[i * n + i];
            j[i * n + i] = 0.0;
            for k in (i + 1)..n {
                let s = 0.5 * (j[i * n + k] + j[k * n + i]);
                j[i * n + k] = s;
                j[k * n + i] = s;
            }
        }
        Ok(Self {
            couplings: Couplings::Dense(j),
            fields,
            offset,
            encoding: Encoding::Raw,
            n_ris: 0,
        })
    }

    fn from_spin_vectors(vectors: SpinVectors, encoding: Encoding, n_ris: usize) -> Self {
        let fields = (0..vectors.len())
            .map(|i| -2.0 * dot(vectors.direct(), vectors.row(i)))
            .collect();
        let offset = -dot(vectors.direct(), vectors.direct()) - vectors.self_power.iter().sum::<f64>();
        Self {
            couplings: Couplings::Factored(vectors),
            fields,
            offset,
            encoding,
            n_ris,
        }
    }

    /// Factored model over the spins in `keep` with a replacement direct channel.
    pub(crate) fn factored_subset(v: &SpinVectors, keep: &[usize], direct: Vec<f64>) -> Self {
        Self::from_spin_vectors(v.select(keep, direct), Encoding::Raw, 0)
    }

    pub fn with_encoding(mut self, encoding: Encoding, n_ris: usize) -> Self {
        self.encoding = encoding;
        self.n_ris = n_ris;
        self
    }

    pub fn n(&self) -> usize {
        self.fields.len()
    }

    pub fn n_ris(&self) -> usize {
        self.n_ris
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    pub fn is_factored(&self) -> bool {
        matches!(self.couplings, Couplings::Factored(_))
    }

    pub fn spin_vectors(&self) -> Option<&SpinVectors> {
        match &self.couplings {
            Couplings::Factored(v) => Some(v),
            Couplings::Dense(_) => None,
        }
    }

    pub fn dense_couplings(&self) -> Option<&[f64]> {
        match &self.couplings {
            Couplings::Dense(j) => Some(j),
            Couplings::Factored(_) => None,
        }
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        match &self.couplings {
            Couplings::Dense(m) => m[i * self.n() + j],
            Couplings::Factored(v) => {
                if i == j {
                    0.0
                } else {
                    -dot(v.row(i), v.row(j))
                }
            }
        }
    }

    /// Copy with an explicit coupling matrix, refusing above `budget_bytes`.
    pub fn to_dense(&self, budget_bytes: usize) -> Result<IsingModel> {
        let n = self.n();
        let v = match &self.couplings {
            Couplings::Dense(_) => return Ok(self.clone()),
            Couplings::Factored(v) => v,
        };
        let bytes = n.saturating_mul(n).saturating_mul(std::mem::size_of::<f64>());
        if bytes > budget_bytes {
            return Err(Error::TooLarge(format!(
                "dense couplings for {n} spins need {bytes} bytes (budget {budget_bytes})"
            )));
        }
        let mut j = vec![0.0; n * n];
        for a in 0..n {
            for b in (a + 1)..n {
                let c = -dot(v.row(a), v.row(b));
                j[a * n + b] = c;
                j[b * n + a] = c;
            }
        }
        Ok(IsingModel {
            couplings: Couplings::Dense(j),
            fields: self.fields.clone(),
            offset: self.offset,
            encoding: self.encoding,
            n_ris: self.n_ris,
        })
    }

    fn check_len(&self, spins: &[i8]) -> Result<()> {
        if spins.len() != self.n() {
            return Err(Error::mismatch("spin vector", self.n(), spins.len()));
        }
        check_spins(spins)
    }

    /// `σᵀJσ + λᵀσ + offset`.
    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        self.check_len(spins)?;
        Ok(self.energy_unchecked(spins))
    }

    pub(crate) fn energy_unchecked(&self, spins: &[i8]) -> f64 {
        match &self.couplings {
            Couplings::Dense(j) => {
                let n = self.n();
                let mut quad = 0.0;
                for i in 0..n {
                    let row = &j[i * n..(i + 1) * n];
                    let mut acc = 0.0;
                    for (jij, &s) in row.iter().zip(spins) {
                        acc += jij * f64::from(s);
                    }
                    quad += f64::from(spins[i]) * acc;
                }
                let lin: f64 = self.fields.iter().zip(spins).map(|(l, &s)| l * f64::from(s)).sum();
                quad + lin + self.offset
            }
            Couplings::Factored(v) => {
                let h = v.composite(spins);
                -dot(&h, &h)
            }
        }
    }

    /// Local fields `ℓ_i = 2 Σ_j J_ij σ_j + λ_i`; flipping spin `i` changes
    /// the energy by `−2 σ_i ℓ_i`.
    pub fn local_field(&self, spins: &[i8]) -> Result<Vec<f64>> {
        self.check_len(spins)?;
        let n = self.n();
        Ok(match &self.couplings {
            Couplings::Dense(j) => (0..n)
                .map(|i| {
                    let row = &j[i * n..(i + 1) * n];
                    let acc: f64 = row.iter().zip(spins).map(|(c, &s)| c * f64::from(s)).sum();
                    2.0 * acc + self.fields[i]
                })
                .collect(),
            Couplings::Factored(v) => {
                let h = v.composite(spins);
                (0..n)
                    .map(|i| -2.0 * dot(&h, v.row(i)) + 2.0 * f64::from(spins[i]) * v.self_power(i))
                    .collect()
            }
        })
    }

    /// `max_i Σ_j |J_ij| + |λ_i|`. For factored models the coupling sum is
    /// replaced by its Cauchy–Schwarz bound `‖u_i‖ Σ_{j≠i} ‖u_j‖`.
    pub fn max_field_scale(&self) -> f64 {
        let n = self.n();
        match &self.couplings {
            Couplings::Dense(j) => (0..n)
                .map(|i| j[i * n..(i + 1) * n].iter().map(|c| c.abs()).sum::<f64>() + self.fields[i].abs())
                .fold(0.0, f64::max),
            Couplings::Factored(v) => {
                let norms: Vec<f64> = (0..n).map(|i| v.self_power(i).sqrt()).collect();
                let total: f64 = norms.iter().sum();
                (0..n)
                    .map(|i| norms[i] * (total - norms[i]) + self.fields[i].abs())
                    .fold(0.0, f64::max)
            }
        }
    }
}

fn interleave(row: &[C64], scale: C64, out: &mut Vec<f64>) {
    for &x in row {
        let y = x * scale;
        out.push(y.re);
        out.push(y.im);
    }
}

fn check_channel(direct: &[C64], cascade: &ComplexMatrix) -> Result<()> {
    if direct.len() != cascade.cols() {
        return Err(Error::mismatch("direct channel vs cascade columns", cascade.cols(), direct.len()));
    }
    Ok(())
}

/// Binary model: `J = −Re{VVᴴ}` (off-diagonal), `λᵀ = −2 Re{h_dᵀVᴴ}`.
pub fn build_binary_ising(direct: &[C64], cascade: &ComplexMatrix) -> Result<IsingModel> {
    check_channel(direct, cascade)?;
    let n = cascade.rows();
    let dim = 2 * cascade.cols();
    let one = C64::new(1.0, 0.0);
    let mut rows = Vec::with_capacity(n * dim);
    for r in 0..n {
        interleave(cascade.row(r), one, &mut rows);
    }
    let mut d = Vec::with_capacity(dim);
    interleave(direct, one, &mut d);
    Ok(IsingModel::from_spin_vectors(SpinVectors::new(dim, rows, d), Encoding::Binary, n))
}

/// Quaternary model over stacked (real; imaginary) spin halves, normalized so
/// that each element's coefficient is unit modulus.
pub fn build_quaternary_ising(direct: &[C64], cascade: &ComplexMatrix) -> Result<IsingModel> {
    check_channel(direct, cascade)?;
    let n = cascade.rows();
    let dim = 2 * cascade.cols();
    let re_scale = C64::new(FRAC_1_SQRT_2, 0.0);
    let im_scale = C64::new(0.0, -FRAC_1_SQRT_2);
    let mut rows = Vec::with_capacity(2 * n * dim);
    for r in 0..n {
        interleave(cascade.row(r), re_scale, &mut rows);
    }
    for r in 0..n {
        interleave(cascade.row(r), im_scale, &mut rows);
    }
    let mut d = Vec::with_capacity(dim);
    interleave(direct, C64::new(1.0, 0.0), &mut d);
    Ok(IsingModel::from_spin_vectors(SpinVectors::new(dim, rows, d), Encoding::Quaternary, n))
}

/// Quaternary model with the block matrices transcribed as printed:
/// `J = [[−Re M, +Im M], [+Im M, +Re M]]`, `λ = (−2 Re{h_dᵀVᴴ}, +2 Im{h_dᵀVᴴ})`
/// with `M = VVᴴ` and spins taking the unnormalized values `{±1 ± j}`.
/// The energy of this form is not `−‖h‖²`; it is kept for comparison runs.
pub fn build_quaternary_ising_literal(
    direct: &[C64],
    cascade: &ComplexMatrix,
    budget_bytes: usize,
) -> Result<IsingModel> {
    check_channel(direct, cascade)?;
    let n = cascade.rows();
    let size = 2 * n;
    let bytes = size.saturating_mul(size).saturating_mul(8);
    if bytes > budget_bytes {
        return Err(Error::TooLarge(format!(
            "literal quaternary build for {n} elements needs {bytes} bytes"
        )));
    }
    let mut j = vec![0.0; size * size];
    for a in 0..n {
        for b in 0..n {
            let m: C64 = cascade.row(a).iter().zip(cascade.row(b)).map(|(x, y)| x * y.conj()).sum();
            j[a * size + b] = -m.re;
            j[a * size + n + b] = m.im;
            j[(n + a) * size + b] = m.im;
            j[(n + a) * size + n + b] = m.re;
        }
    }
    let mut fields = vec![0.0; size];
    for a in 0..n {
        let t: C64 = direct.iter().zip(cascade.row(a)).map(|(h, v)| h * v.conj()).sum();
        fields[a] = -2.0 * t.re;
        fields[n + a] = 2.0 * t.im;
    }
    Ok(IsingModel::from_dense(size, j, fields, 0.0)?.with_encoding(Encoding::Quaternary, n))
}

/// Spins → per-element phases.
pub fn decode(model: &IsingModel, spins: &[i8]) -> Result<PhaseConfig> {
    model.check_len(spins)?;
    match model.encoding() {
        Encoding::Binary => Ok(PhaseConfig {
            level: PhaseLevel::Binary,
            indices: spins.iter().map(|&s| if s == 1 { 0 } else { 1 }).collect(),
        }),
        Encoding::Quaternary => {
            let n = model.n_ris();
            let indices = (0..n)
                .map(|k| match (spins[k], spins[n + k]) {
                    (1, 1) => 0,
                    (-1, 1) => 1,
                    (-1, -1) => 2,
                    _ => 3,
                })
                .collect();
            Ok(PhaseConfig {
                level: PhaseLevel::Quaternary,
                indices,
            })
        }
        Encoding::Raw => Err(Error::InvalidParameter(
            "model has no phase encoding".into(),
        )),
    }
}

/// Per-element phases → spins.
pub fn encode(model: &IsingModel, phases: &PhaseConfig) -> Result<SpinConfig> {
    if phases.len() != model.n_ris() {
        return Err(Error::mismatch("phase vector", model.n_ris(), phases.len()));
    }
    match (model.encoding(), phases.level) {
        (Encoding::Binary, PhaseLevel::Binary) => Ok(SpinConfig(
            phases.indices.iter().map(|&i| if i == 0 { 1 } else { -1 }).collect(),
        )),
        (Encoding::Quaternary, PhaseLevel::Quaternary) => {
            let n = phases.len();
            let mut spins = vec![0i8; 2 * n];
            for (k, &idx) in phases.indices.iter().enumerate() {
                let (re, im) = match idx {
                    0 => (1, 1),
                    1 => (-1, 1),
                    2 => (-1, -1),
                    _ => (1, -1),
                };
                spins[k] = re;
                spins[n + k] = im;
            }
            Ok(SpinConfig(spins))
        }
        (enc, level) => Err(Error::InvalidParameter(format!(
            "cannot encode {} phases with {} model",
            level.count(),
            enc.as_str()
        ))),
    }
}

/// A field-free model with one extra (auxiliary) spin at index 0 coupled to
/// every original spin with strength `λ_i / 2`.
#[derive(Clone, Debug)]
pub struct AuxiliaryModel {
    pub model: IsingModel,
}

impl AuxiliaryModel {
    /// Maps an augmented configuration back to the original spins, flipping
    /// everything first when the auxiliary spin came out as −1.
    pub fn normalize(&self, spins: &[i8]) -> Result<SpinConfig> {
        self.model.check_len(spins)?;
        let flip = spins[0] == -1;
        Ok(SpinConfig(
            spins[1..].iter().map(|&s| if flip { -s } else { s }).collect(),
        ))
    }
}

pub fn absorb_field_aux_spin(model: &IsingModel) -> AuxiliaryModel {
    let n = model.n();
    let augmented = match &model.couplings {
        Couplings::Dense(j) => {
            let m = n + 1;
            let mut aug = vec![0.0; m * m];
            for i in 0..n {
                aug[i + 1] = model.fields[i] / 2.0;
                aug[(i + 1) * m] = model.fields[i] / 2.0;
                aug[(i + 1) * m + 1..(i + 2) * m].copy_from_slice(&j[i * n..(i + 1) * n]);
            }
            IsingModel {
                couplings: Couplings::Dense(aug),
                fields: vec![0.0; m],
                offset: model.offset,
                encoding: Encoding::Raw,
                n_ris: 0,
            }
        }
        Couplings::Factored(v) => {
            // the direct channel becomes the auxiliary spin's own vector
            let mut rows = Vec::with_capacity((n + 1) * v.dim());
            rows.extend_from_slice(v.direct());
            rows.extend_from_slice(&v.rows);
            let mut self_power = Vec::with_capacity(n + 1);
            self_power.push(dot(v.direct(), v.direct()));
            self_power.extend_from_slice(&v.self_power);
            let vectors = SpinVectors {
                dim: v.dim(),
                rows,
                direct: vec![0.0; v.dim()],
                self_power,
            };
            IsingModel {
                couplings: Couplings::Factored(vectors),
                fields: vec![0.0; n + 1],
                offset: model.offset,
                encoding: Encoding::Raw,
                n_ris: 0,
            }
        }
    };
    AuxiliaryModel { model: augmented }
}

fn quantize_in_place(values: &mut [f64], bits: u32) {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return;
    }
    let step = max / f64::from((1u32 << (bits - 1)) - 1);
    for v in values.iter_mut() {
        *v = (*v / step).round() * step;
    }
}

/// Uniform quantization of couplings (and, on its own scale, of fields) to
/// `bits`-bit signed levels. The offset is left untouched.
pub fn quantize_couplings(model: &IsingModel, bits: u32) -> Result<IsingModel> {
    if !(2..=31).contains(&bits) {
        return Err(Error::InvalidParameter(format!(
            "quantization needs 2..=31 bits, got {bits}"
        )));
    }
    let mut dense = model.to_dense(DEFAULT_DENSE_BUDGET_BYTES)?;
    if let Couplings::Dense(j) = &mut dense.couplings {
        quantize_in_place(j, bits);
    }
    quantize_in_place(&mut dense.fields, bits);
    Ok(dense)
}

/// Writes the plain-text model dump: header, dense lower triangle of `J`
/// (row `i` holds `J_i0 … J_ii`), then `λ`.
pub fn write_model_dump<W: Write>(model: &IsingModel, mut out: W) -> Result<()> {
    let dense = model.to_dense(DEFAULT_DENSE_BUDGET_BYTES)?;
    let n = dense.n();
    writeln!(out, "ris-ising-model v1")?;
    writeln!(out, "n {n}")?;
    writeln!(out, "encoding {}", dense.encoding.as_str())?;
    writeln!(out, "n_ris {}", dense.n_ris)?;
    writeln!(out, "offset {:e}", dense.offset)?;
    writeln!(out, "J")?;
    for i in 0..n {
        let row: Vec<String> = (0..=i).map(|k| format!("{:e}", dense.coupling(i, k))).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    writeln!(out, "lambda")?;
    let fields: Vec<String> = dense.fields.iter().map(|v| format!("{v:e}")).collect();
    writeln!(out, "{}", fields.join(" "))?;
    Ok(())
}

pub fn read_model_dump<R: BufRead>(input: R) -> Result<IsingModel> {
    let mut lines = input.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse(format!("unexpected end of dump, expected {what}")))?
            .map_err(Error::from)
    };
    let magic = next("header")?;
    if magic.trim() != "ris-ising-model v1" {
        return Err(Error::Parse(format!("bad header '{magic}'")));
    }
    let keyed = |line: String, key: &str| -> Result<String> {
        line.strip_prefix(key)
            .map(|s| s.trim().to_string())
            .ok_or_else(|| Error::Parse(format!("expected '{key}', got '{line}'")))
    };
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|e| Error::Parse(format!("bad number '{s}': {e}")))
    };
    let n: usize = keyed(next("n")?, "n ")?
        .parse()
        .map_err(|e| Error::Parse(format!("bad n: {e}")))?;
    let encoding = Encoding::parse(&keyed(next("encoding")?, "encoding ")?)?;
    let n_ris: usize = keyed(next("n_ris")?, "n_ris ")?
        .parse()
        .map_err(|e| Error::Parse(format!("bad n_ris: {e}")))?;
    let offset = num(&keyed(next("offset")?, "offset ")?)?;
    if next("J")?.trim() != "J" {
        return Err(Error::Parse("missing J section".into()));
    }
    let mut j = vec![0.0; n * n];
    for i in 0..n {
        let line = next("J row")?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != i + 1 {
            return Err(Error::Parse(format!("J row {i} has {} entries", vals.len())));
        }
        for (k, v) in vals.iter().enumerate() {
            let x = num(v)?;
            j[i * n + k] = x;
            j[k * n + i] = x;
        }
    }
    if next("lambda")?.trim() != "lambda" {
        return Err(Error::Parse("missing lambda section".into()));
    }
    let line = if n == 0 { String::new() } else { next("lambda values")? };
    let fields = line.split_whitespace().map(num).collect::<Result<Vec<_>>>()?;
    if fields.len() != n {
        return Err(Error::mismatch("lambda entries", n, fields.len()));
    }
    Ok(IsingModel::from_dense(n, j, fields, offset)?.with_encoding(encoding, n_ris))
}
