//! Free-space channel synthesis and the single-user MISO link metrics.
//!
//! Conventions: `G` is `N_RIS × N_BS`, `f` has length `N_RIS`, and the
//! cascade `V = diag(f)·G`. With reflection coefficients `φ`, the composite
//! channel is `hᵀ = h_dᵀ + φᴴ V`, so element `n` contributes `conj(φ_n)·V[n, :]`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scene::{ApertureModel, ArrayGeometry, PropagationVariant, SceneConfig, SceneGeometry};

pub type C64 = Complex64;

/// Finite stand-in for −∞ dB in tabular output.
pub const GAIN_SENTINEL_DB: f64 = -1e9;

const MIN_DISTANCE: f64 = 1e-12;

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::mismatch("matrix data", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [C64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// Selects rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> ComplexMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        ComplexMatrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseLevel {
    Binary,
    Quaternary,
}

impl PhaseLevel {
    pub fn from_count(levels: usize) -> Result<Self> {
        match levels {
            2 => Ok(PhaseLevel::Binary),
            4 => Ok(PhaseLevel::Quaternary),
            other => Err(Error::InvalidParameter(format!(
                "phase level must be 2 or 4, got {other}"
            ))),
        }
    }

    pub fn count(self) -> usize {
        match self {
            PhaseLevel::Binary => 2,
            PhaseLevel::Quaternary => 4,
        }
    }

    /// Phase of candidate `index`: `{0, π}` for binary and
    /// `{π/4, 3π/4, 5π/4, 7π/4}` for quaternary.
    pub fn angle(self, index: u8) -> f64 {
        match self {
            PhaseLevel::Binary => f64::from(index) * PI,
            PhaseLevel::Quaternary => PI / 4.0 + f64::from(index) * PI / 2.0,
        }
    }

    /// Reflection coefficient of candidate `index`, built from exact components.
    pub fn coefficient(self, index: u8) -> C64 {
        match (self, index) {
            (PhaseLevel::Binary, 0) => C64::new(1.0, 0.0),
            (PhaseLevel::Binary, _) => C64::new(-1.0, 0.0),
            (PhaseLevel::Quaternary, 0) => C64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
            (PhaseLevel::Quaternary, 1) => C64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
            (PhaseLevel::Quaternary, 2) => C64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
            (PhaseLevel::Quaternary, _) => C64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
        }
    }

    pub fn candidates(self) -> impl Iterator<Item = (u8, C64)> {
        (0..self.count() as u8).map(move |i| (i, self.coefficient(i)))
    }
}

/// Per-element discrete phase choice.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub level: PhaseLevel,
    pub indices: Vec<u8>,
}

impl PhaseConfig {
    pub fn new(level: PhaseLevel, indices: Vec<u8>) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| usize::from(i) >= level.count()) {
            return Err(Error::InvalidParameter(format!(
                "phase index {bad} out of range for {} levels",
                level.count()
            )));
        }
        Ok(Self { level, indices })
    }

    pub fn zeros(level: PhaseLevel, n: usize) -> Self {
        Self {
            level,
            indices: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.indices.iter().map(|&i| self.level.angle(i)).collect()
    }

    pub fn coefficients(&self) -> Vec<C64> {
        self.indices.iter().map(|&i| self.level.coefficient(i)).collect()
    }
}

/// All channel quantities for one UE position.
#[derive(Clone, Debug)]
pub struct ChannelSet {
    pub direct: Vec<C64>,
    pub bs_ris: ComplexMatrix,
    pub ris_ue: Vec<C64>,
    pub cascade: ComplexMatrix,
}

impl ChannelSet {
    pub fn synthesize(cfg: &SceneConfig, geo: &SceneGeometry) -> Result<Self> {
        let bs_ris = bs_ris_channel(
            &geo.bs,
            &geo.ris,
            cfg.wavelength(),
            cfg.propagation_variant,
            cfg.aperture_model,
        )?;
        Self::with_bs_ris(cfg, geo, bs_ris, geo.ue)
    }

    /// Rebuilds the UE-dependent parts for a different UE position, reusing `G`.
    pub fn with_bs_ris(
        cfg: &SceneConfig,
        geo: &SceneGeometry,
        bs_ris: ComplexMatrix,
        ue: Vec3,
    ) -> Result<Self> {
        let lambda = cfg.wavelength();
        let direct = if cfg.los_enabled {
            direct_channel(&geo.bs, ue, lambda)?
        } else {
            vec![C64::new(0.0, 0.0); geo.bs.len()]
        };
        let ris_ue = ris_ue_channel(
            &geo.ris,
            ue,
            lambda,
            cfg.propagation_variant,
            cfg.aperture_model,
        )?;
        let cascade = cascade_matrix(&ris_ue, &bs_ris)?;
        Ok(Self {
            direct,
            bs_ris,
            ris_ue,
            cascade,
        })
    }

    pub fn n_bs(&self) -> usize {
        self.direct.len()
    }

    pub fn n_ris(&self) -> usize {
        self.ris_ue.len()
    }
}

fn propagation_phase(d: f64, lambda: f64) -> C64 {
    C64::from_polar(1.0, -2.0 * PI * d / lambda)
}

fn checked_distance(a: Vec3, b: Vec3, what: &str) -> Result<f64> {
    let d = a.distance(b);
    if !(d > MIN_DISTANCE) {
        return Err(Error::DegenerateGeometry(format!(
            "{what}: points coincide (d = {d:e})"
        )));
    }
    Ok(d)
}

/// Free-space path loss term `λ/(4πd)·exp(−j2πd/λ)` per BS antenna.
pub fn direct_channel(bs: &ArrayGeometry, ue: Vec3, lambda: f64) -> Result<Vec<C64>> {
    bs.element_positions
        .iter()
        .map(|&p| {
            let d = checked_distance(p, ue, "BS antenna to UE")?;
            Ok(propagation_phase(d, lambda) * (lambda / (4.0 * PI * d)))
        })
        .collect()
}

/// Element-wise Friis amplitude `sqrt(A / (4π d^p))`.
pub fn element_amplitude(area: f64, d: f64, variant: PropagationVariant) -> f64 {
    let spread = match variant {
        PropagationVariant::PaperPrinted => d,
        PropagationVariant::FriisSquared => d * d,
    };
    (area / (4.0 * PI * spread)).sqrt()
}

pub fn effective_aperture(
    normal: Vec3,
    element_area: f64,
    link_direction: Vec3,
    model: ApertureModel,
) -> f64 {
    match model {
        ApertureModel::Flat => element_area,
        ApertureModel::CosineProjected => element_area * normal.dot(link_direction).max(0.0),
    }
}

fn ris_link(
    ris: &ArrayGeometry,
    element: Vec3,
    far: Vec3,
    lambda: f64,
    variant: PropagationVariant,
    aperture: ApertureModel,
    what: &str,
) -> Result<C64> {
    let d = checked_distance(element, far, what)?;
    let direction = (far - element) * (1.0 / d);
    let area = effective_aperture(ris.normal, ris.element_area, direction, aperture);
    Ok(propagation_phase(d, lambda) * element_amplitude(area, d, variant))
}

pub fn bs_ris_channel(
    bs: &ArrayGeometry,
    ris: &ArrayGeometry,
    lambda: f64,
    variant: PropagationVariant,
    aperture: ApertureModel,
) -> Result<ComplexMatrix> {
    let n_bs = bs.len();
    let mut g = ComplexMatrix::zeros(ris.len(), n_bs);
    if n_bs == 0 {
        return Ok(g);
    }
    g.data
        .par_chunks_mut(n_bs)
        .zip(ris.element_positions.par_iter())
        .try_for_each(|(row, &element)| {
            for (slot, &antenna) in row.iter_mut().zip(&bs.element_positions) {
                *slot = ris_link(ris, element, antenna, lambda, variant, aperture, "BS antenna to RIS element")?;
            }
            Ok::<(), Error>(())
        })?;
    Ok(g)
}

pub fn ris_ue_channel(
    ris: &ArrayGeometry,
    ue: Vec3,
    lambda: f64,
    variant: PropagationVariant,
    aperture: ApertureModel,
) -> Result<Vec<C64>> {
    ris.element_positions
        .par_iter()
        .map(|&element| ris_link(ris, element, ue, lambda, variant, aperture, "RIS element to UE"))
        .collect()
}

pub fn cascade_matrix(ris_ue: &[C64], bs_ris: &ComplexMatrix) -> Result<ComplexMatrix> {
    if ris_ue.len() != bs_ris.rows() {
        return Err(Error::mismatch("f length vs G rows", bs_ris.rows(), ris_ue.len()));
    }
    let mut v = bs_ris.clone();
    for (n, &fn_) in ris_ue.iter().enumerate() {
        for x in v.row_mut(n) {
            *x *= fn_;
        }
    }
    Ok(v)
}

/// `h_dᵀ + Σ_n conj(c_n)·V[n, :]` for arbitrary reflection coefficients.
pub fn composite_channel_from_coefficients(
    direct: &[C64],
    cascade: &ComplexMatrix,
    coefficients: &[C64],
) -> Result<Vec<C64>> {
    if coefficients.len() != cascade.rows() {
        return Err(Error::mismatch("phase vector", cascade.rows(), coefficients.len()));
    }
    if direct.len() != cascade.cols() {
        return Err(Error::mismatch("direct channel", cascade.cols(), direct.len()));
    }
    let mut h = direct.to_vec();
    for (n, c) in coefficients.iter().enumerate() {
        let c = c.conj();
        for (hk, &v) in h.iter_mut().zip(cascade.row(n)) {
            *hk += c * v;
        }
    }
    Ok(h)
}

pub fn composite_channel(
    direct: &[C64],
    cascade: &ComplexMatrix,
    phases: &PhaseConfig,
) -> Result<Vec<C64>> {
    composite_channel_from_coefficients(direct, cascade, &phases.coefficients())
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// Maximum ratio transmission weights `w = conj(h)/‖h‖`.
pub fn mrt_weights(h: &[C64]) -> Result<Vec<C64>> {
    let norm = norm_sqr(h).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Numerical("MRT weights undefined for a zero channel".into()));
    }
    Ok(h.iter().map(|x| x.conj() / norm).collect())
}

/// `10·log10(‖h‖²)`; −∞ for a zero channel.
pub fn channel_gain_db(h: &[C64]) -> f64 {
    power_to_db(norm_sqr(h))
}

pub fn power_to_db(power: f64) -> f64 {
    if power > 0.0 {
        10.0 * power.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Shannon capacity `log2(1 + |hᵀw|²/N0)` in bits/s/Hz.
pub fn capacity(h: &[C64], w: &[C64], noise_power: f64) -> Result<f64> {
    if !(noise_power > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise power must be positive, got {noise_power}"
        )));
    }
    if h.len() != w.len() {
        return Err(Error::mismatch("beamformer length", h.len(), w.len()));
    }
    let received: C64 = h.iter().zip(w).map(|(a, b)| a * b).sum();
    Ok((1.0 + received.norm_sqr() / noise_power).log2())
}
