//! Reference phase designs: element-wise refinement, Fresnel zones, a bare
//! reflector, and an unquantized upper reference.

use serde::Serialize;

use crate::channel::{
    composite_channel, composite_channel_from_coefficients, norm_sqr, power_to_db, ComplexMatrix,
    PhaseConfig, PhaseLevel, C64,
};
use crate::error::{Error, Result};
use crate::scene::SceneGeometry;

/// `Σ_k conj(r_k)·v_k`; the gain of `r + conj(c)·v` grows with `Re(conj(c)·z)`.
fn alignment(residual: &[C64], row: &[C64]) -> C64 {
    residual.iter().zip(row).map(|(r, v)| r.conj() * v).sum()
}

fn add_scaled(h: &mut [C64], c: C64, row: &[C64]) {
    for (hk, &v) in h.iter_mut().zip(row) {
        *hk += c * v;
    }
}

/// Gauss-Seidel coordinate ascent over discrete phases in element order.
/// An element only changes when a candidate is strictly better.
pub fn successive_refinement(
    direct: &[C64],
    cascade: &ComplexMatrix,
    level: PhaseLevel,
    init: &PhaseConfig,
    max_sweeps: usize,
) -> Result<PhaseConfig> {
    if init.level != level {
        return Err(Error::InvalidParameter(
            "initial phases use a different level".into(),
        ));
    }
    let mut h = composite_channel(direct, cascade, init)?;
    let mut indices = init.indices.clone();
    for _ in 0..max_sweeps {
        let mut changed = false;
        for (n, idx) in indices.iter_mut().enumerate() {
            let row = cascade.row(n);
            let current = level.coefficient(*idx);
            add_scaled(&mut h, -current.conj(), row);
            let z = alignment(&h, row);
            let mut best = (*idx, (current.conj() * z).re);
            for (cand, c) in level.candidates() {
                let score = (c.conj() * z).re;
                if score > best.1 {
                    best = (cand, score);
                }
            }
            if best.0 != *idx {
                *idx = best.0;
                changed = true;
            }
            add_scaled(&mut h, level.coefficient(*idx).conj(), row);
        }
        if !changed {
            break;
        }
    }
    PhaseConfig::new(level, indices)
}

/// Binary Fresnel-zone design from the BS array center.
pub fn fresnel_zone(geo: &SceneGeometry, lambda: f64) -> PhaseConfig {
    let bs_ref = geo.bs.center;
    let paths: Vec<f64> = geo
        .ris
        .element_positions
        .iter()
        .map(|&p| p.distance(bs_ref) + geo.ue.distance(p))
        .collect();
    fresnel_from_path_lengths(&paths, lambda)
}

/// Zone parity `floor(2(d − d_min)/λ) mod 2` of each total path length.
pub fn fresnel_from_path_lengths(paths: &[f64], lambda: f64) -> PhaseConfig {
    let d_min = paths.iter().cloned().fold(f64::INFINITY, f64::min);
    let indices = paths
        .iter()
        .map(|&d| {
            let zone = (2.0 * (d - d_min) / lambda).floor() as u64;
            (zone % 2) as u8
        })
        .collect();
    PhaseConfig {
        level: PhaseLevel::Binary,
        indices,
    }
}

/// Every element at phase 0.
pub fn passive(n_ris: usize) -> PhaseConfig {
    PhaseConfig::zeros(PhaseLevel::Binary, n_ris)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuousReference {
    #[serde(skip)]
    pub coefficients: Vec<C64>,
    pub gain: f64,
    pub gain_db: f64,
    pub sweeps: usize,
}

/// Unit-modulus coordinate ascent: each element is rotated to align its
/// contribution with the rest of the channel, until a sweep improves the
/// gain by less than `1e-10` relative.
pub fn continuous_reference(
    direct: &[C64],
    cascade: &ComplexMatrix,
    max_sweeps: usize,
) -> Result<ContinuousReference> {
    let n = cascade.rows();
    let mut coefficients = vec![C64::new(1.0, 0.0); n];
    let mut h = composite_channel_from_coefficients(direct, cascade, &coefficients)?;
    let mut gain = norm_sqr(&h);
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        for (k, c) in coefficients.iter_mut().enumerate() {
            let row = cascade.row(k);
            add_scaled(&mut h, -c.conj(), row);
            let z = alignment(&h, row);
            let mag = z.norm();
            if mag > 0.0 {
                *c = z / mag;
            }
            add_scaled(&mut h, c.conj(), row);
        }
        let next = norm_sqr(&h);
        let converged = next - gain <= 1e-10 * next.abs();
        gain = next.max(gain);
        if converged {
            break;
        }
    }
    // re-evaluate from scratch so drift in the running sum is not reported
    let gain = norm_sqr(&composite_channel_from_coefficients(direct, cascade, &coefficients)?);
    Ok(ContinuousReference {
        coefficients,
        gain,
        gain_db: power_to_db(gain),
        sweeps,
    })
}
