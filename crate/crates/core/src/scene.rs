//! Element-level geometry of the BS antenna panel, the RIS panel and the UE.
//!
//! Both panels are uniform rectangular grids. Element `(r, c)` is stored at
//! index `r * cols + c`; row 0 / column 0 is the panel's minimum corner.
//! The column axis is `normal × row_axis`, where the row axis is the
//! projection of +z onto the panel plane (+x when the normal is along z).
//!
//! The default layout puts the BS in the x–z plane facing +y and the RIS in
//! the y–z plane facing −x, i.e. towards a UE sitting at smaller x.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationVariant {
    /// Amplitude `sqrt(A / (4π d))`, as the element-wise formulas are printed.
    PaperPrinted,
    /// Amplitude `sqrt(A / (4π d²))`, i.e. free-space Friis (∝ 1/d).
    #[default]
    FriisSquared,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApertureModel {
    /// Every element presents its full physical area in every direction.
    #[default]
    Flat,
    /// Physical area scaled by the cosine of the off-normal angle, clamped at 0.
    CosineProjected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub carrier_frequency: f64,
    pub bs_center: Vec3,
    pub ris_center: Vec3,
    pub ue_position: Vec3,
    pub bs_grid: (usize, usize),
    pub ris_grid: (usize, usize),
    pub bs_spacing: f64,
    pub ris_spacing: f64,
    pub bs_normal: Vec3,
    pub ris_normal: Vec3,
    pub propagation_variant: PropagationVariant,
    pub aperture_model: ApertureModel,
    pub los_enabled: bool,
    pub noise_power: f64,
}

impl SceneConfig {
    /// The reference deployment: 28 GHz, 8×8 BS at the origin facing +y,
    /// an `ris_side × ris_side` RIS at (2, 50, 0) facing the UE at (0, 50, 0),
    /// half-wavelength spacing on both panels.
    pub fn reference(ris_side: usize, los_enabled: bool) -> Self {
        let carrier_frequency = 28.0e9;
        let half_wave = SPEED_OF_LIGHT / carrier_frequency / 2.0;
        Self {
            carrier_frequency,
            bs_center: Vec3::new(0.0, 0.0, 0.0),
            ris_center: Vec3::new(2.0, 50.0, 0.0),
            ue_position: Vec3::new(0.0, 50.0, 0.0),
            bs_grid: (8, 8),
            ris_grid: (ris_side, ris_side),
            bs_spacing: half_wave,
            ris_spacing: half_wave,
            bs_normal: Vec3::Y,
            ris_normal: -Vec3::X,
            propagation_variant: PropagationVariant::FriisSquared,
            aperture_model: ApertureModel::Flat,
            los_enabled,
            noise_power: 1e-13,
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn n_bs(&self) -> usize {
        self.bs_grid.0 * self.bs_grid.1
    }

    pub fn n_ris(&self) -> usize {
        self.ris_grid.0 * self.ris_grid.1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_frequency.is_finite() && self.carrier_frequency > 0.0) {
            return Err(Error::Config(format!(
                "carrier_frequency must be positive, got {}",
                self.carrier_frequency
            )));
        }
        for (name, grid) in [("bs_grid", self.bs_grid), ("ris_grid", self.ris_grid)] {
            if grid.0 == 0 || grid.1 == 0 {
                return Err(Error::Config(format!("{name} dimensions must be >= 1")));
            }
        }
        for (name, s) in [("bs_spacing", self.bs_spacing), ("ris_spacing", self.ris_spacing)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {s}")));
            }
        }
        for (name, n) in [("bs_normal", self.bs_normal), ("ris_normal", self.ris_normal)] {
            if !n.is_finite() || (n.norm() - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::Config(format!(
                    "{name} must be unit length, |n| = {}",
                    n.norm()
                )));
            }
        }
        for (name, p) in [
            ("bs_center", self.bs_center),
            ("ris_center", self.ris_center),
            ("ue_position", self.ue_position),
        ] {
            if !p.is_finite() {
                return Err(Error::Config(format!("{name} is not finite")));
            }
        }
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            return Err(Error::Config(format!(
                "noise_power must be positive, got {}",
                self.noise_power
            )));
        }
        Ok(())
    }
}

/// Elements per side for a square panel of physical side length `side`.
pub fn grid_side_from_length(side: f64, spacing: f64) -> Result<usize> {
    if !(side > 0.0 && spacing > 0.0) {
        return Err(Error::Config(format!(
            "side ({side}) and spacing ({spacing}) must be positive"
        )));
    }
    Ok(((side / spacing).floor() as usize).max(1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArrayGeometry {
    pub element_positions: Vec<Vec3>,
    pub normal: Vec3,
    pub element_area: f64,
    pub center: Vec3,
    pub grid: (usize, usize),
    pub spacing: f64,
}

impl ArrayGeometry {
    /// Builds a `rows × cols` panel centred at `center` in the plane normal to `normal`.
    pub fn planar(
        center: Vec3,
        grid: (usize, usize),
        spacing: f64,
        normal: Vec3,
    ) -> Result<Self> {
        let (rows, cols) = grid;
        if rows == 0 || cols == 0 {
            return Err(Error::Config("grid dimensions must be >= 1".into()));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Config(format!("spacing must be positive, got {spacing}")));
        }
        if !normal.is_finite() || (normal.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::Config(format!(
                "panel normal must be unit length, |n| = {}",
                normal.norm()
            )));
        }
        let (row_axis, col_axis) = panel_axes(normal);
        let row_mid = (rows as f64 - 1.0) / 2.0;
        let col_mid = (cols as f64 - 1.0) / 2.0;
        let mut element_positions = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let dv = (r as f64 - row_mid) * spacing;
            for c in 0..cols {
                let du = (c as f64 - col_mid) * spacing;
                element_positions.push(center + col_axis * du + row_axis * dv);
            }
        }
        Ok(Self {
            element_positions,
            normal,
            element_area: spacing * spacing,
            center,
            grid,
            spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.element_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_positions.is_empty()
    }
}

/// In-plane (row, column) unit axes for a panel with the given normal.
fn panel_axes(normal: Vec3) -> (Vec3, Vec3) {
    let reference = if normal.cross(Vec3::Z).norm() < 1e-9 {
        Vec3::X
    } else {
        Vec3::Z
    };
    let row_axis = (reference - normal * normal.dot(reference)).normalized();
    let col_axis = normal.cross(row_axis);
    (row_axis, col_axis)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneGeometry {
    pub bs: ArrayGeometry,
    pub ris: ArrayGeometry,
    pub ue: Vec3,
}

pub fn build_geometry(cfg: &SceneConfig) -> Result<SceneGeometry> {
    cfg.validate()?;
    let bs = ArrayGeometry::planar(cfg.bs_center, cfg.bs_grid, cfg.bs_spacing, cfg.bs_normal)?;
    let ris = ArrayGeometry::planar(cfg.ris_center, cfg.ris_grid, cfg.ris_spacing, cfg.ris_normal)?;
    Ok(SceneGeometry {
        bs,
        ris,
        ue: cfg.ue_position,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn centroid(points: &[Vec3]) -> Vec3 {
        let sum = points.iter().fold(Vec3::default(), |acc, &p| acc + p);
        sum * (1.0 / points.len() as f64)
    }

    #[test]
    fn reference_bs_panel_spans_seven_half_wavelengths() {
        let cfg = SceneConfig::reference(74, false);
        let geo = build_geometry(&cfg).unwrap();
        assert_eq!(geo.bs.len(), 64);
        let xs: Vec<f64> = geo.bs.element_positions.iter().map(|p| p.x).collect();
        let zs: Vec<f64> = geo.bs.element_positions.iter().map(|p| p.z).collect();
        let span = |v: &[f64]| {
            v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
        };
        assert!((span(&xs) - 0.037474).abs() < 1e-5, "x span {}", span(&xs));
        assert!((span(&zs) - 0.037474).abs() < 1e-5);
        assert!(geo.bs.element_positions.iter().all(|p| p.y.abs() < 1e-15));
        assert!((cfg.wavelength() - 0.010707).abs() < 1e-6);
    }

    #[test]
    fn single_element_ris_sits_at_center() {
        let mut cfg = SceneConfig::reference(1, false);
        cfg.ris_grid = (1, 1);
        let geo = build_geometry(&cfg).unwrap();
        assert_eq!(geo.ris.element_positions, vec![Vec3::new(2.0, 50.0, 0.0)]);
    }

    #[test]
    fn side_length_to_grid() {
        let spacing = SPEED_OF_LIGHT / 28e9 / 2.0;
        assert_eq!(grid_side_from_length(0.4, spacing).unwrap(), 74);
        assert_eq!(grid_side_from_length(0.6, spacing).unwrap(), 112);
        assert_eq!(grid_side_from_length(0.8, spacing).unwrap(), 149);
        assert_eq!(74 * 74, 5476);
        assert_eq!(149 * 149, 22201);
    }

    #[test]
    fn ris_faces_the_ue_and_is_row_major() {
        let mut cfg = SceneConfig::reference(3, false);
        cfg.ris_grid = (2, 3);
        let geo = build_geometry(&cfg).unwrap();
        let p = &geo.ris.element_positions;
        let s = cfg.ris_spacing;
        // columns advance along +y, rows along +z
        assert!((p[1].y - p[0].y - s).abs() < 1e-12);
        assert!((p[3].z - p[0].z - s).abs() < 1e-12);
        assert!(p.iter().all(|q| (q.x - 2.0).abs() < 1e-12));
        assert!(geo.ris.normal.dot(cfg.ue_position - cfg.ris_center) > 0.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = SceneConfig::reference(4, false);
        cfg.ris_normal = Vec3::new(1.0, 1.0, 0.0);
        assert!(matches!(build_geometry(&cfg), Err(Error::Config(_))));
        let mut cfg = SceneConfig::reference(4, false);
        cfg.bs_spacing = 0.0;
        assert!(matches!(build_geometry(&cfg), Err(Error::Config(_))));
        let mut cfg = SceneConfig::reference(4, false);
        cfg.ris_grid = (0, 3);
        assert!(build_geometry(&cfg).is_err());
        let mut cfg = SceneConfig::reference(4, false);
        cfg.carrier_frequency = -1.0;
        assert!(build_geometry(&cfg).is_err());
    }

    #[test]
    fn normal_along_z_uses_x_reference() {
        let g = ArrayGeometry::planar(Vec3::default(), (2, 2), 1.0, Vec3::Z).unwrap();
        for p in &g.element_positions {
            assert!(p.z.abs() < 1e-12);
        }
    }

    fn unit_normal() -> impl Strategy<Value = Vec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 1e-2)
            .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalized())
    }

    proptest! {
        #[test]
        fn panel_invariants(
            rows in 1usize..9,
            cols in 1usize..9,
            spacing in 1e-3f64..0.1,
            normal in unit_normal(),
            cx in -10.0f64..10.0, cy in -10.0f64..10.0, cz in -10.0f64..10.0,
        ) {
            let center = Vec3::new(cx, cy, cz);
            // renormalize so the 1e-12 unit check holds after float round-off
            let normal = normal.normalized();
            prop_assume!((normal.norm() - 1.0).abs() <= 1e-12);
            let g = ArrayGeometry::planar(center, (rows, cols), spacing, normal).unwrap();
            prop_assert_eq!(g.len(), rows * cols);
            let c = centroid(&g.element_positions);
            prop_assert!(c.distance(center) < 1e-9);
            for p in &g.element_positions {
                prop_assert!((*p - center).dot(normal).abs() < 1e-9);
            }
            for r in 0..rows {
                for k in 1..cols {
                    let d = g.element_positions[r * cols + k].distance(g.element_positions[r * cols + k - 1]);
                    prop_assert!((d - spacing).abs() < 1e-12);
                }
            }
            let again = ArrayGeometry::planar(center, (rows, cols), spacing, normal).unwrap();
            prop_assert_eq!(&g.element_positions, &again.element_positions);
        }

        #[test]
        fn square_panel_diameter(n in 1usize..10, spacing in 1e-3f64..0.1) {
            let g = ArrayGeometry::planar(Vec3::new(2.0, 50.0, 0.0), (n, n), spacing, -Vec3::X).unwrap();
            let mut max_d = 0.0f64;
            for a in &g.element_positions {
                for b in &g.element_positions {
                    max_d = max_d.max(a.distance(*b));
                }
            }
            let expected = spacing * (n as f64 - 1.0) * 2f64.sqrt();
            prop_assert!((max_d - expected).abs() < 1e-12);
        }
    }
}
