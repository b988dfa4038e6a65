//! Scenario files: TOML with `[model]`, `[bs]`, `[ris]` and `[ue]` sections.
//!
//! ```toml
//! [model]
//! carrier_frequency = 28e9
//! propagation = "friis_squared"
//! aperture = "flat"
//! los = false
//!
//! [bs]
//! center = [0.0, 0.0, 0.0]
//! grid = [8, 8]
//! normal = [0.0, 1.0, 0.0]
//!
//! [ris]
//! center = [2.0, 50.0, 0.0]
//! grid = [74, 74]          # or: side = 0.4
//! normal = [-1.0, 0.0, 0.0]
//!
//! [ue]
//! position = [0.0, 50.0, 0.0]
//! ```
//!
//! Omitted keys take the reference-deployment values; spacings default to
//! half a wavelength. Unknown keys are rejected.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scene::{grid_side_from_length, ApertureModel, PropagationVariant, SceneConfig, SPEED_OF_LIGHT};

/// Below this a carrier frequency is almost certainly given in GHz/MHz.
const MIN_CARRIER_HZ: f64 = 1e6;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    bs: BsSection,
    ris: RisSection,
    #[serde(default)]
    ue: UeSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    carrier_frequency: Option<f64>,
    propagation: Option<PropagationVariant>,
    aperture: Option<ApertureModel>,
    los: Option<bool>,
    noise_power: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BsSection {
    center: Option<Vec3>,
    grid: Option<(usize, usize)>,
    spacing: Option<f64>,
    normal: Option<Vec3>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RisSection {
    center: Option<Vec3>,
    grid: Option<(usize, usize)>,
    side: Option<f64>,
    spacing: Option<f64>,
    normal: Option<Vec3>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct UeSection {
    position: Option<Vec3>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<SceneConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<SceneConfig> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
    let mut cfg = SceneConfig::reference(1, false);

    let m = file.model;
    if let Some(f) = m.carrier_frequency {
        if f > 0.0 && f < MIN_CARRIER_HZ {
            return Err(Error::Config(format!(
                "carrier_frequency is in Hz; {f} looks like a value in GHz or MHz"
            )));
        }
        cfg.carrier_frequency = f;
    }
    let half_wave = SPEED_OF_LIGHT / cfg.carrier_frequency / 2.0;
    cfg.propagation_variant = m.propagation.unwrap_or_default();
    cfg.aperture_model = m.aperture.unwrap_or_default();
    cfg.los_enabled = m.los.unwrap_or(false);
    if let Some(n0) = m.noise_power {
        cfg.noise_power = n0;
    }

    let bs = file.bs;
    cfg.bs_center = bs.center.unwrap_or(cfg.bs_center);
    cfg.bs_grid = bs.grid.unwrap_or(cfg.bs_grid);
    cfg.bs_spacing = bs.spacing.unwrap_or(half_wave);
    cfg.bs_normal = bs.normal.unwrap_or(cfg.bs_normal);

    let ris = file.ris;
    cfg.ris_center = ris.center.unwrap_or(cfg.ris_center);
    cfg.ris_spacing = ris.spacing.unwrap_or(half_wave);
    cfg.ris_normal = ris.normal.unwrap_or(cfg.ris_normal);
    cfg.ris_grid = match (ris.grid, ris.side) {
        (Some(grid), None) => grid,
        (None, Some(side)) => {
            let n = grid_side_from_length(side, cfg.ris_spacing)
                .map_err(|e| Error::Config(format!("ris.side: {e}")))?;
            (n, n)
        }
        (Some(_), Some(_)) => {
            return Err(Error::Config("ris: give either grid or side, not both".into()))
        }
        (None, None) => return Err(Error::Config("ris: grid or side is required".into())),
    };

    cfg.ue_position = file.ue.position.unwrap_or(cfg.ue_position);
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_reference_values() {
        let cfg = parse_scenario("[ris]\ngrid = [74, 74]\n").unwrap();
        assert_eq!(cfg, SceneConfig::reference(74, false));
    }

    #[test]
    fn side_length_sets_grid() {
        let cfg = parse_scenario("[ris]\nside = 0.4\n").unwrap();
        assert_eq!(cfg.n_ris(), 5476);
    }

    #[test]
    fn rejects_unknown_and_malformed_keys() {
        assert!(matches!(parse_scenario("[ris]\ngrid = [2, 2]\ncolour = 1\n"), Err(Error::Config(_))));
        assert!(matches!(parse_scenario("[ris]\ngrid = [2, 2]\n[extra]\n"), Err(Error::Config(_))));
        assert!(matches!(parse_scenario("[bs]\ngrid = [2, 2]\n"), Err(Error::Config(_))));
        assert!(parse_scenario("[ris]\ngrid = [2, 2]\nside = 0.1\n").is_err());
        assert!(parse_scenario("[ris]\ngrid = [0, 2]\n").is_err());
        assert!(parse_scenario("[model]\npropagation = \"cubic\"\n[ris]\ngrid = [2, 2]\n").is_err());
    }

    #[test]
    fn rejects_unit_mistakes() {
        assert!(parse_scenario("[model]\ncarrier_frequency = 28.0\n[ris]\ngrid = [2, 2]\n").is_err());
        assert!(parse_scenario("[ris]\ngrid = [2, 2]\nspacing = -0.005\n").is_err());
        assert!(parse_scenario("[ris]\ngrid = [2, 2]\nnormal = [2.0, 0.0, 0.0]\n").is_err());
    }

    #[test]
    fn model_options() {
        let cfg = parse_scenario(
            "[model]\nlos = true\npropagation = \"paper_printed\"\naperture = \"cosine_projected\"\n[ris]\ngrid = [3, 4]\n[ue]\nposition = [0.0, 40.0, 1.0]\n",
        )
        .unwrap();
        assert!(cfg.los_enabled);
        assert_eq!(cfg.propagation_variant, PropagationVariant::PaperPrinted);
        assert_eq!(cfg.aperture_model, ApertureModel::CosineProjected);
        assert_eq!(cfg.ris_grid, (3, 4));
        assert_eq!(cfg.ue_position, Vec3::new(0.0, 40.0, 1.0));
    }
}
