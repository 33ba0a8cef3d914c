//! Geometry and pipeline configuration files (TOML).

use std::path::Path;

use serde::{Deserialize, Serialize};
use tridoa_core::correlator::{AnalysisWindow, SpectralTaper, Weighting};
use tridoa_core::gate::FilterThresholds;
use tridoa_core::geometry::ArrayGeometry;
use tridoa_core::pipeline::PipelineConfig;
use tridoa_core::tracker::TrackerParams;

use super::{parse_toml, read_text, write_text, FORMAT_VERSION};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    pub version: u32,
    /// Meters.
    pub b: f64,
    pub c_x: f64,
    pub c_y: f64,
}

impl From<ArrayGeometry> for GeometryFile {
    fn from(g: ArrayGeometry) -> Self {
        Self {
            version: FORMAT_VERSION,
            b: g.b(),
            c_x: g.c_x(),
            c_y: g.c_y(),
        }
    }
}

pub fn parse_geometry(path: &Path, text: &str) -> Result<ArrayGeometry> {
    let f: GeometryFile = parse_toml(path, "geometry", text)?;
    Ok(ArrayGeometry::new(f.b, f.c_x, f.c_y)?)
}

pub fn load_geometry(path: &Path) -> Result<ArrayGeometry> {
    parse_geometry(path, &read_text(path)?)
}

pub fn geometry_to_string(g: &ArrayGeometry) -> String {
    toml::to_string(&GeometryFile::from(*g)).expect("geometry serializes")
}

pub fn save_geometry(path: &Path, g: &ArrayGeometry) -> Result<()> {
    write_text(path, &geometry_to_string(g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightingSection {
    pub exponent: f64,
    pub floor: f64,
    pub taper: SpectralTaper,
    pub window: AnalysisWindow,
}

impl Default for WeightingSection {
    fn default() -> Self {
        let w = Weighting::default();
        Self {
            exponent: w.exponent,
            floor: w.floor,
            taper: w.taper,
            window: AnalysisWindow::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerSection {
    pub n_c: usize,
    /// Seconds; derived from the frame length and sample rate when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub d_min: f64,
    pub n_s: usize,
    pub alpha: f64,
    pub t_win: f64,
    pub t_a: f64,
}

impl Default for TrackerSection {
    fn default() -> Self {
        let p = TrackerParams::default();
        Self {
            n_c: p.n_c,
            dt: None,
            d_min: p.d_min,
            n_s: p.n_s,
            alpha: p.alpha,
            t_win: p.t_win,
            t_a: p.t_a,
        }
    }
}

/// On-disk pipeline configuration. Every field has a default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub version: u32,
    #[serde(default = "defaults::fs")]
    pub fs: f64,
    #[serde(default = "defaults::frame_len")]
    pub frame_len: usize,
    /// Frame overlap; only 0.5 is supported.
    #[serde(default = "defaults::overlap")]
    pub overlap: f64,
    #[serde(default = "defaults::speed_of_sound")]
    pub speed_of_sound: f64,
    #[serde(default = "defaults::far_field_r")]
    pub far_field_r: f64,
    #[serde(default)]
    pub weighting: WeightingSection,
    #[serde(default)]
    pub thresholds: FilterThresholds,
    #[serde(default)]
    pub tracker: TrackerSection,
}

mod defaults {
    use tridoa_core::pipeline::PipelineConfig;

    pub fn fs() -> f64 {
        PipelineConfig::default().fs
    }
    pub fn frame_len() -> usize {
        PipelineConfig::default().frame_len
    }
    pub fn overlap() -> f64 {
        0.5
    }
    pub fn speed_of_sound() -> f64 {
        PipelineConfig::default().speed_of_sound
    }
    pub fn far_field_r() -> f64 {
        PipelineConfig::default().far_field_r
    }
}

impl ConfigFile {
    pub fn to_config(&self) -> Result<PipelineConfig, String> {
        if self.overlap != 0.5 {
            return Err(format!("overlap must be 0.5, got {}", self.overlap));
        }
        let t = &self.tracker;
        let cfg = PipelineConfig {
            fs: self.fs,
            frame_len: self.frame_len,
            speed_of_sound: self.speed_of_sound,
            weighting: Weighting {
                exponent: self.weighting.exponent,
                floor: self.weighting.floor,
                taper: self.weighting.taper,
            },
            window: self.weighting.window,
            thresholds: self.thresholds,
            tracker: TrackerParams {
                n_c: t.n_c,
                dt: t.dt.unwrap_or(self.frame_len as f64 / (2.0 * self.fs)),
                d_min: t.d_min,
                n_s: t.n_s,
                alpha: t.alpha,
                t_win: t.t_win,
                t_a: t.t_a,
            },
            far_field_r: self.far_field_r,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

impl From<&PipelineConfig> for ConfigFile {
    fn from(c: &PipelineConfig) -> Self {
        let t = &c.tracker;
        Self {
            version: FORMAT_VERSION,
            fs: c.fs,
            frame_len: c.frame_len,
            overlap: 0.5,
            speed_of_sound: c.speed_of_sound,
            far_field_r: c.far_field_r,
            weighting: WeightingSection {
                exponent: c.weighting.exponent,
                floor: c.weighting.floor,
                taper: c.weighting.taper,
                window: c.window,
            },
            thresholds: c.thresholds,
            tracker: TrackerSection {
                n_c: t.n_c,
                dt: Some(t.dt),
                d_min: t.d_min,
                n_s: t.n_s,
                alpha: t.alpha,
                t_win: t.t_win,
                t_a: t.t_a,
            },
        }
    }
}

pub fn parse_config(path: &Path, text: &str) -> Result<PipelineConfig> {
    let f: ConfigFile = parse_toml(path, "config", text)?;
    f.to_config().map_err(|m| Error::schema(path, m))
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    parse_config(path, &read_text(path)?)
}

pub fn config_to_string(c: &PipelineConfig) -> String {
    toml::to_string(&ConfigFile::from(c)).expect("config serializes")
}

pub fn save_config(path: &Path, c: &PipelineConfig) -> Result<()> {
    write_text(path, &config_to_string(c))
}
