//! Scenario files: TOML with `[rod]`, `[control]`, `[environment]`,
//! `[integration]` and `[output]` sections.
//!
//! ```toml
//! [rod]
//! damping = 0.01
//! initial_shape = { kind = "straight" }
//!
//! [control]
//! mode = "target"          # "target", "slope" or "off"
//! gain = 50.0              # mu_tilde in 1/m, default 200 / L0
//!
//! [environment.target]
//! position = [0.1, 0.05]
//! velocity = [0.0, 0.0]
//!
//! [[environment.obstacles]]
//! center = [0.08, 0.03]
//! radius = 0.01
//!
//! [integration]
//! duration = 3.0
//! output_rate = 100.0
//! ```
//!
//! Command-line overrides address keys by dotted path (`control.gain=40`,
//! `environment.obstacles.0.radius=0.02`); values are parsed as TOML and fall
//! back to plain strings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::environment::{DragParams, Obstacle, TargetMotion, DEFAULT_CONTACT_DAMPING, DEFAULT_CONTACT_STIFFNESS};
use crate::error::{Error, Result};
use crate::geometry::RodGeometry;
use crate::rod::{InitialShape, DEFAULT_PENALTY_FACTOR};
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RodConfig {
    pub rest_length: f64,
    pub n_elements: usize,
    pub base_radius: f64,
    pub tip_radius: f64,
    pub density: f64,
    pub youngs_modulus: f64,
    pub damping: f64,
    pub penalty_factor: f64,
    pub initial_shape: InitialShape,
}

impl Default for RodConfig {
    fn default() -> Self {
        let g = RodGeometry::default();
        RodConfig {
            rest_length: g.rest_length,
            n_elements: g.n_elements,
            base_radius: g.base_radius,
            tip_radius: g.tip_radius,
            density: g.density,
            youngs_modulus: g.youngs_modulus,
            damping: g.damping,
            penalty_factor: DEFAULT_PENALTY_FACTOR,
            initial_shape: InitialShape::Straight,
        }
    }
}

impl RodConfig {
    pub fn geometry(&self) -> RodGeometry {
        RodGeometry {
            rest_length: self.rest_length,
            n_elements: self.n_elements,
            base_radius: self.base_radius,
            tip_radius: self.tip_radius,
            density: self.density,
            youngs_modulus: self.youngs_modulus,
            damping: self.damping,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// `u = -mu sin(alpha)` toward the configured target.
    Target,
    /// `u = -mu (m cos(theta) - sin(theta)) / sqrt(1 + m^2)`.
    Slope,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub mode: ControlMode,
    /// `mu_tilde` (1/m); defaults to `200 / L0`.
    pub gain: Option<f64>,
    /// Smooth-step width (m); defaults to two elements.
    pub step_width: Option<f64>,
    /// Slope `m` of the direction to a target at infinity.
    pub slope: Option<f64>,
    /// Nodes whose cross section contains the target hold it and stop
    /// steering toward it.
    pub hold_on_contact: bool,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            mode: ControlMode::Target,
            gain: None,
            step_width: None,
            slope: None,
            hold_on_contact: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DragConfig {
    pub enabled: bool,
    pub water_density: f64,
    pub c_tan: f64,
    pub c_per: f64,
}

impl Default for DragConfig {
    fn default() -> Self {
        let d = DragParams::default();
        DragConfig {
            enabled: true,
            water_density: d.water_density,
            c_tan: d.c_tan,
            c_per: d.c_per,
        }
    }
}

impl DragConfig {
    pub fn params(&self) -> DragParams {
        DragParams {
            water_density: self.water_density,
            c_tan: self.c_tan,
            c_per: self.c_per,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default = "default_stiffness")]
    pub stiffness: f64,
    #[serde(default = "default_damping")]
    pub damping: f64,
}

fn default_stiffness() -> f64 {
    DEFAULT_CONTACT_STIFFNESS
}

fn default_damping() -> f64 {
    DEFAULT_CONTACT_DAMPING
}

impl ObstacleConfig {
    pub fn obstacle(&self) -> Obstacle {
        Obstacle {
            center: Vec2::new(self.center[0], self.center[1]),
            radius: self.radius,
            stiffness: self.stiffness,
            damping: self.damping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub position: [f64; 2],
    #[serde(default)]
    pub velocity: [f64; 2],
}

impl TargetConfig {
    pub fn motion(&self) -> TargetMotion {
        TargetMotion {
            position: Vec2::new(self.position[0], self.position[1]),
            velocity: Vec2::new(self.velocity[0], self.velocity[1]),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub drag: DragConfig,
    pub obstacles: Vec<ObstacleConfig>,
    pub target: Option<TargetConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    /// Simulated time (s).
    pub duration: f64,
    /// Step override (s); defaults to the stability bound of the rod.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Frames written per simulated second.
    #[serde(default = "default_output_rate")]
    pub output_rate: f64,
}

fn default_output_rate() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub rod: bool,
    pub sensory: bool,
    pub bend: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            rod: true,
            sensory: true,
            bend: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub rod: RodConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub environment: EnvironmentConfig,
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::field(field, format!("must be finite and > 0, got {value}")))
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::MalformedConfig(e.message().to_string()))?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let scenario: Scenario = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::MalformedConfig(e.message().to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::ConfigNotFound(path.to_path_buf()))
            }
            Err(e) => return Err(e.into()),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn geometry(&self) -> RodGeometry {
        self.rod.geometry()
    }

    pub fn dt(&self) -> f64 {
        self.integration.dt.unwrap_or_else(|| self.geometry().stable_dt())
    }

    pub fn gain(&self) -> f64 {
        self.control
            .gain
            .unwrap_or_else(|| crate::sensing::default_gain(&self.geometry()))
    }

    pub fn step_width(&self) -> f64 {
        self.control
            .step_width
            .unwrap_or_else(|| crate::sensing::default_step_width(&self.geometry()))
    }

    pub fn drag(&self) -> Option<DragParams> {
        self.environment.drag.enabled.then(|| self.environment.drag.params())
    }

    pub fn obstacles(&self) -> Vec<Obstacle> {
        self.environment
            .obstacles
            .iter()
            .map(ObstacleConfig::obstacle)
            .collect()
    }

    pub fn target(&self) -> Option<TargetMotion> {
        self.environment.target.as_ref().map(TargetConfig::motion)
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.geometry();
        g.validate()?;
        positive("rod.penalty_factor", self.rod.penalty_factor)?;
        positive("integration.duration", self.integration.duration)?;
        positive("integration.output_rate", self.integration.output_rate)?;
        if let Some(dt) = self.integration.dt {
            positive("integration.dt", dt)?;
        }
        let dt = self.dt();
        if self.integration.output_rate > 1.0 / dt {
            return Err(Error::field(
                "integration.output_rate",
                format!("must not exceed 1/dt = {} Hz", 1.0 / dt),
            ));
        }
        if let Some(gain) = self.control.gain {
            positive("control.gain", gain)?;
        }
        if let Some(w) = self.control.step_width {
            positive("control.step_width", w)?;
        }
        match self.control.mode {
            ControlMode::Target if self.environment.target.is_none() => {
                return Err(Error::field(
                    "environment.target",
                    "required when control.mode = \"target\"",
                ));
            }
            ControlMode::Slope => match self.control.slope {
                Some(m) if m.is_finite() => {}
                _ => {
                    return Err(Error::field(
                        "control.slope",
                        "a finite slope is required when control.mode = \"slope\"",
                    ))
                }
            },
            _ => {}
        }
        if self.environment.drag.enabled {
            self.environment.drag.params().validate()?;
        }
        if let Some(t) = &self.environment.target {
            t.motion().validate()?;
        }
        for (i, o) in self.environment.obstacles.iter().enumerate() {
            o.obstacle().validate().map_err(|e| match e {
                Error::InvalidField { field, reason } => Error::InvalidField {
                    field: field.replace("obstacles", &format!("obstacles.{i}")),
                    reason,
                },
                other => other,
            })?;
            let clearance = Vec2::new(o.center[0], o.center[1]).norm() - o.radius;
            if clearance <= g.base_radius {
                return Err(Error::field(
                    format!("environment.obstacles.{i}"),
                    "overlaps the base clamp",
                ));
            }
        }
        Ok(())
    }
}

/// Apply one `dotted.key=value` override to a parsed config table.
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::MalformedConfig(format!("override `{item}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(Error::MalformedConfig(format!("override `{item}` has an empty key")));
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = table;
    for (depth, part) in parts.iter().enumerate() {
        let last = depth + 1 == parts.len();
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if last {
            *entry = value;
            return Ok(());
        }
        node = match entry {
            toml::Value::Table(t) => t,
            toml::Value::Array(items) => {
                let idx: usize = parts[depth + 1]
                    .parse()
                    .map_err(|_| Error::MalformedConfig(format!("`{key}`: expected an index after `{part}`")))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::MalformedConfig(format!("`{key}`: index {idx} out of range")))?;
                if depth + 2 == parts.len() {
                    *slot = value;
                    return Ok(());
                }
                let toml::Value::Table(t) = slot else {
                    return Err(Error::MalformedConfig(format!("`{key}` does not name a table")));
                };
                return apply_override(t, &format!("{}={raw}", parts[depth + 2..].join(".")));
            }
            _ => return Err(Error::MalformedConfig(format!("`{key}`: `{part}` is not a table"))),
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[environment.target]
position = [0.1, 0.05]

[integration]
duration = 0.01
"#;

    #[test]
    fn minimal_scenario_uses_defaults() {
        let s = Scenario::from_toml_str(MINIMAL, &[]).unwrap();
        assert_eq!(s.geometry(), RodGeometry::default());
        assert_eq!(s.control.mode, ControlMode::Target);
        assert!((s.gain() - 1000.0).abs() < 1e-9);
        assert!(s.drag().is_some());
        assert_eq!(s.target().unwrap().position, Vec2::new(0.1, 0.05));
    }

    #[test]
    fn overrides_take_precedence() {
        let s = Scenario::from_toml_str(
            MINIMAL,
            &["control.gain=40".into(), "rod.initial_shape.kind=\"straight\"".into()],
        )
        .unwrap();
        assert_eq!(s.control.gain, Some(40.0));
        let s = Scenario::from_toml_str(MINIMAL, &["environment.drag.enabled=false".into()]).unwrap();
        assert!(s.drag().is_none());
    }

    #[test]
    fn obstacle_override_by_index() {
        let text = format!("{MINIMAL}\n[[environment.obstacles]]\ncenter = [0.1, 0.1]\nradius = 0.01\n");
        let s = Scenario::from_toml_str(&text, &["environment.obstacles.0.radius=0.02".into()]).unwrap();
        assert_eq!(s.environment.obstacles[0].radius, 0.02);
        assert!(Scenario::from_toml_str(&text, &["environment.obstacles.3.radius=0.02".into()]).is_err());
    }

    fn field_of(err: Error) -> String {
        match err {
            Error::InvalidField { field, .. } => field,
            other => panic!("expected a field error, got {other}"),
        }
    }

    #[test]
    fn invalid_fields_are_named() {
        let e = Scenario::from_toml_str(MINIMAL, &["integration.duration=-1".into()]).unwrap_err();
        assert_eq!(field_of(e), "integration.duration");
        let e = Scenario::from_toml_str(MINIMAL, &["rod.n_elements=1".into()]).unwrap_err();
        assert_eq!(field_of(e), "rod.n_elements");
        let e = Scenario::from_toml_str(MINIMAL, &["integration.output_rate=1e9".into()]).unwrap_err();
        assert_eq!(field_of(e), "integration.output_rate");
        let e = Scenario::from_toml_str(MINIMAL, &["control.mode=\"slope\"".into()]).unwrap_err();
        assert_eq!(field_of(e), "control.slope");
        let text = "[integration]\nduration = 1.0\n";
        assert_eq!(
            field_of(Scenario::from_toml_str(text, &[]).unwrap_err()),
            "environment.target"
        );
        let text = format!("{MINIMAL}\n[[environment.obstacles]]\ncenter = [0.0, 0.0]\nradius = 0.005\n");
        assert_eq!(
            field_of(Scenario::from_toml_str(&text, &[]).unwrap_err()),
            "environment.obstacles.0"
        );
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(
            Scenario::from_toml_str("[rod\n", &[]),
            Err(Error::MalformedConfig(_))
        ));
        assert!(matches!(
            Scenario::from_toml_str(MINIMAL, &["nonsense".into()]),
            Err(Error::MalformedConfig(_))
        ));
        let typo = format!("{MINIMAL}\n[control]\nmode = \"target\"\ngian = 3\n");
        assert!(matches!(
            Scenario::from_toml_str(&typo, &[]),
            Err(Error::MalformedConfig(_))
        ));
        let typo = format!("{MINIMAL}\n[environment.drag]\nc_perp = 3\n");
        assert!(matches!(
            Scenario::from_toml_str(&typo, &[]),
            Err(Error::MalformedConfig(_))
        ));
    }

    #[test]
    fn missing_file() {
        let e = Scenario::load(Path::new("/definitely/not/here.toml"), &[]).unwrap_err();
        assert!(matches!(e, Error::ConfigNotFound(_)));
    }
}
