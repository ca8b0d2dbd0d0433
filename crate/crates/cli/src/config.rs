//! Run configuration read from a TOML file.

use covllg_core::cgl::{PicardConfig, TimeMesh};
use covllg_core::llg::{Scheme, SolverConfig};
use covllg_core::scenario::{ScenarioKind, ScenarioSpec};
use covllg_core::vec3::Vec3;
use covllg_core::GridSpec;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dimension: usize,
    pub points: usize,
    pub box_length: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            dimension: 3,
            points: 16,
            box_length: 2.0 * PI,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Imex,
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub lambda: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: SchemeName,
    pub projection_tolerance: f64,
    pub record_every: usize,
    /// 0 selects `10³/h`
    pub blowup_ceiling: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            dt: 5e-3,
            t_end: 0.5,
            scheme: SchemeName::Imex,
            projection_tolerance: 1e-10,
            record_every: 4,
            blowup_ceiling: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindName {
    LinearWave,
    Bubble,
    RandomSmall,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeMode {
    Fixed,
    Target,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: KindName,
    pub amplitude_mode: AmplitudeMode,
    pub amplitude: f64,
    pub target_grad_ln: f64,
    pub wavevector: [f64; 3],
    pub radius: f64,
    /// empty selects the box center
    pub center: Vec<f64>,
    pub seed: u64,
    pub bandwidth: usize,
    pub m_inf: [f64; 3],
    /// field file read by the `custom` kind
    pub custom_path: String,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            kind: KindName::RandomSmall,
            amplitude_mode: AmplitudeMode::Target,
            amplitude: 0.1,
            target_grad_ln: 0.1,
            wavevector: [1.0, 0.0, 0.0],
            radius: 1.0,
            center: Vec::new(),
            seed: 0,
            bandwidth: 2,
            m_inf: [0.0, 0.0, 1.0],
            custom_path: String::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorSection {
    pub delta: f64,
    pub energy_law: bool,
    /// Coulomb-gauge `‖∇u‖_{Lⁿ}`, weighted norms and the bootstrap check
    pub frame_norms: bool,
    pub theorem_bounds: bool,
    /// 0 disables the higher-order energy monitor
    pub sobolev_sigma: u32,
    pub decay: bool,
    /// empty selects `[0.1, min(t_gap/2, t_end)]`
    pub decay_window: Vec<f64>,
    pub decay_exponent: f64,
}

impl Default for MonitorSection {
    fn default() -> Self {
        Self {
            delta: 0.62,
            energy_law: true,
            frame_norms: true,
            theorem_bounds: true,
            sobolev_sigma: 2,
            decay: true,
            decay_window: Vec::new(),
            decay_exponent: 1.0 / 6.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FramesSection {
    /// empty selects the default reference direction
    pub reference: Vec<f64>,
    /// pass threshold for the identity residuals
    pub tolerance: f64,
}

impl Default for FramesSection {
    fn default() -> Self {
        Self {
            reference: Vec::new(),
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardSection {
    pub t_end: f64,
    pub mesh_spacing: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub gate_enabled: bool,
    pub smallness_gate: f64,
}

impl Default for PicardSection {
    fn default() -> Self {
        Self {
            t_end: 0.5,
            mesh_spacing: 0.01,
            max_iter: 50,
            tol: 1e-12,
            gate_enabled: true,
            smallness_gate: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// write a field checkpoint every this many recorded samples; 0 disables
    pub checkpoint_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            checkpoint_every: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub solver: SolverSection,
    pub scenario: ScenarioSection,
    pub monitor: MonitorSection,
    pub frames: FramesSection,
    pub picard: PicardSection,
    pub output: OutputSection,
}

const REFERENCE_HEADER: &str = "\
# Reference run configuration with every default written out.
# Empty lists select the documented automatic choice.
#
# solver.scheme           imex | rk4
# solver.blowup_ceiling   0 selects 1000 / grid spacing
# scenario.kind           linear-wave | bubble | random-small | custom
# scenario.amplitude_mode fixed (use amplitude) | target (search amplitude for target_grad_ln)
# scenario.center         empty selects the box center
# monitor.sobolev_sigma   0 disables the higher-order energy monitor
# monitor.decay_window    empty selects [0.1, min(t_gap/2, t_end)]
# frames.reference        empty selects the default reference direction
# output.checkpoint_every recorded samples between checkpoints, 0 disables

";

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn reference_text() -> String {
        let body = toml::to_string(&RunConfig::default()).expect("default config serializes");
        format!("{REFERENCE_HEADER}{body}")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid()?;
        self.solver_config().validate().map_err(|e| invalid("solver", e.to_string()))?;
        let d = self.monitor.delta;
        if !(d > 0.5 && d < 1.0) {
            return Err(invalid("monitor.delta", format!("must lie in (1/2, 1), got {d}")));
        }
        if !(self.monitor.decay_window.is_empty() || self.monitor.decay_window.len() == 2) {
            return Err(invalid("monitor.decay_window", "needs zero or two entries"));
        }
        if !(self.monitor.decay_exponent > 0.0) {
            return Err(invalid("monitor.decay_exponent", "must be > 0"));
        }
        if self.monitor.sobolev_sigma == 1 {
            return Err(invalid("monitor.sobolev_sigma", "must be 0 or >= 2"));
        }
        if !(self.scenario.center.is_empty() || self.scenario.center.len() == 3) {
            return Err(invalid("scenario.center", "needs zero or three entries"));
        }
        if !(self.frames.reference.is_empty() || self.frames.reference.len() == 3) {
            return Err(invalid("frames.reference", "needs zero or three entries"));
        }
        if !(self.frames.tolerance > 0.0) {
            return Err(invalid("frames.tolerance", "must be > 0"));
        }
        if self.scenario.kind == KindName::Custom && self.scenario.custom_path.is_empty() {
            return Err(invalid("scenario.custom_path", "required by the custom kind"));
        }
        self.picard_mesh().map_err(|e| invalid("picard", e.to_string()))?;
        let p = self.picard_config();
        if p.max_iter == 0 || !(p.tol > 0.0) {
            return Err(invalid("picard", "need max_iter >= 1 and tol > 0"));
        }
        if self.output.dir.is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec, ConfigError> {
        GridSpec::new(self.grid.dimension, self.grid.points, self.grid.box_length)
            .map_err(|e| invalid("grid", e.to_string()))
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        let mut cfg = SolverConfig::new(s.lambda, s.dt, s.t_end)
            .with_scheme(match s.scheme {
                SchemeName::Imex => Scheme::ImexProjection,
                SchemeName::Rk4 => Scheme::Rk4Projection,
            })
            .with_record_every(s.record_every);
        cfg.projection_tolerance = s.projection_tolerance;
        cfg.blowup_ceiling = (s.blowup_ceiling > 0.0).then_some(s.blowup_ceiling);
        cfg
    }

    pub fn m_inf(&self) -> Vec3 {
        self.scenario.m_inf
    }

    /// Scenario for the built-in kinds; the custom kind is read by the caller.
    pub fn scenario_spec(&self) -> ScenarioSpec {
        let s = &self.scenario;
        let kind = match s.kind {
            KindName::LinearWave => ScenarioKind::LinearWave,
            KindName::Bubble => ScenarioKind::Bubble,
            KindName::RandomSmall | KindName::Custom => ScenarioKind::RandomSmall,
        };
        let mut spec = ScenarioSpec::new(kind)
            .with_amplitude(s.amplitude)
            .with_wavevector(s.wavevector)
            .with_radius(s.radius)
            .with_seed(s.seed);
        if s.amplitude_mode == AmplitudeMode::Target {
            spec = spec.with_target(s.target_grad_ln);
        }
        spec.center = (s.center.len() == 3).then(|| [s.center[0], s.center[1], s.center[2]]);
        spec.bandwidth = s.bandwidth;
        spec.m_inf = s.m_inf;
        spec
    }

    pub fn frame_reference(&self) -> Option<Vec3> {
        let r = &self.frames.reference;
        (r.len() == 3).then(|| [r[0], r[1], r[2]])
    }

    pub fn picard_config(&self) -> PicardConfig {
        let p = &self.picard;
        let mut cfg = PicardConfig::new(self.solver.lambda);
        cfg.max_iter = p.max_iter;
        cfg.tol = p.tol;
        cfg.smallness_gate = p.gate_enabled.then_some(p.smallness_gate);
        cfg
    }

    pub fn picard_mesh(&self) -> covllg_core::Result<TimeMesh> {
        TimeMesh::graded(self.picard.t_end, self.picard.mesh_spacing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_text_parses_back_to_defaults() {
        let text = RunConfig::reference_text();
        assert_eq!(RunConfig::parse(&text).unwrap(), RunConfig::default());
        for key in ["dimension", "lambda", "amplitude_mode", "delta", "tolerance", "mesh_spacing", "checkpoint_every"] {
            assert!(text.contains(key), "{key}");
        }
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = RunConfig::parse("[grid]\npoints = 8\n[scenario]\nkind = \"bubble\"\n").unwrap();
        assert_eq!(cfg.grid.points, 8);
        assert_eq!(cfg.scenario.kind, KindName::Bubble);
        assert_eq!(cfg.solver, SolverSection::default());
    }

    #[test]
    fn errors_name_the_offending_field() {
        let err = RunConfig::parse("[solver]\ndt = \"x\"\n").unwrap_err().to_string();
        assert!(err.contains("dt") && err.contains("line 2"), "{err}");
        let err = RunConfig::parse("[solver]\nspeed = 1\n").unwrap_err().to_string();
        assert!(err.contains("speed"), "{err}");
        let err = RunConfig::parse("[monitor]\ndelta = 0.4\n").unwrap_err().to_string();
        assert!(err.contains("monitor.delta"), "{err}");
        let err = RunConfig::parse("[grid]\npoints = 3\n").unwrap_err().to_string();
        assert!(err.contains("grid"), "{err}");
        assert!(RunConfig::parse("[scenario]\nkind = \"custom\"\n").is_err());
    }
}
