//! Run configuration: a TOML file with named blocks, optional `key=value`
//! overrides, unit conversion to atomic units and validation.

use serde::{Deserialize, Serialize};
use thimble_core::field::{LaserField, Waveform};
use thimble_core::scans::linspace;

use crate::RunError;

/// Hartree in eV.
pub const HARTREE_EV: f64 = 27.211386245988;
/// `ω[a.u.] · λ[nm]`, i.e. `hc` in hartree·nm.
pub const OMEGA_NM: f64 = 45.563352529;
/// Intensity in W/cm² of a field of one atomic unit, `I = E0²·3.51e16`.
pub const INTENSITY_AU: f64 = 3.50944506e16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Monochromatic,
    TwoColour,
    Switchover,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    #[default]
    Hhg,
    Ati,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Spm,
    Plf,
    #[default]
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_au: Option<f64>,
    #[serde(
        default,
        rename = "intensity_Wcm2",
        skip_serializing_if = "Option::is_none"
    )]
    pub intensity_wcm2: Option<f64>,
    #[serde(default, rename = "E0_au", skip_serializing_if = "Option::is_none")]
    pub e0_au: Option<f64>,
    /// `E2/E1` of the two-colour field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default)]
    pub phase2: f64,
    /// Mixing angle of the switchover field in degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetBlock {
    #[serde(default, rename = "ip_eV", skip_serializing_if = "Option::is_none")]
    pub ip_ev: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ip_au: Option<f64>,
    #[serde(default)]
    pub process: Process,
    /// Final momentum of the ionisation amplitude (a.u.).
    #[serde(default)]
    pub momentum: f64,
}

/// Numerical parameters in atomic units; unset values default to
/// multiples of the laser period.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_flow: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_thresh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_thresh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_necklace: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_beads: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    /// Harmonic order of single-order subcommands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_step: Option<f64>,
    #[serde(default)]
    pub method: MethodChoice,
    /// Separation of ionisation bursts in radians of `ω Re ti`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burst_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_samples: Option<usize>,
    /// Seed of the cusp search on the real slice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_theta_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_q: Option<f64>,
    /// Half-width of the damped real window of `flow1d`, in cycles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_cycles: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> String {
    String::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

/// Polynomial test phase `φ(z) = Σ c_k z^k` on a real segment, used by
/// `flow1d` in place of the laser problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyBlock {
    pub coeffs: Vec<f64>,
    pub range: [f64; 2],
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_toy_iter")]
    pub iterations: usize,
}

fn default_nodes() -> usize {
    400
}

fn default_toy_iter() -> usize {
    300
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub field: FieldBlock,
    #[serde(default)]
    pub target: TargetBlock,
    #[serde(default)]
    pub flow: FlowBlock,
    #[serde(default)]
    pub scan: ScanBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy: Option<ToyBlock>,
}

/// Validated configuration in atomic units.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub omega: f64,
    pub e0: f64,
    pub ip: f64,
    pub ratio: f64,
    pub theta_deg: f64,
}

fn cfg_err(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

fn one_of(a: Option<f64>, b: Option<f64>, names: (&str, &str)) -> Result<(), RunError> {
    match (a, b) {
        (Some(_), None) | (None, Some(_)) => Ok(()),
        (None, None) => Err(cfg_err(format!(
            "one of `{}` or `{}` is required",
            names.0, names.1
        ))),
        (Some(_), Some(_)) => Err(cfg_err(format!(
            "`{}` and `{}` are mutually exclusive",
            names.0, names.1
        ))),
    }
}

fn positive(v: Option<f64>, name: &str) -> Result<(), RunError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => {
            Err(cfg_err(format!("`{name}` must be positive, got {x}")))
        }
        _ => Ok(()),
    }
}

pub fn ev_to_au(ev: f64) -> f64 {
    ev / HARTREE_EV
}

pub fn nm_to_omega(nm: f64) -> f64 {
    OMEGA_NM / nm
}

pub fn intensity_to_field(wcm2: f64) -> f64 {
    (wcm2 / INTENSITY_AU).sqrt()
}

/// Sets `path` (dotted) in a TOML table to `raw`, parsed as a TOML value
/// when possible and as a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), RunError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        cfg_err(format!(
            "override `{assignment}` is not of the form key=value"
        ))
    })?;
    let key = key.trim();
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.trim().into())),
        Err(_) => toml::Value::String(raw.trim().into()),
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| cfg_err(format!("empty override key in `{assignment}`")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| cfg_err(format!("`{p}` in `{key}` is not a block")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, RunError> {
        let mut table: toml::Table = text.parse().map_err(|e| cfg_err(format!("{e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| cfg_err(format!("{e}")))
    }

    pub fn validate(&self) -> Result<Resolved, RunError> {
        let f = &self.field;
        one_of(f.lambda_nm, f.omega_au, ("lambda_nm", "omega_au"))?;
        one_of(f.intensity_wcm2, f.e0_au, ("intensity_Wcm2", "E0_au"))?;
        one_of(self.target.ip_ev, self.target.ip_au, ("ip_eV", "ip_au"))?;
        for (v, n) in [
            (f.lambda_nm, "lambda_nm"),
            (f.omega_au, "omega_au"),
            (f.intensity_wcm2, "intensity_Wcm2"),
            (f.e0_au, "E0_au"),
            (self.target.ip_ev, "ip_eV"),
            (self.target.ip_au, "ip_au"),
            (self.flow.delta_flow, "delta_flow"),
            (self.flow.l_thresh, "l_thresh"),
            (self.flow.diag_eps, "diag_eps"),
            (self.flow.epsilon_necklace, "epsilon_necklace"),
            (self.scan.q_step, "q_step"),
            (self.scan.theta_step, "theta_step"),
            (self.scan.phase_step, "phase_step"),
            (self.scan.burst_gap, "burst_gap"),
            (self.scan.window_cycles, "window_cycles"),
        ] {
            positive(v, n)?;
        }
        if self.flow.max_iter == Some(0) || self.flow.n_beads.is_some_and(|n| n < 8) {
            return Err(cfg_err(
                "`max_iter` must be positive and `n_beads` at least 8",
            ));
        }
        let omega = f
            .omega_au
            .unwrap_or_else(|| nm_to_omega(f.lambda_nm.unwrap_or(f64::NAN)));
        let e0 = f
            .e0_au
            .unwrap_or_else(|| intensity_to_field(f.intensity_wcm2.unwrap_or(f64::NAN)));
        let ip = self
            .target
            .ip_au
            .unwrap_or_else(|| ev_to_au(self.target.ip_ev.unwrap_or(f64::NAN)));
        let ratio = match f.family {
            Family::TwoColour => f
                .ratio
                .ok_or_else(|| cfg_err("two_colour field needs `ratio`"))?,
            _ => f.ratio.unwrap_or(0.0),
        };
        if !(ratio >= 0.0 && ratio.is_finite()) {
            return Err(cfg_err("`ratio` must be non-negative"));
        }
        let theta_deg = match f.family {
            Family::Switchover => f
                .theta_deg
                .ok_or_else(|| cfg_err("switchover field needs `theta_deg`"))?,
            _ => f.theta_deg.unwrap_or(0.0),
        };
        if self.output.formats.is_empty() {
            return Err(cfg_err("`formats` must not be empty"));
        }
        Ok(Resolved {
            omega,
            e0,
            ip,
            ratio,
            theta_deg,
        })
    }

    /// Canonical TOML text, the input to the content hash.
    pub fn canonical(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}

impl Resolved {
    pub fn period(&self) -> f64 {
        2.0 * core::f64::consts::PI / self.omega
    }

    /// The driving field at the configured mixing angle.
    pub fn waveform(&self, cfg: &RunConfig) -> Waveform {
        self.waveform_at(cfg, self.theta_deg, cfg.field.phase2)
    }

    pub fn waveform_at(&self, cfg: &RunConfig, theta_deg: f64, phase2: f64) -> Waveform {
        match cfg.field.family {
            Family::Monochromatic => LaserField::monochromatic(self.e0, self.omega).waveform(),
            Family::TwoColour => {
                LaserField::two_colour_cos(self.e0, self.ratio * self.e0, self.omega, phase2)
                    .waveform()
            }
            Family::Switchover => thimble_core::field::switchover_waveform(
                thimble_core::C64::new(theta_deg.to_radians(), 0.0),
                self.e0,
                self.omega,
                phase2,
            ),
        }
    }
}

fn range(
    min: Option<f64>,
    max: Option<f64>,
    step: Option<f64>,
    name: &str,
) -> Result<Vec<f64>, RunError> {
    let (Some(a), Some(b)) = (min, max) else {
        return Err(cfg_err(format!("scan needs `{name}_min` and `{name}_max`")));
    };
    if b < a {
        return Err(cfg_err(format!("`{name}_max` is below `{name}_min`")));
    }
    let step = step.unwrap_or(1.0);
    // the small slack keeps the end point when (b − a)/step is integral
    let n = ((b - a) / step + 1e-9).floor() as usize + 1;
    Ok(linspace(a, a + step * (n - 1) as f64, n))
}

impl ScanBlock {
    pub fn q_values(&self) -> Result<Vec<f64>, RunError> {
        range(self.q_min, self.q_max, self.q_step, "q")
    }
    pub fn theta_values(&self) -> Result<Vec<f64>, RunError> {
        range(self.theta_min, self.theta_max, self.theta_step, "theta")
    }
    pub fn phase_values(&self) -> Result<Vec<f64>, RunError> {
        range(self.phase_min, self.phase_max, self.phase_step, "phase")
    }
    pub fn single_q(&self) -> Result<f64, RunError> {
        self.q
            .ok_or_else(|| cfg_err("this subcommand needs `scan.q`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[field]
family = "monochromatic"
lambda_nm = 1030.0
E0_au = 0.05

[target]
ip_eV = 15.8

[scan]
q_min = 15
q_max = 19
q_step = 2
"#;

    #[test]
    fn unit_conversions() {
        assert!((ev_to_au(15.8) - 0.58064).abs() < 1e-5);
        assert!((nm_to_omega(1030.0) - 0.044237).abs() < 1e-5);
        // 0.92e14 W/cm² is quoted next to E0 = 0.05
        assert!((intensity_to_field(0.92e14) - 0.0512).abs() < 1e-3);
    }

    #[test]
    fn parses_and_resolves() {
        let c = RunConfig::parse(BASE, &[]).unwrap();
        let r = c.validate().unwrap();
        assert!((r.omega - 0.044237).abs() < 1e-5);
        assert_eq!(c.scan.q_values().unwrap(), [15.0, 17.0, 19.0]);
    }

    #[test]
    fn overrides_replace_and_insert() {
        let c = RunConfig::parse(
            BASE,
            &[
                "scan.q=25".into(),
                "field.phase2=0.5".into(),
                "output.directory=res".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.scan.q, Some(25.0));
        assert_eq!(c.field.phase2, 0.5);
        assert_eq!(c.output.directory, "res");
    }

    #[test]
    fn rejects_both_units() {
        let c = RunConfig::parse(BASE, &["field.omega_au=0.044".into()]).unwrap();
        assert!(matches!(c.validate(), Err(RunError::Config(_))));
        let c = RunConfig::parse(BASE, &["flow.l_thresh=-1".into()]).unwrap();
        assert!(matches!(c.validate(), Err(RunError::Config(_))));
        assert!(matches!(
            RunConfig::parse(BASE, &["field.colour=2".into()]),
            Err(RunError::Config(_))
        ));
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = RunConfig::parse(BASE, &["scan.q=25".into()]).unwrap();
        let back = RunConfig::parse(&c.canonical(), &[]).unwrap();
        assert_eq!(back, c);
    }
}
