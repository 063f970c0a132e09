//! Launch profiles: one TOML document describing the gateway and every arm.
//!
//! ```toml
//! gateway_bind = "127.0.0.1:9090"
//! clock = "wall"
//! seed = 0
//!
//! [[arm]]
//! namespace = "/left"
//! [arm.planner]
//! jump_threshold = 0.06
//! [arm.sim]
//! transport_delay = 0.02
//! [arm.recorder]
//! output_root = "dataset/left"
//! ```

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bridge::sim::SimArmConfig;
use crate::bus::TopicName;
use crate::planner::PlannerConfig;
use crate::pose_math::AxisMap;
use crate::recorder::RecorderConfig;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("cannot read profile {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("profile syntax: {0}")]
    Syntax(String),
    #[error("{field}: {reason}")]
    Field { field: String, reason: String },
}

fn field(field: impl Into<String>, reason: impl Into<String>) -> ProfileError {
    ProfileError::Field { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// Manually stepped; every test uses this.
    Virtual,
    #[default]
    Wall,
}

impl std::str::FromStr for ClockMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "virtual" => Ok(Self::Virtual),
            "wall" => Ok(Self::Wall),
            other => Err(format!("unknown clock mode `{other}` (virtual|wall)")),
        }
    }
}

/// Where an arm's controller lives.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ControllerEndpoint {
    /// Mock controller called directly, no socket.
    #[default]
    InProcess,
    /// Mock controller served over loopback TCP at `bind` (port 0 picks one).
    Tcp { bind: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmProfile {
    pub namespace: String,
    #[serde(default)]
    pub controller: ControllerEndpoint,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub sim: SimArmConfig,
    #[serde(default)]
    pub recorder: RecorderConfig,
}

impl ArmProfile {
    pub fn new(namespace: &str) -> Self {
        Self {
            namespace: namespace.into(),
            controller: ControllerEndpoint::default(),
            planner: PlannerConfig::default(),
            sim: SimArmConfig::default(),
            recorder: RecorderConfig::default(),
        }
    }
}

fn default_bind() -> String {
    format!("127.0.0.1:{}", crate::gateway::DEFAULT_PORT)
}

fn default_tick_ms() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaunchProfile {
    #[serde(default = "default_bind")]
    pub gateway_bind: String,
    #[serde(default)]
    pub clock: ClockMode,
    /// Mixed into synthetic camera seeds and generated scripts.
    #[serde(default)]
    pub seed: u64,
    /// Executor period, milliseconds.
    #[serde(default = "default_tick_ms")]
    pub tick_ms: u64,
    #[serde(rename = "arm")]
    pub arms: Vec<ArmProfile>,
}

impl Default for LaunchProfile {
    fn default() -> Self {
        Self::single_arm()
    }
}

impl LaunchProfile {
    pub fn single_arm() -> Self {
        Self { gateway_bind: default_bind(), clock: ClockMode::Wall, seed: 0, tick_ms: 1, arms: vec![ArmProfile::new("")] }
    }

    /// Two identical pipelines under `/left` and `/right`, each recording to its own root.
    pub fn bimanual() -> Self {
        let arm = |ns: &str, dir: &str| {
            let mut a = ArmProfile::new(ns);
            a.recorder.output_root = PathBuf::from("dataset").join(dir);
            a
        };
        Self { arms: vec![arm("/left", "left"), arm("/right", "right")], ..Self::single_arm() }
    }

    /// Single arm whose simulated transport delay puts the measured
    /// actuation latency in the 350-440 ms range reported for real hardware.
    pub fn hardware_latency_preset() -> Self {
        let mut p = Self::single_arm();
        p.arms[0].sim.transport_delay = 0.20;
        p
    }

    pub fn parse(text: &str) -> Result<Self, ProfileError> {
        let p: Self = toml::from_str(text).map_err(|e| ProfileError::Syntax(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProfileError::Read { path: path.display().to_string(), reason: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("profile serializes")
    }

    pub fn namespaces(&self) -> Vec<&str> {
        self.arms.iter().map(|a| a.namespace.as_str()).collect()
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        self.gateway_bind
            .parse::<SocketAddr>()
            .map_err(|e| field("gateway_bind", format!("`{}`: {e}", self.gateway_bind)))?;
        if !(1..=50).contains(&self.tick_ms) {
            return Err(field("tick_ms", format!("{} outside 1..=50", self.tick_ms)));
        }
        if self.arms.is_empty() {
            return Err(field("arm", "at least one [[arm]] is required"));
        }
        let mut namespaces = HashSet::new();
        let mut roots = HashSet::new();
        for (i, arm) in self.arms.iter().enumerate() {
            let f = |name: &str| format!("arm[{i}].{name}");
            TopicName::new(&arm.namespace, "phone2act/x").map_err(|e| field(f("namespace"), e.to_string()))?;
            if !namespaces.insert(arm.namespace.as_str()) {
                return Err(field(f("namespace"), format!("duplicate namespace `{}`", arm.namespace)));
            }
            AxisMap::new(*arm.planner.axis_map.matrix(), arm.planner.axis_map.scale())
                .map_err(|e| field(f("planner.axis_map"), e.to_string()))?;
            arm.planner.validate().map_err(|e| field(f("planner"), e.to_string()))?;
            arm.sim.validate().map_err(|e| field(f("sim"), e))?;
            arm.recorder
                .validate()
                .map_err(|e| field(f("recorder"), e.to_string().trim_start_matches("config: ").to_string()))?;
            if let ControllerEndpoint::Tcp { bind } = &arm.controller {
                bind.parse::<SocketAddr>().map_err(|e| field(f("controller.bind"), format!("`{bind}`: {e}")))?;
            }
            if arm.recorder.enabled && !roots.insert(arm.recorder.output_root.clone()) {
                return Err(field(
                    f("recorder.output_root"),
                    format!("`{}` is shared with another arm", arm.recorder.output_root.display()),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        for p in [LaunchProfile::single_arm(), LaunchProfile::bimanual(), LaunchProfile::hardware_latency_preset()] {
            p.validate().unwrap();
            let text = p.to_toml();
            assert_eq!(LaunchProfile::parse(&text).unwrap(), p, "{text}");
        }
    }

    #[test]
    fn minimal_profile_fills_defaults() {
        let p = LaunchProfile::parse("[[arm]]\nnamespace = \"/left\"\n[arm.sim]\ntransport_delay = 0.1\n").unwrap();
        assert_eq!(p.arms[0].namespace, "/left");
        assert_eq!(p.arms[0].sim.transport_delay, 0.1);
        assert_eq!(p.arms[0].sim.lag_time_constant, SimArmConfig::default().lag_time_constant);
        assert_eq!(p.clock, ClockMode::Wall);
    }

    #[test]
    fn duplicate_namespace_rejected() {
        let text = "[[arm]]\nnamespace = \"/a\"\n[arm.recorder]\noutput_root = \"x\"\n[[arm]]\nnamespace = \"/a\"\n";
        let e = LaunchProfile::parse(text).unwrap_err();
        assert_eq!(e.to_string(), "arm[1].namespace: duplicate namespace `/a`");
    }

    #[test]
    fn field_errors_name_the_field() {
        let cases = [
            ("[[arm]]\nnamespace = \"left\"\n", "arm[0].namespace"),
            ("[[arm]]\nnamespace = \"\"\n[arm.sim]\nfeedback_rate = 0.0\n", "arm[0].sim"),
            ("[[arm]]\nnamespace = \"\"\n[arm.planner]\njump_threshold = -1.0\n", "arm[0].planner"),
            ("[[arm]]\nnamespace = \"\"\n[arm.recorder]\nfreshness_window_ms = 0.0\n", "arm[0].recorder"),
            ("gateway_bind = \"nowhere\"\n[[arm]]\nnamespace = \"\"\n", "gateway_bind"),
            ("tick_ms = 0\n[[arm]]\nnamespace = \"\"\n", "tick_ms"),
            ("arm = []\n", "arm"),
            ("[[arm]]\nnamespace = \"/a\"\n[[arm]]\nnamespace = \"/b\"\n", "arm[1].recorder.output_root"),
        ];
        for (text, want) in cases {
            let e = LaunchProfile::parse(text).unwrap_err();
            match &e {
                ProfileError::Field { field, .. } => assert_eq!(field, want, "{text}"),
                other => panic!("{text}: {other}"),
            }
        }
        assert!(matches!(LaunchProfile::parse("[[arm]]\nnamespace = \"\"\nbogus = 1\n"), Err(ProfileError::Syntax(_))));
    }
}
