//! Run configuration: one JSON document naming the reaction model, the
//! channel topology, and optional analysis / simulation / sweep settings.
//!
//! Parsing is strict — unknown keys anywhere are rejected so a typo cannot
//! silently fall back to a default — and every derived quantity (flux gain,
//! simulator settings) comes from one deterministic rule documented on its
//! accessor.

use std::collections::BTreeMap;

use serde::Deserialize;

use mc_core::channel::{BoundaryKind, ChannelError, ChannelTopology, TimeUnit};
use mc_core::reaction::{model_from_config, ReactionError, ReactionModel};
use mc_core::simulator::{ChannelInit, Perturbation, SimConfig};
use mc_core::stability::{ContourOptions, VerdictOptions};

use crate::format::Json;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub topology: TopologySection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    pub simulation: Option<SimulationSection>,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Registry name of the reaction model (`ard`, `linear_decay`).
    pub name: String,
    /// Scalar parameters forwarded to the model constructor.
    pub params: BTreeMap<String, f64>,
    /// Optional Newton seed pinning which equilibrium is analyzed; without
    /// it a deterministic seed-grid search picks the most active one.
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub n: usize,
    /// Segment lengths in µm (`n` entries on a ring, `n + 1` on a chain).
    pub lengths: Vec<f64>,
    pub mu_um2_per_s: f64,
    pub boundary: BoundaryName,
    pub time_unit: TimeUnitName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum BoundaryName {
    #[serde(rename = "ring")]
    Ring,
    #[serde(rename = "chain")]
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum TimeUnitName {
    #[serde(rename = "min")]
    Min,
    #[serde(rename = "s")]
    S,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_omega_min")]
    pub omega_min: f64,
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    #[serde(default = "default_points_per_decade")]
    pub points_per_decade: f64,
}

fn default_omega_min() -> f64 {
    ContourOptions::default().omega_min
}

fn default_omega_max() -> f64 {
    ContourOptions::default().omega_max
}

fn default_points_per_decade() -> f64 {
    ContourOptions::default().points_per_decade
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            omega_min: default_omega_min(),
            omega_max: default_omega_max(),
            points_per_decade: default_points_per_decade(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_grid_cells")]
    pub grid_cells_per_segment: usize,
    pub dt: f64,
    pub t_final: f64,
    /// A bare number perturbs every state of every agent, a vector perturbs
    /// per state, a matrix perturbs per agent per state.
    pub perturbation: Option<PerturbationSpec>,
    /// Agent footprint Δr in µm; omitted means one grid cell of the first
    /// segment.
    pub robot_width: Option<f64>,
    #[serde(default = "default_window_fraction")]
    pub window_fraction: f64,
    #[serde(default = "default_max_samples")]
    pub max_samples: usize,
    #[serde(default = "default_profile_snapshots")]
    pub profile_snapshots: usize,
    #[serde(default)]
    pub channel_init: ChannelInitName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
pub enum ChannelInitName {
    /// Channels start uniform at the equilibrium's transported value.
    #[default]
    #[serde(rename = "equilibrium")]
    Equilibrium,
    /// Channels start empty.
    #[serde(rename = "zero")]
    Zero,
}

fn default_grid_cells() -> usize {
    SimConfig::new(1.0, 1.0).grid_cells_per_segment
}

fn default_window_fraction() -> f64 {
    SimConfig::new(1.0, 1.0).window_fraction
}

fn default_max_samples() -> usize {
    SimConfig::new(1.0, 1.0).max_samples
}

fn default_profile_snapshots() -> usize {
    SimConfig::new(1.0, 1.0).profile_snapshots
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PerturbationSpec {
    Scalar(f64),
    PerState(Vec<f64>),
    PerRobot(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Which scalar in `model.params` the bisection varies.
    pub param_name: String,
    pub lo: f64,
    pub hi: f64,
    pub bisection_tol: f64,
}

impl RunConfig {
    /// Semantic checks beyond the serde schema; construction-time validation
    /// of physical quantities lives with the library constructors.
    pub fn validate(&self) -> Result<(), String> {
        let a = &self.analysis;
        if !(a.omega_min.is_finite() && a.omega_min > 0.0) {
            return Err(format!(
                "analysis.omega_min must be positive and finite, got {}",
                a.omega_min
            ));
        }
        if !(a.omega_max.is_finite() && a.omega_max > a.omega_min) {
            return Err(format!(
                "analysis.omega_max must be finite and exceed omega_min, got {}",
                a.omega_max
            ));
        }
        if !(a.points_per_decade.is_finite() && a.points_per_decade > 0.0) {
            return Err(format!(
                "analysis.points_per_decade must be positive and finite, got {}",
                a.points_per_decade
            ));
        }
        if let Some(x0) = &self.model.x0 {
            if x0.iter().any(|v| !v.is_finite()) {
                return Err("model.x0 entries must all be finite".into());
            }
        }
        if let Some(sweep) = &self.sweep {
            if !self.model.params.contains_key(&sweep.param_name) {
                return Err(format!(
                    "sweep.param_name {:?} is not one of the model parameters",
                    sweep.param_name
                ));
            }
        }
        Ok(())
    }

    pub fn build_topology(&self) -> Result<ChannelTopology, ChannelError> {
        let t = &self.topology;
        ChannelTopology::new(
            t.n,
            t.lengths.clone(),
            t.mu_um2_per_s,
            match t.boundary {
                BoundaryName::Ring => BoundaryKind::Periodic,
                BoundaryName::Chain => BoundaryKind::DirichletZeroEnds,
            },
            match t.time_unit {
                TimeUnitName::Min => TimeUnit::Minutes,
                TimeUnitName::S => TimeUnit::Seconds,
            },
        )
    }

    pub fn build_model(&self) -> Result<Box<dyn ReactionModel>, ReactionError> {
        model_from_config(&self.model.name, &self.model.params)
    }

    /// Flux scale µ_eff/Δr entering the loop gain. Δr is the configured
    /// agent footprint when given, else one grid cell of the first segment —
    /// the same fallback the simulator applies — and when no simulation is
    /// configured at all the footprint is not modelled and the gain is 1.
    pub fn flux_gain(&self, topo: &ChannelTopology) -> f64 {
        match &self.simulation {
            Some(sim) => {
                let dr = sim
                    .robot_width
                    .unwrap_or_else(|| topo.lengths()[0] / sim.grid_cells_per_segment as f64);
                topo.mu_eff() / dr
            }
            None => 1.0,
        }
    }

    /// Frequency-domain options shared by `analyze`, `nyquist`, and `sweep`.
    pub fn verdict_options(&self, topo: &ChannelTopology) -> VerdictOptions {
        VerdictOptions {
            contour: ContourOptions {
                omega_min: self.analysis.omega_min,
                omega_max: self.analysis.omega_max,
                points_per_decade: self.analysis.points_per_decade,
                flux_gain: self.flux_gain(topo),
                ..ContourOptions::default()
            },
            x0: self.model.x0.clone(),
            ..VerdictOptions::default()
        }
    }

    /// Echo of the parsed configuration, defaults applied, for embedding in
    /// reports; renders identically for identical inputs.
    pub fn echo(&self) -> Json {
        let model = Json::obj()
            .field("name", Json::Str(self.model.name.clone()))
            .field(
                "params",
                Json::Obj(
                    self.model
                        .params
                        .iter()
                        .map(|(k, &v)| (k.clone(), Json::Float(v)))
                        .collect(),
                ),
            )
            .field(
                "x0",
                match &self.model.x0 {
                    Some(x0) => Json::floats(x0),
                    None => Json::Null,
                },
            );
        let topology = Json::obj()
            .field("n", Json::Int(self.topology.n as i64))
            .field("lengths", Json::floats(&self.topology.lengths))
            .field("mu_um2_per_s", Json::Float(self.topology.mu_um2_per_s))
            .field(
                "boundary",
                Json::Str(
                    match self.topology.boundary {
                        BoundaryName::Ring => "ring",
                        BoundaryName::Chain => "chain",
                    }
                    .into(),
                ),
            )
            .field(
                "time_unit",
                Json::Str(
                    match self.topology.time_unit {
                        TimeUnitName::Min => "min",
                        TimeUnitName::S => "s",
                    }
                    .into(),
                ),
            );
        let analysis = Json::obj()
            .field("omega_min", Json::Float(self.analysis.omega_min))
            .field("omega_max", Json::Float(self.analysis.omega_max))
            .field(
                "points_per_decade",
                Json::Float(self.analysis.points_per_decade),
            );
        let simulation = match &self.simulation {
            None => Json::Null,
            Some(sim) => Json::obj()
                .field(
                    "grid_cells_per_segment",
                    Json::Int(sim.grid_cells_per_segment as i64),
                )
                .field("dt", Json::Float(sim.dt))
                .field("t_final", Json::Float(sim.t_final))
                .field(
                    "perturbation",
                    match &sim.perturbation {
                        None => Json::Null,
                        Some(PerturbationSpec::Scalar(v)) => Json::Float(*v),
                        Some(PerturbationSpec::PerState(v)) => Json::floats(v),
                        Some(PerturbationSpec::PerRobot(rows)) => {
                            Json::Arr(rows.iter().map(|row| Json::floats(row)).collect())
                        }
                    },
                )
                .field(
                    "robot_width",
                    match sim.robot_width {
                        Some(w) => Json::Float(w),
                        None => Json::Null,
                    },
                )
                .field("window_fraction", Json::Float(sim.window_fraction))
                .field("max_samples", Json::Int(sim.max_samples as i64))
                .field("profile_snapshots", Json::Int(sim.profile_snapshots as i64))
                .field(
                    "channel_init",
                    Json::Str(
                        match sim.channel_init {
                            ChannelInitName::Equilibrium => "equilibrium",
                            ChannelInitName::Zero => "zero",
                        }
                        .into(),
                    ),
                ),
        };
        let sweep = match &self.sweep {
            None => Json::Null,
            Some(s) => Json::obj()
                .field("param_name", Json::Str(s.param_name.clone()))
                .field("lo", Json::Float(s.lo))
                .field("hi", Json::Float(s.hi))
                .field("bisection_tol", Json::Float(s.bisection_tol)),
        };
        Json::obj()
            .field("model", model)
            .field("topology", topology)
            .field("analysis", analysis)
            .field("simulation", simulation)
            .field("sweep", sweep)
    }
}

impl SimulationSection {
    pub fn sim_config(&self) -> SimConfig {
        let mut cfg = SimConfig::new(self.dt, self.t_final);
        cfg.grid_cells_per_segment = self.grid_cells_per_segment;
        cfg.robot_width = self.robot_width;
        cfg.window_fraction = self.window_fraction;
        cfg.max_samples = self.max_samples;
        cfg.profile_snapshots = self.profile_snapshots;
        cfg.channel_init = match self.channel_init {
            ChannelInitName::Equilibrium => ChannelInit::Equilibrium,
            ChannelInitName::Zero => ChannelInit::Zero,
        };
        if let Some(spec) = &self.perturbation {
            cfg.perturbation = match spec {
                PerturbationSpec::Scalar(v) => Perturbation::Scalar(*v),
                PerturbationSpec::PerState(v) => Perturbation::Uniform(v.clone()),
                PerturbationSpec::PerRobot(rows) => Perturbation::PerRobot(rows.clone()),
            };
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{
            "model": {"name": "linear_decay", "params": {"delta": 1.0}},
            "topology": {"n": 3, "lengths": [50.0, 50.0, 50.0],
                         "mu_um2_per_s": 83.0, "boundary": "ring",
                         "time_unit": "min"}
        }"#
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config: RunConfig = serde_json::from_str(minimal()).unwrap();
        config.validate().unwrap();
        assert_eq!(
            config.analysis.omega_min,
            ContourOptions::default().omega_min
        );
        assert!(config.simulation.is_none());
        let topo = config.build_topology().unwrap();
        // No simulation section: the agent footprint is not modelled.
        assert_eq!(config.flux_gain(&topo), 1.0);
        config.build_model().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        let with_typo = minimal().replace("\"n\": 3", "\"n\": 3, \"diameter\": 2");
        let err = serde_json::from_str::<RunConfig>(&with_typo).unwrap_err();
        assert!(err.to_string().contains("diameter"), "{err}");

        let top_level = minimal().replace("\"model\"", "\"simulate_fast\": true, \"model\"");
        assert!(serde_json::from_str::<RunConfig>(&top_level).is_err());
    }

    #[test]
    fn perturbation_forms_map_to_the_three_shapes() {
        let body = r#"{
            "model": {"name": "linear_decay", "params": {"delta": 1.0}},
            "topology": {"n": 2, "lengths": [40.0, 40.0],
                         "mu_um2_per_s": 200.0, "boundary": "ring",
                         "time_unit": "s"},
            "simulation": {"dt": 0.01, "t_final": 1.0, "perturbation": PERT}
        }"#;
        let parse = |pert: &str| -> SimConfig {
            let config: RunConfig = serde_json::from_str(&body.replace("PERT", pert)).unwrap();
            config.simulation.unwrap().sim_config()
        };
        assert_eq!(parse("0.25").perturbation, Perturbation::Scalar(0.25));
        assert_eq!(
            parse("[0.1, 0.2]").perturbation,
            Perturbation::Uniform(vec![0.1, 0.2])
        );
        assert_eq!(
            parse("[[1.0], [3.0]]").perturbation,
            Perturbation::PerRobot(vec![vec![1.0], vec![3.0]])
        );
    }

    #[test]
    fn flux_gain_follows_the_footprint_rule() {
        let body = r#"{
            "model": {"name": "linear_decay", "params": {"delta": 1.0}},
            "topology": {"n": 4, "lengths": [50.0, 50.0, 50.0, 50.0],
                         "mu_um2_per_s": 83.0, "boundary": "ring",
                         "time_unit": "min"},
            "simulation": {"dt": 0.01, "t_final": 1.0, "grid_cells_per_segment": 8
                           WIDTH}
        }"#;
        let gain = |width: &str| -> f64 {
            let config: RunConfig = serde_json::from_str(&body.replace("WIDTH", width)).unwrap();
            let topo = config.build_topology().unwrap();
            config.flux_gain(&topo)
        };
        // µ_eff = 83·60 µm²/min over the explicit footprint.
        assert_eq!(gain(", \"robot_width\": 99600.0"), 83.0 * 60.0 / 99600.0);
        // Fallback footprint: one grid cell, 50/8 µm.
        assert_eq!(gain(""), 83.0 * 60.0 / (50.0 / 8.0));
    }

    #[test]
    fn sweep_param_must_name_a_model_parameter() {
        let body = minimal().trim_end().trim_end_matches('}');
        let with_sweep = format!(
            "{body}, \"sweep\": {{\"param_name\": \"gamma\", \"lo\": 0.5, \"hi\": 2.0, \"bisection_tol\": 1e-3}}}}"
        );
        let config: RunConfig = serde_json::from_str(&with_sweep).unwrap();
        let err = config.validate().unwrap_err();
        assert!(err.contains("gamma"), "{err}");
    }
}
