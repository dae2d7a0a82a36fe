//! Ground truth, limited field-of-view sensors and scenario files.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix2, Matrix4, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::topology::Topology;
use crate::track::{GlobalLabel, NodeId, Scan, StateVector, Track, TrackSet};
use crate::tracker::TrackerParams;

/// Stream used for ground truth; node `n` measures on stream `n`.
pub const TRUTH_STREAM: u64 = 0;

/// Portable generator for one independent stream of a run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Nearly constant velocity motion in 2-D. State order is `[px, vx, py, vy]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    /// Sampling interval in seconds.
    pub dt: f64,
    /// Acceleration noise standard deviation.
    pub sigma_cv: f64,
    pub survival_probability: f64,
}

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            dt: 1.0,
            sigma_cv: 5.0,
            survival_probability: 0.98,
        }
    }
}

impl MotionModel {
    pub fn transition(&self) -> Matrix4<f64> {
        let t = self.dt;
        Matrix4::new(
            1.0, t, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, t, //
            0.0, 0.0, 0.0, 1.0,
        )
    }

    pub fn process_noise(&self) -> Matrix4<f64> {
        let t = self.dt;
        let q = self.sigma_cv * self.sigma_cv;
        let (a, b, c) = (q * t.powi(3) / 3.0, q * t * t / 2.0, q * t);
        Matrix4::new(
            a, b, 0.0, 0.0, //
            b, c, 0.0, 0.0, //
            0.0, 0.0, a, b, //
            0.0, 0.0, b, c,
        )
    }
}

/// Range-bearing wedge sensor reporting noisy positions plus clutter.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub node: NodeId,
    pub position: Vector2<f64>,
    /// Heading of the wedge axis, radians counter-clockwise from +x.
    pub boresight: f64,
    /// Half opening angle, radians.
    pub half_angle: f64,
    pub range: f64,
    pub detection_probability: f64,
    /// Standard deviation of the position noise on each axis.
    pub noise_std: f64,
    /// Mean number of clutter points per scan.
    pub clutter_rate: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

impl SensorModel {
    pub fn measurement_covariance(&self) -> Matrix2<f64> {
        Matrix2::identity() * (self.noise_std * self.noise_std)
    }

    /// Whether a point is within range and within the angular wedge.
    pub fn in_fov(&self, p: &Vector2<f64>) -> bool {
        let d = p - self.position;
        let r = d.norm();
        if r == 0.0 {
            return true;
        }
        if r > self.range * (1.0 + 1e-12) {
            return false;
        }
        if self.half_angle >= PI {
            return true;
        }
        let rel = wrap_angle(d.y.atan2(d.x) - self.boresight);
        rel.abs() <= self.half_angle + 1e-12
    }

    /// Uniform point in the wedge.
    pub fn sample_clutter<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector2<f64> {
        let r = self.range * rng.random::<f64>().sqrt();
        let half = self.half_angle.min(PI);
        let theta = self.boresight + half * (2.0 * rng.random::<f64>() - 1.0);
        self.position + Vector2::new(r * theta.cos(), r * theta.sin())
    }
}

/// Measurements of one sensor at one scan: a noisy detection for each
/// in-view object with probability `P_D`, then Poisson clutter.
pub fn generate_measurements<R: Rng + ?Sized>(
    truth: &[StateVector],
    sensor: &SensorModel,
    rng: &mut R,
) -> Vec<Vector2<f64>> {
    let mut z = Vec::new();
    for x in truth {
        let p = Vector2::new(x[0], x[2]);
        if !sensor.in_fov(&p) {
            continue;
        }
        if rng.random::<f64>() < sensor.detection_probability {
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            z.push(p + Vector2::new(nx, ny) * sensor.noise_std);
        }
    }
    if sensor.clutter_rate > 0.0 {
        let n = Poisson::new(sensor.clutter_rate)
            .expect("positive clutter rate")
            .sample(rng) as usize;
        z.extend((0..n).map(|_| sensor.sample_clutter(rng)));
    }
    z
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectConfig {
    pub birth: Scan,
    /// Last scan at which the object exists.
    pub death: Scan,
    pub initial: StateVector,
}

/// Fusion settings carried by a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSettings {
    pub window_length: u32,
    pub min_track_len: usize,
    pub cutoff: f64,
    pub order: u32,
    /// Scan scaling of the time-embedded Wasserstein distance.
    pub alpha: f64,
    pub min_match_count: u32,
}

impl Default for FusionSettings {
    fn default() -> Self {
        Self {
            window_length: 5,
            min_track_len: 2,
            cutoff: 100.0,
            order: 1,
            alpha: 20.0,
            min_match_count: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub duration: Scan,
    pub seed: u64,
    /// Node whose consensus is scored.
    pub eval_node: NodeId,
    pub motion: MotionModel,
    /// Whether truth is propagated with process noise.
    pub noisy_truth: bool,
    pub sensors: Vec<SensorModel>,
    pub topology: Topology,
    pub objects: Vec<ObjectConfig>,
    pub fusion: FusionSettings,
    pub tracker: TrackerParams,
}

impl Scenario {
    pub fn sensor(&self, node: NodeId) -> Option<&SensorModel> {
        self.sensors.iter().find(|s| s.node == node)
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        self.sensors.iter().map(|s| s.node).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.duration == 0 {
            return bad("duration must be at least one scan".into());
        }
        if !(self.motion.dt > 0.0 && self.motion.sigma_cv >= 0.0) {
            return bad("motion needs dt > 0 and sigma_cv >= 0".into());
        }
        let ps = self.motion.survival_probability;
        if !(ps > 0.0 && ps <= 1.0) {
            return bad(format!("survival probability {ps} is outside (0, 1]"));
        }
        if self.sensors.is_empty() {
            return bad("at least one sensor is required".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.sensors {
            if s.node == 0 {
                return bad("node id 0 is reserved for ground truth".into());
            }
            if !seen.insert(s.node) {
                return bad(format!("node {} is listed twice", s.node));
            }
            if !(s.detection_probability > 0.0 && s.detection_probability <= 1.0) {
                return bad(format!("node {}: detection probability outside (0, 1]", s.node));
            }
            if !(s.range > 0.0 && s.half_angle > 0.0) {
                return bad(format!("node {}: range and half angle must be positive", s.node));
            }
            if !(s.noise_std > 0.0 && s.clutter_rate >= 0.0) {
                return bad(format!(
                    "node {}: noise must be positive and clutter non-negative",
                    s.node
                ));
            }
        }
        if !seen.contains(&self.eval_node) {
            return bad(format!("evaluation node {} has no sensor", self.eval_node));
        }
        for n in self.topology.nodes() {
            if !seen.contains(&n) {
                return bad(format!("topology mentions unknown node {n}"));
            }
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.birth < 1 || o.birth > o.death || o.death > self.duration {
                return bad(format!(
                    "object {}: birth {} and death {} must satisfy 1 <= birth <= death <= {}",
                    i + 1,
                    o.birth,
                    o.death,
                    self.duration
                ));
            }
        }
        let f = &self.fusion;
        if f.window_length < 1 || f.min_track_len < 1 || f.order < 1 || f.min_match_count < 1 {
            return bad("fusion window, track length, order and match count must be at least 1".into());
        }
        if !(f.cutoff > 0.0 && f.alpha >= 0.0) {
            return bad("fusion cut-off must be positive and alpha non-negative".into());
        }
        self.tracker.validate()
    }

    /// The first `count` sensors in file order with the topology induced on
    /// them. The evaluation node is kept if present, otherwise it becomes the
    /// first remaining node.
    pub fn with_first_nodes(&self, count: usize) -> Scenario {
        let sensors: Vec<SensorModel> = self.sensors.iter().take(count).cloned().collect();
        let keep = sensors.iter().map(|s| s.node).collect();
        let eval_node = if sensors.iter().any(|s| s.node == self.eval_node) {
            self.eval_node
        } else {
            sensors.first().map_or(self.eval_node, |s| s.node)
        };
        Scenario {
            topology: self.topology.induced(&keep),
            sensors,
            eval_node,
            ..self.clone()
        }
    }

    pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Scenario, ConfigError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<inline>".into(),
            message: e.to_string(),
        })?;
        let scenario = file.into_scenario();
        scenario.validate()?;
        Ok(scenario)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    duration: Scan,
    #[serde(default)]
    seed: u64,
    eval_node: NodeId,
    #[serde(default)]
    motion: MotionSection,
    #[serde(default)]
    fusion: FusionSettings,
    #[serde(default)]
    tracker: TrackerParams,
    #[serde(default)]
    topology: TopologySection,
    sensors: Vec<SensorSection>,
    #[serde(default)]
    objects: Vec<ObjectSection>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MotionSection {
    dt: f64,
    sigma_cv: f64,
    survival_probability: f64,
    noisy_truth: bool,
}

impl Default for MotionSection {
    fn default() -> Self {
        let m = MotionModel::default();
        Self {
            dt: m.dt,
            sigma_cv: m.sigma_cv,
            survival_probability: m.survival_probability,
            noisy_truth: false,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum TopologySection {
    #[default]
    Full,
    Edges {
        edges: Vec<[NodeId; 2]>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SensorSection {
    node: NodeId,
    position: [f64; 2],
    boresight_deg: f64,
    half_angle_deg: f64,
    range: f64,
    #[serde(default = "default_pd")]
    detection_probability: f64,
    #[serde(default = "default_noise")]
    noise_std: f64,
    #[serde(default = "default_clutter")]
    clutter_rate: f64,
}

fn default_pd() -> f64 {
    0.98
}

fn default_noise() -> f64 {
    10.0
}

fn default_clutter() -> f64 {
    10.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectSection {
    birth: Scan,
    death: Scan,
    /// `[px, vx, py, vy]` at the birth scan.
    state: [f64; 4],
}

impl ScenarioFile {
    fn into_scenario(self) -> Scenario {
        let sensors: Vec<SensorModel> = self
            .sensors
            .into_iter()
            .map(|s| SensorModel {
                node: s.node,
                position: Vector2::new(s.position[0], s.position[1]),
                boresight: s.boresight_deg.to_radians(),
                half_angle: s.half_angle_deg.to_radians(),
                range: s.range,
                detection_probability: s.detection_probability,
                noise_std: s.noise_std,
                clutter_rate: s.clutter_rate,
            })
            .collect();
        let nodes: Vec<NodeId> = sensors.iter().map(|s| s.node).collect();
        let topology = match self.topology {
            TopologySection::Full => Topology::full(nodes),
            TopologySection::Edges { edges } => Topology::from_edges(nodes, edges.into_iter().map(|[a, b]| (a, b))),
        };
        Scenario {
            name: self.name,
            duration: self.duration,
            seed: self.seed,
            eval_node: self.eval_node,
            motion: MotionModel {
                dt: self.motion.dt,
                sigma_cv: self.motion.sigma_cv,
                survival_probability: self.motion.survival_probability,
            },
            noisy_truth: self.motion.noisy_truth,
            sensors,
            topology,
            objects: self
                .objects
                .into_iter()
                .map(|o| ObjectConfig {
                    birth: o.birth,
                    death: o.death,
                    initial: StateVector::from(o.state),
                })
                .collect(),
            fusion: self.fusion,
            tracker: self.tracker,
        }
    }
}

/// Ground-truth trajectories labelled `(birth scan, index among objects born
/// that scan, node 0)`.
pub fn generate_truth<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> TrackSet {
    let f = scenario.motion.transition();
    let noise = if scenario.noisy_truth {
        scenario.motion.process_noise().cholesky().map(|c| c.l())
    } else {
        None
    };
    let mut born_at: std::collections::BTreeMap<Scan, u32> = Default::default();
    let mut truth = TrackSet::new();
    for o in &scenario.objects {
        let index = born_at.entry(o.birth).or_insert(0);
        *index += 1;
        let label = GlobalLabel::new(o.birth, *index, 0);
        let mut x = o.initial;
        let mut samples = Vec::with_capacity((o.death - o.birth + 1) as usize);
        for k in o.birth..=o.death {
            if k > o.birth {
                x = f * x;
                if let Some(l) = &noise {
                    let w = StateVector::from_fn(|_, _| rng.sample(StandardNormal));
                    x += l * w;
                }
            }
            samples.push((k, x));
        }
        truth
            .insert(Track::from_samples(label, samples))
            .expect("labels are unique by construction");
    }
    truth
}
