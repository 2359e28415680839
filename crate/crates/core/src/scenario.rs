//! Problem instances: physical constants, per-device tasks, schedules and
//! slot durations, plus the deterministic generator and JSON config I/O.
//!
//! All quantities are SI base units (bits, cycles, Hz, s, W, J).
//!
//! Slot indexing follows the TDMA frame: slot 0 is harvest-only, slots
//! `1..=K` each carry one offloading device, and slots `2..=K+1` are the
//! server's compute slots. "Order" `n` means the device transmitting in slot
//! `n`. Device indices are 0-based.
//!
//! Randomness: every instance draws from its own ChaCha20 stream
//! (`rand_chacha::ChaCha20Rng`) seeded with [`stream_seed`]`(root, index)`,
//! a SplitMix64 finalizer applied to `root ^ index`. Draw order per device
//! is task size, intensity, distance, then two standard normals (ziggurat
//! sampler from `rand_distr`) for the Rician channel.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light used by the path-loss model (m/s).
pub const LIGHT_SPEED: f64 = 3.0e8;

/// Order of the monomial offloading power model, `p = λ r^3 / h`.
pub const MONOMIAL_ORDER: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub antenna_gain: f64,
    pub carrier_freq: f64,
    pub path_loss_exp: f64,
    pub light_speed: f64,
    pub rician_factor: f64,
    /// Server (power beacon) transmit power `P0`, W.
    pub server_tx_power: f64,
    /// Harvesting efficiency `η`.
    pub harvest_eff: f64,
    /// Server energy coefficient `κ` in `κ f^3 Δt`.
    pub server_energy_coef: f64,
    /// Transmission energy coefficient `λ`.
    pub tx_energy_coef: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("antenna_gain", self.antenna_gain),
            ("carrier_Hz", self.carrier_freq),
            ("light_speed", self.light_speed),
            ("P0_W", self.server_tx_power),
            ("eta", self.harvest_eff),
            ("kappa", self.server_energy_coef),
            ("lambda", self.tx_energy_coef),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.path_loss_exp.is_finite() && self.path_loss_exp >= 0.0) {
            return Err(Error::config("path_loss_exp", "must be non-negative"));
        }
        if !(self.rician_factor.is_finite() && self.rician_factor >= 0.0) {
            return Err(Error::config("rician_gamma", "must be non-negative"));
        }
        if self.harvest_eff > 1.0 {
            return Err(Error::config("eta", "must not exceed 1"));
        }
        Ok(())
    }

    /// `η P0`, the harvested power per unit channel gain.
    pub fn harvest_power(&self) -> f64 {
        self.harvest_eff * self.server_tx_power
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            antenna_gain: 3.0,
            carrier_freq: 915e6,
            path_loss_exp: 3.0,
            light_speed: LIGHT_SPEED,
            rician_factor: 0.3,
            server_tx_power: 3.0,
            harvest_eff: 0.51,
            server_energy_coef: 1e-26,
            tx_energy_coef: 1e-25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceTask {
    pub data_bits: f64,
    /// CPU cycles per bit.
    pub intensity: f64,
    pub distance: f64,
    pub channel_gain: f64,
    /// `data_bits * intensity`.
    pub cycles: f64,
}

impl DeviceTask {
    pub fn new(data_bits: f64, intensity: f64, distance: f64, channel_gain: f64) -> Result<Self> {
        for (name, v) in [
            ("data_bits", data_bits),
            ("intensity", intensity),
            ("distance", distance),
            ("channel_gain", channel_gain),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            data_bits,
            intensity,
            distance,
            channel_gain,
            cycles: data_bits * intensity,
        })
    }

    /// Transmission requirement `λ A^3 / h`: energy-time product needed to
    /// offload the whole task (transmit energy is this over `Δt^2`).
    pub fn tx_requirement(&self, params: &PhysicalParams) -> f64 {
        params.tx_energy_coef * self.data_bits.powi(3) / self.channel_gain
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub deadline: f64,
    pub f_max: f64,
    pub params: PhysicalParams,
    pub tasks: Vec<DeviceTask>,
    pub seed: u64,
}

impl Scenario {
    pub fn new(deadline: f64, f_max: f64, params: PhysicalParams, tasks: Vec<DeviceTask>) -> Result<Self> {
        let s = Self {
            deadline,
            f_max,
            params,
            tasks,
            seed: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::config("K", "at least one device is required"));
        }
        if !(self.deadline.is_finite() && self.deadline > 0.0) {
            return Err(Error::config("T_s", "must be positive"));
        }
        if !(self.f_max.is_finite() && self.f_max > 0.0) {
            return Err(Error::config("F_max_Hz", "must be positive"));
        }
        self.params.validate()
    }

    pub fn num_devices(&self) -> usize {
        self.tasks.len()
    }

    /// Cycles per offloading order under `schedule`.
    pub fn ordered_cycles(&self, schedule: &Schedule) -> Vec<f64> {
        schedule.order().iter().map(|&k| self.tasks[k].cycles).collect()
    }

    pub fn with_f_max(&self, f_max: f64) -> Self {
        Self { f_max, ..self.clone() }
    }

    pub fn with_deadline(&self, deadline: f64) -> Self {
        Self { deadline, ..self.clone() }
    }
}

/// Offloading order: `order()[n-1]` is the device transmitting in slot `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Schedule(Vec<usize>);

impl Schedule {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let k = order.len();
        if k == 0 {
            return Err(Error::Domain("empty schedule".into()));
        }
        let mut seen = vec![false; k];
        for &d in &order {
            if d >= k || seen[d] {
                return Err(Error::Domain(format!("schedule {order:?} is not a permutation")));
            }
            seen[d] = true;
        }
        Ok(Self(order))
    }

    pub fn identity(k: usize) -> Self {
        Self((0..k).collect())
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Device offloading in slot `n` (1-based).
    pub fn device_at(&self, n: usize) -> usize {
        self.0[n - 1]
    }

    /// Slot (1-based) in which `device` offloads.
    pub fn slot_of(&self, device: usize) -> usize {
        self.0.iter().position(|&d| d == device).expect("device in schedule") + 1
    }

    /// Binary assignment matrix `a[k][n-1]`.
    pub fn assignment(&self) -> Vec<Vec<u8>> {
        let k = self.len();
        let mut a = vec![vec![0u8; k]; k];
        for (pos, &d) in self.0.iter().enumerate() {
            a[d][pos] = 1;
        }
        a
    }

    /// Uniformly random permutation of `k` devices.
    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(rng);
        Self(order)
    }
}

impl TryFrom<Vec<usize>> for Schedule {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Schedule::new(v)
    }
}

impl From<Schedule> for Vec<usize> {
    fn from(s: Schedule) -> Self {
        s.0
    }
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

/// Slot durations `Δt_0 ..= Δt_{K+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAllocation {
    pub dt: Vec<f64>,
}

impl TimeAllocation {
    pub fn new(dt: Vec<f64>) -> Result<Self> {
        if dt.len() < 3 {
            return Err(Error::Domain("need at least K+2 = 3 slots".into()));
        }
        if dt.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("slot durations must be finite and non-negative".into()));
        }
        Ok(Self { dt })
    }

    pub fn num_devices(&self) -> usize {
        self.dt.len() - 2
    }

    pub fn total(&self) -> f64 {
        self.dt.iter().sum()
    }

    /// Sum of `Δt_i` for `i` in `0..n`.
    pub fn prefix(&self, n: usize) -> f64 {
        self.dt[..n].iter().sum()
    }
}

impl std::ops::Index<usize> for TimeAllocation {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.dt[i]
    }
}

/// Mean channel gain `A (c / (4π f_c d))^ℓ`.
pub fn path_loss(d: f64, params: &PhysicalParams) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    let ratio = params.light_speed / (4.0 * PI * params.carrier_freq * d);
    Ok(params.antenna_gain * ratio.powf(params.path_loss_exp))
}

/// One Rician draw with unit-mean-power K-factor normalization:
/// `h = mean_gain * |ν|^2`, `ν = sqrt(γ/(1+γ)) + sqrt(1/(2(1+γ))) (z1 + i z2)`.
pub fn sample_channel<R: Rng + ?Sized>(mean_gain: f64, gamma: f64, rng: &mut R) -> f64 {
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    if gamma.is_infinite() {
        return mean_gain;
    }
    let los = (gamma / (1.0 + gamma)).sqrt();
    let sigma = (1.0 / (2.0 * (1.0 + gamma))).sqrt();
    let re = los + sigma * z1;
    let im = sigma * z2;
    mean_gain * (re * re + im * im)
}

/// Energy harvested by the device offloading in slot `n` (1-based):
/// `Σ_{i<n} Δt_i h η P0`.
pub fn harvested_energy(
    schedule: &Schedule,
    dt: &TimeAllocation,
    n: usize,
    h: f64,
    params: &PhysicalParams,
) -> Result<f64> {
    let k = schedule.len();
    if n == 0 || n > k || dt.dt.len() != k + 2 {
        return Err(Error::Domain(format!("slot {n} out of range 1..={k}")));
    }
    Ok(dt.prefix(n) * h * params.harvest_power())
}

/// Monomial offloading power `λ A^3 / (h Δt^3)`.
pub fn offload_power(a_bits: f64, h: f64, dt_n: f64, lambda: f64) -> Result<f64> {
    if !(dt_n > 0.0) {
        return Err(Error::infeasible("transmission slot has zero duration"));
    }
    if !(h > 0.0) {
        return Err(Error::Domain("channel gain must be positive".into()));
    }
    Ok(lambda * a_bits.powi(3) / (h * dt_n.powi(3)))
}

/// SplitMix64 finalizer of `root ^ index`; seeds per-instance streams.
pub fn stream_seed(root: u64, index: u64) -> u64 {
    let mut z = (root ^ index).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn instance_rng(root: u64, index: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(stream_seed(root, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Bracket accuracy of the α bisection, relative to its upper bound.
    pub eps0: f64,
    /// Relative objective accuracy of the frequency allocator.
    pub eps1: f64,
    /// Relative GBD gap.
    pub eps_gbd: f64,
    pub max_iter_gbd: usize,
    /// Relative energy change that stops the block-coordinate primal loop.
    pub bcd_tol: f64,
    pub max_iter_bcd: usize,
    /// Largest K for which exhaustive enumeration is attempted.
    pub exhaustive_cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps0: 1e-12,
            eps1: 1e-10,
            eps_gbd: 1e-4,
            max_iter_gbd: 200,
            bcd_tol: 1e-6,
            max_iter_bcd: 50,
            exhaustive_cap: 8,
        }
    }
}

/// JSON scenario description. Only `K` is required; every other key
/// defaults to the reference setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "T_s", default = "defaults::deadline")]
    pub deadline: f64,
    #[serde(rename = "F_max_Hz", default = "defaults::f_max")]
    pub f_max: f64,
    #[serde(rename = "P0_W", default = "defaults::p0")]
    pub p0: f64,
    #[serde(default = "defaults::eta")]
    pub eta: f64,
    #[serde(default = "defaults::kappa")]
    pub kappa: f64,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(default = "defaults::a_range")]
    pub a_bits_range: [f64; 2],
    #[serde(default = "defaults::i_range")]
    pub i_cpb_range: [f64; 2],
    #[serde(default = "defaults::distance_range")]
    pub distance_m_range: [f64; 2],
    #[serde(default = "defaults::gamma")]
    pub rician_gamma: f64,
    #[serde(default = "defaults::antenna_gain")]
    pub antenna_gain: f64,
    #[serde(rename = "carrier_Hz", default = "defaults::carrier")]
    pub carrier_hz: f64,
    #[serde(default = "defaults::path_loss_exp")]
    pub path_loss_exp: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

mod defaults {
    pub fn deadline() -> f64 {
        1.0
    }
    pub fn f_max() -> f64 {
        1e9
    }
    pub fn p0() -> f64 {
        3.0
    }
    pub fn eta() -> f64 {
        0.51
    }
    pub fn kappa() -> f64 {
        1e-26
    }
    pub fn lambda() -> f64 {
        1e-25
    }
    pub fn a_range() -> [f64; 2] {
        [10e3, 50e3]
    }
    pub fn i_range() -> [f64; 2] {
        [500.0, 1500.0]
    }
    pub fn distance_range() -> [f64; 2] {
        super::DEFAULT_DISTANCE_RANGE
    }
    pub fn gamma() -> f64 {
        0.3
    }
    pub fn antenna_gain() -> f64 {
        3.0
    }
    pub fn carrier() -> f64 {
        915e6
    }
    pub fn path_loss_exp() -> f64 {
        3.0
    }
}

/// Default device placement range (m).
pub const DEFAULT_DISTANCE_RANGE: [f64; 2] = [0.3, 0.6];

impl ScenarioConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            deadline: defaults::deadline(),
            f_max: defaults::f_max(),
            p0: defaults::p0(),
            eta: defaults::eta(),
            kappa: defaults::kappa(),
            lambda: defaults::lambda(),
            a_bits_range: defaults::a_range(),
            i_cpb_range: defaults::i_range(),
            distance_m_range: defaults::distance_range(),
            rician_gamma: defaults::gamma(),
            antenna_gain: defaults::antenna_gain(),
            carrier_hz: defaults::carrier(),
            path_loss_exp: defaults::path_loss_exp(),
            seed: 0,
            tolerances: Tolerances::default(),
        }
    }

    pub fn params(&self) -> PhysicalParams {
        PhysicalParams {
            antenna_gain: self.antenna_gain,
            carrier_freq: self.carrier_hz,
            path_loss_exp: self.path_loss_exp,
            light_speed: LIGHT_SPEED,
            rician_factor: self.rician_gamma,
            server_tx_power: self.p0,
            harvest_eff: self.eta,
            server_energy_coef: self.kappa,
            tx_energy_coef: self.lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("K", "must be at least 1"));
        }
        if !(self.deadline.is_finite() && self.deadline > 0.0) {
            return Err(Error::config("T_s", format!("must be positive, got {}", self.deadline)));
        }
        if !(self.f_max.is_finite() && self.f_max > 0.0) {
            return Err(Error::config("F_max_Hz", format!("must be positive, got {}", self.f_max)));
        }
        for (name, [lo, hi]) in [
            ("A_bits_range", self.a_bits_range),
            ("I_cpb_range", self.i_cpb_range),
            ("distance_m_range", self.distance_m_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(Error::config(
                    name,
                    format!("need 0 < lo <= hi, got [{lo}, {hi}]"),
                ));
            }
        }
        self.params().validate()
    }
}

/// Deterministic instance for `(config, seed)`.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let params = config.params();
    let mut rng = instance_rng(seed, 0);
    let uniform = |rng: &mut ChaCha20Rng, [lo, hi]: [f64; 2]| {
        let u: f64 = rng.random();
        lo + (hi - lo) * u
    };
    let mut tasks = Vec::with_capacity(config.k);
    for _ in 0..config.k {
        let a = uniform(&mut rng, config.a_bits_range);
        let i = uniform(&mut rng, config.i_cpb_range);
        let d = uniform(&mut rng, config.distance_m_range);
        let mean = path_loss(d, &params)?;
        let h = sample_channel(mean, params.rician_factor, &mut rng);
        tasks.push(DeviceTask::new(a, i, d, h)?);
    }
    Ok(Scenario {
        deadline: config.deadline,
        f_max: config.f_max,
        params,
        tasks,
        seed,
    })
}

fn map_json_error(e: serde_json::Error) -> Error {
    let msg = e.to_string();
    for marker in ["missing field `", "unknown field `"] {
        if let Some(start) = msg.find(marker) {
            let rest = &msg[start + marker.len()..];
            if let Some(end) = rest.find('`') {
                let reason = if marker.starts_with("missing") {
                    "required key is missing"
                } else {
                    "unknown key"
                };
                return Error::config(&rest[..end], format!("{reason} (line {})", e.line()));
            }
        }
    }
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: msg,
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(map_json_error)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_config(&text)
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    serde_json::from_str(&text).map_err(map_json_error)
}

/// Writes any serializable report (or a config) as pretty JSON.
pub fn save_report<T: Serialize>(path: impl AsRef<Path>, report: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path.as_ref(), text + "\n")
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))
}
