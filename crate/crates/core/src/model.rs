//! Scenario configuration and the deterministic geometry/channel primitives
//! shared by the analytic and Monte Carlo paths.
//!
//! Distances are horizontal distances on the user's plane, in meters, unless
//! stated otherwise. Powers and gains are linear unless the name ends in `_db`.
//! Transmit power in dB is relative to an arbitrary reference: SIR does not
//! depend on it.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("zero 3D distance between base station and user (path loss is singular)")]
    ZeroDistance,
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserKind {
    Aerial,
    Ground,
}

impl UserKind {
    pub const ALL: [UserKind; 2] = [UserKind::Aerial, UserKind::Ground];

    pub fn as_str(self) -> &'static str {
        match self {
            UserKind::Aerial => "aerial",
            UserKind::Ground => "ground",
        }
    }
}

impl fmt::Display for UserKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for UserKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aerial" | "a" => Ok(UserKind::Aerial),
            "ground" | "g" => Ok(UserKind::Ground),
            other => Err(format!("unknown user kind `{other}` (expected aerial|ground)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TiltKind {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LobeKind {
    Main,
    Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LinkKind {
    LoS,
    NLoS,
}

impl TiltKind {
    fn idx(self) -> usize {
        self as usize
    }
}

impl LobeKind {
    fn idx(self) -> usize {
        self as usize
    }
}

impl LinkKind {
    fn idx(self) -> usize {
        self as usize
    }
}

/// Composite base-station label: tilt direction, lobe seen by the user, and
/// link condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BsType {
    pub tilt: TiltKind,
    pub lobe: LobeKind,
    pub link: LinkKind,
}

impl BsType {
    pub const fn new(tilt: TiltKind, lobe: LobeKind, link: LinkKind) -> Self {
        Self { tilt, lobe, link }
    }

    pub const UML: BsType = BsType::new(TiltKind::Up, LobeKind::Main, LinkKind::LoS);
    pub const UMN: BsType = BsType::new(TiltKind::Up, LobeKind::Main, LinkKind::NLoS);
    pub const USL: BsType = BsType::new(TiltKind::Up, LobeKind::Side, LinkKind::LoS);
    pub const USN: BsType = BsType::new(TiltKind::Up, LobeKind::Side, LinkKind::NLoS);
    pub const DML: BsType = BsType::new(TiltKind::Down, LobeKind::Main, LinkKind::LoS);
    pub const DMN: BsType = BsType::new(TiltKind::Down, LobeKind::Main, LinkKind::NLoS);
    pub const DSL: BsType = BsType::new(TiltKind::Down, LobeKind::Side, LinkKind::LoS);
    pub const DSN: BsType = BsType::new(TiltKind::Down, LobeKind::Side, LinkKind::NLoS);

    /// All eight types in the canonical order, which is also the tie-break
    /// order of the association rule.
    pub const ALL: [BsType; 8] = [
        BsType::UML,
        BsType::UMN,
        BsType::USL,
        BsType::USN,
        BsType::DML,
        BsType::DMN,
        BsType::DSL,
        BsType::DSN,
    ];

    /// Position in [`BsType::ALL`].
    pub fn index(self) -> usize {
        self.tilt.idx() * 4 + self.lobe.idx() * 2 + self.link.idx()
    }

    pub fn label(self) -> &'static str {
        ["UML", "UMN", "USL", "USN", "DML", "DMN", "DSL", "DSN"][self.index()]
    }

    /// The six types that can serve or interfere with a user of this kind when
    /// both tilt angles exceed half their beamwidth: ground users never see an
    /// up-tilted mainlobe and aerial users never see a down-tilted one.
    pub fn admissible(user: UserKind) -> [BsType; 6] {
        match user {
            UserKind::Aerial => [
                BsType::UML,
                BsType::UMN,
                BsType::USL,
                BsType::USN,
                BsType::DSL,
                BsType::DSN,
            ],
            UserKind::Ground => [
                BsType::DML,
                BsType::DMN,
                BsType::DSL,
                BsType::DSN,
                BsType::USL,
                BsType::USN,
            ],
        }
    }

    pub fn is_admissible(self, user: UserKind) -> bool {
        Self::admissible(user).contains(&self)
    }
}

impl fmt::Display for BsType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for BsType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BsType::ALL
            .into_iter()
            .find(|t| t.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown base-station type `{s}`"))
    }
}

/// Blockage statistics of the propagation environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentParams {
    /// Ratio of built-up land area to total land area.
    pub alpha: f64,
    /// Mean number of buildings per km².
    pub beta: f64,
    /// Rayleigh scale of building heights, meters.
    pub gamma: f64,
}

impl EnvironmentParams {
    pub const SUBURBAN: EnvironmentParams = EnvironmentParams::new(0.1, 750.0, 8.0);
    pub const URBAN: EnvironmentParams = EnvironmentParams::new(0.3, 500.0, 15.0);
    pub const DENSE_URBAN: EnvironmentParams = EnvironmentParams::new(0.5, 300.0, 20.0);
    pub const HIGHRISE_URBAN: EnvironmentParams = EnvironmentParams::new(0.5, 300.0, 50.0);

    pub const fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    /// An environment so sparse that every link inside any realistic radius is
    /// line-of-sight.
    pub const fn unobstructed() -> Self {
        Self::new(1e-12, 1e-12, 1.0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("env_alpha", format!("{} not in (0, 1]", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid("env_beta", format!("{} must be positive", self.beta)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(invalid("env_gamma", format!("{} must be positive", self.gamma)));
        }
        Ok(())
    }

    /// Horizontal distance covered by one blockage step, meters.
    pub fn step_length(&self) -> f64 {
        1000.0 / (self.alpha * self.beta).sqrt()
    }
}

/// Vertical antenna pattern. Angles are in degrees at this interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaParams {
    pub theta_up: f64,
    pub theta_down: f64,
    pub phi_up: f64,
    pub phi_down: f64,
    pub g_main_db: f64,
    pub g_side_db: f64,
}

impl AntennaParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (field, v) in [
            ("theta_up", self.theta_up),
            ("theta_down", self.theta_down),
            ("phi_up", self.phi_up),
            ("phi_down", self.phi_down),
            ("g_main_db", self.g_main_db),
            ("g_side_db", self.g_side_db),
        ] {
            if !v.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if self.phi_up <= 0.0 {
            return Err(invalid("phi_up", "beamwidth must be positive"));
        }
        if self.phi_down <= 0.0 {
            return Err(invalid("phi_down", "beamwidth must be positive"));
        }
        if self.theta_up - self.phi_up / 2.0 < 0.0 {
            return Err(invalid(
                "theta_up",
                format!(
                    "theta_up - phi_up/2 = {} is negative; the up-tilted mainlobe would reach ground users",
                    self.theta_up - self.phi_up / 2.0
                ),
            ));
        }
        if self.theta_down - self.phi_down / 2.0 < 0.0 {
            return Err(invalid(
                "theta_down",
                format!(
                    "theta_down - phi_down/2 = {} is negative; the down-tilted mainlobe would reach aerial users",
                    self.theta_down - self.phi_down / 2.0
                ),
            ));
        }
        if self.theta_up + self.phi_up / 2.0 >= 90.0 {
            return Err(invalid("theta_up", "upper beam edge must stay below 90 degrees"));
        }
        if self.theta_down + self.phi_down / 2.0 >= 90.0 {
            return Err(invalid("theta_down", "lower beam edge must stay below 90 degrees"));
        }
        if self.g_main_db <= self.g_side_db {
            return Err(invalid("g_main_db", "mainlobe gain must exceed sidelobe gain"));
        }
        Ok(())
    }

    fn tilt_and_width(&self, tilt: TiltKind) -> (f64, f64) {
        match tilt {
            TiltKind::Up => (self.theta_up, self.phi_up),
            TiltKind::Down => (self.theta_down, self.phi_down),
        }
    }
}

/// Path loss and small-scale fading per link condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    pub eta_los_db: f64,
    pub eta_nlos_db: f64,
    /// Nakagami shape parameters; integral so the coverage sums are finite.
    pub m_los: u32,
    pub m_nlos: u32,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.alpha_los > 0.0 && self.alpha_los.is_finite()) {
            return Err(invalid("alpha_los", "path-loss exponent must be positive"));
        }
        if !(self.alpha_nlos > 0.0 && self.alpha_nlos.is_finite()) {
            return Err(invalid("alpha_nlos", "path-loss exponent must be positive"));
        }
        if !self.eta_los_db.is_finite() {
            return Err(invalid("eta_los_db", "must be finite"));
        }
        if !self.eta_nlos_db.is_finite() {
            return Err(invalid("eta_nlos_db", "must be finite"));
        }
        if self.m_los == 0 {
            return Err(invalid("m_los", "Nakagami shape must be a positive integer"));
        }
        if self.m_nlos == 0 {
            return Err(invalid("m_nlos", "Nakagami shape must be a positive integer"));
        }
        Ok(())
    }

    pub fn exponent(&self, link: LinkKind) -> f64 {
        match link {
            LinkKind::LoS => self.alpha_los,
            LinkKind::NLoS => self.alpha_nlos,
        }
    }

    pub fn eta_db(&self, link: LinkKind) -> f64 {
        match link {
            LinkKind::LoS => self.eta_los_db,
            LinkKind::NLoS => self.eta_nlos_db,
        }
    }

    pub fn shape(&self, link: LinkKind) -> u32 {
        match link {
            LinkKind::LoS => self.m_los,
            LinkKind::NLoS => self.m_nlos,
        }
    }
}

/// Where the base stations are and how they transmit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeploymentParams {
    /// Total base-station density, per m².
    pub lambda_total: f64,
    /// Fraction of base stations whose antennas are up-tilted.
    pub delta: f64,
    pub h_bs: f64,
    pub h_aerial: f64,
    pub h_ground: f64,
    /// Transmit power in dB relative to an arbitrary reference.
    pub p_tx_db: f64,
    /// SIR threshold, dB.
    pub tau_db: f64,
}

impl DeploymentParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lambda_total > 0.0 && self.lambda_total.is_finite()) {
            return Err(invalid("lambda_t", "density must be positive"));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(invalid("delta", format!("{} not in [0, 1]", self.delta)));
        }
        for (field, v) in [
            ("h_bs", self.h_bs),
            ("h_aerial", self.h_aerial),
            ("h_ground", self.h_ground),
            ("p_tx_db", self.p_tx_db),
            ("tau_db", self.tau_db),
        ] {
            if !v.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if self.h_bs < 0.0 || self.h_ground < 0.0 || self.h_aerial < 0.0 {
            return Err(invalid("h_bs", "heights must be non-negative"));
        }
        if !(self.h_aerial > self.h_bs && self.h_bs > self.h_ground) {
            log::warn!(
                "heights (h_bs={}, h_aerial={}, h_ground={}) do not satisfy h_aerial > h_bs > h_ground",
                self.h_bs,
                self.h_aerial,
                self.h_ground
            );
        }
        Ok(())
    }

    /// Density of base stations with the given tilt.
    pub fn density(&self, tilt: TiltKind) -> f64 {
        match tilt {
            TiltKind::Up => self.delta * self.lambda_total,
            TiltKind::Down => (1.0 - self.delta) * self.lambda_total,
        }
    }

    pub fn user_height(&self, user: UserKind) -> f64 {
        match user {
            UserKind::Aerial => self.h_aerial,
            UserKind::Ground => self.h_ground,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub deployment: DeploymentParams,
    pub antenna: AntennaParams,
    pub channel: ChannelParams,
    pub environment: EnvironmentParams,
}

impl SystemConfig {
    /// Default numerical parameters in the given environment, δ = 0.4.
    pub fn defaults_in(environment: EnvironmentParams) -> Self {
        Self {
            deployment: DeploymentParams {
                lambda_total: 2e-6,
                delta: 0.4,
                h_bs: 50.0,
                h_aerial: 100.0,
                h_ground: 0.0,
                p_tx_db: -6.0,
                tau_db: -5.0,
            },
            antenna: AntennaParams {
                theta_up: 12.0,
                theta_down: 12.0,
                phi_up: 20.0,
                phi_down: 20.0,
                g_main_db: 10.0,
                g_side_db: 0.5,
            },
            channel: ChannelParams {
                alpha_los: 2.09,
                alpha_nlos: 3.75,
                eta_los_db: -41.1,
                eta_nlos_db: -32.9,
                m_los: 1,
                m_nlos: 3,
            },
            environment,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.deployment.validate()?;
        self.antenna.validate()?;
        self.channel.validate()?;
        self.environment.validate()
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.deployment.delta = delta;
        self
    }

    pub fn tau_linear(&self) -> f64 {
        db_to_linear(self.deployment.tau_db)
    }

    pub fn gain(&self, lobe: LobeKind) -> f64 {
        match lobe {
            LobeKind::Main => db_to_linear(self.antenna.g_main_db),
            LobeKind::Side => db_to_linear(self.antenna.g_side_db),
        }
    }

    /// Signed vertical offset h_v − h_T.
    pub fn height_offset(&self, user: UserKind) -> f64 {
        self.deployment.user_height(user) - self.deployment.h_bs
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::defaults_in(EnvironmentParams::URBAN)
    }
}

/// Annulus (inner, outer] of horizontal distances at which a tilt class
/// delivers mainlobe gain. `outer` may be `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MainlobeRing {
    pub inner: f64,
    pub outer: f64,
}

impl MainlobeRing {
    pub const EMPTY: MainlobeRing = MainlobeRing {
        inner: 0.0,
        outer: 0.0,
    };

    pub fn contains(&self, r: f64) -> bool {
        self.inner < r && r <= self.outer
    }

    pub fn is_empty(&self) -> bool {
        self.outer <= self.inner
    }
}

pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

// max{0, d·cot(angle)}, with cot(0⁺) = ∞ when d > 0.
fn ring_radius(offset: f64, angle_deg: f64) -> f64 {
    if offset <= 0.0 {
        return 0.0;
    }
    if angle_deg <= 0.0 {
        return f64::INFINITY;
    }
    (offset / angle_deg.to_radians().tan()).max(0.0)
}

pub fn mainlobe_ring(user: UserKind, tilt: TiltKind, cfg: &SystemConfig) -> MainlobeRing {
    let (theta, phi) = cfg.antenna.tilt_and_width(tilt);
    let offset = match tilt {
        TiltKind::Up => cfg.height_offset(user),
        TiltKind::Down => -cfg.height_offset(user),
    };
    let inner = ring_radius(offset, theta + phi / 2.0);
    let outer = ring_radius(offset, theta - phi / 2.0);
    if outer <= inner {
        MainlobeRing::EMPTY
    } else {
        MainlobeRing { inner, outer }
    }
}

pub fn region_indicator(
    user: UserKind,
    tilt: TiltKind,
    lobe: LobeKind,
    r: f64,
    cfg: &SystemConfig,
) -> bool {
    let in_ring = mainlobe_ring(user, tilt, cfg).contains(r);
    match lobe {
        LobeKind::Main => in_ring,
        LobeKind::Side => !in_ring,
    }
}

pub fn antenna_gain(user: UserKind, tilt: TiltKind, r: f64, cfg: &SystemConfig) -> f64 {
    if mainlobe_ring(user, tilt, cfg).contains(r) {
        cfg.gain(LobeKind::Main)
    } else {
        cfg.gain(LobeKind::Side)
    }
}

/// Index N of the blockage product at horizontal distance `r`; negative means
/// the product is empty.
pub fn blockage_count(r: f64, env: &EnvironmentParams) -> i64 {
    (r * (env.alpha * env.beta).sqrt() / 1000.0 - 1.0).floor() as i64
}

/// LoS probability for a product with `n_blockages` = N (N + 1 factors).
fn los_product(n_blockages: i64, h_bs: f64, h_user: f64, gamma: f64) -> f64 {
    if n_blockages < 0 {
        return 1.0;
    }
    let steps = (n_blockages + 1) as f64;
    let two_gamma_sq = 2.0 * gamma * gamma;
    let mut p = 1.0;
    for n in 0..=n_blockages {
        let h = h_bs - (n as f64 + 0.5) * (h_bs - h_user) / steps;
        p *= 1.0 - (-(h * h) / two_gamma_sq).exp();
    }
    p
}

pub fn los_probability(user: UserKind, r: f64, cfg: &SystemConfig) -> f64 {
    los_product(
        blockage_count(r, &cfg.environment),
        cfg.deployment.h_bs,
        cfg.deployment.user_height(user),
        cfg.environment.gamma,
    )
}

pub fn link_probability(user: UserKind, link: LinkKind, r: f64, cfg: &SystemConfig) -> f64 {
    let p = los_probability(user, r, cfg);
    match link {
        LinkKind::LoS => p,
        LinkKind::NLoS => 1.0 - p,
    }
}

pub fn path_loss(
    user: UserKind,
    link: LinkKind,
    r: f64,
    cfg: &SystemConfig,
) -> Result<f64, ModelError> {
    let dh = cfg.height_offset(user);
    let d_sq = r * r + dh * dh;
    if d_sq <= 0.0 {
        return Err(ModelError::ZeroDistance);
    }
    let eta = db_to_linear(cfg.channel.eta_db(link));
    Ok(eta * d_sq.powf(-cfg.channel.exponent(link) / 2.0))
}

/// Fading-averaged received power from a base station of type `w` at
/// horizontal distance `r`. The gain follows the type's lobe label.
pub fn mean_rx_power(
    user: UserKind,
    w: BsType,
    r: f64,
    cfg: &SystemConfig,
) -> Result<f64, ModelError> {
    let pt = db_to_linear(cfg.deployment.p_tx_db);
    Ok(pt * cfg.gain(w.lobe) * path_loss(user, w.link, r, cfg)?)
}

/// Per-user precomputation of everything the hot loops need: rings, linear
/// gains, densities and a tabulated LoS profile with its first moment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SystemConfig,
    pub user: UserKind,
    pub rings: [MainlobeRing; 2],
    /// Network extent: no base station lies beyond this horizontal distance.
    pub radius: f64,
    height_offset_sq: f64,
    gains: [f64; 2],
    etas: [f64; 2],
    exponents: [f64; 2],
    shapes: [u32; 2],
    densities: [f64; 2],
    p_tx: f64,
    los: LosProfile,
}

impl Scenario {
    pub fn new(config: &SystemConfig, user: UserKind, radius: f64) -> Self {
        let dh = config.height_offset(user);
        Self {
            config: *config,
            user,
            rings: [
                mainlobe_ring(user, TiltKind::Up, config),
                mainlobe_ring(user, TiltKind::Down, config),
            ],
            radius,
            height_offset_sq: dh * dh,
            gains: [config.gain(LobeKind::Main), config.gain(LobeKind::Side)],
            etas: [
                db_to_linear(config.channel.eta_los_db),
                db_to_linear(config.channel.eta_nlos_db),
            ],
            exponents: [config.channel.alpha_los, config.channel.alpha_nlos],
            shapes: [config.channel.m_los, config.channel.m_nlos],
            densities: [
                config.deployment.density(TiltKind::Up),
                config.deployment.density(TiltKind::Down),
            ],
            p_tx: db_to_linear(config.deployment.p_tx_db),
            los: LosProfile::new(config, user, radius),
        }
    }

    pub fn ring(&self, tilt: TiltKind) -> MainlobeRing {
        self.rings[tilt.idx()]
    }

    pub fn density(&self, tilt: TiltKind) -> f64 {
        self.densities[tilt.idx()]
    }

    pub fn gain(&self, lobe: LobeKind) -> f64 {
        self.gains[lobe.idx()]
    }

    pub fn eta(&self, link: LinkKind) -> f64 {
        self.etas[link.idx()]
    }

    pub fn exponent(&self, link: LinkKind) -> f64 {
        self.exponents[link.idx()]
    }

    pub fn shape(&self, link: LinkKind) -> u32 {
        self.shapes[link.idx()]
    }

    pub fn p_tx(&self) -> f64 {
        self.p_tx
    }

    pub fn height_offset_sq(&self) -> f64 {
        self.height_offset_sq
    }

    pub fn lobe_at(&self, tilt: TiltKind, r: f64) -> LobeKind {
        if self.ring(tilt).contains(r) {
            LobeKind::Main
        } else {
            LobeKind::Side
        }
    }

    /// ξ for the tilt/lobe pair of `w` at `r`, additionally restricted to the
    /// network disk.
    pub fn in_region(&self, w: BsType, r: f64) -> bool {
        r <= self.radius && self.lobe_at(w.tilt, r) == w.lobe
    }

    pub fn los_probability(&self, r: f64) -> f64 {
        self.los.probability(r)
    }

    pub fn link_probability(&self, link: LinkKind, r: f64) -> f64 {
        let p = self.los.probability(r);
        match link {
            LinkKind::LoS => p,
            LinkKind::NLoS => 1.0 - p,
        }
    }

    pub fn path_loss(&self, link: LinkKind, r: f64) -> f64 {
        let d_sq = r * r + self.height_offset_sq;
        self.eta(link) * d_sq.powf(-self.exponent(link) / 2.0)
    }

    pub fn mean_rx_power(&self, w: BsType, r: f64) -> f64 {
        self.p_tx * self.gain(w.lobe) * self.path_loss(w.link, r)
    }

    /// ∫₀^r z·P^link(z) dz, exact for the piecewise-constant LoS profile.
    pub fn link_moment(&self, link: LinkKind, r: f64) -> f64 {
        let los = self.los.moment(r);
        match link {
            LinkKind::LoS => los,
            LinkKind::NLoS => 0.5 * r * r - los,
        }
    }

    /// Intensity measure of type-`w` base stations within horizontal distance
    /// `r` of the user: 2πλ_{w₁}∫ z·P^{w₃}(z)·ξ(z) dz over [0, r] ∩ disk.
    pub fn intensity_measure(&self, w: BsType, r: f64) -> f64 {
        let lambda = self.density(w.tilt);
        if lambda == 0.0 || r <= 0.0 {
            return 0.0;
        }
        let r = r.min(self.radius);
        let ring = self.ring(w.tilt);
        let moment = |x: f64| self.link_moment(w.link, x);
        let m = match w.lobe {
            LobeKind::Main => {
                if ring.is_empty() || r <= ring.inner {
                    0.0
                } else {
                    moment(r.min(ring.outer)) - moment(ring.inner)
                }
            }
            LobeKind::Side => {
                if ring.is_empty() {
                    moment(r)
                } else {
                    let near = moment(r.min(ring.inner));
                    let far = if r > ring.outer {
                        moment(r) - moment(ring.outer)
                    } else {
                        0.0
                    };
                    near + far
                }
            }
        };
        2.0 * std::f64::consts::PI * lambda * m.max(0.0)
    }

    /// Horizontal distances in (0, radius) where any piecewise quantity of
    /// this scenario jumps: LoS steps and ring edges. Sorted, deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .los
            .boundaries()
            .iter()
            .copied()
            .filter(|&b| b > 0.0 && b < self.radius)
            .collect();
        for ring in &self.rings {
            if ring.is_empty() {
                continue;
            }
            for edge in [ring.inner, ring.outer] {
                if edge > 0.0 && edge < self.radius {
                    pts.push(edge);
                }
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }

    /// Edges of the support of type `w` within the disk, plus LoS steps
    /// inside it, as consecutive (start, end) pieces.
    pub fn region_pieces(&self, w: BsType) -> Vec<(f64, f64)> {
        let ring = self.ring(w.tilt);
        let spans: Vec<(f64, f64)> = match w.lobe {
            LobeKind::Main => {
                if ring.is_empty() {
                    vec![]
                } else {
                    vec![(ring.inner, ring.outer.min(self.radius))]
                }
            }
            LobeKind::Side => {
                if ring.is_empty() {
                    vec![(0.0, self.radius)]
                } else {
                    vec![
                        (0.0, ring.inner.min(self.radius)),
                        (ring.outer.min(self.radius), self.radius),
                    ]
                }
            }
        };
        let steps = self.los.boundaries();
        let mut pieces = Vec::new();
        for (a, b) in spans {
            if b <= a {
                continue;
            }
            let mut start = a;
            for &s in steps.iter().filter(|&&s| s > a && s < b) {
                pieces.push((start, s));
                start = s;
            }
            pieces.push((start, b));
        }
        pieces
    }
}

/// LoS probability tabulated per blockage step, with the cumulative first
/// moment ∫₀^{r_j} z·P^L(z) dz at every step boundary r_j.
#[derive(Debug, Clone)]
struct LosProfile {
    env: EnvironmentParams,
    h_bs: f64,
    h_user: f64,
    step: f64,
    // probs[j] is P^L on [r_j, r_{j+1}), r_j = j·step.
    probs: Vec<f64>,
    moments: Vec<f64>,
    bounds: Vec<f64>,
}

impl LosProfile {
    fn new(cfg: &SystemConfig, user: UserKind, radius: f64) -> Self {
        let env = cfg.environment;
        let step = env.step_length();
        let h_bs = cfg.deployment.h_bs;
        let h_user = cfg.deployment.user_height(user);
        let pieces = if step.is_finite() && step > 0.0 {
            ((radius / step).ceil() as usize).saturating_add(2).min(1 << 22)
        } else {
            1
        };
        let mut probs = Vec::with_capacity(pieces);
        let mut moments = Vec::with_capacity(pieces + 1);
        let mut bounds = Vec::with_capacity(pieces + 1);
        let mut acc = 0.0;
        for j in 0..pieces {
            let p = los_product(j as i64 - 1, h_bs, h_user, env.gamma);
            let a = j as f64 * step;
            let b = (j + 1) as f64 * step;
            bounds.push(a);
            moments.push(acc);
            probs.push(p);
            acc += p * 0.5 * (b * b - a * a);
        }
        Self {
            env,
            h_bs,
            h_user,
            step,
            probs,
            moments,
            bounds,
        }
    }

    fn piece(&self, r: f64) -> i64 {
        blockage_count(r, &self.env) + 1
    }

    fn probability(&self, r: f64) -> f64 {
        let j = self.piece(r);
        if j <= 0 {
            return 1.0;
        }
        match self.probs.get(j as usize) {
            Some(&p) => p,
            None => los_product(j - 1, self.h_bs, self.h_user, self.env.gamma),
        }
    }

    fn moment(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let j = self.piece(r).max(0) as usize;
        if j < self.probs.len() {
            let a = self.bounds[j];
            self.moments[j] + self.probs[j] * 0.5 * (r * r - a * a)
        } else {
            // Beyond the table: continue piece by piece.
            let last = self.probs.len() - 1;
            let mut acc = self.moments[last];
            let mut k = last;
            loop {
                let a = k as f64 * self.step;
                let b = ((k + 1) as f64 * self.step).min(r);
                let p = self.probability(0.5 * (a + b));
                acc += p * 0.5 * (b * b - a * a);
                if b >= r {
                    return acc;
                }
                k += 1;
            }
        }
    }

    fn boundaries(&self) -> &[f64] {
        &self.bounds
    }
}
