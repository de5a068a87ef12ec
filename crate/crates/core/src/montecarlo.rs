//! Brute-force Monte Carlo oracle. Each realization drops a Poisson number of
//! base stations uniformly on a disk around the typical user, marks them
//! (tilt, LoS), draws one Nakagami fading sample per station and applies the
//! association rule literally.
//!
//! Realization `i` owns three ChaCha8 substreams of the master seed: 3i for
//! ranges and marks, 3i+1 for fading and 3i+2 for bearings. Bearings never
//! affect the SIR, so the fast path skips them. Results are pure integer counts
//! over realizations, so they do not depend on how work is split.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{CoverageEstimate, Method, TypeShare};
use crate::model::{BsType, LinkKind, ModelError, Scenario, SystemConfig, TiltKind, UserKind};

#[derive(Debug, Error)]
pub enum McError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid Monte Carlo setting: {0}")]
    InvalidSetting(String),
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

/// Identifies the RNG substreams of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedPath {
    pub master: u64,
    pub index: u64,
}

impl SeedPath {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }

    fn rng(self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(3 * self.index + stream);
        rng
    }

    fn geometry(self) -> ChaCha8Rng {
        self.rng(0)
    }

    fn fading(self) -> ChaCha8Rng {
        self.rng(1)
    }

    fn bearing(self) -> ChaCha8Rng {
        self.rng(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsSample {
    pub position: [f64; 2],
    pub tilt: TiltKind,
    pub los: LinkKind,
    pub horizontal_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub bss: Vec<BsSample>,
    pub seed_path: SeedPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirSample {
    pub serving_type: BsType,
    pub serving_range: f64,
    pub sir_linear: f64,
}

/// Outcome of the association rule on one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Association {
    pub serving_type: BsType,
    pub serving_index: usize,
    pub serving_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMC {
    pub estimate: f64,
    pub ci_half_width: f64,
    pub n_realizations: u64,
    /// Realizations served by each type, indexed by [`BsType::index`].
    pub per_type_counts: [u64; 8],
    /// Covered realizations per serving type.
    pub per_type_covered: [u64; 8],
    /// Realizations without any base station in the disk.
    pub empty: u64,
}

impl CoverageMC {
    pub fn per_type_count(&self, b: BsType) -> u64 {
        self.per_type_counts[b.index()]
    }

    /// Same numbers in the common estimate shape used by the analytic path.
    pub fn to_estimate(&self, user: UserKind) -> CoverageEstimate {
        let n = self.n_realizations as f64;
        CoverageEstimate {
            value: self.estimate,
            method: Method::MonteCarlo,
            per_type: BsType::admissible(user)
                .into_iter()
                .map(|b| TypeShare {
                    bs_type: b,
                    association: self.per_type_counts[b.index()] as f64 / n,
                    coverage: self.per_type_covered[b.index()] as f64 / n,
                })
                .collect(),
            uncertainty: self.ci_half_width,
        }
    }
}

/// Monte Carlo run settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub n_realizations: u64,
    /// Meters.
    pub sim_radius: f64,
    pub master_seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            n_realizations: 100_000,
            sim_radius: 30_000.0,
            master_seed: 1,
            threads: None,
        }
    }
}

// Draws in a fixed order so that the materialized and streaming paths see
// the same randomness: the count, then two words per station (range; tilt
// and LoS uniforms in the high and low halves).
struct GeometryDraw {
    r: f64,
    tilt: TiltKind,
    los: LinkKind,
}

const INV_2_32: f64 = 1.0 / 4_294_967_296.0;

fn station_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let poisson = Poisson::new(mean).expect("positive finite Poisson mean");
    poisson.sample(rng) as u64
}

fn draw_station(rng: &mut ChaCha8Rng, sc: &Scenario, radius: f64, delta: f64) -> GeometryDraw {
    let r = radius * rng.random::<f64>().sqrt();
    let marks = rng.random::<u64>();
    let tilt_u = (marks >> 32) as f64 * INV_2_32;
    let los_u = (marks & 0xffff_ffff) as f64 * INV_2_32;
    let tilt = if tilt_u < delta {
        TiltKind::Up
    } else {
        TiltKind::Down
    };
    let los = if los_u < sc.los_probability(r) {
        LinkKind::LoS
    } else {
        LinkKind::NLoS
    };
    GeometryDraw { r, tilt, los }
}

/// Unit-mean Gamma(m, 1/m) sample for integer m.
pub fn draw_fading(rng: &mut ChaCha8Rng, m: u32) -> f64 {
    let mut prod = 1.0;
    for _ in 0..m {
        // (0, 1]: keeps the logarithm finite.
        prod *= 1.0 - rng.random::<f64>();
    }
    -prod.ln() / m as f64
}

fn check_radius(sim_radius: f64) -> Result<(), McError> {
    if sim_radius > 0.0 && sim_radius.is_finite() {
        Ok(())
    } else {
        Err(McError::InvalidSetting(format!(
            "simulation radius must be positive and finite, got {sim_radius}"
        )))
    }
}

/// Samples the base stations of one realization; marks are drawn for `user`.
pub fn sample_realization(
    cfg: &SystemConfig,
    user: UserKind,
    sim_radius: f64,
    seed_path: SeedPath,
) -> Result<Realization, McError> {
    check_radius(sim_radius)?;
    cfg.validate()?;
    let sc = Scenario::new(cfg, user, sim_radius);
    Ok(sample_with(&sc, seed_path))
}

fn sample_with(sc: &Scenario, seed_path: SeedPath) -> Realization {
    let mut rng = seed_path.geometry();
    let mut bearing = seed_path.bearing();
    let radius = sc.radius;
    let dep = &sc.config.deployment;
    let n = station_count(&mut rng, dep.lambda_total * PI * radius * radius);
    let bss = (0..n)
        .map(|_| {
            let g = draw_station(&mut rng, sc, radius, dep.delta);
            let phi = 2.0 * PI * bearing.random::<f64>();
            BsSample {
                position: [g.r * phi.cos(), g.r * phi.sin()],
                tilt: g.tilt,
                los: g.los,
                horizontal_range: g.r,
            }
        })
        .collect();
    Realization { bss, seed_path }
}

fn classify(sc: &Scenario, bs: &BsSample) -> BsType {
    BsType::new(bs.tilt, sc.lobe_at(bs.tilt, bs.horizontal_range), bs.los)
}

/// Nearest station of each type, then the one with the largest mean received
/// power; ties go to the earlier type in [`BsType::ALL`]. `None` for an empty
/// realization.
pub fn associate(user: UserKind, real: &Realization, cfg: &SystemConfig) -> Option<Association> {
    let radius = real
        .bss
        .iter()
        .map(|b| b.horizontal_range)
        .fold(0.0, f64::max);
    let sc = Scenario::new(cfg, user, radius.max(1.0));
    associate_with(&sc, real)
}

fn associate_with(sc: &Scenario, real: &Realization) -> Option<Association> {
    let mut nearest: [Option<(usize, f64)>; 8] = [None; 8];
    for (i, bs) in real.bss.iter().enumerate() {
        let w = classify(sc, bs);
        let slot = &mut nearest[w.index()];
        if slot.is_none_or(|(_, r)| bs.horizontal_range < r) {
            *slot = Some((i, bs.horizontal_range));
        }
    }
    pick_serving(sc, |w| nearest[w.index()])
}

fn pick_serving(
    sc: &Scenario,
    nearest: impl Fn(BsType) -> Option<(usize, f64)>,
) -> Option<Association> {
    let mut best: Option<(Association, f64)> = None;
    for w in BsType::ALL {
        if let Some((i, r)) = nearest(w) {
            let p = sc.mean_rx_power(w, r);
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((
                    Association {
                        serving_type: w,
                        serving_index: i,
                        serving_range: r,
                    },
                    p,
                ));
            }
        }
    }
    best.map(|(a, _)| a)
}

/// Draws fading for every station and returns the SIR at the serving
/// station. `None` for an empty realization.
pub fn sir_sample(
    user: UserKind,
    real: &Realization,
    cfg: &SystemConfig,
    seed_path: SeedPath,
) -> Option<SirSample> {
    let radius = real
        .bss
        .iter()
        .map(|b| b.horizontal_range)
        .fold(0.0, f64::max);
    let sc = Scenario::new(cfg, user, radius.max(1.0));
    sir_with(&sc, real, seed_path)
}

fn sir_with(sc: &Scenario, real: &Realization, seed_path: SeedPath) -> Option<SirSample> {
    let assoc = associate_with(sc, real)?;
    let mut rng = seed_path.fading();
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (i, bs) in real.bss.iter().enumerate() {
        let w = classify(sc, bs);
        let p = sc.mean_rx_power(w, bs.horizontal_range) * draw_fading(&mut rng, sc.shape(w.link));
        if i == assoc.serving_index {
            signal = p;
        } else {
            interference += p;
        }
    }
    Some(SirSample {
        serving_type: assoc.serving_type,
        serving_range: assoc.serving_range,
        sir_linear: if interference > 0.0 {
            signal / interference
        } else {
            f64::INFINITY
        },
    })
}

/// Per-realization SIR samples through the materialized path. Meant for
/// diagnostics and tests; [`estimate_coverage`] is much faster.
pub fn sir_samples(
    user: UserKind,
    cfg: &SystemConfig,
    settings: &McSettings,
) -> Result<Vec<Option<SirSample>>, McError> {
    check_radius(settings.sim_radius)?;
    cfg.validate()?;
    let sc = Scenario::new(cfg, user, settings.sim_radius);
    run_in_pool(settings.threads, || {
        (0..settings.n_realizations)
            .into_par_iter()
            .map(|i| {
                let path = SeedPath::new(settings.master_seed, i);
                sir_with(&sc, &sample_with(&sc, path), path)
            })
            .collect()
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    covered: u64,
    empty: u64,
    served: [u64; 8],
    served_covered: [u64; 8],
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.covered += other.covered;
        self.empty += other.empty;
        for k in 0..8 {
            self.served[k] += other.served[k];
            self.served_covered[k] += other.served_covered[k];
        }
        self
    }
}

// One realization without materializing it. Same draws and same rule as
// `sir_with(sample_with(..))`.
fn stream_realization(sc: &Scenario, path: SeedPath, tau: f64) -> Option<(BsType, bool)> {
    let mut geo = path.geometry();
    let mut fade = path.fading();
    let radius = sc.radius;
    let dep = &sc.config.deployment;
    let n = station_count(&mut geo, dep.lambda_total * PI * radius * radius);
    if n == 0 {
        return None;
    }
    // (range, received power) of the nearest station per type.
    let mut nearest = [(f64::INFINITY, 0.0f64); 8];
    let mut total = 0.0;
    for _ in 0..n {
        let g = draw_station(&mut geo, sc, radius, dep.delta);
        let w = BsType::new(g.tilt, sc.lobe_at(g.tilt, g.r), g.los);
        let p = sc.mean_rx_power(w, g.r) * draw_fading(&mut fade, sc.shape(w.link));
        total += p;
        let slot = &mut nearest[w.index()];
        if g.r < slot.0 {
            *slot = (g.r, p);
        }
    }
    let assoc = pick_serving(sc, |w| {
        let (r, _) = nearest[w.index()];
        r.is_finite().then_some((w.index(), r))
    })?;
    let signal = nearest[assoc.serving_type.index()].1;
    let interference = total - signal;
    Some((assoc.serving_type, signal > tau * interference))
}

fn run_in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, McError> {
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| McError::Pool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Fraction of `settings.n_realizations` realizations with SIR above the
/// configured threshold, with a 95% normal-approximation interval.
pub fn estimate_coverage(
    user: UserKind,
    cfg: &SystemConfig,
    settings: &McSettings,
) -> Result<CoverageMC, McError> {
    if settings.n_realizations == 0 {
        return Err(McError::InvalidSetting("need at least one realization".into()));
    }
    check_radius(settings.sim_radius)?;
    cfg.validate()?;
    let sc = Scenario::new(cfg, user, settings.sim_radius);
    let tau = cfg.tau_linear();
    let tally = run_in_pool(settings.threads, || {
        (0..settings.n_realizations)
            .into_par_iter()
            .fold(Tally::default, |mut t, i| {
                match stream_realization(&sc, SeedPath::new(settings.master_seed, i), tau) {
                    None => t.empty += 1,
                    Some((w, covered)) => {
                        t.served[w.index()] += 1;
                        if covered {
                            t.covered += 1;
                            t.served_covered[w.index()] += 1;
                        }
                    }
                }
                t
            })
            .reduce(Tally::default, Tally::merge)
    })?;
    let n = settings.n_realizations as f64;
    let p = tally.covered as f64 / n;
    Ok(CoverageMC {
        estimate: p,
        ci_half_width: 1.96 * (p * (1.0 - p) / n).sqrt(),
        n_realizations: settings.n_realizations,
        per_type_counts: tally.served,
        per_type_covered: tally.served_covered,
        empty: tally.empty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EnvironmentParams, LobeKind};

    fn cfg() -> SystemConfig {
        SystemConfig::defaults_in(EnvironmentParams::URBAN)
    }

    fn station(r: f64, tilt: TiltKind, los: LinkKind) -> BsSample {
        BsSample {
            position: [r, 0.0],
            tilt,
            los,
            horizontal_range: r,
        }
    }

    #[test]
    fn single_station_serves_with_infinite_sir() {
        let real = Realization {
            bss: vec![station(800.0, TiltKind::Down, LinkKind::NLoS)],
            seed_path: SeedPath::new(3, 0),
        };
        let s = sir_sample(UserKind::Ground, &real, &cfg(), real.seed_path).unwrap();
        assert_eq!(s.serving_type, BsType::DMN);
        assert!(s.sir_linear.is_infinite());
    }

    #[test]
    fn mainlobe_at_400_beats_nlos_sidelobe_at_100() {
        // 100 m is inside the inner ring edge (123.8 m), so that station is USN.
        let c = cfg();
        let real = Realization {
            bss: vec![
                station(100.0, TiltKind::Up, LinkKind::NLoS),
                station(400.0, TiltKind::Up, LinkKind::LoS),
            ],
            seed_path: SeedPath::new(0, 0),
        };
        let a = associate(UserKind::Aerial, &real, &c).unwrap();
        assert_eq!(a.serving_type, BsType::UML);
        assert_eq!(a.serving_index, 1);
    }

    #[test]
    fn empty_realization_has_no_association() {
        let real = Realization {
            bss: vec![],
            seed_path: SeedPath::new(0, 0),
        };
        assert!(associate(UserKind::Aerial, &real, &cfg()).is_none());
    }

    #[test]
    fn no_up_tilt_when_delta_is_zero() {
        let c = cfg().with_delta(0.0);
        for i in 0..20 {
            let r = sample_realization(&c, UserKind::Aerial, 10_000.0, SeedPath::new(9, i)).unwrap();
            assert!(r.bss.iter().all(|b| b.tilt == TiltKind::Down));
        }
    }

    #[test]
    fn ranges_match_positions() {
        let r = sample_realization(&cfg(), UserKind::Ground, 5_000.0, SeedPath::new(1, 4)).unwrap();
        for b in &r.bss {
            let norm = b.position[0].hypot(b.position[1]);
            assert!((norm - b.horizontal_range).abs() < 1e-9);
            assert!(b.horizontal_range <= 5_000.0);
        }
    }

    #[test]
    fn streaming_and_materialized_paths_agree() {
        let c = cfg();
        let sc = Scenario::new(&c, UserKind::Aerial, 8_000.0);
        let tau = c.tau_linear();
        for i in 0..200 {
            let path = SeedPath::new(42, i);
            let slow = sir_with(&sc, &sample_with(&sc, path), path);
            let fast = stream_realization(&sc, path, tau);
            match (slow, fast) {
                (None, None) => {}
                (Some(s), Some((w, covered))) => {
                    assert_eq!(s.serving_type, w);
                    assert_eq!(s.sir_linear > tau, covered, "realization {i}");
                }
                other => panic!("mismatch {other:?}"),
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let c = cfg();
        let mut s = McSettings {
            n_realizations: 300,
            sim_radius: 6_000.0,
            master_seed: 5,
            threads: Some(1),
        };
        let a = estimate_coverage(UserKind::Ground, &c, &s).unwrap();
        s.threads = Some(3);
        let b = estimate_coverage(UserKind::Ground, &c, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_threshold_is_always_covered() {
        let mut c = cfg();
        c.deployment.tau_db = -300.0;
        let s = McSettings {
            n_realizations: 200,
            sim_radius: 5_000.0,
            ..McSettings::default()
        };
        let r = estimate_coverage(UserKind::Aerial, &c, &s).unwrap();
        assert_eq!(r.estimate, 1.0);
    }

    #[test]
    fn aerial_user_never_served_by_down_mainlobe() {
        let s = McSettings {
            n_realizations: 500,
            sim_radius: 10_000.0,
            ..McSettings::default()
        };
        let r = estimate_coverage(UserKind::Aerial, &cfg(), &s).unwrap();
        for w in BsType::ALL {
            if w.tilt == TiltKind::Down && w.lobe == LobeKind::Main {
                assert_eq!(r.per_type_count(w), 0);
            }
        }
    }
}
