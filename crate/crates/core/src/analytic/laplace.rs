//! Laplace transform of the aggregate interference conditioned on the serving
//! type and distance, and its derivatives in s.
//!
//! Each interfering type contributes 2πλ∫_{L}^{R} h(c(z))·z·P(z)·ξ(z) dz where
//! c(z) = Pᵗ·G·ζ(z) is the mean received power and h depends on the quantity
//! (1 − κ for the exponent, −κ⁽ⁿ⁾ for its n-th derivative). The integration
//! grid (ring edges and LoS steps, 15 Kronrod nodes each) is built once per
//! type. Pieces where s·c/m is small are summed through precomputed power
//! moments of c, which is the convergent binomial series of κ.

use serde::{Deserialize, Serialize};

use super::quadrature::{gk15_nodes, integrate, kronrod_error};
use super::{AnalyticError, Analysis};
use crate::model::{BsType, Scenario, UserKind};

/// Terms kept from the binomial series of κ on far pieces.
const SERIES_TERMS: usize = 12;
/// Far-field threshold on s·c/m; the dropped remainder is below 1e-15
/// relative for any shape up to 10.
const SERIES_THRESHOLD: f64 = 0.02;

/// Serving type and distance that the interference is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceContext {
    pub user: UserKind,
    pub serving: BsType,
    pub r0: f64,
}

#[derive(Debug, Clone, Copy)]
struct CachedNode {
    kronrod_weight: f64,
    gauss_weight: f64,
    rho: f64,
    power: f64,
}

#[derive(Debug, Clone)]
struct Piece {
    a: f64,
    b: f64,
    link_probability: f64,
    nodes: [CachedNode; 15],
}

/// Cached integration grid for one interfering type.
#[derive(Debug, Clone)]
pub(super) struct InterferenceField {
    pub(super) bs_type: BsType,
    scale: f64,
    shape: u32,
    power_coef: f64,
    alpha: f64,
    dh_sq: f64,
    pieces: Vec<Piece>,
    // Mean power at each piece start; non-increasing.
    start_power: Vec<f64>,
    // suffix_moments[i][k] = Σ_{j ≥ i} ∫_piece_j c^k ρ (Kronrod), k ≥ 1.
    suffix_moments: Vec<[f64; SERIES_TERMS + 1]>,
    // Σ_{j ≥ i} |Kronrod − Gauss| of the first moment.
    suffix_first_moment_gap: Vec<f64>,
}

/// Which functional of κ to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kernel {
    /// 1 − κ(z, s)
    Exponent,
    /// −∂ⁿκ/∂sⁿ, n ≥ 1
    Derivative(u32),
}

fn rising(m: u32, n: u32) -> f64 {
    (0..n).map(|i| (m + i) as f64).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Kernel {
    fn eval(self, shape: u32, s: f64, c: f64) -> f64 {
        let m = shape as f64;
        match self {
            Kernel::Exponent => {
                let x = s * c / m;
                -(-m * x.ln_1p()).exp_m1()
            }
            Kernel::Derivative(n) => {
                let denom = m + c * s;
                let q = m / denom;
                let t = c / denom;
                let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
                sign * rising(shape, n) * t.powi(n as i32) * q.powi(shape as i32)
            }
        }
    }

    /// Coefficient of M_k = ∫c^k ρ in the far-field series.
    fn series_coefficient(self, shape: u32, s: f64, k: u32) -> f64 {
        let m = shape as f64;
        // κ = Σ_k a_k (s c/m)^k with a_k = (−1)^k (m)_k / k!
        let a_k = {
            let mag = rising(shape, k) / (1..=k).map(|i| i as f64).product::<f64>();
            if k % 2 == 0 {
                mag
            } else {
                -mag
            }
        };
        match self {
            Kernel::Exponent => {
                if k == 0 {
                    0.0
                } else {
                    -a_k * (s / m).powi(k as i32)
                }
            }
            Kernel::Derivative(n) => {
                if k < n {
                    0.0
                } else {
                    // d^n/ds^n of s^k = k!/(k−n)! s^(k−n)
                    let falling: f64 = ((k - n + 1)..=k).map(|i| i as f64).product();
                    -a_k * falling * s.powi((k - n) as i32) / m.powi(k as i32)
                }
            }
        }
    }
}

impl InterferenceField {
    pub(super) fn new(sc: &Scenario, w: BsType) -> Self {
        let lambda = sc.density(w.tilt);
        let scale = 2.0 * std::f64::consts::PI * lambda;
        let shape = sc.shape(w.link);
        let power_coef = sc.p_tx() * sc.gain(w.lobe) * sc.eta(w.link);
        let alpha = sc.exponent(w.link);
        let dh_sq = sc.height_offset_sq();
        let power = |z: f64| power_coef * (z * z + dh_sq).powf(-alpha / 2.0);

        let mut pieces = Vec::new();
        if lambda > 0.0 {
            for (a, b) in sc.region_pieces(w) {
                let p = sc.link_probability(w.link, 0.5 * (a + b));
                if p == 0.0 {
                    continue;
                }
                let nodes = gk15_nodes(a, b).map(|n| CachedNode {
                    kronrod_weight: n.kronrod_weight,
                    gauss_weight: n.gauss_weight,
                    rho: n.x * p,
                    power: power(n.x),
                });
                pieces.push(Piece {
                    a,
                    b,
                    link_probability: p,
                    nodes,
                });
            }
        }
        let start_power = pieces.iter().map(|p| power(p.a)).collect();
        let mut suffix_moments = vec![[0.0; SERIES_TERMS + 1]; pieces.len() + 1];
        let mut suffix_first_moment_gap = vec![0.0; pieces.len() + 1];
        for (i, piece) in pieces.iter().enumerate().rev() {
            let mut acc = suffix_moments[i + 1];
            let mut gauss_first = 0.0;
            let mut kronrod_first = 0.0;
            for node in &piece.nodes {
                let mut ck = 1.0;
                for k in 1..=SERIES_TERMS {
                    ck *= node.power;
                    acc[k] += node.kronrod_weight * node.rho * ck;
                }
                kronrod_first += node.kronrod_weight * node.rho * node.power;
                gauss_first += node.gauss_weight * node.rho * node.power;
            }
            suffix_moments[i] = acc;
            suffix_first_moment_gap[i] =
                suffix_first_moment_gap[i + 1] + (kronrod_first - gauss_first).abs();
        }
        Self {
            bs_type: w,
            scale,
            shape,
            power_coef,
            alpha,
            dh_sq,
            pieces,
            start_power,
            suffix_moments,
            suffix_first_moment_gap,
        }
    }

    fn power(&self, z: f64) -> f64 {
        self.power_coef * (z * z + self.dh_sq).powf(-self.alpha / 2.0)
    }

    /// ∫_{lower}^{R} h(c(z))·ρ(z) dz (without the 2πλ factor), with an error
    /// estimate.
    fn integral(
        &self,
        kernel: Kernel,
        s: f64,
        lower: f64,
        abs_tol: f64,
        rel_tol: f64,
        max_subdivisions: usize,
    ) -> Result<(f64, f64), crate::analytic::QuadratureError> {
        let m = self.shape;
        let mut start = self.pieces.partition_point(|p| p.b <= lower);
        if start == self.pieces.len() {
            return Ok((0.0, 0.0));
        }
        let mut value = 0.0;
        let mut error = 0.0;
        let budget = abs_tol / 4.0;

        let first = &self.pieces[start];
        if first.a < lower {
            let p = first.link_probability;
            let r = integrate(
                |z| kernel.eval(m, s, self.power(z)) * z * p,
                lower,
                first.b,
                &[],
                budget,
                rel_tol,
                max_subdivisions,
            )?;
            value += r.value;
            error += r.error;
            start += 1;
        }

        let threshold = SERIES_THRESHOLD * m as f64;
        let far = if s == 0.0 {
            start
        } else {
            start + self.start_power[start..].partition_point(|&c| s * c > threshold)
        };

        let mut near_error = 0.0;
        let mut near_value = 0.0;
        for piece in &self.pieces[start..far] {
            let (mut k, mut g, mut abs) = (0.0, 0.0, 0.0);
            let mut vals = [0.0; 15];
            for (v, node) in vals.iter_mut().zip(&piece.nodes) {
                *v = kernel.eval(m, s, node.power) * node.rho;
                k += node.kronrod_weight * *v;
                g += node.gauss_weight * *v;
                abs += node.kronrod_weight * v.abs();
            }
            let half = 0.5 * (piece.b - piece.a);
            let mean = k / (2.0 * half);
            let asc: f64 = vals
                .iter()
                .zip(&piece.nodes)
                .map(|(v, n)| n.kronrod_weight * (v - mean).abs())
                .sum();
            near_value += k;
            near_error += kronrod_error(k, g, abs, asc);
        }
        if near_error > budget.max(rel_tol * near_value.abs()) && far > start {
            // Cached grid not accurate enough: redo those pieces adaptively.
            let edges: Vec<f64> = self.pieces[start..far].iter().map(|p| p.a).collect();
            let (a, b) = (self.pieces[start].a, self.pieces[far - 1].b);
            let r = integrate(
                |z| {
                    let j = start + self.pieces[start..far].partition_point(|p| p.b < z);
                    let p = self.pieces[j.min(far - 1)].link_probability;
                    kernel.eval(m, s, self.power(z)) * z * p
                },
                a,
                b,
                &edges,
                budget,
                rel_tol,
                max_subdivisions,
            )?;
            near_value = r.value;
            near_error = r.error;
        }
        value += near_value;
        error += near_error;

        if far < self.pieces.len() {
            let moments = &self.suffix_moments[far];
            let series: f64 = (1..=SERIES_TERMS as u32)
                .map(|k| kernel.series_coefficient(m, s, k) * moments[k as usize])
                .sum();
            value += series;
            let lead = match kernel {
                Kernel::Exponent => s,
                Kernel::Derivative(1) => 1.0,
                Kernel::Derivative(_) => s.max(1.0),
            };
            error += lead * self.suffix_first_moment_gap[far] * 1e-3;
        }
        Ok((value, error))
    }
}

impl Analysis {
    /// Checks the invariants of a conditioning context against this analysis.
    pub fn context(&self, serving: BsType, r0: f64) -> Result<LaplaceContext, AnalyticError> {
        let user = self.user();
        if !(r0 >= 0.0 && r0.is_finite()) {
            return Err(AnalyticError::InvalidContext(format!("r0 = {r0} must be ≥ 0")));
        }
        if !serving.is_admissible(user) {
            return Err(AnalyticError::InvalidContext(format!(
                "{serving} cannot serve a {user} user"
            )));
        }
        if !self.scenario.in_region(serving, r0) {
            return Err(AnalyticError::InvalidContext(format!(
                "a {serving} station cannot lie at r0 = {r0} m"
            )));
        }
        Ok(LaplaceContext { user, serving, r0 })
    }

    fn check(&self, ctx: &LaplaceContext) -> Result<(), AnalyticError> {
        self.context(ctx.serving, ctx.r0).map(|_| ()).and_then(|_| {
            if ctx.user == self.user() {
                Ok(())
            } else {
                Err(AnalyticError::InvalidContext(format!(
                    "context is for {} users, analysis for {}",
                    ctx.user,
                    self.user()
                )))
            }
        })
    }

    fn lower_limit(&self, ctx: &LaplaceContext, w: BsType) -> f64 {
        self.exclusion_radius(ctx.serving, w, ctx.r0)
    }

    // Σ_w 2πλ ∫ h ρ over the admissible interferer region.
    fn exponent_term(
        &self,
        ctx: &LaplaceContext,
        kernel: Kernel,
        s: f64,
    ) -> Result<f64, AnalyticError> {
        let mut total = 0.0;
        for field in &self.fields {
            if field.scale == 0.0 {
                continue;
            }
            let lower = self.lower_limit(ctx, field.bs_type);
            // Exponent tolerance maps to a relative tolerance on L = exp(−T).
            let abs_tol = self.spec.abs_tol / field.scale;
            let (v, _err) = field
                .integral(
                    kernel,
                    s,
                    lower,
                    abs_tol,
                    self.spec.rel_tol,
                    self.spec.max_subdivisions,
                )
                .map_err(|e| {
                    AnalyticError::quadrature(
                        format!(
                            "interference from {} (serving {} at {} m)",
                            field.bs_type, ctx.serving, ctx.r0
                        ),
                        e,
                    )
                })?;
            total += field.scale * v;
        }
        Ok(total)
    }

    /// E[exp(−s·I)] given the serving type and distance.
    pub fn interference_laplace(&self, ctx: &LaplaceContext, s: f64) -> Result<f64, AnalyticError> {
        self.check(ctx)?;
        if s == 0.0 {
            return Ok(1.0);
        }
        Ok((-self.exponent_term(ctx, Kernel::Exponent, s)?).exp())
    }

    /// L, L′, …, L⁽ᵏ⁾ at `s`, via L = exp(−T) and
    /// L⁽ᵏ⁾ = −Σ_{j<k} C(k−1, j)·T⁽ᵏ⁻ʲ⁾·L⁽ʲ⁾.
    pub fn laplace_derivatives(
        &self,
        ctx: &LaplaceContext,
        s: f64,
        k: u32,
    ) -> Result<Vec<f64>, AnalyticError> {
        self.check(ctx)?;
        let mut t = Vec::with_capacity(k as usize + 1);
        t.push(if s == 0.0 {
            0.0
        } else {
            self.exponent_term(ctx, Kernel::Exponent, s)?
        });
        for n in 1..=k {
            t.push(self.exponent_term(ctx, Kernel::Derivative(n), s)?);
        }
        let mut l = Vec::with_capacity(k as usize + 1);
        l.push((-t[0]).exp());
        for order in 1..=k {
            let v: f64 = (0..order)
                .map(|j| binomial(order - 1, j) * t[(order - j) as usize] * l[j as usize])
                .sum();
            l.push(-v);
        }
        Ok(l)
    }

    /// k-th derivative of the conditional Laplace transform. `k` may not
    /// exceed m − 1 for the serving link's Nakagami shape m.
    pub fn laplace_derivative(
        &self,
        ctx: &LaplaceContext,
        s: f64,
        k: u32,
    ) -> Result<f64, AnalyticError> {
        let max = self.scenario.shape(ctx.serving.link).saturating_sub(1).max(2);
        if k > max {
            return Err(AnalyticError::DerivativeOrder { order: k, max });
        }
        Ok(*self.laplace_derivatives(ctx, s, k)?.last().unwrap())
    }

    /// s = m·τ / (Pᵗ·G·ζ(r0)) for the serving link.
    pub fn laplace_argument(&self, ctx: &LaplaceContext, tau_linear: f64) -> f64 {
        let m = self.scenario.shape(ctx.serving.link) as f64;
        m * tau_linear / self.scenario.mean_rx_power(ctx.serving, ctx.r0)
    }

    /// P(SIR > τ | serving type, r0) = Σ_{k<m} (−s)ᵏ/k!·L⁽ᵏ⁾(s).
    pub fn conditional_coverage_exact(
        &self,
        ctx: &LaplaceContext,
        tau_linear: f64,
    ) -> Result<f64, AnalyticError> {
        let m = self.scenario.shape(ctx.serving.link);
        let s = self.laplace_argument(ctx, tau_linear);
        let derivs = self.laplace_derivatives(ctx, s, m - 1)?;
        let mut term_scale = 1.0;
        let mut sum = 0.0;
        for (k, d) in derivs.iter().enumerate() {
            if k > 0 {
                term_scale *= -s / k as f64;
            }
            sum += term_scale * d;
        }
        Ok(sum.clamp(0.0, 1.0))
    }

    /// Upper-bound approximation Σ_{k=1}^{m} C(m,k)(−1)^{k+1}·L(k·β·s) with
    /// β = (m!)^(−1/m).
    pub fn conditional_coverage_approx(
        &self,
        ctx: &LaplaceContext,
        tau_linear: f64,
    ) -> Result<f64, AnalyticError> {
        let m = self.scenario.shape(ctx.serving.link);
        let s = self.laplace_argument(ctx, tau_linear);
        let factorial: f64 = (1..=m).map(|i| i as f64).product();
        let beta = factorial.powf(-1.0 / m as f64);
        let mut sum = 0.0;
        for k in 1..=m {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * binomial(m, k) * self.interference_laplace(ctx, k as f64 * beta * s)?;
        }
        Ok(sum.clamp(0.0, 1.0))
    }
}
