use super::Analysis;
use crate::model::BsType;

impl Analysis {
    /// Smallest horizontal distance at which a type-`w` station can sit when
    /// the user is served by a type-`b` station at `r0`: no interferer may
    /// offer a stronger mean received power than the server.
    pub fn exclusion_radius(&self, b: BsType, w: BsType, r0: f64) -> f64 {
        if b == w {
            return r0;
        }
        let sc = &self.scenario;
        let dh_sq = sc.height_offset_sq();
        let ratio = (sc.gain(w.lobe) * sc.eta(w.link)) / (sc.gain(b.lobe) * sc.eta(b.link));
        let alpha_w = sc.exponent(w.link);
        let alpha_b = sc.exponent(b.link);
        let k = ratio.powf(2.0 / alpha_w);
        let radicand = k * (r0 * r0 + dh_sq).powf(alpha_b / alpha_w) - dh_sq;
        if radicand >= 0.0 {
            radicand.sqrt()
        } else {
            0.0
        }
    }

    /// Probability that the nearest type-`b` station, found at `r0`, is the
    /// serving one.
    pub fn association_probability(&self, b: BsType, r0: f64) -> f64 {
        let sc = &self.scenario;
        if !b.is_admissible(sc.user) || !sc.in_region(b, r0) {
            return 0.0;
        }
        let exponent: f64 = BsType::admissible(sc.user)
            .into_iter()
            .filter(|&w| w != b)
            .map(|w| sc.intensity_measure(w, self.exclusion_radius(b, w, r0)))
            .sum();
        (-exponent).exp()
    }

    /// A·f for serving type `b` at `r0`: the density of "served by the
    /// nearest `b` station at distance r0".
    pub fn serving_density(&self, b: BsType, r0: f64) -> f64 {
        let f = self.nearest_distance_pdf(b, r0);
        if f == 0.0 {
            return 0.0;
        }
        f * self.association_probability(b, r0)
    }
}
