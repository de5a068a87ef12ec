use super::Analysis;
use crate::model::BsType;

impl Analysis {
    /// Density of the horizontal distance to the nearest type-`b` base
    /// station. Defective: it integrates to the probability that at least one
    /// such station exists in the network disk.
    pub fn nearest_distance_pdf(&self, b: BsType, r: f64) -> f64 {
        let sc = &self.scenario;
        if r < 0.0 || !sc.in_region(b, r) {
            return 0.0;
        }
        let lambda = sc.density(b.tilt);
        if lambda == 0.0 {
            return 0.0;
        }
        let p = sc.link_probability(b.link, r);
        2.0 * std::f64::consts::PI * lambda * r * p * (-sc.intensity_measure(b, r)).exp()
    }

    pub fn nearest_distance_cdf(&self, b: BsType, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        -(-self.scenario.intensity_measure(b, r)).exp_m1()
    }

    /// Probability that the network contains at least one type-`b` station,
    /// i.e. the total mass of [`Self::nearest_distance_pdf`].
    pub fn existence_probability(&self, b: BsType) -> f64 {
        self.nearest_distance_cdf(b, self.scenario.radius)
    }

    /// Horizontal distance beyond which the type-`b` nearest-distance density
    /// has less than `mass` left.
    pub fn distance_quantile_tail(&self, b: BsType, mass: f64) -> f64 {
        let total = self.existence_probability(b);
        let (mut lo, mut hi) = (0.0, self.scenario.radius);
        if total - self.nearest_distance_cdf(b, lo) <= mass {
            return lo;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if total - self.nearest_distance_cdf(b, mid) > mass {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-6 {
                break;
            }
        }
        hi
    }
}
