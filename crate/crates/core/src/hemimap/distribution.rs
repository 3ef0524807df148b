use super::{direction_to_texel, texel_local_direction, texel_solid_angle, row_theta, HemiMap, MAP_RES};
use crate::math::{Rgb, Vec3};

/// Floor added to every texel weight so that the distribution stays valid
/// for black maps.
pub const WEIGHT_FLOOR: f64 = 1e-8;

/// Piecewise-constant distribution over the texels of a map, sampled with
/// a marginal over rows and a conditional over the columns of each row.
#[derive(Debug, Clone)]
pub struct Distribution2D {
    prob: Vec<f64>,
    marginal_cdf: Vec<f64>,
    conditional_cdf: Vec<f64>,
}

/// Searches a cumulative table of `n` entries (`cdf[n - 1] == 1`).
fn search(cdf: &[f64], x: f64) -> usize {
    cdf.partition_point(|&c| c <= x).min(cdf.len() - 1)
}

impl Distribution2D {
    pub fn from_weights(weights: &[f64]) -> Distribution2D {
        assert_eq!(weights.len(), MAP_RES * MAP_RES);
        let total: f64 = weights.iter().sum();
        let prob: Vec<f64> = weights.iter().map(|w| w / total).collect();

        let mut marginal_cdf = Vec::with_capacity(MAP_RES);
        let mut conditional_cdf = Vec::with_capacity(MAP_RES * MAP_RES);
        let mut acc = 0.0;
        for v in 0..MAP_RES {
            let row = &weights[v * MAP_RES..(v + 1) * MAP_RES];
            let row_sum: f64 = row.iter().sum();
            let mut racc = 0.0;
            for w in row {
                racc += w;
                conditional_cdf.push(racc / row_sum);
            }
            conditional_cdf[v * MAP_RES + MAP_RES - 1] = 1.0;
            acc += row_sum;
            marginal_cdf.push(acc / total);
        }
        marginal_cdf[MAP_RES - 1] = 1.0;
        Distribution2D {
            prob,
            marginal_cdf,
            conditional_cdf,
        }
    }

    /// Probability of texel `(u, v)`.
    #[inline]
    pub fn probability(&self, u: usize, v: usize) -> f64 {
        self.prob[v * MAP_RES + u]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.prob
    }

    /// Draws a texel; `u.1` selects the row, `u.0` the column.
    pub fn sample(&self, u: (f64, f64)) -> (usize, usize) {
        let v = search(&self.marginal_cdf, u.1);
        let row = &self.conditional_cdf[v * MAP_RES..(v + 1) * MAP_RES];
        (search(row, u.0), v)
    }

    /// Solid-angle density of drawing the texel that contains `dir`.
    pub fn pdf_direction(&self, map: &HemiMap, dir: Vec3) -> f64 {
        match direction_to_texel(dir, &map.frame) {
            Some((u, v)) => self.probability(u, v) / texel_solid_angle(v),
            None => 0.0,
        }
    }
}

/// Importance distribution proportional to `luminance · sin θ` per texel.
pub fn build_map_distribution(radmap: &HemiMap) -> Distribution2D {
    let mut weights = Vec::with_capacity(MAP_RES * MAP_RES);
    for v in 0..MAP_RES {
        let s = row_theta(v).sin();
        for u in 0..MAP_RES {
            let lum = radmap.texel(u, v).luminance().max(0.0);
            weights.push(lum * s + WEIGHT_FLOOR);
        }
    }
    Distribution2D::from_weights(&weights)
}

#[derive(Debug, Clone, Copy)]
pub struct MapSample {
    pub dir: Vec3,
    pub pdf: f64,
    pub radiance: Rgb,
    pub texel: (usize, usize),
}

/// Draws a texel from `dist` and returns its center direction, solid-angle
/// density `p / ω` and physical radiance.
pub fn sample_map(dist: &Distribution2D, radmap: &HemiMap, u: (f64, f64)) -> MapSample {
    let (tu, tv) = dist.sample(u);
    MapSample {
        dir: radmap.frame.to_world(texel_local_direction(tu, tv)),
        pdf: dist.probability(tu, tv) / texel_solid_angle(tv),
        radiance: radmap.texel(tu, tv),
        texel: (tu, tv),
    }
}
