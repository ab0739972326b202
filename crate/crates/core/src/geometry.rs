//! Regular simplex constellations, stage-1 signal protection regions, and
//! the characteristic distances of the two-stage scheme.

use crate::numerics::{bracket_and_bisect, ROOT_TOL};
use crate::{Error, Result};

/// Upper end of the protection threshold range, (sqrt(3) - 1) / 2.
pub fn max_protection_threshold() -> f64 {
    (3.0f64.sqrt() - 1.0) / 2.0
}

/// M equal-energy, equidistant points embedded in dimension M - 1.
///
/// Points sum to zero, every point has squared norm `energy`, and every
/// pairwise distance equals sqrt(2 * energy * M / (M - 1)).
#[derive(Debug, Clone)]
pub struct Constellation {
    points: Vec<Vec<f64>>,
    energy: f64,
    m: usize,
}

impl Constellation {
    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.m - 1
    }

    #[inline]
    pub fn energy(&self) -> f64 {
        self.energy
    }

    #[inline]
    pub fn point(&self, w: usize) -> &[f64] {
        &self.points[w]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Common distance between any two constellation points.
    pub fn pairwise_distance(&self) -> f64 {
        (2.0 * self.energy * self.m as f64 / (self.m as f64 - 1.0)).sqrt()
    }

    pub fn squared_distance_to(&self, y: &[f64], w: usize) -> f64 {
        self.points[w]
            .iter()
            .zip(y)
            .map(|(p, q)| (p - q) * (p - q))
            .sum()
    }

    pub(crate) fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: y.len(),
            });
        }
        Ok(())
    }
}

/// Builds the regular M-simplex with per-point squared norm `energy`.
///
/// The zero-mean construction A(e_w - mean) in R^M is expressed in the
/// orthonormal Helmert basis of the sum-zero hyperplane, giving exact
/// coordinates in dimension M - 1 without a numerical projection.
pub fn make_simplex(m: usize, energy: f64) -> Result<Constellation> {
    if m < 2 {
        return Err(Error::invalid("M", format!("{m} < 2")));
    }
    if !(energy >= 0.0) {
        return Err(Error::invalid("energy", format!("{energy} < 0")));
    }
    let scale = (m as f64 * energy / (m as f64 - 1.0)).sqrt();
    let mut points = vec![vec![0.0; m - 1]; m];
    // Helmert row k (1-based) is (1, ..., 1, -k, 0, ..., 0) / sqrt(k (k + 1)),
    // with k leading ones. Row k dotted with e_w picks out a single entry.
    for k in 1..m {
        let norm = (k as f64 * (k as f64 + 1.0)).sqrt();
        for (w, point) in points.iter_mut().enumerate() {
            point[k - 1] = if w < k {
                scale / norm
            } else if w == k {
                -scale * k as f64 / norm
            } else {
                0.0
            };
        }
    }
    Ok(Constellation { points, energy, m })
}

/// Indices of the two nearest constellation points to `y`, ties broken
/// toward the smaller index. The first index is the nearest.
pub fn two_most_probable(y: &[f64], c: &Constellation) -> Result<(usize, usize)> {
    c.check_dim(y)?;
    let mut best = (f64::INFINITY, 0);
    let mut second = (f64::INFINITY, 0);
    for w in 0..c.m() {
        let d = c.squared_distance_to(y, w);
        if d < best.0 {
            second = best;
            best = (d, w);
        } else if d < second.0 {
            second = (d, w);
        }
    }
    Ok((best.1, second.1))
}

/// Stage-1 decoder verdict: either an immediate decision inside a signal
/// protection region, or the two most probable candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    /// `y` lies in the protection region of this message.
    Protection(usize),
    /// The two most probable messages, nearest first.
    Ambiguous(usize, usize),
}

impl std::fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegionLabel::Protection(w) => write!(f, "B{w}"),
            RegionLabel::Ambiguous(w1, w2) => write!(f, "A{w1}-{w2}"),
        }
    }
}

/// Classifies a stage-1 observation.
///
/// Returns `Protection(w)` iff `w` is the nearest point and every pair of
/// the remaining points has absolute distance-difference at most
/// `t * pairwise_distance`. All inequalities are closed; ties resolve toward
/// the smaller index.
pub fn classify_region(y: &[f64], c: &Constellation, t: f64) -> Result<RegionLabel> {
    if !(0.0..=max_protection_threshold() + 1e-12).contains(&t) {
        return Err(Error::invalid(
            "t",
            format!("{t} outside [0, (sqrt(3) - 1)/2]"),
        ));
    }
    let (w1, w2) = two_most_probable(y, c)?;
    let margin = t * c.pairwise_distance();
    let dists: Vec<f64> = (0..c.m())
        .map(|w| c.squared_distance_to(y, w).sqrt())
        .collect();
    let mut protected = true;
    for a in 0..c.m() {
        if a == w1 {
            continue;
        }
        for b in (a + 1)..c.m() {
            if b == w1 {
                continue;
            }
            if (dists[a] - dists[b]).abs() > margin {
                protected = false;
            }
        }
    }
    Ok(if protected {
        RegionLabel::Protection(w1)
    } else {
        RegionLabel::Ambiguous(w1, w2)
    })
}

/// Margin ratio s induced by threshold t, solved in the 2-D face spanned by
/// three constellation points (an equilateral triangle with circumradius
/// rho). The protection lobes meet the neighboring ambiguity lobes at a
/// corner on the bisector of the two nearest points, at distance
/// d4 = (s/2) rho from the face center; at that corner the distance
/// difference to the third point equals t times the pairwise distance.
fn margin_ratio_for_threshold(t: f64) -> Result<f64> {
    // Corner equation in units of rho: (1 + r) - sqrt(r^2 - r + 1) = sqrt(3) t,
    // monotone increasing in r.
    let target = 3.0f64.sqrt() * t;
    let corner = |r: f64| (1.0 + r) - (r * r - r + 1.0).sqrt() - target;
    let root = bracket_and_bisect(corner, 0.0, 0.75, ROOT_TOL)?;
    Ok(2.0 * root.root)
}

/// Inverts the induced margin: returns the threshold t for which the
/// protection regions have corner margin d4 = (s/2) d1.
///
/// The map is independent of M: in every 3-point face the triangle is
/// equilateral and the construction only sees its circumradius.
pub fn protection_margin_s_to_t(_m: usize, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid("s", format!("{s} outside [0, 1]")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let t_max = max_protection_threshold();
    if s == 1.0 {
        return Ok(t_max);
    }
    let f = |t: f64| margin_ratio_for_threshold(t).expect("margin solve") - s;
    let root = bracket_and_bisect(f, 0.0, t_max, ROOT_TOL)?;
    Ok(root.root)
}

/// The characteristic distances of the two-stage scheme at a given energy
/// split, together with the general-M scale for their primed versions.
#[derive(Debug, Clone, Copy)]
pub struct StageDistances {
    /// Stage-1 point-to-center distance, sqrt(lambda E).
    pub d1: f64,
    /// Stage-1 pairwise distance in the M = 3 layout, sqrt(3 lambda E).
    pub d2: f64,
    /// Stage-2 antipodal separation, sqrt(4 (1 - lambda) E).
    pub d3: f64,
    /// Protection margin, (s/2) d1.
    pub d4: f64,
    /// Distance from a signal to the nearest wrong-decision region.
    pub d5: f64,
    /// Miscoordination clearance, (sqrt(3)/2) d4.
    pub d6: f64,
    /// Stage-1 pairwise constellation distance for this M.
    pub d_prime: f64,
    /// Scale applied to d1..d6 for the general-M scheme.
    pub primed_scale: f64,
}

impl StageDistances {
    /// d1..d6 in their general-M primed form.
    pub fn primed(&self) -> [f64; 6] {
        [
            self.d1 * self.primed_scale,
            self.d2 * self.primed_scale,
            self.d3 * self.primed_scale,
            self.d4 * self.primed_scale,
            self.d5 * self.primed_scale,
            self.d6 * self.primed_scale,
        ]
    }
}

/// Computes all characteristic distances for stage-1 energy
/// `lambda * total_energy` and stage-2 energy `(1 - lambda) * total_energy`.
pub fn stage_distances(m: usize, lambda: f64, s: f64, total_energy: f64) -> Result<StageDistances> {
    if m < 2 {
        return Err(Error::invalid("M", format!("{m} < 2")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid("lambda", format!("{lambda} outside (0, 1)")));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid("s", format!("{s} outside [0, 1]")));
    }
    if !(total_energy >= 0.0) {
        return Err(Error::invalid(
            "total_energy",
            format!("{total_energy} < 0"),
        ));
    }
    let e1 = lambda * total_energy;
    let d1 = e1.sqrt();
    let d4 = 0.5 * s * d1;
    let mf = m as f64;
    Ok(StageDistances {
        d1,
        d2: (3.0 * e1).sqrt(),
        d3: (4.0 * (1.0 - lambda) * total_energy).sqrt(),
        d4,
        d5: (d1 * d1 + d4 * d4 - d1 * d4).sqrt(),
        d6: 0.5 * 3.0f64.sqrt() * d4,
        d_prime: (2.0 * e1 * mf / (mf - 1.0)).sqrt(),
        primed_scale: (3.0 * (mf - 1.0) / (2.0 * mf)).sqrt(),
    })
}
