//! Sequential-Monte-Carlo PHD filter over true targets.
//!
//! The intensity is carried by weighted particles whose total weight is the
//! expected number of targets. Births are drawn uniformly over a supplied
//! region (the agent's footprint) with a Gaussian velocity prior.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{gaussian_range_bearing, wrap_angle, KinematicState, Label, Measurement, MotionModel, Position, Rect, SensorModel};

/// Squared normalised residual beyond which a likelihood term is treated as zero.
const GATE_SQ: f64 = 100.0;

const KMEANS_MAX_ITERS: usize = 25;
/// Centres moving less than this (m) count as converged.
const KMEANS_TOL: f64 = 1e-2;
const KMEANS_SEED: u64 = 0x5a7_c1u64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhdParams {
    /// Expected number of births per step.
    pub birth_rate: f64,
    pub birth_particles: usize,
    /// Particles per unit of expected target count after resampling.
    pub particles_per_target: f64,
    /// Per-axis standard deviation of the birth velocity prior (m/s).
    pub birth_velocity_std: f64,
}

impl Default for PhdParams {
    fn default() -> Self {
        Self {
            birth_rate: 1.0,
            birth_particles: 300,
            particles_per_target: 1000.0,
            birth_velocity_std: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub state: KinematicState,
    pub weight: f64,
}

impl Particle {
    pub fn new(state: KinematicState, weight: f64) -> Self {
        Self { state, weight }
    }
}

/// Particle approximation of the true-target intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticlePhd {
    particles: Vec<Particle>,
    params: PhdParams,
}

impl ParticlePhd {
    pub fn new(params: PhdParams) -> Self {
        Self { particles: Vec::new(), params }
    }

    pub fn with_particles(params: PhdParams, particles: Vec<Particle>) -> Self {
        debug_assert!(particles.iter().all(|p| p.state.label == Label::True && p.weight >= 0.0));
        Self { particles, params }
    }

    pub fn params(&self) -> &PhdParams {
        &self.params
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Expected number of targets.
    pub fn mass(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    pub fn mass_in(&self, region: &Rect) -> f64 {
        self.particles
            .iter()
            .filter(|p| region.contains(&p.state.position()))
            .map(|p| p.weight)
            .sum()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    /// Replaces the weights, keeping the support.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.particles.len() {
            return Err(Error::SupportMismatch(self.particles.len(), weights.len()));
        }
        let particles = self
            .particles
            .iter()
            .zip(weights)
            .map(|(p, &w)| Particle::new(p.state, w))
            .collect();
        Ok(Self { particles, params: self.params })
    }

    /// Drops particles whose position falls outside `region`.
    pub fn retain_within(&mut self, region: &Rect) {
        self.particles.retain(|p| region.contains(&p.state.position()));
    }

    pub fn clear(&mut self) {
        self.particles.clear();
    }

    /// Survival and motion part of the prediction.
    pub fn propagate_survivors<R: Rng + ?Sized>(&mut self, motion: &MotionModel, rng: &mut R) {
        let ps = motion.survival();
        for p in &mut self.particles {
            let next = motion.sample_next(&p.state.as_array(), rng);
            p.state = KinematicState::from_array(next, Label::True);
            p.weight *= ps;
        }
    }

    /// Birth part of the prediction: `birth_particles` particles sharing `birth_rate`.
    pub fn add_births<R: Rng + ?Sized>(&mut self, support: &Rect, rng: &mut R) {
        let n = self.params.birth_particles;
        if n == 0 || self.params.birth_rate <= 0.0 {
            return;
        }
        let w = self.params.birth_rate / n as f64;
        let sv = self.params.birth_velocity_std;
        self.particles.reserve(n);
        for _ in 0..n {
            let p = support.sample_uniform(rng);
            let vx: f64 = sv * rng.sample::<f64, _>(StandardNormal);
            let vy: f64 = sv * rng.sample::<f64, _>(StandardNormal);
            self.particles.push(Particle::new(KinematicState::target(p.x, vx, p.y, vy), w));
        }
    }
}

/// PHD prediction: survivors are propagated and down-weighted by the survival
/// probability, then births are appended over `birth_support` if given.
pub fn phd_predict<R: Rng + ?Sized>(
    phd: &ParticlePhd,
    motion: &MotionModel,
    birth_support: Option<&Rect>,
    rng: &mut R,
) -> ParticlePhd {
    let mut out = phd.clone();
    out.propagate_survivors(motion, rng);
    if let Some(region) = birth_support {
        out.add_births(region, rng);
    }
    out
}

/// PHD update with measurement set `z` taken from agent position `s`.
pub fn phd_update(
    phd: &ParticlePhd,
    z: &[Measurement],
    s: Position,
    sensor: &SensorModel,
) -> Result<ParticlePhd> {
    let w = updated_weights(phd.particles(), z, s, sensor)?;
    phd.with_weights(&w)
}

struct Visible {
    index: usize,
    pd: f64,
    dx: f64,
    dy: f64,
    /// Noiseless image with its range and bearing deviations, computed on first use.
    image: Option<(Measurement, f64, f64)>,
}

/// Posterior weights of the PHD update, without touching the particle states.
pub(crate) fn updated_weights(
    particles: &[Particle],
    z: &[Measurement],
    s: Position,
    sensor: &SensorModel,
) -> Result<Vec<f64>> {
    let mut weights: Vec<f64> = particles.iter().map(|p| p.weight).collect();
    for (index, w) in updated_visible_weights(particles, z, s, sensor)? {
        weights[index] = w;
    }
    Ok(weights)
}

/// `(index, posterior weight)` of every particle inside the sensing square at
/// `s`; all other particles keep their weight.
pub(crate) fn updated_visible_weights(
    particles: &[Particle],
    z: &[Measurement],
    s: Position,
    sensor: &SensorModel,
) -> Result<Vec<(usize, f64)>> {
    let visible: Vec<Visible> = particles
        .iter()
        .enumerate()
        .filter_map(|(index, p)| {
            let pos = p.state.position();
            let pd = sensor.detection_probability_at(pos, s);
            (pd > 0.0).then(|| Visible { index, pd, dx: pos.x - s.x, dy: pos.y - s.y, image: None })
        })
        .collect();
    if visible.is_empty() {
        return Ok(Vec::new());
    }
    let mut visible = visible;

    // Cheap conservative bearing gate: the bearing noise is largest at the far
    // corner of the square, so a pair whose angle exceeds the gate there is
    // outside the exact gate too, and needs no trigonometry.
    let max_gate = GATE_SQ.sqrt() * sensor.bearing_std(sensor.side / 2.0 * std::f64::consts::SQRT_2);
    let tan_gate = (max_gate < std::f64::consts::FRAC_PI_2).then(|| max_gate.tan());

    let mut gain = vec![0.0; visible.len()];
    let mut terms = vec![0.0; visible.len()];
    for (zi, meas) in z.iter().enumerate() {
        let (sin_z, cos_z) = meas.bearing.sin_cos();
        let mut tau = 0.0;
        for (t, v) in terms.iter_mut().zip(visible.iter_mut()) {
            *t = 0.0;
            if let Some(tan_gate) = tan_gate {
                let dot = v.dx * cos_z + v.dy * sin_z;
                let cross = cos_z * v.dy - sin_z * v.dx;
                if dot <= 0.0 || cross.abs() > tan_gate * dot {
                    continue;
                }
            }
            let (image, range_std, bearing_std) = *v.image.get_or_insert_with(|| {
                let image = Measurement { range: (v.dx * v.dx + v.dy * v.dy).sqrt(), bearing: v.dy.atan2(v.dx) };
                (image, sensor.range_std(image.range), sensor.bearing_std(image.range))
            });
            let dr = (meas.range - image.range) / range_std;
            let db = wrap_angle(meas.bearing - image.bearing) / bearing_std;
            if dr * dr <= GATE_SQ && db * db <= GATE_SQ {
                *t = v.pd * gaussian_range_bearing(meas, &image, range_std, bearing_std) * particles[v.index].weight;
            }
            tau += *t;
        }
        let denom = sensor.clutter_intensity(meas) + tau;
        if denom <= 0.0 {
            if tau > 0.0 || terms.iter().any(|t| *t > 0.0) {
                return Err(Error::InconsistentClutter { index: zi });
            }
            continue;
        }
        for (g, t) in gain.iter_mut().zip(&terms) {
            *g += t / denom;
        }
    }
    Ok(visible
        .iter()
        .zip(&gain)
        .map(|(v, g)| (v.index, particles[v.index].weight * (1.0 - v.pd) + g))
        .collect())
}

/// Cardinality and state estimate extracted from a PHD.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub count: usize,
    pub states: Vec<KinematicState>,
}

/// Rounds the mass inside `region` (everywhere if `None`) to the nearest integer and
/// places that many states at the centres of a weighted k-means clustering.
pub fn phd_estimate(phd: &ParticlePhd, region: Option<&Rect>) -> Estimate {
    let selected: Vec<&Particle> = phd
        .particles()
        .iter()
        .filter(|p| region.is_none_or(|r| r.contains(&p.state.position())))
        .collect();
    let mass: f64 = selected.iter().map(|p| p.weight).sum();
    let count = mass.round().max(0.0) as usize;
    if count == 0 {
        return Estimate { count: 0, states: Vec::new() };
    }
    let states = weighted_kmeans(&selected, count);
    Estimate { count, states }
}

fn weighted_mean(particles: &[&Particle], members: impl Iterator<Item = usize>) -> Option<[f64; 4]> {
    let mut acc = [0.0; 4];
    let mut total = 0.0;
    for i in members {
        let p = particles[i];
        let v = p.state.as_array();
        for d in 0..4 {
            acc[d] += p.weight * v[d];
        }
        total += p.weight;
    }
    (total > 0.0).then(|| acc.map(|a| a / total))
}

fn weighted_kmeans(particles: &[&Particle], k: usize) -> Vec<KinematicState> {
    let n = particles.len();
    if n == 0 {
        return Vec::new();
    }
    if k == 1 {
        let mean = weighted_mean(particles, 0..n).unwrap_or_else(|| particles[0].state.as_array());
        return vec![KinematicState::from_array(mean, Label::True)];
    }
    let k = k.min(n);
    let pos: Vec<Position> = particles.iter().map(|p| p.state.position()).collect();
    let w: Vec<f64> = particles.iter().map(|p| p.weight).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(KMEANS_SEED);
    let mut centers = kmeans_pp_init(&pos, &w, k, &mut rng);
    let mut assign = vec![0usize; n];
    for _ in 0..KMEANS_MAX_ITERS {
        for (a, p) in assign.iter_mut().zip(&pos) {
            *a = nearest_center(p, &centers).0;
        }
        let mut sums = vec![(0.0, 0.0, 0.0); k];
        for i in 0..n {
            let s = &mut sums[assign[i]];
            s.0 += w[i] * pos[i].x;
            s.1 += w[i] * pos[i].y;
            s.2 += w[i];
        }
        let mut shift: f64 = 0.0;
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s.2 > 0.0 {
                let next = Position::new(s.0 / s.2, s.1 / s.2);
                shift = shift.max(next.distance(c));
                *c = next;
            }
        }
        if shift < KMEANS_TOL {
            break;
        }
    }
    for (a, p) in assign.iter_mut().zip(&pos) {
        *a = nearest_center(p, &centers).0;
    }
    (0..k)
        .map(|c| {
            let mean = weighted_mean(particles, (0..n).filter(|&i| assign[i] == c));
            match mean {
                Some(m) => KinematicState::from_array(m, Label::True),
                None => KinematicState::target(centers[c].x, 0.0, centers[c].y, 0.0),
            }
        })
        .collect()
}

fn nearest_center(p: &Position, centers: &[Position]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = (p.x - c.x).powi(2) + (p.y - c.y).powi(2);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn kmeans_pp_init<R: Rng + ?Sized>(pos: &[Position], w: &[f64], k: usize, rng: &mut R) -> Vec<Position> {
    let n = pos.len();
    let total: f64 = w.iter().sum();
    let first = pick_weighted(w, total, rng);
    let mut centers = vec![pos[first]];
    let mut d2: Vec<f64> = pos
        .iter()
        .map(|p| (p.x - pos[first].x).powi(2) + (p.y - pos[first].y).powi(2))
        .collect();
    while centers.len() < k {
        let score: Vec<f64> = (0..n).map(|i| w[i] * d2[i]).collect();
        let s: f64 = score.iter().sum();
        let next = if s > 0.0 { pick_weighted(&score, s, rng) } else { pick_weighted(w, total, rng) };
        let c = pos[next];
        centers.push(c);
        for (d, p) in d2.iter_mut().zip(pos) {
            *d = d.min((p.x - c.x).powi(2) + (p.y - c.y).powi(2));
        }
    }
    centers
}

fn pick_weighted<R: Rng + ?Sized>(w: &[f64], total: f64, rng: &mut R) -> usize {
    if total <= 0.0 {
        return rng.random_range(0..w.len());
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, x) in w.iter().enumerate() {
        acc += x;
        if acc > target {
            return i;
        }
    }
    w.len() - 1
}

/// Systematic resampling to `⌈ρ·M⌉` equally weighted particles, preserving the mass `M`.
pub fn resample<R: Rng + ?Sized>(phd: &ParticlePhd, particles_per_target: f64, rng: &mut R) -> ParticlePhd {
    let mass = phd.mass();
    if !(mass > 0.0) || phd.is_empty() {
        return ParticlePhd::new(phd.params);
    }
    // Guard the ceiling against summation round-off (e.g. 2.0000000000000004).
    let n = ((particles_per_target * mass - 1e-9).ceil() as usize).max(1);
    let w = mass / n as f64;
    let step = mass / n as f64;
    let mut u = rng.random::<f64>() * step;
    let src = phd.particles();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    let mut cum = src[0].weight;
    for _ in 0..n {
        while cum < u && i + 1 < src.len() {
            i += 1;
            cum += src[i].weight;
        }
        out.push(Particle::new(src[i].state, w));
        u += step;
    }
    ParticlePhd { particles: out, params: phd.params }
}
