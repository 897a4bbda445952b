//! Random points in polytopes: hit-and-run chains and rejection sampling, and
//! the Monte-Carlo collision estimate built on them.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::HPolyhedron;
use crate::kinematics::Scene;
use crate::{Error, Result};

/// Seeded stream; the same seed always yields the same sequence.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for worker `index` (`seed XOR index`).
    pub fn worker(&self, index: u64) -> RngState {
        RngState::new(self.seed ^ index)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform direction on the unit sphere.
    pub fn direction(&mut self, n: usize) -> DVector<f64> {
        loop {
            let u = DVector::from_fn(n, |_, _| self.normal());
            let norm = u.norm();
            if norm > 1e-12 {
                return u / norm;
            }
        }
    }
}

const MAX_CHORD_ATTEMPTS: usize = 100;

/// `mixing_steps` hit-and-run moves from `x` inside `P`.
pub fn hit_and_run_sample(p: &HPolyhedron, x: &DVector<f64>, rng: &mut RngState, mixing_steps: usize) -> Result<DVector<f64>> {
    crate::geometry::check_dim(p.ambient_dim(), x.len())?;
    if p.max_violation(x) > 1e-9 {
        return Err(Error::OutsidePolytope);
    }
    let mut x = x.clone();
    for _ in 0..mixing_steps {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let u = rng.direction(x.len());
            let (lo, hi) = chord(p, &x, &u)?;
            if hi - lo >= 1e-12 {
                let t = rng.uniform_range(lo, hi);
                x += u * t;
                break;
            }
            if attempts >= MAX_CHORD_ATTEMPTS {
                return Err(Error::DegenerateChord(attempts));
            }
        }
    }
    Ok(x)
}

/// `{t | A(x + tu) ≤ b}` for `x` inside `P`.
fn chord(p: &HPolyhedron, x: &DVector<f64>, u: &DVector<f64>) -> Result<(f64, f64)> {
    let au = p.a() * u;
    let slack = p.b() - p.a() * x;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..au.len() {
        let s = slack[i].max(0.0);
        if au[i] > 1e-300 {
            hi = hi.min(s / au[i]);
        } else if au[i] < -1e-300 {
            lo = lo.max(s / au[i]);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Unbounded);
    }
    Ok((lo, hi))
}

/// Below this acceptance rate (after `REJECTION_PROBE` draws) rejection
/// sampling gives way to hit-and-run.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
const REJECTION_PROBE: u64 = 100_000;

/// Draws points uniformly from a bounded polytope: rejection from the
/// bounding box, or a hit-and-run chain when the polytope fills too little of
/// its box.
#[derive(Debug, Clone)]
pub struct PolytopeSampler<'p> {
    p: &'p HPolyhedron,
    lo: DVector<f64>,
    hi: DVector<f64>,
    mixing_steps: usize,
    draws: u64,
    accepted: u64,
    chain: Option<DVector<f64>>,
}

impl<'p> PolytopeSampler<'p> {
    pub fn new(p: &'p HPolyhedron, mixing_steps: usize) -> Result<Self> {
        let (_, radius) = p.chebyshev_center()?;
        if !(radius > 0.0) {
            return Err(Error::EmptyInterior { radius });
        }
        let (lo, hi) = p.bounding_box()?;
        Ok(PolytopeSampler { p, lo, hi, mixing_steps, draws: 0, accepted: 0, chain: None })
    }

    /// True once the sampler has switched to hit-and-run.
    pub fn using_chain(&self) -> bool {
        self.chain.is_some()
    }

    pub fn next(&mut self, rng: &mut RngState) -> Result<DVector<f64>> {
        loop {
            if let Some(x) = &self.chain {
                let next = hit_and_run_sample(self.p, x, rng, self.mixing_steps.max(1))?;
                self.chain = Some(next.clone());
                return Ok(next);
            }
            let x = DVector::from_fn(self.lo.len(), |i, _| rng.uniform_range(self.lo[i], self.hi[i]));
            self.draws += 1;
            if self.p.max_violation(&x) <= 0.0 {
                self.accepted += 1;
                return Ok(x);
            }
            if self.draws >= REJECTION_PROBE && (self.accepted as f64) < MIN_ACCEPTANCE * self.draws as f64 {
                let (center, _) = self.p.chebyshev_center()?;
                self.chain = Some(center);
            }
        }
    }
}

/// Fraction of `n_samples` uniform points of `P` at which the scene collides.
pub fn estimate_collision_fraction(scene: &Scene, p: &HPolyhedron, n_samples: usize, rng: &mut RngState) -> Result<f64> {
    estimate_collision_fraction_with(scene, p, n_samples, rng, 50)
}

pub fn estimate_collision_fraction_with(
    scene: &Scene,
    p: &HPolyhedron,
    n_samples: usize,
    rng: &mut RngState,
    mixing_steps: usize,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidOptions("need positive sample count".into()));
    }
    crate::geometry::check_dim(scene.num_joints(), p.ambient_dim())?;
    let mut sampler = PolytopeSampler::new(p, mixing_steps)?;
    let mut hits = 0usize;
    for _ in 0..n_samples {
        let q = sampler.next(rng)?;
        if scene.in_collision(q.as_slice())? {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_samples as f64)
}
