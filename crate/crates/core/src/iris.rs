//! The region-growing loop.
//!
//! Each iteration sweeps the collision pairs against the current ellipsoid,
//! starting from the joint-limit box: for every pair, counterexample programs
//! are solved until `max_consecutive_infeasible` of them fail in a row, and
//! every counterexample contributes a normalized hyperplane backed off by the
//! margin `δ`. Extra constraints and configuration-space obstacles are handled
//! in the same sweep. The maximum-volume inscribed ellipsoid of the result
//! becomes the metric for the next sweep.

use alloc::sync::Arc;

use nalgebra::DVector;

use crate::constraints::ConfigConstraint;
use crate::geometry::{HPolyhedron, Hyperellipsoid, Hyperplane};
use crate::kinematics::Scene;
use crate::mvie::{closest_point_in_polytope_metric, max_inscribed_ellipsoid, MvieOptions};
use crate::nlp::{
    build_constraint_counterexample_problem, build_counterexample_problem, default_initial_guess, solve_local,
    SolverOptions,
};
use crate::prelude::*;
use crate::sampling::{hit_and_run_sample, RngState};
use crate::{Error, Result};

/// Upper bound on hyperplanes contributed by a single pair or constraint in
/// one sweep; reaching it ends that pair's searches.
pub const MAX_PLANES_PER_SOURCE: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintRelation {
    /// `g(q) ≤ 0`.
    NonPositive,
    /// `g(q) = 0`, which would collapse the region and is rejected.
    Zero,
}

#[derive(Debug, Clone)]
pub struct ExtraConstraint {
    pub constraint: Arc<dyn ConfigConstraint>,
    pub relation: ConstraintRelation,
}

impl ExtraConstraint {
    pub fn new(constraint: Arc<dyn ConfigConstraint>) -> Self {
        ExtraConstraint { constraint, relation: ConstraintRelation::NonPositive }
    }
}

#[derive(Debug, Clone)]
pub struct IrisOptions {
    /// Configuration-space margin `δ` subtracted from every counterexample plane.
    pub margin: f64,
    /// Radius of the initial ball around the seed.
    pub initial_radius: f64,
    pub iteration_limit: usize,
    /// Stop once the relative growth of `det C̃` falls below this.
    pub termination_threshold: f64,
    /// Stop (returning the previous region) if a sweep excludes the seed.
    pub require_containment: bool,
    pub max_consecutive_infeasible: usize,
    pub rng_seed: u64,
    /// Sweep pairs nearest-first at the seed instead of in scene order.
    pub order_pairs: bool,
    /// Hit-and-run steps per random initial guess.
    pub mixing_steps: usize,
    pub cspace_obstacles: Vec<HPolyhedron>,
    pub extra_constraints: Vec<ExtraConstraint>,
    pub solver: SolverOptions,
    pub mvie: MvieOptions,
}

impl Default for IrisOptions {
    fn default() -> Self {
        IrisOptions {
            margin: 0.01,
            initial_radius: 1e-2,
            iteration_limit: 5,
            termination_threshold: 0.02,
            require_containment: false,
            max_consecutive_infeasible: 1,
            rng_seed: 0,
            order_pairs: true,
            mixing_steps: 50,
            cspace_obstacles: Vec::new(),
            extra_constraints: Vec::new(),
            solver: SolverOptions { feas_tol: 1e-9, ..SolverOptions::default() },
            mvie: MvieOptions::default(),
        }
    }
}

impl IrisOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidOptions(m));
        if !(self.margin >= 0.0) {
            return bad(format!("margin must be nonnegative, got {}", self.margin));
        }
        if !(self.initial_radius > 0.0) {
            return bad(format!("initial radius must be positive, got {}", self.initial_radius));
        }
        if !(self.termination_threshold > 0.0) {
            return bad(format!("growth threshold must be positive, got {}", self.termination_threshold));
        }
        if self.iteration_limit == 0 || self.max_consecutive_infeasible == 0 {
            return bad("iteration limit and max infeasible must be at least 1".into());
        }
        if self.extra_constraints.iter().any(|c| c.relation == ConstraintRelation::Zero) {
            return bad("equality constraints g(q) = 0 are not supported: they collapse the region".into());
        }
        self.mvie.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    pub faces: usize,
    pub planes_added: usize,
    /// `log det C̃` of the iteration's ellipsoid.
    pub log_det: f64,
    pub solves: usize,
    pub infeasible_solves: usize,
    /// Seconds; zero without the `std` feature.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterexampleSource {
    Pair(usize),
    Constraint(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub iteration: usize,
    pub source: CounterexampleSource,
    pub q: DVector<f64>,
    pub plane: Hyperplane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GrowthBelowThreshold,
    IterationLimit,
    /// A sweep excluded the seed; the previous region was returned.
    SeedExcluded,
    /// The ellipsoid would have shrunk; the previous region was returned.
    EllipsoidShrank,
    /// A sweep left no interior; the previous region was returned.
    Collapsed,
    /// One refinement sweep (no ellipsoid iterations).
    Refined,
}

#[derive(Debug, Clone)]
pub struct RegionResult {
    pub polytope: HPolyhedron,
    pub ellipsoid: Hyperellipsoid,
    /// Accepted iterations in order.
    pub stats: Vec<IterationStats>,
    /// Counterexamples of every accepted sweep, in the order found.
    pub counterexamples: Vec<Counterexample>,
    pub termination: Termination,
}

impl RegionResult {
    pub fn log_dets(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.log_det).collect()
    }
}

/// Joint-limit box and the initial ball of radius `ε` around the seed.
pub fn initialize(scene: &Scene, q0: &DVector<f64>, epsilon: f64) -> Result<(HPolyhedron, Hyperellipsoid)> {
    let chain = scene.chain();
    crate::geometry::check_dim(chain.num_joints(), q0.len())?;
    if (0..q0.len()).any(|k| !(chain.lower()[k] < q0[k] && q0[k] < chain.upper()[k])) {
        return Err(Error::SeedOutsideLimits);
    }
    if scene.in_collision(q0.as_slice())? {
        return Err(Error::SeedInCollision);
    }
    let p0 = HPolyhedron::from_bounds(chain.lower(), chain.upper())?;
    let e0 = Hyperellipsoid::ball(q0.clone(), epsilon)?;
    Ok((p0, e0))
}

/// Pair indices sorted by task-space distance at `q0`, ties in scene order.
pub fn order_collision_pairs(scene: &Scene, q0: &DVector<f64>) -> Result<Vec<usize>> {
    let dist: Vec<f64> = (0..scene.pairs().len()).map(|k| scene.pair_distance(q0.as_slice(), k)).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]));
    Ok(order)
}

/// Normalized plane through `q*` along the metric gradient, moved back by
/// `δ` towards the ellipsoid: `a·q* − b = δ`.
pub fn hyperplane_with_margin(e: &Hyperellipsoid, q: &DVector<f64>, delta: f64) -> Result<Hyperplane> {
    let g = e.metric() * (q - e.center());
    let norm = g.norm();
    if !(norm >= 1e-12) {
        return Err(Error::CounterexampleAtCenter);
    }
    let a = g / norm;
    let b = a.dot(q) - delta;
    Ok(Hyperplane::new(a, b))
}

/// Plane tangent to the metric level set through `x`: `a = CᵀC(x−d)`, `b = a·x`.
pub fn tangent_hyperplane(e: &Hyperellipsoid, x: &DVector<f64>) -> Result<Hyperplane> {
    let a = e.metric() * (x - e.center());
    if !(a.norm() > 0.0) {
        return Err(Error::CounterexampleAtCenter);
    }
    let b = a.dot(x);
    Ok(Hyperplane::new(a, b))
}

/// Adds normalized tangent planes until `obstacle` no longer meets the
/// interior of `p`. Returns the number of planes added.
pub fn separate_cspace_obstacle(e: &Hyperellipsoid, p: &mut HPolyhedron, obstacle: &HPolyhedron) -> Result<usize> {
    if obstacle.max_violation(e.center()) <= 0.0 {
        return Err(Error::SeedInsideObstacle);
    }
    let mut added = 0;
    while added < MAX_PLANES_PER_SOURCE {
        let q = obstacle.intersection(p)?;
        let (_, radius) = q.chebyshev_center()?;
        if !(radius > 1e-9) {
            break;
        }
        let Some(x) = closest_point_in_polytope_metric(e, &q)? else { break };
        let plane = tangent_hyperplane(e, &x)?;
        let plane = plane.normalized().ok_or(Error::CounterexampleAtCenter)?;
        p.push(&plane)?;
        added += 1;
    }
    Ok(added)
}

/// Output of one hyperplane sweep.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub polytope: HPolyhedron,
    pub solves: usize,
    pub infeasible_solves: usize,
    pub planes_added: usize,
    pub counterexamples: Vec<Counterexample>,
}

/// Random configuration in `p` by continuing a hit-and-run chain (restarted
/// at the Chebyshev center when the last point was cut away).
fn random_configuration(p: &HPolyhedron, chain: &mut Option<DVector<f64>>, rng: &mut RngState, steps: usize) -> Result<Option<DVector<f64>>> {
    let start = match chain.take() {
        Some(x) if p.max_violation(&x) < 0.0 => x,
        _ => {
            let (c, r) = p.chebyshev_center()?;
            if !(r > 0.0) {
                return Ok(None);
            }
            c
        }
    };
    let x = hit_and_run_sample(p, &start, rng, steps)?;
    *chain = Some(x.clone());
    Ok(Some(x))
}

/// One sweep of counterexample searches against the metric `e`, starting
/// from `p0`: the given pairs in order, then every extra constraint, then
/// every configuration-space obstacle.
pub fn add_separating_hyperplanes(
    e: &Hyperellipsoid,
    pairs: &[usize],
    p0: &HPolyhedron,
    scene: &Scene,
    opts: &IrisOptions,
    rng: &mut RngState,
    iteration: usize,
) -> Result<Sweep> {
    sweep_planes(e, pairs, p0, scene, opts, rng, iteration, None)
}

/// A colliding point exactly at the metric center has no gradient direction;
/// with an `anchor` (a known free configuration) the plane is taken normal to
/// `q* − anchor` instead.
#[allow(clippy::too_many_arguments)]
fn sweep_planes(
    e: &Hyperellipsoid,
    pairs: &[usize],
    p0: &HPolyhedron,
    scene: &Scene,
    opts: &IrisOptions,
    rng: &mut RngState,
    iteration: usize,
    anchor: Option<&DVector<f64>>,
) -> Result<Sweep> {
    let n = scene.num_joints();
    let mut sweep = Sweep {
        polytope: p0.clone(),
        solves: 0,
        infeasible_solves: 0,
        planes_added: 0,
        counterexamples: Vec::new(),
    };
    let mut chain = None;
    let sources = pairs
        .iter()
        .map(|&k| CounterexampleSource::Pair(k))
        .chain((0..opts.extra_constraints.len()).map(CounterexampleSource::Constraint));
    for source in sources {
        let mut failures = 0;
        let mut found = 0;
        while failures < opts.max_consecutive_infeasible && found < MAX_PLANES_PER_SOURCE {
            let p = &sweep.polytope;
            let random_q = if failures == 0 {
                None
            } else {
                match random_configuration(p, &mut chain, rng, opts.mixing_steps)? {
                    Some(q) => Some(q),
                    None => break,
                }
            };
            let outcome = match source {
                CounterexampleSource::Pair(k) => {
                    let problem = build_counterexample_problem(scene, k, e, p)?;
                    let mut guess = default_initial_guess(scene, k, e.center())?;
                    if let Some(q) = &random_q {
                        guess.rows_mut(0, n).copy_from(q);
                    }
                    solve_local(&problem, &guess, &opts.solver)?
                }
                CounterexampleSource::Constraint(k) => {
                    let g = opts.extra_constraints[k].constraint.as_ref();
                    let problem = build_constraint_counterexample_problem(g, e, p)?;
                    let guess = random_q.unwrap_or_else(|| {
                        let c = scene.chain();
                        DVector::from_fn(n, |j, _| e.center()[j].clamp(c.lower()[j], c.upper()[j]))
                    });
                    solve_local(&problem, &guess, &opts.solver)?
                }
            };
            sweep.solves += 1;
            match outcome.feasible_point(opts.solver.feas_tol) {
                Some(x) => {
                    let q = x.rows(0, n).into_owned();
                    let plane = match hyperplane_with_margin(e, &q, opts.margin) {
                        Err(Error::CounterexampleAtCenter) => {
                            let dir = center_cut_direction(&q, anchor)?;
                            let b = dir.dot(&q) - opts.margin;
                            Hyperplane::new(dir, b)
                        }
                        plane => plane?,
                    };
                    sweep.polytope.push(&plane)?;
                    sweep.planes_added += 1;
                    sweep.counterexamples.push(Counterexample { iteration, source, q, plane });
                    failures = 0;
                    found += 1;
                }
                None => {
                    failures += 1;
                    sweep.infeasible_solves += 1;
                }
            }
        }
    }
    for obstacle in &opts.cspace_obstacles {
        sweep.planes_added += separate_cspace_obstacle(e, &mut sweep.polytope, obstacle)?;
    }
    Ok(sweep)
}

fn center_cut_direction(q: &DVector<f64>, anchor: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    let dir = q - anchor.ok_or(Error::CounterexampleAtCenter)?;
    let norm = dir.norm();
    if !(norm >= 1e-12) {
        return Err(Error::CounterexampleAtCenter);
    }
    Ok(dir / norm)
}

#[cfg(feature = "std")]
struct Clock(std::time::Instant);

#[cfg(feature = "std")]
impl Clock {
    fn start() -> Self {
        Clock(std::time::Instant::now())
    }

    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[cfg(not(feature = "std"))]
struct Clock;

#[cfg(not(feature = "std"))]
impl Clock {
    fn start() -> Self {
        Clock
    }

    fn seconds(&self) -> f64 {
        0.0
    }
}

fn check_seed(q0: &DVector<f64>, opts: &IrisOptions) -> Result<()> {
    for (k, c) in opts.extra_constraints.iter().enumerate() {
        if c.constraint.evaluate(q0)?.0 > 0.0 {
            return Err(Error::SeedViolatesConstraint(k));
        }
    }
    if opts.cspace_obstacles.iter().any(|o| o.max_violation(q0) <= 0.0) {
        return Err(Error::SeedInsideObstacle);
    }
    Ok(())
}

/// Grows a region around `q0`.
pub fn iris_np(scene: &Scene, q0: &DVector<f64>, opts: &IrisOptions) -> Result<RegionResult> {
    opts.validate()?;
    let (p0, e0) = initialize(scene, q0, opts.initial_radius)?;
    check_seed(q0, opts)?;
    let pairs = if opts.order_pairs {
        order_collision_pairs(scene, q0)?
    } else {
        (0..scene.pairs().len()).collect()
    };
    grow(scene, q0, e0, &p0, &pairs, opts)
}

fn grow(
    scene: &Scene,
    q0: &DVector<f64>,
    e0: Hyperellipsoid,
    p0: &HPolyhedron,
    pairs: &[usize],
    opts: &IrisOptions,
) -> Result<RegionResult> {
    let mut rng = RngState::new(opts.rng_seed);
    let mut metric = e0;
    let mut prev_log_det = metric.log_det_shape()?;
    let mut accepted: Option<(HPolyhedron, Hyperellipsoid)> = None;
    let mut stats = Vec::new();
    let mut log = Vec::new();
    let mut termination = Termination::IterationLimit;
    for iteration in 1..=opts.iteration_limit {
        let clock = Clock::start();
        let sweep = sweep_planes(&metric, pairs, p0, scene, opts, &mut rng, iteration, Some(q0))?;
        if opts.require_containment && sweep.polytope.max_violation(q0) > 0.0 {
            if accepted.is_none() {
                return Err(Error::SeedExcluded);
            }
            termination = Termination::SeedExcluded;
            break;
        }
        let ellipsoid = match max_inscribed_ellipsoid(&sweep.polytope, &opts.mvie) {
            Err(Error::EmptyInterior { .. }) if accepted.is_some() => {
                termination = Termination::Collapsed;
                break;
            }
            other => other?,
        };
        let log_det = ellipsoid.log_det_shape()?;
        if accepted.is_some() && log_det < prev_log_det {
            termination = Termination::EllipsoidShrank;
            break;
        }
        stats.push(IterationStats {
            iteration,
            faces: sweep.polytope.num_faces(),
            planes_added: sweep.planes_added,
            log_det,
            solves: sweep.solves,
            infeasible_solves: sweep.infeasible_solves,
            wall_time: clock.seconds(),
        });
        let growth = (log_det - prev_log_det).exp() - 1.0;
        prev_log_det = log_det;
        metric = ellipsoid.clone();
        log.extend(sweep.counterexamples);
        accepted = Some((sweep.polytope, ellipsoid));
        if growth < opts.termination_threshold {
            termination = Termination::GrowthBelowThreshold;
            break;
        }
    }
    let (polytope, ellipsoid) = accepted.ok_or(Error::SeedExcluded)?;
    Ok(RegionResult { polytope, ellipsoid, stats, counterexamples: log, termination })
}

/// Re-checks `pairs` of a changed scene against an existing region: one sweep
/// with the region's ellipsoid as metric, starting from the region's own
/// polytope so every original row is kept. When `fallback` is given and the
/// refined polytope cuts it off, a new region is grown from it inside the
/// original polytope instead. The same happens when the ellipsoid center
/// itself collides with one of `pairs`; without a fallback that case is an
/// error.
pub fn refine_region(
    original: &RegionResult,
    scene: &Scene,
    pairs: &[usize],
    fallback: Option<&DVector<f64>>,
    opts: &IrisOptions,
) -> Result<RegionResult> {
    opts.validate()?;
    if let Some(&k) = pairs.iter().find(|&&k| k >= scene.pairs().len()) {
        return Err(Error::IndexOutOfRange { index: k, len: scene.pairs().len() });
    }
    if let Some(qf) = fallback {
        crate::geometry::check_dim(scene.num_joints(), qf.len())?;
        if scene.in_collision(qf.as_slice())? {
            return Err(Error::SeedInCollision);
        }
    }
    let sweep_opts = IrisOptions { extra_constraints: Vec::new(), cspace_obstacles: Vec::new(), ..opts.clone() };
    let center = original.ellipsoid.center();
    for &k in pairs {
        if scene.pair_distance(center.as_slice(), k)? <= 0.0 {
            // tangent planes around a colliding center cannot keep any interior
            let Some(qf) = fallback else {
                return Err(Error::EllipsoidCenterInCollision);
            };
            let e0 = Hyperellipsoid::ball(qf.clone(), opts.initial_radius)?;
            return grow(scene, qf, e0, &original.polytope, pairs, &sweep_opts);
        }
    }
    let mut rng = RngState::new(opts.rng_seed);
    let clock = Clock::start();
    let sweep = sweep_planes(&original.ellipsoid, pairs, &original.polytope, scene, &sweep_opts, &mut rng, 1, fallback)?;
    if let Some(qf) = fallback {
        if sweep.polytope.max_violation(qf) > 0.0 {
            let e0 = Hyperellipsoid::ball(qf.clone(), opts.initial_radius)?;
            return grow(scene, qf, e0, &original.polytope, pairs, &sweep_opts);
        }
    }
    let ellipsoid = if sweep.planes_added == 0 {
        original.ellipsoid.clone()
    } else {
        max_inscribed_ellipsoid(&sweep.polytope, &opts.mvie)?
    };
    let stats = vec![IterationStats {
        iteration: 1,
        faces: sweep.polytope.num_faces(),
        planes_added: sweep.planes_added,
        log_det: ellipsoid.log_det_shape()?,
        solves: sweep.solves,
        infeasible_solves: sweep.infeasible_solves,
        wall_time: clock.seconds(),
    }];
    Ok(RegionResult {
        polytope: sweep.polytope,
        ellipsoid,
        stats,
        counterexamples: sweep.counterexamples,
        termination: Termination::Refined,
    })
}

/// Grows one region per seed, each treating the earlier regions as
/// configuration-space obstacles so the interiors stay disjoint.
pub fn grow_regions_cover(scene: &Scene, seeds: &[DVector<f64>], opts: &IrisOptions) -> Result<Vec<RegionResult>> {
    let mut regions: Vec<RegionResult> = Vec::new();
    for (k, seed) in seeds.iter().enumerate() {
        if let Some(j) = regions.iter().position(|r| r.polytope.max_violation(seed) <= 0.0) {
            return Err(Error::SeedInsideRegion { seed: k, region: j });
        }
        let mut o = opts.clone();
        o.cspace_obstacles.extend(regions.iter().map(|r| r.polytope.clone()));
        regions.push(iris_np(scene, seed, &o)?);
    }
    Ok(regions)
}
