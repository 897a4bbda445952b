//! The subcommands as library calls. Each returns its artifacts and a report;
//! printing and file IO stay in the binary.

use std::time::Instant;

use irisnp::iris::{grow_regions_cover, iris_np, refine_region, ExtraConstraint};
use irisnp::sampling::{PolytopeSampler, RngState};
use irisnp::{DVector, Error, HPolyhedron, IrisOptions, RegionResult, Scene};

use crate::error::{CliError, Result};
use crate::region_file::{generator_version, termination_name, RegionFile, StoredOptions};
use crate::scene_file::SceneFile;

/// Draws allowed when looking for one collision-free configuration.
pub const MAX_SEED_DRAWS: usize = 1_000_000;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Option flags given on the command line; `None` keeps the base value.
#[derive(Debug, Clone, Default)]
pub struct OptionFlags {
    pub margin: Option<f64>,
    pub max_infeasible: Option<usize>,
    pub iterations: Option<usize>,
    pub growth_tol: Option<f64>,
    pub require_containment: bool,
    pub seed: Option<u64>,
    pub unordered: bool,
}

impl OptionFlags {
    pub fn apply(&self, base: IrisOptions) -> IrisOptions {
        IrisOptions {
            margin: self.margin.unwrap_or(base.margin),
            max_consecutive_infeasible: self.max_infeasible.unwrap_or(base.max_consecutive_infeasible),
            iteration_limit: self.iterations.unwrap_or(base.iteration_limit),
            termination_threshold: self.growth_tol.unwrap_or(base.termination_threshold),
            require_containment: self.require_containment || base.require_containment,
            rng_seed: self.seed.unwrap_or(base.rng_seed),
            order_pairs: base.order_pairs && !self.unordered,
            ..base
        }
    }
}

/// `opts` plus the scene's named constraints.
pub fn with_scene_constraints(sf: &SceneFile, mut opts: IrisOptions) -> IrisOptions {
    opts.extra_constraints.extend(sf.constraints.iter().cloned().map(ExtraConstraint::new));
    opts
}

fn check_dim(scene: &Scene, found: usize) -> Result<()> {
    if scene.num_joints() != found {
        return Err(Error::DimensionMismatch { expected: scene.num_joints(), found }.into());
    }
    Ok(())
}

fn region_file(seed_config: DVector<f64>, opts: &IrisOptions, region: RegionResult) -> RegionFile {
    RegionFile { generator: generator_version(), seed_config, options: StoredOptions::from_options(opts), region }
}

fn violates_constraints(sf: &SceneFile, q: &DVector<f64>) -> Result<bool> {
    for c in &sf.constraints {
        if c.evaluate(q)?.0 > 0.0 {
            return Ok(true);
        }
    }
    Ok(false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSummary {
    pub faces: usize,
    pub iterations: usize,
    pub volume: f64,
    pub wall_time: f64,
    pub termination: &'static str,
}

impl std::fmt::Display for GenerateSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "faces {} iterations {} volume {:.6e} time {:.3} s ({})",
            self.faces, self.iterations, self.volume, self.wall_time, self.termination
        )
    }
}

pub fn generate(sf: &SceneFile, q0: &DVector<f64>, opts: &IrisOptions) -> Result<(RegionFile, GenerateSummary)> {
    check_dim(&sf.scene, q0.len())?;
    let opts = with_scene_constraints(sf, opts.clone());
    let start = Instant::now();
    let region = iris_np(&sf.scene, q0, &opts)?;
    let summary = GenerateSummary {
        faces: region.polytope.num_faces(),
        iterations: region.stats.len(),
        volume: region.ellipsoid.volume()?,
        wall_time: start.elapsed().as_secs_f64(),
        termination: termination_name(region.termination),
    };
    Ok((region_file(q0.clone(), &opts, region), summary))
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // the bounds are exactly 0 and 1 at the extremes; keep roundoff out
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyReport {
    pub samples: usize,
    pub colliding: usize,
    /// Samples violating one of the scene's named constraints.
    pub violating: usize,
    pub fraction: f64,
    pub interval: (f64, f64),
}

impl std::fmt::Display for CertifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "colliding {:.6} ({} of {} samples), 95% interval [{:.6}, {:.6}]",
            self.fraction, self.colliding, self.samples, self.interval.0, self.interval.1
        )?;
        if self.violating > 0 {
            write!(f, ", constraint violations {}", self.violating)?;
        }
        Ok(())
    }
}

/// Uniform samples of the region, checked against the scene.
pub fn certify(sf: &SceneFile, region: &HPolyhedron, samples: usize, seed: u64, mixing_steps: usize) -> Result<CertifyReport> {
    if samples == 0 {
        return Err(CliError::Usage("need positive sample count".into()));
    }
    check_dim(&sf.scene, region.ambient_dim())?;
    let mut sampler = PolytopeSampler::new(region, mixing_steps)?;
    let mut rng = RngState::new(seed);
    let (mut colliding, mut violating) = (0, 0);
    for _ in 0..samples {
        let q = sampler.next(&mut rng)?;
        if sf.scene.in_collision(q.as_slice())? {
            colliding += 1;
        }
        if violates_constraints(sf, &q)? {
            violating += 1;
        }
    }
    Ok(CertifyReport {
        samples,
        colliding,
        violating,
        fraction: colliding as f64 / samples as f64,
        interval: wilson_interval(colliding, samples),
    })
}

/// One refinement sweep against the pairs touching the last `new_obstacles`
/// world geometries, or every pair when `None`.
pub fn refine(
    sf: &SceneFile,
    original: &RegionFile,
    new_obstacles: Option<usize>,
    fallback: Option<&DVector<f64>>,
    opts: &IrisOptions,
) -> Result<RegionFile> {
    let scene = &sf.scene;
    check_dim(scene, original.region.polytope.ambient_dim())?;
    let pairs = match new_obstacles {
        None => (0..scene.pairs().len()).collect(),
        Some(k) => {
            let total = scene.geometries().len();
            let world = total - scene.num_robot_geometries();
            if k > world {
                return Err(CliError::Usage(format!("--new-obstacles {k}: scene has only {world} world obstacles")));
            }
            scene.pairs_involving(&(total - k..total).collect::<Vec<_>>())
        }
    };
    let opts = with_scene_constraints(sf, opts.clone());
    let region = refine_region(&original.region, scene, &pairs, fallback, &opts)?;
    let seed = fallback.cloned().unwrap_or_else(|| original.seed_config.clone());
    Ok(region_file(seed, &opts, region))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverReport {
    pub samples: usize,
    /// Fraction of limit-box samples that are free and inside some region.
    pub coverage: f64,
    /// The same fraction for each region alone.
    pub per_region: Vec<f64>,
    /// Region volumes estimated from the same samples.
    pub volumes: Vec<f64>,
    pub box_volume: f64,
}

impl std::fmt::Display for CoverReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "regions {} coverage {:.4} ({} samples)", self.per_region.len(), self.coverage, self.samples)
    }
}

fn limit_box_sample(scene: &Scene, rng: &mut RngState) -> DVector<f64> {
    let chain = scene.chain();
    DVector::from_fn(scene.num_joints(), |i, _| rng.uniform_range(chain.lower()[i], chain.upper()[i]))
}

/// Monte-Carlo coverage of the joint-limit box by `regions`.
pub fn coverage(scene: &Scene, regions: &[&HPolyhedron], samples: usize, seed: u64) -> Result<CoverReport> {
    if samples == 0 {
        return Err(CliError::Usage("need positive sample count".into()));
    }
    let chain = scene.chain();
    let box_volume: f64 = chain.lower().iter().zip(chain.upper()).map(|(l, u)| u - l).product();
    let mut rng = RngState::new(seed);
    let mut covered = 0usize;
    let mut free_inside = vec![0usize; regions.len()];
    let mut inside = vec![0usize; regions.len()];
    for _ in 0..samples {
        let q = limit_box_sample(scene, &mut rng);
        let hits: Vec<bool> = regions.iter().map(|p| p.contains(&q, 0.0)).collect::<irisnp::Result<_>>()?;
        if !hits.iter().any(|&h| h) {
            continue;
        }
        let free = !scene.in_collision(q.as_slice())?;
        for (i, &h) in hits.iter().enumerate() {
            inside[i] += h as usize;
            free_inside[i] += (h && free) as usize;
        }
        covered += free as usize;
    }
    let frac = |k: usize| k as f64 / samples as f64;
    Ok(CoverReport {
        samples,
        coverage: frac(covered),
        per_region: free_inside.into_iter().map(frac).collect(),
        volumes: inside.into_iter().map(|k| frac(k) * box_volume).collect(),
        box_volume,
    })
}

pub fn cover(sf: &SceneFile, seeds: &[DVector<f64>], opts: &IrisOptions, samples: usize) -> Result<(Vec<RegionFile>, CoverReport)> {
    if samples == 0 {
        return Err(CliError::Usage("need positive sample count".into()));
    }
    for s in seeds {
        check_dim(&sf.scene, s.len())?;
    }
    let opts = with_scene_constraints(sf, opts.clone());
    let regions = grow_regions_cover(&sf.scene, seeds, &opts)?;
    let report = coverage(&sf.scene, &regions.iter().map(|r| &r.polytope).collect::<Vec<_>>(), samples, opts.rng_seed)?;
    let files = seeds.iter().zip(regions).map(|(s, r)| region_file(s.clone(), &opts, r)).collect();
    Ok((files, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub mode: &'static str,
    pub mean_faces: f64,
    pub sd_faces: f64,
    pub mean_time: f64,
    pub sd_time: f64,
    pub max_volume: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub seeds: Vec<DVector<f64>>,
    /// Ordered first, then unordered.
    pub rows: [BenchRow; 2],
}

pub const BENCH_CSV_HEADER: &str = "mode,mean_faces,sd_faces,mean_time,sd_time,max_volume,n_seeds";

impl BenchReport {
    pub fn csv(&self) -> String {
        let mut out = String::from(BENCH_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.mode, r.mean_faces, r.sd_faces, r.mean_time, r.sd_time, r.max_volume, r.n_seeds
            ));
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>16} {:>22} {:>14} {:>7}\n",
            "mode", "faces", "time (s)", "max volume", "seeds"
        );
        for r in &self.rows {
            let faces = format!("{:.2} ± {:.2}", r.mean_faces, r.sd_faces);
            let time = format!("{:.4} ± {:.4}", r.mean_time, r.sd_time);
            out.push_str(&format!("{:<10} {:>16} {:>22} {:>14.6e} {:>7}\n", r.mode, faces, time, r.max_volume, r.n_seeds));
        }
        out
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() < 2 { 0.0 } else { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
    (mean, sd)
}

/// A uniform collision-free configuration of the limit box that also
/// satisfies the scene's named constraints.
pub fn sample_free_configuration(sf: &SceneFile, rng: &mut RngState) -> Result<DVector<f64>> {
    for _ in 0..MAX_SEED_DRAWS {
        let q = limit_box_sample(&sf.scene, rng);
        if !sf.scene.in_collision(q.as_slice())? && !violates_constraints(sf, &q)? {
            return Ok(q);
        }
    }
    Err(CliError::Domain(format!("no collision-free configuration found in {MAX_SEED_DRAWS} draws")))
}

/// Grows a region from `n_seeds` random free configurations with and without
/// nearest-first pair ordering. Both modes use the same options and rng seed;
/// which mode runs first alternates between seeds.
pub fn bench_ordering(sf: &SceneFile, opts: &IrisOptions, n_seeds: usize, rng_seed: u64) -> Result<BenchReport> {
    if n_seeds == 0 {
        return Err(CliError::Usage("need a positive number of seeds".into()));
    }
    let opts = with_scene_constraints(sf, opts.clone());
    let mut rng = RngState::new(rng_seed);
    let seeds = (0..n_seeds).map(|_| sample_free_configuration(sf, &mut rng)).collect::<Result<Vec<_>>>()?;
    // [mode][seed] -> (faces, seconds, volume)
    let mut runs = [Vec::new(), Vec::new()];
    for (k, q) in seeds.iter().enumerate() {
        let modes = if k % 2 == 0 { [0, 1] } else { [1, 0] };
        for mode in modes {
            let o = IrisOptions { order_pairs: mode == 0, ..opts.clone() };
            let start = Instant::now();
            let r = iris_np(&sf.scene, q, &o)?;
            let seconds = start.elapsed().as_secs_f64();
            runs[mode].push((r.polytope.num_faces() as f64, seconds, r.ellipsoid.volume()?));
        }
    }
    let row = |mode: usize, name: &'static str| {
        let faces: Vec<f64> = runs[mode].iter().map(|r| r.0).collect();
        let times: Vec<f64> = runs[mode].iter().map(|r| r.1).collect();
        let (mean_faces, sd_faces) = mean_sd(&faces);
        let (mean_time, sd_time) = mean_sd(&times);
        BenchRow {
            mode: name,
            mean_faces,
            sd_faces,
            mean_time,
            sd_time,
            max_volume: runs[mode].iter().map(|r| r.2).fold(0.0, f64::max),
            n_seeds,
        }
    };
    Ok(BenchReport { rows: [row(0, "ordered"), row(1, "unordered")], seeds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_matches_closed_forms() {
        let n = 10_000;
        let (lo, hi) = wilson_interval(0, n);
        assert_eq!(lo, 0.0);
        let z2 = Z95 * Z95;
        assert!((hi - z2 / (n as f64 + z2)).abs() < 1e-15);
        // symmetric around 1/2 at k = n/2
        let (lo, hi) = wilson_interval(n / 2, n);
        assert!((lo + hi - 1.0).abs() < 1e-12);
        assert!((hi - lo - 2.0 * Z95 * 0.5 / (n as f64 + z2).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn flags_override_only_what_is_given() {
        let base = IrisOptions { margin: 0.3, ..IrisOptions::default() };
        let o = OptionFlags { iterations: Some(9), unordered: true, ..OptionFlags::default() }.apply(base);
        assert_eq!((o.margin, o.iteration_limit, o.order_pairs), (0.3, 9, false));
    }

    #[test]
    fn sample_sd_uses_n_minus_one() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_sd(&[7.0]), (7.0, 0.0));
    }
}
