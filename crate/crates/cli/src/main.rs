use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irisnp::IrisOptions;
use irisnp_cli::commands::{self, OptionFlags};
use irisnp_cli::{load_region, load_scene, load_seeds, save_region, save_text, plot, seeds, CliError, Result};

#[derive(Parser)]
#[command(name = "irisnp", version, about = "Convex collision-free regions in configuration space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Opts {
    /// Configuration-space margin subtracted from every separating plane.
    #[arg(long)]
    margin: Option<f64>,
    /// Consecutive infeasible searches before a pair is considered clear.
    #[arg(long)]
    max_infeasible: Option<usize>,
    /// Ellipsoid iteration limit.
    #[arg(long)]
    iterations: Option<usize>,
    /// Stop when the ellipsoid volume grows by less than this fraction.
    #[arg(long)]
    growth_tol: Option<f64>,
    /// Keep the seed inside every region.
    #[arg(long)]
    require_containment: bool,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep collision pairs in scene order instead of nearest first.
    #[arg(long)]
    unordered: bool,
}

impl Opts {
    fn flags(&self) -> OptionFlags {
        OptionFlags {
            margin: self.margin,
            max_infeasible: self.max_infeasible,
            iterations: self.iterations,
            growth_tol: self.growth_tol,
            require_containment: self.require_containment,
            seed: self.seed,
            unordered: self.unordered,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Grow one region around a seed configuration.
    Generate {
        scene: PathBuf,
        /// Seed configuration, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        config: String,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Estimate the colliding fraction of a region by uniform sampling.
    Certify {
        scene: PathBuf,
        region: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Add planes to an existing region for new obstacles.
    Refine {
        scene: PathBuf,
        region: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Only the last K world obstacles of the scene are new.
        #[arg(long)]
        new_obstacles: Option<usize>,
        /// Grow a fresh region from here if refinement cuts it off.
        #[arg(long, allow_hyphen_values = true)]
        fallback: Option<String>,
        #[command(flatten)]
        opts: Opts,
    },
    /// Grow disjoint regions from a list of seeds.
    Cover {
        scene: PathBuf,
        seeds: PathBuf,
        /// Directory receiving region-0.txt, region-1.txt, ...
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[command(flatten)]
        opts: Opts,
    },
    /// Compare nearest-first and scene-order pair sweeps over random seeds.
    BenchOrdering {
        scene: PathBuf,
        #[arg(long, default_value_t = 20)]
        n_seeds: usize,
        /// CSV output; printed after the table when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        opts: Opts,
    },
    /// Render a two-dimensional slice as SVG.
    Plot {
        scene: PathBuf,
        regions: Vec<PathBuf>,
        /// Comma-separated joint values with '*' for the two free joints.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        slice: String,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { scene, config, out, opts } => {
            let sf = load_scene(&scene)?;
            let q0 = seeds::parse_config(&config, sf.scene.num_joints())?;
            let options = opts.flags().apply(IrisOptions::default());
            let (region, summary) = commands::generate(&sf, &q0, &options)?;
            save_region(&out, &region)?;
            println!("{summary}");
        }
        Command::Certify { scene, region, samples, seed } => {
            let sf = load_scene(&scene)?;
            let rf = load_region(&region)?;
            let report = commands::certify(&sf, &rf.region.polytope, samples, seed, rf.options.mixing_steps)?;
            println!("{report}");
        }
        Command::Refine { scene, region, out, new_obstacles, fallback, opts } => {
            let sf = load_scene(&scene)?;
            let rf = load_region(&region)?;
            let fallback = fallback.map(|f| seeds::parse_config(&f, sf.scene.num_joints())).transpose()?;
            let options = opts.flags().apply(rf.options.apply(IrisOptions::default()));
            let refined = commands::refine(&sf, &rf, new_obstacles, fallback.as_ref(), &options)?;
            save_region(&out, &refined)?;
            println!(
                "faces {} (was {}), planes added {}",
                refined.region.polytope.num_faces(),
                rf.region.polytope.num_faces(),
                refined.region.stats.iter().map(|s| s.planes_added).sum::<usize>()
            );
        }
        Command::Cover { scene, seeds, out_dir, samples, opts } => {
            let sf = load_scene(&scene)?;
            let qs = load_seeds(&seeds, sf.scene.num_joints())?;
            let options = opts.flags().apply(IrisOptions::default());
            let (regions, report) = commands::cover(&sf, &qs, &options, samples)?;
            std::fs::create_dir_all(&out_dir).map_err(|source| CliError::Io { path: out_dir.clone(), source })?;
            for (i, r) in regions.iter().enumerate() {
                save_region(&out_dir.join(format!("region-{i}.txt")), r)?;
            }
            println!("{report}");
        }
        Command::BenchOrdering { scene, n_seeds, csv, opts } => {
            let sf = load_scene(&scene)?;
            let options = opts.flags().apply(IrisOptions::default());
            let report = commands::bench_ordering(&sf, &options, n_seeds, options.rng_seed)?;
            print!("{}", report.table());
            match csv {
                Some(path) => save_text(&path, &report.csv())?,
                None => print!("\n{}", report.csv()),
            }
        }
        Command::Plot { scene, regions, slice, out } => {
            let sf = load_scene(&scene)?;
            let slice = plot::parse_slice(&slice, sf.scene.num_joints())?;
            let regions = regions.iter().map(|p| load_region(p).map(|r| r.region)).collect::<Result<Vec<_>>>()?;
            save_text(&out, &plot::plot_svg(&sf.scene, &regions, &slice)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("irisnp: {}", line.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("irisnp: {}", e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
