//! Region documents. Every float is written with 17 significant digits, so
//! parsing a written file restores the matrices bit for bit. Wall-clock times
//! are left out to keep files reproducible.
//!
//! ```text
//! irisnp-region 1
//! generator irisnp 0.1.0
//! dim 2
//! seed-config 0 0
//! rng-seed 0
//! margin 1.0e-2  ...  (one line per option)
//! termination growth-below-threshold
//! faces 5
//! row a1 a2 b          (one per face)
//! ellipse-c c11 c12    (one per row of C)
//! ellipse-d d1 d2
//! iterations 2
//! iteration k faces planes-added log-det solves infeasible-solves
//! counterexamples 3
//! counterexample k pair|constraint index q1 q2 a1 a2 b
//! ```

use irisnp::iris::{Counterexample, CounterexampleSource, IterationStats, Termination};
use irisnp::{DMatrix, DVector, HPolyhedron, Hyperellipsoid, Hyperplane, IrisOptions, RegionResult};

use crate::error::{CliError, Result};
use crate::text::{fmt_exact, fmt_row, lines, Line};

pub const REGION_HEADER: &str = "irisnp-region 1";

/// Options recorded alongside a region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoredOptions {
    pub margin: f64,
    pub initial_radius: f64,
    pub iteration_limit: usize,
    pub termination_threshold: f64,
    pub max_consecutive_infeasible: usize,
    pub require_containment: bool,
    pub order_pairs: bool,
    pub mixing_steps: usize,
    pub rng_seed: u64,
}

impl StoredOptions {
    pub fn from_options(o: &IrisOptions) -> Self {
        StoredOptions {
            margin: o.margin,
            initial_radius: o.initial_radius,
            iteration_limit: o.iteration_limit,
            termination_threshold: o.termination_threshold,
            max_consecutive_infeasible: o.max_consecutive_infeasible,
            require_containment: o.require_containment,
            order_pairs: o.order_pairs,
            mixing_steps: o.mixing_steps,
            rng_seed: o.rng_seed,
        }
    }

    /// `base` with the recorded fields overwritten.
    pub fn apply(&self, base: IrisOptions) -> IrisOptions {
        IrisOptions {
            margin: self.margin,
            initial_radius: self.initial_radius,
            iteration_limit: self.iteration_limit,
            termination_threshold: self.termination_threshold,
            max_consecutive_infeasible: self.max_consecutive_infeasible,
            require_containment: self.require_containment,
            order_pairs: self.order_pairs,
            mixing_steps: self.mixing_steps,
            rng_seed: self.rng_seed,
            ..base
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegionFile {
    pub generator: String,
    pub seed_config: DVector<f64>,
    pub options: StoredOptions,
    pub region: RegionResult,
}

pub fn generator_version() -> String {
    format!("irisnp {}", env!("CARGO_PKG_VERSION"))
}

pub fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::GrowthBelowThreshold => "growth-below-threshold",
        Termination::IterationLimit => "iteration-limit",
        Termination::SeedExcluded => "seed-excluded",
        Termination::EllipsoidShrank => "ellipsoid-shrank",
        Termination::Collapsed => "collapsed",
        Termination::Refined => "refined",
    }
}

fn termination_from(name: &str) -> Option<Termination> {
    Some(match name {
        "growth-below-threshold" => Termination::GrowthBelowThreshold,
        "iteration-limit" => Termination::IterationLimit,
        "seed-excluded" => Termination::SeedExcluded,
        "ellipsoid-shrank" => Termination::EllipsoidShrank,
        "collapsed" => Termination::Collapsed,
        "refined" => Termination::Refined,
        _ => return None,
    })
}

pub fn write_region(f: &RegionFile) -> String {
    let r = &f.region;
    let o = &f.options;
    let n = r.polytope.ambient_dim();
    let mut out = vec![
        REGION_HEADER.to_string(),
        format!("generator {}", f.generator),
        format!("dim {n}"),
        format!("seed-config {}", fmt_row(f.seed_config.iter().copied())),
        format!("rng-seed {}", o.rng_seed),
        format!("margin {}", fmt_exact(o.margin)),
        format!("initial-radius {}", fmt_exact(o.initial_radius)),
        format!("iteration-limit {}", o.iteration_limit),
        format!("growth-tol {}", fmt_exact(o.termination_threshold)),
        format!("max-infeasible {}", o.max_consecutive_infeasible),
        format!("require-containment {}", o.require_containment),
        format!("order-pairs {}", o.order_pairs),
        format!("mixing-steps {}", o.mixing_steps),
        format!("termination {}", termination_name(r.termination)),
        format!("faces {}", r.polytope.num_faces()),
    ];
    for i in 0..r.polytope.num_faces() {
        let row = r.polytope.a().row(i);
        out.push(format!("row {}", fmt_row(row.iter().copied().chain([r.polytope.b()[i]]))));
    }
    for i in 0..n {
        out.push(format!("ellipse-c {}", fmt_row(r.ellipsoid.c().row(i).iter().copied())));
    }
    out.push(format!("ellipse-d {}", fmt_row(r.ellipsoid.center().iter().copied())));
    out.push(format!("iterations {}", r.stats.len()));
    for s in &r.stats {
        out.push(format!(
            "iteration {} {} {} {} {} {}",
            s.iteration,
            s.faces,
            s.planes_added,
            fmt_exact(s.log_det),
            s.solves,
            s.infeasible_solves
        ));
    }
    out.push(format!("counterexamples {}", r.counterexamples.len()));
    for c in &r.counterexamples {
        let (kind, k) = match c.source {
            CounterexampleSource::Pair(k) => ("pair", k),
            CounterexampleSource::Constraint(k) => ("constraint", k),
        };
        let values = c.q.iter().chain(c.plane.a.iter()).copied().chain([c.plane.b]);
        out.push(format!("counterexample {} {kind} {k} {}", c.iteration, fmt_row(values)));
    }
    out.push(String::new());
    out.join("\n")
}

/// Sequential reader over the document's lines.
struct Cursor<'a> {
    file: &'a str,
    lines: Vec<Line<'a>>,
    next: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, key: &str) -> Result<Line<'a>> {
        let Some(line) = self.lines.get(self.next) else {
            let last = self.lines.last().map_or(1, |l| l.number);
            return Err(CliError::parse(self.file, last, 1, format!("unexpected end of document, expected '{key}'")));
        };
        if line.key() != key {
            return Err(line.error(0, format!("expected '{key}', found '{}'", line.key())));
        }
        self.next += 1;
        Ok(line.clone())
    }

    fn scalar(&mut self, key: &str) -> Result<f64> {
        let line = self.take(key)?;
        line.expect_args(1)?;
        line.number(1)
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let line = self.take(key)?;
        line.expect_args(1)?;
        line.integer(1)
    }

    fn flag(&mut self, key: &str) -> Result<bool> {
        let line = self.take(key)?;
        line.expect_args(1)?;
        match line.tokens[1].text {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(line.error(1, format!("'{key}': expected true or false, found '{other}'"))),
        }
    }

    fn vector(&mut self, key: &str, len: usize) -> Result<Vec<f64>> {
        let line = self.take(key)?;
        line.expect_args(len)?;
        line.numbers(1)
    }
}

pub fn parse_region(file: &str, text: &str) -> Result<RegionFile> {
    let mut cur = Cursor { file, lines: lines(file, text), next: 0 };
    let Some(first) = cur.lines.first() else {
        return Err(CliError::parse(file, 1, 1, format!("empty document, expected header '{REGION_HEADER}'")));
    };
    if first.tokens.iter().map(|t| t.text).collect::<Vec<_>>() != ["irisnp-region", "1"] {
        return Err(first.error(0, format!("expected header '{REGION_HEADER}'")));
    }
    cur.next = 1;
    let gen = cur.take("generator")?;
    let generator = gen.args().iter().map(|t| t.text).collect::<Vec<_>>().join(" ");
    let n = cur.count("dim")?;
    if n == 0 {
        return Err(CliError::parse(file, cur.lines[cur.next - 1].number, 5, "dimension must be positive"));
    }
    let seed_config = DVector::from_vec(cur.vector("seed-config", n)?);
    let rng_line = cur.take("rng-seed")?;
    rng_line.expect_args(1)?;
    let rng_seed = rng_line.tokens[1]
        .text
        .parse()
        .map_err(|_| rng_line.error(1, "'rng-seed': expected an unsigned 64-bit integer"))?;
    let options = StoredOptions {
        margin: cur.scalar("margin")?,
        initial_radius: cur.scalar("initial-radius")?,
        iteration_limit: cur.count("iteration-limit")?,
        termination_threshold: cur.scalar("growth-tol")?,
        max_consecutive_infeasible: cur.count("max-infeasible")?,
        require_containment: cur.flag("require-containment")?,
        order_pairs: cur.flag("order-pairs")?,
        mixing_steps: cur.count("mixing-steps")?,
        rng_seed,
    };
    let term_line = cur.take("termination")?;
    term_line.expect_args(1)?;
    let termination = termination_from(term_line.tokens[1].text)
        .ok_or_else(|| term_line.error(1, format!("unknown termination '{}'", term_line.tokens[1].text)))?;

    let m = cur.count("faces")?;
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for i in 0..m {
        let row = cur.vector("row", n + 1)?;
        for j in 0..n {
            a[(i, j)] = row[j];
        }
        b[i] = row[n];
    }
    let polytope = HPolyhedron::new(a, b)?;
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        let row = cur.vector("ellipse-c", n)?;
        for j in 0..n {
            c[(i, j)] = row[j];
        }
    }
    let d = DVector::from_vec(cur.vector("ellipse-d", n)?);
    let ellipsoid = Hyperellipsoid::new(c, d)?;

    let k = cur.count("iterations")?;
    let mut stats = Vec::with_capacity(k);
    for _ in 0..k {
        let line = cur.take("iteration")?;
        line.expect_args(6)?;
        stats.push(IterationStats {
            iteration: line.integer(1)?,
            faces: line.integer(2)?,
            planes_added: line.integer(3)?,
            log_det: line.number(4)?,
            solves: line.integer(5)?,
            infeasible_solves: line.integer(6)?,
            wall_time: 0.0,
        });
    }
    let k = cur.count("counterexamples")?;
    let mut counterexamples = Vec::with_capacity(k);
    for _ in 0..k {
        let line = cur.take("counterexample")?;
        line.expect_args(3 + 2 * n + 1)?;
        let iteration = line.integer(1)?;
        let index = line.integer(3)?;
        let source = match line.tokens[2].text {
            "pair" => CounterexampleSource::Pair(index),
            "constraint" => CounterexampleSource::Constraint(index),
            other => return Err(line.error(2, format!("unknown counterexample source '{other}'"))),
        };
        let v = line.numbers(4)?;
        counterexamples.push(Counterexample {
            iteration,
            source,
            q: DVector::from_column_slice(&v[..n]),
            plane: Hyperplane::new(DVector::from_column_slice(&v[n..2 * n]), v[2 * n]),
        });
    }
    if let Some(extra) = cur.lines.get(cur.next) {
        return Err(extra.error(0, format!("unexpected '{}' after the last counterexample", extra.key())));
    }
    Ok(RegionFile {
        generator,
        seed_config,
        options,
        region: RegionResult { polytope, ellipsoid, stats, counterexamples, termination },
    })
}
