//! End-to-end runs of the `irisnp` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use irisnp_cli::{load_region, parse_region};

const ONE_LINK: &str = "irisnp-scene 1\nlengths 1\nlower -pi\nupper pi\nrobot 1 point 0 0\nworld disk 0 1 0.1\n";
const ONE_LINK_FREE: &str = "irisnp-scene 1\nlengths 1\nlower -pi\nupper pi\nrobot 1 point 0 0\n";
const FREE_BOX: &str = "irisnp-scene 1\nlengths 1 1\nlower -2 -1.5\nupper 2.5 1\nrobot 1 rectangle -1 -0.05 0 0.05\nrobot 2 rectangle -1 -0.05 0 0.05\n";
const TWO_LINK: &str = "irisnp-scene 1
lengths 1 1
lower -pi -pi
upper pi pi
robot 1 rectangle -1 -0.05 0 0.05
robot 2 rectangle -1 -0.05 0 0.05
world disk 1.2 1.0 0.3
world disk -1.0 -1.2 0.4
world disk 0.2 -1.6 0.25
pairs auto
";

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let p = self.0.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irisnp")).args(args.iter().map(|a| a.as_ref())).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Exit code and the single diagnostic line of a failed run.
fn failure(o: &Output) -> (i32, String) {
    let err = String::from_utf8_lossy(&o.stderr).into_owned();
    assert_eq!(err.trim_end().lines().count(), 1, "expected one diagnostic line, got {err:?}");
    (o.status.code().unwrap(), err.trim_end().to_string())
}

fn number_after(text: &str, key: &str) -> f64 {
    let rest = &text[text.find(key).unwrap_or_else(|| panic!("'{key}' in {text}")) + key.len()..];
    rest.split_whitespace().next().unwrap().trim_end_matches(',').parse().unwrap()
}

/// `(lo, hi)` from "interval [lo, hi]".
fn interval(text: &str) -> (f64, f64) {
    let inside = &text[text.find('[').unwrap() + 1..text.find(']').unwrap()];
    let (lo, hi) = inside.split_once(',').unwrap();
    (lo.trim().parse().unwrap(), hi.trim().parse().unwrap())
}

fn generate(dir: &Dir, scene: &Path, config: &str, out: &str, extra: &[&str]) -> Output {
    let out = dir.path(out);
    let mut args: Vec<&dyn AsRef<std::ffi::OsStr>> = vec![&"generate", &scene, &"--config", &config, &"-o", &out];
    for e in extra {
        args.push(e);
    }
    run(&args)
}

#[test]
fn generate_on_free_box_keeps_only_the_limit_rows() {
    let d = Dir::new();
    let scene = d.file("free.scene", FREE_BOX);
    let o = generate(&d, &scene, "0,0", "r.txt", &[]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("faces 4 iterations"));
    let r = load_region(&d.path("r.txt")).unwrap();
    assert_eq!(r.region.polytope.num_faces(), 4);
    let mut rows: Vec<(Vec<f64>, f64)> = r.region.polytope.faces().map(|h| (h.a.as_slice().to_vec(), h.b)).collect();
    rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(
        rows,
        vec![(vec![-1.0, 0.0], 2.0), (vec![0.0, -1.0], 1.5), (vec![0.0, 1.0], 1.0), (vec![1.0, 0.0], 2.5)]
    );
}

#[test]
fn generate_one_link_upper_bound() {
    let d = Dir::new();
    let scene = d.file("one.scene", ONE_LINK);
    let o = generate(&d, &scene, "0", "r.txt", &[]);
    assert!(o.status.success());
    let summary = stdout(&o);
    for key in ["faces", "iterations", "volume", "time"] {
        assert!(summary.contains(key), "{summary}");
    }
    let r = load_region(&d.path("r.txt")).unwrap();
    // tip within 0.1 of (0, 1) starts at θ = π/2 − 2 asin(0.05)
    let boundary = std::f64::consts::FRAC_PI_2 - 2.0 * 0.05f64.asin();
    let upper = r.region.polytope.faces().filter(|h| h.a[0] > 0.0).map(|h| h.b / h.a[0]).fold(f64::INFINITY, f64::min);
    assert!((upper - (boundary - 0.01)).abs() < 5e-3, "{upper}");
}

#[test]
fn generate_is_bitwise_reproducible() {
    let d = Dir::new();
    let scene = d.file("two.scene", TWO_LINK);
    assert!(generate(&d, &scene, "0,0", "a.txt", &["--seed", "7", "--max-infeasible", "3"]).status.success());
    assert!(generate(&d, &scene, "0,0", "b.txt", &["--seed", "7", "--max-infeasible", "3"]).status.success());
    let a = std::fs::read(d.path("a.txt")).unwrap();
    assert_eq!(a, std::fs::read(d.path("b.txt")).unwrap());
    let r = parse_region("a", std::str::from_utf8(&a).unwrap()).unwrap();
    assert_eq!((r.options.rng_seed, r.options.max_consecutive_infeasible), (7, 3));
}

#[test]
fn generate_error_paths() {
    let d = Dir::new();
    let scene = d.file("one.scene", ONE_LINK);
    let o = generate(&d, &scene, "1.5707963", "r.txt", &[]);
    assert_eq!(failure(&o), (2, "irisnp: seed in collision".to_string()));
    let bad = d.file("bad.scene", &ONE_LINK.replace("disk 0 1 0.1", "blob 0 1"));
    let (code, msg) = failure(&generate(&d, &bad, "0", "r.txt", &[]));
    assert_eq!(code, 1);
    assert!(msg.contains("bad.scene:6:7: unknown shape kind 'blob'"), "{msg}");
    assert_eq!(failure(&generate(&d, &scene, "0,0", "r.txt", &[])).0, 1);
    assert_eq!(failure(&generate(&d, &d.path("missing.scene"), "0", "r.txt", &[])).0, 1);
    assert_eq!(failure(&run(&[&"generate", &scene, &"--bogus"])).0, 1);
    assert_eq!(failure(&run(&[&"frobnicate"])).0, 1);
}

#[test]
fn certify_reports() {
    let d = Dir::new();
    let one = d.file("one.scene", ONE_LINK);
    let free = d.file("free.scene", ONE_LINK_FREE);
    // the whole joint-limit box as the region
    assert!(generate(&d, &free, "0", "box.txt", &[]).status.success());
    let o = run(&[&"certify", &one, &d.path("box.txt"), &"--samples", &"10000", &"--seed", &"3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let fraction = number_after(&text, "colliding");
    let exact = 2.0 * 2.0 * 0.05f64.asin() / (2.0 * std::f64::consts::PI);
    assert!((fraction - exact).abs() < 0.005, "{text}");
    let (lo, hi) = interval(&text);
    assert!(lo < fraction && fraction < hi);
    assert!(text.contains("of 10000 samples"));

    // a collision-free region: zero hits, upper bound near the rule of three
    assert!(generate(&d, &one, "0", "r.txt", &[]).status.success());
    let n = 5000.0;
    let text = stdout(&run(&[&"certify", &one, &d.path("r.txt"), &"--samples", &"5000"]));
    assert_eq!(number_after(&text, "colliding"), 0.0);
    let (lo, hi) = interval(&text);
    assert_eq!(lo, 0.0);
    assert!(hi >= 3.0 / n * 0.999 && hi <= 3.85 / n, "{hi}");

    let (code, msg) = failure(&run(&[&"certify", &one, &d.path("r.txt"), &"--samples", &"0"]));
    assert_eq!((code, msg.as_str()), (1, "irisnp: need positive sample count"));
    let two = d.file("two.scene", TWO_LINK);
    let (code, msg) = failure(&run(&[&"certify", &two, &d.path("r.txt")]));
    assert_eq!(code, 1);
    assert!(msg.contains("dimension mismatch"), "{msg}");
}

#[test]
fn refine_with_new_obstacle() {
    let d = Dir::new();
    let one = d.file("one.scene", ONE_LINK);
    assert!(generate(&d, &one, "0", "r.txt", &[]).status.success());
    let original = load_region(&d.path("r.txt")).unwrap();

    // unreachable obstacle: nothing changes
    let far = d.file("far.scene", &format!("{ONE_LINK}world disk 5 5 0.2\n"));
    let o = run(&[&"refine", &far, &d.path("r.txt"), &"-o", &d.path("same.txt"), &"--new-obstacles", &"1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(load_region(&d.path("same.txt")).unwrap().region.polytope, original.region.polytope);

    // obstacle below the seed: a new lower row, old rows kept
    let near = d.file("near.scene", &format!("{ONE_LINK}world disk 0 -1 0.1\n"));
    let o = run(&[&"refine", &near, &d.path("r.txt"), &"-o", &d.path("ref.txt"), &"--new-obstacles", &"1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let refined = load_region(&d.path("ref.txt")).unwrap().region.polytope;
    let m = original.region.polytope.num_faces();
    assert!(refined.num_faces() > m);
    for i in 0..m {
        assert_eq!(refined.face(i), original.region.polytope.face(i));
    }
    let text = stdout(&run(&[&"certify", &near, &d.path("ref.txt"), &"--samples", &"5000"]));
    assert_eq!(number_after(&text, "colliding"), 0.0, "{text}");

    let (code, _) = failure(&run(&[&"refine", &near, &d.path("r.txt"), &"-o", &d.path("x.txt"), &"--new-obstacles", &"3"]));
    assert_eq!(code, 1);
}

#[test]
fn cover_commands() {
    let d = Dir::new();
    let free = d.file("free.scene", FREE_BOX);
    let one_seed = d.file("one.seeds", "0 0\n");
    let out = d.path("regions");
    let o = run(&[&"cover", &free, &one_seed, &"--out-dir", &out, &"--samples", &"20000"]);
    assert!(o.status.success());
    assert_eq!(number_after(&stdout(&o), "coverage"), 1.0);
    assert!(out.join("region-0.txt").exists());

    let inside = d.file("inside.seeds", "0 0\n0.5 0.5\n");
    let (code, msg) = failure(&run(&[&"cover", &free, &inside, &"--out-dir", &out]));
    assert_eq!(code, 2);
    assert!(msg.contains("lies inside region 0"), "{msg}");

    let two = d.file("two.scene", TWO_LINK);
    let seeds = d.file("two.seeds", "0 0\n-2.5 -2.5\n");
    let o = run(&[&"cover", &two, &seeds, &"--out-dir", &out, &"--max-infeasible", &"5", &"--samples", &"20000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let coverage = number_after(&stdout(&o), "coverage");
    assert!(coverage > 0.0 && coverage <= 1.0);
    let r0 = load_region(&out.join("region-0.txt")).unwrap().region.polytope;
    let r1 = load_region(&out.join("region-1.txt")).unwrap().region.polytope;
    assert!(!r0.overlaps_with_margin(&r1, 1e-6).unwrap());

    let bad = d.file("bad.seeds", "0 0\n1\n");
    let (code, msg) = failure(&run(&[&"cover", &two, &bad, &"--out-dir", &out]));
    assert_eq!(code, 1);
    assert!(msg.contains("bad.seeds:2:2: expected 2 joint values, found 1"), "{msg}");
}

#[test]
fn bench_ordering_output() {
    let d = Dir::new();
    let free = d.file("free.scene", FREE_BOX);
    let csv = d.path("bench.csv");
    let o = run(&[&"bench-ordering", &free, &"--n-seeds", &"3", &"--csv", &csv]);
    assert!(o.status.success());
    let table = stdout(&o);
    assert!(table.lines().next().unwrap().starts_with("mode"));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| l.len() == 7));
    assert_eq!(lines[0], ["mode", "mean_faces", "sd_faces", "mean_time", "sd_time", "max_volume", "n_seeds"]);
    // no planes either way: identical faces and volumes
    assert_eq!(lines[1][1], "4");
    assert_eq!((lines[1][1], lines[1][2], lines[1][5]), (lines[2][1], lines[2][2], lines[2][5]));

    // no printed CSV path: it follows the table
    let o = run(&[&"bench-ordering", &free, &"--n-seeds", &"1"]);
    assert!(stdout(&o).contains("mode,mean_faces"));

    let blocked = d.file(
        "blocked.scene",
        "irisnp-scene 1\nlengths 1\nlower -pi\nupper pi\nrobot 1 point 0 0\nworld disk 0 0 2\n",
    );
    let (code, msg) = failure(&run(&[&"bench-ordering", &blocked, &"--n-seeds", &"1"]));
    assert_eq!(code, 2);
    assert!(msg.contains("no collision-free configuration"), "{msg}");
}

#[test]
fn plot_structure() {
    let d = Dir::new();
    let two = d.file("two.scene", TWO_LINK);
    assert!(generate(&d, &two, "0,0", "a.txt", &[]).status.success());
    assert!(generate(&d, &two, "-2.5,-2.5", "b.txt", &[]).status.success());
    let svg_path = d.path("p.svg");
    let o = run(&[&"plot", &two, &d.path("a.txt"), &d.path("b.txt"), &"-o", &svg_path]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polygon").count(), 2);
    assert_eq!(svg.matches("class=\"ellipse\"").count(), 2);
    assert_eq!(svg.matches("class=\"limits\"").count(), 1);
    assert!(svg.matches("<rect").count() > 1);

    // same inputs, same bytes
    let again = d.path("q.svg");
    run(&[&"plot", &two, &d.path("a.txt"), &d.path("b.txt"), &"-o", &again]);
    assert_eq!(svg, std::fs::read_to_string(&again).unwrap());

    let empty = d.path("e.svg");
    assert!(run(&[&"plot", &two, &"-o", &empty]).status.success());
    let svg = std::fs::read_to_string(&empty).unwrap();
    assert_eq!(svg.matches("<polygon").count(), 0);
    assert_eq!(svg.matches("class=\"limits\"").count(), 1);

    let one = d.file("one.scene", ONE_LINK);
    let (code, msg) = failure(&run(&[&"plot", &one, &"-o", &empty]));
    assert_eq!((code, msg.as_str()), (1, "irisnp: need ≥2 free coordinates"));
}
