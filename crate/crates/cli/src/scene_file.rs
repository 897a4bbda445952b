//! Scene documents.
//!
//! ```text
//! irisnp-scene 1
//! lengths 1 1
//! lower -pi -pi
//! upper pi pi
//! base 0 0 0                                  # optional: theta x y
//! robot 1 rectangle -1 -0.05 0 0.05           # body, shape [at theta x y]
//! world disk 1.2 1.0 0.3
//! pairs auto                                  # or: pairs 0:2 1:2
//! constraint angle-sum 0 0.15                 # |Σq − target| ≤ bound
//! constraint tip-halfplane 1 0 1.5            # n·tip ≤ offset
//! ```
//!
//! Shapes: `point x y`, `disk cx cy r`, `rectangle x0 y0 x1 y1`,
//! `polygon x1 y1 x2 y2 ...` (counter-clockwise). Explicit pair indices count
//! robot lines first, then world lines, in file order.

use std::sync::Arc;

use irisnp::constraints::{AngleSumBound, ConfigConstraint, TipHalfplane};
use irisnp::kinematics::PairSpec;
use irisnp::{ConvexShape2D, PlanarChain, RigidTransform2D, Scene};

use crate::error::{CliError, Result};
use crate::text::{lines, Line};

pub const SCENE_HEADER: &str = "irisnp-scene 1";

#[derive(Debug, Clone)]
pub struct SceneFile {
    pub scene: Scene,
    pub constraints: Vec<Arc<dyn ConfigConstraint>>,
}

enum PendingConstraint {
    AngleSum(f64, f64),
    Tip([f64; 2], f64),
}

pub fn parse_scene(file: &str, text: &str) -> Result<SceneFile> {
    let ls = lines(file, text);
    let Some(first) = ls.first() else {
        return Err(CliError::parse(file, 1, 1, format!("empty document, expected header '{SCENE_HEADER}'")));
    };
    let header: Vec<&str> = first.tokens.iter().map(|t| t.text).collect();
    if header != ["irisnp-scene", "1"] {
        return Err(first.error(0, format!("expected header '{SCENE_HEADER}'")));
    }

    let mut lengths: Option<(Vec<f64>, &Line)> = None;
    let mut lower: Option<(Vec<f64>, &Line)> = None;
    let mut upper: Option<(Vec<f64>, &Line)> = None;
    let mut base = RigidTransform2D::identity();
    let mut robot: Vec<(usize, RigidTransform2D, ConvexShape2D, &Line)> = Vec::new();
    let mut world: Vec<(RigidTransform2D, ConvexShape2D)> = Vec::new();
    let mut pairs: Option<(Option<Vec<(usize, usize)>>, &Line)> = None;
    let mut pending = Vec::new();

    for line in &ls[1..] {
        match line.key() {
            key @ ("lengths" | "lower" | "upper") => {
                if line.args().is_empty() {
                    return Err(line.error(1, format!("'{key}' needs one value per joint")));
                }
                let slot = match key {
                    "lengths" => &mut lengths,
                    "lower" => &mut lower,
                    _ => &mut upper,
                };
                if slot.is_some() {
                    return Err(line.error(0, format!("duplicate key '{key}'")));
                }
                *slot = Some((line.numbers(1)?, line));
            }
            "base" => {
                line.expect_args(3)?;
                base = RigidTransform2D::new(line.number(1)?, [line.number(2)?, line.number(3)?]);
            }
            "robot" => {
                let body = line.integer(1)?;
                let (shape, pose) = parse_shape(line, 2)?;
                robot.push((body, pose, shape, line));
            }
            "world" => {
                let (shape, pose) = parse_shape(line, 1)?;
                world.push((pose, shape));
            }
            "pairs" => {
                if pairs.is_some() {
                    return Err(line.error(0, "duplicate key 'pairs'"));
                }
                let spec = match line.args() {
                    [t] if t.text == "auto" => None,
                    [] => return Err(line.error(1, "'pairs' needs 'auto' or a list of i:j")),
                    args => {
                        let mut list = Vec::new();
                        for (k, t) in args.iter().enumerate() {
                            let parsed = t.text.split_once(':').and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)));
                            match parsed {
                                Some(p) => list.push(p),
                                None => return Err(line.error(k + 1, format!("pair must look like i:j, found '{}'", t.text))),
                            }
                        }
                        Some(list)
                    }
                };
                pairs = Some((spec, line));
            }
            "constraint" => match line.tokens.get(1).map(|t| t.text) {
                Some("angle-sum") => {
                    if line.tokens.len() != 4 {
                        return Err(line.error(line.tokens.len().min(4), "'constraint angle-sum' takes target and bound"));
                    }
                    pending.push(PendingConstraint::AngleSum(line.number(2)?, line.number(3)?));
                }
                Some("tip-halfplane") => {
                    if line.tokens.len() != 5 {
                        return Err(line.error(line.tokens.len().min(5), "'constraint tip-halfplane' takes nx ny offset"));
                    }
                    pending.push(PendingConstraint::Tip([line.number(2)?, line.number(3)?], line.number(4)?));
                }
                Some(other) => return Err(line.error(1, format!("unknown constraint kind '{other}'"))),
                None => return Err(line.error(1, "'constraint' needs a kind")),
            },
            other => return Err(line.error(0, format!("unknown key '{other}'"))),
        }
    }

    let end = ls.last().map_or(1, |l| l.number);
    let missing = |key: &str| CliError::parse(file, end, 1, format!("missing key '{key}'"));
    let (lengths, len_line) = lengths.ok_or_else(|| missing("lengths"))?;
    let (lower, low_line) = lower.ok_or_else(|| missing("lower"))?;
    let (upper, up_line) = upper.ok_or_else(|| missing("upper"))?;
    let n = lengths.len();
    if lower.len() != n {
        return Err(low_line.error(0, format!("'lower' has {} values for {n} joints", lower.len())));
    }
    if upper.len() != n {
        return Err(up_line.error(0, format!("'upper' has {} values for {n} joints", upper.len())));
    }
    if let Some(k) = lengths.iter().position(|l| !(*l > 0.0)) {
        return Err(len_line.error(k + 1, format!("link length must be positive, found {}", lengths[k])));
    }
    if let Some(k) = (0..n).find(|&k| lower[k] > upper[k]) {
        return Err(up_line.error(k + 1, format!("joint limits inverted for joint {k}: lower {} > upper {}", lower[k], upper[k])));
    }
    for (body, _, _, line) in &robot {
        if *body > n {
            return Err(line.error(1, format!("body {body} does not exist (chain has bodies 0..={n})")));
        }
    }
    let chain = PlanarChain::new(lengths, lower, upper, base)?;

    // robot geometries are stored sorted by body (stable), so explicit pair
    // indices in file order have to be remapped
    let mut order: Vec<usize> = (0..robot.len()).collect();
    order.sort_by_key(|&i| robot[i].0);
    let mut position = vec![0; robot.len()];
    for (sorted, &i) in order.iter().enumerate() {
        position[i] = sorted;
    }
    let total = robot.len() + world.len();
    let spec = match &pairs {
        None => PairSpec::Auto,
        Some((None, _)) => PairSpec::Auto,
        Some((Some(list), line)) => {
            let mut mapped = Vec::new();
            for (k, &(i, j)) in list.iter().enumerate() {
                if i >= total || j >= total {
                    return Err(line.error(k + 1, format!("pair {i}:{j} references a geometry past the last ({total} defined)")));
                }
                let map = |g: usize| if g < robot.len() { position[g] } else { g };
                mapped.push((map(i), map(j)));
            }
            PairSpec::Explicit(mapped)
        }
    };
    let pair_line = pairs.map(|(_, l)| l);
    let robot_geoms = robot.iter().map(|(b, p, s, _)| (*b, *p, s.clone())).collect();
    let scene = Scene::new(chain.clone(), robot_geoms, world, spec).map_err(|e| match (pair_line, e) {
        (Some(l), irisnp::Error::InvalidScene(m)) => l.error(0, m),
        (_, e) => CliError::Core(e),
    })?;

    let mut constraints: Vec<Arc<dyn ConfigConstraint>> = Vec::new();
    for c in pending {
        match c {
            PendingConstraint::AngleSum(target, bound) => {
                for side in (AngleSumBound { target, bound }).sides() {
                    constraints.push(Arc::new(side));
                }
            }
            PendingConstraint::Tip(normal, offset) => {
                constraints.push(Arc::new(TipHalfplane { chain: chain.clone(), normal, offset }))
            }
        }
    }
    Ok(SceneFile { scene, constraints })
}

fn parse_shape(line: &Line, at: usize) -> Result<(ConvexShape2D, RigidTransform2D)> {
    let tokens = &line.tokens;
    let Some(kind) = tokens.get(at) else {
        return Err(line.error(at, format!("'{}' needs a shape", line.key())));
    };
    let end = tokens.iter().position(|t| t.text == "at").unwrap_or(tokens.len());
    let values = (at + 1..end).map(|i| line.number(i)).collect::<Result<Vec<f64>>>()?;
    let count = |want: usize| {
        if values.len() == want {
            Ok(())
        } else {
            Err(line.error(at, format!("shape '{}' takes {want} values, found {}", kind.text, values.len())))
        }
    };
    let shape = match kind.text {
        "point" => {
            count(2)?;
            Ok(ConvexShape2D::point([values[0], values[1]]))
        }
        "disk" => {
            count(3)?;
            ConvexShape2D::disk([values[0], values[1]], values[2])
        }
        "rectangle" => {
            count(4)?;
            ConvexShape2D::rectangle(values[0], values[1], values[2], values[3])
        }
        "polygon" => {
            if values.len() < 6 || values.len() % 2 != 0 {
                return Err(line.error(at, format!("polygon takes an even number (at least 6) of values, found {}", values.len())));
            }
            ConvexShape2D::polygon(values.chunks(2).map(|c| [c[0], c[1]]).collect())
        }
        other => return Err(line.error(at, format!("unknown shape kind '{other}'"))),
    };
    let shape = shape.map_err(|e| match e {
        irisnp::Error::InvalidShape(m) => line.error(at, m),
        e => CliError::Core(e),
    })?;
    let pose = if end < tokens.len() {
        if tokens.len() - end - 1 != 3 {
            return Err(line.error(end, "'at' takes theta x y"));
        }
        RigidTransform2D::new(line.number(end + 1)?, [line.number(end + 2)?, line.number(end + 3)?])
    } else {
        RigidTransform2D::identity()
    };
    Ok((shape, pose))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_LINK: &str = "irisnp-scene 1\nlengths 1\nlower -pi\nupper pi\nrobot 1 point 0 0\nworld disk 0 1 0.1\n";

    #[test]
    fn minimal_one_link() {
        let s = parse_scene("s", ONE_LINK).unwrap();
        assert_eq!(s.scene.pairs(), &[(0, 1)]);
        assert!(s.constraints.is_empty());
        assert!(s.scene.in_collision(&[std::f64::consts::FRAC_PI_2]).unwrap());
    }

    #[test]
    fn clockwise_polygon_is_rejected() {
        let text = ONE_LINK.replace("world disk 0 1 0.1", "world polygon 0 0 0 1 1 0");
        let err = parse_scene("s", &text).unwrap_err().to_string();
        assert_eq!(err, "s:6:7: polygon not counter-clockwise convex");
    }

    #[test]
    fn distinct_diagnostics() {
        let err = |t: String| parse_scene("s", &t).unwrap_err().to_string();
        assert!(err(ONE_LINK.replace("disk 0 1 0.1", "ellipse 0 1 0.1")).contains("unknown shape kind 'ellipse'"));
        assert!(err(ONE_LINK.replace("upper pi", "upper -4")).contains("joint limits inverted"));
        assert!(err(ONE_LINK.replace("irisnp-scene 1", "scene 2")).contains("expected header"));
        assert!(err(ONE_LINK.replace("lengths 1\n", "")).contains("missing key 'lengths'"));
        assert!(err(ONE_LINK.replace("lengths 1", "lengths x")).starts_with("s:2:9:"));
        assert!(err(format!("{ONE_LINK}frobnicate 3\n")).contains("unknown key 'frobnicate'"));
    }

    #[test]
    fn auto_pairs_on_four_links() {
        let mut text = String::from("irisnp-scene 1\nlengths 1 1 1 1\nlower -pi -pi -pi -pi\nupper pi pi pi pi\n");
        for b in 1..=4 {
            text.push_str(&format!("robot {b} rectangle -1 -0.05 0 0.05\n"));
        }
        text.push_str("world disk 2 2 0.3\npairs auto\n");
        let s = parse_scene("s", &text).unwrap();
        // enumerate: every robot–world pair, and robot–robot with |Δbody| ≥ 2
        let mut expected = 0;
        for i in 1..=4usize {
            expected += 1;
            for j in i + 1..=4usize {
                if j - i >= 2 {
                    expected += 1;
                }
            }
        }
        assert_eq!(expected, 7);
        assert_eq!(s.scene.pairs().len(), expected);
    }

    #[test]
    fn explicit_pairs_follow_file_order() {
        let text = "irisnp-scene 1\nlengths 1 1\nlower -pi -pi\nupper pi pi\nrobot 2 point 0 0\nrobot 1 point 0 0\nworld disk 0 1 0.1\npairs 0:2\n";
        let s = parse_scene("s", text).unwrap();
        // file geometry 0 is on body 2, stored second after sorting
        assert_eq!(s.scene.pairs(), &[(1, 2)]);
        let bad = text.replace("pairs 0:2", "pairs 0:1");
        assert!(parse_scene("s", &bad).unwrap_err().to_string().contains("adjacent"));
    }

    #[test]
    fn constraints_and_poses() {
        let text = format!("{ONE_LINK}constraint angle-sum 0 0.15\nconstraint tip-halfplane 1 0 0.5\nworld point 0 0 at 0.5 2 0\n");
        let s = parse_scene("s", &text).unwrap();
        // angle-sum becomes its two one-sided halves
        assert_eq!(s.constraints.len(), 3);
        let q = irisnp::DVector::from_vec(vec![0.0]);
        assert!((s.constraints[0].evaluate(&q).unwrap().0 + 0.15).abs() < 1e-15);
        assert!((s.constraints[1].evaluate(&q).unwrap().0 + 0.15).abs() < 1e-15);
        assert!((s.constraints[2].evaluate(&q).unwrap().0 - 0.5).abs() < 1e-15);
        assert_eq!(s.scene.geometries()[2].pose.translation(), [2.0, 0.0]);
    }
}
