//! Seeds documents: one configuration per line, whitespace separated.

use irisnp::DVector;

use crate::error::{CliError, Result};
use crate::text::lines;

pub fn parse_seeds(file: &str, text: &str, dim: usize) -> Result<Vec<DVector<f64>>> {
    let ls = lines(file, text);
    if ls.is_empty() {
        return Err(CliError::parse(file, 1, 1, "no seed configurations"));
    }
    ls.iter()
        .map(|line| {
            if line.tokens.len() != dim {
                let at = line.tokens.len().min(dim);
                return Err(line.error(at, format!("expected {dim} joint values, found {}", line.tokens.len())));
            }
            Ok(DVector::from_vec(line.numbers(0)?))
        })
        .collect()
}

/// Comma- or whitespace-separated configuration given on the command line.
pub fn parse_config(text: &str, dim: usize) -> Result<DVector<f64>> {
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| crate::text::parse_number(s).ok_or_else(|| CliError::Usage(format!("configuration: expected a number, found '{s}'"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != dim {
        return Err(CliError::Usage(format!("configuration has {} values, scene has {dim} joints", values.len())));
    }
    Ok(DVector::from_vec(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_configuration_per_line() {
        let s = parse_seeds("seeds", "0 0\n# comment\n-pi 0.5\n", 2).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1][0], -std::f64::consts::PI);
        let err = parse_seeds("seeds", "0 0\n1 2 3\n", 2).unwrap_err().to_string();
        assert_eq!(err, "seeds:2:5: expected 2 joint values, found 3");
        assert!(parse_seeds("seeds", "# none\n", 2).is_err());
    }

    #[test]
    fn command_line_configurations() {
        assert_eq!(parse_config("0.5,-1", 2).unwrap().as_slice(), &[0.5, -1.0]);
        assert!(parse_config("0.5", 2).is_err());
        assert!(parse_config("a,b", 2).is_err());
    }
}
