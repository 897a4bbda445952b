//! Shared tokenizer for the line-oriented file formats: `#` starts a comment,
//! tokens are separated by whitespace.

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Token<'a> {
    pub text: &'a str,
    pub column: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Line<'a> {
    pub file: &'a str,
    pub number: usize,
    pub tokens: Vec<Token<'a>>,
}

pub(crate) fn lines<'a>(file: &'a str, text: &'a str) -> Vec<Line<'a>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        let mut tokens = Vec::new();
        let mut start = None;
        for (pos, ch) in body.char_indices().chain(std::iter::once((body.len(), ' '))) {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(pos),
                (true, Some(s)) => {
                    tokens.push(Token { text: &body[s..pos], column: body[..s].chars().count() + 1 });
                    start = None;
                }
                _ => {}
            }
        }
        if !tokens.is_empty() {
            out.push(Line { file, number: i + 1, tokens });
        }
    }
    out
}

impl<'a> Line<'a> {
    pub fn key(&self) -> &'a str {
        self.tokens[0].text
    }

    pub fn error(&self, index: usize, message: impl Into<String>) -> CliError {
        let column = self.tokens.get(index).map_or_else(|| self.end_column(), |t| t.column);
        CliError::parse(self.file, self.number, column, message)
    }

    fn end_column(&self) -> usize {
        self.tokens.last().map_or(1, |t| t.column + t.text.chars().count())
    }

    /// Tokens after the key.
    pub fn args(&self) -> &[Token<'a>] {
        &self.tokens[1..]
    }

    pub fn expect_args(&self, count: usize) -> Result<()> {
        let got = self.tokens.len() - 1;
        if got != count {
            return Err(self.error(self.tokens.len().min(count + 1), format!("'{}' takes {count} values, found {got}", self.key())));
        }
        Ok(())
    }

    pub fn number(&self, index: usize) -> Result<f64> {
        let Some(tok) = self.tokens.get(index) else {
            return Err(self.error(index, format!("'{}' is missing a value", self.key())));
        };
        parse_number(tok.text).ok_or_else(|| self.error(index, format!("'{}': expected a number, found '{}'", self.key(), tok.text)))
    }

    pub fn numbers(&self, from: usize) -> Result<Vec<f64>> {
        (from..self.tokens.len()).map(|i| self.number(i)).collect()
    }

    pub fn integer(&self, index: usize) -> Result<usize> {
        let Some(tok) = self.tokens.get(index) else {
            return Err(self.error(index, format!("'{}' is missing a value", self.key())));
        };
        tok.text
            .parse()
            .map_err(|_| self.error(index, format!("'{}': expected a nonnegative integer, found '{}'", self.key(), tok.text)))
    }
}

/// Decimal numbers, plus `pi` and `-pi` for joint limits.
pub(crate) fn parse_number(s: &str) -> Option<f64> {
    match s {
        "pi" => Some(std::f64::consts::PI),
        "-pi" => Some(-std::f64::consts::PI),
        _ => s.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

/// 17 significant digits: parsing the output gives back the same bits.
pub(crate) fn fmt_exact(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn fmt_row(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt_exact).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_and_comments() {
        let ls = lines("f", "  a  1.5 # note\n\n# only comment\nb\tpi");
        assert_eq!(ls.len(), 2);
        assert_eq!((ls[0].number, ls[0].tokens[1].column), (1, 6));
        assert_eq!(ls[1].number, 4);
        assert_eq!(ls[1].number(1).unwrap(), std::f64::consts::PI);
    }

    #[test]
    fn exact_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE, -0.0] {
            assert_eq!(parse_number(&fmt_exact(v)).unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn rejects_non_numbers() {
        let ls = lines("f", "k 1 x");
        let err = ls[0].number(2).unwrap_err().to_string();
        assert!(err.starts_with("f:1:5:"), "{err}");
        assert!(parse_number("inf").is_none() && parse_number("NaN").is_none());
    }
}
