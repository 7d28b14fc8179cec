//! Small helpers shared by the versioned text artifact formats.

use std::io::BufRead;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits, enough for an exact round trip.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Line cursor that tracks 1-based line numbers for error messages.
pub(crate) struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
    what: &'static str,
}

impl<R: BufRead> Lines<R> {
    pub(crate) fn new(reader: R, what: &'static str) -> Self {
        Lines {
            inner: reader.lines(),
            line: 0,
            what,
        }
    }

    pub(crate) fn next_line(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(line) => Ok(line?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    pub(crate) fn err(&self, reason: impl Into<String>) -> Error {
        Error::format(self.what, self.line, reason)
    }

    /// Reads a line of the form `key value...` and returns the rest after `key`.
    pub(crate) fn expect_key(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.to_string()),
            _ if line == key => Ok(String::new()),
            _ => Err(self.err(format!("expected `{key}`, found {line:?}"))),
        }
    }

    pub(crate) fn parse<T: FromStr>(&self, token: &str) -> Result<T> {
        token
            .parse()
            .map_err(|_| self.err(format!("cannot parse {token:?}")))
    }

    /// Reads `key value` and parses the value.
    pub(crate) fn parse_key<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.expect_key(key)?;
        self.parse(&v)
    }

    pub(crate) fn parse_row(&self, line: &str, expected: usize) -> Result<Vec<f64>> {
        let row = line
            .split_whitespace()
            .map(|t| self.parse::<f64>(t))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", row.len())));
        }
        Ok(row)
    }
}
