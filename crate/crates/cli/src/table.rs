use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Tsv,
}

impl Format {
    fn delimiter(self) -> char {
        match self {
            Format::Csv => ',',
            Format::Tsv => '\t',
        }
    }
}

/// A header plus string rows, rendered as CSV or TSV.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn field(s: &str, format: Format) -> String {
        match format {
            Format::Csv if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Format::Tsv => s.replace(['\t', '\n'], " "),
            Format::Csv => s.to_string(),
        }
    }

    pub fn write(&self, w: &mut impl Write, format: Format, comment: &str) -> io::Result<()> {
        w.write_all(comment.as_bytes())?;
        let d = format.delimiter().to_string();
        let line = |cells: &[String]| cells.iter().map(|c| Table::field(c, format)).collect::<Vec<_>>().join(&d);
        writeln!(w, "{}", line(&self.header))?;
        for r in &self.rows {
            writeln!(w, "{}", line(r))?;
        }
        Ok(())
    }

    /// Writes to `out`, or to stdout when `out` is `None`.
    pub fn emit(&self, out: Option<&Path>, format: Format, comment: &str) -> Result<()> {
        match out {
            Some(path) => {
                let mut buf = Vec::new();
                self.write(&mut buf, format, comment)?;
                std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
            }
            None => {
                let stdout = io::stdout();
                let mut lock = stdout.lock();
                self.write(&mut lock, format, comment)?;
                Ok(())
            }
        }
    }
}

/// Splits one CSV or TSV line, honouring double quotes in CSV.
pub fn split_line(line: &str, format: Format) -> Vec<String> {
    if format == Format::Tsv {
        return line.split('\t').map(str::to_string).collect();
    }
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

pub fn fmt_opt(v: Option<f64>, decimals: usize) -> String {
    v.map(|x| format!("{x:.decimals$}")).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_and_round_trips() {
        let mut t = Table::new(["tag", "score"]);
        t.push(vec!["rock, pop".into(), "0.5".into()]);
        t.push(vec!["say \"hi\"".into(), "1".into()]);
        let mut buf = Vec::new();
        t.write(&mut buf, Format::Csv, "# c\n").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# c");
        assert_eq!(split_line(lines[2], Format::Csv), vec!["rock, pop", "0.5"]);
        assert_eq!(split_line(lines[3], Format::Csv), vec!["say \"hi\"", "1"]);
    }

    #[test]
    fn tsv_is_plain() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["x,y".into(), "z".into()]);
        let mut buf = Vec::new();
        t.write(&mut buf, Format::Tsv, "").unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a\tb\nx,y\tz\n");
    }
}
