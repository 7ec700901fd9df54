//! Plain-text record for intersections of halfspaces.
//!
//! ```text
//! kind target
//! n 2
//! k 2
//! R 1.0000000000000000e0
//! row 1.0000000000000000e0 0.0000000000000000e0 0.0000000000000000e0
//! row 0.0000000000000000e0 1.0000000000000000e0 0.0000000000000000e0
//! ```
//!
//! Each `row` is a normal vector followed by its threshold. A `target` row has
//! `n` components; a `cover` row holds a lifted normal of `n + 2` components
//! with threshold `0`, or one of the sentinels `all` / `none`. Floats are
//! written with 17 significant digits, which round-trips exactly. Lines
//! starting with `#` are comments.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{Halfspace, TargetIntersection};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordKind {
    Target,
    Cover,
}

impl RecordKind {
    fn as_str(self) -> &'static str {
        match self {
            RecordKind::Target => "target",
            RecordKind::Cover => "cover",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RecordRow {
    Halfspace { normal: Vec<f64>, theta: f64 },
    All,
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HalfspaceRecord {
    pub kind: RecordKind,
    /// Ambient dimension of the points being classified.
    pub n: usize,
    pub radius: f64,
    pub rows: Vec<RecordRow>,
    /// Free-form `# ...` lines written before the body.
    pub comments: Vec<String>,
}

/// Shortest exact-round-trip formatting at 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl HalfspaceRecord {
    fn row_dim(&self) -> usize {
        match self.kind {
            RecordKind::Target => self.n,
            RecordKind::Cover => self.n + 2,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            for line in c.lines() {
                let _ = writeln!(s, "# {line}");
            }
        }
        let _ = writeln!(s, "kind {}", self.kind.as_str());
        let _ = writeln!(s, "n {}", self.n);
        let _ = writeln!(s, "k {}", self.rows.len());
        let _ = writeln!(s, "R {}", fmt_f64(self.radius));
        for row in &self.rows {
            match row {
                RecordRow::All => s.push_str("row all\n"),
                RecordRow::None => s.push_str("row none\n"),
                RecordRow::Halfspace { normal, theta } => {
                    s.push_str("row");
                    for v in normal.iter().chain(std::iter::once(theta)) {
                        s.push(' ');
                        s.push_str(&fmt_f64(*v));
                    }
                    s.push('\n');
                }
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut n = None;
        let mut k = None;
        let mut radius = None;
        let mut rows = Vec::new();
        let mut comments = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                comments.push(c.trim().to_string());
                continue;
            }
            let bad = |msg: &str| Error::Parse(format!("line {}: {msg}", lineno + 1));
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default();
            match key {
                "kind" => {
                    kind = Some(match parts.next() {
                        Some("target") => RecordKind::Target,
                        Some("cover") => RecordKind::Cover,
                        _ => return Err(bad("kind must be target or cover")),
                    })
                }
                "n" => n = Some(parse_num::<usize>(parts.next(), &bad)?),
                "k" => k = Some(parse_num::<usize>(parts.next(), &bad)?),
                "R" => radius = Some(parse_num::<f64>(parts.next(), &bad)?),
                "row" => {
                    let fields: Vec<&str> = parts.collect();
                    match fields.as_slice() {
                        ["all"] => rows.push(RecordRow::All),
                        ["none"] => rows.push(RecordRow::None),
                        _ => {
                            let mut vals = fields
                                .iter()
                                .map(|f| f.parse::<f64>().map_err(|_| bad("bad float")))
                                .collect::<Result<Vec<f64>>>()?;
                            let theta = vals.pop().ok_or_else(|| bad("empty row"))?;
                            rows.push(RecordRow::Halfspace { normal: vals, theta });
                        }
                    }
                }
                other => return Err(bad(&format!("unknown key {other:?}"))),
            }
        }
        let rec = HalfspaceRecord {
            kind: kind.ok_or_else(|| Error::Parse("missing kind".into()))?,
            n: n.ok_or_else(|| Error::Parse("missing n".into()))?,
            radius: radius.ok_or_else(|| Error::Parse("missing R".into()))?,
            rows,
            comments,
        };
        let k = k.ok_or_else(|| Error::Parse("missing k".into()))?;
        if k != rec.rows.len() {
            return Err(Error::Parse(format!("k = {k} but {} rows present", rec.rows.len())));
        }
        let dim = rec.row_dim();
        for row in &rec.rows {
            match row {
                RecordRow::Halfspace { normal, .. } if normal.len() != dim => {
                    return Err(Error::Parse(format!(
                        "row has {} components, expected {dim}",
                        normal.len()
                    )))
                }
                RecordRow::All | RecordRow::None if rec.kind == RecordKind::Target => {
                    return Err(Error::Parse("sentinel rows are only valid in cover records".into()))
                }
                _ => {}
            }
        }
        Ok(rec)
    }
}

impl TargetIntersection {
    pub fn to_record(&self, comments: Vec<String>) -> HalfspaceRecord {
        HalfspaceRecord {
            kind: RecordKind::Target,
            n: self.dim(),
            radius: self.radius(),
            rows: self
                .halfspaces()
                .iter()
                .map(|h| RecordRow::Halfspace { normal: h.normal().to_vec(), theta: h.theta() })
                .collect(),
            comments,
        }
    }

    pub fn from_record(rec: &HalfspaceRecord) -> Result<Self> {
        if rec.kind != RecordKind::Target {
            return Err(Error::Parse("expected a target record".into()));
        }
        let halfspaces = rec
            .rows
            .iter()
            .map(|row| match row {
                RecordRow::Halfspace { normal, theta } => Halfspace::new(normal.clone(), *theta),
                _ => Err(Error::Parse("sentinel row in a target record".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        TargetIntersection::new(halfspaces, rec.radius)
    }
}

fn parse_num<T: std::str::FromStr>(field: Option<&str>, bad: &dyn Fn(&str) -> Error) -> Result<T> {
    field
        .ok_or_else(|| bad("missing value"))?
        .parse()
        .map_err(|_| bad("bad number"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_malformed() {
        assert!(HalfspaceRecord::parse("kind target\nn 2\nk 1\nR 1\nrow 1 0\n").is_err());
        assert!(HalfspaceRecord::parse("kind target\nn 2\nk 2\nR 1\nrow 1 0 0\n").is_err());
        assert!(HalfspaceRecord::parse("kind target\nn 2\nk 1\nR 1\nrow all\n").is_err());
        assert!(HalfspaceRecord::parse("kind pizza\n").is_err());
        let ok = HalfspaceRecord::parse("# hello\nkind cover\nn 1\nk 2\nR 2\nrow all\nrow 1 0 0 0\n").unwrap();
        assert_eq!(ok.rows[0], RecordRow::All);
        assert_eq!(ok.comments, vec!["hello".to_string()]);
    }

    #[test]
    fn target_round_trip() {
        let f = TargetIntersection::new(
            vec![Halfspace::new(vec![0.6, 0.8], 0.1).unwrap(), Halfspace::new(vec![1.0, 0.0], -0.3).unwrap()],
            2.0,
        )
        .unwrap();
        let text = f.to_record(vec!["seed 3".into()]).to_text();
        let back = TargetIntersection::from_record(&HalfspaceRecord::parse(&text).unwrap()).unwrap();
        assert_eq!(back, f);
    }

    proptest! {
        #[test]
        fn text_round_trip_is_exact(
            rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 4), 1..5),
            radius in 1e-3f64..1e3,
        ) {
            let rec = HalfspaceRecord {
                kind: RecordKind::Target,
                n: 3,
                radius,
                rows: rows.iter().map(|r| RecordRow::Halfspace { normal: r[..3].to_vec(), theta: r[3] }).collect(),
                comments: vec![],
            };
            let back = HalfspaceRecord::parse(&rec.to_text()).unwrap();
            prop_assert_eq!(back, rec);
        }
    }
}
