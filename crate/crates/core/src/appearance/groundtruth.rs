//! Word-level ground-truth text files.
//!
//! Two line formats are understood:
//!
//! * ICDAR 2013 words: `x1,y1,x2,y2,"transcript"` (commas or whitespace
//!   between the numbers; the quotes are optional).
//! * Quadrilaterals: `x1,y1,x2,y2,x3,y3,x4,y4,transcript`, corners clockwise
//!   from the top-left. Everything after the eighth comma is the transcript,
//!   verbatim.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Quad};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GtFormat {
    IcdarWord,
    Quad,
}

impl FromStr for GtFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "icdar-word" | "icdar2013" | "word" => Ok(GtFormat::IcdarWord),
            "quad" | "quad-line" | "quad-gt" => Ok(GtFormat::Quad),
            other => Err(format!("unknown ground-truth format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtAnnotation {
    pub quad: Quad,
    pub transcript: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("ground truth line {line}: {reason}")]
pub struct GtParseError {
    pub line: usize,
    pub reason: String,
}

fn number(s: &str, line: usize) -> Result<f32, GtParseError> {
    s.trim().parse::<f32>().map_err(|_| GtParseError {
        line,
        reason: format!("bad coordinate {:?}", s.trim()),
    })
}

fn parse_word_line(line: &str, lineno: usize) -> Result<GtAnnotation, GtParseError> {
    let mut rest = line;
    let mut coords = [0.0f32; 4];
    for c in coords.iter_mut() {
        rest = rest.trim_start_matches(|ch: char| ch == ',' || ch.is_whitespace());
        let end = rest
            .find(|ch: char| ch == ',' || ch.is_whitespace())
            .ok_or_else(|| GtParseError {
                line: lineno,
                reason: "expected four coordinates and a transcript".into(),
            })?;
        *c = number(&rest[..end], lineno)?;
        rest = &rest[end..];
    }
    let rest = rest
        .trim_start_matches(|ch: char| ch == ',' || ch.is_whitespace())
        .trim_end();
    let transcript = rest
        .strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .unwrap_or(rest);
    let [x1, y1, x2, y2] = coords;
    Ok(GtAnnotation {
        quad: Quad([
            Point::new(x1, y1),
            Point::new(x2, y1),
            Point::new(x2, y2),
            Point::new(x1, y2),
        ]),
        transcript: transcript.to_string(),
    })
}

fn parse_quad_line(line: &str, lineno: usize) -> Result<GtAnnotation, GtParseError> {
    let mut parts = line.splitn(9, ',');
    let mut v = [0.0f32; 8];
    for c in v.iter_mut() {
        let field = parts.next().ok_or_else(|| GtParseError {
            line: lineno,
            reason: "expected eight coordinates and a transcript".into(),
        })?;
        *c = number(field, lineno)?;
    }
    let transcript = parts.next().unwrap_or("").to_string();
    Ok(GtAnnotation {
        quad: Quad([
            Point::new(v[0], v[1]),
            Point::new(v[2], v[3]),
            Point::new(v[4], v[5]),
            Point::new(v[6], v[7]),
        ]),
        transcript,
    })
}

/// Parses a whole ground-truth file. A leading UTF-8 BOM and blank lines are ignored.
pub fn parse_ground_truth(text: &str, format: GtFormat) -> Result<Vec<GtAnnotation>, GtParseError> {
    text.strip_prefix('\u{feff}')
        .unwrap_or(text)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| match format {
            GtFormat::IcdarWord => parse_word_line(l, n),
            GtFormat::Quad => parse_quad_line(l, n),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icdar2013_test_and_train_styles() {
        let a = parse_ground_truth(
            "\u{feff}38, 43, 920, 215, \"Tiredness\"\n",
            GtFormat::IcdarWord,
        )
        .unwrap();
        let b =
            parse_ground_truth("38 43 920 215 \"Tiredness\"\r\n\n", GtFormat::IcdarWord).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].transcript, "Tiredness");
        assert_eq!(a[0].quad.0[2], Point::new(920.0, 215.0));
    }

    #[test]
    fn quad_transcript_keeps_commas() {
        let g = parse_ground_truth("1,2,3,4,5,6,7,8,hello, world\n", GtFormat::Quad).unwrap();
        assert_eq!(g[0].transcript, "hello, world");
        assert_eq!(g[0].quad.0[3], Point::new(7.0, 8.0));
    }

    #[test]
    fn malformed_lines_report_their_number() {
        let e = parse_ground_truth("1,2,3,4,5,6,7,8,ok\n1,2,x,4,5,6,7,8,bad\n", GtFormat::Quad)
            .unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse_ground_truth("1,2,3\n", GtFormat::Quad).is_err());
        assert!(parse_ground_truth("12 13\n", GtFormat::IcdarWord).is_err());
    }

    #[test]
    fn format_names() {
        assert_eq!(
            "icdar-word".parse::<GtFormat>().unwrap(),
            GtFormat::IcdarWord
        );
        assert_eq!("quad".parse::<GtFormat>().unwrap(), GtFormat::Quad);
        assert!("xml".parse::<GtFormat>().is_err());
    }
}
