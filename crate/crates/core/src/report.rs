//! Stable JSON and CSV emission.
//!
//! Floats are written in scientific notation with 17 significant digits so
//! every `f64` survives a text round trip unchanged. Non-finite values become
//! `null`.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

struct ExactFloats<'a>(PrettyFormatter<'a>);

fn write_float<W: ?Sized + Write>(w: &mut W, v: f64) -> io::Result<()> {
    if v.is_finite() {
        write!(w, "{v:.16e}")
    } else {
        w.write_all(b"null")
    }
}

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write_float(w, v)
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write_float(w, v as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty-printed JSON with exact floats. Key order follows field order.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, ExactFloats(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("in-memory serialization of plain data");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// One CSV table: header plus numeric rows, floats in the same exact format.
pub fn to_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|v| if v.is_finite() { format!("{v:.16e}") } else { "nan".into() })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        let values = vec![0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.30000000000000004];
        let text = to_json(&values);
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, values);
        assert!(text.contains("1.0000000000000001e-1") || text.contains("1.0000000000000000e-1"));
    }

    #[test]
    fn non_finite_is_null() {
        assert_eq!(to_json(&f64::NAN).trim(), "null");
    }

    #[test]
    fn csv_layout() {
        let s = to_csv(&["t", "v"], &[vec![0.0, 1.5], vec![1.0, f64::NAN]]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "t,v");
        assert_eq!(lines[1], "0.0000000000000000e0,1.5000000000000000e0");
        assert!(lines[2].ends_with(",nan"));
    }
}
