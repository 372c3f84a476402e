//! JSON output with round-trip precision.
//!
//! Every float is printed in scientific notation with 17 significant digits,
//! so identical values always produce identical bytes and parse back exactly.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

/// Formatter printing `f64` values as `d.dddddddddddddddde±x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Fixed17;

impl Formatter for Fixed17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            // JSON has no non-finite numbers.
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serialises `value` as compact JSON with 17-digit floats.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, Fixed17);
    value
        .serialize(&mut ser)
        .expect("serialising an in-memory value cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Like [`to_json_string`], then re-indented for reading.
pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    let compact = to_json_string(value);
    let mut out = String::with_capacity(compact.len() * 2);
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    let newline = |out: &mut String, depth: usize| {
        out.push('\n');
        out.push_str(&"  ".repeat(depth));
    };
    let chars: Vec<char> = compact.chars().collect();
    for (k, &c) in chars.iter().enumerate() {
        if in_str {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_str = true;
                out.push(c);
            }
            '{' | '[' => {
                out.push(c);
                let closes = matches!(chars.get(k + 1), Some('}') | Some(']'));
                depth += 1;
                if !closes {
                    newline(&mut out, depth);
                }
            }
            '}' | ']' => {
                depth -= 1;
                if !matches!(chars.get(k.wrapping_sub(1)), Some('{') | Some('[')) {
                    newline(&mut out, depth);
                }
                out.push(c);
            }
            ',' => {
                out.push(c);
                newline(&mut out, depth);
            }
            ':' => out.push_str(": "),
            _ => out.push(c),
        }
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Serialize;

    #[derive(Serialize)]
    struct Sample {
        x: f64,
        v: Vec<f64>,
        name: &'static str,
        empty: Vec<f64>,
    }

    #[test]
    fn seventeen_digits_round_trip() {
        let s = Sample {
            x: 0.1,
            v: vec![1.0 / 3.0, -2.5e-300, f64::NAN],
            name: "a,b:{c}",
            empty: vec![],
        };
        let text = to_json_string(&s);
        assert!(text.contains("\"x\":1.0000000000000001e-1"), "{text}");
        assert!(text.contains("null"));
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["v"][0].as_f64().unwrap(), 1.0 / 3.0);
        let pretty = to_json_pretty(&s);
        let back2: serde_json::Value = serde_json::from_str(&pretty).unwrap();
        assert_eq!(back, back2);
        assert!(pretty.contains("\"name\": \"a,b:{c}\""));
        assert!(pretty.contains("\"empty\": []"));
    }
}
