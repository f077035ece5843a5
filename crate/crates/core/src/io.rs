//! Serialization helpers: Lebesgue exponents that may be `"inf"`, the Gabor
//! coefficient text format, and small CSV/JSON writers.
//!
//! Coefficient files are whitespace separated. The first line is a header
//!
//! ```text
//! # gabor-coefficients dim=2 k_rad=4 l_rad=10
//! ```
//!
//! followed by one line per stored coefficient, `k_1 … k_n l_1 … l_n re im`.
//! Indices absent from the file are zero; lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::Serialize;

use crate::gabor::{FrameCoefficients, Truncation};
use crate::{Complex, Error, Real, Result};

/// Serde adapter for exponents in `[1, ∞]`: numbers, or the string `"inf"`.
pub mod exponent {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    struct Exp;

    impl Visitor<'_> for Exp {
        type Value = f64;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or \"inf\"")
        }
        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            super::parse_exponent(v).map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(Exp)
    }
}

/// `"inf"`, `"infinity"` or a number.
pub fn parse_exponent(s: &str) -> Result<f64> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        t => t
            .parse()
            .map_err(|_| Error::Parse(format!("bad exponent '{s}'"))),
    }
}

pub fn format_exponent(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

pub fn write_coefficients<T: Real, W: Write>(c: &FrameCoefficients<T>, mut w: W) -> Result<()> {
    let t = c.truncation();
    let mut buf = format!(
        "# gabor-coefficients dim={} k_rad={} l_rad={}\n",
        c.dim(),
        t.k_rad,
        t.l_rad
    );
    for (k, l, v) in c.iter() {
        if v.re == T::zero() && v.im == T::zero() {
            continue;
        }
        for i in k.iter().chain(&l) {
            write!(buf, "{i} ").unwrap();
        }
        writeln!(buf, "{:e} {:e}", v.re.as_f64(), v.im.as_f64()).unwrap();
    }
    w.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn read_coefficients<T: Real, R: BufRead>(r: R) -> Result<FrameCoefficients<T>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty coefficient file".into()))??;
    let field = |name: &str| -> Result<usize> {
        header
            .split_whitespace()
            .find_map(|w| w.strip_prefix(name).and_then(|v| v.strip_prefix('=')))
            .ok_or_else(|| Error::Parse(format!("header lacks '{name}'")))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad '{name}' in header")))
    };
    if !header.starts_with("# gabor-coefficients") {
        return Err(Error::Parse("missing '# gabor-coefficients' header".into()));
    }
    let dim = field("dim")?;
    if !(1..=3).contains(&dim) {
        return Err(Error::Parse(format!("dim={dim} out of range")));
    }
    let trunc = Truncation {
        k_rad: field("k_rad")?,
        l_rad: field("l_rad")?,
    };
    let mut c = FrameCoefficients::zeros(dim, trunc);
    for (no, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Parse(format!("line {}: expected {} columns", no + 2, 2 * dim + 2));
        if cols.len() != 2 * dim + 2 {
            return Err(bad());
        }
        let idx: Vec<i64> = cols[..2 * dim]
            .iter()
            .map(|s| s.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let re: f64 = cols[2 * dim].parse().map_err(|_| bad())?;
        let im: f64 = cols[2 * dim + 1].parse().map_err(|_| bad())?;
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::Parse(format!("line {}: non-finite value", no + 2)));
        }
        c.set(&idx[..dim], &idx[dim..], Complex::new(T::lit(re), T::lit(im)))?;
    }
    Ok(c)
}

pub fn save_coefficients<T: Real>(c: &FrameCoefficients<T>, path: &Path) -> Result<()> {
    write_coefficients(c, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_coefficients<T: Real>(path: &Path) -> Result<FrameCoefficients<T>> {
    read_coefficients(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn write_json<S: Serialize>(value: &S, path: &Path) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}

/// Header plus rows of already formatted cells.
pub fn write_csv_rows<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for r in rows {
        out.write_record(r)?;
    }
    out.flush()?;
    Ok(())
}
