//! Artifact writers. Floats are printed with 17 significant digits so that
//! identical runs produce identical bytes and values round-trip exactly.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::error::CliError;

/// Compact JSON with every float as `d.dddddddddddddddde±x`.
struct FixedDigits;

impl Formatter for FixedDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Input(format!("json: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

/// A profile table `x,v,v_prime,flux[,residual_cell]`. The cell residual in
/// row `i` belongs to `[x_i, x_{i+1}]`; unaudited cells are left empty.
pub struct ProfileTable<'a> {
    pub x: &'a [f64],
    pub v: &'a [f64],
    pub v_prime: &'a [f64],
    pub flux: &'a [f64],
    pub residual_cell: Option<&'a [f64]>,
}

impl ProfileTable<'_> {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["x", "v", "v_prime", "flux"];
        if self.residual_cell.is_some() {
            header.push("residual_cell");
        }
        w.write_record(&header)?;
        for i in 0..self.x.len() {
            let mut row = vec![
                fmt_f64(self.x[i]),
                fmt_f64(self.v[i]),
                fmt_f64(self.v_prime[i]),
                fmt_f64(self.flux[i]),
            ];
            if let Some(r) = self.residual_cell {
                row.push(r.get(i).filter(|c| c.is_finite()).map(|c| fmt_f64(*c)).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The `x`, `v` and `v_prime` columns of a profile table.
pub type ProfileColumns = (Vec<f64>, Vec<f64>, Vec<f64>);

pub fn read_profile(path: &Path) -> Result<ProfileColumns, CliError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Input(format!("{}: missing column '{name}'", path.display())))
    };
    let (ix, iv, id) = (col("x")?, col("v")?, col("v_prime")?);
    let (mut x, mut v, mut d) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64, CliError> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| CliError::Input(format!("{}: bad number in row {}", path.display(), line + 2)))
        };
        x.push(get(ix)?);
        v.push(get(iv)?);
        d.push(get(id)?);
    }
    Ok((x, v, d))
}
