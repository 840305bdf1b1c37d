//! Deterministic report emission.
//!
//! Every run writes a schema-versioned `report.json` plus optional CSV
//! side files. Output is byte-identical across runs of the same
//! configuration: floats are printed in fixed scientific notation with
//! 17 significant digits (lossless for f64), struct fields serialize
//! in declaration order, and maps are sorted.

use std::collections::BTreeMap;
use std::io::{self, Write as IoWrite};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

use crate::conformal::{ExistenceVerdict, SpectrumVerdict, WeightedAtomicMeasure};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Top-level shape of `report.json`.
#[derive(Clone, Debug, Serialize)]
pub struct ReportEnvelope<T: Serialize> {
    pub schema_version: u32,
    /// Which subcommand produced the report.
    pub command: String,
    /// Human-readable description of the inputs (system, potential,
    /// parameters) — sorted keys.
    pub inputs: BTreeMap<String, String>,
    pub payload: T,
}

impl<T: Serialize> ReportEnvelope<T> {
    pub fn new(command: impl Into<String>, payload: T) -> Self {
        ReportEnvelope {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            inputs: BTreeMap::new(),
            payload,
        }
    }

    pub fn input(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.inputs.insert(key.into(), value.into());
        self
    }
}

/// Pretty JSON with every f64 rendered as `{:.17e}` — a fixed-width,
/// locale-independent, round-trip-exact encoding.
struct DeterministicFormatter<'a> {
    pretty: PrettyFormatter<'a>,
}

impl DeterministicFormatter<'_> {
    fn new() -> Self {
        DeterministicFormatter {
            pretty: PrettyFormatter::new(),
        }
    }
}

impl Formatter for DeterministicFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.17e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.pretty.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.pretty.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(writer)
    }
}

/// Render any serializable value to the deterministic JSON form.
pub fn render_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, DeterministicFormatter::new());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let rendered = render_json(value)?;
    std::fs::write(path, rendered)?;
    Ok(())
}

fn fmt_float(v: f64) -> String {
    format!("{v:.17e}")
}

/// Write an atomic measure as CSV: `# comment` lines, a header row,
/// then `k,S_k,weight` per support point. Refuses nonempty weight sets
/// that do not sum to 1 within 1e-9; an empty measure yields a
/// header-only file.
pub fn write_measure_csv(
    path: &Path,
    m: &WeightedAtomicMeasure,
    comments: &[String],
) -> Result<()> {
    if !m.points.is_empty() {
        let mass = m.total_mass();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::ConstraintViolation {
                condition: "normalized weights".into(),
                detail: format!("measure mass {mass:.12} is not 1 within 1e-9"),
            });
        }
    }
    let mut out = Vec::new();
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "# beta = {}", fmt_float(m.beta))?;
    writeln!(out, "# boundary_defect = {}", fmt_float(m.boundary_defect))?;
    writeln!(out, "k,S_k,weight")?;
    for (i, (sk, lw)) in m.birkhoff_sums.iter().zip(&m.log_weights).enumerate() {
        let k = m.k_range.0 + i as i64;
        writeln!(out, "{k},{},{}", fmt_float(*sk), fmt_float(lw.exp()))?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn verdict_name(v: ExistenceVerdict) -> &'static str {
    match v {
        ExistenceVerdict::Holds => "holds",
        ExistenceVerdict::Fails => "fails",
        ExistenceVerdict::Inconclusive => "inconclusive",
    }
}

/// Write a spectrum scan as CSV: one row per β with the per-β verdict
/// and the tail maxima behind it.
pub fn write_spectrum_csv(
    path: &Path,
    verdict: &SpectrumVerdict,
    comments: &[String],
) -> Result<()> {
    let mut out = Vec::new();
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "# classification = {}", verdict.classification.name())?;
    writeln!(out, "beta,verdict,tail_max_fwd,tail_max_bwd,horizon")?;
    for line in &verdict.lines {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_float(line.beta),
            verdict_name(line.verdict),
            fmt_float(line.forward_tail),
            fmt_float(line.backward_tail),
            verdict.horizon
        )?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write a generic numeric table as CSV with `# comment` lines.
pub fn write_table_csv(
    path: &Path,
    comments: &[String],
    header: &str,
    rows: &[Vec<f64>],
) -> Result<()> {
    let mut out = Vec::new();
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{header}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| fmt_float(*v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{atomic_periodic, PeriodicOutcome};
    use crate::dynsys::{DynSystem, Point};
    use crate::potential::Potential;

    #[derive(Serialize)]
    struct Sample {
        name: String,
        x: f64,
        xs: Vec<f64>,
    }

    #[test]
    fn json_rendering_is_deterministic_and_lossless() {
        let v = Sample {
            name: "probe".into(),
            x: 0.1,
            xs: vec![1.0, -2.5e-300, 3.0e300, 0.0],
        };
        let a = render_json(&v).unwrap();
        let b = render_json(&v).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("1.00000000000000006e-1"), "{a}");
        // every float survives a parse round-trip bit-for-bit
        let parsed: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(parsed["x"].as_f64().unwrap().to_bits(), 0.1f64.to_bits());
        assert_eq!(
            parsed["xs"][1].as_f64().unwrap().to_bits(),
            (-2.5e-300f64).to_bits()
        );
    }

    #[test]
    fn envelope_carries_schema_and_inputs() {
        let env = ReportEnvelope::new("spectrum", vec![1.0f64])
            .input("system", "rotation(golden)")
            .input("beta_count", "5");
        let s = render_json(&env).unwrap();
        assert!(s.contains("\"schema_version\": 1"));
        assert!(s.contains("\"system\": \"rotation(golden)\""));
        let again = render_json(&env).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn measure_csv_checks_mass_and_writes_rows() {
        let dir = tempfile::tempdir().unwrap();
        let s = DynSystem::finite_cycle(3).unwrap();
        let f = Potential::from_cycle_values(vec![1.0, -2.0, 1.0]);
        let x = Point::cycle(3, 1).unwrap();
        let m = match atomic_periodic(&s, &f, &x, 3, 0.7).unwrap() {
            PeriodicOutcome::Measure(m) => m,
            other => panic!("{other:?}"),
        };
        let path = dir.path().join("measure.csv");
        write_measure_csv(&path, &m, &["3-cycle".into()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# 3-cycle\n"));
        assert!(text.contains("k,S_k,weight"));
        assert_eq!(text.lines().count(), 3 + 1 + 3);

        // a tampered measure must be refused
        let mut bad = m.clone();
        bad.log_weights[0] += 0.5;
        assert!(write_measure_csv(&dir.path().join("bad.csv"), &bad, &[]).is_err());

        // an empty measure still writes its header
        let mut empty = m.clone();
        empty.points.clear();
        empty.log_weights.clear();
        empty.birkhoff_sums.clear();
        empty.k_range = (0, -1);
        let epath = dir.path().join("empty.csv");
        write_measure_csv(&epath, &empty, &[]).unwrap();
        let etext = std::fs::read_to_string(&epath).unwrap();
        assert!(etext.ends_with("k,S_k,weight\n"));
    }

    #[test]
    fn spectrum_csv_has_one_row_per_beta() {
        use crate::conformal::spectrum_scan;
        use crate::dynsys::RotationNumber;
        let dir = tempfile::tempdir().unwrap();
        let s = DynSystem::rotation(RotationNumber::golden());
        let f = Potential::Constant(1.0);
        let seeds = vec![Point::circle(0.17)];
        let v = spectrum_scan(&s, &f, &[-1.0, 0.0, 1.0], &seeds, 2_000, 1e-3).unwrap();
        let path = dir.path().join("spectrum.csv");
        write_spectrum_csv(&path, &v, &["probe".into()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let data_rows: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("beta"))
            .collect();
        assert_eq!(data_rows.len(), 3);
        assert!(text.contains("beta,verdict,tail_max_fwd,tail_max_bwd,horizon"));
        assert!(data_rows[1].contains("holds"), "{text}");
    }
}
