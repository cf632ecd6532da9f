//! Result files. Every float is written with 17 significant digits so
//! values round-trip exactly.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::Result;
use crate::experiment::{BandPoint, ComparisonPoint, ExperimentResult, SweepRow};
use crate::sampler::RunLog;

/// 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Pretty JSON output with full-precision floats.
struct FullPrecision<'a>(PrettyFormatter<'a>);

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
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

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// One row per run plus an iteration-0 row holding the initial NRMSE.
pub fn write_runlog_csv<W: Write>(w: W, log: &RunLog, dim: usize) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["iteration".to_string(), "chosen_level".to_string()];
    header.extend((1..=dim).map(|d| format!("x{d}")));
    header.extend(
        ["raw_pei", "weighted_pei", "cost_step", "cost_cum", "nrmse", "exploration_flag"].map(String::from),
    );
    out.write_record(&header)?;
    let mut row = vec!["0".to_string(), "0".to_string()];
    row.extend(std::iter::repeat_n(String::new(), dim + 2));
    row.extend([fmt_f64(0.0), fmt_f64(0.0), fmt_opt(log.initial_nrmse), "0".to_string()]);
    out.write_record(&row)?;
    for r in &log.records {
        let mut row = vec![r.iteration.to_string(), r.level.to_string()];
        row.extend(r.x.iter().map(|v| fmt_f64(*v)));
        row.extend([
            fmt_f64(r.raw_pei),
            fmt_f64(r.weighted_pei),
            fmt_f64(r.cost_step),
            fmt_f64(r.cost_cum),
            fmt_opt(r.nrmse),
            u8::from(r.exploration).to_string(),
        ]);
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_curve_csv<W: Write>(w: W, curve: &[BandPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["cost", "nrmse_q05", "nrmse_median", "nrmse_q95"])?;
    for b in curve {
        out.write_record([fmt_f64(b.cost), fmt_f64(b.q05), fmt_f64(b.median), fmt_f64(b.q95)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "ratio",
        "top_level_count_mean",
        "top_level_count_q05",
        "top_level_count_median",
        "top_level_count_q95",
        "final_nrmse_mean",
        "final_nrmse_q05",
        "final_nrmse_median",
        "final_nrmse_q95",
    ])?;
    for r in rows {
        let c = r.top_level_count;
        let e = r.final_nrmse;
        out.write_record(
            [r.ratio, c.mean, c.q05, c.median, c.q95, e.mean, e.q05, e.median, e.q95].map(fmt_f64),
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_comparison_csv<W: Write>(w: W, points: &[ComparisonPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "cost",
        "multi_nrmse_median",
        "single_nrmse_median",
        "difference_median",
        "difference_q05",
        "difference_q95",
    ])?;
    for p in points {
        out.write_record(
            [p.cost, p.multi_median, p.single_median, p.difference_median, p.difference_q05, p.difference_q95]
                .map(fmt_f64),
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_batch_curves_csv<W: Write>(w: W, curves: &[(BandPoint, BandPoint)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "cost",
        "sequential_q05",
        "sequential_median",
        "sequential_q95",
        "batch_q05",
        "batch_median",
        "batch_q95",
    ])?;
    for (s, b) in curves {
        out.write_record([s.cost, s.q05, s.median, s.q95, b.q05, b.median, b.q95].map(fmt_f64))?;
    }
    out.flush()?;
    Ok(())
}

/// Level picks per seed, with a total column.
pub fn write_level_counts_csv<W: Write>(w: W, result: &ExperimentResult) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let levels = result.level_counts.first().map_or(0, Vec::len);
    let mut header = vec!["seed".to_string()];
    header.extend((1..=levels).map(|l| format!("level{l}")));
    header.push("total".into());
    out.write_record(&header)?;
    for (s, counts) in result.seeds.iter().zip(&result.level_counts) {
        let mut row = vec![s.seed.to_string()];
        row.extend(counts.iter().map(usize::to_string));
        row.push(counts.iter().sum::<usize>().to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SeedSummary<'a> {
    seed: u64,
    setup_cost: f64,
    total_cost: f64,
    initial_nrmse: Option<f64>,
    final_nrmse: Option<f64>,
    level_counts: &'a [usize],
}

#[derive(Serialize)]
struct Summary<'a, C: Serialize> {
    config: &'a C,
    seeds: Vec<SeedSummary<'a>>,
    level_totals: Vec<usize>,
    curve: &'a [BandPoint],
}

/// `runlog_<seed>.csv` per seed, `curve.csv`, `level_counts.csv` and
/// `summary.json` (with `config` echoed) under `dir`.
pub fn write_experiment<C: Serialize>(dir: &Path, result: &ExperimentResult, dim: usize, config: &C) -> Result<()> {
    fs::create_dir_all(dir)?;
    for s in &result.seeds {
        write_runlog_csv(fs::File::create(dir.join(format!("runlog_{}.csv", s.seed)))?, &s.log, dim)?;
    }
    write_curve_csv(fs::File::create(dir.join("curve.csv"))?, &result.curve)?;
    write_level_counts_csv(fs::File::create(dir.join("level_counts.csv"))?, result)?;
    let levels = result.level_counts.first().map_or(0, Vec::len);
    let level_totals = (0..levels).map(|l| result.level_counts.iter().map(|c| c[l]).sum()).collect();
    let summary = Summary {
        config,
        seeds: result
            .seeds
            .iter()
            .zip(&result.level_counts)
            .map(|(s, c)| SeedSummary {
                seed: s.seed,
                setup_cost: s.setup_cost,
                total_cost: s.log.total_cost(),
                initial_nrmse: s.log.initial_nrmse,
                final_nrmse: s.log.final_nrmse(),
                level_counts: c,
            })
            .collect(),
        level_totals,
        curve: &result.curve,
    };
    fs::write(dir.join("summary.json"), to_json_string(&summary)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123_456_789.123_456_79, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn json_uses_full_precision() {
        let s = to_json_string(&serde_json::json!({"a": 0.1, "b": [1.0, 2]})).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("1.0000000000000000e0"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
        assert_eq!(back["b"][1].as_u64(), Some(2));
    }

    #[test]
    fn empty_runlog_has_initial_row() {
        let mut log = RunLog::new(2);
        log.initial_nrmse = Some(0.25);
        let mut buf = Vec::new();
        write_runlog_csv(&mut buf, &log, 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iteration,chosen_level,x1,x2,raw_pei,weighted_pei,cost_step,cost_cum,nrmse,exploration_flag");
        assert!(lines[1].starts_with("0,0,,,,,"));
        assert_eq!(lines.len(), 2);
    }
}
