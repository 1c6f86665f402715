//! Seeded Monte-Carlo sweeps, CSV persistence and summaries.
//!
//! Seeds: a run is identified by `run_seed(master, rep)`. Neither the scheme
//! nor the axis index enters, so repetition `rep` uses the same seed for
//! every scheme and every axis value; with per-entity scenario and channel
//! streams, neighbouring axis values then share most of their draws. Each
//! run seed splits into scenario, channel and solver seeds through
//! [`InstanceSeeds::from_run_seed`]; `solve --seed <run_seed>` reproduces a
//! sweep row.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::optimizer::{maximize_sum_rate, SchemeId, SolveResult};
use crate::params::SimParams;
use crate::scenario::{generate_scenario, Scenario};

pub const CSV_HEADER: &str = "axis,scheme,seed,sum_rate_bps,iterations,feasible,wall_time_s";
pub const SUMMARY_HEADER: &str =
    "axis,scheme,runs,mean_sum_rate_bps,std_err_bps,pa_improvement_pct,feasible_fraction";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    CellularUsers,
    D2dPairs,
    /// Elements per panel side, `N`.
    RisSideN,
    QuantBitsE,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::CellularUsers, Axis::D2dPairs, Axis::RisSideN, Axis::QuantBitsE];

    pub fn name(self) -> &'static str {
        match self {
            Axis::CellularUsers => "cellular_users",
            Axis::D2dPairs => "d2d_pairs",
            Axis::RisSideN => "ris_side_n",
            Axis::QuantBitsE => "quant_bits_e",
        }
    }

    fn aliases(self) -> &'static [&'static str] {
        match self {
            Axis::CellularUsers => &["cu", "c"],
            Axis::D2dPairs => &["d2d", "d"],
            Axis::RisSideN => &["n"],
            Axis::QuantBitsE => &["e"],
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s || a.aliases().contains(&s.as_str()))
            .ok_or_else(|| Error::param("axis", format!("unknown sweep axis `{s}`")))
    }
}

/// Operating point `(C, D, N, e)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub cellular_users: usize,
    pub d2d_pairs: usize,
    pub ris_side: usize,
    pub quant_bits: u32,
}

impl Default for OperatingPoint {
    fn default() -> Self {
        Self {
            cellular_users: 5,
            d2d_pairs: 10,
            ris_side: 4,
            quant_bits: 3,
        }
    }
}

impl OperatingPoint {
    pub fn with_axis(mut self, axis: Axis, value: usize) -> Result<Self> {
        match axis {
            Axis::CellularUsers => self.cellular_users = value,
            Axis::D2dPairs => self.d2d_pairs = value,
            Axis::RisSideN => self.ris_side = value,
            Axis::QuantBitsE => {
                self.quant_bits = u32::try_from(value).map_err(|_| Error::param("e", "out of range"))?
            }
        }
        Ok(self)
    }

    pub fn apply(&self, params: &SimParams) -> Result<SimParams> {
        let p = SimParams {
            ris_side: self.ris_side,
            quant_bits: self.quant_bits,
            ..params.clone()
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub axis: Axis,
    pub values: Vec<usize>,
    pub fixed: OperatingPoint,
    pub schemes: Vec<SchemeId>,
    pub seeds: usize,
    pub master_seed: u64,
    pub params: SimParams,
}

impl ExperimentSpec {
    pub fn new(axis: Axis, values: Vec<usize>) -> Self {
        Self {
            axis,
            values,
            fixed: OperatingPoint::default(),
            schemes: SchemeId::ALL.to_vec(),
            seeds: 20,
            master_seed: 0,
            params: SimParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::param("values", "at least one axis value is required"));
        }
        if self.seeds == 0 {
            return Err(Error::param("seeds", "must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::param("schemes", "at least one scheme is required"));
        }
        for &v in &self.values {
            self.fixed.with_axis(self.axis, v)?.apply(&self.params)?;
        }
        Ok(())
    }

    pub fn num_runs(&self) -> usize {
        self.values.len() * self.schemes.len() * self.seeds
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `mix64(mix64(master) ^ rep)`.
pub fn run_seed(master: u64, rep: usize) -> u64 {
    mix64(mix64(master) ^ rep as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSeeds {
    pub scenario: u64,
    pub channel: u64,
    pub solver: u64,
}

impl InstanceSeeds {
    pub fn from_run_seed(seed: u64) -> Self {
        Self {
            scenario: mix64(seed ^ 0x5CE7_A210),
            channel: mix64(seed ^ 0xC4A7_7E15),
            solver: mix64(seed ^ 0x501E_0000),
        }
    }
}

/// Scenario and channel draw for one run seed.
pub fn build_instance(params: &SimParams, point: &OperatingPoint, seed: u64) -> Result<(Scenario, ChannelRealization)> {
    let params = point.apply(params)?;
    let seeds = InstanceSeeds::from_run_seed(seed);
    let scenario = generate_scenario(&params, point.cellular_users, point.d2d_pairs, seeds.scenario)?;
    let channels = ChannelRealization::draw(&scenario, seeds.channel)?;
    Ok((scenario, channels))
}

pub fn solve_instance(params: &SimParams, point: &OperatingPoint, scheme: SchemeId, seed: u64) -> Result<SolveResult> {
    let (scenario, channels) = build_instance(params, point, seed)?;
    maximize_sum_rate(&scenario, &channels, scheme, InstanceSeeds::from_run_seed(seed).solver)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub axis: usize,
    pub scheme: SchemeId,
    pub seed: u64,
    pub sum_rate_bps: f64,
    pub iterations: usize,
    pub feasible: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Directory for per-run `SolveResult` JSON and iteration traces.
    pub trace_dir: Option<PathBuf>,
}

/// Runs every `(axis value, scheme, repetition)` and hands each axis value's
/// records, in canonical order, to `sink` as soon as they are complete.
pub fn run_sweep(
    spec: &ExperimentSpec,
    options: &SweepOptions,
    mut sink: impl FnMut(&[ResultRecord]) -> Result<()>,
) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    if let Some(dir) = &options.trace_dir {
        fs::create_dir_all(dir)?;
    }
    let mut all = Vec::with_capacity(spec.num_runs());
    for &value in &spec.values {
        let point = spec.fixed.with_axis(spec.axis, value)?;
        let jobs: Vec<(SchemeId, usize)> = spec
            .schemes
            .iter()
            .flat_map(|&s| (0..spec.seeds).map(move |r| (s, r)))
            .collect();
        let records = jobs
            .par_iter()
            .map(|&(scheme, rep)| {
                let seed = run_seed(spec.master_seed, rep);
                let start = Instant::now();
                let result = solve_instance(&spec.params, &point, scheme, seed);
                let wall_time_s = start.elapsed().as_secs_f64();
                if let (Some(dir), Ok(r)) = (&options.trace_dir, &result) {
                    write_trace(dir, spec.axis, value, scheme, rep, r)?;
                }
                Ok(match result {
                    Ok(r) => ResultRecord {
                        axis: value,
                        scheme,
                        seed,
                        sum_rate_bps: r.sum_rate_bps,
                        iterations: r.iterations,
                        feasible: r.feasible,
                        wall_time_s,
                    },
                    Err(_) => ResultRecord {
                        axis: value,
                        scheme,
                        seed,
                        sum_rate_bps: 0.0,
                        iterations: 0,
                        feasible: false,
                        wall_time_s,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        sink(&records)?;
        all.extend(records);
    }
    Ok(all)
}

fn write_trace(dir: &Path, axis: Axis, value: usize, scheme: SchemeId, rep: usize, r: &SolveResult) -> Result<()> {
    let stem = format!("{axis}_{value}_{scheme}_{rep}");
    fs::write(dir.join(format!("{stem}.json")), r.to_json()?)?;
    fs::write(dir.join(format!("{stem}.jsonl")), r.history_jsonl()?)?;
    Ok(())
}

/// Streaming CSV writer for [`ResultRecord`]s.
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(w: W) -> Self {
        Self {
            inner: csv::WriterBuilder::new().has_headers(true).from_writer(w),
        }
    }

    pub fn write(&mut self, records: &[ResultRecord]) -> Result<()> {
        for r in records {
            self.inner.serialize(r)?;
        }
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))
    }
}

pub fn write_records_csv<W: Write>(w: W, records: &[ResultRecord]) -> Result<()> {
    let mut out = RecordWriter::new(w);
    if records.is_empty() {
        out.inner.write_record(CSV_HEADER.split(','))?;
    }
    out.write(records)
}

pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<ResultRecord>> {
    let mut reader = csv::Reader::from_reader(r);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::param("csv", format!("unexpected header `{}`", header.join(","))));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub axis: usize,
    pub scheme: SchemeId,
    pub runs: usize,
    pub mean_sum_rate_bps: f64,
    pub std_err_bps: f64,
    /// `(mean_PA − mean_X) / mean_X · 100`; empty for PA itself.
    pub pa_improvement_pct: Option<f64>,
    pub feasible_fraction: f64,
}

/// Mean and standard error per `(axis value, scheme)`, in first-seen order.
pub fn summarize(records: &[ResultRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::Empty("result records"));
    }
    let mut keys: Vec<(usize, SchemeId)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.axis, r.scheme)) {
            keys.push((r.axis, r.scheme));
        }
    }
    let stats = |axis: usize, scheme: SchemeId| {
        let xs: Vec<&ResultRecord> = records.iter().filter(|r| r.axis == axis && r.scheme == scheme).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().map(|r| r.sum_rate_bps).sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|r| (r.sum_rate_bps - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let feasible = xs.iter().filter(|r| r.feasible).count() as f64 / n;
        (xs.len(), mean, (var / n).sqrt(), feasible)
    };
    Ok(keys
        .iter()
        .map(|&(axis, scheme)| {
            let (runs, mean, se, feasible) = stats(axis, scheme);
            let pa = (scheme != SchemeId::PA && keys.contains(&(axis, SchemeId::PA)))
                .then(|| stats(axis, SchemeId::PA).1)
                .map(|pa| (pa - mean) / mean * 100.0);
            SummaryRow {
                axis,
                scheme,
                runs,
                mean_sum_rate_bps: mean,
                std_err_bps: se,
                pa_improvement_pct: pa,
                feasible_fraction: feasible,
            }
        })
        .collect())
}

pub fn write_summary_csv<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(axis: usize, scheme: SchemeId, seed: u64, rate: f64) -> ResultRecord {
        ResultRecord {
            axis,
            scheme,
            seed,
            sum_rate_bps: rate,
            iterations: 3,
            feasible: true,
            wall_time_s: 0.25,
        }
    }

    #[test]
    fn axis_names_parse() {
        for a in Axis::ALL {
            assert_eq!(a.name().parse::<Axis>().unwrap(), a);
        }
        assert_eq!("N".parse::<Axis>().unwrap(), Axis::RisSideN);
        assert!("bogus".parse::<Axis>().is_err());
    }

    #[test]
    fn run_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for r in 0..500 {
            assert!(seen.insert(run_seed(7, r)));
        }
        assert_ne!(run_seed(7, 0), run_seed(8, 0));
        let s = InstanceSeeds::from_run_seed(3);
        assert!(s.scenario != s.channel && s.channel != s.solver);
    }

    #[test]
    fn csv_header_and_round_trip() {
        let records = vec![
            rec(1, SchemeId::PA, u64::MAX, 1.234_567_890_123e10),
            rec(1, SchemeId::NonRIS, 5, 0.1 + 0.2),
        ];
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(read_records_csv(buf.as_slice()).unwrap(), records);
        let mut empty = Vec::new();
        write_records_csv(&mut empty, &[]).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim(), CSV_HEADER);
    }

    #[test]
    fn summary_arithmetic() {
        assert!(matches!(summarize(&[]), Err(Error::Empty(_))));
        let rows = summarize(&[
            rec(0, SchemeId::PA, 0, 2e9),
            rec(0, SchemeId::PA, 1, 2e9),
            rec(0, SchemeId::MP, 0, 1e9),
            rec(0, SchemeId::MP, 1, 1e9),
            rec(0, SchemeId::Fmm, 0, 2e9),
        ])
        .unwrap();
        assert_eq!(rows[0].pa_improvement_pct, None);
        assert_eq!(rows[1].pa_improvement_pct, Some(100.0));
        assert_eq!(rows[2].pa_improvement_pct, Some(0.0));
        assert_eq!(rows[1].std_err_bps, 0.0);
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().next().unwrap(), SUMMARY_HEADER);
    }

    #[test]
    fn summary_matches_spreadsheet_style_recomputation() {
        let schemes = [SchemeId::PA, SchemeId::MP, SchemeId::NonRIS];
        let mut records = Vec::new();
        for (i, s) in schemes.iter().enumerate() {
            for k in 0..4u64 {
                records.push(rec(10, *s, k, 1e9 * (1.0 + i as f64) + 1e7 * (k * k) as f64));
            }
        }
        let rows = summarize(&records).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let xs: Vec<f64> = (0..4).map(|k| 1e9 * (1.0 + i as f64) + 1e7 * (k * k) as f64).collect();
            let mean = (xs[0] + xs[1] + xs[2] + xs[3]) / 4.0;
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            let se = (ss / 3.0 / 4.0).sqrt();
            assert!((row.mean_sum_rate_bps - mean).abs() <= 1e-9 * mean);
            assert!((row.std_err_bps - se).abs() <= 1e-9 * se);
        }
    }

    #[test]
    fn sweep_cardinality_and_determinism() {
        let mut spec = ExperimentSpec::new(Axis::QuantBitsE, (1..=6).collect());
        spec.schemes = vec![SchemeId::MP];
        spec.seeds = 2;
        spec.fixed = OperatingPoint {
            cellular_users: 1,
            d2d_pairs: 2,
            ris_side: 2,
            quant_bits: 3,
        };
        let mut streamed = 0;
        let a = run_sweep(&spec, &SweepOptions::default(), |chunk| {
            streamed += chunk.len();
            Ok(())
        })
        .unwrap();
        assert_eq!(a.len(), 12);
        assert_eq!(streamed, 12);
        let b = run_sweep(&spec, &SweepOptions::default(), |_| Ok(())).unwrap();
        let strip = |v: &[ResultRecord]| {
            v.iter()
                .map(|r| ResultRecord { wall_time_s: 0.0, ..r.clone() })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = ExperimentSpec::new(Axis::D2dPairs, vec![]);
        assert!(spec.validate().is_err());
        spec.values = vec![2];
        spec.seeds = 0;
        assert!(spec.validate().is_err());
        spec.seeds = 1;
        spec.axis = Axis::QuantBitsE;
        spec.values = vec![0];
        assert!(spec.validate().is_err());
    }
}
