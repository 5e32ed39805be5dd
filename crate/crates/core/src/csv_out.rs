//! CSV writers for every study.
//!
//! Each file starts with one `#` line carrying the tool version, a hash of
//! the run configuration and the master seed, then a header row. Rows use LF
//! endings. Floats are written with Rust's shortest round-trip formatting so
//! identical values give identical bytes.

use std::io::Write;

use sha2::{Digest, Sha256};

use crate::aseg::{AsegGraph, VertexCountPath};
use crate::diffusion::{Boundary, DiffusionPath};
use crate::discrete::{Consumed, DiscreteTrajectory};
use crate::duality::DualityCell;
use crate::error::Result;
use crate::VERSION;

/// Identifies the run that produced a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunStamp {
    pub config_hash: String,
    pub seed: u64,
}

impl RunStamp {
    /// Hashes a canonical text rendering of the configuration.
    pub fn new(config_text: &str, seed: u64) -> Self {
        RunStamp {
            config_hash: sha256_hex(config_text.as_bytes())[..16].to_string(),
            seed,
        }
    }

    pub fn comment_line(&self) -> String {
        format!("# wfe {VERSION} config={} seed={}", self.config_hash, self.seed)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// A CSV writer that has already emitted the comment line and header.
pub struct CsvSink<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W, stamp: &RunStamp, header: &[&str]) -> Result<Self> {
        writeln!(out, "{}", stamp.comment_line())?;
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        inner.write_record(header)?;
        Ok(CsvSink { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub const TRAJECTORY_HEADER: [&str; 6] =
    ["generation", "pop_size", "count_type0", "frequency", "consumed_num", "consumed_den"];
pub const PATH_HEADER: [&str; 2] = ["t", "x"];
pub const ABSORPTION_HEADER: [&str; 3] = ["replicate", "boundary", "time"];
pub const FIXATION_HEADER: [&str; 5] = ["kappa", "alpha", "y", "p_fix", "method"];
pub const EDGE_HEADER: [&str; 2] = ["parent_id", "child_id"];
pub const VERTEX_HEADER: [&str; 5] = ["id", "birth_time", "deactivation_time", "active_at_T", "type"];
pub const COUNT_PATH_HEADER: [&str; 2] = ["t", "z"];
pub const DUALITY_HEADER: [&str; 11] = [
    "kappa", "alpha", "x", "n", "t", "lhs_mean", "lhs_se", "rhs_mean", "rhs_se", "z_score", "flag",
];

/// One generation per row. A real-valued cost goes in `consumed_num`
/// with an empty denominator.
pub fn write_trajectory<W: Write>(out: W, stamp: &RunStamp, traj: &DiscreteTrajectory) -> Result<()> {
    let mut sink = CsvSink::new(out, stamp, &TRAJECTORY_HEADER)?;
    for (i, g) in traj.generations.iter().enumerate() {
        let (num, den) = match g.consumed {
            Consumed::Exact(r) => (r.numer().to_string(), r.denom().to_string()),
            Consumed::Approx(v) => (v.to_string(), String::new()),
        };
        sink.row([
            i.to_string(),
            g.size_m.to_string(),
            g.count_type0.to_string(),
            g.frequency().to_string(),
            num,
            den,
        ])?;
    }
    sink.finish()
}

pub fn write_path<W: Write>(out: W, stamp: &RunStamp, path: &DiffusionPath) -> Result<()> {
    let mut sink = CsvSink::new(out, stamp, &PATH_HEADER)?;
    for (t, x) in path.times.iter().zip(&path.values) {
        sink.row([t.to_string(), x.to_string()])?;
    }
    sink.finish()
}

pub fn write_absorption<W: Write>(out: W, stamp: &RunStamp, trials: &[(Boundary, f64)]) -> Result<()> {
    let mut sink = CsvSink::new(out, stamp, &ABSORPTION_HEADER)?;
    for (i, (b, t)) in trials.iter().enumerate() {
        let b = match b {
            Boundary::Zero => "0",
            Boundary::One => "1",
        };
        sink.row([i.to_string(), b.to_string(), t.to_string()])?;
    }
    sink.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixationRow {
    pub kappa: String,
    pub alpha: f64,
    pub y: f64,
    pub p_fix: f64,
    pub method: &'static str,
}

/// `kappa` is kept as text so exact `a/b` values survive.
pub fn write_fixation_curve<W: Write>(out: W, stamp: &RunStamp, rows: &[FixationRow]) -> Result<()> {
    let mut sink = CsvSink::new(out, stamp, &FIXATION_HEADER)?;
    for r in rows {
        sink.row([
            r.kappa.clone(),
            r.alpha.to_string(),
            r.y.to_string(),
            r.p_fix.to_string(),
            r.method.to_string(),
        ])?;
    }
    sink.finish()
}

pub fn write_graph_edges<W: Write>(out: W, stamp: &RunStamp, graph: &AsegGraph) -> Result<()> {
    let mut sink = CsvSink::new(out, stamp, &EDGE_HEADER)?;
    for (p, c) in &graph.edges {
        sink.row([p.to_string(), c.to_string()])?;
    }
    sink.finish()
}

/// Untyped vertices get an empty `type` field.
pub fn write_graph_vertices<W: Write>(out: W, stamp: &RunStamp, graph: &AsegGraph) -> Result<()> {
    let mut sink = CsvSink::new(out, stamp, &VERTEX_HEADER)?;
    for v in &graph.vertices {
        sink.row([
            v.id.to_string(),
            v.birth_time.to_string(),
            v.deactivation_time.map(|t| t.to_string()).unwrap_or_default(),
            (v.active_at_horizon() as u8).to_string(),
            v.ty.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    sink.finish()
}

/// Starts with the initial state at `t = 0`, then one row per jump.
pub fn write_count_path<W: Write>(out: W, stamp: &RunStamp, path: &VertexCountPath) -> Result<()> {
    let mut sink = CsvSink::new(out, stamp, &COUNT_PATH_HEADER)?;
    sink.row(["0".to_string(), path.n0.to_string()])?;
    for (t, z) in path.event_times.iter().zip(&path.counts) {
        sink.row([t.to_string(), z.to_string()])?;
    }
    sink.finish()
}

pub fn write_duality<W: Write>(out: W, stamp: &RunStamp, cells: &[DualityCell]) -> Result<()> {
    let mut sink = CsvSink::new(out, stamp, &DUALITY_HEADER)?;
    for c in cells {
        sink.row([
            c.kappa.to_string(),
            c.alpha.to_string(),
            c.x.to_string(),
            c.n.to_string(),
            c.t.to_string(),
            c.lhs.mean.to_string(),
            c.lhs.std_error().to_string(),
            c.rhs.mean.to_string(),
            c.rhs.std_error().to_string(),
            c.z_score.to_string(),
            c.flag().to_string(),
        ])?;
    }
    sink.finish()
}
