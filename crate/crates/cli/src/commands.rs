//! Subcommand arguments and their runs.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use wfe_core::aseg::{
    color_and_propagate, simulate_graph, simulate_vertex_count, stationary_sample, AsegParams, CountSampler,
};
use wfe_core::analytics::{x_infinity_law, SibuyaDist};
use wfe_core::analytics::{
    expected_fixation_time_m1_neutral, expected_fixation_time_numeric, FixationQuery, Method,
};
use wfe_core::csv_out::*;
use wfe_core::diffusion::{
    absorption_trial, simulate_path, Boundary, DiffusionSpec, PathOptions, ABSORPTION_DT, DEFAULT_DT,
};
use wfe_core::discrete::{
    concentration_probe, leftover_chain_stationary, leftover_distribution, simulate_trajectory, DiscreteConfig,
    Efficiency, LeftoverChain, StoppingRule,
};
use wfe_core::duality::{duality_grid_report, DualityGrid, Z_FLAG};
use wfe_core::{mc, Error, QuadratureSpec, StreamFamily};

use crate::parse::{self, diffusion_spec, efficiency};
use crate::{Failure, Output};

/// A parsed `start:stop:step` list.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn grid_arg(s: &str) -> Result<Grid, String> {
    parse::grid(s).map(Grid)
}

fn single(out: &Path, bytes: Vec<u8>, summary: String, partial: bool) -> Output {
    Output {
        files: vec![(out.to_path_buf(), bytes)],
        summary,
        partial,
    }
}

fn with_suffix(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.with_extension("");
    let mut s = stem.into_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Args, Debug, Clone)]
pub struct SimulateDiscrete {
    #[arg(long, default_value = "m1")]
    pub rule: StoppingRule,
    /// Resource per generation.
    #[arg(long = "N")]
    pub n: u64,
    /// `a/b`, or a decimal under rule m1.
    #[arg(long)]
    pub kappa: String,
    #[arg(long, default_value_t = 0.0)]
    pub s: f64,
    #[arg(long, default_value_t = 0.5)]
    pub x0: f64,
    /// Defaults to 100 N.
    #[arg(long)]
    pub max_generations: Option<u64>,
}

impl SimulateDiscrete {
    pub fn run(&self, stamp: &RunStamp, out: &Path) -> Result<Output, Failure> {
        let kappa = efficiency(self.rule, &self.kappa)?;
        let mut cfg = DiscreteConfig::new(self.n, kappa, self.s, self.rule, self.x0)?;
        if let Some(g) = self.max_generations {
            cfg = cfg.with_max_generations(g)?;
        }
        let traj = simulate_trajectory(&cfg, &mut StreamFamily::new(stamp.seed).stream(0))?;
        let mut buf = Vec::new();
        write_trajectory(&mut buf, stamp, &traj)?;
        let summary = match (traj.absorbed_at, traj.absorbed_state) {
            (Some(g), Some(s)) => format!("absorbed {s:?} at generation {g}"),
            _ => format!("not absorbed after {} generations", traj.generations.len() - 1),
        };
        Ok(single(out, buf, summary, false))
    }
}

#[derive(Args, Debug, Clone)]
pub struct SimulateDiffusion {
    #[arg(long, default_value = "m1")]
    pub rule: StoppingRule,
    #[arg(long)]
    pub kappa: String,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub x0: f64,
    /// Step size; 1e-3 for paths, 1e-4 for absorption studies.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,
    /// Run replicates until absorption and write their exit times.
    #[arg(long)]
    pub absorption: bool,
    #[arg(long, default_value = "1000", value_parser = parse::count)]
    pub replicates: u64,
    #[arg(long, default_value_t = 1)]
    pub record_every: u64,
    /// First index of the case-(ii) sum under rule m2 (1 or 2).
    #[arg(long, default_value_t = 2)]
    pub caseii_sum_from: u64,
}

impl SimulateDiffusion {
    pub fn run(&self, stamp: &RunStamp, out: &Path) -> Result<Output, Failure> {
        let spec = diffusion_spec(self.rule, &self.kappa, self.alpha, self.caseii_sum_from)?;
        let family = StreamFamily::new(stamp.seed);
        let mut buf = Vec::new();
        if self.absorption {
            let dt = self.dt.unwrap_or(ABSORPTION_DT);
            let trials: Vec<(Boundary, f64)> =
                mc::map_replicates(family, self.replicates, |_, rng| absorption_trial(&spec, self.x0, dt, rng))
                    .into_iter()
                    .collect::<Result<_, Error>>()?;
            write_absorption(&mut buf, stamp, &trials)?;
            let ones = trials.iter().filter(|(b, _)| *b == Boundary::One).count();
            let mean = trials.iter().map(|(_, t)| t).sum::<f64>() / trials.len().max(1) as f64;
            let summary = format!("{} replicates, {ones} absorbed at 1, mean time {mean:.5}", trials.len());
            return Ok(single(out, buf, summary, false));
        }
        let dt = self.dt.unwrap_or(DEFAULT_DT);
        let opts = PathOptions::horizon(self.horizon).thinned(self.record_every);
        let path = simulate_path(&spec, self.x0, dt, opts, &mut family.stream(0))?;
        write_path(&mut buf, stamp, &path)?;
        let summary = match path.absorbed {
            Some((b, t)) => format!("absorbed at {} at t = {t}", b.value()),
            None => format!("X_T = {}", path.values.last().copied().unwrap_or(self.x0)),
        };
        Ok(single(out, buf, summary, false))
    }
}

fn check_m1_kappa_one(spec: &DiffusionSpec, mc_replicates: u64) -> Result<(), Failure> {
    if spec.kappa >= 1.0 && mc_replicates > 0 {
        return Err(Failure::Invalid(
            "--mc-replicates: paths with kappa = 1 never reach 1, so absorption runs do not end".into(),
        ));
    }
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct Fixation {
    #[arg(long, default_value = "m1")]
    pub rule: StoppingRule,
    #[arg(long)]
    pub kappa: String,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Initial inefficient frequencies as start:stop:step.
    #[arg(long, default_value = "0:1:0.05", value_parser = grid_arg)]
    pub grid_y: Grid,
    /// Also estimate each point from this many diffusion paths.
    #[arg(long, default_value = "0", value_parser = parse::count)]
    pub mc_replicates: u64,
    #[arg(long, default_value_t = ABSORPTION_DT)]
    pub dt: f64,
    #[arg(long, default_value_t = 2)]
    pub caseii_sum_from: u64,
}

impl Fixation {
    fn analytic(&self, spec: &DiffusionSpec, y: f64) -> Result<(f64, Method), Error> {
        if spec.is_m1() && spec.kappa >= 1.0 {
            // the upper boundary is never hit: only the long-run limit exists
            return Ok((1.0 - x_infinity_law(spec.alpha, 1.0 - y)?, Method::ClosedForm));
        }
        FixationQuery::new(spec.clone(), y)?.probability(&QuadratureSpec::default())
    }

    pub fn run(&self, stamp: &RunStamp, out: &Path) -> Result<Output, Failure> {
        let spec = diffusion_spec(self.rule, &self.kappa, self.alpha, self.caseii_sum_from)?;
        check_m1_kappa_one(&spec, self.mc_replicates)?;
        let family = StreamFamily::new(stamp.seed);
        let mut rows = Vec::new();
        let mut failures = Vec::new();
        for &y in &self.grid_y.0 {
            let row = |p_fix, method: Method| FixationRow {
                kappa: self.kappa.clone(),
                alpha: self.alpha,
                y,
                p_fix,
                method: method.as_str(),
            };
            match self.analytic(&spec, y) {
                Ok((p, m)) => rows.push(row(p, m)),
                Err(e) => failures.push(e),
            }
            if self.mc_replicates > 0 {
                let fam = family.child(&format!("y/{y:e}"));
                let s = mc::try_summarize(fam, self.mc_replicates, |_, rng| {
                    Ok((absorption_trial(&spec, 1.0 - y, self.dt, rng)?.0 == Boundary::Zero) as u8 as f64)
                })?;
                rows.push(row(s.mean, Method::MonteCarlo));
            }
        }
        if rows.is_empty() {
            return Err(failures.remove(0).into());
        }
        let mut buf = Vec::new();
        write_fixation_curve(&mut buf, stamp, &rows)?;
        let mut summary = format!("{} rows", rows.len());
        if let Some(e) = failures.first() {
            summary += &format!(", {} points failed (first: {e})", failures.len());
        }
        Ok(single(out, buf, summary, !failures.is_empty()))
    }
}

#[derive(Args, Debug, Clone)]
pub struct FixationTime {
    #[arg(long, default_value = "m1")]
    pub rule: StoppingRule,
    #[arg(long)]
    pub kappa: String,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Initial efficient frequencies as start:stop:step.
    #[arg(long, default_value = "0.1:0.9:0.1", value_parser = grid_arg)]
    pub grid_x: Grid,
    #[arg(long, default_value = "0", value_parser = parse::count)]
    pub mc_replicates: u64,
    #[arg(long, default_value_t = ABSORPTION_DT)]
    pub dt: f64,
    #[arg(long, default_value_t = 2)]
    pub caseii_sum_from: u64,
}

impl FixationTime {
    pub fn run(&self, stamp: &RunStamp, out: &Path) -> Result<Output, Failure> {
        let spec = diffusion_spec(self.rule, &self.kappa, self.alpha, self.caseii_sum_from)?;
        check_m1_kappa_one(&spec, self.mc_replicates)?;
        let family = StreamFamily::new(stamp.seed);
        let quad = QuadratureSpec::default();
        let mut buf = Vec::new();
        let mut sink = CsvSink::new(&mut buf, stamp, &["kappa", "alpha", "x", "mean_time", "se", "method"])?;
        let mut failures = Vec::new();
        let mut rows = 0;
        for &x in &self.grid_x.0 {
            let value = if spec.is_m1() && self.alpha == 0.0 {
                expected_fixation_time_m1_neutral(spec.kappa, x).map(|v| (v, Method::ClosedForm))
            } else {
                expected_fixation_time_numeric(&spec, x, &quad).map(|v| (v, Method::Quadrature))
            };
            match value {
                Ok((v, m)) => {
                    sink.row([self.kappa.clone(), self.alpha.to_string(), x.to_string(), v.to_string(), String::new(), m.as_str().into()])?;
                    rows += 1;
                }
                Err(e) => failures.push(e),
            }
            if self.mc_replicates > 0 {
                let fam = family.child(&format!("x/{x:e}"));
                let s = mc::try_summarize(fam, self.mc_replicates, |_, rng| Ok(absorption_trial(&spec, x, self.dt, rng)?.1))?;
                sink.row([
                    self.kappa.clone(),
                    self.alpha.to_string(),
                    x.to_string(),
                    s.mean.to_string(),
                    s.std_error().to_string(),
                    Method::MonteCarlo.as_str().into(),
                ])?;
                rows += 1;
            }
        }
        sink.finish()?;
        if rows == 0 {
            return Err(failures.remove(0).into());
        }
        let summary = format!("{rows} rows, {} points failed", failures.len());
        Ok(single(out, buf, summary, !failures.is_empty()))
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsegMode {
    /// Edge and vertex lists of the full graph.
    Graph,
    /// The vertex-count path only.
    Count,
}

#[derive(Args, Debug, Clone)]
pub struct Aseg {
    #[arg(long, default_value_t = 1)]
    pub n0: u64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,
    /// Colour tips with type 0 at this probability and propagate types.
    #[arg(long)]
    pub x: Option<f64>,
    #[arg(long, value_enum, default_value = "graph")]
    pub mode: AsegMode,
    /// Active-vertex count treated as explosion.
    #[arg(long, default_value = "1e6", value_parser = parse::count)]
    pub ceiling: u64,
}

impl Aseg {
    pub fn run(&self, stamp: &RunStamp, out: &Path) -> Result<Output, Failure> {
        let params = AsegParams::new(self.n0, self.alpha, self.kappa, self.horizon, self.x.unwrap_or(0.5))?;
        let mut rng = StreamFamily::new(stamp.seed).stream(0);
        match self.mode {
            AsegMode::Count => {
                let path = simulate_vertex_count(&params, self.ceiling, &mut rng)?;
                let mut buf = Vec::new();
                write_count_path(&mut buf, stamp, &path)?;
                let summary = match path.exploded_at {
                    Some(t) => format!("exploded past {} vertices at t = {t}", self.ceiling),
                    None => format!("{} jumps, Z_T = {}", path.counts.len(), path.final_count()),
                };
                Ok(single(out, buf, summary, path.exploded_at.is_some()))
            }
            AsegMode::Graph => {
                let mut graph = simulate_graph(&params, self.ceiling, &mut rng)?;
                if let Some(x) = self.x {
                    graph = color_and_propagate(graph, x, &mut rng);
                }
                let (mut edges, mut verts) = (Vec::new(), Vec::new());
                write_graph_edges(&mut edges, stamp, &graph)?;
                write_graph_vertices(&mut verts, stamp, &graph)?;
                let summary = format!(
                    "{} vertices, {} edges, {} active at T",
                    graph.vertices.len(),
                    graph.edges.len(),
                    graph.tips().count()
                );
                Ok(Output {
                    files: vec![
                        (with_suffix(out, ".edges.csv"), edges),
                        (with_suffix(out, ".vertices.csv"), verts),
                    ],
                    summary,
                    partial: graph.exploded_at.is_some(),
                })
            }
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct DualityCheck {
    /// Base grid; only `default` is defined. Axis flags override it.
    #[arg(long, default_value = "default")]
    pub grid: String,
    #[arg(long, value_delimiter = ',')]
    pub kappas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub xs: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    pub ts: Option<Vec<f64>>,
    /// Replicates per side.
    #[arg(long, default_value = "1e5", value_parser = parse::count)]
    pub replicates: u64,
    #[arg(long, default_value_t = ABSORPTION_DT)]
    pub dt: f64,
}

impl DualityCheck {
    pub fn run(&self, stamp: &RunStamp, out: &Path) -> Result<Output, Failure> {
        if self.grid != "default" {
            return Err(Failure::Invalid(format!("--grid: unknown grid '{}' (expected default)", self.grid)));
        }
        let mut grid = DualityGrid::default();
        if let Some(v) = &self.kappas {
            grid.kappas = v.clone();
        }
        if let Some(v) = &self.alphas {
            grid.alphas = v.clone();
        }
        if let Some(v) = &self.xs {
            grid.xs = v.clone();
        }
        if let Some(v) = &self.ns {
            grid.ns = v.clone();
        }
        if let Some(v) = &self.ts {
            grid.ts = v.clone();
        }
        let cells = duality_grid_report(
            &grid,
            self.replicates,
            self.dt,
            &CountSampler::default(),
            StreamFamily::new(stamp.seed),
        )?;
        let mut buf = Vec::new();
        write_duality(&mut buf, stamp, &cells)?;
        let over = cells.iter().filter(|c| c.z_score.abs() > Z_FLAG).count();
        let exploded = cells.iter().filter(|c| c.exploded > 0).count();
        let summary = format!("{} cells, {over} with |z| > {Z_FLAG}, {exploded} with explosions", cells.len());
        Ok(single(out, buf, summary, false))
    }
}

#[derive(Args, Debug, Clone)]
pub struct Leftover {
    /// Exact `a/b` with 0 < a/b < 1.
    #[arg(long)]
    pub kappa: String,
    #[arg(long = "N", default_value_t = 10_000)]
    pub n: u64,
    #[arg(long, default_value_t = 0.5)]
    pub x: f64,
    #[arg(long, default_value = "1e4", value_parser = parse::count)]
    pub replicates: u64,
}

impl Leftover {
    pub fn run(&self, stamp: &RunStamp, out: &Path) -> Result<Output, Failure> {
        let Efficiency::Exact(kappa) = efficiency(StoppingRule::M2, &self.kappa)? else {
            unreachable!("rule m2 always parses an exact kappa")
        };
        let cfg = DiscreteConfig::new(self.n, kappa, 0.0, StoppingRule::M2, self.x)?;
        let empirical = leftover_distribution(&cfg, self.x, self.replicates, StreamFamily::new(stamp.seed))?;
        let stationary = match leftover_chain_stationary(&LeftoverChain::from_kappa(kappa, self.x)?) {
            Ok(p) => Some(p),
            Err(Error::DegenerateChain(_)) => None,
            Err(e) => return Err(e.into()),
        };
        let b = kappa.denom() as f64;
        let mut buf = Vec::new();
        let mut sink = CsvSink::new(&mut buf, stamp, &["j", "leftover", "empirical", "stationary"])?;
        for (j, p) in empirical.iter().enumerate() {
            let st = stationary.as_ref().map(|s| s[j].to_string()).unwrap_or_default();
            sink.row([j.to_string(), (j as f64 / b).to_string(), p.to_string(), st])?;
        }
        sink.finish()?;
        let tv = 0.5 * empirical.iter().map(|p| (p - 1.0 / b).abs()).sum::<f64>();
        Ok(single(out, buf, format!("TV to uniform {tv:.5}"), false))
    }
}

#[derive(Args, Debug, Clone)]
pub struct Concentration {
    #[arg(long, default_value = "m1")]
    pub rule: StoppingRule,
    #[arg(long)]
    pub kappa: String,
    /// Comma-separated resource levels.
    #[arg(long = "N", value_delimiter = ',', default_value = "1000,10000,100000")]
    pub n: Vec<u64>,
    #[arg(long, default_value_t = 0.5)]
    pub x: f64,
    /// Window exponent in (-1/2, 0).
    #[arg(long, default_value_t = -0.4, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, default_value = "1e3", value_parser = parse::count)]
    pub replicates: u64,
}

impl Concentration {
    pub fn run(&self, stamp: &RunStamp, out: &Path) -> Result<Output, Failure> {
        let kappa = efficiency(self.rule, &self.kappa)?;
        let family = StreamFamily::new(stamp.seed);
        let mut buf = Vec::new();
        let mut sink = CsvSink::new(&mut buf, stamp, &["N", "kappa", "x", "a", "probability", "se"])?;
        let mut probs = Vec::new();
        for &n in &self.n {
            let cfg = DiscreteConfig::new(n, kappa, 0.0, self.rule, self.x)?;
            let s = concentration_probe(&cfg, self.x, self.a, self.replicates, family.child(&format!("N/{n}")))?;
            sink.row([
                n.to_string(),
                self.kappa.clone(),
                self.x.to_string(),
                self.a.to_string(),
                s.mean.to_string(),
                s.std_error().to_string(),
            ])?;
            probs.push(s.mean);
        }
        sink.finish()?;
        let probs: Vec<String> = probs.iter().map(|p| format!("{p:.4}")).collect();
        Ok(single(out, buf, format!("probabilities {}", probs.join(" ")), false))
    }
}

#[derive(Args, Debug, Clone)]
pub struct Sibuya {
    /// Selection; gamma = 1 - 2 alpha.
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10)]
    pub kmax: usize,
    /// Sample Z_T of the kappa = 1 count process from this many replicates.
    #[arg(long, default_value = "0", value_parser = parse::count)]
    pub replicates: u64,
    #[arg(long, default_value_t = 200.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1)]
    pub n0: u64,
    #[arg(long, default_value = "1e12", value_parser = parse::count)]
    pub ceiling: u64,
}

impl Sibuya {
    pub fn run(&self, stamp: &RunStamp, out: &Path) -> Result<Output, Failure> {
        let dist = SibuyaDist::from_alpha(self.alpha)?;
        let pmf = dist.pmf_vec(self.kmax);
        let sample = if self.replicates > 0 {
            let sampler = CountSampler::default().with_ceiling(self.ceiling);
            Some(stationary_sample(
                self.alpha,
                self.horizon,
                self.n0,
                self.replicates,
                self.kmax,
                &sampler,
                StreamFamily::new(stamp.seed),
            )?)
        } else {
            None
        };
        let empirical = sample.as_ref().map(|s| s.pmf());
        let mut buf = Vec::new();
        let mut sink = CsvSink::new(&mut buf, stamp, &["k", "pmf", "empirical"])?;
        for k in 1..=self.kmax {
            let e = empirical.as_ref().map(|e| e[k - 1].to_string()).unwrap_or_default();
            sink.row([k.to_string(), pmf[k - 1].to_string(), e])?;
        }
        sink.finish()?;
        let (summary, partial) = match &sample {
            Some(s) => (
                format!("TV on 1..{} = {:.5}, {} exploded", self.kmax, s.tv_to_sibuya(&dist, self.kmax), s.exploded),
                s.exploded > 0,
            ),
            None => (format!("gamma = {}", dist.gamma), false),
        };
        Ok(single(out, buf, summary, partial))
    }
}
