//! `mixmu` subcommands. Every file written embeds the hash of the effective
//! configuration; CSV files carry it on a leading `#` line.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::family::{ingest_frf, write_frf, FrfFormat, PlantSample};
use crate::lti::RationalTF;
use crate::mu::MuProfile;
use crate::pipeline::{SampleMetrics, Study};
use crate::synthesis::{bandpass_tf, BandpassParams};
use crate::uncertainty::{ChannelId, UncertainPlant, Variant};

pub const FAMILY_MANIFEST: &str = "family.json";

#[derive(Debug, Parser)]
#[command(name = "mixmu", version, about = "Mixed-μ modelling and bandpass damping synthesis for resonant plants")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the payload family and its FRF files.
    Family(Common),
    /// Build uncertainty models from the family manifest and write envelopes.
    Uncertainty(Common),
    /// μ profile of an existing controller.
    Mu(WithController),
    /// Synthesize the bandpass controller; exit code 2 if μ peak > threshold.
    Synth(Common),
    /// Closed-loop metrics of a controller on every family member.
    Eval(WithController),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct WithController {
    #[command(flatten)]
    pub common: Common,
    /// Controller JSON; defaults to `<out>/controller_<variant>.json`.
    #[arg(long)]
    pub controller: Option<PathBuf>,
}

/// What a command achieved; `Uncertified` maps to a nonzero exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Certified,
    Uncertified,
}

impl Common {
    /// Effective configuration after command-line overrides.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(v) = &self.variant {
            cfg.variant = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Family(c) => cmd_family(&c.resolve()?, &c.out),
        Command::Uncertainty(c) => {
            let cfg = c.resolve()?;
            let variants = if c.variant.is_some() {
                vec![cfg.variant.clone()]
            } else {
                vec![Variant::M01, Variant::M11, Variant::M31]
            };
            cmd_uncertainty(&cfg, &c.out, &variants)
        }
        Command::Mu(w) => {
            let cfg = w.common.resolve()?;
            let path = controller_path(&cfg, &w.common.out, w.controller.as_deref());
            cmd_mu(&cfg, &w.common.out, &path)
        }
        Command::Synth(c) => cmd_synth(&c.resolve()?, &c.out),
        Command::Eval(w) => {
            let cfg = w.common.resolve()?;
            let path = controller_path(&cfg, &w.common.out, w.controller.as_deref());
            cmd_eval(&cfg, &w.common.out, &path)
        }
    }
}

fn controller_path(cfg: &RunConfig, out: &Path, given: Option<&Path>) -> PathBuf {
    given
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.join(format!("controller_{}.json", cfg.variant.label())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Write a CSV table preceded by a `# config_hash=` line.
pub fn write_table(path: &Path, hash: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "# config_hash={hash}").map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(wrap)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyEntry {
    pub sample: PlantSample,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyManifest {
    pub config_hash: String,
    pub format: FrfFormat,
    pub samples: Vec<FamilyEntry>,
}

fn frf_file_name(payload: f64) -> String {
    format!("frf_{:03}g.csv", payload.round() as i64)
}

pub fn cmd_family(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    ensure_dir(out)?;
    let hash = cfg.hash();
    let study = Study::synthetic(cfg)?;
    let mut entries = Vec::with_capacity(study.samples.len());
    for s in &study.samples {
        let file = frf_file_name(s.payload);
        let frf = s.frf.as_ref().expect("synthetic samples carry FRFs");
        write_frf(
            &out.join(&file),
            frf,
            cfg.frf.format,
            &[format!("config_hash={hash}"), format!("payload_g={}", s.payload)],
        )?;
        let mut sample = s.clone();
        sample.frf = None;
        entries.push(FamilyEntry { sample, file });
    }
    write_json(
        &out.join(FAMILY_MANIFEST),
        &FamilyManifest {
            config_hash: hash,
            format: cfg.frf.format,
            samples: entries,
        },
    )?;
    Ok(Outcome::Done)
}

/// Study rebuilt from a family manifest and its FRF files in `dir`.
pub fn load_study(cfg: &RunConfig, dir: &Path) -> Result<Study> {
    let path = dir.join(FAMILY_MANIFEST);
    if !path.exists() {
        return Err(Error::Config(format!(
            "no family manifest at {}; run `mixmu family` first",
            path.display()
        )));
    }
    let manifest: FamilyManifest = read_json(&path)?;
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for e in manifest.samples {
        let mut frf = ingest_frf(&dir.join(&e.file), manifest.format)?;
        frf.metadata.payload = Some(e.sample.payload);
        let mut s = e.sample;
        s.frf = Some(frf);
        samples.push(s);
    }
    Study::from_samples(cfg, samples)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UncertaintySummary {
    pub config_hash: String,
    pub variant: String,
    pub channels: Vec<String>,
    pub radii: Vec<(String, f64)>,
    pub unstructured_num: Vec<f64>,
    pub unstructured_den: Vec<f64>,
    pub unstructured_fallback: bool,
    pub mean_width_db: f64,
}

fn channel_radius(plant: &UncertainPlant, c: &ChannelId) -> f64 {
    let stats = &plant.modes[c.mode];
    stats.coefficient(c.kind).map_or(0.0, |u| u.radius)
}

pub fn cmd_uncertainty(cfg: &RunConfig, out: &Path, variants: &[Variant]) -> Result<Outcome> {
    let study = load_study(cfg, out)?;
    let hash = cfg.hash();
    for v in variants {
        let plant = study.plant(v)?;
        let env = plant.envelope(&study.grid, cfg.envelope.n_random, cfg.envelope.include_vertices, cfg.seed)?;
        let rows: Vec<Vec<f64>> = env
            .freq_hz
            .iter()
            .zip(&env.min_db)
            .zip(&env.max_db)
            .map(|((&f, &lo), &hi)| vec![f, lo, hi])
            .collect();
        let label = v.label();
        write_table(
            &out.join(format!("envelope_{label}.csv")),
            &hash,
            &["freq_hz", "min_db", "max_db"],
            &rows,
        )?;
        let w = &plant.unstructured.weight;
        write_json(
            &out.join(format!("uncertainty_{label}.json")),
            &UncertaintySummary {
                config_hash: hash.clone(),
                variant: label.clone(),
                channels: plant.channels.iter().map(ToString::to_string).collect(),
                radii: plant
                    .channels
                    .iter()
                    .map(|c| (c.to_string(), channel_radius(&plant, c)))
                    .collect(),
                unstructured_num: w.num().to_vec(),
                unstructured_den: w.den().to_vec(),
                unstructured_fallback: plant.unstructured.fallback,
                mean_width_db: env.mean_width_db(),
            },
        )?;
    }
    Ok(Outcome::Done)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerFile {
    pub config_hash: String,
    pub variant: String,
    pub params: BandpassParams,
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    pub mu_peak: f64,
    pub mu_peak_hz: f64,
    pub certified: bool,
    pub threshold: f64,
    pub evaluations: usize,
    pub wall_time_s: f64,
    pub restart_best: Vec<f64>,
}

impl ControllerFile {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Config(format!("controller file {} not found", path.display())));
        }
        read_json(path)
    }

    pub fn tf(&self) -> Result<RationalTF> {
        bandpass_tf(&self.params)
    }
}

fn write_mu_csv(path: &Path, hash: &str, profile: &MuProfile) -> Result<()> {
    let rows: Vec<Vec<f64>> = profile
        .grid
        .hz()
        .iter()
        .zip(&profile.upper)
        .zip(&profile.lower)
        .map(|((&f, &u), &l)| vec![f, u, l])
        .collect();
    write_table(path, hash, &["freq_hz", "mu_upper", "mu_lower"], &rows)
}

pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let started = Instant::now();
    let study = load_study(cfg, out)?;
    let hash = cfg.hash();
    let plant = study.plant(&cfg.variant)?;
    let res = study.synthesize(&plant)?;
    let label = cfg.variant.label();
    write_mu_csv(&out.join(format!("mu_{label}.csv")), &hash, &res.profile)?;
    let certified = res.mu_peak <= cfg.threshold;
    let controller = bandpass_tf(&res.params)?;
    write_json(
        &out.join(format!("controller_{label}.json")),
        &ControllerFile {
            config_hash: hash,
            variant: label,
            params: res.params,
            num: controller.num().to_vec(),
            den: controller.den().to_vec(),
            mu_peak: res.mu_peak,
            mu_peak_hz: res.profile.peak_freq / (2.0 * std::f64::consts::PI),
            certified,
            threshold: cfg.threshold,
            evaluations: res.evaluations,
            wall_time_s: started.elapsed().as_secs_f64(),
            restart_best: res.restart_best,
        },
    )?;
    Ok(if certified {
        Outcome::Certified
    } else {
        Outcome::Uncertified
    })
}

pub fn cmd_mu(cfg: &RunConfig, out: &Path, controller: &Path) -> Result<Outcome> {
    let c = ControllerFile::load(controller)?;
    let study = load_study(cfg, out)?;
    let plant = study.plant(&cfg.variant)?;
    let profile = study.mu_profile(&plant, &c.tf()?)?;
    write_mu_csv(
        &out.join(format!("mu_{}.csv", cfg.variant.label())),
        &cfg.hash(),
        &profile,
    )?;
    Ok(if profile.peak_upper <= cfg.threshold {
        Outcome::Certified
    } else {
        Outcome::Uncertified
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginEntry {
    pub payload: f64,
    pub mode1_hz: f64,
    pub closed_loop_stable: bool,
    pub gain_reduction_db: f64,
    pub max_sxn_db: f64,
    pub crossings_hz: Vec<f64>,
    pub phase_margins_deg: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginsFile {
    pub config_hash: String,
    pub controller: String,
    pub samples: Vec<MarginEntry>,
}

fn metrics_rows(grid_hz: &[f64], m: &SampleMetrics) -> Vec<Vec<f64>> {
    grid_hz
        .iter()
        .enumerate()
        .map(|(k, &f)| vec![f, m.ps_db[k], m.sxn_db[k], m.loop_db[k], m.loop_phase_deg[k]])
        .collect()
}

pub fn cmd_eval(cfg: &RunConfig, out: &Path, controller: &Path) -> Result<Outcome> {
    let c = ControllerFile::load(controller)?;
    let study = load_study(cfg, out)?;
    let hash = cfg.hash();
    let metrics = study.evaluate(&c.tf()?)?;
    let mut entries = Vec::with_capacity(metrics.len());
    for m in &metrics {
        write_table(
            &out.join(format!("metrics_{:03}g.csv", m.payload.round() as i64)),
            &hash,
            &["freq_hz", "ps_db", "sxn_db", "loop_db", "loop_phase_deg"],
            &metrics_rows(study.grid.hz(), m),
        )?;
        entries.push(MarginEntry {
            payload: m.payload,
            mode1_hz: m.mode1_hz,
            closed_loop_stable: m.closed_loop_stable,
            gain_reduction_db: m.gain_reduction_db,
            max_sxn_db: m.max_sxn_db,
            crossings_hz: m
                .margins
                .crossings
                .iter()
                .map(|x| x.freq / (2.0 * std::f64::consts::PI))
                .collect(),
            phase_margins_deg: m.margins.crossings.iter().map(|x| x.phase_margin).collect(),
        });
    }
    write_json(
        &out.join(format!("margins_{}.json", cfg.variant.label())),
        &MarginsFile {
            config_hash: hash,
            controller: controller.display().to_string(),
            samples: entries,
        },
    )?;
    Ok(Outcome::Done)
}
