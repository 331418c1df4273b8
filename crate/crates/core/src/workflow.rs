//! End-to-end runs behind the command-line tool: each writes its artifacts
//! into an output directory together with a manifest carrying content
//! hashes of every file written.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::array::{
    aperture_efficiency, half_power_beamwidth, mainlobe_ripple, pattern, pattern_at, peak_sidelobe_level,
    taper_efficiency, write_pattern_csv, AngularGrid, ArrayGeometry, Beamformer, GridBuilder, Region, SelectionVector,
};
use crate::error::{Error, Result};
use crate::scenario::{sweep, BeamKind, DesignKind, Scenario};
use crate::selection::{
    exhaustive_select, run_starts, select, write_trace_csv, DesignResult, ExhaustiveResult, SearchRule, StartSummary,
};
use crate::signaling::{ber_curve, ber_vs_angle, transmit_gain, write_ber_csv, BerCurve};
use crate::synthesis::design_symbol_bank;

/// Sample spacing of the uniform grid used for beamwidth measurement.
const HPBW_STEP: f64 = 0.01;

/// Command-line overrides of scenario values.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub starts: Option<usize>,
    pub trials: Option<usize>,
}

impl RunOptions {
    pub fn apply(&self, scenario: &Scenario) -> Result<Scenario> {
        let mut s = scenario.clone();
        if let Some(seed) = self.seed {
            s.selection.seed = seed;
            s.ber.seed = seed;
        }
        if let Some(n) = self.starts {
            s.selection.restarts = n;
        }
        if let Some(t) = self.trials {
            s.ber.trials = t;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageStatus {
    pub stage: String,
    pub status: String,
    pub detail: String,
}

/// Record of one run: the resolved scenario, the stages executed and the
/// hash of every file written.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub wall_clock_s: f64,
    pub scenario: Scenario,
    pub stages: Vec<StageStatus>,
    pub files: Vec<FileEntry>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

struct Run {
    dir: PathBuf,
    command: String,
    seed: u64,
    scenario: Scenario,
    started: Instant,
    stages: Vec<StageStatus>,
    files: Vec<String>,
}

impl Run {
    fn new(dir: &Path, command: &str, seed: u64, scenario: &Scenario) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            seed,
            scenario: scenario.clone(),
            started: Instant::now(),
            stages: Vec::new(),
            files: Vec::new(),
        })
    }

    fn stage(&mut self, stage: &str, status: &str, detail: impl Into<String>) {
        self.stages.push(StageStatus {
            stage: stage.into(),
            status: status.into(),
            detail: detail.into(),
        });
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut out = BufWriter::new(File::create(self.dir.join(name))?);
        f(&mut out)?;
        out.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(self, manifest_name: &str) -> Result<RunManifest> {
        let files = self
            .files
            .iter()
            .map(|f| {
                Ok(FileEntry {
                    path: f.clone(),
                    sha256: sha256_file(&self.dir.join(f))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            tool: "dfrc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command,
            seed: self.seed,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
            scenario: self.scenario,
            stages: self.stages,
            files,
        };
        let out = BufWriter::new(File::create(self.dir.join(manifest_name))?);
        serde_json::to_writer_pretty(out, &manifest)?;
        Ok(manifest)
    }
}

/// Quality figures of one designed beamformer.
#[derive(Debug, Clone, Serialize)]
pub struct BeamMetrics {
    pub label: String,
    pub psl_db: f64,
    pub ripple_db: Option<f64>,
    pub hpbw_deg: Option<f64>,
    /// `|w^H a(θ_c)|` and its phase in radians.
    pub comm_gain: f64,
    pub comm_phase: f64,
    pub aperture_efficiency: f64,
    pub taper_efficiency: f64,
    pub elements: usize,
}

/// A designed beamformer with the grid its metrics are measured on.
#[derive(Debug, Clone)]
pub struct LabelledBeam {
    pub label: String,
    pub beamformer: Beamformer,
    pub grid: AngularGrid,
    pub flattop: bool,
}

fn dense_grid() -> Result<AngularGrid> {
    AngularGrid::uniform(-90.0, 90.0, HPBW_STEP, Region::Transition)
}

pub fn beam_metrics(beam: &LabelledBeam, geometry: &ArrayGeometry, comm_direction: f64) -> Result<BeamMetrics> {
    let w = beam.beamformer.weights();
    let p = pattern(w, geometry, &beam.grid)?;
    let dense = dense_grid()?;
    let hpbw = half_power_beamwidth(&pattern(w, geometry, &dense)?, &dense).ok();
    let g = pattern_at(w, geometry, comm_direction)?;
    Ok(BeamMetrics {
        label: beam.label.clone(),
        psl_db: peak_sidelobe_level(&p, &beam.grid)?,
        ripple_db: if beam.flattop {
            Some(mainlobe_ripple(&p, &beam.grid)?)
        } else {
            None
        },
        hpbw_deg: if beam.flattop { None } else { hpbw },
        comm_gain: g.norm(),
        comm_phase: g.arg(),
        aperture_efficiency: aperture_efficiency(w, geometry)?,
        taper_efficiency: taper_efficiency(w)?,
        elements: w.iter().filter(|x| x.norm() > 0.0).count(),
    })
}

/// Symbol bank designed on the selected elements, scattered back onto the
/// candidate grid.
pub fn design_bank(scenario: &Scenario, selection: &SelectionVector, symbols: &[Complex64]) -> Result<Vec<Beamformer>> {
    let geometry = scenario.geometry()?;
    let members = selection.selected_indices();
    let sub = geometry.subarray(&members)?;
    let spec = scenario
        .radar_spec()?
        .with_symbol(scenario.design.comm_direction, Complex64::new(0.0, 0.0));
    design_symbol_bank(&sub, &spec, symbols)?
        .into_iter()
        .map(|d| d.beamformer.scatter(&members, geometry.len()))
        .collect()
}

#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub result: DesignResult,
    pub beams: Vec<LabelledBeam>,
    pub metrics: Vec<BeamMetrics>,
    pub manifest: RunManifest,
}

impl DesignOutcome {
    pub fn converged(&self) -> bool {
        self.result.converged
    }
}

fn write_weights<W: Write>(out: &mut W, beams: &[LabelledBeam]) -> Result<()> {
    writeln!(out, "beamformer,index,re,im")?;
    for b in beams {
        for (i, w) in b.beamformer.weights().iter().enumerate() {
            writeln!(out, "{},{i},{:.17e},{:.17e}", b.label, w.re, w.im)?;
        }
    }
    Ok(())
}

/// Reads `beamformer,index,re,im` rows back into labelled weight vectors,
/// in file order.
pub fn read_weights(path: &Path) -> Result<Vec<(String, Beamformer)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out: Vec<(String, Vec<Complex64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("{}: bad number {:?}: {e}", path.display(), field(i))))
        };
        let label = field(0).to_string();
        let w = Complex64::new(num(2)?, num(3)?);
        match out.last_mut() {
            Some((l, ws)) if *l == label => ws.push(w),
            _ => out.push((label, vec![w])),
        }
    }
    Ok(out.into_iter().map(|(l, w)| (l, Beamformer::new(w))).collect())
}

pub fn read_selection(dir: &Path) -> Result<SelectionVector> {
    let path = dir.join("selection.txt");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("missing design artifact {}: {e}", path.display())))?;
    SelectionVector::parse_bits(text.lines().next().unwrap_or(""))
}

fn beam_label_grid(scenario: &Scenario, label: &str) -> Result<(AngularGrid, bool)> {
    if label == "comm" {
        Ok((scenario.comm_grid()?, false))
    } else {
        Ok((scenario.radar_grid()?, scenario.design.beam == BeamKind::Flattop))
    }
}

/// Array selection followed by the final beamformer design.
pub fn run_design(scenario: &Scenario, out: &Path) -> Result<DesignOutcome> {
    let mut run = Run::new(out, "design", scenario.selection.seed, scenario)?;
    let design = scenario.joint_design()?;
    let cfg = scenario.selection_config();
    let result = select(&design, &cfg, SearchRule::Swap)?;
    run.stage(
        "selection",
        if result.converged {
            "converged"
        } else {
            "iteration_limit"
        },
        format!(
            "{} start(s), best psl {:.2} dB after {} iteration(s)",
            result.restarts, result.psl_db, result.iterations
        ),
    );

    let geometry = scenario.geometry()?;
    let beams: Vec<LabelledBeam> = match scenario.design.kind {
        DesignKind::Single => {
            let dict = scenario.dictionary()?.expect("validated");
            let bank = design_bank(scenario, &result.selection, dict.symbols())?;
            run.stage("symbol_bank", "ok", format!("{} beamformer(s)", bank.len()));
            let (grid, flattop) = beam_label_grid(scenario, "radar")?;
            bank.into_iter()
                .enumerate()
                .map(|(k, b)| LabelledBeam {
                    label: format!("symbol{k}"),
                    beamformer: b,
                    grid: grid.clone(),
                    flattop,
                })
                .collect()
        }
        DesignKind::Multi | DesignKind::Shared => ["radar", "comm"]
            .iter()
            .zip(&result.beamformers)
            .map(|(l, b)| {
                let (grid, flattop) = beam_label_grid(scenario, l)?;
                Ok(LabelledBeam {
                    label: l.to_string(),
                    beamformer: b.clone(),
                    grid,
                    flattop,
                })
            })
            .collect::<Result<_>>()?,
    };
    let metrics = beams
        .iter()
        .map(|b| beam_metrics(b, &geometry, scenario.design.comm_direction))
        .collect::<Result<Vec<_>>>()?;

    let sel = result.selection.clone();
    run.write("selection.txt", |o| {
        writeln!(o, "{}", sel.to_bit_string())?;
        let idx: Vec<String> = sel.selected_indices().iter().map(|i| i.to_string()).collect();
        writeln!(o, "{}", idx.join(","))?;
        Ok(())
    })?;
    run.write("weights.csv", |o| write_weights(o, &beams))?;
    for b in &beams {
        let p = pattern(b.beamformer.weights(), &geometry, &b.grid)?;
        run.write(&format!("pattern_{}.csv", b.label), |o| {
            write_pattern_csv(o, &p, &b.grid)
        })?;
    }
    let trace = result.trace.clone();
    run.write("trace.csv", |o| write_trace_csv(o, &trace))?;
    let starts = result.starts.clone();
    run.write("starts.csv", |o| {
        writeln!(o, "{STARTS_HEADER}")?;
        write_starts(o, "swap", &starts)
    })?;
    run.write("metrics.json", |o| {
        serde_json::to_writer_pretty(&mut *o, &metrics)?;
        writeln!(o)?;
        Ok(())
    })?;
    let manifest = run.finish("manifest.json")?;
    Ok(DesignOutcome {
        result,
        beams,
        metrics,
        manifest,
    })
}

const STARTS_HEADER: &str = "rule,start,alpha,psl_db,iterations,stop,selection";

fn write_starts<W: Write>(out: &mut W, rule: &str, starts: &[StartSummary]) -> Result<()> {
    for s in starts {
        writeln!(
            out,
            "{rule},{},{:.10e},{:.6},{},{:?},{}",
            s.start,
            s.alpha,
            s.psl_db,
            s.iterations,
            s.stop,
            s.selection.to_bit_string()
        )?;
    }
    Ok(())
}

/// Patterns of the weights in `dir/weights.csv` on a uniform grid.
pub fn run_pattern(scenario: &Scenario, dir: &Path, step: f64) -> Result<RunManifest> {
    let beams = read_weights(&dir.join("weights.csv"))?;
    let geometry = scenario.geometry()?;
    let mut run = Run::new(dir, "pattern", scenario.selection.seed, scenario)?;
    for (label, w) in &beams {
        if w.len() != geometry.len() {
            return Err(Error::Config(format!(
                "weights for {label} have {} entries, scenario has {} candidates",
                w.len(),
                geometry.len()
            )));
        }
        let (template, _) = beam_label_grid(scenario, label)?;
        let grid = relabel_uniform(scenario, label, &template, step)?;
        let p = pattern(w.weights(), &geometry, &grid)?;
        run.write(&format!("pattern_uniform_{label}.csv"), |o| {
            write_pattern_csv(o, &p, &grid)
        })?;
    }
    run.stage(
        "pattern",
        "ok",
        format!("{} beamformer(s), step {step} deg", beams.len()),
    );
    run.finish("manifest_pattern.json")
}

fn relabel_uniform(scenario: &Scenario, label: &str, template: &AngularGrid, step: f64) -> Result<AngularGrid> {
    // rebuild the same regions with a single sample spacing
    let main = template.mainlobe_angles();
    let (lo, hi) = match (main.first(), main.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::domain("grid has no mainlobe")),
    };
    let mut b = GridBuilder::new(lo, hi);
    b.mainlobe_step = step;
    b.sidelobe_step = step;
    if label == "comm" {
        b.transition = scenario.grid.comm_transition;
        b.sidelobe_label = Region::CommSidelobe;
    } else {
        b.transition = scenario.grid.transition;
        if scenario.grid.comm_exclusion > 0.0 {
            b.exclusions
                .push((scenario.design.comm_direction, scenario.grid.comm_exclusion));
        }
    }
    b.build()
}

fn ber_bank(
    scenario: &Scenario,
    dir: &Path,
) -> Result<(ArrayGeometry, Vec<Beamformer>, crate::signaling::SymbolDictionary)> {
    if scenario.design.kind != DesignKind::Single {
        return Err(Error::Config(
            "link simulation needs a single-beamformer scenario".into(),
        ));
    }
    let selection = read_selection(dir)?;
    let geometry = scenario.geometry()?;
    if selection.len() != geometry.len() {
        return Err(Error::Config(format!(
            "selection has {} entries, scenario has {} candidates",
            selection.len(),
            geometry.len()
        )));
    }
    let dict = scenario.ber_dictionary()?;
    let bank = design_bank(scenario, &selection, dict.symbols())?;
    Ok((geometry, bank, dict))
}

/// BER versus SNR, one curve per waveform count.
pub fn run_ber(scenario: &Scenario, dir: &Path) -> Result<(Vec<BerCurve>, RunManifest)> {
    let (geometry, bank, dict) = ber_bank(scenario, dir)?;
    let gains = bank
        .iter()
        .map(|w| transmit_gain(w, &geometry, scenario.design.comm_direction))
        .collect::<Result<Vec<_>>>()?;
    let snr = sweep(scenario.ber.snr_db)?;
    let channel = scenario.channel_model(0.0);
    let mut run = Run::new(dir, "ber", scenario.ber.seed, scenario)?;
    let mut curves = Vec::new();
    for &n in &scenario.ber.waveforms {
        let c = ber_curve(&gains, &dict, &channel, &snr, n, scenario.ber.trials, scenario.ber.seed)?;
        run.write(&format!("ber_{}bits.csv", c.bits_per_pulse), |o| write_ber_csv(o, &c))?;
        curves.push(c);
    }
    run.stage(
        "ber",
        "ok",
        format!("{} curve(s), {} trials per point", curves.len(), scenario.ber.trials),
    );
    Ok((curves, run.finish("manifest_ber.json")?))
}

/// BER with the receiver moved across the configured angle sweep.
pub fn run_ber_angle(scenario: &Scenario, dir: &Path) -> Result<(BerCurve, RunManifest)> {
    let (geometry, bank, dict) = ber_bank(scenario, dir)?;
    let angles = sweep(scenario.ber.angles)?;
    let waveforms = scenario.ber.waveforms.first().copied().unwrap_or(1);
    let c = ber_vs_angle(
        &bank,
        &geometry,
        &dict,
        &scenario.channel_model(0.0),
        &angles,
        scenario.ber.angle_snr_db,
        waveforms,
        scenario.ber.trials,
        scenario.ber.seed,
    )?;
    let mut run = Run::new(dir, "ber-angle", scenario.ber.seed, scenario)?;
    run.write("ber_angle.csv", |o| write_ber_csv(o, &c))?;
    run.stage(
        "ber_angle",
        "ok",
        format!("{} angle(s) at {} dB", angles.len(), scenario.ber.angle_snr_db),
    );
    Ok((c, run.finish("manifest_ber_angle.json")?))
}

/// PSLs of independent starts under the swap rule and under plain SCP.
#[derive(Debug, Clone)]
pub struct RestartHistogram {
    pub swap: Vec<StartSummary>,
    pub plain: Vec<StartSummary>,
}

fn spread(v: &[StartSummary]) -> f64 {
    let max = v.iter().map(|s| s.psl_db).fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().map(|s| s.psl_db).fold(f64::INFINITY, f64::min);
    max - min
}

impl RestartHistogram {
    pub fn swap_spread(&self) -> f64 {
        spread(&self.swap)
    }

    pub fn plain_spread(&self) -> f64 {
        spread(&self.plain)
    }

    /// Fraction of swap-rule starts within `db` of the best swap-rule PSL.
    pub fn swap_within(&self, db: f64) -> f64 {
        let best = self.swap.iter().map(|s| s.psl_db).fold(f64::INFINITY, f64::min);
        let n = self.swap.iter().filter(|s| s.psl_db <= best + db).count();
        n as f64 / self.swap.len().max(1) as f64
    }

    /// Counts per 1 dB bin, `(bin_lo, swap, plain)`.
    pub fn bins(&self) -> Vec<(f64, usize, usize)> {
        let all = self.swap.iter().chain(&self.plain).map(|s| s.psl_db);
        let lo = all.clone().fold(f64::INFINITY, f64::min).floor();
        let hi = all.fold(f64::NEG_INFINITY, f64::max).floor();
        if !lo.is_finite() {
            return Vec::new();
        }
        let count = |v: &[StartSummary], b: f64| v.iter().filter(|s| s.psl_db.floor() == b).count();
        (0..=((hi - lo) as usize))
            .map(|i| {
                let b = lo + i as f64;
                (b, count(&self.swap, b), count(&self.plain, b))
            })
            .collect()
    }
}

pub fn run_restart_histogram(
    scenario: &Scenario,
    starts: usize,
    out: &Path,
) -> Result<(RestartHistogram, RunManifest)> {
    if starts < 2 {
        return Err(Error::Config("histogram needs at least two starts".into()));
    }
    let design = scenario.joint_design()?;
    let cfg = scenario.selection_config();
    let hist = RestartHistogram {
        swap: run_starts(&design, &cfg, starts, SearchRule::Swap)?,
        plain: run_starts(&design, &cfg, starts, SearchRule::PlainScp)?,
    };
    let mut run = Run::new(out, "histogram", cfg.seed, scenario)?;
    let (sw, pl) = (hist.swap.clone(), hist.plain.clone());
    run.write("histogram_starts.csv", |o| {
        writeln!(o, "{STARTS_HEADER}")?;
        write_starts(o, "swap", &sw)?;
        write_starts(o, "plain", &pl)
    })?;
    let bins = hist.bins();
    run.write("histogram_bins.csv", |o| {
        writeln!(o, "psl_db_lo,psl_db_hi,swap,plain")?;
        for (b, s, p) in &bins {
            writeln!(o, "{b},{},{s},{p}", b + 1.0)?;
        }
        Ok(())
    })?;
    run.stage(
        "histogram",
        "ok",
        format!(
            "swap spread {:.2} dB over {} start(s), plain spread {:.2} dB over {}",
            hist.swap_spread(),
            hist.swap.len(),
            hist.plain_spread(),
            hist.plain.len()
        ),
    );
    Ok((hist, run.finish("manifest_histogram.json")?))
}

/// Exhaustive search over every subset of the scenario's candidate grid.
pub fn run_oracle(scenario: &Scenario, out: &Path) -> Result<(ExhaustiveResult, RunManifest)> {
    let design = scenario.joint_design()?;
    let cfg = scenario.selection_config();
    let best = exhaustive_select(&design, cfg.tolerance)?;
    let mut run = Run::new(out, "oracle", cfg.seed, scenario)?;
    let b = best.clone();
    run.write("oracle.csv", |o| {
        writeln!(o, "subsets,alpha,psl_db,selection")?;
        writeln!(
            o,
            "{},{:.10e},{:.6},{}",
            b.subsets,
            b.alpha,
            b.psl_db,
            b.selection.to_bit_string()
        )?;
        Ok(())
    })?;
    run.stage("oracle", "ok", format!("{} subset(s)", best.subsets));
    Ok((best, run.finish("manifest_oracle.json")?))
}
