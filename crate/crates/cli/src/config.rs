//! INI experiment configuration.
//!
//! Every key has a default, so an empty file is a valid config. Keys are
//! grouped in sections; a key the parser does not know is an error.

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use ini::Ini;
use lnn_core::wiring::WiringConfig;
use lnn_core::CellKind;
use lnn_wireless::beamform::{BfConfig, GlnnConfig, WmmseConfig};
use lnn_wireless::channel::{BeamformingScenario, Phase, PredictionScenario};
use lnn_wireless::predict::{TrainConfig, DEFAULT_DT, DEFAULT_UNFOLDS, DEFAULT_UNITS, HISTORY_LEN, HORIZON_LEN};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WiringKind {
    Dense,
    Ncp,
}

impl FromStr for WiringKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Self::Dense),
            "ncp" => Ok(Self::Ncp),
            _ => bail!("expected dense or ncp, got {s:?}"),
        }
    }
}

impl Display for WiringKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Dense => "dense",
            Self::Ncp => "ncp",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    Fused,
    Rk4,
}

impl FromStr for Solver {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fused" => Ok(Self::Fused),
            "rk4" => Ok(Self::Rk4),
            _ => bail!("expected fused or rk4, got {s:?}"),
        }
    }
}

impl Display for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fused => "fused",
            Self::Rk4 => "rk4",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// Pick from the CSV header.
    Auto,
    MseVsHorizon,
    SeVsTime,
}

impl FromStr for PlotKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "mse_vs_horizon" => Ok(Self::MseVsHorizon),
            "se_vs_time" => Ok(Self::SeVsTime),
            _ => bail!("expected auto, mse_vs_horizon or se_vs_time, got {s:?}"),
        }
    }
}

impl Display for PlotKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::MseVsHorizon => "mse_vs_horizon",
            Self::SeVsTime => "se_vs_time",
        })
    }
}

/// Comma-separated list value.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|p| p.trim().parse::<T>().map_err(|e| anyhow!("list item {p:?}: {e}")))
            .collect::<Result<Vec<_>>>()
            .map(List)
    }
}

impl<T: Display> Display for List<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSection {
    pub seed: u64,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSection {
    pub carrier_hz: f64,
    pub n_bs_antennas: usize,
    pub n_users: usize,
    pub n_user_antennas: usize,
    pub antenna_spacing: f64,
    pub speed_mps: f64,
    pub sample_interval_s: f64,
    pub n_steps: usize,
    pub history_len: usize,
    pub horizon_len: usize,
    pub train_frac: f64,
    pub ar_order: usize,
    /// LNNCSI1 file to read instead of simulating; empty = simulate.
    pub dataset: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamformingSection {
    pub carrier_hz: f64,
    pub n_bs_antennas: usize,
    pub n_users: usize,
    pub n_user_antennas: usize,
    pub antenna_spacing: f64,
    pub phase_speeds_mps: List<f64>,
    pub phase_steps: List<usize>,
    pub sample_interval_s: f64,
    pub n_paths: usize,
    pub noise_power: f64,
    pub power_budget: f64,
    pub wmmse_max_iters: usize,
    pub wmmse_tol: f64,
    pub wmmse_warm_start: bool,
    /// Steps averaged for the final comparison.
    pub report_window: usize,
    /// Steps before GLNN may be reported as ahead of WMMSE.
    pub warmup: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSection {
    pub cell: CellKind,
    pub units: usize,
    pub wiring: WiringKind,
    pub n_inter: usize,
    pub n_command: usize,
    pub n_motor: usize,
    pub solver: Solver,
    pub unfolds: usize,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSection {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_frac: f64,
    /// 0 = every window each epoch.
    pub batches_per_epoch: usize,
    pub baseline_units: usize,
    pub baseline_lr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlnnSection {
    pub cell: CellKind,
    pub n_features: usize,
    pub n_inter: usize,
    pub n_command: usize,
    pub n_motor: usize,
    pub lr: f64,
    pub cell_dt: f64,
    pub updates_per_interval: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSection {
    pub n_trials: usize,
    pub warmup: usize,
    pub units: usize,
    pub n_inputs: usize,
    pub unroll_steps: usize,
    /// Prediction training epochs timed end to end.
    pub train_epochs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSection {
    /// CSV to plot; empty = every known result CSV in the output directory.
    pub input: String,
    pub kind: PlotKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub prediction: PredictionSection,
    pub beamforming: BeamformingSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub glnn: GlnnSection,
    pub bench: BenchSection,
    pub plot: PlotSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = PredictionScenario::default();
        let b = BeamformingScenario::default();
        let g = GlnnConfig::default();
        let w = WmmseConfig::default();
        let t = TrainConfig::default();
        Self {
            run: RunSection { seed: 0, out_dir: PathBuf::from("out") },
            prediction: PredictionSection {
                carrier_hz: p.carrier_hz,
                n_bs_antennas: p.n_bs_antennas,
                n_users: p.n_users,
                n_user_antennas: p.n_user_antennas,
                antenna_spacing: p.antenna_spacing,
                speed_mps: p.speed_mps,
                sample_interval_s: p.sample_interval_s,
                n_steps: p.n_steps,
                history_len: HISTORY_LEN,
                horizon_len: HORIZON_LEN,
                train_frac: 0.8,
                ar_order: 4,
                dataset: String::new(),
            },
            beamforming: BeamformingSection {
                carrier_hz: b.carrier_hz,
                n_bs_antennas: b.n_bs_antennas,
                n_users: b.n_users,
                n_user_antennas: b.n_user_antennas,
                antenna_spacing: b.antenna_spacing,
                phase_speeds_mps: List(b.phases.iter().map(|p| p.speed_mps).collect()),
                phase_steps: List(b.phases.iter().map(|p| p.steps).collect()),
                sample_interval_s: b.sample_interval_s,
                n_paths: b.n_paths,
                noise_power: b.noise_power,
                power_budget: b.power_budget,
                wmmse_max_iters: w.max_iters,
                wmmse_tol: w.tol,
                wmmse_warm_start: true,
                report_window: 300,
                warmup: 100,
            },
            model: ModelSection {
                cell: CellKind::Ltc,
                units: DEFAULT_UNITS,
                wiring: WiringKind::Dense,
                n_inter: 16,
                n_command: 10,
                n_motor: 6,
                solver: Solver::Fused,
                unfolds: DEFAULT_UNFOLDS,
                dt: DEFAULT_DT,
            },
            training: TrainingSection {
                lr: 0.02,
                batch_size: t.batch_size,
                max_epochs: t.max_epochs,
                patience: t.patience,
                val_frac: t.val_frac,
                batches_per_epoch: t.batches_per_epoch.unwrap_or(0),
                baseline_units: DEFAULT_UNITS,
                baseline_lr: t.lr,
            },
            glnn: GlnnSection {
                cell: g.cell,
                n_features: g.n_features,
                n_inter: g.n_inter,
                n_command: g.n_command,
                n_motor: g.n_motor,
                lr: g.lr,
                cell_dt: g.cell_dt,
                updates_per_interval: g.updates_per_interval,
            },
            bench: BenchSection { n_trials: 30, warmup: 10, units: 32, n_inputs: 8, unroll_steps: 20, train_epochs: 3 },
            plot: PlotSection { input: String::new(), kind: PlotKind::Auto },
        }
    }
}

/// Keys of one section, consumed as they are read.
struct Section {
    name: &'static str,
    props: BTreeMap<String, String>,
}

impl Section {
    fn get<T: FromStr>(&mut self, key: &str, dst: &mut T) -> Result<()>
    where
        T::Err: Display,
    {
        if let Some(raw) = self.props.remove(key) {
            *dst = raw
                .trim()
                .parse()
                .map_err(|e| anyhow!("[{}] {key}: malformed value {raw:?}: {e}", self.name))?;
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if let Some(k) = self.props.keys().next() {
            bail!("[{}] unknown key {k:?}", self.name);
        }
        Ok(())
    }
}

const SECTIONS: [&str; 8] = ["run", "prediction", "beamforming", "model", "training", "glnn", "bench", "plot"];

fn err_in(section: &str, e: impl Display) -> anyhow::Error {
    anyhow!("[{section}] {e}")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str_noescape(text).context("malformed INI")?;
        let mut raw: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (sec, props) in ini.iter() {
            let Some(sec) = sec else {
                if let Some((k, _)) = props.iter().next() {
                    bail!("key {k:?} outside any section");
                }
                continue;
            };
            if !SECTIONS.contains(&sec) {
                bail!("unknown section [{sec}]");
            }
            let entry = raw.entry(sec.to_string()).or_default();
            for (k, v) in props.iter() {
                if entry.insert(k.to_string(), v.to_string()).is_some() {
                    bail!("[{sec}] duplicate key {k:?}");
                }
            }
        }
        let mut take = |name: &'static str| Section { name, props: raw.remove(name).unwrap_or_default() };
        let mut c = Self::default();

        let mut s = take("run");
        s.get("seed", &mut c.run.seed)?;
        let mut out = c.run.out_dir.display().to_string();
        s.get("out_dir", &mut out)?;
        c.run.out_dir = PathBuf::from(out);
        s.finish()?;

        let p = &mut c.prediction;
        let mut s = take("prediction");
        s.get("carrier_hz", &mut p.carrier_hz)?;
        s.get("n_bs_antennas", &mut p.n_bs_antennas)?;
        s.get("n_users", &mut p.n_users)?;
        s.get("n_user_antennas", &mut p.n_user_antennas)?;
        s.get("antenna_spacing", &mut p.antenna_spacing)?;
        s.get("speed_mps", &mut p.speed_mps)?;
        s.get("sample_interval_s", &mut p.sample_interval_s)?;
        s.get("n_steps", &mut p.n_steps)?;
        s.get("history_len", &mut p.history_len)?;
        s.get("horizon_len", &mut p.horizon_len)?;
        s.get("train_frac", &mut p.train_frac)?;
        s.get("ar_order", &mut p.ar_order)?;
        s.get("dataset", &mut p.dataset)?;
        s.finish()?;

        let b = &mut c.beamforming;
        let mut s = take("beamforming");
        s.get("carrier_hz", &mut b.carrier_hz)?;
        s.get("n_bs_antennas", &mut b.n_bs_antennas)?;
        s.get("n_users", &mut b.n_users)?;
        s.get("n_user_antennas", &mut b.n_user_antennas)?;
        s.get("antenna_spacing", &mut b.antenna_spacing)?;
        s.get("phase_speeds_mps", &mut b.phase_speeds_mps)?;
        s.get("phase_steps", &mut b.phase_steps)?;
        s.get("sample_interval_s", &mut b.sample_interval_s)?;
        s.get("n_paths", &mut b.n_paths)?;
        s.get("noise_power", &mut b.noise_power)?;
        s.get("power_budget", &mut b.power_budget)?;
        s.get("wmmse_max_iters", &mut b.wmmse_max_iters)?;
        s.get("wmmse_tol", &mut b.wmmse_tol)?;
        s.get("wmmse_warm_start", &mut b.wmmse_warm_start)?;
        s.get("report_window", &mut b.report_window)?;
        s.get("warmup", &mut b.warmup)?;
        s.finish()?;

        let m = &mut c.model;
        let mut s = take("model");
        s.get("cell", &mut m.cell)?;
        s.get("units", &mut m.units)?;
        s.get("wiring", &mut m.wiring)?;
        s.get("n_inter", &mut m.n_inter)?;
        s.get("n_command", &mut m.n_command)?;
        s.get("n_motor", &mut m.n_motor)?;
        s.get("solver", &mut m.solver)?;
        s.get("unfolds", &mut m.unfolds)?;
        s.get("dt", &mut m.dt)?;
        s.finish()?;

        let t = &mut c.training;
        let mut s = take("training");
        s.get("lr", &mut t.lr)?;
        s.get("batch_size", &mut t.batch_size)?;
        s.get("max_epochs", &mut t.max_epochs)?;
        s.get("patience", &mut t.patience)?;
        s.get("val_frac", &mut t.val_frac)?;
        s.get("batches_per_epoch", &mut t.batches_per_epoch)?;
        s.get("baseline_units", &mut t.baseline_units)?;
        s.get("baseline_lr", &mut t.baseline_lr)?;
        s.finish()?;

        let g = &mut c.glnn;
        let mut s = take("glnn");
        s.get("cell", &mut g.cell)?;
        s.get("n_features", &mut g.n_features)?;
        s.get("n_inter", &mut g.n_inter)?;
        s.get("n_command", &mut g.n_command)?;
        s.get("n_motor", &mut g.n_motor)?;
        s.get("lr", &mut g.lr)?;
        s.get("cell_dt", &mut g.cell_dt)?;
        s.get("updates_per_interval", &mut g.updates_per_interval)?;
        s.finish()?;

        let bn = &mut c.bench;
        let mut s = take("bench");
        s.get("n_trials", &mut bn.n_trials)?;
        s.get("warmup", &mut bn.warmup)?;
        s.get("units", &mut bn.units)?;
        s.get("n_inputs", &mut bn.n_inputs)?;
        s.get("unroll_steps", &mut bn.unroll_steps)?;
        s.get("train_epochs", &mut bn.train_epochs)?;
        s.finish()?;

        let mut s = take("plot");
        s.get("input", &mut c.plot.input)?;
        s.get("kind", &mut c.plot.kind)?;
        s.finish()?;

        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("config {}", path.display()))
    }

    /// Canonical text: every key, fixed order. `parse(render(c)) == c`.
    pub fn render(&self) -> String {
        let mut o = String::new();
        let sec = |o: &mut String, name: &str, kv: Vec<(&str, String)>| {
            if !o.is_empty() {
                o.push('\n');
            }
            writeln!(o, "[{name}]").unwrap();
            for (k, v) in kv {
                writeln!(o, "{k} = {v}").unwrap();
            }
        };
        let r = &self.run;
        sec(&mut o, "run", vec![("seed", r.seed.to_string()), ("out_dir", r.out_dir.display().to_string())]);
        let p = &self.prediction;
        sec(
            &mut o,
            "prediction",
            vec![
                ("carrier_hz", p.carrier_hz.to_string()),
                ("n_bs_antennas", p.n_bs_antennas.to_string()),
                ("n_users", p.n_users.to_string()),
                ("n_user_antennas", p.n_user_antennas.to_string()),
                ("antenna_spacing", p.antenna_spacing.to_string()),
                ("speed_mps", p.speed_mps.to_string()),
                ("sample_interval_s", p.sample_interval_s.to_string()),
                ("n_steps", p.n_steps.to_string()),
                ("history_len", p.history_len.to_string()),
                ("horizon_len", p.horizon_len.to_string()),
                ("train_frac", p.train_frac.to_string()),
                ("ar_order", p.ar_order.to_string()),
                ("dataset", p.dataset.clone()),
            ],
        );
        let b = &self.beamforming;
        sec(
            &mut o,
            "beamforming",
            vec![
                ("carrier_hz", b.carrier_hz.to_string()),
                ("n_bs_antennas", b.n_bs_antennas.to_string()),
                ("n_users", b.n_users.to_string()),
                ("n_user_antennas", b.n_user_antennas.to_string()),
                ("antenna_spacing", b.antenna_spacing.to_string()),
                ("phase_speeds_mps", b.phase_speeds_mps.to_string()),
                ("phase_steps", b.phase_steps.to_string()),
                ("sample_interval_s", b.sample_interval_s.to_string()),
                ("n_paths", b.n_paths.to_string()),
                ("noise_power", b.noise_power.to_string()),
                ("power_budget", b.power_budget.to_string()),
                ("wmmse_max_iters", b.wmmse_max_iters.to_string()),
                ("wmmse_tol", b.wmmse_tol.to_string()),
                ("wmmse_warm_start", b.wmmse_warm_start.to_string()),
                ("report_window", b.report_window.to_string()),
                ("warmup", b.warmup.to_string()),
            ],
        );
        let m = &self.model;
        sec(
            &mut o,
            "model",
            vec![
                ("cell", m.cell.to_string()),
                ("units", m.units.to_string()),
                ("wiring", m.wiring.to_string()),
                ("n_inter", m.n_inter.to_string()),
                ("n_command", m.n_command.to_string()),
                ("n_motor", m.n_motor.to_string()),
                ("solver", m.solver.to_string()),
                ("unfolds", m.unfolds.to_string()),
                ("dt", m.dt.to_string()),
            ],
        );
        let t = &self.training;
        sec(
            &mut o,
            "training",
            vec![
                ("lr", t.lr.to_string()),
                ("batch_size", t.batch_size.to_string()),
                ("max_epochs", t.max_epochs.to_string()),
                ("patience", t.patience.to_string()),
                ("val_frac", t.val_frac.to_string()),
                ("batches_per_epoch", t.batches_per_epoch.to_string()),
                ("baseline_units", t.baseline_units.to_string()),
                ("baseline_lr", t.baseline_lr.to_string()),
            ],
        );
        let g = &self.glnn;
        sec(
            &mut o,
            "glnn",
            vec![
                ("cell", g.cell.to_string()),
                ("n_features", g.n_features.to_string()),
                ("n_inter", g.n_inter.to_string()),
                ("n_command", g.n_command.to_string()),
                ("n_motor", g.n_motor.to_string()),
                ("lr", g.lr.to_string()),
                ("cell_dt", g.cell_dt.to_string()),
                ("updates_per_interval", g.updates_per_interval.to_string()),
            ],
        );
        let bn = &self.bench;
        sec(
            &mut o,
            "bench",
            vec![
                ("n_trials", bn.n_trials.to_string()),
                ("warmup", bn.warmup.to_string()),
                ("units", bn.units.to_string()),
                ("n_inputs", bn.n_inputs.to_string()),
                ("unroll_steps", bn.unroll_steps.to_string()),
                ("train_epochs", bn.train_epochs.to_string()),
            ],
        );
        sec(
            &mut o,
            "plot",
            vec![("input", self.plot.input.clone()), ("kind", self.plot.kind.to_string())],
        );
        o
    }

    /// Field ranges and cross-field consistency.
    pub fn validate(&self) -> Result<()> {
        self.prediction_scenario().validate().map_err(|e| err_in("prediction", e))?;
        let p = &self.prediction;
        if p.history_len == 0 || p.horizon_len == 0 {
            bail!("[prediction] history_len and horizon_len must be >= 1");
        }
        if !(p.train_frac > 0.0 && p.train_frac < 1.0) {
            bail!("[prediction] train_frac must lie in (0, 1), got {}", p.train_frac);
        }
        if p.ar_order == 0 || p.ar_order > p.history_len {
            bail!("[prediction] ar_order must lie in 1..=history_len");
        }

        let b = &self.beamforming;
        if b.phase_speeds_mps.0.len() != b.phase_steps.0.len() {
            bail!(
                "[beamforming] phase_speeds_mps has {} entries but phase_steps has {}",
                b.phase_speeds_mps.0.len(),
                b.phase_steps.0.len()
            );
        }
        self.beamforming_scenario().validate().map_err(|e| err_in("beamforming", e))?;
        if b.wmmse_max_iters == 0 || !(b.wmmse_tol > 0.0) {
            bail!("[beamforming] wmmse_max_iters and wmmse_tol must be positive");
        }
        let n_steps: usize = b.phase_steps.0.iter().sum();
        if b.report_window == 0 || b.report_window > n_steps {
            bail!("[beamforming] report_window must lie in 1..={n_steps}");
        }
        if b.warmup >= n_steps {
            bail!("[beamforming] warmup must be below the episode length {n_steps}");
        }

        let m = &self.model;
        if m.units == 0 || m.unfolds == 0 || !(m.dt > 0.0) {
            bail!("[model] units, unfolds and dt must be positive");
        }
        if m.wiring == WiringKind::Ncp {
            let sum = m.n_inter + m.n_command + m.n_motor;
            if sum != m.units {
                bail!(
                    "[model] n_inter + n_command + n_motor = {sum} contradicts units = {}",
                    m.units
                );
            }
            if m.cell == CellKind::Gru {
                bail!("[model] ncp wiring needs an ltc or cfc cell");
            }
            self.wiring_config(self.n_features()).validate().map_err(|e| err_in("model", e))?;
        }

        let t = &self.training;
        if !(t.lr > 0.0) || !(t.baseline_lr > 0.0) || t.batch_size == 0 || t.baseline_units == 0 {
            bail!("[training] lr, baseline_lr, batch_size and baseline_units must be positive");
        }
        if !(0.0..1.0).contains(&t.val_frac) {
            bail!("[training] val_frac must lie in [0, 1)");
        }

        let g = &self.glnn;
        if g.cell == CellKind::Gru {
            bail!("[glnn] cell must be ltc or cfc");
        }
        if !(g.lr > 0.0) || !(g.cell_dt > 0.0) || g.n_features == 0 || g.updates_per_interval == 0 {
            bail!("[glnn] lr, cell_dt, n_features and updates_per_interval must be positive");
        }
        self.glnn_config().wiring().validate().map_err(|e| err_in("glnn", e))?;

        let bn = &self.bench;
        if bn.n_trials < 30 {
            bail!("[bench] n_trials must be >= 30, got {}", bn.n_trials);
        }
        if bn.units == 0 || bn.n_inputs == 0 || bn.unroll_steps == 0 {
            bail!("[bench] units, n_inputs and unroll_steps must be positive");
        }
        Ok(())
    }

    /// Real features per CSI step.
    pub fn n_features(&self) -> usize {
        let p = &self.prediction;
        2 * p.n_users * p.n_user_antennas * p.n_bs_antennas
    }

    pub fn prediction_scenario(&self) -> PredictionScenario {
        let p = &self.prediction;
        PredictionScenario {
            carrier_hz: p.carrier_hz,
            n_bs_antennas: p.n_bs_antennas,
            n_users: p.n_users,
            n_user_antennas: p.n_user_antennas,
            antenna_spacing: p.antenna_spacing,
            speed_mps: p.speed_mps,
            sample_interval_s: p.sample_interval_s,
            n_steps: p.n_steps,
            seed: self.run.seed,
        }
    }

    pub fn beamforming_scenario(&self) -> BeamformingScenario {
        let b = &self.beamforming;
        BeamformingScenario {
            carrier_hz: b.carrier_hz,
            n_bs_antennas: b.n_bs_antennas,
            n_users: b.n_users,
            n_user_antennas: b.n_user_antennas,
            antenna_spacing: b.antenna_spacing,
            phases: b
                .phase_speeds_mps
                .0
                .iter()
                .zip(&b.phase_steps.0)
                .map(|(&speed_mps, &steps)| Phase { speed_mps, steps })
                .collect(),
            sample_interval_s: b.sample_interval_s,
            n_paths: b.n_paths,
            noise_power: b.noise_power,
            power_budget: b.power_budget,
            seed: self.run.seed,
        }
    }

    pub fn wiring_config(&self, n_sensory: usize) -> WiringConfig {
        let m = &self.model;
        WiringConfig {
            n_inter: m.n_inter,
            n_command: m.n_command,
            n_motor: m.n_motor,
            n_command_recurrent: 2 * m.n_command,
            fanout_sensory: 4.min(m.n_inter),
            fanout_inter: 4.min(m.n_command),
            fanin_motor: 4.min(m.n_command),
            ..WiringConfig::default_for(n_sensory, self.run.seed)
        }
    }

    pub fn glnn_config(&self) -> GlnnConfig {
        let g = &self.glnn;
        GlnnConfig {
            cell: g.cell,
            n_features: g.n_features,
            n_inter: g.n_inter,
            n_command: g.n_command,
            n_motor: g.n_motor,
            lr: g.lr,
            cell_dt: g.cell_dt,
            updates_per_interval: g.updates_per_interval,
            seed: self.run.seed,
        }
    }

    pub fn bf_config(&self) -> BfConfig {
        let b = &self.beamforming;
        BfConfig {
            glnn: self.glnn_config(),
            wmmse: WmmseConfig { max_iters: b.wmmse_max_iters, tol: b.wmmse_tol },
            wmmse_warm_start: b.wmmse_warm_start,
        }
    }

    pub fn train_config(&self, baseline: bool) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            lr: if baseline { t.baseline_lr } else { t.lr },
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            val_frac: t.val_frac,
            batches_per_epoch: (t.batches_per_epoch > 0).then_some(t.batches_per_epoch),
            seed: self.run.seed,
        }
    }
}
