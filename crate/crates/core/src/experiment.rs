//! Parameter sweeps and CSV output.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{chernoff_bound, markov_expected_queue, BoundRegime, MarkovChainSpec, Orientation};
use crate::error::{Error, Result};
use crate::model::{DestDist, PolicyKind, RateMode, SimMetrics, SwitchConfig, TrafficSpec};
use crate::sim::{self, TraceEvent};

fn default_duration() -> u64 {
    100_000
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

/// A grid of simulation runs: every policy at every load and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub policies: Vec<PolicyKind>,
    pub n_ports: usize,
    pub loads: Vec<f64>,
    pub dest_dist: DestDist,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_duration")]
    pub duration_slots: u64,
    #[serde(default)]
    pub warmup_slots: Option<u64>,
    #[serde(default)]
    pub rate_mode: RateMode,
    #[serde(default)]
    pub pf_threshold: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    #[serde(default)]
    pub sweeps: Vec<SweepSpec>,
}

/// Loads 0.1, 0.2, ..., 0.9.
pub fn load_grid() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: ExperimentPlan = toml::from_str(text)?;
        plan.configs()?;
        Ok(plan)
    }

    /// Bundled sweeps: `paper-fig5` (uniform) and `paper-fig6` (diagonal), all
    /// five policies at N = 32 over loads 0.1..0.9.
    pub fn preset(name: &str) -> Result<Self> {
        let dest_dist = match name {
            "paper-fig5" => DestDist::Uniform,
            "paper-fig6" => DestDist::Diagonal,
            _ => return Err(Error::InvalidConfig(format!("unknown preset `{name}` (try paper-fig5, paper-fig6)"))),
        };
        Ok(ExperimentPlan {
            sweeps: vec![SweepSpec {
                policies: PolicyKind::ALL.to_vec(),
                n_ports: 32,
                loads: load_grid(),
                dest_dist,
                seeds: default_seeds(),
                duration_slots: default_duration(),
                warmup_slots: None,
                rate_mode: RateMode::Oracle,
                pf_threshold: None,
            }],
        })
    }

    pub fn set_seeds(&mut self, seeds: &[u64]) {
        self.sweeps.iter_mut().for_each(|s| s.seeds = seeds.to_vec());
    }

    pub fn set_duration(&mut self, duration_slots: u64) {
        self.sweeps.iter_mut().for_each(|s| s.duration_slots = duration_slots);
    }

    /// Every run of the plan, validated and in output order.
    pub fn configs(&self) -> Result<Vec<SwitchConfig>> {
        let mut out = Vec::new();
        for s in &self.sweeps {
            for &policy in &s.policies {
                for &load in &s.loads {
                    for &seed in &s.seeds {
                        let mut cfg = SwitchConfig::new(
                            s.n_ports,
                            policy,
                            TrafficSpec::new(load, s.dest_dist),
                            s.duration_slots,
                            seed,
                        );
                        cfg.warmup_slots = s.warmup_slots;
                        cfg.rate_mode = s.rate_mode;
                        cfg.pf_threshold = s.pf_threshold;
                        cfg.validate()?;
                        out.push(cfg);
                    }
                }
            }
        }
        out.sort_by(|a, b| sort_key(a).partial_cmp(&sort_key(b)).expect("loads are finite"));
        Ok(out)
    }
}

fn sort_key(c: &SwitchConfig) -> (PolicyKind, usize, f64, DestDist, u64) {
    (c.policy, c.n_ports, c.traffic.load, c.traffic.dest_dist, c.seed)
}

/// One line of `sim_results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub policy: PolicyKind,
    pub n_ports: usize,
    pub load: f64,
    pub dest_dist: DestDist,
    pub seed: u64,
    pub duration_slots: u64,
    pub mean_delay: f64,
    pub p99_delay: u64,
    pub reorder_events: u64,
    pub served_packets: u64,
    pub idle_despite_backlog: u64,
}

impl SimRow {
    pub fn new(cfg: &SwitchConfig, m: &SimMetrics) -> Self {
        SimRow {
            policy: cfg.policy,
            n_ports: cfg.n_ports,
            load: cfg.traffic.load,
            dest_dist: cfg.traffic.dest_dist,
            seed: cfg.seed,
            duration_slots: cfg.duration_slots,
            mean_delay: m.mean_delay,
            p99_delay: m.p99_delay,
            reorder_events: m.reorder_events,
            served_packets: m.served_packets,
            idle_despite_backlog: m.idle_despite_backlog,
        }
    }
}

/// A run that stopped on an error.
#[derive(Clone, Debug)]
pub struct FailedRun {
    pub config: SwitchConfig,
    pub error: String,
    pub invariant: bool,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutcome {
    pub rows: Vec<SimRow>,
    pub failures: Vec<FailedRun>,
}

/// Runs every configuration in parallel; rows come back in the input order.
pub fn run_configs(configs: &[SwitchConfig], trace_dir: Option<&Path>) -> SweepOutcome {
    let results: Vec<Result<SimRow>> = configs
        .par_iter()
        .map(|cfg| {
            let metrics = match trace_dir {
                Some(dir) => run_with_trace_file(cfg, &dir.join(trace_file_name(cfg)))?,
                None => sim::run(cfg)?,
            };
            Ok(SimRow::new(cfg, &metrics))
        })
        .collect();
    let mut out = SweepOutcome::default();
    for (cfg, r) in configs.iter().zip(results) {
        match r {
            Ok(row) => out.rows.push(row),
            Err(e) => out.failures.push(FailedRun {
                config: cfg.clone(),
                invariant: matches!(e, Error::Invariant(_)),
                error: e.to_string(),
            }),
        }
    }
    out
}

pub fn trace_file_name(cfg: &SwitchConfig) -> String {
    format!(
        "trace_{}_n{}_load{}_{}_seed{}.csv",
        cfg.policy, cfg.n_ports, cfg.traffic.load, cfg.traffic.dest_dist, cfg.seed
    )
}

/// Runs `cfg`, writing one `slot,event,port,packet_id,fake` line per event to `path`.
pub fn run_with_trace_file(cfg: &SwitchConfig, path: &Path) -> Result<SimMetrics> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["slot", "event", "port", "packet_id", "fake"])?;
    let mut failed: Option<csv::Error> = None;
    let mut sink = |e: TraceEvent| {
        if failed.is_none() {
            let rec = [
                e.slot.to_string(),
                e.kind.name().to_string(),
                e.port.to_string(),
                e.packet_id.to_string(),
                e.fake.to_string(),
            ];
            if let Err(err) = w.write_record(&rec) {
                failed = Some(err);
            }
        }
    };
    let metrics = sim::run_traced(cfg, &mut sink)?;
    if let Some(err) = failed {
        return Err(err.into());
    }
    w.flush()?;
    Ok(metrics)
}

pub fn write_sim_csv<W: Write>(rows: &[SimRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "policy",
            "n_ports",
            "load",
            "dest_dist",
            "seed",
            "duration_slots",
            "mean_delay",
            "p99_delay",
            "reorder_events",
            "served_packets",
            "idle_despite_backlog",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sim_csv(path: &Path) -> Result<Vec<SimRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub const DEFAULT_BOUND_SIZES: [usize; 3] = [1024, 2048, 4096];

/// Loads 0.90, 0.91, ..., 0.97.
pub fn default_bound_loads() -> Vec<f64> {
    (90..=97).map(|k| k as f64 / 100.0).collect()
}

/// Overload bound for every `(ρ, N)` pair; one row per load.
#[derive(Clone, Debug)]
pub struct BoundTable {
    pub sizes: Vec<usize>,
    pub rows: Vec<BoundRow>,
}

#[derive(Clone, Debug)]
pub struct BoundRow {
    pub rho: f64,
    /// Bound per size, or the error that prevented computing it.
    pub cells: Vec<std::result::Result<f64, String>>,
    pub note: Option<String>,
}

pub fn compute_bound_table(sizes: &[usize], loads: &[f64]) -> BoundTable {
    let rows = loads
        .iter()
        .map(|&rho| {
            let cells: Vec<_> = sizes.iter().map(|&n| chernoff_bound(n, rho)).collect();
            let mut notes = Vec::new();
            if cells.iter().any(|c| matches!(c, Ok(b) if b.regime == BoundRegime::ZeroOverload)) {
                notes.push("zero-overload-regime".to_string());
            }
            for (n, c) in sizes.iter().zip(&cells) {
                if let Err(e) = c {
                    notes.push(format!("error at N={n}: {e}"));
                }
            }
            let cells = cells.into_iter().map(|c| c.map(|b| b.value).map_err(|e| e.to_string())).collect();
            BoundRow { rho, cells, note: (!notes.is_empty()).then(|| notes.join("; ")) }
        })
        .collect();
    BoundTable { sizes: sizes.to_vec(), rows }
}

/// Wide CSV: `rho`, one `N=<size>` column per size, then `note`.
pub fn write_bound_csv<W: Write>(table: &BoundTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["rho".to_string()];
    header.extend(table.sizes.iter().map(|n| format!("N={n}")));
    header.push("note".into());
    w.write_record(&header)?;
    for BoundRow { rho, cells, note } in &table.rows {
        let mut rec = vec![rho.to_string()];
        rec.extend(cells.iter().map(|c| match c {
            Ok(v) => format!("{v:e}"),
            Err(_) => "error".to_string(),
        }));
        rec.push(note.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayRow {
    pub n_ports: usize,
    pub rho: f64,
    pub orientation: String,
    pub expected_queue: f64,
    pub residual: f64,
}

/// Sizes 8, 16, ..., 256.
pub fn default_delay_sizes() -> Vec<usize> {
    (3..=8).map(|k| 1usize << k).collect()
}

pub fn delay_analysis(rho: f64, sizes: &[usize], orientations: &[Orientation]) -> Result<Vec<DelayRow>> {
    let mut jobs = Vec::new();
    for &o in orientations {
        for &n in sizes {
            jobs.push(MarkovChainSpec::new(n, rho).with_orientation(o));
        }
    }
    jobs.par_iter()
        .map(|spec| {
            let s = markov_expected_queue(spec)?;
            Ok(DelayRow {
                n_ports: spec.n,
                rho,
                orientation: spec.orientation.name().to_string(),
                expected_queue: s.expected_queue,
                residual: s.residual,
            })
        })
        .collect()
}

pub fn write_delay_csv<W: Write>(rows: &[DelayRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Creates `dir` if needed and opens `dir/name` for writing.
pub fn create_output(dir: &Path, name: &str) -> Result<(PathBuf, File)> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path)?;
    Ok((path, file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_expand_to_135_runs() {
        for name in ["paper-fig5", "paper-fig6"] {
            let cfgs = ExperimentPlan::preset(name).unwrap().configs().unwrap();
            assert_eq!(cfgs.len(), 135);
            assert!(cfgs.windows(2).all(|w| sort_key(&w[0]) < sort_key(&w[1])));
        }
        assert!(ExperimentPlan::preset("fig7").is_err());
    }

    #[test]
    fn plan_from_toml() {
        let plan = ExperimentPlan::from_toml(
            r#"
            [[sweeps]]
            policies = ["sprinklers", "ufs"]
            n_ports = 8
            loads = [0.2, 0.4]
            dest_dist = "diagonal"
            seeds = [7]
            duration_slots = 500
            "#,
        )
        .unwrap();
        let cfgs = plan.configs().unwrap();
        assert_eq!(cfgs.len(), 4);
        assert_eq!(cfgs[0].policy, PolicyKind::Sprinklers);
        assert!(ExperimentPlan::from_toml(
            "[[sweeps]]\npolicies=[\"pf\"]\nn_ports=6\nloads=[0.1]\ndest_dist=\"uniform\""
        )
        .is_err());
    }

    #[test]
    fn bound_table_marks_zero_regime() {
        let t = compute_bound_table(&[1024, 512], &[0.5, 0.95]);
        let mut buf = Vec::new();
        write_bound_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "rho,N=1024,N=512,note");
        assert_eq!(lines[1], "0.5,0e0,0e0,zero-overload-regime");
        assert!(lines[2].starts_with("0.95,3."));
    }

    #[test]
    fn delay_rows_for_both_orientations() {
        let rows = delay_analysis(0.0, &[8, 16], &[Orientation::ArrivalConsistent, Orientation::AsPrinted]).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[..2].iter().all(|r| r.expected_queue == 0.0 && r.orientation == "arrival-consistent"));
        assert!(rows[2..].iter().all(|r| r.expected_queue > 0.0 && r.orientation == "as-printed"));
        assert!(delay_analysis(1.0, &[8], &[Orientation::ArrivalConsistent]).is_err());
    }
}
