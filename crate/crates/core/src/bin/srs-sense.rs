use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use srs_sense::harness::capture_spec::{build_capture, build_composite_capture, CaptureSpec, CompositeSpec};
use srs_sense::harness::config::ScenarioFile;
use srs_sense::harness::iq;
use srs_sense::harness::process::{process_capture, ProcessSetup};
use srs_sense::harness::report::{self, Format};
use srs_sense::harness::sweep::{self, Bandwidth, LocCdfTable, MisidSpec, ResultTable};
use srs_sense::mission::{self, MissionReport};
use srs_sense::Error;

const SCHEMA_HELP: &str = "\
Config files (TOML, schema_version = 1; full layouts in docs/formats.md):
  generate   capture spec: [srs], band_k0, periods, lead_samples, snr_db | noise_dbfs,
             [[ue]] id, band, shift, power_dbfs, offset_samples, cfo_hz
  composite  composite spec: shifts, powers_dbfs, offsets_samples, cfos_hz,
             duplicate_band, periods, snr_db (laboratory default when absent)
  process    capture spec or scenario file (bands and UE labels)
  mission    scenario file: name, environment, [srs], band_k0, [mission], [[ue]] ...
             (or --preset rural|urban)
  sweep      misid: optional sweep spec (ub, bandwidths, delay_spreads_s, power_spreads_db,
             trials, snr_db, [multipath], [mp], [sync]); loc: scenario file or --preset
  report     reads result JSON files written by sweep or mission";

#[derive(Parser)]
#[command(name = "srs-sense", version, about = "Passive SRS identification and localization toolkit", after_help = SCHEMA_HELP)]
struct Cli {
    /// Configuration file for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Fmt::Csv)]
    format: Fmt,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fmt {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Misid,
    Loc,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render SRS periods of the configured UEs into an IQ file.
    Generate {
        #[arg(long, default_value = "capture")]
        name: String,
        /// Override the number of SRS periods.
        #[arg(long)]
        periods: Option<usize>,
    },
    /// Build the laboratory-style composite capture.
    Composite {
        #[arg(long, default_value = "composite")]
        name: String,
    },
    /// Run acquisition and identification over a recorded capture.
    Process {
        iq: PathBuf,
        #[arg(long)]
        band: Option<usize>,
    },
    /// Fly a simulated mission.
    Mission {
        #[arg(long)]
        preset: Option<String>,
    },
    /// Misidentification grid or localization CDF sweep.
    Sweep {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Users per band, comma separated.
        #[arg(long, value_delimiter = ',')]
        ub: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
        /// Bandwidths, comma separated (1.4MHz, 13MHz).
        #[arg(long, value_delimiter = ',')]
        bw: Option<Vec<String>>,
        /// Number of mission seeds for --kind loc.
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        #[arg(long)]
        preset: Option<String>,
    },
    /// Tables from result files.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

enum Fail {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Domain(e)
    }
}

type Res<T> = std::result::Result<T, Fail>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            if code == 2 {
                eprintln!("\n{SCHEMA_HELP}");
            }
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Usage(m)) => {
            eprintln!("error: {m}\n\n{SCHEMA_HELP}");
            ExitCode::from(2)
        }
        Err(Fail::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn format(cli: &Cli) -> Format {
    match cli.format {
        Fmt::Csv => Format::Csv,
        Fmt::Json => Format::Json,
    }
}

fn out(cli: &Cli, name: &str) -> PathBuf {
    cli.out_dir.join(name)
}

fn emit(path: &Path, bytes: &[u8]) -> Res<()> {
    report::write_file(path, bytes)?;
    println!("{}", path.display());
    Ok(())
}

fn read_text(p: &Path) -> Res<String> {
    Ok(std::fs::read_to_string(p).map_err(|e| Error::io(format!("reading {}", p.display()), e))?)
}

fn toml_text<T: serde::Serialize>(v: &T) -> Res<String> {
    Ok(toml::to_string(v).map_err(|e| Error::Other(format!("toml: {e}")))?)
}

fn scenario(cli: &Cli, preset: Option<&str>) -> Res<ScenarioFile> {
    match (&cli.config, preset) {
        (Some(_), Some(_)) => Err(Fail::Usage("give either --config or --preset".into())),
        (Some(p), None) => Ok(ScenarioFile::load(p)?),
        (None, Some(n)) => Ok(ScenarioFile::preset(n)?),
        (None, None) => Err(Fail::Usage("a scenario is required: --config <file> or --preset rural|urban".into())),
    }
}

fn write_capture(cli: &Cli, name: &str, spec: &CaptureSpec, cap: &srs_sense::IqCapture) -> Res<()> {
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| Error::io(format!("creating {}", cli.out_dir.display()), e))?;
    let p = out(cli, &format!("{name}.iq"));
    iq::write_iq(&p, cap, spec.carrier_hz)?;
    println!("{}", p.display());
    println!("{}", iq::sidecar_path(&p).display());
    emit(&out(cli, &format!("{name}.spec.toml")), toml_text(spec)?.as_bytes())
}

fn run(cli: &Cli) -> Res<()> {
    let fmt = format(cli);
    match &cli.cmd {
        Cmd::Generate { name, periods } => {
            let Some(cfg) = &cli.config else {
                return Err(Fail::Usage("generate needs --config <capture spec>".into()));
            };
            let mut spec = CaptureSpec::load(cfg)?;
            if let Some(n) = periods {
                spec.periods = *n;
            }
            let cap = build_capture(&spec, cli.seed)?;
            write_capture(cli, name, &spec, &cap)
        }
        Cmd::Composite { name } => {
            let spec = match &cli.config {
                Some(p) => toml::from_str::<CompositeSpec>(&read_text(p)?).map_err(|e| Error::Parse {
                    path: p.display().to_string(),
                    offset: e.span().map_or(0, |s| s.start as u64),
                    msg: e.message().to_string(),
                })?,
                None => CompositeSpec::laboratory(),
            };
            let (cs, cap) = build_composite_capture(&spec, cli.seed)?;
            write_capture(cli, name, &cs, &cap)
        }
        Cmd::Process { iq: path, band } => {
            let Some(cfg) = &cli.config else {
                return Err(Fail::Usage("process needs --config <capture spec or scenario file>".into()));
            };
            let setup = ProcessSetup::load(cfg)?;
            let cap = iq::read_iq(path)?;
            let res = process_capture(&cap, &setup, *band)?;
            let stem = path.file_stem().map_or("capture".into(), |s| s.to_string_lossy().into_owned());
            match fmt {
                Format::Csv => emit(&out(cli, &format!("{stem}.detections.csv")), &report::detections_csv(&res.rows)?)?,
                Format::Json => emit(&out(cli, &format!("{stem}.detections.jsonl")), &report::jsonl_bytes(&res.rows)?)?,
            }
            emit(&out(cli, &format!("{stem}.receptions.jsonl")), &report::jsonl_bytes(&res.receptions)?)
        }
        Cmd::Mission { preset } => {
            let file = scenario(cli, preset.as_deref())?;
            let (sc, plan) = file.build(cli.seed)?;
            let rep = mission::run_mission(&sc, &plan, cli.seed)?;
            let stem = format!("mission_{}_s{}", file.name, cli.seed);
            emit(&out(cli, &format!("{stem}.json")), &report::json_bytes(&rep)?)?;
            mission_tables(cli, &stem, &rep, fmt)
        }
        Cmd::Sweep { kind: Kind::Misid, ub, trials, bw, .. } => {
            let mut spec = match &cli.config {
                Some(p) => toml::from_str::<MisidSpec>(&read_text(p)?).map_err(|e| Error::Parse {
                    path: p.display().to_string(),
                    offset: e.span().map_or(0, |s| s.start as u64),
                    msg: e.message().to_string(),
                })?,
                None => MisidSpec::default(),
            };
            spec.seed = cli.seed;
            if let Some(u) = ub {
                spec.ub = u.clone();
            }
            if let Some(t) = trials {
                spec.trials = *t;
            }
            if let Some(b) = bw {
                spec.bandwidths = b.iter().map(|s| Bandwidth::parse(s)).collect::<srs_sense::Result<_>>()?;
            }
            for t in sweep::run_misid_grid(&spec)? {
                grid_outputs(cli, &t, fmt, true)?;
            }
            Ok(())
        }
        Cmd::Sweep { kind: Kind::Loc, seeds, preset, .. } => {
            let file = scenario(cli, preset.as_deref())?;
            let t = sweep::run_loc_cdf(&file, cli.seed, *seeds)?;
            loc_outputs(cli, &t, fmt, true)
        }
        Cmd::Report { inputs } => {
            for p in inputs {
                report_one(cli, p, fmt)?;
            }
            Ok(())
        }
    }
}

fn mission_tables(cli: &Cli, stem: &str, rep: &MissionReport, fmt: Format) -> Res<()> {
    let recs = report::estimate_records(rep);
    emit(&out(cli, &format!("{stem}.estimates.jsonl")), &report::jsonl_bytes(&recs)?)?;
    match fmt {
        Format::Csv => emit(&out(cli, &format!("{stem}.le.csv")), &report::le_table_csv(rep)?),
        Format::Json => emit(&out(cli, &format!("{stem}.le.json")), &report::json_bytes(&rep.estimates)?),
    }
}

fn grid_outputs(cli: &Cli, t: &ResultTable, fmt: Format, with_json: bool) -> Res<()> {
    let stem = format!("misid_ub{}_{}", t.ub, t.bandwidth.label());
    if with_json || fmt == Format::Json {
        emit(&out(cli, &format!("{stem}.json")), &report::json_bytes(t)?)?;
    }
    if fmt == Format::Csv {
        emit(&out(cli, &format!("{stem}.csv")), &report::grid_csv(t)?)?;
    }
    Ok(())
}

fn loc_outputs(cli: &Cli, t: &LocCdfTable, fmt: Format, with_json: bool) -> Res<()> {
    let stem = format!("loc_{}", t.scenario);
    if with_json || fmt == Format::Json {
        emit(&out(cli, &format!("{stem}.json")), &report::json_bytes(t)?)?;
    }
    if fmt == Format::Csv {
        emit(&out(cli, &format!("{stem}_cdf.csv")), &report::cdf_csv(t)?)?;
        emit(&out(cli, &format!("{stem}_ale.csv")), &report::seed_ale_csv(t)?)?;
    }
    Ok(())
}

fn report_one(cli: &Cli, p: &Path, fmt: Format) -> Res<()> {
    let text = read_text(p)?;
    let parse_err = |e: serde_json::Error| Error::Parse { path: p.display().to_string(), offset: 0, msg: e.to_string() };
    let v: serde_json::Value = serde_json::from_str(&text).map_err(parse_err)?;
    match v.get("kind").and_then(|k| k.as_str()) {
        Some("misid_grid") => {
            let t: ResultTable = serde_json::from_value(v).map_err(parse_err)?;
            grid_outputs(cli, &t, fmt, false)
        }
        Some("loc_cdf") => {
            let t: LocCdfTable = serde_json::from_value(v).map_err(parse_err)?;
            loc_outputs(cli, &t, fmt, false)
        }
        _ if v.get("estimates").is_some() => {
            let rep: MissionReport = serde_json::from_value(v).map_err(parse_err)?;
            let stem = p.file_stem().map_or("mission".into(), |s| s.to_string_lossy().into_owned());
            mission_tables(cli, &stem, &rep, fmt)
        }
        _ => Err(Fail::Domain(Error::Parse {
            path: p.display().to_string(),
            offset: 0,
            msg: "not a misid_grid, loc_cdf or mission report".into(),
        })),
    }
}
