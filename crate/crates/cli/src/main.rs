use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use streamreg::compare::{compare_records, polygon_pair, DrawsTable};
use streamreg::config::RunConfig;
use streamreg::design::ModelDesign;
use streamreg::engine::seeding_stream;
use streamreg::error::exit;
use streamreg::ingest::{read_all, RecordReader, Schema};
use streamreg::output::{read_records, snapshots, write_record, write_trajectory_table, Record};
use streamreg::simulate::Scenario;
use streamreg::stream::{design_matrix, run_stream, run_tune, Checkpoint};
use streamreg::{Error, Result};

/// Online Bayesian regression by sequential Monte Carlo.
#[derive(Parser)]
#[command(name = "streamreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic data stream as a comma-delimited table.
    Simulate {
        /// logistic-lm, binary-npr, gaussian-lm, gaussian-lmm or poisson-lm.
        scenario: String,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, env = "STREAMREG_SEED", default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write a matching run configuration here.
        #[arg(long)]
        config_out: Option<PathBuf>,
    },
    /// Grow the warm-up until online and batch summaries agree.
    Tune {
        #[command(flatten)]
        run: RunArgs,
        /// Plot-ready trajectory table (CSV).
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Warm up, then update the posterior one record at a time.
    FitStream {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Continue from --checkpoint, skipping the records it has absorbed.
        #[arg(long, requires = "checkpoint")]
        resume: bool,
        #[arg(long)]
        snapshot_every: Option<u64>,
    },
    /// Batch MCMC on the first --rows records; writes the kept draws.
    BatchMcmc {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        n_kept: Option<usize>,
    },
    /// Gaps and paired frequency polygons between a run and a batch reference.
    Compare {
        /// Snapshot stream written by fit-stream.
        #[arg(long)]
        run: PathBuf,
        /// Snapshot stream, or a draws table written by batch-mcmc.
        #[arg(long)]
        reference: PathBuf,
        /// Sample size of a draws-table reference; defaults to the last run snapshot.
        #[arg(long)]
        n: Option<u64>,
        /// Checkpoint whose particles are binned against the draws table.
        #[arg(long)]
        particles: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, env = "STREAMREG_SEED")]
    seed: Option<u64>,
    /// Input table, or `-` for standard input.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    upsilon: Option<f64>,
    #[arg(long)]
    no_adapt: bool,
}

impl RunArgs {
    fn load(&self) -> Result<(RunConfig, u64)> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(m) = self.particles {
            cfg.smc.particles = m;
        }
        if self.tau.is_some() {
            cfg.smc.tau = self.tau;
        }
        if let Some(u) = self.upsilon {
            cfg.smc.upsilon = u;
        }
        if self.no_adapt {
            cfg.smc.adapt = false;
        }
        if let Some(p) = &self.input {
            cfg.io.input = Some(p.clone());
        }
        if let Some(p) = &self.output {
            cfg.io.output = Some(p.clone());
        }
        cfg.validate()?;
        let seed = self.seed.or(cfg.seed).unwrap_or(0);
        Ok((cfg, seed))
    }
}

fn schema(cfg: &RunConfig) -> Schema {
    Schema {
        family: cfg.model.family,
        response: cfg.model.response.clone(),
        predictors: cfg.model.predictors.iter().map(|p| p.name.clone()).collect(),
    }
}

fn open_input(path: Option<&Path>) -> Result<Box<dyn Read>> {
    match path {
        None => Ok(Box::new(io::stdin().lock())),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(io::stdin().lock())),
        Some(p) => Ok(Box::new(BufReader::new(File::open(p)?))),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => Ok(Box::new(BufWriter::new(File::create(p)?))),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            scenario,
            n,
            seed,
            output,
            config_out,
        } => {
            let s: Scenario = scenario.parse()?;
            let mut out = open_output(output.as_deref())?;
            s.write_csv(n, seed, &mut out)?;
            out.flush()?;
            if let Some(p) = config_out {
                std::fs::write(p, s.config_toml())?;
            }
            Ok(())
        }
        Command::Tune { run, table } => {
            let (cfg, seed) = run.load()?;
            let reader = RecordReader::new(open_input(cfg.io.input.as_deref())?, schema(&cfg))?;
            let mut out = open_output(cfg.io.output.as_deref())?;
            let result = run_tune(&cfg, seed, reader, &mut out);
            let report = match &result {
                Ok(r) => Some(r.clone()),
                Err(Error::Tuning { report, .. }) => Some((**report).clone()),
                Err(_) => None,
            };
            if let (Some(path), Some(rep)) = (table, report) {
                write_trajectory_table(&mut File::create(path)?, &rep.rows)?;
            }
            let rep = result?;
            eprintln!("converging at n_warm = {} (max gap {:.3})", rep.n_warm, rep.max_gap);
            Ok(())
        }
        Command::FitStream {
            run,
            checkpoint,
            resume,
            snapshot_every,
        } => {
            let (mut cfg, seed) = run.load()?;
            if snapshot_every.is_some() {
                cfg.io.snapshot_every = snapshot_every;
            }
            let ck_path = checkpoint.or_else(|| cfg.io.checkpoint.clone());
            let resumed = match (&ck_path, resume) {
                (Some(p), true) => Some(Checkpoint::load(p)?),
                _ => None,
            };
            let reader = RecordReader::new(open_input(cfg.io.input.as_deref())?, schema(&cfg))?;
            let mut out = open_output(cfg.io.output.as_deref())?;
            let summary = run_stream(&cfg, seed, reader, &mut out, resumed)?;
            if let Some(p) = ck_path {
                if let Some(w) = summary.checkpoint.size_warning() {
                    eprintln!("warning: {w}");
                }
                summary.checkpoint.save(&p)?;
            }
            Ok(())
        }
        Command::BatchMcmc { run, rows, n_kept } => {
            let (cfg, seed) = run.load()?;
            let records = read_all(open_input(cfg.io.input.as_deref())?, schema(&cfg))?;
            let rows = rows.unwrap_or(records.len()).min(records.len());
            let n_warm = cfg.warmup.plan.n_warm.min(rows);
            let x: Vec<Vec<f64>> = records[..n_warm].iter().map(|r| r.x.clone()).collect();
            let design = ModelDesign::fit(&cfg.model.predictors, &x)?;
            let model = cfg.model_config(&design)?;
            let (y, c) = design_matrix(&design, &records[..rows])?;
            let kept = n_kept.or(cfg.mcmc.n_kept).unwrap_or(cfg.smc.particles);
            let chain = model.batch_chain(&y, &c, kept, &mut seeding_stream(seed))?;
            let mut out = open_output(cfg.io.output.as_deref())?;
            DrawsTable::from_chain(&chain, model.labels()).write(&mut out)?;
            if let Some(a) = chain.accept_rate {
                eprintln!("acceptance rate {a:.3}");
            }
            Ok(())
        }
        Command::Compare {
            run,
            reference,
            n,
            particles,
            output,
        } => {
            let run_recs = snapshots(&read_records(BufReader::new(File::open(&run)?))?);
            let mut rbuf = BufReader::new(File::open(&reference)?);
            let is_jsonl = rbuf.fill_buf()?.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{');
            let mut out = open_output(output.as_deref())?;
            let (ref_recs, draws) = if is_jsonl {
                (snapshots(&read_records(rbuf)?), None)
            } else {
                let table = DrawsTable::read(rbuf)?;
                let n = n
                    .or_else(|| run_recs.last().map(|r| r.n))
                    .ok_or_else(|| Error::Config("run has no snapshots".into()))?;
                (vec![table.record(n)?], Some(table))
            };
            for row in compare_records(&run_recs, &ref_recs)? {
                write_record(&mut out, &Record::Gap(row))?;
            }
            if let (Some(p), Some(table)) = (particles, draws) {
                let snap = Checkpoint::load(&p)?.engine()?.snapshot()?;
                for name in &table.names {
                    let j = snap
                        .index_of(name)
                        .ok_or_else(|| Error::InvalidParameter(format!("parameter `{name}` missing from checkpoint")))?;
                    let col = table.column(name).expect("named column");
                    let pair = polygon_pair(name, &snap.distribution(j), &col)?;
                    write_record(&mut out, &Record::Polygon(pair))?;
                }
            }
            out.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
