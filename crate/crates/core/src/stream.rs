//! Run orchestration: warm-up, the per-record cycle, snapshot emission and
//! checkpoint/resume.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::design::ModelDesign;
use crate::engine::{Engine, EngineState, ModelConfig};
use crate::error::{Error, Result};
use crate::ingest::StreamRecord;
use crate::linalg::Matrix;
use crate::output::{write_record, write_snapshot, Record};
use crate::warmup::{autotune, warmup_seed, ConvergenceReport, DesignedData, RawData, WarmupSource};

pub const CHECKPOINT_FORMAT: &str = "streamreg-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Generalized-model checkpoints above this many buffered rows draw a warning.
pub const BUFFER_WARNING_ROWS: usize = 100_000;

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: ModelConfig,
    pub design: ModelDesign,
    pub n_warm: usize,
    pub engine: EngineState,
}

impl Checkpoint {
    pub fn new(model: ModelConfig, design: ModelDesign, n_warm: usize, engine: &Engine) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model,
            design,
            n_warm,
            engine: engine.state(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec(self)?;
        v.push(b'\n');
        Ok(v)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let c: Checkpoint = serde_json::from_slice(bytes).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("not a checkpoint: format `{}`", c.format)));
        }
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", c.version)));
        }
        Ok(c)
    }

    /// Writes via a temporary file so a crash never leaves a torn checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes()?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn engine(&self) -> Result<Engine> {
        Engine::from_state(self.engine.clone())
    }

    /// A warning when the embedded data buffer is large.
    pub fn size_warning(&self) -> Option<String> {
        match &self.engine {
            EngineState::Glm { model, .. } if model.buffer().len() > BUFFER_WARNING_ROWS => Some(format!(
                "checkpoint embeds {} buffered rows; generalized models keep all past data",
                model.buffer().len()
            )),
            _ => None,
        }
    }
}

/// Pulls records on demand so warm-up retries can re-read from the start.
struct BufferedSource<'a, I> {
    records: &'a mut I,
    rows: Vec<StreamRecord>,
    raw: RawData,
}

impl<I: Iterator<Item = Result<StreamRecord>>> BufferedSource<'_, I> {
    fn fill(&mut self, count: usize) -> Result<()> {
        while self.rows.len() < count {
            match self.records.next() {
                Some(r) => {
                    let r = r?;
                    self.raw.y.push(r.y);
                    self.raw.x.push(r.x.clone());
                    self.rows.push(r);
                }
                None => break,
            }
        }
        Ok(())
    }
}

impl<I: Iterator<Item = Result<StreamRecord>>> WarmupSource for BufferedSource<'_, I> {
    fn load(&mut self, n_warm: usize, count: usize) -> Result<DesignedData> {
        self.fill(count)?;
        if self.rows.len() < n_warm {
            return Err(short_input(self.rows.len(), n_warm));
        }
        self.raw.load(n_warm, count)
    }

    fn len(&self) -> usize {
        self.rows.len()
    }
}

fn short_input(have: usize, need: usize) -> Error {
    Error::Ingest {
        line: have + 1,
        message: format!("input ended after {have} records; warm-up needs {need}"),
    }
}

/// Outcome of a streaming run.
#[derive(Debug)]
pub struct StreamSummary {
    pub checkpoint: Checkpoint,
    pub snapshots: usize,
    pub reports: Vec<ConvergenceReport>,
}

/// Design matrix of raw records.
pub fn design_matrix(design: &ModelDesign, records: &[StreamRecord]) -> Result<(Vec<f64>, Matrix)> {
    let mut c = Matrix::with_cols(design.layout().total());
    for r in records {
        c.push_row(&design.row(&r.x).map_err(|e| at_line(r.line, e))?)?;
    }
    Ok((records.iter().map(|r| r.y).collect(), c))
}

fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::Range { .. } => Error::Ingest {
            line,
            message: e.to_string(),
        },
        e => e,
    }
}

/// Streams `records` through a fresh warm-up (or the resumed engine in
/// `resume`), writing one snapshot line every `snapshot_every` observations.
pub fn run_stream<I, W>(
    cfg: &RunConfig,
    seed: u64,
    records: I,
    out: &mut W,
    resume: Option<Checkpoint>,
) -> Result<StreamSummary>
where
    I: IntoIterator<Item = Result<StreamRecord>>,
    W: Write,
{
    let every = cfg.io.snapshot_every();
    let mut records = records.into_iter();
    let mut snapshots = 0;
    let mut reports = Vec::new();
    let emit = |n: u64| n.is_multiple_of(every);

    let (model, design, n_warm, mut engine, pending) = match resume {
        Some(ck) => {
            let engine = ck.engine()?;
            let skip = engine.n();
            for k in 0..skip {
                match records.next() {
                    Some(r) => {
                        r?;
                    }
                    None => return Err(short_input(k as usize, skip as usize)),
                }
            }
            (ck.model, ck.design, ck.n_warm, engine, Vec::new())
        }
        None => {
            let plan = &cfg.warmup.plan;
            let mut src = BufferedSource {
                records: &mut records,
                rows: Vec::new(),
                raw: RawData {
                    predictors: cfg.model.predictors.clone(),
                    y: Vec::new(),
                    x: Vec::new(),
                },
            };
            let first = src.load(plan.n_warm, plan.n_warm)?;
            let model = cfg.model_config(&first.design)?;
            if cfg.warmup.autotune {
                let outcome = autotune(plan, &mut src, &model, seed)?;
                reports = outcome.reports;
                for rec in &outcome.validation {
                    if emit(rec.n) {
                        write_snapshot(out, rec)?;
                        snapshots += 1;
                    }
                }
                let consumed = outcome.engine.n() as usize;
                let pending = src.rows.split_off(consumed.min(src.rows.len()));
                (model, outcome.design, outcome.n_warm, outcome.engine, pending)
            } else {
                plan.validate(model.layout.total())?;
                let (engine, _) = warmup_seed(&first.y, &first.c, plan.n_warm, &model, seed)?;
                let pending = src.rows.split_off(plan.n_warm);
                (model, first.design, plan.n_warm, engine, pending)
            }
        }
    };

    for r in pending.into_iter().map(Ok).chain(records) {
        let r = r?;
        let c = design.row(&r.x).map_err(|e| at_line(r.line, e))?;
        engine.step(r.y, &c)?;
        if emit(engine.n()) {
            write_snapshot(out, &engine.snapshot()?.record()?)?;
            snapshots += 1;
        }
    }
    out.flush()?;
    Ok(StreamSummary {
        checkpoint: Checkpoint::new(model, design, n_warm, &engine),
        snapshots,
        reports,
    })
}

/// Runs the tuning loop and writes the report as records.
pub fn run_tune<I, W>(cfg: &RunConfig, seed: u64, records: I, out: &mut W) -> Result<ConvergenceReport>
where
    I: IntoIterator<Item = Result<StreamRecord>>,
    W: Write,
{
    let plan = &cfg.warmup.plan;
    let mut records = records.into_iter();
    let mut src = BufferedSource {
        records: &mut records,
        rows: Vec::new(),
        raw: RawData {
            predictors: cfg.model.predictors.clone(),
            y: Vec::new(),
            x: Vec::new(),
        },
    };
    let first = src.load(plan.n_warm, plan.n_warm)?;
    let model = cfg.model_config(&first.design)?;
    let result = autotune(plan, &mut src, &model, seed);
    let (reports, outcome) = match result {
        Ok(o) => (o.reports, Ok(())),
        Err(Error::Tuning {
            attempts,
            max_gap,
            report,
        }) => {
            // Earlier attempts are not kept on failure; re-report the last one.
            let last = (*report).clone();
            (
                vec![last],
                Err(Error::Tuning {
                    attempts,
                    max_gap,
                    report,
                }),
            )
        }
        Err(e) => return Err(e),
    };
    for (attempt, rep) in reports.iter().enumerate() {
        for row in &rep.rows {
            write_record(out, &Record::Convergence(row.clone()))?;
        }
        write_record(
            out,
            &Record::Verdict {
                n_warm: rep.n_warm,
                attempt,
                max_gap: rep.max_gap,
                threshold: rep.threshold,
                verdict: rep.verdict,
            },
        )?;
    }
    out.flush()?;
    outcome?;
    Ok(reports.last().expect("at least one attempt").clone())
}
