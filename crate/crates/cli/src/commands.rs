use std::fs;
use std::path::{Path, PathBuf};

use maxent_core::bench::{self, BenchmarkConfig, BenchmarkReport, ReportRow, Task, REPORT_HEADER};
use maxent_core::constraints::{nesting_map, to_architecture, ArchitectureMatrix};
use maxent_core::ising::{self, Hypergraph};
use maxent_core::selection::{self, ModelScore, SelectionConfig};
use maxent_core::simplex::{entropy, multinomial_sample};
use maxent_core::solver::{self, MaxEntSolution};
use maxent_core::{Distribution, Method, MicrostateSpace, SolveOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::formats::{self, ConstraintsFile, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Newton,
    Ipf,
}

pub struct FitRequest {
    pub constraints: PathBuf,
    pub counts: Option<PathBuf>,
    pub solver: SolverKind,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct FitOutput<'a> {
    solver: &'static str,
    labels: &'a [String],
    probabilities: &'a [f64],
    /// One per row of the reduced constraint system; Newton only.
    multipliers: Option<Vec<f64>>,
    rank: usize,
    entropy: f64,
    residual: f64,
    iterations: usize,
    /// Microstates fixed at zero probability by the data.
    excluded: Vec<&'a str>,
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

pub fn fit(req: &FitRequest) -> CliResult<()> {
    let model = formats::read_model(&req.constraints)?;
    let f = match &req.counts {
        Some(p) => Some(Distribution::from_counts(&formats::read_counts(
            p,
            &model.space,
        )?)),
        None => None,
    };
    if f.is_some() && model.moments.is_some() {
        log::warn!("moments in the constraints file are ignored; using the counts");
    }
    let mut opts = match req.solver {
        SolverKind::Newton => SolveOptions::newton(),
        SolverKind::Ipf => SolveOptions::ipf(),
    };
    if let Some(t) = req.tolerance {
        opts.tolerance = t;
    }
    if let Some(m) = req.max_iterations {
        opts.max_iterations = m;
    }
    opts.validate()?;
    let coeffs = model.coefficients(f.as_ref())?;
    let arch = to_architecture(&coeffs)?;

    let (sol, distribution): (MaxEntSolution, Distribution) = match (req.solver, &f) {
        (SolverKind::Newton, Some(f)) => {
            let fit = selection::fit_empirical(&arch, f, None, &opts)?;
            let mut sol = fit.solution;
            if !fit.mask.is_full() {
                // Multipliers of the reduced space do not extend to the full one.
                sol.multipliers = None;
            }
            (sol, fit.distribution)
        }
        (SolverKind::Newton, None) => {
            let sol = solver::solve_newton(&arch, &opts)?;
            let d = sol.distribution.clone();
            (sol, d)
        }
        (SolverKind::Ipf, _) => {
            let sol = solver::solve_ipf(&coeffs, &opts)?;
            let d = sol.distribution.clone();
            (sol, d)
        }
    };
    let out = FitOutput {
        solver: match req.solver {
            SolverKind::Newton => "newton",
            SolverKind::Ipf => "ipf",
        },
        labels: model.space.labels(),
        probabilities: distribution.probs(),
        multipliers: sol.multipliers.clone(),
        rank: arch.rank(),
        entropy: entropy(&distribution),
        residual: sol.residual,
        iterations: sol.iterations,
        excluded: distribution
            .excluded()
            .into_iter()
            .map(|i| model.space.labels()[i].as_str())
            .collect(),
    };
    formats::emit(req.out.as_deref(), &to_json(&out))
}

pub struct SelectRequest {
    /// Directory of constraints files, a JSON list of them, or `enumerate:L`.
    pub candidates: String,
    pub counts: PathBuf,
    pub methods: Vec<Method>,
    pub alpha_prefactor: f64,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ScoreRow<'a> {
    name: &'a str,
    #[serde(flatten)]
    score: &'a ModelScore,
}

#[derive(Debug, Serialize)]
struct Skipped<'a> {
    id: usize,
    name: &'a str,
    error: String,
}

#[derive(Debug, Serialize)]
struct Chosen<'a> {
    method: Method,
    id: usize,
    name: &'a str,
    /// No candidate passed the thresholds; the most complex one was returned.
    fallback: bool,
}

#[derive(Debug, Serialize)]
struct SelectOutput<'a> {
    n: u64,
    candidates: Vec<ScoreRow<'a>>,
    skipped: Vec<Skipped<'a>>,
    selections: Vec<Chosen<'a>>,
}

pub fn load_candidates(spec: &str) -> CliResult<Vec<Model>> {
    let models = if let Some(l) = spec.strip_prefix("enumerate:") {
        let l: usize = l
            .parse()
            .map_err(|_| CliError::Input(format!("bad spin count in '{spec}'")))?;
        let closures = ising::enumerate_models(l)?;
        closures
            .iter()
            .map(Model::from_closure)
            .collect::<CliResult<Vec<_>>>()?
    } else {
        let path = Path::new(spec);
        if path.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| CliError::read(path, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            files
                .iter()
                .map(|p| formats::read_model(p))
                .collect::<CliResult<Vec<_>>>()?
        } else {
            let text = formats::read_text(path)?;
            let list: Vec<ConstraintsFile> = serde_json::from_str(&text).map_err(|e| {
                CliError::Input(format!("{spec}: expected a JSON list of constraints: {e}"))
            })?;
            list.into_iter()
                .enumerate()
                .map(|(i, c)| c.into_model(&format!("#{i}")))
                .collect::<CliResult<Vec<_>>>()?
        }
    };
    let first = models
        .first()
        .ok_or_else(|| CliError::Input(format!("no candidates in '{spec}'")))?;
    if let Some(m) = models.iter().find(|m| m.space != first.space) {
        return Err(CliError::Input(format!(
            "candidate '{}' is defined on different microstates than '{}'",
            m.name, first.name
        )));
    }
    Ok(models)
}

pub fn select(req: &SelectRequest) -> CliResult<()> {
    let models = load_candidates(&req.candidates)?;
    let space = &models[0].space;
    let counts = formats::read_counts(&req.counts, space)?;
    let f = Distribution::from_counts(&counts);
    let n = counts.total() as f64;
    if !(req.alpha_prefactor > 0.0) {
        return Err(CliError::Input("--alpha-prefactor must be positive".into()));
    }

    let opts = SolveOptions::newton();
    let closures: Option<Vec<_>> = models.iter().map(|m| m.closure).collect();
    let outcomes: Vec<_> = models
        .par_iter()
        .enumerate()
        .map(
            |(id, m)| -> maxent_core::Result<(ModelScore, ArchitectureMatrix)> {
                let arch = to_architecture(
                    &m.coefficients(Some(&f))
                        .map_err(|e| maxent_core::Error::InvalidCoefficients(e.to_string()))?,
                )?;
                let hint = m.closure.map(|c| c.forced_zeros(&counts));
                let (s, _) = selection::score(id, &arch, &f, n, hint.as_ref(), &opts)?;
                Ok((s, arch))
            },
        )
        .collect();
    let mut scores = Vec::new();
    let mut archs = Vec::new();
    let mut skipped = Vec::new();
    for (id, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((s, a)) => {
                scores.push(s);
                archs.push(a);
            }
            Err(e) => {
                log::warn!("candidate {id} ({}) skipped: {e}", models[id].name);
                skipped.push(Skipped {
                    id,
                    name: &models[id].name,
                    error: e.to_string(),
                });
            }
        }
    }
    if scores.is_empty() {
        return Err(CliError::Selection(
            "no candidate model could be scored".into(),
        ));
    }

    // Closure inclusion decides implication directly for spin models.
    let implies = |i: usize, j: usize| match &closures {
        Some(c) => c[scores[i].id].is_subfamily_of(&c[scores[j].id]),
        None => scores[i].rank <= scores[j].rank && nesting_map(&archs[i], &archs[j]).is_some(),
    };
    let mut selections = Vec::new();
    for &method in &req.methods {
        let cfg = SelectionConfig {
            method,
            alpha_prefactor: req.alpha_prefactor,
        };
        let c = selection::choose(&scores, &implies, n, &cfg)
            .ok_or_else(|| CliError::Selection("empty score table".into()))?;
        let id = scores[c.index].id;
        if c.fallback {
            log::warn!("{method}: no candidate passed the thresholds; reporting the most complex");
        }
        selections.push(Chosen {
            method,
            id,
            name: &models[id].name,
            fallback: c.fallback,
        });
    }
    let out = SelectOutput {
        n: counts.total(),
        candidates: scores
            .iter()
            .map(|s| ScoreRow {
                name: &models[s.id].name,
                score: s,
            })
            .collect(),
        skipped,
        selections,
    };
    formats::emit(req.out.as_deref(), &to_json(&out))
}

pub fn enumerate(spins: usize, out: Option<&Path>) -> CliResult<()> {
    let models = ising::enumerate_models(spins)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut put = |rec: [String; 4]| w.write_record(&rec).expect("in-memory write");
    put([
        "id".into(),
        "hyperedges".into(),
        "constraints".into(),
        "rank".into(),
    ]);
    for (id, c) in models.iter().enumerate() {
        put([
            id.to_string(),
            c.to_string(),
            c.len().to_string(),
            ising::architecture(c).rank().to_string(),
        ]);
    }
    let text = String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8");
    formats::emit(out, &text)
}

pub struct SampleRequest {
    pub spins: usize,
    pub model: String,
    pub params_seed: u64,
    pub n: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub fn sample(req: &SampleRequest) -> CliResult<()> {
    let g = Hypergraph::parse(req.spins, &req.model)?;
    let params = ising::random_params(&g, &mut ChaCha8Rng::seed_from_u64(req.params_seed))?;
    log::info!("parameters: {:?}", params.values());
    let q = ising::boltzmann(&params)?;
    let counts = multinomial_sample(&q, req.n, &mut ChaCha8Rng::seed_from_u64(req.seed));
    let space = MicrostateSpace::spins(req.spins)?;
    formats::emit(req.out.as_deref(), &formats::counts_csv(&space, &counts))
}

pub struct BenchRequest {
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
}

fn task_file(dir: &Path, t: &Task) -> PathBuf {
    dir.join(format!("{}.csv", t.key()))
}

fn read_task(path: &Path, expected: usize) -> Option<Vec<ReportRow>> {
    let text = fs::read_to_string(path).ok()?;
    let mut lines = text.lines();
    if lines.next()? != REPORT_HEADER {
        return None;
    }
    let rows: Vec<ReportRow> = lines
        .map(ReportRow::from_csv_line)
        .collect::<Result<_, _>>()
        .ok()?;
    (rows.len() == expected).then_some(rows)
}

fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| CliError::write(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::write(path, e))
}

pub fn bench(req: &BenchRequest) -> CliResult<()> {
    let mut cfg: BenchmarkConfig = match &req.config {
        Some(p) => serde_json::from_str(&formats::read_text(p)?).map_err(|e| {
            CliError::Input(format!("{}: invalid benchmark config: {e}", p.display()))
        })?,
        None => BenchmarkConfig::default(),
    };
    if req.threads.is_some() {
        cfg.threads = req.threads;
    }
    cfg.validate()?;
    let threads = cfg.effective_threads();

    let task_dir = req.out_dir.join("tasks");
    fs::create_dir_all(&task_dir).map_err(|e| CliError::write(&task_dir, e))?;
    // Thread count does not change results, so it is left out of the stored config.
    let stored = to_json(&BenchmarkConfig {
        threads: None,
        ..cfg.clone()
    });
    let cfg_path = req.out_dir.join("config.json");
    match fs::read_to_string(&cfg_path) {
        Ok(existing) if existing != stored => {
            return Err(CliError::Input(format!(
                "{} holds results of a different configuration",
                req.out_dir.display()
            )));
        }
        Ok(_) => {}
        Err(_) => write_atomic(&cfg_path, &stored)?,
    }

    let prep = bench::prepare(&cfg)?;
    let all = bench::tasks(&cfg);
    let per_task = cfg.methods.len();
    let pending: Vec<Task> = all
        .iter()
        .filter(|t| read_task(&task_file(&task_dir, t), per_task).is_none())
        .copied()
        .collect();
    log::info!(
        "{} of {} tasks to run on {threads} thread(s)",
        pending.len(),
        all.len()
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    pool.install(|| {
        pending.par_iter().try_for_each(|t| -> CliResult<()> {
            let rows = bench::run_task(&prep, *t)?;
            let mut text = String::from(REPORT_HEADER);
            text.push('\n');
            for r in &rows {
                text.push_str(&r.to_csv_line());
                text.push('\n');
            }
            write_atomic(&task_file(&task_dir, t), &text)
        })
    })?;

    let mut rows = Vec::with_capacity(all.len() * per_task);
    for t in &all {
        let path = task_file(&task_dir, t);
        rows.extend(read_task(&path, per_task).ok_or_else(|| {
            CliError::Input(format!("unreadable task result {}", path.display()))
        })?);
    }
    let report = BenchmarkReport::from_rows(rows);
    write_atomic(&req.out_dir.join("report.csv"), &report.to_csv())?;
    write_atomic(
        &req.out_dir.join("summary.csv"),
        &bench::summary_csv(&report.summary()),
    )
}
