mod spec;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand};
use ldgm_mi::cavity::{mi_predict_general, solve_sup, CavityModel, Population, SeedKind};
use ldgm_mi::experiments::{coupling_scaling_stat, interpolation_sample, InterpolationParams, InterpolationPoint};
use ldgm_mi::gibbs::{partition_function, DEFAULT_CAP};
use ldgm_mi::graph::write_graph;
use ldgm_mi::ldgm::{check_pos_general, check_pos_moments, exact_code_mi, mi_predict_codes, CODE_MI_CAP};
use ldgm_mi::planted::{conditional_entropy_mc, nishimori_gap, sample_planted, DegreeSource, PlantedExperiment};
use ldgm_mi::rng::SeedTree;
use ldgm_mi::stats::Estimate;
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use spec::{parse_spec, EnsembleSpec};

const OUT_ENV: &str = "LDGM_MI_OUT";

#[derive(Parser)]
#[command(name = "ldgm-mi", version, about = "Mutual information of random LDGM codes and factor-graph ensembles")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// JSON ensemble spec.
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; defaults to the spec's `output`, then `$LDGM_MI_OUT/<verb>.<ext>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print entropies in bits (files stay in nats).
    #[arg(long)]
    bits: bool,
}

#[derive(Subcommand)]
enum Verb {
    /// Sample one planted instance and write it as a graph file.
    EnsembleSample(Common),
    /// Replica-symmetric MI prediction from the cavity solver.
    MiPredict(Common),
    /// Exact-inner Monte Carlo estimate of H(σ|G)/n and MI/n.
    MiExact(Common),
    /// `mi-exact` over a grid of channel parameters.
    MiSweep {
        #[command(flatten)]
        common: Common,
        /// Inclusive grid `start:stop:step`.
        #[arg(long)]
        eta: String,
    },
    /// SYM deviation of the weight family.
    CheckSym(Common),
    /// POS checks over random mean-zero population pairs.
    CheckPos(Common),
    /// Nishimori gap over sampled planted graphs.
    CheckNishimori(Common),
    /// Coupling experiment between the approximate and exact generators.
    Couple {
        #[command(flatten)]
        common: Common,
        /// Grid of n values `start:stop:step`; defaults to the spec's n.
        #[arg(long)]
        n_grid: Option<String>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
    },
    /// Sample one interpolation graph and its free energy.
    Interpolate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        s: usize,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        /// Population CSV for the unary weights; defaults to a uniform-spread seed.
        #[arg(long)]
        population: Option<PathBuf>,
    },
    /// Population dynamics for the sup of the functional.
    PdSolve(Common),
}

/// Failures mapped to exit codes 1 and 2.
enum Failure {
    Validation(anyhow::Error),
    Contract(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Validation(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Contract(msg)) => {
            eprintln!("contract failure: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Resolved spec, seed and output location of one invocation.
struct Run {
    verb: &'static str,
    spec: EnsembleSpec,
    seed: u64,
    out: Option<PathBuf>,
    bits: bool,
}

impl Run {
    fn load(verb: &'static str, c: &Common) -> Result<Self> {
        let text = std::fs::read_to_string(&c.spec).with_context(|| format!("reading {}", c.spec.display()))?;
        let mut spec = parse_spec(&text)?;
        if let Some(seed) = c.seed {
            spec.seed = seed;
        }
        Ok(Run {
            verb,
            seed: spec.seed,
            out: c.out.clone().or_else(|| spec.output.as_ref().map(PathBuf::from)),
            spec,
            bits: c.bits,
        })
    }

    fn path(&self, ext: &str) -> PathBuf {
        if let Some(p) = &self.out {
            return p.clone();
        }
        let dir = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
        dir.join(format!("{}.{ext}", self.verb))
    }

    fn provenance(&self) -> serde_json::Value {
        json!({ "verb": self.verb, "seed": self.seed, "spec": self.spec })
    }

    fn create(&self, ext: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let path = self.path(ext);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok((path, BufWriter::new(file)))
    }

    /// Text output with the provenance as a leading `#` comment line.
    fn text_file(&self, ext: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let (path, mut w) = self.create(ext)?;
        writeln!(w, "# {}", self.provenance())?;
        Ok((path, w))
    }

    fn write_json(&self, result: impl Serialize) -> Result<PathBuf> {
        let (path, mut w) = self.create("json")?;
        let doc = json!({ "provenance": self.provenance(), "result": result });
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }

    fn nats(&self, x: f64) -> String {
        if self.bits {
            format!("{:.6} bits", x / std::f64::consts::LN_2)
        } else {
            format!("{x:.6} nats")
        }
    }
}

fn run(verb: Verb) -> Result<(), Failure> {
    match verb {
        Verb::EnsembleSample(c) => ensemble_sample(&Run::load("ensemble-sample", &c)?),
        Verb::MiPredict(c) => mi_predict(&Run::load("mi-predict", &c)?),
        Verb::MiExact(c) => {
            let ctx = Run::load("mi-exact", &c)?;
            let eta = ctx.spec.eta;
            mi_rows(&ctx, &[eta])
        }
        Verb::MiSweep { common, eta } => {
            let ctx = Run::load("mi-sweep", &common)?;
            ctx.spec.code_eta()?;
            let grid = parse_grid(&eta).context("--eta")?;
            mi_rows(&ctx, &grid.into_iter().map(Some).collect::<Vec<_>>())
        }
        Verb::CheckSym(c) => check_sym(&Run::load("check-sym", &c)?),
        Verb::CheckPos(c) => check_pos(&Run::load("check-pos", &c)?),
        Verb::CheckNishimori(c) => check_nishimori(&Run::load("check-nishimori", &c)?),
        Verb::Couple { common, n_grid, reps } => {
            let ctx = Run::load("couple", &common)?;
            let grid = match n_grid {
                Some(g) => parse_grid(&g)
                    .context("--n-grid")?
                    .into_iter()
                    .map(|x| x.round() as usize)
                    .collect(),
                None => vec![ctx.spec.n],
            };
            couple(&ctx, &grid, reps)
        }
        Verb::Interpolate { common, s, t, population } => {
            interpolate(&Run::load("interpolate", &common)?, s, t, population.as_deref())
        }
        Verb::PdSolve(c) => pd_solve(&Run::load("pd-solve", &c)?),
    }
}

/// Inclusive `start:stop:step` grid.
fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("`{p}` is not a number")))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        bail!("expected start:stop:step");
    };
    ensure!(step > 0.0 && stop >= start, "need step > 0 and stop >= start");
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

fn ensemble_sample(ctx: &Run) -> Result<(), Failure> {
    let family = ctx.spec.weight_family()?;
    let inst = sample_planted(&ctx.spec.ensemble()?, &family, ctx.seed).map_err(anyhow::Error::from)?;
    let (path, mut w) = ctx.text_file("graph")?;
    write_graph(&inst.graph, &mut w).map_err(anyhow::Error::from)?;
    w.flush().map_err(anyhow::Error::from)?;
    println!(
        "ensemble-sample: n={} checks={} -> {}",
        inst.graph.n(),
        inst.graph.num_checks(),
        path.display()
    );
    Ok(())
}

fn mi_predict(ctx: &Run) -> Result<(), Failure> {
    let d = ctx.spec.degree_distribution()?;
    let family = ctx.spec.weight_family()?;
    let general = mi_predict_general(&d, &family, &ctx.spec.solver, ctx.seed).map_err(anyhow::Error::from)?;
    if let Some(w) = &general.pos_warning {
        eprintln!("warning: {w}");
    }
    let result = if ctx.spec.is_code() {
        let codes = mi_predict_codes(ctx.spec.k, &d, ctx.spec.code_eta()?, &ctx.spec.solver, ctx.seed)
            .map_err(anyhow::Error::from)?;
        println!(
            "mi-predict: half {} full {} general {}",
            ctx.nats(codes.half.mean),
            ctx.nats(codes.full.mean),
            ctx.nats(general.mi_per_n.mean)
        );
        json!({ "codes": codes, "general": general })
    } else {
        println!("mi-predict: general {}", ctx.nats(general.mi_per_n.mean));
        json!({ "general": general })
    };
    let path = ctx.write_json(result)?;
    println!("  -> {}", path.display());
    Ok(())
}

/// One `mi-exact` row per channel parameter (`None` for inline families).
fn mi_rows(ctx: &Run, etas: &[Option<f64>]) -> Result<(), Failure> {
    let spec = &ctx.spec;
    let params = spec.ensemble()?;
    let mut rows = Vec::with_capacity(etas.len());
    for &eta in etas {
        let mut s = spec.clone();
        s.eta = eta;
        let family = s.weight_family()?;
        let h = if spec.is_code() && spec.pin_strength == 0.0 {
            let eta = eta.expect("code family has eta");
            let m = spec.n as f64 * params_mean_degree(spec)? / spec.k as f64;
            if spec.n as f64 + m > CODE_MI_CAP as f64 {
                return Err(Failure::Validation(anyhow::anyhow!(
                    "n + M = {} exceeds the exact MI cap {CODE_MI_CAP}",
                    spec.n as f64 + m
                )));
            }
            let tree = SeedTree::new(ctx.seed).child("mi-exact");
            let mi = (0..spec.samples as u64)
                .map(|i| {
                    let g = params.sample_structure(tree.index(i))?;
                    exact_code_mi(&g, eta)
                })
                .collect::<ldgm_mi::Result<Vec<f64>>>()
                .map_err(anyhow::Error::from)?;
            let h: Vec<f64> = mi.iter().map(|m| std::f64::consts::LN_2 - m).collect();
            Estimate::from_samples(&h)
        } else {
            let mut exp = PlantedExperiment::new(params.clone(), spec.samples);
            exp.pin_strength = spec.pin_strength;
            conditional_entropy_mc(&exp, &family, ctx.seed)
                .map_err(anyhow::Error::from)?
                .h_per_n
        };
        rows.push((eta, h));
    }
    let (path, w) = ctx.text_file("csv")?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["n", "k", "eta", "alpha", "beta", "T", "samples", "H_per_n", "stderr", "MI_per_n"])
        .map_err(anyhow::Error::from)?;
    let ln_q = (spec.weight_family()?.q() as f64).ln();
    for (eta, h) in &rows {
        csv.serialize((
            spec.n,
            spec.k,
            eta.map(|e| e.to_string()).unwrap_or_default(),
            spec.alpha,
            spec.beta,
            spec.pin_strength,
            spec.samples,
            h.mean,
            h.stderr,
            ln_q - h.mean,
        ))
        .map_err(anyhow::Error::from)?;
    }
    csv.flush().map_err(anyhow::Error::from)?;
    let (_, last) = rows.last().expect("non-empty grid");
    println!(
        "{}: {} rows, last MI/n {} -> {}",
        ctx.verb,
        rows.len(),
        ctx.nats(ln_q - last.mean),
        path.display()
    );
    Ok(())
}

fn params_mean_degree(spec: &EnsembleSpec) -> Result<f64> {
    Ok(spec.degree_distribution()?.mean())
}

fn check_sym(ctx: &Run) -> Result<(), Failure> {
    let family = ctx.spec.weight_family()?;
    let deviations = family.sym_deviations();
    let deviation = family.sym_deviation();
    let path = ctx.write_json(json!({ "deviation": deviation, "per_function": deviations }))?;
    println!("check-sym: deviation {deviation:.3e} -> {}", path.display());
    if deviation > 1e-9 {
        return Err(Failure::Contract(format!("SYM deviation {deviation:.3e}")));
    }
    Ok(())
}

/// Symmetric population with a randomly chosen shape.
fn random_population(q: usize, n: usize, theta_form: bool, rng: &mut impl Rng) -> Population {
    if theta_form {
        let shape = rng.random_range(0.2..4.0);
        let scale = rng.random_range(0.1..1.0);
        let thetas = (0..n.div_ceil(2))
            .map(|_| scale * rng.random::<f64>().powf(shape))
            .collect();
        Population::from_thetas(thetas).expect("thetas in [0,1]").symmetrized()
    } else {
        Population::seed(SeedKind::UniformSpread, q, n, false, rng)
    }
}

#[derive(Serialize)]
struct PosRow {
    pair: usize,
    min_moment: Option<f64>,
    general: Estimate,
}

fn check_pos(ctx: &Run) -> Result<(), Failure> {
    let family = ctx.spec.weight_family()?;
    let (n, mc) = (ctx.spec.solver.population, ctx.spec.solver.mc_samples);
    let tree = SeedTree::new(ctx.seed).child("check-pos");
    let mut rows = Vec::new();
    for i in 0..ctx.spec.samples {
        let mut rng = tree.index(i as u64).rng();
        let code = ctx.spec.is_code();
        let a = random_population(family.q(), n, code, &mut rng);
        let b = random_population(family.q(), n, code, &mut rng);
        let min_moment = if code {
            let m = check_pos_moments(ctx.spec.k, ctx.spec.code_eta()?, &a, &b, 10);
            Some(m.into_iter().fold(f64::INFINITY, f64::min))
        } else {
            None
        };
        let (a, b) = (a.to_measures(), b.to_measures());
        let general = check_pos_general(&family, &a, &b, mc, tree.index(i as u64).key()).map_err(anyhow::Error::from)?;
        rows.push(PosRow {
            pair: i,
            min_moment,
            general,
        });
    }
    let path = ctx.write_json(&rows)?;
    let worst = rows
        .iter()
        .map(|r| r.general.mean / r.general.stderr.max(f64::MIN_POSITIVE))
        .fold(f64::INFINITY, f64::min);
    println!("check-pos: {} pairs, worst general z {worst:.2} -> {}", rows.len(), path.display());
    for r in &rows {
        if r.min_moment.is_some_and(|m| m < -1e-9) {
            return Err(Failure::Contract(format!("pair {}: negative POS moment", r.pair)));
        }
        if r.general.mean < -3.0 * r.general.stderr {
            return Err(Failure::Contract(format!(
                "pair {}: POS estimate {:.3e} below -3 sigma",
                r.pair, r.general.mean
            )));
        }
    }
    Ok(())
}

fn check_nishimori(ctx: &Run) -> Result<(), Failure> {
    let family = ctx.spec.weight_family()?;
    let mut exp = PlantedExperiment::new(ctx.spec.ensemble()?, ctx.spec.samples);
    exp.pin_strength = ctx.spec.pin_strength;
    let report = nishimori_gap(&exp, &family, ctx.seed).map_err(anyhow::Error::from)?;
    let path = ctx.write_json(&report)?;
    println!("check-nishimori: max gap {:.3e} over {} graphs -> {}", report.max_gap, report.graphs, path.display());
    if report.max_gap > 1e-9 {
        return Err(Failure::Contract(format!("Nishimori gap {:.3e}", report.max_gap)));
    }
    Ok(())
}

fn couple(ctx: &Run, grid: &[usize], reps: usize) -> Result<(), Failure> {
    let spec = &ctx.spec;
    let degrees = DegreeSource::Distribution(spec.degree_distribution()?);
    let mut grid = grid.to_vec();
    let single = grid.len() < 2;
    if single {
        // the regression needs two points; the duplicate is dropped below
        grid.push(grid[0]);
    }
    let stat = coupling_scaling_stat(&grid, reps.max(2), spec.alpha, spec.beta, &degrees, spec.k, ctx.seed)
        .map_err(anyhow::Error::from)?;
    let points = if single { &stat.points[..1] } else { &stat.points[..] };
    let (path, w) = ctx.text_file("csv")?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["n", "alpha", "beta", "mean_CF", "stderr", "truncations"])
        .map_err(anyhow::Error::from)?;
    for p in points {
        csv.serialize((p.n, p.alpha, p.beta, p.mean_cf.mean, p.mean_cf.stderr, p.mean_truncations))
            .map_err(anyhow::Error::from)?;
    }
    csv.flush().map_err(anyhow::Error::from)?;
    if single {
        println!("couple: mean C_F {:.4} -> {}", points[0].mean_cf.mean, path.display());
    } else {
        println!(
            "couple: slope {:.3e} (95% CI [{:.3e}, {:.3e}]) -> {}",
            stat.fit.slope,
            stat.fit.slope_ci.0,
            stat.fit.slope_ci.1,
            path.display()
        );
    }
    Ok(())
}

fn interpolate(ctx: &Run, s: usize, t: f64, population: Option<&Path>) -> Result<(), Failure> {
    let spec = &ctx.spec;
    let family = spec.weight_family()?;
    let population = match population {
        Some(p) => {
            let file = File::open(p).with_context(|| format!("reading {}", p.display()))?;
            let pop = Population::read_csv(BufReader::new(file)).map_err(anyhow::Error::from)?;
            if pop.is_theta_form() {
                pop.to_measures()
            } else {
                pop
            }
        }
        None => {
            let mut rng = SeedTree::new(ctx.seed).child("interpolate-population").rng();
            Population::seed(SeedKind::UniformSpread, family.q(), spec.solver.population, false, &mut rng)
        }
    };
    let params = InterpolationParams {
        n: spec.n,
        k: spec.k,
        degrees: DegreeSource::Distribution(spec.degree_distribution()?),
        alpha: spec.alpha,
        beta: spec.beta,
    };
    let point = InterpolationPoint {
        s,
        t,
        pin_strength: spec.pin_strength,
        population,
    };
    let sample = interpolation_sample(&params, &family, &point, ctx.seed).map_err(anyhow::Error::from)?;
    let log_z = partition_function(&sample.graph, DEFAULT_CAP).ok().map(|z| z.log_z / spec.n as f64);
    let (path, mut w) = ctx.text_file("graph")?;
    writeln!(
        w,
        "# {}",
        json!({
            "s_max": sample.s_max,
            "kary_checks": sample.kary_checks,
            "unary_checks": sample.unary_checks,
            "clipped_sockets": sample.clipped_sockets,
            "pins": sample.pins.set.len(),
            "log_z_per_n": log_z,
        })
    )
    .map_err(anyhow::Error::from)?;
    write_graph(&sample.graph, &mut w).map_err(anyhow::Error::from)?;
    w.flush().map_err(anyhow::Error::from)?;
    let z = log_z.map_or_else(|| "n/a (over the enumeration cap)".to_string(), |v| ctx.nats(v));
    println!(
        "interpolate: s={s}/{} t={t} k-ary {} unary {} logZ/n {z} -> {}",
        sample.s_max,
        sample.kary_checks,
        sample.unary_checks,
        path.display()
    );
    Ok(())
}

fn pd_solve(ctx: &Run) -> Result<(), Failure> {
    let spec = &ctx.spec;
    let d = spec.degree_distribution()?;
    let model = if spec.is_code() {
        CavityModel::Code {
            k: spec.k,
            eta: spec.code_eta()?,
        }
    } else {
        CavityModel::Family(spec.weight_family()?)
    };
    let sup = solve_sup(&model, &d, &spec.solver, ctx.seed).map_err(anyhow::Error::from)?;
    let path = ctx.write_json(&sup)?;
    let pop_path = path.with_extension("population.csv");
    let mut w = BufWriter::new(File::create(&pop_path).with_context(|| format!("creating {}", pop_path.display()))?);
    writeln!(w, "# {}", ctx.provenance()).map_err(anyhow::Error::from)?;
    sup.population.write_csv(&mut w).map_err(anyhow::Error::from)?;
    w.flush().map_err(anyhow::Error::from)?;
    println!(
        "pd-solve: sup {} ± {:.1e} from {:?}{} -> {}",
        ctx.nats(sup.value.mean),
        sup.value.stderr,
        sup.argmax_seed,
        if sup.all_converged() { "" } else { " (some restarts hit the iteration cap)" },
        path.display()
    );
    Ok(())
}
