use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use finpop_cli::error::{CliError, CliResult};
use finpop_cli::plan::{parse_family, parse_list, PlanFields};
use finpop_cli::{run_with_threads, PopulationSpec};
use finpop_lstat::diagnostics::{theorem1_report, McSettings, DEFAULT_DELTAS, DEFAULT_EPSILONS};
use finpop_lstat::montecarlo::{
    ks_normality, mc_d1_moment, mc_delta2, mc_variance_s, replicate_evaluations, SigmaSource,
};
use finpop_lstat::oracle::{enumerate_distribution, exact_d1_moment, exact_delta2, exact_linear_moments};
use finpop_lstat::population::parse_value_lines;
use finpop_lstat::{g1_table, l_statistic, LStatistic, Population, RngSpec, WeightDescriptor};

#[derive(Parser)]
#[command(name = "finpop", version, about = "L-statistics of samples drawn without replacement from a finite population")]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PopArgs {
    /// Population file, one value per line
    #[arg(long, conflicts_with = "gen")]
    pop: Option<PathBuf>,
    /// Generated population, e.g. equispaced, normal, pareto:2.5, two-point:0,1,0.1
    #[arg(long)]
    gen: Option<String>,
    /// Population size for --gen
    #[arg(long)]
    size: Option<usize>,
}

#[derive(Args, Clone)]
struct StatArgs {
    #[command(flatten)]
    pop: PopArgs,
    /// Sample size
    #[arg(long)]
    n: usize,
    /// mean, identity, gini, trimmed:t1,t2, trimmed-j:t1,t2 or file:PATH
    #[arg(long)]
    weights: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one L-statistic on a sample file
    Compute {
        /// Sample values, one per line
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        weights: String,
        /// Expected sample size; defaults to the number of values
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        pop: PopArgs,
    },
    /// Condition values and proof-level bounds at one (N, n)
    Diagnose {
        #[command(flatten)]
        stat: StatArgs,
        #[arg(long)]
        epsilons: Option<String>,
        #[arg(long)]
        deltas: Option<String>,
        /// Replicates for moments too large to enumerate
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact law and moments by full enumeration
    Oracle {
        #[command(flatten)]
        stat: StatArgs,
    },
    /// Monte Carlo estimates and the KS distance to the normal law
    Mc {
        #[command(flatten)]
        stat: StatArgs,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write per-replicate S, U1 and R1 to this CSV
        #[arg(long)]
        dump_replicates: Option<PathBuf>,
    },
    /// Convergence study over a family of (N, n)
    Experiment {
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        pop: Option<PathBuf>,
        #[arg(long, conflicts_with = "pop")]
        gen: Option<String>,
        /// Comma-separated N:n pairs or doubling:N0,K
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        weights: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epsilons: Option<String>,
        #[arg(long)]
        deltas: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_population(args: &PopArgs) -> CliResult<Population> {
    match (&args.pop, &args.gen) {
        (Some(path), None) => Ok(PopulationSpec::File(path.clone()).generate(args.size)?),
        (None, Some(spec)) => Ok(spec.parse::<PopulationSpec>()?.generate(args.size)?),
        _ => Err(CliError::Validation("give exactly one of --pop or --gen".into())),
    }
}

fn grid(arg: &Option<String>, key: &str, default: &[f64]) -> CliResult<Vec<f64>> {
    arg.as_deref().map_or_else(|| Ok(default.to_vec()), |s| parse_list(key, s))
}

fn emit(out: Option<&Path>, csv: &str, summary: &str) -> CliResult<()> {
    match out {
        Some(path) => {
            fs::write(path, csv)?;
            print!("{summary}");
        }
        None => print!("{csv}\n{summary}"),
    }
    Ok(())
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn compute(sample: &Path, weights: &str, n: Option<usize>, pop: &PopArgs) -> CliResult<()> {
    let values = parse_value_lines(&fs::read_to_string(sample)?)?;
    if let Some(n) = n.filter(|&n| n != values.len()) {
        return Err(CliError::Validation(format!("sample holds {} values, --n is {n}", values.len())));
    }
    let w = weights.parse::<WeightDescriptor>()?.build(values.len())?;
    let l = l_statistic(&w, &values)?;
    if pop.pop.is_none() && pop.gen.is_none() {
        println!("n,L\n{},{l}", values.len());
        return Ok(());
    }
    let population = load_population(pop)?;
    let stat = LStatistic::new(&population, &w)?;
    let (_, s) = stat.s_of_values(&values)?;
    println!("n,L,expected_l,S\n{},{l},{},{s}", values.len(), stat.expected_l());
    Ok(())
}

fn diagnose(args: &StatArgs, eps: Vec<f64>, deltas: Vec<f64>, reps: usize, seed: u64) -> CliResult<()> {
    let pop = load_population(&args.pop)?;
    let w = args.weights.parse::<WeightDescriptor>()?.build(args.n)?;
    let r = theorem1_report(&pop, &w, &deltas, &eps, McSettings { reps, seed })?;

    let mut csv = String::from(
        "grid,point,er_classical,er_g1,lindeberg_g1,c_min,holder_b,var_upper_weights,var_upper_d1,delta2_upper_holder,delta2_upper_trimmed,theorem2_growth\n",
    );
    let c = &r.conditions;
    for ((er, g), lin) in c.er_classical.iter().zip(&c.er_g1).zip(&c.lindeberg_g1) {
        let _ = writeln!(csv, "epsilon,{},{},{},{},,,,,,,", er.0, er.1, g.1, lin.1);
    }
    for b in &r.bounds {
        let _ = writeln!(
            csv,
            "delta,{},,,,{},{},{},{},{},{},{}",
            b.delta,
            b.c_min,
            b.holder_b,
            b.var_upper_weights,
            cell(b.var_upper_d1),
            b.delta2_upper_holder,
            cell(b.delta2_upper_trimmed),
            b.theorem2_growth
        );
    }

    let est = |e: &finpop_lstat::diagnostics::Estimated| match e.std_error {
        None => format!("{} (exact)", e.value),
        Some(se) => format!("{} (Monte Carlo, se {se})", e.value),
    };
    let (range, nt) = pop.range_check_nair_thomson();
    let mut s = String::new();
    let _ = writeln!(s, "N = {}, n = {}, n_* = {}, tau = {}", pop.len(), args.n, c.n_star, c.tau);
    let _ = writeln!(s, "weights = {}, a = {}", args.weights, w.sup_bound());
    let _ = writeln!(s, "Var S_n = {}", est(&r.sigma_tilde_sq));
    let _ = writeln!(s, "sigma_1^2 = {}", c.sigma1_sq);
    let _ = writeln!(s, "E (D1 S_n)^2 = {}", est(&r.d1_moment));
    match &r.delta2 {
        Some(d) => {
            let _ = writeln!(s, "delta_2 = {}", est(d));
        }
        None => {
            let _ = writeln!(s, "delta_2 undefined (needs 2 <= n <= N - 2)");
        }
    }
    let _ = writeln!(s, "E X^2 = {}", r.second_moment);
    let _ = writeln!(s, "range = {range}, sigma sqrt(2N) = {nt}");
    for t in &r.holder_trend {
        let _ = writeln!(
            s,
            "holder B at delta {} for n = {:?}: {:?}{}",
            t.delta,
            t.sizes,
            t.holder_b,
            if t.non_increasing { "" } else { " (growing)" }
        );
    }
    let _ = writeln!(
        s,
        "weights bounded: {}; largest delta with non-growing B: {}",
        r.flags.weights_bounded,
        r.flags.holder_stable_delta.map_or("none".into(), |d| d.to_string())
    );
    emit(args.out.as_deref(), &csv, &s)
}

fn oracle(args: &StatArgs) -> CliResult<()> {
    let pop = load_population(&args.pop)?;
    let w = args.weights.parse::<WeightDescriptor>()?.build(args.n)?;
    let dist = enumerate_distribution(&pop, &w)?;
    let lin = exact_linear_moments(&pop, &w)?;
    let d1 = exact_d1_moment(&pop, &w)?;
    let delta2 = match exact_delta2(&pop, &w) {
        Ok(v) => Some(v),
        Err(finpop_lstat::Error::Domain(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let mut csv = String::from("s,count,probability\n");
    for a in &dist.atoms {
        let p = dist.probability(a);
        let _ = writeln!(csv, "{},{},{}/{}", a.s, a.count, p.numer(), p.denom());
    }
    let mut s = String::new();
    let _ = writeln!(s, "subsets = {}", dist.total);
    let _ = writeln!(s, "E L = {}", dist.expected_l);
    let _ = writeln!(s, "Var S_n = {}", dist.var_s);
    let _ = writeln!(s, "sigma_1^2 = {}", g1_table(&pop, &w)?.sigma1_sq);
    let _ = writeln!(s, "E U1 = {}", lin.e_u1);
    let _ = writeln!(s, "Cov(U1, R1) = {}", lin.cov_u1_r1);
    let _ = writeln!(s, "E R1^2 = {}", lin.e_r1_sq);
    let _ = writeln!(s, "E (D1 S_n)^2 = {d1}");
    let _ = writeln!(s, "delta_2 = {}", delta2.map_or("undefined".into(), |d| d.to_string()));
    emit(args.out.as_deref(), &csv, &s)
}

fn mc(args: &StatArgs, reps: usize, seed: u64, dump: Option<&Path>) -> CliResult<()> {
    let pop = load_population(&args.pop)?;
    let w = args.weights.parse::<WeightDescriptor>()?.build(args.n)?;
    let stat = LStatistic::new(&pop, &w)?;
    let base = RngSpec::new(seed, 0);
    let mut csv = String::from("quantity,value,std_error,reps,seed,note\n");
    let var = mc_variance_s(&stat, reps, base)?;
    let _ = writeln!(csv, "var_s,{},{},{reps},{seed},", var.value, var.std_error);
    let d1 = mc_d1_moment(&stat, reps, base)?;
    let _ = writeln!(csv, "d1_moment,{},{},{reps},{seed},", d1.value, d1.std_error);
    match mc_delta2(&stat, reps, base) {
        Ok(d) => {
            let _ = writeln!(csv, "delta2,{},{},{reps},{seed},", d.value, d.std_error);
        }
        Err(finpop_lstat::Error::Domain(_)) => {
            let _ = writeln!(csv, "delta2,,,{reps},{seed},undefined for this n");
        }
        Err(e) => return Err(e.into()),
    }
    let ks = ks_normality(&stat, reps, base, SigmaSource::Auto { reps })?;
    let note = match ks.ks_sigma_band {
        Some((lo, hi)) => format!("sigma {}; ks at sigma -/+ se: {lo} {hi}", ks.sigma.kind.as_str()),
        None => format!("sigma {}", ks.sigma.kind.as_str()),
    };
    let _ = writeln!(csv, "ks_distance,{},,{reps},{seed},{note}", ks.ks_distance);

    if let Some(path) = dump {
        let dec = g1_table(&pop, &w)?;
        let ev = replicate_evaluations(&stat, &dec, reps, base)?;
        let mut out = String::from("replicate,l,s,u1,r1\n");
        for (r, e) in ev.iter().enumerate() {
            let _ = writeln!(out, "{r},{},{},{},{}", e.l, e.s, e.u1, e.r1);
        }
        fs::write(path, out)?;
    }
    match &args.out {
        Some(p) => fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn experiment(
    plan: Option<&Path>,
    pop: Option<&Path>,
    gen: Option<&str>,
    family: Option<&str>,
    weights: Option<&str>,
    reps: Option<usize>,
    seed: Option<u64>,
    epsilons: Option<&str>,
    deltas: Option<&str>,
    out: Option<&Path>,
    threads: Option<usize>,
) -> CliResult<()> {
    let from_file = match plan {
        Some(p) => PlanFields::parse(&fs::read_to_string(p)?)?,
        None => PlanFields::default(),
    };
    let population = match (pop, gen) {
        (Some(p), _) => Some(PopulationSpec::File(p.to_path_buf())),
        (None, Some(g)) => Some(g.parse()?),
        (None, None) => None,
    };
    let flags = PlanFields {
        population,
        family: family.map(parse_family).transpose()?,
        weights: weights.map(str::parse).transpose()?,
        reps,
        seed,
        epsilons: epsilons.map(|e| parse_list("epsilons", e)).transpose()?,
        deltas: deltas.map(|d| parse_list("deltas", d)).transpose()?,
        out: out.map(Path::to_path_buf),
        threads,
        ..Default::default()
    };
    let plan = from_file.overridden_by(flags).into_plan()?;
    let result = run_with_threads(&plan, plan.threads)?;
    match &plan.out {
        Some(path) => {
            fs::write(path, &result.csv)?;
            let log = plan.log.clone().unwrap_or_else(|| path.with_extension("log"));
            fs::write(log, &result.log)?;
        }
        None => {
            print!("{}", result.csv);
            eprint!("{}", result.log);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Validation("--threads must be positive".into()));
        }
        // the experiment driver builds its own pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Compute { sample, weights, n, pop } => compute(&sample, &weights, n, &pop),
        Command::Diagnose { stat, epsilons, deltas, reps, seed } => diagnose(
            &stat,
            grid(&epsilons, "epsilons", &DEFAULT_EPSILONS)?,
            grid(&deltas, "deltas", &DEFAULT_DELTAS)?,
            reps,
            seed,
        ),
        Command::Oracle { stat } => oracle(&stat),
        Command::Mc { stat, reps, seed, dump_replicates } => mc(&stat, reps, seed, dump_replicates.as_deref()),
        Command::Experiment { plan, pop, gen, family, weights, reps, seed, epsilons, deltas, out } => experiment(
            plan.as_deref(),
            pop.as_deref(),
            gen.as_deref(),
            family.as_deref(),
            weights.as_deref(),
            reps,
            seed,
            epsilons.as_deref(),
            deltas.as_deref(),
            out.as_deref(),
            cli.threads,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("finpop: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
