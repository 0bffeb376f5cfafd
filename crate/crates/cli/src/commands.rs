use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use rcs_core::decoder::RcsConfig;
use rcs_core::harness::{
    bench, debias, derive_seed, mean_sd, mismatch_table, run_stream, support_sweep, BenchConfig, DebiasConfig,
    StreamRun, SupportConfig,
};
use rcs_core::io::{read_matrix, read_stream, write_emissions, write_matrix, write_stream, write_summary, write_trace, SummaryRow};
use rcs_core::{gen_stream, SensingMatrix, StreamConfig};

use crate::args::{resolve_m, BenchArgs, Cli, Command, DebiasArgs, GenArgs, MismatchArgs, RunArgs, SupportArgs};
use crate::CliError;

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(a) => gen(&a),
        Command::Run(a) => run(&a),
        Command::Bench(a) => bench_cmd(&a),
        Command::Support(a) => support(&a),
        Command::Debias(a) => debias_cmd(&a),
        Command::Mismatch(a) => mismatch(&a),
    }
}

fn create(path: &Path) -> Result<Box<dyn Write>, CliError> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufWriter::new(io::stdout().lock())));
    }
    let f = File::create(path).map_err(|source| CliError::File {
        path: path.display().to_string(),
        source,
    })?;
    Ok(Box::new(BufWriter::new(f)))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::File {
        path: path.display().to_string(),
        source,
    })
}

fn gen(a: &GenArgs) -> Result<(), CliError> {
    let s = &a.stream;
    let stream = gen_stream(&StreamConfig::new(s.p, s.amp_low, s.amp_high, a.seed, s.length))?;
    write_stream(create(&a.out)?, &stream.values)?;
    Ok(())
}

fn run(a: &RunArgs) -> Result<(), CliError> {
    let values = match &a.input {
        Some(path) => read_stream(open(path)?)?,
        None => {
            let s = &a.stream;
            gen_stream(&StreamConfig::new(s.p, s.amp_low, s.amp_high, a.seed, s.length))?.values
        }
    };
    let matrix = match &a.matrix {
        Some(path) => read_matrix(open(path)?)?,
        None => {
            let m = resolve_m(a.m_rule, a.m, a.n, a.stream.p)?;
            SensingMatrix::generate(a.ensemble, m, a.n, derive_seed(a.seed, 1, 0))?
        }
    };
    if let Some(path) = &a.save_matrix {
        write_matrix(create(path)?, &matrix)?;
    }

    let mut rcs = RcsConfig::new(a.n, a.tau, a.sigma);
    rcs.lambda = a.solver.lambda(a.sigma, a.n);
    rcs.solver = a.solver.options();
    rcs.xi1 = a.xi1;
    if let Some(x) = a.xi2 {
        rcs.xi2 = x;
    }
    rcs.xi3 = a.xi3;
    rcs.detector = a.detector.into();
    rcs.tail_policy = a.tail.into();
    rcs.mode = a.mode.into();
    rcs.refit = a.refit.into();
    rcs.validate()?;

    let res = run_stream(
        &values,
        &matrix,
        &StreamRun {
            rcs,
            sigma: a.sigma,
            noise_seed: derive_seed(a.seed, 2, 0),
            audit: a.audit,
            trace: a.trace.is_some(),
        },
    )?;

    if let Some(path) = &a.out {
        write_emissions(create(path)?, &res.emissions)?;
    }
    if let Some(path) = &a.trace {
        write_trace(create(path)?, matrix.m(), &res.trace)?;
    }

    let s = &res.summary;
    let unconverged = res.windows.iter().filter(|w| !w.converged).count();
    let mut metrics = vec![
        ("windows", res.windows.len() as f64),
        ("emitted", res.emissions.len() as f64),
        ("lambda", a.solver.lambda(a.sigma, a.n)),
        ("stream_nev", s.stream_nev),
        ("mean_ne", s.mean_ne().unwrap_or(f64::NAN)),
        ("ne_skipped", s.ne_skipped as f64),
        ("tpr", s.tpr),
        ("fpr", s.fpr),
        ("mean_iterations", s.mean_iterations),
        ("unconverged_windows", unconverged as f64),
    ];
    if let Some(j) = &res.jensen {
        metrics.push(("jensen_checked", j.checked as f64));
        metrics.push(("jensen_violations", j.violations as f64));
    }
    let rows: Vec<SummaryRow> = metrics
        .into_iter()
        .map(|(name, value)| SummaryRow {
            experiment_id: "run".into(),
            n: a.n,
            tau: a.tau,
            m: matrix.m(),
            sigma: a.sigma,
            seed: a.seed,
            metric_name: name.into(),
            value,
        })
        .collect();
    write_summary(create(&a.summary)?, &rows)?;
    Ok(())
}

fn bench_cmd(a: &BenchArgs) -> Result<(), CliError> {
    let mut w = create(&a.out)?;
    writeln!(
        w,
        "n,m,tau,windows,recursive_ms,direct_ms,speedup,warm_iterations,cold_iterations,\
         encode_flops_recursive,encode_flops_direct,max_gap"
    )?;
    for &n in &a.ns.0 {
        let m = resolve_m(a.m_rule, a.m, n, a.p)?;
        let r = bench(&BenchConfig {
            n,
            tau: a.tau,
            p: a.p,
            m,
            sigma: a.sigma,
            amp_low: a.amp_low,
            amp_high: a.amp_high,
            ensemble: a.ensemble,
            windows: a.windows,
            seed: derive_seed(a.seed, n as u64, 0),
            lambda: Some(a.solver.lambda(a.sigma, n)),
            solver: a.solver.options(),
        })?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.m,
            r.tau,
            r.windows,
            r.recursive_secs * 1e3,
            r.direct_secs * 1e3,
            r.speedup(),
            mean_sd(&r.warm_iterations).0,
            mean_sd(&r.cold_iterations).0,
            r.encode_flops_recursive,
            r.encode_flops_direct,
            r.max_gap
        )?;
        w.flush()?;
    }
    Ok(())
}

fn support(a: &SupportArgs) -> Result<(), CliError> {
    let rows = support_sweep(&SupportConfig {
        n: a.n,
        kappa: a.kappa,
        sigma: a.sigma,
        amp_low: a.amp_low,
        amp_high: a.amp_high,
        ms: a.ms.0.clone(),
        xi1s: a.xi1s.0.clone(),
        trials: a.trials,
        seed: a.seed,
        ensemble: a.ensemble,
        lambda: Some(a.solver.lambda(a.sigma, a.n)),
        solver: a.solver.options(),
    })?;
    let mut w = create(&a.out)?;
    writeln!(w, "m,xi1,tpr,fpr,trials")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.m, r.xi1, r.tpr, r.fpr, r.trials)?;
    }
    w.flush()?;
    Ok(())
}

fn debias_cmd(a: &DebiasArgs) -> Result<(), CliError> {
    let res = debias(&DebiasConfig {
        n: a.n,
        kappa: a.kappa,
        m: a.m,
        sigma: a.sigma,
        amp_low: a.amp_low,
        amp_high: a.amp_high,
        ks: a.ks.0.clone(),
        seeds: a.seeds,
        seed: a.seed,
        ensemble: a.ensemble,
        lambda: Some(a.solver.lambda(a.sigma, a.n)),
        xi1: a.xi1,
        solver: a.solver.options(),
    })?;
    let mut w = create(&a.out)?;
    writeln!(w, "k,mse_average,mse_voting,mse_debias")?;
    for r in &res.rows {
        writeln!(w, "{},{},{},{}", r.k, r.mse_average, r.mse_voting, r.mse_debias)?;
    }
    w.flush()?;
    Ok(())
}

fn mismatch(a: &MismatchArgs) -> Result<(), CliError> {
    if a.ns.0.contains(&0) || a.ps.0.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(CliError::Usage("need n >= 1 and p in [0, 1]".into()));
    }
    let rows = mismatch_table(&a.ns.0, &a.ps.0, &a.kappa_multiples.0, a.amp, a.mc_trials, a.seed);
    let mut w = create(&a.out)?;
    writeln!(w, "n,p,kappa,expectation,mc_mean,mc_std_err")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.n,
            r.p,
            r.kappa,
            r.expectation,
            opt(r.mc_mean),
            opt(r.mc_std_err)
        )?;
    }
    w.flush()?;
    Ok(())
}
