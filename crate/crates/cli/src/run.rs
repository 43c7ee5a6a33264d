//! Subcommand orchestration and CSV emission.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use adkyle_core::analytics::{default_subgrid, efficiency_sweep, impact_kernel, ImpactLaw};
use adkyle_core::equilibrium::{phi, solve_equilibrium, Equilibrium, PhiEvaluator};
use adkyle_core::info_kernel::CanonicalKernel;
use adkyle_core::objective::{centered_payoff_directions, foc_terms, zero_impact_basis, Market};
use adkyle_core::options::{bl_decompose, bl_reconstruct, demand_signature, prior_mean, prior_sd};
use adkyle_core::orderflow::{path_seed, pathwise_posterior, price_schedule, simulate_order_flow};
use adkyle_core::posterior::BinaryOracle;
use anyhow::{Context, Result};

use crate::config::RunConfig;

/// Version string recorded in every manifest.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Task {
    Solve,
    Simulate,
    Impact,
    Efficiency { signals: Option<Vec<usize>> },
    Options,
    VerifyFoc,
    KernelDump,
    PosteriorProbe,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Solve => "solve",
            Task::Simulate => "simulate",
            Task::Impact => "impact",
            Task::Efficiency { .. } => "efficiency",
            Task::Options => "options",
            Task::VerifyFoc => "verify-foc",
            Task::KernelDump => "kernel dump",
            Task::PosteriorProbe => "posterior probe",
        }
    }
}

/// Runs one subcommand and returns the files it wrote, manifest last.
pub fn run(task: &Task, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("output: cannot create {}", cfg.output_dir.display()))?;
    let mut out = Output { dir: cfg.output_dir.clone(), written: Vec::new() };
    match task {
        Task::Solve => solve(cfg, &mut out)?,
        Task::Simulate => simulate(cfg, &mut out)?,
        Task::Impact => impact(cfg, &mut out)?,
        Task::Efficiency { signals } => efficiency(cfg, signals.as_deref(), &mut out)?,
        Task::Options => options(cfg, &mut out)?,
        Task::VerifyFoc => verify_foc(cfg, &mut out)?,
        Task::KernelDump => kernel_dump(cfg, &mut out)?,
        Task::PosteriorProbe => posterior_probe(cfg, &mut out)?,
    }
    let mut manifest = Table::new(&["key", "value"]);
    manifest.push(vec!["tool_version".into(), TOOL_VERSION.into()]);
    manifest.push(vec!["subcommand".into(), task.name().into()]);
    manifest.push(vec!["config_hash".into(), cfg.hash()]);
    manifest.push(vec!["seed".into(), cfg.seed().to_string()]);
    manifest.push(vec!["n_samples".into(), cfg.mc.n_samples.to_string()]);
    manifest.push(vec!["n_paths".into(), cfg.paths.n_paths.to_string()]);
    manifest.push(vec!["signals".into(), cfg.family.signals().to_string()]);
    manifest.push(vec!["grid_n".into(), cfg.grid.len().to_string()]);
    manifest.push(vec!["wall_time_s".into(), format!("{:.3}", start.elapsed().as_secs_f64())]);
    out.write("manifest.csv", &manifest)?;
    Ok(out.written)
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn write(&mut self, name: &str, table: &Table) -> Result<()> {
        let path = self.dir.join(name);
        table.write(&path)?;
        self.written.push(path);
        Ok(())
    }
}

/// A CSV table with a header row.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("output: cannot write {}", path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal; scientific notation outside `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn kernel(cfg: &RunConfig) -> Result<CanonicalKernel> {
    Ok(CanonicalKernel::build(&cfg.family, &cfg.noise, &cfg.grid, cfg.kernel)?)
}

fn equilibrium(cfg: &RunConfig) -> Result<(CanonicalKernel, Equilibrium)> {
    let k = kernel(cfg)?;
    let eq = solve_equilibrium(&k, &cfg.family, cfg.mc, &cfg.solver)?;
    Ok((k, eq))
}

fn market(cfg: &RunConfig) -> Result<Market<'_>> {
    Ok(Market::new(&cfg.family, &cfg.noise, &cfg.grid)?)
}

/// One column per signal, `x` first.
fn surface(cfg: &RunConfig, prefix: &str, rows: &[Vec<f64>], labels: &[String]) -> Table {
    let mut header = vec!["x".to_string()];
    header.extend(labels.iter().map(|l| format!("{prefix}{l}")));
    let mut t = Table::new(&header);
    for (j, x) in cfg.grid.nodes().iter().enumerate() {
        let mut r = vec![num(*x)];
        r.extend(rows.iter().map(|row| num(row[j])));
        t.push(r);
    }
    t
}

fn solve(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let (_, eq) = equilibrium(cfg)?;
    let labels = cfg.family.labels();
    let mut header: Vec<String> =
        ["signal", "alpha_eff_star", "alpha_star", "c", "phi_residual", "n_samples", "seed"].map(String::from).to_vec();
    header.extend(labels.iter().map(|l| format!("beta_{l}")));
    let mut t = Table::new(&header);
    for (i, label) in labels.iter().enumerate() {
        let mut r = vec![
            label.clone(),
            num(eq.alpha_eff_star),
            num(eq.alpha_star),
            num(eq.c),
            num(eq.phi_residual),
            eq.n_samples.to_string(),
            eq.seed.to_string(),
        ];
        r.extend((0..labels.len()).map(|u| num(eq.beta_star[(u, i)])));
        t.push(r);
    }
    out.write("equilibrium.csv", &t)?;
    out.write("demand_surface.csv", &surface(cfg, "W_", &eq.demand, labels))?;
    let mut b = Table::new(&["lo", "hi", "certified"]);
    for (k, (lo, hi)) in eq.brackets.iter().enumerate() {
        b.push(vec![num(*lo), num(*hi), (k == 0).to_string()]);
    }
    out.write("brackets.csv", &b)
}

fn simulate(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let (_, eq) = equilibrium(cfg)?;
    let s = cfg.raw.simulate.signal;
    let count = cfg.raw.simulate.paths;
    let mut cumulative = Vec::with_capacity(count);
    let mut prices = Vec::with_capacity(count);
    let labels = cfg.family.labels();
    let mut header = vec!["path".to_string(), "seed".to_string()];
    header.extend(labels.iter().map(|l| format!("pi_{l}")));
    let mut post_table = Table::new(&header);
    for p in 0..count {
        let seed = path_seed(cfg.seed(), p as u64);
        let path = simulate_order_flow(&eq.demand[s], &cfg.noise, &cfg.grid, seed)?.with_drift_profile(s);
        let post = pathwise_posterior(&path, &eq.demand, &cfg.noise, &cfg.grid)?;
        prices.push(price_schedule(&post, &cfg.family, &cfg.grid)?);
        let mut r = vec![p.to_string(), seed.to_string()];
        r.extend(post.pi1.iter().map(|v| num(*v)));
        post_table.push(r);
        cumulative.push(path.cumulative().to_vec());
    }
    let names: Vec<String> = (0..count).map(|p| p.to_string()).collect();
    out.write("paths.csv", &surface(cfg, "path_", &cumulative, &names))?;
    out.write("pathwise_prices.csv", &surface(cfg, "price_", &prices, &names))?;
    out.write("path_posteriors.csv", &post_table)
}

fn impact(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let (_, eq) = equilibrium(cfg)?;
    let sub = default_subgrid(cfg.grid.len(), cfg.raw.impact.subgrid);
    let law = cfg.raw.impact.signal.map_or(ImpactLaw::Equilibrium, ImpactLaw::Conditional);
    let g = impact_kernel(&sub, &sub, &eq, market(cfg)?, cfg.paths, law)?;
    let xs = cfg.grid.nodes();
    let mut t = Table::new(&["x", "y", "lambda", "std_err"]);
    for e in &g.estimates {
        t.push(vec![num(xs[e.x_index]), num(xs[e.y_index]), num(e.lambda), num(e.std_err)]);
    }
    out.write("impact_kernel.csv", &t)
}

fn efficiency(cfg: &RunConfig, signals: Option<&[usize]>, out: &mut Output) -> Result<()> {
    let list = signals.unwrap_or(&cfg.raw.efficiency.signals);
    let sweep = efficiency_sweep(list, cfg.mc, &cfg.solver)?;
    let mut t = Table::new(&["I", "alpha_eff_star", "ie", "std_err"]);
    for r in &sweep.rows {
        t.push(vec![r.signals.to_string(), num(r.alpha_eff_star), num(r.ie), num(r.std_err)]);
    }
    out.write("efficiency.csv", &t)?;
    let mut d = Table::new(&["order", "I", "value", "std_err"]);
    for (k, x) in sweep.first_differences.iter().enumerate() {
        d.push(vec!["1".into(), sweep.rows[k + 1].signals.to_string(), num(x.value), num(x.std_err)]);
    }
    for (k, x) in sweep.second_differences.iter().enumerate() {
        d.push(vec!["2".into(), sweep.rows[k + 1].signals.to_string(), num(x.value), num(x.std_err)]);
    }
    out.write("efficiency_differences.csv", &d)
}

fn options(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let (_, eq) = equilibrium(cfg)?;
    let mu = prior_mean(&cfg.family, &cfg.grid)?;
    let sbar = prior_sd(&cfg.family, &cfg.grid)?;
    let k0 = cfg.raw.options.k0.unwrap_or(mu);
    let mut strip_t = Table::new(&["signal", "K", "put_density", "call_density"]);
    let mut summary = Table::new(&["signal", "k0", "bond", "underlying", "signature", "max_roundtrip_error"]);
    for (label, w) in cfg.family.labels().iter().zip(&eq.demand) {
        let strip = bl_decompose(w, k0, &cfg.grid)?;
        if let Some(requested) = strip.snapped_from {
            eprintln!("warning: options: reference strike {requested} moved to grid node {}", strip.k0);
        }
        let back = bl_reconstruct(&strip, &cfg.grid)?;
        let err = back.iter().zip(w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let sig = demand_signature(w, mu, sbar, &cfg.grid)?;
        summary.push(vec![
            label.clone(),
            num(strip.k0),
            num(strip.bond),
            num(strip.underlying),
            sig.class.as_str().into(),
            num(err),
        ]);
        let k = strip.k0_index;
        let xs = cfg.grid.nodes();
        for j in 1..cfg.grid.len() - 1 {
            let put = if j <= k { num(strip.put_density[j - 1]) } else { String::new() };
            let call = if j >= k { num(strip.call_density[j - k]) } else { String::new() };
            strip_t.push(vec![label.clone(), num(xs[j]), put, call]);
        }
    }
    out.write("strip.csv", &strip_t)?;
    out.write("strip_summary.csv", &summary)
}

fn verify_foc(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let (_, eq) = equilibrium(cfg)?;
    let s = cfg.raw.foc.signal;
    let m = market(cfg)?;
    let mut directions: Vec<(String, Vec<f64>)> = cfg
        .family
        .labels()
        .iter()
        .zip(centered_payoff_directions(&cfg.family))
        .map(|(l, v)| (format!("centered_{l}"), v))
        .collect();
    for (k, v) in zero_impact_basis(&eq.demand, &cfg.noise, &cfg.grid)?.into_iter().enumerate() {
        directions.push((format!("zero_impact_{k}"), v));
    }
    let mut t = Table::new(&[
        "direction_id",
        "payoff_term",
        "ad_term",
        "impact_term",
        "fd_total",
        "residual",
        "std_err",
        "epsilon",
        "n_paths",
    ]);
    for (id, v) in &directions {
        let r = foc_terms(&eq.demand[s], &eq.demand, s, v, id, m, cfg.paths)?;
        t.push(vec![
            r.direction_id,
            num(r.payoff_term),
            num(r.ad_term),
            num(r.impact_term),
            num(r.fd_total),
            num(r.residual),
            num(r.std_err),
            num(r.epsilon),
            r.n_paths.to_string(),
        ]);
    }
    out.write("foc_report.csv", &t)
}

fn kernel_dump(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let k = kernel(cfg)?;
    let mut t = Table::new(&["matrix", "row", "col", "value"]);
    let mats = [("K", k.gram()), ("Q", k.centering()), ("L", k.sqrt()), ("L_pinv", k.sqrt_pinv())];
    for (name, m) in mats {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                t.push(vec![name.into(), i.to_string(), j.to_string(), num(m[(i, j)])]);
            }
        }
    }
    t.push(vec!["c".into(), "0".into(), "0".into(), num(k.c())]);
    out.write("kernel_dump.csv", &t)?;
    let mut s = Table::new(&["c", "exchangeable", "exchange_deviation", "mean_misalignment", "whitening_defect"]);
    s.push(vec![
        num(k.c()),
        k.exchangeable().to_string(),
        num(k.exchange_deviation()),
        num(k.mean_misalignment()),
        num(k.whitening_defect()),
    ]);
    out.write("kernel_summary.csv", &s)
}

fn posterior_probe(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let i = cfg.family.signals();
    let eval = PhiEvaluator::new(i, cfg.mc)?;
    let oracle = if i == 2 { Some(BinaryOracle::new(200)?) } else { None };
    let mut header = vec!["alpha_eff", "m1_true", "qcq_diag", "phi", "std_err_m1", "std_err_qcq"];
    if oracle.is_some() {
        header.push("oracle_phi");
    }
    let mut t = Table::new(&header);
    for &a in &cfg.raw.posterior.alphas {
        let m = eval.moments(a)?;
        let mut r = vec![num(a), num(m.m1[0]), num(m.qcq_diag), num(phi(a, &m)?), num(m.std_err_m1), num(m.std_err_qcq)];
        if let Some(o) = &oracle {
            r.push(num(o.phi(a)));
        }
        t.push(r);
    }
    out.write("posterior_moments.csv", &t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_is_plain_or_scientific() {
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(1.5e-7), "1.5e-7");
        assert_eq!(num(-2.0), "-2");
    }
}
