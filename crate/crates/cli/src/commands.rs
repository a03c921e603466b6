//! Subcommand execution. Everything is computed in memory; the caller
//! decides where bytes land, which lets replay compare without writing.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use hardyflow_core::*;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::output::{float, Field, NumericCsv, Table};
use crate::svg;

pub const COMMANDS: &[&str] = &[
    "eigen", "branch", "excision", "evolve", "omega", "mu-limit", "figure",
];

/// A subcommand and its flags, as strings; this is what manifests store.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Invocation {
    pub command: String,
    pub args: BTreeMap<String, String>,
}

impl Invocation {
    pub fn new(command: &str) -> Self {
        Invocation {
            command: command.to_string(),
            args: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: Option<String>) -> Self {
        if let Some(v) = value {
            self.args.insert(key.to_string(), v);
        }
        self
    }

    fn opt<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.args
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| CliError::usage(format!("bad value {v:?} for --{key}")))
            })
            .transpose()
    }

    fn req<T: FromStr>(&self, key: &str) -> CliResult<T> {
        self.opt(key)?
            .ok_or_else(|| CliError::usage(format!("{} needs --{key}", self.command)))
    }

    fn list(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        self.args
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|_| CliError::usage(format!("bad entry {x:?} in --{key}")))
                    })
                    .collect()
            })
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Outputs of one run. `failure` is set when a solver gave up after some
/// rows were produced.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub inputs: Vec<FileDigest>,
    pub summary: Vec<String>,
    pub failure: Option<CliError>,
}

impl Artifacts {
    fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn fail(&mut self, e: impl Into<CliError>) {
        if self.failure.is_none() {
            self.failure = Some(e.into());
        }
    }

    pub fn digests(&self) -> Vec<FileDigest> {
        self.files
            .iter()
            .map(|(f, b)| FileDigest {
                file: f.clone(),
                sha256: digest(b),
            })
            .collect()
    }
}

fn numerical(e: Error) -> CliError {
    match CliError::from(e) {
        CliError::Usage(m) => CliError::Numerical(m),
        other => other,
    }
}

struct Setup {
    params: ProblemParams,
    mesh: MeshSpec,
    forms: DiscreteForms,
    eigen: EigenPair,
}

fn setup(cfg: &Config) -> CliResult<Setup> {
    let params = cfg.params()?;
    let mesh = cfg.mesh()?;
    let forms = assemble(&mesh.build(&params)?, &params)?;
    let eigen = principal_eigenpair(&forms, cfg.float("eigen.tol"))?;
    Ok(Setup {
        params,
        mesh,
        forms,
        eigen,
    })
}

pub fn execute(inv: &Invocation, cfg: &Config, threads: usize) -> CliResult<Artifacts> {
    match inv.command.as_str() {
        "eigen" => eigen(inv, cfg, threads),
        "branch" => branch(inv, cfg, threads),
        "excision" => excision(inv, cfg, threads),
        "evolve" => evolve_cmd(inv, cfg),
        "omega" => omega(inv, cfg),
        "mu-limit" => mu_limit(inv, cfg, threads),
        "figure" => figure(inv, cfg),
        other => Err(CliError::usage(format!("unknown subcommand {other}"))),
    }
}

fn eigen(inv: &Invocation, cfg: &Config, threads: usize) -> CliResult<Artifacts> {
    let s = setup(cfg)?;
    let tol = cfg.float("eigen.tol");
    let mut out = Artifacts::default();
    let mut table = Table::new(&["mu", "lambda1", "l2_over_h10", "hmu_norm", "M", "grading"]);
    match inv.list("mu-list")? {
        Some(mus) => {
            for row in mu_sweep(&s.params, &mus, s.mesh, tol, threads) {
                match row {
                    Ok(r) => table.row(&[
                        Field::F(r.mu),
                        Field::F(r.lambda1),
                        Field::F(r.l2_over_h10),
                        Field::F(r.hmu_norm),
                        Field::U(r.elements),
                        Field::F(r.grading),
                    ]),
                    Err(e) => out.fail(e),
                }
            }
        }
        None => table.row(&[
            Field::F(s.params.mu),
            Field::F(s.eigen.lambda_1),
            Field::F(s.eigen.norms.l2 / s.eigen.norms.h10_trunc),
            Field::F(s.eigen.norms.hmu),
            Field::U(s.mesh.elements),
            Field::F(s.mesh.ratio),
        ]),
    }
    out.file("eigen.csv", table.into_bytes());
    out.summary
        .push(format!("lambda1 = {}", float(s.eigen.lambda_1)));

    let mut ef = Table::new(&["r", "u"]);
    let u = s.forms.to_physical(&s.eigen.u_1);
    for (&r, &x) in s.forms.mesh().nodes().iter().zip(&u) {
        if r > 0.0 || s.forms.beta() == 0.0 {
            ef.row(&[Field::F(r), Field::F(x)]);
        }
    }
    out.file("eigenfunction.csv", ef.into_bytes());

    if let Some(k) = inv.opt::<usize>("k")? {
        match spectrum(&s.forms, k, tol) {
            Ok(sp) => {
                let mut t = Table::new(&["k", "lambda"]);
                for (i, l) in sp.eigenvalues.iter().enumerate() {
                    t.row(&[Field::U(i + 1), Field::F(*l)]);
                }
                out.file("spectrum.csv", t.into_bytes());
            }
            Err(e) => out.fail(e),
        }
    }
    Ok(out)
}

fn branch(inv: &Invocation, cfg: &Config, threads: usize) -> CliResult<Artifacts> {
    let s = setup(cfg)?;
    let lambda_max: f64 = inv.req("lambda-max")?;
    let steps: usize = inv.req("steps")?;
    let starts: Option<usize> = inv.opt("uniqueness-starts")?;
    if let Some(n) = starts {
        if n < 3 {
            return Err(CliError::usage("--uniqueness-starts needs at least 3"));
        }
    }
    let opts = BranchOptions {
        delta_min: cfg.float("branch.delta_min"),
        newton: NewtonOptions {
            tol: cfg.float("newton.tol"),
            ..NewtonOptions::default()
        },
        eigen_tol: cfg.float("eigen.tol"),
    };
    let b = trace_branch_with(&s.forms, lambda_max, steps, &opts)?;
    let mut out = Artifacts::default();
    let mut table = Table::new(&[
        "lambda",
        "l2_norm",
        "hmu_norm",
        "lp_norm",
        "mu_tilde_1",
        "newton_iters",
        "residual",
    ]);
    for p in &b.points {
        let e = &p.equilibrium;
        table.row(&[
            Field::F(e.lambda),
            Field::F(e.norms.l2),
            Field::F(e.norms.hmu),
            Field::F(e.norms.lp),
            Field::F(p.mu_tilde_1),
            Field::U(e.iterations),
            Field::F(e.residual),
        ]);
    }
    out.file("branch.csv", table.into_bytes());
    let samples: Vec<svg::BranchSample> = b
        .points
        .iter()
        .map(|p| svg::BranchSample {
            lambda: p.equilibrium.lambda,
            amplitude: p.equilibrium.norms.l2,
            stable: p.mu_tilde_1 > 0.0,
        })
        .collect();
    out.file(
        "branch.svg",
        svg::bifurcation(&samples, b.onset).into_bytes(),
    );
    out.summary.push(format!(
        "onset = {}, {} points, invariants {}",
        float(b.onset),
        b.points.len(),
        if b.invariants_hold() {
            "hold"
        } else {
            "VIOLATED"
        }
    ));
    if let Some(n) = starts {
        let lambdas: Vec<f64> = b.points.iter().map(|p| p.equilibrium.lambda).collect();
        let tol = cfg.float("newton.tol");
        let reports = hardyflow_core::parallel::ordered_map(&lambdas, threads, |&l| {
            check_uniqueness(&s.forms, l, n, tol)
        });
        let mut t = Table::new(&["lambda", "max_spread", "unique"]);
        for (l, r) in lambdas.iter().zip(reports) {
            match r {
                Ok(r) => t.row(&[Field::F(*l), Field::F(r.max_spread), Field::B(r.unique)]),
                Err(e) => out.fail(numerical(e)),
            }
        }
        out.file("uniqueness.csv", t.into_bytes());
    }
    if let Some(why) = &b.truncated {
        out.fail(CliError::Numerical(format!("branch truncated: {why}")));
    }
    Ok(out)
}

fn excision(inv: &Invocation, cfg: &Config, threads: usize) -> CliResult<Artifacts> {
    let params = cfg.params()?;
    let mesh = cfg.mesh()?;
    let radii = inv
        .list("radii")?
        .ok_or_else(|| CliError::usage("excision needs --radii"))?;
    let lambda: f64 = inv.req("lambda")?;
    let sw = excision_sweep(
        &params,
        &radii,
        lambda,
        mesh,
        cfg.float("newton.tol"),
        threads,
    )?;
    let mut out = Artifacts::default();
    let mut t = Table::new(&[
        "r",
        "lambda1_r",
        "gap",
        "eq_hmu_dist",
        "max_pointwise_violation",
    ]);
    for row in &sw.rows {
        match row {
            Ok(r) => t.row(&[
                Field::F(r.r),
                Field::F(r.lambda1_r),
                Field::F(r.gap),
                Field::F(r.eq_hmu_dist),
                Field::F(r.max_pointwise_violation),
            ]),
            Err(e) => out.fail(numerical(e.clone())),
        }
    }
    out.file("excision.csv", t.into_bytes());
    out.summary.push(format!(
        "lambda1 = {}, ||u_lambda||_mu = {}",
        float(sw.lambda1),
        float(sw.limit_hmu)
    ));
    Ok(out)
}

fn initial_data(
    inv: &Invocation,
    s: &Setup,
    forms: &DiscreteForms,
    out: &mut Artifacts,
) -> CliResult<Vec<f64>> {
    let spec: String = inv.req("phi0")?;
    let data: InitialData = spec.parse()?;
    if let InitialData::File(path) = &data {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        out.inputs.push(FileDigest {
            file: path.display().to_string(),
            sha256: digest(&bytes),
        });
    }
    Ok(data.build(forms, &s.eigen)?)
}

fn flow_forms(cfg: &Config, s: &Setup) -> CliResult<DiscreteForms> {
    let lambda = cfg.lambda_rule()?.resolve(s.eigen.lambda_1);
    Ok(s.forms.with_lambda(lambda))
}

fn evolve_cmd(inv: &Invocation, cfg: &Config) -> CliResult<Artifacts> {
    let s = setup(cfg)?;
    let forms = flow_forms(cfg, &s)?;
    let t_end: f64 = inv.req("T")?;
    let dt: f64 = inv.req("dt")?;
    let mut out = Artifacts::default();
    let phi0 = initial_data(inv, &s, &forms, &mut out)?;
    let tr = evolve(&forms, &phi0, t_end, dt, cfg.count("evolve.record_every"))?;
    let mut t = Table::new(&[
        "t",
        "J",
        "l2",
        "hmu",
        "lp",
        "energy_residual",
        "min_node",
        "max_node",
    ]);
    for r in &tr.records {
        t.row(&[
            Field::F(r.t),
            Field::F(r.j),
            Field::F(r.l2),
            Field::F(r.hmu),
            Field::F(r.lp),
            Field::F(r.energy_residual),
            Field::F(r.min_node),
            Field::F(r.max_node),
        ]);
    }
    out.file("trajectory.csv", t.into_bytes());
    let sign = sign_invariance_check(&tr);
    out.summary.push(format!(
        "lambda = {}, worst energy increase = {:e}, sign {:?} {}",
        float(forms.lambda()),
        tr.worst_energy_increase,
        sign.class,
        if sign.holds {
            "preserved"
        } else {
            "NOT preserved"
        }
    ));
    if let Some(why) = tr.truncated {
        out.fail(CliError::Numerical(format!(
            "trajectory truncated at {why}"
        )));
    }
    Ok(out)
}

fn omega(inv: &Invocation, cfg: &Config) -> CliResult<Artifacts> {
    let s = setup(cfg)?;
    let forms = flow_forms(cfg, &s)?;
    let lambda = forms.lambda();
    let mut out = Artifacts::default();
    let phi0 = initial_data(inv, &s, &forms, &mut out)?;
    let positive = if lambda > s.eigen.lambda_1 {
        let eps = galerkin_amplitude(&forms, &s.eigen, lambda).max(1e-3);
        let seed: Vec<f64> = s.eigen.u_1.iter().map(|x| eps * x).collect();
        let u =
            solve_equilibrium(&forms, lambda, &seed, cfg.float("newton.tol")).map_err(numerical)?;
        (!u.trivial).then_some(u)
    } else {
        None
    };
    let o = omega_limit(
        &forms,
        &phi0,
        &EquilibriumSet { positive },
        &cfg.omega_options(),
    )
    .map_err(numerical)?;
    let mut t = Table::new(&[
        "label",
        "distance",
        "time",
        "steps",
        "stall",
        "final_residual",
        "escaped_zero",
    ]);
    t.row(&[
        Field::S(o.label.as_str()),
        Field::F(o.distance),
        Field::F(o.time),
        Field::U(o.steps),
        Field::F(o.stall),
        Field::F(o.final_residual),
        Field::B(o.escaped_zero),
    ]);
    out.file("omega.csv", t.into_bytes());
    out.summary.push(format!(
        "omega-limit: {} (distance {:e})",
        o.label.as_str(),
        o.distance
    ));
    if o.label == OmegaLabel::Undecided {
        out.fail(CliError::Numerical(format!(
            "no equilibrium reached by t = {}",
            float(o.time)
        )));
    }
    Ok(out)
}

fn mu_limit(inv: &Invocation, cfg: &Config, threads: usize) -> CliResult<Artifacts> {
    let params = cfg.params()?;
    let mesh = cfg.mesh()?;
    let mus = inv
        .list("mu-list")?
        .ok_or_else(|| CliError::usage("mu-limit needs --mu-list"))?;
    let schedule: LambdaSchedule = inv.req::<String>("lambda")?.parse()?;
    let levels = cfg.count("mu_limit.levels");
    let tol = cfg.float("newton.tol");
    let table = mu_limit_study(&params, &mus, &schedule, mesh, levels, tol, threads)?;
    let mut cols = vec!["mu".to_string(), "lambda".into(), "hmu_star".into()];
    cols.extend((1..=levels).map(|k| format!("h10_trunc_L{k}")));
    cols.extend(["l2".to_string(), "dist_to_ref".into()]);
    let mut t = Table::with_header(cols.join(","));
    let mut out = Artifacts::default();
    for row in &table.rows {
        match row {
            Ok(r) => {
                let mut f = vec![Field::F(r.mu), Field::F(r.lambda), Field::F(r.hmu_star)];
                f.extend(r.h10_trunc.iter().map(|&x| Field::F(x)));
                f.extend([Field::F(r.l2), Field::F(r.dist_to_ref)]);
                t.row(&f);
            }
            Err(e) => out.fail(numerical(e.clone())),
        }
    }
    out.file("mu_limit.csv", t.into_bytes());
    out.summary.push(format!(
        "reference lambda = {}, ||u*||_mu* = {}, H1 growth {}",
        float(table.lambda_ref),
        float(table.reference_hmu),
        if table.h10_grows() {
            "monotone"
        } else {
            "not monotone"
        }
    ));
    Ok(out)
}

fn figure(inv: &Invocation, cfg: &Config) -> CliResult<Artifacts> {
    let input: String = inv.req("input")?;
    let name: String = inv
        .opt("output")?
        .unwrap_or_else(|| "figure.svg".to_string());
    if Path::new(&name)
        .file_name()
        .map(|f| f != name.as_str())
        .unwrap_or(true)
    {
        return Err(CliError::usage("--output must be a bare file name"));
    }
    let bytes =
        std::fs::read(&input).map_err(|e| CliError::usage(format!("cannot read {input}: {e}")))?;
    let mut out = Artifacts::default();
    out.inputs.push(FileDigest {
        file: input.clone(),
        sha256: digest(&bytes),
    });
    let text = String::from_utf8(bytes).map_err(|_| CliError::usage("input CSV is not UTF-8"))?;
    let first = text.lines().next().unwrap_or("");
    let body = if first.starts_with("lambda,l2_norm") {
        let csv = NumericCsv::parse(&text)?;
        let lambda = csv.column("lambda")?;
        let l2 = csv.column("l2_norm")?;
        let mt = csv.column("mu_tilde_1")?;
        let samples: Vec<svg::BranchSample> = (0..lambda.len())
            .map(|i| svg::BranchSample {
                lambda: lambda[i],
                amplitude: l2[i],
                stable: mt[i] > 0.0,
            })
            .collect();
        let onset = match inv.opt::<f64>("onset")? {
            Some(x) => x,
            None => estimate_onset(&samples, cfg.float("problem.gamma"))?,
        };
        svg::bifurcation(&samples, onset)
    } else if first.starts_with("mu,lambda,hmu_star") {
        let mut csv = NumericCsv::parse(&text)?;
        let last = csv
            .header
            .iter()
            .filter(|h| h.starts_with("h10_trunc_L"))
            .last()
            .cloned()
            .ok_or_else(|| CliError::usage("mu-limit CSV has no h10_trunc columns"))?;
        csv.rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let (mu, lam, hs, h1) = (
            csv.column("mu")?,
            csv.column("lambda")?,
            csv.column("hmu_star")?,
            csv.column(&last)?,
        );
        let samples: Vec<svg::LimitSample> = (0..mu.len())
            .map(|i| svg::LimitSample {
                mu: mu[i],
                lambda: lam[i],
                hmu_star: hs[i],
                h10: h1[i],
            })
            .collect();
        svg::mu_limit(&samples)
    } else {
        return Err(CliError::usage(format!(
            "{input}: expected a branch or mu-limit CSV"
        )));
    };
    out.file(&name, body.into_bytes());
    Ok(out)
}

/// Zero of `||u||^{2 gamma}`, linear in `lambda` near onset, through the
/// two points closest to onset.
fn estimate_onset(samples: &[svg::BranchSample], gamma: f64) -> CliResult<f64> {
    let mut s: Vec<&svg::BranchSample> = samples.iter().collect();
    s.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    if s.len() < 2 {
        return Err(CliError::usage("need two branch points or --onset"));
    }
    let q = |b: &svg::BranchSample| b.amplitude.powf(2.0 * gamma);
    let (a, b) = (s[0], s[1]);
    let slope = (q(b) - q(a)) / (b.lambda - a.lambda);
    if !(slope > 0.0) {
        return Err(CliError::usage(
            "branch CSV does not bend right; pass --onset",
        ));
    }
    Ok(a.lambda - q(a) / slope)
}
