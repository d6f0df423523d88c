use anyhow::{bail, Result};

use ibo_core::bounds::{
    bayes_factorization, bound_csv, encoder_from_pair, ibo_upper_bound, log_z, minimize_bound,
    tempered_posterior, BoundReport, VariationalPair,
};
use ibo_core::engine::{beta_sweep, optimize_encoder, IboKind, IboSpec, OptimizerOptions, SweepResult, SweepRow};
use ibo_core::numeric::fmt12;
use ibo_core::pathologies::{
    discrete_self_info, grid_map, quantized_mi_divergence, ContinuousMap, Density, QuantizationSpec,
};
use ibo_core::sampling::{self, rng_for};
use ibo_core::trained::{
    genbound_csv, gibbs_encoder, generalization_report, optimize_trained_ibo, theorem_battery,
    trained_csv, Feasibility, SigmaMethod,
};
use ibo_core::{io, Alphabet, GenerativeWorld, Kernel, ProbTable, Units};

use crate::config::{required_list, validation, EncoderChoice, EncoderName, Loaded, PairChoice};
use crate::output::Outputs;
use crate::svg::Plot;

/// Everything a subcommand needs besides the output sink.
pub struct Run {
    pub loaded: Loaded,
    pub seed: u64,
    pub units: Units,
}

impl Run {
    fn optimizer(&self) -> Result<OptimizerOptions> {
        let o = self.loaded.config.optimizer.clone().with_seed(self.seed);
        o.validate()?;
        Ok(o)
    }

    fn cfg(&self) -> &crate::config::ExperimentConfig {
        &self.loaded.config
    }

    /// Representation alphabet from `t_symbols`, `t_size`, or `|X^N|`.
    fn t_axis(&self, world: &GenerativeWorld) -> Result<Alphabet> {
        let c = self.cfg();
        match (&c.t_symbols, c.t_size) {
            (Some(_), Some(_)) => bail!(validation("fields `t_symbols` and `t_size`: give at most one")),
            (Some(s), None) => Ok(Alphabet::new("t", s.clone())
                .map_err(|e| validation(format!("field `t_symbols`: {e}")))?),
            (None, Some(n)) => {
                Ok(Alphabet::indexed("t", n).map_err(|e| validation(format!("field `t_size`: {e}")))?)
            }
            (None, None) => Ok(Alphabet::indexed("t", world.n_datasets())?),
        }
    }

    fn encoder(&self, world: &GenerativeWorld) -> Result<Kernel> {
        let choice = self
            .cfg()
            .encoder
            .clone()
            .unwrap_or(EncoderChoice::Named(EncoderName::Identity));
        let enc = match choice {
            EncoderChoice::File { file } => self.loaded.encoder_file(&file)?,
            EncoderChoice::Named(name) => {
                let t = self.t_axis(world)?;
                let past = world.past_axis();
                match name {
                    EncoderName::Identity => {
                        if t.size() != past.size() {
                            bail!(validation(format!(
                                "field `encoder`: identity needs |T| = |X^N| = {}, got {}",
                                past.size(),
                                t.size()
                            )));
                        }
                        Kernel::deterministic(vec![past], t, |d| d)?
                    }
                    EncoderName::Constant => {
                        let k = t.size();
                        Kernel::constant(vec![past], t, &vec![1.0 / k as f64; k])?
                    }
                    EncoderName::Random => {
                        let k = t.size();
                        let enc = sampling::encoder(&mut rng_for(self.seed), world, k);
                        enc.with_to_axis_name("t")?
                    }
                }
            }
        };
        world.check_encoder(&enc)?;
        Ok(enc)
    }

    fn spec(&self, world: &GenerativeWorld, nu: f64) -> Result<(IboSpec, Alphabet)> {
        let Some(obj) = &self.cfg().objective else {
            bail!(validation("field `objective`: required by this command"));
        };
        if obj.kind == IboKind::Trained {
            let lt = self.loaded.loss()?;
            let Some(eps) = self.cfg().epsilon else {
                bail!(validation("field `epsilon`: required for TRAINED objectives"));
            };
            if nu < 1.0 {
                bail!(validation(format!("field `objective.nu`: TRAINED needs nu = 1 + lambda >= 1, got {nu}")));
            }
            let feas = Feasibility::new(lt.clone(), eps)?;
            let spec = IboSpec::trained(nu - 1.0, feas)?;
            return Ok((spec, lt.theta_axis().clone()));
        }
        Ok((IboSpec::new(obj.kind, nu)?, self.t_axis(world)?))
    }

    fn pair(&self, world: &GenerativeWorld, enc: &Kernel) -> Result<VariationalPair> {
        Ok(match self.cfg().pair {
            PairChoice::Exact => VariationalPair::exact(&world.build_joint(enc)?)?,
            PairChoice::Random => {
                let mut rng = rng_for(self.seed.wrapping_add(1));
                VariationalPair::random(&mut rng, enc.to_axis(), &world.past_axis())?
            }
            PairChoice::Bayes => {
                let n = world.n_datasets();
                bayes_factorization(enc, &vec![1.0 / n as f64; n])?
            }
        })
    }
}

/// Quotes a symbol when it contains a delimiter.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn betas(run: &Run) -> Result<Vec<f64>> {
    let b = required_list(&run.cfg().betas, "betas")?;
    if let Some(v) = b.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        bail!(validation(format!("field `betas`: entries must be finite and >= 0, got {v}")));
    }
    Ok(b.to_vec())
}

pub fn info(run: &Run, out: &mut Outputs) -> Result<bool> {
    let world = run.loaded.world()?;
    let enc = run.encoder(&world)?;
    let r = world.build_joint(&enc)?.info_report()?;
    let u = run.units;
    let s = u.suffix();
    let csv = format!(
        "I_t_xP_{s},I_t_xF_{s},I_t_xP_given_xF_{s},I_t_xPxF_{s},H_xP_{s}\n{},{},{},{},{}\n",
        fmt12(r.i_t_xp.in_units(u)),
        fmt12(r.i_t_xf.in_units(u)),
        fmt12(r.i_t_xp_given_xf.in_units(u)),
        fmt12(r.i_t_xpxf.in_units(u)),
        fmt12(r.h_xp.in_units(u)),
    );
    out.write("info.csv", &csv)?;
    Ok(true)
}

fn plane_svg(result: &SweepResult, units: Units, kind: IboKind) -> String {
    let s = units.suffix();
    Plot {
        title: &format!("{} information plane", kind.name()),
        x_label: &format!("I(t;x_P) [{s}]"),
        y_label: &format!("I(t;x_F) [{s}]"),
        points: result
            .rows
            .iter()
            .map(|r| (units.convert(r.i_first), units.convert(r.i_second), Some(format!("nu={}", fmt12(r.nu)))))
            .collect(),
        connect: true,
    }
    .render()
}

pub fn optimize(run: &Run, out: &mut Outputs) -> Result<bool> {
    let world = run.loaded.world()?;
    let Some(nu) = run.cfg().objective.as_ref().and_then(|o| o.nu) else {
        bail!(validation("field `objective.nu`: required by optimize"));
    };
    let (spec, t) = run.spec(&world, nu)?;
    let opts = run.optimizer()?;
    let r = optimize_encoder(&world, &t, &spec, &opts)?;
    let result = SweepResult {
        rows: vec![SweepRow {
            nu,
            objective: r.value,
            i_first: r.info.i_past,
            i_second: r.info.i_future,
            converged: r.converged,
            encoder_checksum: r.encoder.checksum(),
            oracle: None,
        }],
    };
    out.write("optimize.csv", &result.to_csv(run.units))?;
    let mut trace = String::from("iteration,objective\n");
    for (i, v) in r.trace.iter().enumerate() {
        trace.push_str(&format!("{i},{}\n", fmt12(run.units.convert(*v))));
    }
    out.write("trace.csv", &trace)?;
    out.write("encoder.json", &(io::kernel_to_json(&r.encoder) + "\n"))?;
    out.write("information_plane.svg", &plane_svg(&result, run.units, spec.kind()))?;
    Ok(r.converged)
}

pub fn sweep(run: &Run, out: &mut Outputs) -> Result<bool> {
    let world = run.loaded.world()?;
    let nus = required_list(&run.cfg().sweep, "sweep")?;
    let (template, t) = run.spec(&world, nus[0])?;
    let opts = run.optimizer()?;
    let result = beta_sweep(&world, &t, &template, nus, &opts, run.cfg().oracle_resolution)?;
    out.write("sweep.csv", &result.to_csv(run.units))?;
    if run.cfg().oracle_resolution.is_some() {
        let mut csv = String::from("nu,objective,oracle_objective\n");
        for r in &result.rows {
            let o = r.oracle.map(|v| fmt12(run.units.convert(v))).unwrap_or_default();
            csv.push_str(&format!("{},{},{o}\n", fmt12(r.nu), fmt12(run.units.convert(r.objective))));
        }
        out.write("oracle.csv", &csv)?;
    }
    out.write("information_plane.svg", &plane_svg(&result, run.units, template.kind()))?;
    Ok(result.rows.iter().all(|r| r.converged))
}

pub fn bounds(run: &Run, out: &mut Outputs) -> Result<bool> {
    let world = run.loaded.world()?;
    let enc = run.encoder(&world)?;
    let fj = world.build_joint(&enc)?;
    let betas = betas(run)?;
    let fixed = match run.cfg().pair {
        PairChoice::Exact => None,
        _ => Some(run.pair(&world, &enc)?),
    };
    let reports = betas
        .iter()
        .map(|&b| match &fixed {
            None => Ok(minimize_bound(&fj, b)?.1),
            Some(p) => ibo_upper_bound(&fj, p, b),
        })
        .collect::<ibo_core::Result<Vec<BoundReport>>>()?;
    out.write("bounds.csv", &bound_csv(&reports, run.units))?;
    Ok(true)
}

pub fn tempered(run: &Run, out: &mut Outputs) -> Result<bool> {
    let world = run.loaded.world()?;
    let enc = run.encoder(&world)?;
    let pair = run.pair(&world, &enc)?;
    let betas = betas(run)?;
    let u = run.units;
    let past = world.past_axis();
    let t_axis = pair.q_t().axes()[0].clone();
    let mut reports = Vec::new();
    let mut post = format!("beta,x_P,t,posterior,log_Z_{}\n", u.suffix());
    for &b in &betas {
        let induced = encoder_from_pair(&pair, b)?;
        reports.push(ibo_upper_bound(&world.build_joint(&induced)?, &pair, b)?);
        for x in 0..past.size() {
            let p = tempered_posterior(&pair, b, x)?;
            let lz = fmt12(u.convert(log_z(&pair, b, x)));
            for (ti, v) in p.values().iter().enumerate() {
                post.push_str(&format!(
                    "{},{},{},{},{lz}\n",
                    fmt12(b),
                    csv_field(&past.symbols[x]),
                    csv_field(&t_axis.symbols[ti]),
                    fmt12(*v)
                ));
            }
        }
    }
    out.write("tempered.csv", &bound_csv(&reports, u))?;
    out.write("posterior.csv", &post)?;
    Ok(true)
}

pub fn genbound(run: &Run, out: &mut Outputs) -> Result<bool> {
    let world = run.loaded.world()?;
    let lt = run.loaded.loss()?;
    let alphas = required_list(&run.cfg().alphas, "alphas")?;
    if let Some(a) = alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
        bail!(validation(format!("field `alphas`: entries must be finite and >= 0, got {a}")));
    }
    let method = run.cfg().sigma_method.unwrap_or(SigmaMethod::HoeffdingRange);
    let prior = ProbTable::uniform(lt.theta_axis().clone());
    let rows = alphas
        .iter()
        .map(|&a| {
            let enc = gibbs_encoder(&lt, &prior, a, &world)?;
            Ok((a, generalization_report(&world, &enc, &lt, method)?))
        })
        .collect::<ibo_core::Result<Vec<_>>>()?;
    out.write("genbound.csv", &genbound_csv(&rows, run.units))?;
    if let Some(count) = run.cfg().battery_count {
        let cases = theorem_battery(run.seed, count)?;
        let u = run.units;
        let mut csv = format!("seed,alpha,I_theta_data_{},sigma,n,exact_gap,mi_bound,holds\n", u.suffix());
        for c in &cases {
            let r = &c.report;
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.seed,
                fmt12(c.alpha),
                fmt12(r.i_theta_data.in_units(u)),
                fmt12(r.sigma),
                r.n,
                fmt12(r.exact_gap),
                fmt12(r.mi_bound),
                r.holds
            ));
        }
        out.write("battery.csv", &csv)?;
        let violations = cases.iter().filter(|c| !c.report.holds).count();
        println!("battery: {} cases, {violations} violations", cases.len());
    }
    Ok(true)
}

pub fn trained(run: &Run, out: &mut Outputs) -> Result<bool> {
    let world = run.loaded.world()?;
    let lt = run.loaded.loss()?;
    let Some(eps) = run.cfg().epsilon else {
        bail!(validation("field `epsilon`: required by trained"));
    };
    let lambdas = required_list(&run.cfg().lambdas, "lambdas")?;
    let opts = run.optimizer()?;
    let rows = lambdas
        .iter()
        .map(|&l| optimize_trained_ibo(&world, &lt, eps, l, &opts))
        .collect::<ibo_core::Result<Vec<_>>>()?;
    out.write("trained.csv", &trained_csv(&rows, run.units))?;
    Ok(rows.iter().all(|r| r.converged))
}

pub fn appendix(run: &Run, out: &mut Outputs) -> Result<bool> {
    let spec = run
        .cfg()
        .quantization
        .clone()
        .unwrap_or_else(|| QuantizationSpec::powers_of_two(Density::Uniform01, ContinuousMap::Identity));
    let u = run.units;
    let r = quantized_mi_divergence(&spec)?;
    out.write("divergence.csv", &r.to_csv(u))?;

    let grid = run.cfg().self_info_grid.unwrap_or(4);
    let (p, f) = grid_map(spec.density, spec.map, grid)?;
    let si = discrete_self_info(&p, &f)?;
    let s = u.suffix();
    out.write(
        "self_info.csv",
        &format!(
            "grid,I_{s},H_X_{s},H_fX_{s}\n{grid},{},{},{}\n",
            fmt12(u.convert(si.i_value)),
            fmt12(u.convert(si.h_x)),
            fmt12(u.convert(si.h_fx))
        ),
    )?;

    let log_label = match u {
        Units::Nats => "ln k",
        Units::Bits => "log2 k",
    };
    let svg = Plot {
        title: &format!("quantized I(X;f(X)), slope {}", fmt12(r.slope)),
        x_label: log_label,
        y_label: &format!("I_k [{s}]"),
        points: r
            .rows
            .iter()
            .map(|row| (u.convert((row.k as f64).ln()), u.convert(row.i_nats), Some(format!("k={}", row.k))))
            .collect(),
        connect: true,
    }
    .render();
    out.write("log_growth.svg", &svg)?;
    Ok(true)
}
