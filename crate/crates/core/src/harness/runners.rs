//! One runner per experiment kind: computes rows and pass/fail checks.

use num_complex::Complex64;

use super::config::{ExperimentSpec, RunConfig};
use super::output::{ExperimentOutput, Row};
use crate::checks;
use crate::decay::{self, MsaState, TransferParams};
use crate::error::Result;
use crate::logpot::{self, AtomicMeasure};
use crate::model::{StripDomain, VerticalCoupling};
use crate::polystruct::{self, LogSigmaFn, ScanParams};
use crate::rng::derive_seed;
use crate::stats::{self, ols_fit, par_map};

/// Ball radius for the sublevel sets of `log Σ`.
const LOG_SIGMA_CARTAN_R: f64 = 3.0;

fn within_ci(a: f64, sa: f64, b: f64, sb: f64) -> bool {
    b + 1.96 * sa.hypot(sb) >= a
}

pub fn run_experiment(
    cfg: &RunConfig,
    spec: &ExperimentSpec,
    seed: u64,
) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::default();
    match spec {
        ExperimentSpec::Identities {
            instances,
            max_width,
            max_length,
        } => {
            let res = par_map(*instances, |k| {
                checks::identity_instance(derive_seed(seed, &[k as u64]), *max_width, *max_length)
            });
            let mut worst: f64 = 0.0;
            for r in res {
                let r = r?;
                worst = worst.max(r.worst());
                out.row(Row::new("schurDet", r.schur_det).w(r.width).l(r.length));
                out.row(
                    Row::new("schurInverse", r.schur_inverse)
                        .w(r.width)
                        .l(r.length),
                );
                out.row(Row::new("resolvent", r.resolvent).w(r.width).l(r.length));
            }
            out.check(
                "identity-residuals",
                worst <= 1e-9,
                format!("worst relative residual {worst:e}"),
            );
        }
        ExperimentSpec::Degrees {
            widths,
            lengths,
            draws,
        } => {
            let mut bad = Vec::new();
            for &w in widths {
                for &l in lengths {
                    for k in 0..*draws {
                        let rows = checks::degree_rows(
                            w,
                            l,
                            derive_seed(seed, &[w as u64, l as u64, k as u64]),
                        )?;
                        for r in rows {
                            let df = r.deg_f.map_or(-1.0, |d| d as f64);
                            let dg = r.deg_g.map_or(-1.0, |d| d as f64);
                            out.row(Row::new("degF", df).w(w).l(l).param(r.column as f64));
                            out.row(Row::new("degG", dg).w(w).l(l).param(r.column as f64));
                            out.row(
                                Row::new("coeffRe", r.coeff.re)
                                    .w(w)
                                    .l(l)
                                    .param(r.column as f64),
                            );
                            let unit =
                                (r.coeff - Complex64::new(r.coeff.re.signum(), 0.0)).norm() <= 1e-9;
                            if r.deg_f != Some(w) || !r.deg_g.is_some_and(|d| d < w) || !unit {
                                bad.push(format!("W={w} L={l} n={} draw {k}", r.column));
                            }
                        }
                    }
                }
            }
            out.check(
                "column-degrees",
                bad.is_empty(),
                format!("{} failing rows {:?}", bad.len(), bad),
            );
        }
        ExperimentSpec::Nonvanishing {
            width,
            length,
            energy,
            threshold,
            dist,
            trials,
            scanned,
            scans,
        } => {
            let dom = StripDomain::new(0, *length as i64 - 1, *width)?;
            let s = VerticalCoupling::hopping(*width, 1.0);
            let d = cfg.distributions[dist];
            let params = ScanParams {
                trials: *trials,
                scanned: *scanned,
                scans: *scans,
            };
            let col = (*length as i64 - 1) / 2;
            let r = polystruct::nonvanishing_scan(
                &dom, &s, *energy, col, *threshold, &d, params, seed,
            )?;
            out.row(
                Row::new("badFraction", r.bad_fraction)
                    .w(*width)
                    .l(*length)
                    .param(*threshold)
                    .n(r.trials),
            );
            out.row(
                Row::new("badFraction", r.bad_fraction_double)
                    .w(*width)
                    .l(*length)
                    .param(2.0 * threshold)
                    .n(r.trials),
            );
            out.row(
                Row::new("halving", r.halving.mean)
                    .w(*width)
                    .l(*length)
                    .stderr(r.halving.stderr)
                    .n(r.trials),
            );
            out.row(
                Row::new("minLogAbsF", r.min_log_abs_f)
                    .w(*width)
                    .l(*length)
                    .n(r.samples),
            );
            out.row(
                Row::new("dominanceMargin", r.dominance_margin)
                    .w(*width)
                    .l(*length)
                    .n(r.samples),
            );
            out.check("nonempty", !r.empty, "at least one good draw");
            out.check(
                "min-abs-f-positive",
                r.min_log_abs_f.is_finite() && r.all_certified,
                format!("min log|f| = {}", r.min_log_abs_f),
            );
            out.check(
                "dominance-margin",
                r.dominance_margin >= 0.4,
                format!("margin {}", r.dominance_margin),
            );
            out.check(
                "bad-fraction-halves",
                r.halving.mean.abs() <= 3.0 * r.halving.stderr,
                format!("{} ± {}", r.halving.mean, r.halving.stderr),
            );
        }
        ExperimentSpec::Logpot {
            measures,
            grid_points,
            m,
        } => {
            let unit =
                logpot::var_uniform(&AtomicMeasure::dirac(Complex64::new(0.0, 0.0)), 0.0, 1.0)?;
            out.row(Row::new("varLogUnit", unit.value));
            out.check(
                "var-log-unit",
                (unit.value - 1.0).abs() <= 1e-8,
                format!("{}", unit.value),
            );
            let mut worst: f64 = 0.0;
            let mut dyadic_ok = true;
            for k in 0..*measures {
                let s = derive_seed(seed, &[1, k as u64]);
                let mu = AtomicMeasure::random_in_annulus(1 + k % 6, 0.0, 2.0, s)?;
                let m0 = 0.5 * (k % 4) as f64;
                let m1 = m0 + 1.0 + (k % 7) as f64;
                let sc = logpot::check_scaling(&mu, m0, m1)?;
                worst = worst.max(sc.residual);
                out.row(Row::new("scalingResidual", sc.residual).param(k as f64));
                let sel = logpot::dyadic_select(&mu, 0.0, 1.0, *m)?;
                out.row(Row::new("dyadicVar", sel.var).param(sel.k as f64));
                dyadic_ok &= sel.found && sel.sum_holds;
            }
            out.check(
                "scaling-identity",
                worst <= 1e-7,
                format!("worst residual {worst:e}"),
            );
            out.check(
                "dyadic-selection",
                dyadic_ok,
                format!("{measures} measures, m = {m}"),
            );
            let grid = checks::bound_grid(*grid_points, derive_seed(seed, &[2]))?;
            let failing = grid.iter().filter(|r| !r.holds).count();
            for r in &grid {
                out.row(Row::new(r.scenario.label(), r.lhs).param(r.rhs));
            }
            out.check(
                "bounds",
                failing == 0,
                format!("{failing} of {} grid points fail", grid.len()),
            );
        }
        ExperimentSpec::VarianceScan {
            domain,
            dist,
            samples,
        } => {
            let ec = cfg.experiment_config(domain, dist, *samples, seed);
            let scan = stats::var_log_sigma(&ec)?;
            for p in &scan.points {
                out.row(
                    Row::new("varLogSigma", p.estimate.mean)
                        .w(ec.width)
                        .l(p.l)
                        .stderr(p.estimate.stderr)
                        .n(p.estimate.n)
                        .excluded(p.excluded_fraction),
                );
            }
            if let Some(f) = scan.fit {
                out.row(
                    Row::new("slope", f.slope)
                        .w(ec.width)
                        .stderr(f.slope_stderr),
                );
                out.row(
                    Row::new("intercept", f.intercept)
                        .w(ec.width)
                        .stderr(f.intercept_stderr),
                );
            }
            out.check(
                "variance-slope-positive",
                scan.slope_positive(),
                format!("{:?}", scan.fit.map(|f| f.slope_ci(1.96))),
            );
        }
        ExperimentSpec::Wegner {
            domain,
            dist,
            samples,
            t_grid,
        } => {
            let ec = cfg.experiment_config(domain, dist, *samples, seed);
            let bound = 10.0 * ec.dist.a0();
            let mut ok = true;
            for p in stats::wegner_tail(&ec, t_grid)? {
                out.row(
                    Row::new("entryTail", p.entry.mean)
                        .w(ec.width)
                        .l(p.l)
                        .param(p.t)
                        .stderr(p.entry.stderr)
                        .n(p.entry.n),
                );
                out.row(
                    Row::new("normTail", p.norm.mean)
                        .w(ec.width)
                        .l(p.l)
                        .param(p.t)
                        .stderr(p.norm.stderr)
                        .n(p.norm.n),
                );
                ok &= p.entry.mean <= bound + 3.0 * p.entry.stderr;
                ok &= p.norm.mean <= bound + 3.0 * p.norm.stderr;
            }
            out.check("wegner-shape", ok, format!("T·P <= {bound} + 3σ"));
        }
        ExperimentSpec::Moments {
            domain,
            dist,
            samples,
            orders,
        } => {
            let ec = cfg.experiment_config(domain, dist, *samples, seed);
            let pts = stats::moment_log_sigma(&ec, orders)?;
            let mut ok = true;
            let mut conv = true;
            for p in &pts {
                out.row(
                    Row::new("moment", p.estimate.mean)
                        .w(ec.width)
                        .l(p.l)
                        .param(p.s)
                        .stderr(p.estimate.stderr)
                        .n(p.estimate.n),
                );
                out.row(
                    Row::new("envelope", p.envelope)
                        .w(ec.width)
                        .l(p.l)
                        .param(p.s),
                );
                ok &= p.holds && p.estimate.mean.is_finite();
                conv &= p.converging() && !p.heavy_tail;
            }
            out.check(
                "moment-envelope",
                ok,
                "E|log Σ|^s below the calibrated envelope",
            );
            out.check(
                "moment-convergence",
                conv,
                "error bars shrink with the sample",
            );
        }
        ExperimentSpec::WeakDecay {
            domain,
            dist,
            samples,
            delta0,
        } => {
            let ec = cfg.experiment_config(domain, dist, *samples, seed);
            let d0 = match delta0 {
                Some(d) => *d,
                None => {
                    let scan = stats::var_log_sigma(&ec)?;
                    let slope = scan.fit.map_or(0.0, |f| f.slope);
                    slope.clamp(1e-6, 1.0 / ec.width as f64)
                }
            };
            out.row(Row::new("delta0", d0).w(ec.width));
            let pts = stats::weak_decay_prob(&ec, d0)?;
            for p in &pts {
                out.row(
                    Row::new("lower", p.lower.mean)
                        .w(ec.width)
                        .l(p.l)
                        .param(p.threshold)
                        .stderr(p.lower.stderr)
                        .n(p.lower.n),
                );
                out.row(
                    Row::new("upper", p.upper.mean)
                        .w(ec.width)
                        .l(p.l)
                        .param(-p.threshold)
                        .stderr(p.upper.stderr)
                        .n(p.upper.n),
                );
            }
            let mono = pts.windows(2).all(|w| {
                within_ci(
                    w[0].lower.mean,
                    w[0].lower.stderr,
                    w[1].lower.mean,
                    w[1].lower.stderr,
                )
            });
            out.check("weak-decay-nondecreasing", mono, format!("δ0 = {d0}"));
        }
        ExperimentSpec::Decay {
            width,
            length,
            energy,
            dist,
            profiles,
            tail_fraction,
            transfer_steps,
        } => {
            let s = VerticalCoupling::hopping(*width, 1.0);
            let d = cfg.distribution(dist.as_deref());
            let (ps, excluded) =
                decay::decay_profiles(*width, *length, *energy, &s, d.as_ref(), *profiles, seed)?;
            let fit = decay::rate_fit(&ps, *tail_fraction, derive_seed(seed, &[1]))?;
            let n = ps.len() as f64;
            for (k, dist) in ps[0].distances.iter().enumerate() {
                let mean = ps.iter().map(|p| p.log_g[k]).sum::<f64>() / n;
                out.row(
                    Row::new("meanLogG", mean)
                        .w(*width)
                        .l(*length)
                        .param(*dist as f64)
                        .n(ps.len()),
                );
            }
            out.row(
                Row::new("rate", fit.rate)
                    .w(*width)
                    .l(*length)
                    .stderr(fit.stderr)
                    .n(fit.profiles)
                    .excluded(excluded as f64 / *profiles as f64),
            );
            out.check(
                "decays",
                !fit.no_decay,
                format!("rate {} CI {:?}", fit.rate, fit.ci),
            );
            if d.is_none() && *width == 1 && energy.abs() > 2.0 {
                let g = decay::free_rate(*energy)?;
                let rel = (fit.rate - g).abs() / g;
                out.check("free-rate", rel <= 0.02, format!("{} vs {g}", fit.rate));
            }
            if let Some(steps) = transfer_steps {
                let params = TransferParams {
                    steps: *steps,
                    reortho: 10,
                };
                let ly = decay::lyapunov_transfer(
                    *width,
                    *energy,
                    &s,
                    d.as_ref(),
                    params,
                    derive_seed(seed, &[2]),
                )?;
                out.row(
                    Row::new("gamma", ly.gamma)
                        .w(*width)
                        .stderr(ly.gamma_stderr)
                        .n(ly.steps),
                );
                let rel = (fit.rate - ly.gamma).abs() / ly.gamma;
                out.check(
                    "dual-estimators",
                    rel <= 0.1,
                    format!("rate {} vs γ {}", fit.rate, ly.gamma),
                );
            }
        }
        ExperimentSpec::Lyapunov {
            widths,
            energy,
            dist,
            steps,
            reortho,
        } => {
            let d = cfg.distribution(dist.as_deref());
            let params = TransferParams {
                steps: *steps,
                reortho: *reortho,
            };
            let est = par_map(widths.len(), |k| {
                let w = widths[k];
                decay::lyapunov_transfer(
                    w,
                    *energy,
                    &VerticalCoupling::hopping(w, 1.0),
                    d.as_ref(),
                    params,
                    derive_seed(seed, &[w as u64]),
                )
            });
            let est: Vec<_> = est.into_iter().collect::<Result<_>>()?;
            for e in &est {
                out.row(
                    Row::new("gamma", e.gamma)
                        .w(e.width)
                        .stderr(e.gamma_stderr)
                        .n(e.steps),
                );
                for (i, (x, s)) in e.exponents.iter().zip(&e.stderrs).enumerate() {
                    out.row(
                        Row::new("exponent", *x)
                            .w(e.width)
                            .param(i as f64)
                            .stderr(*s),
                    );
                }
                out.row(Row::new("pairDefect", e.pair_defect).w(e.width));
                out.check(
                    format!("pairs-W{}", e.width),
                    e.pairs_hold(),
                    format!("defect {:e}", e.pair_defect),
                );
                if d.is_some() {
                    out.check(
                        format!("positive-W{}", e.width),
                        e.ci(1.96).0 > 0.0,
                        format!("{:?}", e.ci(1.96)),
                    );
                } else if e.width == 1 && energy.abs() > 2.0 {
                    let g = decay::free_rate(*energy)?;
                    out.check(
                        "free-rate",
                        (e.gamma - g).abs() <= 0.02 * g,
                        format!("{} vs {g}", e.gamma),
                    );
                }
            }
            if d.is_some() {
                let mono = est.windows(2).all(|w| {
                    w[1].width < w[0].width
                        || within_ci(w[1].gamma, w[1].gamma_stderr, w[0].gamma, w[0].gamma_stderr)
                });
                out.check(
                    "nonincreasing-in-W",
                    mono,
                    "γ̂ does not grow with W beyond its CI",
                );
                let pos: Vec<_> = est.iter().filter(|e| e.gamma > 0.0).collect();
                let x: Vec<f64> = pos.iter().map(|e| (e.width * e.width) as f64).collect();
                let y: Vec<f64> = pos.iter().map(|e| e.gamma.ln()).collect();
                if let Ok(f) = ols_fit(&x, &y) {
                    out.row(Row::new("logGammaVsW2Slope", f.slope).stderr(f.slope_stderr));
                }
            }
        }
        ExperimentSpec::Msa {
            l0,
            m0,
            width,
            alpha,
            target,
            eps,
            beta,
        } => {
            let init = MsaState {
                l: *l0,
                m: *m0,
                width: *width,
                beta: *beta,
                eps: *eps,
            };
            match decay::msa_recursion(init, *target, alpha) {
                Ok(run) => {
                    for (k, st) in run.states.iter().enumerate() {
                        out.row(Row::new("rate", st.m).w(*width).param(st.l).n(k));
                    }
                    out.row(Row::new("totalLoss", run.total_loss).w(*width));
                    if run.budget_holds {
                        out.check(
                            "final-rate",
                            run.final_holds,
                            format!("m_final = {}", run.final_rate()),
                        );
                    } else {
                        out.check(
                            "loss-budget",
                            false,
                            format!("loss {} > m0/2", run.total_loss),
                        );
                    }
                }
                Err(e) => out.check("certified", false, e.to_string()),
            }
            let below = MsaState { m: -1.0, ..init };
            out.check(
                "rejects-invalid-start",
                decay::msa_recursion(below, *target, alpha).is_err(),
                "negative initial rate refused",
            );
        }
        ExperimentSpec::Cartan { samples, c, h_grid } => {
            for (k, (label, p)) in checks::cartan_family(derive_seed(seed, &[1]))
                .into_iter()
                .enumerate()
            {
                let curve = polystruct::cartan_sublevel(
                    &p,
                    1.0,
                    h_grid,
                    *c,
                    *samples,
                    derive_seed(seed, &[2, k as u64]),
                )?;
                out.row(Row::new(&format!("slope:{label}"), curve.slope).param(curve.m));
                out.check(
                    format!("slope-{label}"),
                    curve.slope <= -0.5,
                    format!("slope {}", curve.slope),
                );
                if label == "identity" {
                    let ok = curve.h.iter().zip(&curve.fraction).all(|(h, fr)| {
                        let exact = (-c * h * curve.m).exp().min(1.0);
                        let se = (exact * (1.0 - exact) / curve.samples as f64).sqrt();
                        (fr - exact).abs() <= 4.0 * se + 1e-12
                    });
                    out.check("identity-exact", ok, "sublevel interval length 2e^{-cHM}");
                }
            }
            let f = LogSigmaFn {
                domain: StripDomain::new(0, 2, 2)?,
                coupling: VerticalCoupling::hopping(2, 1.0),
                energy: 0.0,
            };
            let m = polystruct::log_sigma_scale(&f, LOG_SIGMA_CARTAN_R)?;
            let curve = polystruct::sublevel_curve(
                &f,
                LOG_SIGMA_CARTAN_R,
                m,
                h_grid,
                *c,
                *samples,
                derive_seed(seed, &[3]),
            )?;
            for (h, fr) in curve.h.iter().zip(&curve.fraction) {
                out.row(
                    Row::new("logSigmaFraction", *fr)
                        .w(2)
                        .l(3)
                        .param(*h)
                        .n(curve.samples),
                );
            }
            out.row(Row::new("slope:log-sigma", curve.slope).w(2).l(3).param(m));
            out.check(
                "slope-log-sigma",
                curve.slope <= -0.5,
                format!("slope {}", curve.slope),
            );
        }
        ExperimentSpec::Sector { ks, samples } => {
            for &k in ks {
                let eps = 1.0 / (2.0 * (k as f64).sqrt());
                let sm = stats::sector_measure(k, eps, *samples, derive_seed(seed, &[k as u64]))?;
                out.row(
                    Row::new("fraction", sm.fraction.mean)
                        .param(k as f64)
                        .stderr(sm.fraction.stderr)
                        .n(sm.fraction.n),
                );
                out.row(
                    Row::new("measure", sm.measure)
                        .param(k as f64)
                        .stderr(sm.measure_stderr),
                );
                out.row(
                    Row::new("orthantMeasure", sm.orthant_measure)
                        .param(k as f64)
                        .stderr(sm.orthant_stderr),
                );
                let orthant = if sm.orthant_usage_holds() { 1.0 } else { 0.0 };
                out.row(Row::new("orthantUsageHolds", orthant).param(k as f64));
                out.row(Row::new("usageBound", sm.usage_bound).param(k as f64));
                out.row(Row::new("literalBound", sm.literal_bound).param(k as f64));
                out.check(
                    format!("usage-K{k}"),
                    sm.usage_holds(),
                    format!("{} vs {}", sm.measure, sm.usage_bound),
                );
                if let Some(x) = sm.exact {
                    let ok = (sm.fraction.mean - x).abs() <= 4.0 * sm.fraction.stderr + 1e-12;
                    out.check(
                        format!("exact-K{k}"),
                        ok,
                        format!("{} vs {x}", sm.fraction.mean),
                    );
                }
            }
        }
    }
    Ok(out)
}
