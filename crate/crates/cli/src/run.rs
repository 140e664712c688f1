//! Dispatch of a validated configuration and the run directory layout:
//! `config.toml` (effective configuration), `results.csv` and
//! `summary.json`.

use std::fs;
use std::io::Write;
use std::path::Path;

use coordinet::fme::verify_random_projections;
use coordinet::osrb::{
    self, bins_from_rate, make_binning, osrb_uniformity, run_protocol, sw_success_prob, BinningCode, ProtocolCaps,
    ProtocolConfig, SequenceSpace, TildeRates,
};
use coordinet::region::{
    frontier, inner_check, inner_membership, outer_membership, write_frontier_csv, Axis, FrontierConfig, GridAxis,
    InnerConfig, InnerCoupling, OuterConfig, RateTuple, Verdict,
};
use coordinet::wyner::{wyner_common_information, WynerConfig};
use coordinet::{info, seeding, JointPmf};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{self, Caps, Params, RunConfig, Tilde};
use crate::error::{io_err, CliError, Context, Result};

/// What a finished run reports back.
#[derive(Debug)]
pub struct Outcome {
    pub summary: Map<String, Value>,
    /// Some cells of a multi-cell run failed; the rest were written.
    pub partial: bool,
}

/// Run results before they are written out.
struct Results {
    summary: Map<String, Value>,
    csv: Vec<u8>,
    partial: bool,
}

/// A JSON number, or a string for non-finite values.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        Value::Null
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else if x > 0.0 {
        "inf".into()
    } else if x < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

fn rates_json(r: &RateTuple) -> Value {
    json!({ "rf1": num(r.rf1), "rb1": num(r.rb1), "rf2": num(r.rf2), "rb2": num(r.rb2) })
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("summaries are objects"),
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let out = |e: csv::Error| CliError::Output(e.to_string());
    w.write_record(header).map_err(out)?;
    for r in rows {
        w.write_record(&r).map_err(out)?;
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))
}

fn rate_tuple(rf1: f64, rb1: f64, rf2: f64, rb2: f64) -> Result<RateTuple> {
    RateTuple::new(rf1, rb1, rf2, rb2).context("rates")
}

fn median(v: &[f64]) -> Value {
    if v.is_empty() {
        Value::Null
    } else {
        num(osrb::median(v))
    }
}

fn info_cmd(q: &JointPmf) -> Result<Results> {
    let names = q.names();
    let mut rows = Vec::new();
    let mut entropies = Map::new();
    for &n in &names {
        let h = info::entropy(q, &[n]).context("entropy")?;
        entropies.insert(n.to_string(), num(h));
        rows.push(vec![format!("H({n})"), fmt_f64(h)]);
    }
    let joint = info::entropy(q, &names).context("entropy")?;
    rows.push(vec![format!("H({})", names.join(",")), fmt_f64(joint)]);
    let mut summary = object(json!({
        "variables": names,
        "entropies": entropies,
        "joint_entropy": num(joint),
    }));
    if let [a, b] = names[..] {
        let i = info::mi(q, &[a], &[b], &[]).context("mutual information")?;
        let hab = info::conditional_entropy(q, &[a], &[b]).context("entropy")?;
        let hba = info::conditional_entropy(q, &[b], &[a]).context("entropy")?;
        rows.push(vec![format!("I({a};{b})"), fmt_f64(i)]);
        rows.push(vec![format!("H({a}|{b})"), fmt_f64(hab)]);
        rows.push(vec![format!("H({b}|{a})"), fmt_f64(hba)]);
        summary.insert("mutual_information".into(), num(i));
        summary.insert(
            "conditional_entropies".into(),
            json!({ format!("{a}|{b}"): num(hab), format!("{b}|{a}"): num(hba) }),
        );
    }
    Ok(Results {
        summary,
        csv: csv_bytes(&["quantity", "value"], rows)?,
        partial: false,
    })
}

fn wyner_config(p: &config::WynerParams, seed: u64) -> WynerConfig {
    WynerConfig {
        w_cap: p.w_cap,
        restarts: p.restarts,
        max_iters: p.max_iters,
        markov_tol: p.markov_tol,
        seed,
        ..Default::default()
    }
}

fn wyner_cmd(q: &JointPmf, p: &config::WynerParams, seed: u64) -> Result<Results> {
    let sol = wyner_common_information(q, &wyner_config(p, seed)).context("wyner")?;
    let names = q.names();
    let i = match names[..] {
        [a, b] => info::mi(q, &[a], &[b], &[]).context("mutual information")?,
        _ => f64::NAN,
    };
    let summary = object(json!({
        "wyner_ci": num(sol.value),
        "mutual_information": num(i),
        "w_cardinality": sol.w_cardinality,
        "markov_slack": num(sol.markov_slack),
        "restarts": sol.trace.len(),
    }));
    let rows = sol.trace.iter().map(|(r, v)| vec![r.to_string(), fmt_f64(*v)]);
    Ok(Results {
        summary,
        csv: csv_bytes(&["restart", "value"], rows)?,
        partial: false,
    })
}

fn membership_csv(r: &RateTuple, verdict: Verdict, slack: f64, restarts: usize) -> Result<Vec<u8>> {
    csv_bytes(
        &["rf1", "rb1", "rf2", "rb2", "verdict", "best_slack", "restarts_used"],
        [vec![
            fmt_f64(r.rf1),
            fmt_f64(r.rb1),
            fmt_f64(r.rf2),
            fmt_f64(r.rb2),
            verdict.to_string(),
            fmt_f64(slack),
            restarts.to_string(),
        ]],
    )
}

fn inner_config(caps: &[usize], restarts: usize, max_iters: Option<usize>, seed: u64) -> InnerConfig {
    let d = InnerConfig::default();
    InnerConfig {
        caps: (caps[0], caps[1], caps[2]),
        restarts,
        max_iters: max_iters.unwrap_or(d.max_iters),
        seed,
        ..d
    }
}

fn inner_cmd(q: &JointPmf, p: &config::InnerParams, seed: u64) -> Result<Results> {
    let r = rate_tuple(p.rf1, p.rb1, p.rf2, p.rb2)?;
    let d = inner_membership(q, &r, &inner_config(&p.caps, p.restarts, Some(p.max_iters), seed))
        .context("inner membership")?;
    let mut summary = object(json!({
        "rates": rates_json(&r),
        "verdict": d.verdict.to_string(),
        "best_slack": num(d.best_slack),
        "restarts_used": d.restarts_used,
    }));
    if let Some(w) = &d.witness {
        let s = inner_check(w, &r);
        summary.insert(
            "witness".into(),
            json!({
                "caps": [w.caps().0, w.caps().1, w.caps().2],
                "slacks": { "total": num(s[0]), "node1": num(s[1]), "node2": num(s[2]), "forward": num(s[3]) },
                "target_tv": num(w.target_tv(q).context("witness")?),
            }),
        );
    }
    let csv = membership_csv(&r, d.verdict, d.best_slack, d.restarts_used)?;
    Ok(Results {
        summary,
        csv,
        partial: false,
    })
}

fn outer_cmd(q: &JointPmf, p: &config::OuterParams, seed: u64) -> Result<Results> {
    let r = rate_tuple(p.rf1, p.rb1, p.rf2, p.rb2)?;
    let cfg = OuterConfig {
        aux_cap: p.aux_cap,
        restarts_per_alpha: p.restarts_per_alpha,
        refine_starts: p.refine_starts,
        seed,
        ..Default::default()
    };
    let d = outer_membership(q, &r, &cfg).context("outer membership")?;
    let summary = object(json!({
        "rates": rates_json(&r),
        "verdict": d.verdict.to_string(),
        "best_slack": num(d.best_slack),
        "restarts_used": d.restarts_used,
    }));
    let csv = membership_csv(&r, d.verdict, d.best_slack, d.restarts_used)?;
    Ok(Results {
        summary,
        csv,
        partial: false,
    })
}

fn axis(name: &str) -> Axis {
    match name {
        "rf1" => Axis::Rf1,
        "rb1" => Axis::Rb1,
        "rf2" => Axis::Rf2,
        _ => Axis::Rb2,
    }
}

fn frontier_cmd(q: &JointPmf, p: &config::FrontierParams, seed: u64) -> Result<Results> {
    let fixed: Vec<(Axis, f64)> = p.fixed.iter().map(|(k, v)| (axis(k), *v)).collect();
    let axes: Vec<GridAxis> = p
        .grid
        .iter()
        .map(|g| GridAxis {
            axis: axis(&g.axis),
            lo: g.lo,
            hi: g.hi,
            points: g.points,
        })
        .collect();
    let cfg = FrontierConfig {
        fixed: [fixed[0], fixed[1]],
        axes: [axes[0], axes[1]],
        inner: inner_config(&p.inner_caps, p.inner_restarts, None, seed),
        outer: OuterConfig {
            refine_starts: p.outer_refine_starts,
            seed,
            ..Default::default()
        },
    };
    let f = frontier(q, &cfg).context("frontier")?;
    let count = |pred: &dyn Fn(&coordinet::region::FrontierPoint) -> bool| f.points.iter().filter(|x| pred(x)).count();
    let summary = object(json!({
        "points": f.points.len(),
        "inner_inside": count(&|x| x.inner_verdict == Verdict::Inside),
        "outer_outside": count(&|x| x.outer_verdict == Verdict::OutsideHeuristic),
        "soundness_violations": count(&|x| x.inner_verdict == Verdict::Inside && x.outer_verdict == Verdict::OutsideHeuristic),
        "witnesses": f.witnesses.len(),
    }));
    let mut csv = Vec::new();
    write_frontier_csv(&f.points, &mut csv).context("frontier csv")?;
    Ok(Results {
        summary,
        csv,
        partial: false,
    })
}

fn fme_cmd(p: &config::FmeParams, seed: u64) -> Result<Results> {
    let checks = verify_random_projections(p.couplings, seed, p.samples).context("fme-verify")?;
    let agree_count = checks.iter().filter(|c| c.agree()).count();
    let disagreements: Vec<Value> = checks
        .iter()
        .flat_map(|c| {
            c.orders.iter().filter(|o| !o.report.agree).map(
                move |o| json!({ "coupling": c.index, "order": o.order, "counterexample": o.report.counterexample }),
            )
        })
        .collect();
    let summary = object(json!({
        "couplings": checks.len(),
        "orders_per_coupling": coordinet::fme::ELIMINATION_ORDERS.len(),
        "samples": p.samples,
        "agree_count": agree_count,
        "all_agree": agree_count == checks.len(),
        "disagreements": disagreements,
    }));
    let rows = checks.iter().flat_map(|c| {
        c.orders.iter().map(move |o| {
            vec![
                c.index.to_string(),
                o.order.join(" "),
                o.projected_rows.to_string(),
                c.direct_rows.to_string(),
                o.report.agree.to_string(),
                o.report.samples_tested.to_string(),
            ]
        })
    });
    let header = [
        "coupling",
        "order",
        "projected_rows",
        "direct_rows",
        "agree",
        "samples_tested",
    ];
    Ok(Results {
        summary,
        csv: csv_bytes(&header, rows)?,
        partial: false,
    })
}

fn osrb_cell(q: &JointPmf, p: &config::OsrbParams, n: usize, seed: u64, master: u64) -> coordinet::Result<f64> {
    let comps: Vec<Vec<&str>> = p
        .components
        .iter()
        .map(|c| c.iter().map(String::as_str).collect())
        .collect();
    let comps: Vec<&[&str]> = comps.iter().map(Vec::as_slice).collect();
    let side: Vec<&str> = p.side.iter().map(String::as_str).collect();
    let binnings: Vec<BinningCode> = comps
        .iter()
        .zip(&p.rates)
        .enumerate()
        .map(|(t, (c, &rate))| {
            let symbols = c
                .iter()
                .map(|v| q.alphabet(v).map(|a| a.size()))
                .product::<coordinet::Result<usize>>()?;
            let (bins, _) = bins_from_rate(n, rate)?;
            make_binning(
                SequenceSpace { symbols, n },
                bins,
                seeding::derive_seed(&[master, n as u64, seed, t as u64]),
            )
        })
        .collect::<coordinet::Result<_>>()?;
    if p.mode == "slepian-wolf" {
        sw_success_prob(q, comps[0], &side, &binnings, n)
    } else {
        osrb_uniformity(q, &comps, &side, &binnings, n)
    }
}

fn osrb_cmd(q: &JointPmf, p: &config::OsrbParams, master: u64) -> Result<Results> {
    let jobs: Vec<(usize, u64)> =
        p.n.iter()
            .flat_map(|&n| (0..p.seeds as u64).map(move |s| (n, s)))
            .collect();
    let cells: Vec<(usize, u64, coordinet::Result<f64>)> = jobs
        .into_par_iter()
        .map(|(n, s)| (n, s, osrb_cell(q, p, n, s, master)))
        .collect();
    let per_n: Vec<Value> =
        p.n.iter()
            .map(|&n| {
                let v: Vec<f64> = cells
                    .iter()
                    .filter(|c| c.0 == n)
                    .filter_map(|c| c.2.as_ref().ok().copied())
                    .collect();
                json!({ "n": n, "median": median(&v), "cells_ok": v.len() })
            })
            .collect();
    let failed: Vec<Value> = cells
        .iter()
        .filter_map(|(n, s, r)| {
            r.as_ref()
                .err()
                .map(|e| json!({ "n": n, "seed": s, "error": e.to_string() }))
        })
        .collect();
    let value_name = if p.mode == "slepian-wolf" {
        "success_probability"
    } else {
        "tv"
    };
    let summary = object(json!({
        "mode": p.mode,
        "value": value_name,
        "per_n": per_n,
        "failed_cells": failed,
    }));
    let rows = cells
        .iter()
        .filter_map(|(n, s, r)| r.as_ref().ok().map(|v| vec![n.to_string(), s.to_string(), fmt_f64(*v)]));
    let csv = csv_bytes(&["n", "seed", value_name], rows)?;
    Ok(Results {
        summary,
        csv,
        partial: !failed.is_empty(),
    })
}

fn coupling_for(cfg: &RunConfig, spec: &str, rates: &RateTuple) -> Result<InnerCoupling> {
    let q = &cfg.target;
    match spec {
        "wyner" => {
            let wcfg = WynerConfig {
                seed: cfg.master_seed,
                ..Default::default()
            };
            let sol = wyner_common_information(q, &wcfg).context("wyner coupling")?;
            InnerCoupling::from_wyner(q, &sol).context("wyner coupling")
        }
        "search" => {
            let d = inner_membership(
                q,
                rates,
                &InnerConfig {
                    seed: cfg.master_seed,
                    ..Default::default()
                },
            )
            .context("coupling search")?;
            d.witness.ok_or_else(|| {
                CliError::Output(format!(
                    "no inner-bound coupling found for the rates (best slack {})",
                    d.best_slack
                ))
            })
        }
        path => {
            let path = cfg.resolve(path);
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let p = coordinet::pmf::read_pmf(&text).context(path.display().to_string())?;
            InnerCoupling::from_joint(&p).context(path.display().to_string())
        }
    }
}

fn protocol_template(
    cfg: &RunConfig,
    coupling: &str,
    r: &config::Rates,
    t: &Tilde,
    c: &Caps,
    n: usize,
) -> Result<ProtocolConfig> {
    let rates = rate_tuple(r.rf1, r.rb1, r.rf2, r.rb2)?;
    Ok(ProtocolConfig {
        q: cfg.target.clone(),
        coupling: coupling_for(cfg, coupling, &rates)?,
        n,
        rates,
        tilde: TildeRates {
            rt0: t.rt0,
            rt1: t.rt1,
            rt2: t.rt2,
        },
        seed: cfg.master_seed,
        caps: ProtocolCaps {
            sequences: c.sequences,
            outputs: c.outputs,
            joint: c.joint,
        },
    })
}

fn protocol_cmd(cfg: &RunConfig, p: &config::ProtocolParams) -> Result<Results> {
    let pc = protocol_template(cfg, &p.coupling, &p.rates, &p.tilde, &p.caps, p.n)?;
    let law = run_protocol(&pc).context("protocol")?;
    let names = osrb::BINNING_NAMES;
    let bins: Map<String, Value> = names
        .iter()
        .zip(law.bins)
        .map(|(k, b)| (k.to_string(), json!(b)))
        .collect();
    let eff: Map<String, Value> = names
        .iter()
        .zip(law.effective_rates)
        .map(|(k, e)| (k.to_string(), num(e)))
        .collect();
    let seeds: Map<String, Value> = names
        .iter()
        .zip(law.binning_seeds)
        .map(|(k, s)| (k.to_string(), json!(s)))
        .collect();
    let s = inner_check(&pc.coupling, &pc.rates);
    let summary = object(json!({
        "n": law.n,
        "rates": rates_json(&pc.rates),
        "tilde": { "rt0": num(p.tilde.rt0), "rt1": num(p.tilde.rt1), "rt2": num(p.tilde.rt2) },
        "coupling_caps": [pc.coupling.caps().0, pc.coupling.caps().1, pc.coupling.caps().2],
        "coupling_inner_slacks": { "total": num(s[0]), "node1": num(s[1]), "node2": num(s[2]), "forward": num(s[3]) },
        "tv_marginal": num(law.tv_marginal),
        "tv_with_uniform_g": num(law.tv_with_uniform_g),
        "best_g": law.best_g,
        "tv_best_g": num(law.tv_best_g),
        "sw1_success": num(law.sw1_success),
        "sw2_success": num(law.sw2_success),
        "nocandidate_mass": num(law.nocandidate_mass),
        "mass": num(law.mass),
        "marginal_discrepancy": num(law.marginal_discrepancy),
        "bins": bins,
        "effective_rates": eff,
        "binning_seeds": seeds,
    }));
    let (ny1, ny2) = law.outputs;
    let block = ny1 * ny2;
    let (g1, g2) = (law.bins[1], law.bins[4]);
    let rows = law
        .joint_with_g
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0)
        .map(|(i, &x)| {
            let (g, y) = (i / block, i % block);
            vec![
                (g / (g1 * g2)).to_string(),
                (g / g2 % g1).to_string(),
                (g % g2).to_string(),
                (y / ny2).to_string(),
                (y % ny2).to_string(),
                fmt_f64(x),
            ]
        });
    let csv = csv_bytes(&["g0", "g1", "g2", "y1", "y2", "probability"], rows)?;
    Ok(Results {
        summary,
        csv,
        partial: false,
    })
}

fn sweep_cmd(cfg: &RunConfig, p: &config::SweepParams) -> Result<Results> {
    let template = protocol_template(cfg, &p.coupling, &p.rates, &p.tilde, &p.caps, 1)?;
    let seeds: Vec<u64> = (0..p.seeds as u64).collect();
    let cells = osrb::sweep(&template, &p.n, &seeds, cfg.master_seed);
    let per_n: Vec<Value> =
        p.n.iter()
            .map(|&n| {
                let recs: Vec<&osrb::SweepRecord> = cells
                    .iter()
                    .filter(|c| c.n == n)
                    .filter_map(|c| c.outcome.as_ref().ok())
                    .collect();
                let med = |f: fn(&osrb::SweepRecord) -> f64| median(&recs.iter().map(|r| f(r)).collect::<Vec<_>>());
                json!({
                    "n": n,
                    "cells_ok": recs.len(),
                    "median_tv_marginal": med(|r| r.tv_marginal),
                    "median_tv_with_uniform_g": med(|r| r.tv_with_uniform_g),
                    "median_tv_best_g": med(|r| r.tv_best_g),
                })
            })
            .collect();
    let failed: Vec<Value> = cells
        .iter()
        .filter_map(|c| {
            c.outcome
                .as_ref()
                .err()
                .map(|e| json!({ "n": c.n, "seed": c.seed, "error": e.to_string() }))
        })
        .collect();
    let summary = object(json!({
        "rates": rates_json(&template.rates),
        "cells": cells.len(),
        "per_n": per_n,
        "failed_cells": failed,
    }));
    let mut csv = Vec::new();
    osrb::write_sweep_csv(&template, &cells, &mut csv).map_err(|e| CliError::Output(e.to_string()))?;
    Ok(Results {
        summary,
        csv,
        partial: !failed.is_empty(),
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(io_err(path))
}

/// Run the configured command and write the run directory.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let q = &cfg.target;
    let seed = cfg.master_seed;
    let results = match &cfg.parameters {
        Params::Info(_) => info_cmd(q)?,
        Params::Wyner(p) => wyner_cmd(q, p, seed)?,
        Params::RegionInner(p) => inner_cmd(q, p, seed)?,
        Params::RegionOuter(p) => outer_cmd(q, p, seed)?,
        Params::Frontier(p) => frontier_cmd(q, p, seed)?,
        Params::FmeVerify(p) => fme_cmd(p, seed)?,
        Params::Osrb(p) => osrb_cmd(q, p, seed)?,
        Params::Protocol(p) => protocol_cmd(cfg, p)?,
        Params::Sweep(p) => sweep_cmd(cfg, p)?,
    };
    let mut summary = object(json!({
        "command": cfg.command.name(),
        "source": cfg.source,
        "master_seed": seed,
        "status": if results.partial { "partial" } else { "ok" },
    }));
    summary.extend(results.summary);

    fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    write(&cfg.out_dir.join("config.toml"), cfg.echo().as_bytes())?;
    write(&cfg.out_dir.join("results.csv"), &results.csv)?;
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Output(e.to_string()))?;
    text.push('\n');
    write(&cfg.out_dir.join("summary.json"), text.as_bytes())?;
    Ok(Outcome {
        summary,
        partial: results.partial,
    })
}
