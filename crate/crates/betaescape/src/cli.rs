//! Command-line surface: per-base analysis, staircase sweeps, survivor
//! tables, window-shift queries, constants, and univoque certificates.
//!
//! Exit codes: 0 success, 2 undetermined classification, 1 usage or
//! runtime error. All file output is UTF-8 with LF line endings and is
//! byte-deterministic for fixed flags, independent of `--jobs`.

use crate::beta_core::{make_beta, BetaParam};
use crate::constants;
use crate::markov_escape::{
    approx_bracket, bracketed_report, decide_escape, AnalysisReport, AnalyzeConfig,
    Classification,
};
use crate::real::{fmt20, fmt20_f64, Ctx, Real};
use crate::sft_tools::{build_transfer, count_words, perron_of_shift, sft_entropy, Block};
use crate::survivor::{survivor_iterate, SurvivorCaps};
use crate::{beta_core, Error, Result};
use clap::{Parser, Subcommand};
use rug::Float;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "betaescape",
    about = "Escape rates and univoque-set dimensions for greedy beta-expansions",
    version
)]
pub struct Cli {
    /// Working precision in significant bits.
    #[arg(long, global = true, env = "BETAESCAPE_PRECISION", default_value_t = 128)]
    pub precision: u32,
    /// Survivor-set depth for empirical fits.
    #[arg(long, global = true, default_value_t = 40)]
    pub depth: usize,
    /// Step budget for hole-endpoint orbits.
    #[arg(long = "max-orbit", global = true, default_value_t = 10_000)]
    pub max_orbit: usize,
    /// Emit JSON instead of aligned text where applicable.
    #[arg(long, global = true, default_value_t = false)]
    pub json: bool,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Classify one base and report its escape rate.
    Analyze {
        /// decimal | golden | kl | multinacci:k | "poly:<p(x)> in (lo,hi)"
        beta: String,
    },
    /// Escape rates across a grid of bases; CSV and optional SVG.
    Sweep {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Survivor-set measure table as CSV.
    Survivor {
        beta: String,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Entropy of the lexicographic window shift of a block.
    Sft {
        /// Raw bitstring, e.g. 110.
        block: String,
        /// Also report word counts for n = 1..=N.
        #[arg(long = "count-up-to")]
        count_up_to: Option<usize>,
    },
    /// Named constants at precision.
    Constants {
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 12)]
        digits: usize,
    },
    /// Finite-depth univoque certificate for a point.
    Univoque { beta: String, x: String },
}

pub fn run_from_env() -> i32 {
    let cli = match Cli::try_parse_from(std::env::args_os()) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("betaescape: {e}");
            match e {
                Error::Undetermined { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn config_of(cli: &Cli) -> AnalyzeConfig {
    AnalyzeConfig {
        depth: cli.depth,
        max_orbit: cli.max_orbit,
        ..AnalyzeConfig::default()
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    match &cli.cmd {
        Cmd::Analyze { beta } => {
            let b = make_beta(beta, cli.precision)?;
            let report = decide_escape(&b, &config_of(cli))?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                print!("{}", render_report(&report));
            }
            Ok(0)
        }
        Cmd::Sweep {
            from,
            to,
            steps,
            out,
            svg,
            jobs,
        } => {
            let rows = sweep(from, to, *steps, *jobs, cli.precision, &config_of(cli))?;
            let csv = sweep_csv(&rows, cli.depth, cli.precision);
            std::fs::write(out, csv)?;
            if let Some(path) = svg {
                std::fs::write(path, sweep_svg(&rows))?;
            }
            Ok(0)
        }
        Cmd::Survivor { beta, out } => {
            let b = make_beta(beta, cli.precision)?;
            let table = survivor_iterate(&b, cli.depth, &SurvivorCaps::default());
            let csv = table.to_csv();
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            Ok(0)
        }
        Cmd::Sft {
            block,
            count_up_to,
        } => {
            let t = Block::parse(block)?;
            let entropy = sft_entropy(&t)?;
            let shift = build_transfer(&t);
            let rho = perron_of_shift(&shift)?;
            let counts: Option<Vec<u64>> = match count_up_to {
                Some(n) => Some(
                    (1..=*n)
                        .map(|k| count_words(&t, k))
                        .collect::<Result<Vec<_>>>()?,
                ),
                None => None,
            };
            if cli.json {
                let mut obj = serde_json::json!({
                    "block": block,
                    "entropy": entropy,
                    "rho": rho,
                });
                if let Some(c) = &counts {
                    obj["counts"] = serde_json::json!(c);
                }
                println!("{}", serde_json::to_string_pretty(&obj).expect("serializes"));
            } else {
                println!("block    {block}");
                println!("entropy  {entropy:.15}");
                println!("rho      {rho:.15}");
                if shift.empty {
                    println!("empty    true");
                }
                if let Some(c) = &counts {
                    println!(
                        "counts   {}",
                        c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
                    );
                }
            }
            Ok(0)
        }
        Cmd::Constants { name, digits } => {
            let c = constants::named(name, cli.precision)?;
            println!("{}", decimal_digits(&c.value, *digits));
            Ok(0)
        }
        Cmd::Univoque { beta, x } => {
            let b = make_beta(beta, cli.precision)?;
            let ctx = Ctx::new(cli.precision);
            let xv = ctx.parse(x)?;
            let outcome = beta_core::univoque_test(&xv, &b, cli.depth)?;
            use beta_core::UnivoqueOutcome::*;
            if cli.json {
                let (kind, step) = match outcome {
                    Survives { depth } => ("survives", depth),
                    Escapes { step } => ("escapes", step),
                    Undetermined { step } => ("undetermined", step),
                };
                println!(
                    "{}",
                    serde_json::json!({
                        "beta": b.value.to_f64(),
                        "x": xv.to_f64(),
                        "depth": cli.depth,
                        "outcome": kind,
                        "step": step,
                    })
                );
            } else {
                match outcome {
                    Survives { depth } => println!("survives to depth {depth}"),
                    Escapes { step } => println!("escapes at step {step}"),
                    Undetermined { step } => println!("undetermined at step {step}"),
                }
            }
            if matches!(outcome, Undetermined { .. }) {
                Ok(2)
            } else {
                Ok(0)
            }
        }
    }
}

fn render_report(r: &AnalysisReport) -> String {
    let mut s = String::new();
    let class = match r.classification {
        Classification::Analytic => "analytic",
        Classification::Matching => "matching",
        Classification::Bracketed => "bracketed",
        Classification::Beta2 => "beta2",
    };
    s.push_str(&format!("beta            {}\n", r.beta));
    s.push_str(&format!("spec            {}\n", r.spec));
    s.push_str(&format!("classification  {class}\n"));
    if let (Some(ia), Some(ib)) = (r.i_a, r.i_b) {
        s.push_str(&format!("i_a, i_b        {ia}, {ib}\n"));
    }
    if let Some(rho) = r.rho {
        s.push_str(&format!("rho             {rho:.15}\n"));
    }
    if let Some(h) = r.entropy {
        s.push_str(&format!("entropy         {h:.15}\n"));
    }
    s.push_str(&format!("dim             {:.15}\n", r.dim));
    s.push_str(&format!("E               {:.15}\n", r.big_e));
    s.push_str(&format!("e               {:.15}\n", r.e));
    if let Some(b) = &r.bracket {
        s.push_str(&format!("bracket         [{:.15}, {:.15}]\n", b.lo, b.hi));
    }
    if let Some(emp) = &r.empirical {
        s.push_str(&format!(
            "empirical E_hat {:.15} (window {}..{}, residual {:.3e})\n",
            emp.e_hat, emp.window.0, emp.window.1, emp.residual
        ));
    }
    s.push_str(&format!("precision_bits  {}\n", r.precision_bits));
    s.push_str(&format!("depth           {}\n", r.depth));
    s
}

/// Plain decimal with the requested number of significant digits.
fn decimal_digits(v: &Real, digits: usize) -> String {
    let s = v.to_string_radix(10, Some(digits.max(2)));
    match s.split_once('e') {
        Some((mant, exp)) if exp == "0" => mant.to_string(),
        _ => s,
    }
}

/// One sweep grid point.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub beta: Real,
    pub report: Option<AnalysisReport>,
}

/// Evaluate the escape rate across an inclusive grid of bases. Rows that
/// come back undetermined degrade to the bracket route; hard failures
/// become `failed` rows.
pub fn sweep(
    from: &str,
    to: &str,
    steps: usize,
    jobs: usize,
    precision: u32,
    cfg: &AnalyzeConfig,
) -> Result<Vec<SweepRow>> {
    let ctx = Ctx::new(precision);
    let wp = ctx.prec + 32;
    let lo = Float::with_val(
        wp,
        Float::parse(from).map_err(|e| Error::BadDescriptor(from.into(), e.to_string()))?,
    );
    let hi = Float::with_val(
        wp,
        Float::parse(to).map_err(|e| Error::BadDescriptor(to.into(), e.to_string()))?,
    );
    if !(lo > 1u32 && hi > lo && hi <= 2u32) || steps < 2 {
        return Err(Error::OutOfDomain {
            what: "sweep range",
            value: format!("[{from}, {to}] x {steps}"),
            domain: "1 < from < to <= 2, steps >= 2",
        });
    }
    let span = Float::with_val(wp, &hi - &lo);
    let grid: Vec<Real> = (0..steps)
        .map(|i| {
            let frac = Float::with_val(wp, i as u64) / Float::with_val(wp, (steps - 1) as u64);
            Float::with_val(wp, &lo + Float::with_val(wp, &span * &frac))
        })
        .collect();

    // sweep rows never carry the empirical cross-check; the bracket route
    // computes its own fit internally
    let row_cfg = AnalyzeConfig {
        cross_check: false,
        ..cfg.clone()
    };
    let eval = |bv: &Real| -> SweepRow {
        // exact decimal of the dyadic grid point keeps the descriptor and
        // the value in lockstep at every precision stage
        let descriptor = bv.to_string_radix(10, None);
        let beta = match make_beta(&descriptor, precision) {
            Ok(b) => b,
            Err(_) => {
                return SweepRow {
                    beta: bv.clone(),
                    report: None,
                }
            }
        };
        let report = match decide_escape(&beta, &row_cfg) {
            Ok(r) => Some(r),
            Err(Error::Undetermined { .. }) => bracketed_report(&beta, &row_cfg).ok(),
            Err(_) => None,
        };
        SweepRow {
            beta: bv.clone(),
            report,
        }
    };

    let rows: Vec<SweepRow> = if jobs <= 1 {
        grid.iter().map(eval).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        use rayon::prelude::*;
        pool.install(|| grid.par_iter().map(eval).collect())
    };
    Ok(rows)
}

/// `beta,E,dim,method,bracket_lo,bracket_hi,i_a,i_b,depth,precision_bits`
pub fn sweep_csv(rows: &[SweepRow], depth: usize, precision: u32) -> String {
    let mut s =
        String::from("beta,E,dim,method,bracket_lo,bracket_hi,i_a,i_b,depth,precision_bits\n");
    for row in rows {
        let beta = fmt20(&row.beta);
        match &row.report {
            Some(r) => {
                let (blo, bhi) = match &r.bracket {
                    Some(b) => (fmt20_f64(b.lo), fmt20_f64(b.hi)),
                    None => (String::new(), String::new()),
                };
                let ia = r.i_a.map(|v| v.to_string()).unwrap_or_default();
                let ib = r.i_b.map(|v| v.to_string()).unwrap_or_default();
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    beta,
                    fmt20_f64(r.big_e),
                    fmt20_f64(r.dim),
                    r.classification.method(),
                    blo,
                    bhi,
                    ia,
                    ib,
                    depth,
                    precision,
                ));
            }
            None => {
                s.push_str(&format!(
                    "{beta},,,failed,,,,,{depth},{precision}\n"
                ));
            }
        }
    }
    s
}

/// Minimal standalone polyline chart of (β, E).
pub fn sweep_svg(rows: &[SweepRow]) -> String {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            r.report
                .as_ref()
                .map(|rep| (r.beta.to_f64(), rep.big_e))
        })
        .collect();
    let (w, h) = (900.0, 560.0);
    let (ml, mr, mt, mb) = (70.0, 30.0, 30.0, 50.0);
    let (x0, x1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(x, _)| {
            (a.min(x), b.max(x))
        });
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let fx = |x: f64| ml + (x - x0) / span * (w - ml - mr);
    let fy = |e: f64| mt + (1.0 - e) * (h - mt - mb);
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr,
        h - mb
    ));
    s.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb
    ));
    s.push_str(&format!(
        "<text x=\"{ml}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{:.4}</text>\n",
        h - mb + 20.0,
        x0
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{:.4}</text>\n",
        w - mr,
        h - mb + 20.0,
        x1
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"end\">0</text>\n",
        ml - 8.0,
        h - mb + 4.0
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"end\">1</text>\n",
        ml - 8.0,
        mt + 4.0
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">escape rate E over beta</text>\n",
        (ml + w - mr) / 2.0,
        mt - 10.0
    ));
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, e)| format!("{:.2},{:.2}", fx(x), fy(e)))
        .collect();
    s.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1f6fb4\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        coords.join(" ")
    ));
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_low_range_all_analytic() {
        let cfg = AnalyzeConfig {
            depth: 10,
            ..AnalyzeConfig::default()
        };
        let rows = sweep("1.3", "1.6", 4, 1, 128, &cfg).unwrap();
        assert_eq!(rows.len(), 4);
        for row in &rows {
            let r = row.report.as_ref().expect("analytic rows never fail");
            assert_eq!(r.classification, Classification::Analytic);
            assert_eq!(r.big_e, 1.0);
        }
    }

    #[test]
    fn sweep_rejects_bad_ranges() {
        let cfg = AnalyzeConfig::default();
        assert!(sweep("1.5", "1.2", 4, 1, 128, &cfg).is_err());
        assert!(sweep("0.5", "1.5", 4, 1, 128, &cfg).is_err());
        assert!(sweep("1.2", "2.5", 4, 1, 128, &cfg).is_err());
        assert!(sweep("1.2", "1.5", 1, 1, 128, &cfg).is_err());
    }

    #[test]
    fn csv_schema() {
        let cfg = AnalyzeConfig {
            depth: 8,
            ..AnalyzeConfig::default()
        };
        let rows = sweep("1.3", "1.4", 2, 1, 128, &cfg).unwrap();
        let csv = sweep_csv(&rows, 8, 128);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "beta,E,dim,method,bracket_lo,bracket_hi,i_a,i_b,depth,precision_bits"
        );
        let first = lines.next().unwrap();
        assert!(first.contains(",analytic,"));
        assert_eq!(first.split(',').count(), 10);
    }

    #[test]
    fn svg_is_standalone() {
        let cfg = AnalyzeConfig {
            depth: 8,
            ..AnalyzeConfig::default()
        };
        let rows = sweep("1.3", "1.4", 3, 1, 128, &cfg).unwrap();
        let svg = sweep_svg(&rows);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polyline"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
