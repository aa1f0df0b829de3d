//! Datasets behind every simulated figure, produced in one run.

use nvpump_core::{dwell_vs_polarization, LoopRecord, PumpModel, SweepVariable};
use rayon::prelude::*;
use serde_json::json;

use crate::commands::{
    dwell_fit_report, loop_series, run_sweep, spec_for, sweep_report, ts_label, LoopSeries,
};
use crate::config::RunConfig;
use crate::output::{to_rounded, Cell, Report, Table};
use crate::CliError;

/// Pulse widths compared across the train and mechanism figures, ns.
pub const PULSE_WIDTHS: [f64; 6] = [4.0, 10.0, 20.0, 50.0, 100.0, 200.0];
/// The two widths whose per-loop transfer is plotted.
pub const TRANSFER_WIDTHS: [f64; 2] = [4.0, 200.0];

pub const FIGURES: [&str; 7] = ["fig2a", "fig2c", "fig3a", "fig4a", "fig4b", "fig4c", "fig4d"];

pub fn wait_grid() -> Vec<f64> {
    (1..=35).map(|i| 10.0 * i as f64).collect()
}

fn series(model: &PumpModel, widths: &[f64], t_w: f64, n: usize) -> Result<Vec<LoopSeries>, CliError> {
    widths
        .par_iter()
        .map(|&t_s| {
            loop_series(model, t_s, t_w, n)
                .map_err(|e| CliError::at_stage("figures", format!("t_s = {t_s}: {e}")))
        })
        .collect()
}

/// Long-format table: one row per loop, one column per series field.
/// Column name prefix and the per-loop value it holds.
type Field = (&'static str, fn(&LoopRecord) -> f64);

fn loop_table(all: &[LoopSeries], fields: &[Field]) -> Table {
    let mut header = vec!["loop".to_string()];
    for s in all {
        for (name, _) in fields {
            header.push(format!("{name}_{}", ts_label(s.t_s)));
        }
    }
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    let n = all.iter().map(|s| s.loops.len()).max().unwrap_or(0);
    for i in 0..n {
        let mut row = vec![Cell::from(i + 1)];
        for s in all {
            for (_, f) in fields {
                row.push(s.loops.get(i).map_or(Cell::Empty, |r| Cell::Num(f(r))));
            }
        }
        table.push(row);
    }
    table
}

pub fn figures(cfg: &RunConfig) -> Result<Vec<(&'static str, Report)>, CliError> {
    let model = cfg.model().map_err(CliError::stage("figures"))?;
    let base = cfg.base_model().map_err(CliError::stage("figures"))?;
    let (t_w, n) = (cfg.fixed.t_w, cfg.fixed.n);

    let trains = series(&model, &PULSE_WIDTHS, t_w, n)?;
    let fig2a = Report {
        table: loop_table(&trains, &[("p1", |r| r.polarization)]),
        data: to_rounded(&trains),
    };

    let fig2c = sweep_report(&run_sweep(
        &base,
        &spec_for(cfg, SweepVariable::PulseWidth, PULSE_WIDTHS.to_vec(), false),
    )?);
    // Wait sweep at the configured pulse width.
    let fig3a = sweep_report(&run_sweep(
        &base,
        &spec_for(cfg, SweepVariable::Wait, wait_grid(), false),
    )?);

    let transfer: Vec<LoopSeries> = trains
        .iter()
        .filter(|s| TRANSFER_WIDTHS.contains(&s.t_s))
        .cloned()
        .collect();
    let fig4a = Report {
        table: loop_table(&transfer, &[("p21", |r| r.p21), ("p12", |r| r.p12)]),
        data: to_rounded(&transfer),
    };
    let net: Vec<_> = transfer
        .iter()
        .map(|s| json!({ "t_s": s.t_s, "t_w": s.t_w, "net": s.loops.iter().map(|r| r.p21 - r.p12).collect::<Vec<_>>() }))
        .collect();
    let fig4b = Report {
        table: loop_table(&transfer, &[("net", |r| r.p21 - r.p12)]),
        data: to_rounded(&net),
    };

    let dwell = dwell_vs_polarization(&model, &PULSE_WIDTHS, t_w).map_err(CliError::stage("figures"))?;
    let mut t4c = Table::new(["t_s", "singlet_dwell_ns", "polarization"]);
    for p in &dwell {
        t4c.push(vec![
            Cell::Num(p.t_s),
            Cell::Num(p.dwell),
            Cell::Num(p.polarization),
        ]);
    }
    let fig4c = Report {
        table: t4c,
        data: to_rounded(&dwell),
    };
    let fig4d = dwell_fit_report(&dwell);

    Ok(vec![
        ("fig2a", fig2a),
        ("fig2c", fig2c),
        ("fig3a", fig3a),
        ("fig4a", fig4a),
        ("fig4b", fig4b),
        ("fig4c", fig4c),
        ("fig4d", fig4d),
    ])
}
