//! Deterministic CSV and text rendering of run results.
//!
//! Per-class fields are semicolon-joined inside one CSV column so the schema
//! is fixed across modes and class counts; all floats use fixed scientific
//! notation so identical runs produce identical bytes.

use crate::metrics::MetricsReport;
use crate::sim::{RunOutput, SampleResult};

/// Scopes reported as dedicated columns; absent scopes read 0.
pub const SCOPES: [&str; 5] = [
    "pipeline",
    "clause_eval",
    "digital_classifier",
    "time_domain",
    "arbiter",
];

fn join<T: ToString>(values: impl IntoIterator<Item = T>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn sample_row(mode: &str, s: &SampleResult) -> String {
    let label = s.label.map(|l| l.to_string()).unwrap_or_default();
    let td_pred = s.td_pred.map(|p| p.to_string()).unwrap_or_default();
    let sums = join(s.oracle_sums.iter());
    let (split_s, split_m, kf_s, kf_m, dc, dc_decoded) = match &s.cotm_paths {
        Some(paths) => (
            join(paths.iter().map(|p| p.split.s)),
            join(paths.iter().map(|p| p.split.m)),
            join(paths.iter().map(|p| format!("{}:{}", p.cf_s.k, p.cf_s.f))),
            join(paths.iter().map(|p| format!("{}:{}", p.cf_m.k, p.cf_m.f))),
            join(paths.iter().map(|p| p.dc)),
            join(paths.iter().map(|p| p.dc_decoded)),
        ),
        None => Default::default(),
    };
    let final_delays = match (&s.cotm_paths, &s.hamming_delays) {
        (Some(paths), _) => join(paths.iter().map(|p| p.final_delay)),
        (None, Some(d)) => join(d.iter()),
        (None, None) => String::new(),
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        s.index,
        mode,
        label,
        s.oracle_pred,
        td_pred,
        u8::from(s.agree),
        sums,
        split_s,
        split_m,
        kf_s,
        kf_m,
        dc,
        dc_decoded,
        final_delays,
        s.completion_time.ps(),
        s.meta_events,
    )
}

/// Per-sample report CSV.
pub fn render_report_csv(out: &RunOutput) -> String {
    let mut csv = String::from(
        "sample,mode,label,oracle_pred,td_pred,agree,class_sums,split_s,split_m,\
         kf_s,kf_m,dc,dc_decoded,final_delays_ps,completion_ps,meta_events\n",
    );
    for s in &out.samples {
        csv.push_str(&sample_row(out.mode.as_str(), s));
        csv.push('\n');
    }
    csv
}

fn scope_count(m: &MetricsReport, scope: &str) -> u64 {
    m.transition_counts.get(scope).copied().unwrap_or(0)
}

/// Human-readable run summary.
pub fn render_summary_text(out: &RunOutput) -> String {
    let m = &out.metrics;
    let (agree, total) = out.agreement_counts();
    let mut s = String::new();
    s.push_str(&format!("mode                {}\n", out.mode.as_str()));
    s.push_str(&format!(
        "model dims          F={} C={} K={}\n",
        m.num_features, m.num_clauses, m.num_classes
    ));
    s.push_str(&format!("samples             {}\n", m.inferences));
    s.push_str(&format!(
        "oracle agreement    {}/{} ({:.6})\n",
        agree, total, m.agreement_rate
    ));
    s.push_str(&format!("f_infer             {:.6e} Hz\n", m.f_infer_hz));
    s.push_str(&format!(
        "throughput          {:.6e} Op/s ({:.6} GOp/s)\n",
        m.throughput_ops,
        m.throughput_ops / 1e9
    ));
    match (m.power_watts, m.energy_eff_topj) {
        (Some(p), Some(ee)) => {
            s.push_str(&format!("power (supplied)    {:.6e} W\n", p));
            s.push_str(&format!("energy efficiency   {:.6} TOp/J\n", ee));
        }
        _ => s.push_str("energy efficiency   n/a (no power supplied)\n"),
    }
    s.push_str("transition proxy (non-physical, per scope):\n");
    for scope in SCOPES {
        s.push_str(&format!("  {:<20} {}\n", scope, scope_count(m, scope)));
    }
    s.push_str(&format!("meta events         {}\n", m.meta_events));
    s.push_str(&format!(
        "protocol violations {}\n",
        out.protocol_violations
    ));
    s.push_str(&format!("deadlocks           {}\n", out.deadlocks));
    s
}

const COMPARE_HEADER: &str = "mode,agreement_rate,f_infer_hz,throughput_gops,\
    transitions_total,transitions_pipeline,transitions_clause_eval,\
    transitions_digital_classifier,transitions_time_domain,transitions_arbiter,\
    meta_events\n";

fn compare_row(label: &str, out: &RunOutput) -> String {
    let m = &out.metrics;
    format!(
        "{},{:.6},{:.6e},{:.6},{},{},{},{},{},{},{}\n",
        label,
        m.agreement_rate,
        m.f_infer_hz,
        m.throughput_ops / 1e9,
        m.total_transitions(),
        scope_count(m, "pipeline"),
        scope_count(m, "clause_eval"),
        scope_count(m, "digital_classifier"),
        scope_count(m, "time_domain"),
        scope_count(m, "arbiter"),
        m.meta_events,
    )
}

/// One row per mode, same samples and seed across modes.
pub fn render_comparison_csv(rows: &[(String, RunOutput)]) -> String {
    let mut csv = String::from(COMPARE_HEADER);
    for (label, out) in rows {
        csv.push_str(&compare_row(label, out));
    }
    csv
}

/// Plain-text comparison table.
pub fn render_comparison_text(rows: &[(String, RunOutput)]) -> String {
    let mut s = format!(
        "{:<22} {:>10} {:>14} {:>14} {:>12} {:>6}\n",
        "mode", "agreement", "f_infer (Hz)", "GOp/s", "transitions", "meta"
    );
    for (label, out) in rows {
        let m = &out.metrics;
        s.push_str(&format!(
            "{:<22} {:>10.6} {:>14.6e} {:>14.6} {:>12} {:>6}\n",
            label,
            m.agreement_rate,
            m.f_infer_hz,
            m.throughput_ops / 1e9,
            m.total_transitions(),
            m.meta_events,
        ));
    }
    s
}

/// Sweep CSV: one row per parameter value.
pub fn render_sweep_csv(parameter: &str, rows: &[(String, RunOutput)]) -> String {
    let mut csv = String::from(
        "parameter,value,agreement_rate,f_infer_hz,throughput_gops,transitions_total,meta_events\n",
    );
    for (value, out) in rows {
        let m = &out.metrics;
        csv.push_str(&format!(
            "{},{},{:.6},{:.6e},{:.6},{},{}\n",
            parameter,
            value,
            m.agreement_rate,
            m.f_infer_hz,
            m.throughput_ops / 1e9,
            m.total_transitions(),
            m.meta_events,
        ));
    }
    csv
}
