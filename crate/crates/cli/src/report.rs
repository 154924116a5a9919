//! Plain-text tables for `--pretty`.

use std::fmt::Write;

use gesso::io::ResultDocument;

pub fn cells_table(doc: &ResultDocument) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>4} {:>4} {:>12} {:>12} {:>6} {:>6} {:>12} {:>5} {:>5}",
        "i1", "i2", "lambda1", "lambda2", "main", "gxe", "gap", "ws", "conv"
    );
    for c in &doc.cells {
        let _ = writeln!(
            s,
            "{:>4} {:>4} {:>12.5e} {:>12.5e} {:>6} {:>6} {:>12.3e} {:>5} {:>5}",
            c.i1,
            c.i2,
            c.lambda1,
            c.lambda2,
            c.beta_g.len(),
            c.beta_gxe.len(),
            c.meta.gap,
            c.meta.ws_size_final,
            if c.meta.converged { "yes" } else { "no" }
        );
    }
    if let Some(cv) = &doc.cv {
        let _ = writeln!(
            s,
            "cv: best cell {} (lambda1 {:.5e}, lambda2 {:.5e}), loss {:.6} +/- {:.6}",
            cv.best_cell,
            cv.best_pair.lambda1,
            cv.best_pair.lambda2,
            cv.mean_loss[cv.best_cell],
            cv.se_loss[cv.best_cell]
        );
    }
    if let Some(sel) = &doc.selection {
        let mut top: Vec<usize> = (0..sel.interaction.len()).filter(|&i| sel.interaction[i] > 0.0).collect();
        top.sort_by_key(|&i| (sel.interaction_rank[i], i));
        let _ = writeln!(s, "selection over {} runs (interaction, rate):", sel.runs);
        for i in top.into_iter().take(20) {
            let _ = writeln!(s, "  g{:<8} {:.3}", i + 1, sel.interaction[i]);
        }
    }
    s
}

pub fn bench_table<'a>(rows: impl Iterator<Item = (&'a str, Option<f64>, usize, usize, bool)>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<16} {:>12} {:>11} {:>7} {:>5}", "variant", "seconds", "gap_checks", "max_ws", "conv");
    for (name, secs, checks, ws, conv) in rows {
        let t = secs.map_or("-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            s,
            "{name:<16} {t:>12} {checks:>11} {ws:>7} {:>5}",
            if conv { "yes" } else { "no" }
        );
    }
    s
}

pub fn metrics_table(auc: Option<f64>, precision: &[f64]) -> String {
    let mut s = String::new();
    match auc {
        Some(a) => {
            let _ = writeln!(s, "interaction AUC: {a:.4}");
        }
        None => {
            let _ = writeln!(s, "interaction AUC: undefined");
        }
    }
    let _ = writeln!(s, "{:>5} {:>9}", "k", "precision");
    for (k, p) in precision.iter().enumerate() {
        let _ = writeln!(s, "{:>5} {:>9.4}", k + 1, p);
    }
    s
}
