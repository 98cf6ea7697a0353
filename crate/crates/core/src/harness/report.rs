use std::fmt::Write;

use super::{McErrorReport, SweepReport};

/// `q,false_pos,false_neg,total` rows.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut s = String::from("q,false_pos,false_neg,total\n");
    for r in &report.rows {
        writeln!(s, "{},{},{},{}", r.q, r.false_pos, r.false_neg, r.total).unwrap();
    }
    s
}

/// One row per `(p, S)` cell.
pub fn mc_csv(report: &McErrorReport) -> String {
    let mut s = String::from(
        "p,s,trials,failures,mean_error,std_error,mean_plus_3sigma,mean_p_hat,std_p_hat,rel_prev_error_3sigma\n",
    );
    for c in &report.cells {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            c.p,
            c.s,
            c.trials,
            c.failures,
            c.mean_error,
            c.std_error,
            c.mean_plus_3sigma,
            c.mean_p_hat,
            c.std_p_hat,
            c.rel_prev_error_3sigma
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::super::SweepRow;
    use super::*;

    #[test]
    fn sweep_csv_layout() {
        let r = SweepReport {
            true_p: 0.1,
            rows: vec![SweepRow { q: 0.1, false_pos: 0.25, false_neg: 0.5, total: 0.75 }],
            argmin_q: 0.1,
            flat: false,
        };
        assert_eq!(sweep_csv(&r), "q,false_pos,false_neg,total\n0.1,0.25,0.5,0.75\n");
    }
}
