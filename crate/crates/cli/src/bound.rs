//! Tables of the tracking-error bounds over atom number and time.

use std::io::Write;

use anyhow::Result;
use clap::Args;
use magtrack::bounds::{cs_bound_amse, cs_bound_finite_prior, sql_bound, BoundQuery};
use magtrack::Error;

pub const BOUND_COLUMNS: [&str; 8] = [
    "t_s",
    "n_atoms",
    "kappa_hz",
    "v_flat_rad2_s2",
    "v_finite_rad2_s2",
    "sql_rad2_s2",
    "sqrt_v_flat_rad_s",
    "d2v_dn2",
];

/// Defaults reproduce the bound-surface parameters.
#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    /// Single time point (overrides the t range).
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub t_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_max: f64,
    /// Log-spaced points in t.
    #[arg(long, default_value_t = 17)]
    pub t_points: usize,
    /// Single atom number (overrides the N range).
    #[arg(long)]
    pub n: Option<f64>,
    #[arg(long, default_value_t = 1e6)]
    pub n_min: f64,
    #[arg(long, default_value_t = 1e14)]
    pub n_max: f64,
    /// Log-spaced points in N.
    #[arg(long, default_value_t = 33)]
    pub n_points: usize,
    #[arg(long, default_value_t = 1e6)]
    pub q_omega_rad2_s3: f64,
    #[arg(long, default_value_t = 100.0)]
    pub kappa_loc_hz: f64,
    #[arg(long, default_value_t = 0.0)]
    pub kappa_coll_hz: f64,
    #[arg(long, default_value_t = 10.0)]
    pub sigma0_rad_s: f64,
    /// Fill the d2v_dn2 column with second differences of the flat bound
    /// along N.
    #[arg(long)]
    pub convexity: bool,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

pub struct BoundTable {
    pub rows: Vec<[f64; 8]>,
}

/// Builds the table; any invalid query surfaces as the library error.
pub fn table(a: &BoundArgs) -> Result<BoundTable, Error> {
    let ts = match a.t {
        Some(t) => vec![t],
        None => log_grid(a.t_min, a.t_max, a.t_points),
    };
    let ns = match a.n {
        Some(n) => vec![n],
        None => log_grid(a.n_min, a.n_max, a.n_points),
    };
    let mut rows = Vec::with_capacity(ts.len() * ns.len());
    for &t in &ts {
        let start = rows.len();
        for &n in &ns {
            let q = BoundQuery {
                t,
                n_atoms: n,
                n_sigma: 0.0,
                q_omega: a.q_omega_rad2_s3,
                kappa_loc: a.kappa_loc_hz,
                kappa_coll: a.kappa_coll_hz,
                sigma0: a.sigma0_rad_s,
                chi: 0.0,
            };
            let sql = sql_bound(t, n, a.kappa_loc_hz, a.kappa_coll_hz)?;
            // a static field has no flat-prior tracking bound; report the SQL
            let flat = if a.q_omega_rad2_s3 == 0.0 {
                q.validate()?;
                sql
            } else {
                cs_bound_amse(&q)?
            };
            let finite = cs_bound_finite_prior(&q)?;
            rows.push([t, n, q.kappa(), flat, finite, sql, flat.sqrt(), f64::NAN]);
        }
        if a.convexity {
            for j in start + 1..rows.len().saturating_sub(1) {
                let (l, m, r) = (rows[j - 1], rows[j], rows[j + 1]);
                let d1 = (m[3] - l[3]) / (m[1] - l[1]);
                let d2 = (r[3] - m[3]) / (r[1] - m[1]);
                rows[j][7] = 2.0 * (d2 - d1) / (r[1] - l[1]);
            }
        }
    }
    Ok(BoundTable { rows })
}

pub fn write_csv(table: &BoundTable, sink: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(BOUND_COLUMNS)?;
    for r in &table.rows {
        w.write_record(r.iter().map(|v| {
            if v.is_nan() {
                String::new()
            } else {
                v.to_string()
            }
        }))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[derive(Parser)]
    struct Wrap {
        #[command(flatten)]
        b: BoundArgs,
    }

    fn args(extra: &[&str]) -> BoundArgs {
        Wrap::parse_from(std::iter::once("bound").chain(extra.iter().copied())).b
    }

    #[test]
    fn anchor_point() {
        let t = table(&args(&[
            "--t",
            "0.01",
            "--n",
            "1e13",
            "--kappa-coll-hz",
            "1e-5",
        ]))
        .unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!((t.rows[0][6] - 1.78).abs() < 0.01);
    }

    #[test]
    fn static_field_falls_back_to_sql() {
        let t = table(&args(&[
            "--q-omega-rad2-s3",
            "0",
            "--t-points",
            "3",
            "--n-points",
            "3",
        ]))
        .unwrap();
        for r in t.rows {
            assert_eq!(r[3], r[5]);
        }
    }

    #[test]
    fn default_grid_is_decreasing_and_convex_in_n() {
        let t = table(&args(&["--convexity"])).unwrap();
        assert_eq!(t.rows.len(), 17 * 33);
        for row in t.rows.chunks(33) {
            for w in row.windows(2) {
                assert!(w[1][3] < w[0][3]);
            }
            for r in &row[1..32] {
                assert!(r[7] > 0.0, "{r:?}");
            }
        }
    }
}
