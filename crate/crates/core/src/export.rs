//! CSV and JSON writers. Floats use `Display`, which prints the shortest
//! decimal string that parses back to the same `f64`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::driver::SimGrid;
use crate::experiments::{Comparison, ConvergenceReport, MomentRow, RateFit, StudyMeta};
use crate::scheme::PathColumns;

pub const PATH_HEADER: &str = "k,t,phi,M,I,X";
pub const STUDY_HEADER: &str = "scheme,model,alpha,beta,n,p,error,std_err";

pub fn write_path_csv<P: PathColumns + ?Sized, W: Write>(path: &P, grid: &SimGrid, mut out: W) -> io::Result<()> {
    writeln!(out, "{PATH_HEADER}")?;
    let (phi, m, i, x) = (path.phi(), path.big_m(), path.big_i(), path.x());
    for k in 0..x.len() {
        writeln!(out, "{},{},{},{},{},{}", k, grid.time(k), phi[k], m[k], i[k], x[k])?;
    }
    Ok(())
}

/// Rows of one or more reports under a single header.
pub fn write_study_csv<W: Write>(reports: &[&ConvergenceReport], mut out: W) -> io::Result<()> {
    writeln!(out, "{STUDY_HEADER}")?;
    for r in reports {
        let m = &r.meta;
        for row in &r.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                m.scheme, m.model, m.alpha, m.beta, row.n, row.p, row.error, row.std_err
            )?;
        }
    }
    Ok(())
}

pub fn write_moment_csv<W: Write>(meta: &StudyMeta, rows: &[MomentRow], mut out: W) -> io::Result<()> {
    writeln!(out, "scheme,model,alpha,beta,n,p,moment,std_err")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            meta.scheme, meta.model, meta.alpha, meta.beta, r.n, r.p, r.estimate, r.std_err
        )?;
    }
    Ok(())
}

/// JSON summary: metadata and fitted slopes, without the row data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub meta: StudyMeta,
    pub fits: Vec<RateFit>,
}

impl From<&ConvergenceReport> for StudySummary {
    fn from(r: &ConvergenceReport) -> Self {
        Self { meta: r.meta.clone(), fits: r.fits.clone() }
    }
}

pub fn write_summary_json<W: Write>(reports: &[&ConvergenceReport], out: W) -> io::Result<()> {
    let summaries: Vec<StudySummary> = reports.iter().map(|r| StudySummary::from(*r)).collect();
    let value = if summaries.len() == 1 {
        serde_json::to_value(&summaries[0])
    } else {
        serde_json::to_value(&summaries)
    }
    .map_err(io::Error::other)?;
    write_json(&value, out)
}

pub fn write_report_json<W: Write>(report: &ConvergenceReport, out: W) -> io::Result<()> {
    write_json(report, out)
}

pub fn write_comparison_json<W: Write>(cmp: &Comparison, out: W) -> io::Result<()> {
    write_json(cmp, out)
}

fn write_json<T: Serialize + ?Sized, W: Write>(value: &T, mut out: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(io::Error::other)?;
    writeln!(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ErrorRow;
    use crate::reference::ReferencePath;
    use crate::scheme::SchemeKind;

    fn report() -> ConvergenceReport {
        ConvergenceReport {
            meta: StudyMeta {
                scheme: SchemeKind::New,
                model: "affine".into(),
                alpha: 0.6,
                beta: -1.0,
                x0: 0.0,
                horizon: 1.0,
                steps: 4096,
                paths: 10,
                master_seed: 42,
                rho: -0.75,
                beyond_mao: true,
            },
            rows: vec![
                ErrorRow { n: 8, p: 2.0, error: 0.1 + 0.2, std_err: 1.0 / 3.0 },
                ErrorRow { n: 16, p: 2.0, error: 1e-300, std_err: 0.0 },
            ],
            fits: vec![],
        }
    }

    #[test]
    fn study_csv_round_trips_floats() {
        let mut buf = Vec::new();
        write_study_csv(&[&report()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], STUDY_HEADER);
        assert_eq!(lines.len(), 3);
        let f: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(f[..6], ["new", "affine", "0.6", "-1", "8", "2"]);
        assert_eq!(f[6].parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(f[7].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(lines[2].split(',').nth(6).unwrap().parse::<f64>().unwrap(), 1e-300);
    }

    #[test]
    fn path_csv_shape() {
        let p = ReferencePath {
            phi: vec![0.0, 0.5],
            big_m: vec![0.0, 1.0],
            big_i: vec![0.0, 0.0],
            x: vec![0.0, 1.0],
        };
        let mut buf = Vec::new();
        write_path_csv(&p, &SimGrid::new(1, 2.0).unwrap(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "k,t,phi,M,I,X\n0,0,0,0,0,0\n1,2,0.5,1,0,1\n");
    }

    #[test]
    fn summary_json_parses_back() {
        let mut buf = Vec::new();
        write_summary_json(&[&report()], &mut buf).unwrap();
        let s: StudySummary = serde_json::from_slice(&buf).unwrap();
        assert_eq!(s.meta, report().meta);
        let mut buf = Vec::new();
        write_report_json(&report(), &mut buf).unwrap();
        let r: ConvergenceReport = serde_json::from_slice(&buf).unwrap();
        assert_eq!(r, report());
    }
}
