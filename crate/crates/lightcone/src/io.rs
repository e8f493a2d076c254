//! CSV and JSON file formats.
//!
//! Floats are written with Rust's shortest round-trip formatting, so values
//! read back from any table are bit-identical to the ones computed. Sites
//! appear either as one column per coordinate (`i1,i2,..`) or, where a table
//! has a single `site` column, as coordinates joined by `:`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use lightcone_core::convergence::ConvergenceReport;
use lightcone_core::diagnostics::{GoodSetRow, SuperstabilityReport, TailReport};
use lightcone_core::dynamics::Trajectory;
use lightcone_core::lightcone::MemberResult;
use lightcone_core::tangent::{block_norm, JacobianField};
use lightcone_core::{Lattice, PhaseState, Site};
use sha2::{Digest, Sha256};

use crate::error::CliError;

type Writer = csv::Writer<BufWriter<File>>;

fn create(path: &Path) -> Result<Writer, CliError> {
    let file = File::create(path).map_err(|e| CliError::io(format!("cannot create {}", path.display()), e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn finish(mut w: Writer, path: &Path) -> Result<(), CliError> {
    w.flush()
        .map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))
}

fn coord_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|k| format!("i{k}")).collect()
}

fn coord_fields(site: &Site) -> impl Iterator<Item = String> + '_ {
    site.coords().iter().map(|c| c.to_string())
}

/// Shortest round-trip text of `x`, in exponent form outside [1e-4, 1e16).
pub fn fmt_f64(x: impl std::borrow::Borrow<f64>) -> String {
    let x = *x.borrow();
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e16).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// `x:y:z` form of a site.
pub fn site_label(site: &Site) -> String {
    site.coords()
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(":")
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(format!("cannot create {}", path.display()), e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// State table `i1[,i2[,i3]],q,p`, one row per site in flat order.
pub fn write_state(path: &Path, lattice: &Lattice, state: &PhaseState) -> Result<(), CliError> {
    let mut w = create(path)?;
    let mut header = coord_header(lattice.dim());
    header.extend(["q".into(), "p".into()]);
    w.write_record(&header)?;
    for i in 0..lattice.len() {
        let site = lattice.site_of(i);
        let row: Vec<String> = coord_fields(&site)
            .chain([fmt_f64(state.q[i]), fmt_f64(state.p[i])])
            .collect();
        w.write_record(&row)?;
    }
    finish(w, path)
}

/// Reads a state table; rows may come in any order but every site of the
/// box must appear exactly once.
pub fn read_state(path: &Path, lattice: &Lattice) -> Result<PhaseState, CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let dim = lattice.dim();
    let mut expected = coord_header(dim);
    expected.extend(["q".into(), "p".into()]);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != expected {
        return Err(bad(format!(
            "header {:?}, expected {:?}",
            header.join(","),
            expected.join(",")
        )));
    }
    let mut q = vec![f64::NAN; lattice.len()];
    let mut p = vec![f64::NAN; lattice.len()];
    let mut seen = vec![false; lattice.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = line + 2;
        let coords = (0..dim)
            .map(|k| rec[k].trim().parse::<i64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {row}: {e}")))?;
        let site = Site::new(&coords);
        let i = lattice.index_of(&site).map_err(|e| bad(format!("row {row}: {e}")))?;
        if seen[i] {
            return Err(bad(format!("row {row}: site {site} repeated")));
        }
        seen[i] = true;
        let num = |k: usize| rec[k].trim().parse::<f64>().map_err(|e| bad(format!("row {row}: {e}")));
        q[i] = num(dim)?;
        p[i] = num(dim + 1)?;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(bad(format!("site {} missing", lattice.site_of(i))));
    }
    PhaseState::new(q, p).map_err(|e| bad(e.to_string()))
}

/// Long-format trajectory `t,i1..,q,p`.
pub fn write_trajectory(path: &Path, lattice: &Lattice, traj: &Trajectory) -> Result<(), CliError> {
    let mut w = create(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(coord_header(lattice.dim()));
    header.extend(["q".into(), "p".into()]);
    w.write_record(&header)?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        for i in 0..lattice.len() {
            let site = lattice.site_of(i);
            let row: Vec<String> = std::iter::once(fmt_f64(t))
                .chain(coord_fields(&site))
                .chain([fmt_f64(s.q[i]), fmt_f64(s.p[i])])
                .collect();
            w.write_record(&row)?;
        }
    }
    finish(w, path)
}

/// `t,H,drift` rows as produced by `Trajectory::energy_series`.
pub fn write_energy(path: &Path, series: &[(f64, f64, f64)]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(["t", "H", "drift"])?;
    for (t, h, d) in series {
        w.write_record([fmt_f64(t), fmt_f64(h), fmt_f64(d)])?;
    }
    finish(w, path)
}

pub fn write_jacobian(path: &Path, lattice: &Lattice, fields: &[JacobianField]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(["t", "site", "d_qq", "d_qp", "d_pq", "d_pp", "norm"])?;
    for f in fields {
        for (j, b) in f.blocks.iter().enumerate() {
            debug_assert_eq!(block_norm(b), f.norms[j]);
            w.write_record([
                fmt_f64(f.t),
                site_label(&lattice.site_of(j)),
                fmt_f64(b[0][0]),
                fmt_f64(b[0][1]),
                fmt_f64(b[1][0]),
                fmt_f64(b[1][1]),
                fmt_f64(f.norms[j]),
            ])?;
        }
    }
    finish(w, path)
}

/// Compact `t,site,log10_norm`; zero norms appear as `-inf`.
pub fn write_jacobian_norms(path: &Path, lattice: &Lattice, fields: &[JacobianField]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(["t", "site", "log10_norm"])?;
    for f in fields {
        for (j, n) in f.norms.iter().enumerate() {
            w.write_record([fmt_f64(f.t), site_label(&lattice.site_of(j)), fmt_f64(n.log10())])?;
        }
    }
    finish(w, path)
}

pub fn write_tail(path: &Path, report: &TailReport) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(["N", "P_tail"])?;
    for (n, p) in report.grid.iter().zip(&report.tail) {
        w.write_record([fmt_f64(n), fmt_f64(p)])?;
    }
    finish(w, path)
}

pub fn write_superstability(path: &Path, report: &SuperstabilityReport) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(["nu", "k", "C_hat"])?;
    for e in &report.estimates {
        w.write_record([site_label(&e.cube.center), e.cube.radius.to_string(), fmt_f64(e.c_hat)])?;
    }
    finish(w, path)
}

pub fn write_goodset(path: &Path, rows: &[GoodSetRow]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(["k", "threshold", "failures", "blowups", "evaluated", "failure_fraction"])?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            fmt_f64(r.threshold),
            r.failures.to_string(),
            r.blowups.to_string(),
            r.evaluated.to_string(),
            fmt_f64(r.failure_fraction()),
        ])?;
    }
    finish(w, path)
}

/// `seed,member,t,epsilon,r_front,cone_radius,max_outside,weighted_outside,valid`.
pub fn write_front(path: &Path, seed: u64, members: &[MemberResult]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record([
        "seed",
        "member",
        "t",
        "epsilon",
        "r_front",
        "cone_radius",
        "max_outside",
        "weighted_outside",
        "valid",
    ])?;
    for m in members {
        for r in &m.records {
            w.write_record([
                seed.to_string(),
                m.index.to_string(),
                fmt_f64(r.t),
                fmt_f64(r.epsilon),
                r.r_front.to_string(),
                fmt_f64(r.cone_radius),
                fmt_f64(r.max_outside),
                fmt_f64(r.weighted_outside),
                r.valid.to_string(),
            ])?;
        }
    }
    finish(w, path)
}

pub fn write_sensitivity(path: &Path, members: &[MemberResult]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(["member", "t", "epsilon", "r_front"])?;
    for m in members {
        for (eps, radii) in &m.sensitivity {
            for (rec, r) in m.records.iter().zip(radii) {
                w.write_record([m.index.to_string(), fmt_f64(rec.t), fmt_f64(eps), r.to_string()])?;
            }
        }
    }
    finish(w, path)
}

/// Decay profiles `member,t,r,max_norm`.
pub fn write_profiles(path: &Path, members: &[MemberResult]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(["member", "t", "r", "max_norm"])?;
    for m in members {
        for (rec, prof) in m.records.iter().zip(&m.profiles) {
            for (r, v) in prof.iter().enumerate() {
                w.write_record([m.index.to_string(), fmt_f64(rec.t), r.to_string(), fmt_f64(v)])?;
            }
        }
    }
    finish(w, path)
}

pub fn write_q_track(path: &Path, members: &[MemberResult]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(["member", "t", "Q"])?;
    for m in members {
        for (t, q) in m.q_track.times.iter().zip(&m.q_track.values) {
            w.write_record([m.index.to_string(), fmt_f64(t), fmt_f64(q.value)])?;
        }
    }
    finish(w, path)
}

/// `member,n,u_k,displacement,phi`.
pub fn write_converge(path: &Path, reports: &[ConvergenceReport]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(["member", "n", "u_k", "displacement", "phi"])?;
    for (m, rep) in reports.iter().enumerate() {
        for r in &rep.rows {
            w.write_record([
                m.to_string(),
                r.n.to_string(),
                fmt_f64(r.gap),
                fmt_f64(r.displacement),
                fmt_f64(r.phi),
            ])?;
        }
    }
    finish(w, path)
}

/// JSON number, or null when not finite.
pub fn num(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

/// Writes `text` and returns its sha256.
pub fn write_hashed(path: &Path, text: &[u8]) -> Result<String, CliError> {
    let mut f =
        BufWriter::new(File::create(path).map_err(|e| CliError::io(format!("cannot create {}", path.display()), e))?);
    f.write_all(text)
        .and_then(|_| f.flush())
        .map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))?;
    Ok(hex::encode(Sha256::digest(text)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use lightcone_core::LatticeSpec;

    #[test]
    fn state_round_trip_is_exact() {
        let l = Lattice::new(LatticeSpec::new(2, 2, 1.0).unwrap()).unwrap();
        let q: Vec<f64> = (0..l.len()).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
        let p: Vec<f64> = (0..l.len()).map(|i| 1e-300 * i as f64).collect();
        let s = PhaseState::new(q, p).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_state(&path, &l, &s).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("i1,i2,q,p\n-2,-2,"));
        assert!(text.contains(",1e-300\n"));
        assert_eq!(read_state(&path, &l).unwrap(), s);
    }

    #[test]
    fn float_text_round_trips() {
        for x in [
            0.0,
            -0.0,
            1.0,
            2.5,
            1e-4,
            9.999e-5,
            1e16,
            1e-300,
            5e-324,
            -3.7e22,
            f64::MAX,
            0.1 + 0.2,
        ] {
            let t = fmt_f64(x);
            assert_eq!(t.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{t}");
            assert!(t.len() < 26, "{t}");
        }
        assert_eq!(fmt_f64(2.0), "2");
        assert_eq!(fmt_f64(1e-6), "1e-6");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn read_state_rejects_bad_tables() {
        let l = Lattice::new(LatticeSpec::new(1, 1, 1.0).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        for text in [
            "i1,q,p\n-1,0,0\n0,0,0\n",
            "i1,q,p\n-1,0,0\n0,0,0\n0,0,0\n1,0,0\n",
            "i1,q,p\n-1,0,0\n0,0,0\n2,0,0\n",
            "x,q,p\n-1,0,0\n0,0,0\n1,0,0\n",
            "i1,q,p\n-1,0,0\n0,abc,0\n1,0,0\n",
        ] {
            std::fs::write(&path, text).unwrap();
            let err = read_state(&path, &l).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
        std::fs::write(&path, "i1,q,p\n1,3,0\n-1,1,0\n0,2,0\n").unwrap();
        assert_eq!(read_state(&path, &l).unwrap().q, vec![1.0, 2.0, 3.0]);
    }
}
