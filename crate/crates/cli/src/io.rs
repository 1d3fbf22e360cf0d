//! CSV files owned by the CLI: force pairs and torsion logs.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use delta_core::compliance::{ForcePair, TorsionSample};
use delta_core::units::{nm_to_nmm, nmm_to_nm};

use crate::error::CliError;

pub const PAIRS_HEADER: [&str; 3] = ["link", "force_N", "deflection_um"];
pub const TORSION_HEADER: [&str; 2] = ["tau_z_Nm", "dtheta_z_deg"];

pub fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::input(path.display(), e))
}

fn reader<R: Read>(input: R, expected: &[&str], what: &str) -> Result<csv::Reader<R>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers().map_err(|e| CliError::input(what, e))?;
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(CliError::Input(format!(
            "{what}: expected header {}, got {}",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(rdr)
}

fn parse<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> Result<T, CliError> {
    rec[i].parse().map_err(|_| {
        let line = rec.position().map_or(0, |p| p.line());
        CliError::Input(format!("{what} line {line}: bad value {:?}", &rec[i]))
    })
}

pub fn read_pairs<R: Read>(input: R) -> Result<Vec<ForcePair>, CliError> {
    const WHAT: &str = "pairs file";
    let mut rdr = reader(input, &PAIRS_HEADER, WHAT)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::input(WHAT, e))?;
        out.push(ForcePair {
            link: parse(&rec, 0, WHAT)?,
            force_n: parse(&rec, 1, WHAT)?,
            deflection_um: parse(&rec, 2, WHAT)?,
        });
    }
    Ok(out)
}

pub fn write_pairs<W: Write>(pairs: &[ForcePair], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::input("writing pairs", e);
    w.write_record(PAIRS_HEADER).map_err(err)?;
    for p in pairs {
        w.write_record([p.link.to_string(), p.force_n.to_string(), p.deflection_um.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::input("writing pairs", e))
}

/// Torsion log with torques in N·m on disk.
pub fn read_torsion_log<R: Read>(input: R) -> Result<Vec<TorsionSample>, CliError> {
    const WHAT: &str = "torsion log";
    let mut rdr = reader(input, &TORSION_HEADER, WHAT)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::input(WHAT, e))?;
        out.push(TorsionSample {
            tau_z_nmm: nm_to_nmm(parse(&rec, 0, WHAT)?),
            dtheta_z_deg: parse(&rec, 1, WHAT)?,
        });
    }
    Ok(out)
}

pub fn write_torsion_log<W: Write>(samples: &[TorsionSample], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::input("writing torsion log", e);
    w.write_record(TORSION_HEADER).map_err(err)?;
    for s in samples {
        w.write_record([nmm_to_nm(s.tau_z_nmm).to_string(), s.dtheta_z_deg.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::input("writing torsion log", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_round_trip() {
        let pairs = vec![
            ForcePair { link: 0, force_n: 1.0 / 3.0, deflection_um: -2.5 },
            ForcePair { link: 5, force_n: -7.25, deflection_um: 1e-17 },
        ];
        let mut buf = Vec::new();
        write_pairs(&pairs, &mut buf).unwrap();
        assert_eq!(read_pairs(buf.as_slice()).unwrap(), pairs);
    }

    #[test]
    fn torsion_log_keeps_units() {
        let got = read_torsion_log("tau_z_Nm,dtheta_z_deg\n0.5,0.08\n".as_bytes()).unwrap();
        assert_eq!(got[0].tau_z_nmm, 500.0);
        assert!(read_torsion_log("tau,theta\n1,2\n".as_bytes()).is_err());
    }
}
