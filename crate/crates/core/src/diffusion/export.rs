//! CSV export of paths and excursions.

use std::io::Write;

use super::excursions::ExcursionSet;
use super::gap::PathRecord;
use crate::error::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("csv: {other:?}")),
    }
}

/// Columns `event_time, atom_index, position`.
pub fn write_path_csv<W: Write>(path: &PathRecord, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["event_time", "atom_index", "position"]).map_err(csv_err)?;
    for e in path.events() {
        w.serialize((e.time, e.index, path.positions()[e.index as usize])).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `start_local_time, lifetime, max, sign`.
pub fn write_excursions_csv<W: Write>(set: &ExcursionSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["start_local_time", "lifetime", "max", "sign"]).map_err(csv_err)?;
    for e in &set.excursions {
        w.serialize((e.start_local_time, e.lifetime, e.max, e.sign)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{extract_excursions, simulate_gap_diffusion};
    use crate::measures::build_lebesgue;

    #[test]
    fn csv_shapes() {
        let m = build_lebesgue(1.0, 0.25).unwrap();
        let p = simulate_gap_diffusion(&m, 0.125, 3.0, 1).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("event_time,atom_index,position\n0.0,4,0.125\n"));
        assert_eq!(text.lines().count(), p.len() + 1);
        let set = extract_excursions(&p, 0.125).unwrap();
        let mut buf = Vec::new();
        write_excursions_csv(&set, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), set.excursions.len() + 1);
    }
}
