//! Trajectory serialization.
//!
//! CSV layout: one header line, then one row per sample with columns
//! `t`, every diagnostic channel in order, then `re_<c>_<n>`, `im_<c>_<n>` for
//! n = 1.. where `<c>` is `zeta` or `u`. Floats use the shortest
//! representation that round-trips exactly.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrator::{Coordinates, StepStats, Trajectory};
use crate::types::RunConfig;

fn prefix(c: Coordinates) -> &'static str {
    match c {
        Coordinates::Birkhoff => "zeta",
        Coordinates::Fourier => "u",
    }
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> Result<()> {
    let p = prefix(traj.coordinates);
    let width = traj.values.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend(traj.channels.iter().map(|(n, _)| n.clone()));
    for n in 1..=width {
        header.push(format!("re_{p}_{n}"));
        header.push(format!("im_{p}_{n}"));
    }
    writeln!(w, "{}", header.join(","))?;
    for i in 0..traj.len() {
        let mut row = vec![traj.times[i].to_string()];
        row.extend(traj.channels.iter().map(|(_, v)| v[i].to_string()));
        for z in &traj.values[i] {
            row.push(z.re.to_string());
            row.push(z.im.to_string());
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Inverse of [`write_trajectory_csv`]; the configuration is supplied separately.
pub fn read_trajectory_csv<R: BufRead>(r: R, config: RunConfig) -> Result<Trajectory> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty trajectory file".into()))??;
    let cols: Vec<String> = header.split(',').map(str::to_string).collect();
    if cols.first().map(String::as_str) != Some("t") {
        return Err(Error::InvalidInput("trajectory header must start with t".into()));
    }
    let first_value = cols
        .iter()
        .position(|c| c.starts_with("re_"))
        .unwrap_or(cols.len());
    let coordinates = match cols.get(first_value).map(String::as_str) {
        Some(c) if c.starts_with("re_u_") => Coordinates::Fourier,
        _ => Coordinates::Birkhoff,
    };
    let names: Vec<String> = cols[1..first_value].to_vec();
    let width = (cols.len() - first_value) / 2;
    let mut times = Vec::new();
    let mut channels: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let nums = line
            .split(',')
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("line {}: {s:?}: {e}", lineno + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if nums.len() != cols.len() {
            return Err(Error::InvalidInput(format!(
                "line {}: {} fields, header has {}",
                lineno + 2,
                nums.len(),
                cols.len()
            )));
        }
        times.push(nums[0]);
        for (c, v) in channels.iter_mut().zip(&nums[1..first_value]) {
            c.push(*v);
        }
        values.push(
            (0..width)
                .map(|k| Complex64::new(nums[first_value + 2 * k], nums[first_value + 2 * k + 1]))
                .collect(),
        );
    }
    Ok(Trajectory {
        coordinates,
        times,
        values,
        channels: names.into_iter().zip(channels).collect(),
        config,
        stats: StepStats::default(),
    })
}

pub fn write_json<W: Write, T: serde::Serialize>(value: &T, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::InitialData;

    #[test]
    fn csv_round_trip_is_exact() {
        let traj = Trajectory {
            coordinates: Coordinates::Birkhoff,
            times: vec![0.0, 0.1, 0.2],
            values: vec![
                vec![Complex64::new(0.1, -1.0 / 3.0), Complex64::new(1e-17, 2.5)],
                vec![Complex64::new(0.2, 0.0), Complex64::new(-3.0, 1.0)],
                vec![Complex64::new(std::f64::consts::PI, 1e300), Complex64::new(0.0, -0.0)],
            ],
            channels: vec![("a".into(), vec![1.0, 2.0, 3.0]), ("b".into(), vec![0.5, 0.25, 1.0 / 7.0])],
            config: RunConfig::new(0.5, 2, 1.0, InitialData::OneGap { r: 0.5 }),
            stats: StepStats::default(),
        };
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,a,b,re_zeta_1,im_zeta_1,re_zeta_2,im_zeta_2\n"));
        let back = read_trajectory_csv(buf.as_slice(), traj.config.clone()).unwrap();
        assert_eq!(back, traj);
    }
}
